"""
Lattice model data: dispersion functions, pair potentials, torus grids.

A dispersion function is stored as its finitely supported Fourier
coefficients ``eps_hat: Z^d -> C``; its symbol on the torus is

    eps(p) = sum_s eps_hat(s) exp(i (s, p)).

Particle masses are not stored separately. Scale the coefficients by
``1/m`` (see :func:`scale_dispersion`) before building a model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema
import numpy as np

Site = tuple[int, ...]

HERMITIAN_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a model fails validation or a file cannot be parsed."""


class OffGridError(ValueError):
    """Raised when a momentum is required to lie on a torus grid but does not."""


def _as_site(site: Iterable[int]) -> Site:
    return tuple(int(c) for c in site)


def _freeze(coeffs: Mapping[Iterable[int], complex] | Iterable, cast) -> tuple:
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    merged: dict[Site, complex] = {}
    for site, value in items:
        s = _as_site(site)
        merged[s] = merged.get(s, 0) + cast(value)
    return tuple(sorted(merged.items()))


def plus_norm(y) -> np.ndarray:
    """The l1 norm ``|y|_+`` over the last axis."""
    return np.abs(np.asarray(y)).sum(axis=-1)


@dataclass(frozen=True)
class DispersionFunction:
    """Fourier coefficients of a single-particle hopping operator.

    Parameters
    ----------
    coeffs : mapping or iterable of (site, value)
        Finitely supported coefficients; sites are integer d-vectors.
    holder_order : float
        Regularity exponent used by :func:`regularity_weight`.
    """

    coeffs: tuple = ()
    holder_order: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _freeze(self.coeffs, complex))

    @property
    def dim(self) -> int | None:
        return len(self.coeffs[0][0]) if self.coeffs else None

    def as_dict(self) -> dict[Site, complex]:
        return dict(self.coeffs)

    def __call__(self, p):
        return symbol_eval(self, p)


@dataclass(frozen=True)
class PairPotential:
    """Real pair potential ``v_hat_ij(x_i - x_j)`` between particles i < j (1-based)."""

    i: int
    j: int
    coeffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _freeze(self.coeffs, complex))

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def dim(self) -> int | None:
        return len(self.coeffs[0][0]) if self.coeffs else None

    def as_dict(self) -> dict[Site, complex]:
        return dict(self.coeffs)

    def value_at(self, y) -> np.ndarray:
        """Evaluate ``v_hat`` at integer sites ``y`` (shape ``(..., d)``); zero off support."""
        y = np.asarray(y, dtype=np.int64)
        out = np.zeros(y.shape[:-1], dtype=float)
        for site, value in self.coeffs:
            out = out + value.real * np.all(y == np.asarray(site), axis=-1)
        return out


@dataclass(frozen=True)
class ModelSpec:
    """N particles on Z^d with dispersions and pair potentials.

    Particles are numbered 1..N as in the physics notation.
    """

    N: int
    d: int
    dispersions: tuple[DispersionFunction, ...]
    potentials: tuple[PairPotential, ...] = ()
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dispersions", tuple(self.dispersions))
        object.__setattr__(self, "potentials", tuple(self.potentials))

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(1, self.N + 1) for j in range(i + 1, self.N + 1)]

    def potential(self, i: int, j: int) -> PairPotential | None:
        for v in self.potentials:
            if v.pair == (i, j):
                return v
        return None

    def with_pairs(self, keep: Iterable[tuple[int, int]]) -> ModelSpec:
        """Same particles, only the potentials whose pair is in ``keep``."""
        keep = set(keep)
        return ModelSpec(self.N, self.d, self.dispersions,
                         tuple(v for v in self.potentials if v.pair in keep), self.delta)

    def free(self) -> ModelSpec:
        return self.with_pairs(())

    def restricted(self, block: Iterable[int]) -> ModelSpec:
        """Subsystem of the particles in ``block``, renumbered 1..m in increasing order."""
        block = sorted(set(block))
        if not block or block[0] < 1 or block[-1] > self.N:
            raise ModelError(f"block {block} not within 1..{self.N}")
        relabel = {a: n + 1 for n, a in enumerate(block)}
        pots = tuple(PairPotential(relabel[v.i], relabel[v.j], v.coeffs)
                     for v in self.potentials if v.i in relabel and v.j in relabel)
        return ModelSpec(len(block), self.d, tuple(self.dispersions[a - 1] for a in block),
                         pots, self.delta)


def scale_dispersion(f: DispersionFunction, factor: float) -> DispersionFunction:
    """Multiply all coefficients by ``factor`` (e.g. ``1/m`` to absorb a mass)."""
    return DispersionFunction(tuple((s, factor * c) for s, c in f.coeffs), f.holder_order)


# -- symbols ---------------------------------------------------------------

def _coeff_arrays(f) -> tuple[np.ndarray, np.ndarray]:
    coeffs = f.coeffs if hasattr(f, "coeffs") else _freeze(f, complex)
    if not coeffs:
        return np.zeros((0, 0), dtype=np.int64), np.zeros(0, dtype=complex)
    sites = np.array([s for s, _ in coeffs], dtype=np.int64)
    values = np.array([c for _, c in coeffs], dtype=complex)
    return sites, values


def symbol_eval(f, p):
    """Trigonometric polynomial ``sum_s c(s) exp(i (s, p))``.

    ``f`` is a :class:`DispersionFunction`, :class:`PairPotential` or a raw
    mapping site -> value. ``p`` has shape ``(d,)`` or ``(..., d)``; the
    result has the leading shape of ``p``. No ``(2 pi)`` factors are applied.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("momentum must be finite")
    sites, values = _coeff_arrays(f)
    if len(values) == 0:
        return np.zeros(p.shape[:-1], dtype=complex) if p.ndim > 1 else 0j
    if p.shape[-1] != sites.shape[1]:
        raise ValueError(f"momentum has dimension {p.shape[-1]}, coefficients have {sites.shape[1]}")
    phase = np.tensordot(p, sites.T, axes=([-1], [0]))
    out = np.exp(1j * phase) @ values
    return complex(out) if p.ndim == 1 else out


def regularity_weight(f: DispersionFunction, delta: float | None = None) -> float:
    """``sum_y |y|_+^delta |eps_hat(y)|``; ``delta`` defaults to ``f.holder_order``."""
    delta = f.holder_order if delta is None else delta
    total = 0.0
    for site, value in f.coeffs:
        n = sum(abs(c) for c in site)
        if n:
            total += n ** delta * abs(value)
    return total


def lipschitz_weight(f: DispersionFunction) -> float:
    """Bound on ``|eps(p) - eps(p')| / |p - p'|_inf``."""
    return regularity_weight(f, 1.0)


# -- validation ------------------------------------------------------------

def validate_model(m: ModelSpec) -> list[str]:
    """Return a list of human-readable violations; empty when the model is admissible."""
    problems: list[str] = []
    if m.N < 2:
        problems.append(f"N={m.N}: need at least 2 particles")
    if m.d < 1:
        problems.append(f"d={m.d}: dimension must be >= 1")
    if len(m.dispersions) != m.N:
        problems.append(f"{len(m.dispersions)} dispersions given for N={m.N}")
    for n, f in enumerate(m.dispersions, start=1):
        table = f.as_dict()
        for site, value in table.items():
            if len(site) != m.d:
                problems.append(f"dispersion {n}: site {site} has dimension {len(site)}, expected {m.d}")
                continue
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                problems.append(f"dispersion {n}: non-finite coefficient at {site}")
                continue
            mirror = table.get(tuple(-c for c in site), 0j)
            if abs(mirror - value.conjugate()) > HERMITIAN_TOL * max(1.0, abs(value)):
                problems.append(f"dispersion {n}: hermitian symmetry violated at {site}")
        if f.holder_order <= 0:
            problems.append(f"dispersion {n}: holder order must be positive")
    seen = set()
    for v in m.potentials:
        if not (1 <= v.i < v.j <= m.N):
            problems.append(f"potential ({v.i},{v.j}): need 1 <= i < j <= {m.N}")
        if v.pair in seen:
            problems.append(f"potential ({v.i},{v.j}) given twice")
        seen.add(v.pair)
        for site, value in v.coeffs:
            if len(site) != m.d:
                problems.append(f"potential ({v.i},{v.j}): site {site} has dimension {len(site)}")
            elif not math.isfinite(abs(value)):
                problems.append(f"potential ({v.i},{v.j}): non-finite value at {site}")
            elif value.imag != 0:
                problems.append(f"potential ({v.i},{v.j}): complex value at {site}")
    if m.delta <= 0:
        problems.append("delta must be positive")
    return problems


def require_valid(m: ModelSpec) -> None:
    problems = validate_model(m)
    if problems:
        raise ModelError("; ".join(problems))


# -- torus grids -----------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    """The M-point subgroup of the circle, per axis, in ``d`` dimensions.

    Axis momenta are ``2 pi (k - M//2) / M`` for ``k = 0..M-1``. For even M
    this is ``-pi + 2 pi k / M``; for odd M the points are shifted by
    ``pi / M`` so that the set stays closed under addition mod 2 pi.
    """

    M: int
    d: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("grid needs M >= 2 points per axis")
        if self.d < 1:
            raise ValueError("grid dimension must be >= 1")

    @property
    def spacing(self) -> float:
        return 2 * math.pi / self.M

    @property
    def axis(self) -> np.ndarray:
        return self.spacing * (np.arange(self.M) - self.M // 2)

    @property
    def size(self) -> int:
        return self.M ** self.d

    def points(self) -> np.ndarray:
        """All ``M**d`` momenta, lexicographic in the axis index, shape ``(M**d, d)``."""
        idx = np.indices((self.M,) * self.d).reshape(self.d, -1).T
        return self.axis[idx]

    # group labels n in Z_M (momentum 2 pi n / M) <-> ordering index k
    def to_group(self, k) -> np.ndarray:
        return (np.asarray(k) - self.M // 2) % self.M

    def from_group(self, n) -> np.ndarray:
        return (np.asarray(n) + self.M // 2) % self.M

    def index_of(self, p, tol: float = 1e-9) -> tuple[int, ...]:
        """Ordering index of momentum ``p`` (any representative mod 2 pi)."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.shape != (self.d,):
            raise OffGridError(f"momentum {p.tolist()} has wrong dimension for a {self.d}-d grid")
        x = p / self.spacing
        n = np.rint(x)
        if np.any(np.abs(x - n) > tol / self.spacing):
            raise OffGridError(f"momentum {p.tolist()} is not on the M={self.M} grid")
        return tuple(int(k) for k in self.from_group(n.astype(np.int64)))

    def group_of(self, p) -> np.ndarray:
        return self.to_group(np.array(self.index_of(p)))

    def momentum(self, index: Sequence[int]) -> np.ndarray:
        return self.axis[np.asarray(index, dtype=np.int64)]

    def contains(self, p) -> bool:
        try:
            self.index_of(p)
        except OffGridError:
            return False
        return True


def grid_points(g: TorusGrid) -> np.ndarray:
    return g.points()


# -- desk models -----------------------------------------------------------

def nearest_neighbor_dispersion(d: int = 1, hopping: float = 0.5) -> DispersionFunction:
    """``eps(p) = sum_k (2 hopping)(1 - cos p_k)`` on Z^d: ``{0: 2dh, +-e_k: -h}``."""
    zero = (0,) * d
    coeffs = {zero: 2 * d * hopping}
    for k in range(d):
        e = [0] * d
        e[k] = 1
        coeffs[tuple(e)] = -hopping
        e[k] = -1
        coeffs[tuple(e)] = -hopping
    return DispersionFunction(coeffs)


def contact_potential(i: int, j: int, strength: float, d: int = 1) -> PairPotential:
    return PairPotential(i, j, {(0,) * d: strength})


def exponential_tail_potential(i: int, j: int, d: int = 1, radius: int = 40,
                               amplitude: float = 1.0) -> PairPotential:
    """``v_hat(x) = amplitude * exp(-|x|_+)`` truncated to ``|x|_+ <= radius``."""
    rng = range(-radius, radius + 1)
    sites = np.array(np.meshgrid(*([rng] * d), indexing="ij")).reshape(d, -1).T
    sites = sites[plus_norm(sites) <= radius]
    return PairPotential(i, j, {tuple(s): amplitude * math.exp(-plus_norm(s)) for s in sites})


def model_l1(lam: float = 1.0) -> ModelSpec:
    """Two particles on Z with ``eps(p) = 1 - cos p`` and a contact potential of strength ``lam``."""
    eps = nearest_neighbor_dispersion(1)
    return ModelSpec(2, 1, (eps, eps), (contact_potential(1, 2, lam),))


def model_l2(lam12: float = 1.0, lam13: float = 1.0, lam23: float = 1.0) -> ModelSpec:
    """Three particles on Z with ``eps(p) = 1 - cos p`` and contact potentials per pair."""
    eps = nearest_neighbor_dispersion(1)
    pots = tuple(contact_potential(i, j, lam)
                 for (i, j), lam in (((1, 2), lam12), ((1, 3), lam13), ((2, 3), lam23)))
    return ModelSpec(3, 1, (eps, eps, eps), pots)


# -- JSON model files ------------------------------------------------------

_SITE = {"type": "array", "items": {"type": "integer"}, "minItems": 1}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["d", "N", "dispersions"],
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 2},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "dispersions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["coeffs"],
                "properties": {
                    "coeffs": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["site", "re"],
                            "properties": {"site": _SITE, "re": {"type": "number"},
                                           "im": {"type": "number"}},
                        },
                    },
                },
            },
        },
        "potentials": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["i", "j", "coeffs"],
                "properties": {
                    "i": {"type": "integer"},
                    "j": {"type": "integer"},
                    "coeffs": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["site", "value"],
                            "properties": {"site": _SITE, "value": {"type": "number"}},
                        },
                    },
                },
            },
        },
    },
}


def model_from_dict(doc: dict) -> ModelSpec:
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelError(f"model file invalid at {where}: {exc.message}") from None
    delta = float(doc.get("delta", 1.0))
    disps = tuple(
        DispersionFunction({tuple(c["site"]): complex(c["re"], c.get("im", 0.0)) for c in f["coeffs"]},
                           holder_order=delta)
        for f in doc["dispersions"])
    pots = tuple(PairPotential(v["i"], v["j"], {tuple(c["site"]): c["value"] for c in v["coeffs"]})
                 for v in doc.get("potentials", []))
    m = ModelSpec(doc["N"], doc["d"], disps, pots, delta)
    require_valid(m)
    return m


def model_to_dict(m: ModelSpec) -> dict:
    return {
        "d": m.d,
        "N": m.N,
        "delta": m.delta,
        "dispersions": [
            {"coeffs": [{"site": list(s), "re": c.real, "im": c.imag} for s, c in f.coeffs]}
            for f in m.dispersions],
        "potentials": [
            {"i": v.i, "j": v.j, "coeffs": [{"site": list(s), "value": c.real} for s, c in v.coeffs]}
            for v in m.potentials],
    }


def load_model(path: str | Path) -> ModelSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)


def save_model(m: ModelSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n")
