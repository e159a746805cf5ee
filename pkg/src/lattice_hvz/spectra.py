"""
Spectra of fiber and cluster operators.

Grid sampling turns a continuous band into a finite list of values.
:func:`spectrum_from_samples` chains values closer than ``merge_eps`` into
closed intervals. Every :class:`SpectrumSet` carries that resolution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .clusters import ClusterDecomposition, enumerate_partitions, two_cluster_decompositions
from .model import ModelSpec, TorusGrid, lipschitz_weight, require_valid
from .operators import HermitianOperator, build_fiber_momentum, build_subsystem, hermitian_defect

EIG_HERMITIAN_TOL = 1e-10


class NonHermitianError(ValueError):
    pass


def eigenvalues(H) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian operator or matrix (dense solver)."""
    A = H.matrix if isinstance(H, HermitianOperator) else H
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if hermitian_defect(A) > EIG_HERMITIAN_TOL * scale:
        raise NonHermitianError("matrix is not Hermitian")
    return np.linalg.eigvalsh(A)


# -- interval sets ---------------------------------------------------------

def _merge_pieces(pieces: Iterable[tuple[float, float]], eps: float):
    """Merge closed pieces whose gaps are <= eps; degenerate results become points."""
    pieces = sorted(pieces)
    merged: list[list[float]] = []
    for lo, hi in pieces:
        if merged and lo - merged[-1][1] <= eps:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    intervals = tuple((lo, hi) for lo, hi in merged if hi > lo)
    points = tuple(lo for lo, hi in merged if hi == lo)
    return intervals, points


@dataclass(frozen=True)
class SpectrumSet:
    """Finite union of disjoint closed intervals and isolated points."""

    intervals: tuple[tuple[float, float], ...] = ()
    points: tuple[float, ...] = ()
    merge_eps: float = 0.0

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        pts = tuple(sorted(float(x) for x in self.points))
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "points", pts)
        if any(hi <= lo for lo, hi in ivs):
            raise ValueError("intervals must have lo < hi")
        pieces = sorted([iv for iv in ivs] + [(x, x) for x in pts])
        for (a_lo, a_hi), (b_lo, b_hi) in zip(pieces, pieces[1:]):
            if b_lo - a_hi <= self.merge_eps:
                raise ValueError(f"pieces [{a_lo}, {a_hi}] and [{b_lo}, {b_hi}] are within merge_eps")

    @classmethod
    def from_pieces(cls, pieces: Iterable[tuple[float, float]], merge_eps: float) -> SpectrumSet:
        intervals, points = _merge_pieces(pieces, merge_eps)
        return cls(intervals, points, merge_eps)

    @property
    def pieces(self) -> list[tuple[float, float]]:
        return sorted(list(self.intervals) + [(x, x) for x in self.points])

    def is_empty(self) -> bool:
        return not self.intervals and not self.points

    @property
    def min(self) -> float:
        return self.pieces[0][0] if not self.is_empty() else math.inf

    @property
    def max(self) -> float:
        return self.pieces[-1][1] if not self.is_empty() else -math.inf

    def distance(self, x) -> np.ndarray | float:
        """Distance from ``x`` (scalar or array) to the set; ``inf`` for the empty set."""
        xs = np.asarray(x, dtype=float)
        if self.is_empty():
            return np.full(xs.shape, np.inf) if xs.ndim else math.inf
        lo = np.array([p[0] for p in self.pieces])
        hi = np.array([p[1] for p in self.pieces])
        gap = np.maximum(lo - xs[..., None], 0) + np.maximum(xs[..., None] - hi, 0)
        out = gap.min(axis=-1)
        return float(out) if xs.ndim == 0 else out

    def contains(self, x, tol: float = 0.0):
        return np.asarray(self.distance(x)) <= tol

    def inflate(self, eps: float) -> SpectrumSet:
        """Closed ``eps``-neighbourhood of the set, re-merged at the same resolution."""
        return SpectrumSet.from_pieces([(lo - eps, hi + eps) for lo, hi in self.pieces], self.merge_eps)

    def union(self, other: SpectrumSet) -> SpectrumSet:
        return SpectrumSet.from_pieces(self.pieces + other.pieces, max(self.merge_eps, other.merge_eps))

    def __or__(self, other: SpectrumSet) -> SpectrumSet:
        return self.union(other)

    def __add__(self, other: SpectrumSet) -> SpectrumSet:
        return minkowski_sum(self, other)

    def isclose(self, other: SpectrumSet, atol: float = 1e-12) -> bool:
        """Same number of intervals and points with endpoints equal to ``atol``."""
        if len(self.intervals) != len(other.intervals) or len(self.points) != len(other.points):
            return False
        a = np.array(self.pieces, dtype=float).reshape(-1, 2)
        b = np.array(other.pieces, dtype=float).reshape(-1, 2)
        return bool(np.all(np.abs(a - b) <= atol))

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals], "points": list(self.points),
                "merge_eps": self.merge_eps}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> SpectrumSet:
        return cls(tuple(tuple(iv) for iv in doc["intervals"]), tuple(doc["points"]), doc["merge_eps"])

    @classmethod
    def from_json(cls, text: str) -> SpectrumSet:
        return cls.from_dict(json.loads(text))


def spectrum_from_samples(values: Iterable[float], merge_eps: float) -> SpectrumSet:
    """Chain sorted samples closer than ``merge_eps`` into intervals; lone values become points."""
    if merge_eps <= 0:
        raise ValueError("merge_eps must be positive")
    v = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel())
    if v.size == 0:
        return SpectrumSet((), (), merge_eps)
    breaks = np.flatnonzero(np.diff(v) > merge_eps)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [v.size - 1]))
    return SpectrumSet.from_pieces(zip(v[starts], v[ends]), merge_eps)


def minkowski_sum(A: SpectrumSet, B: SpectrumSet) -> SpectrumSet:
    """``{a + b}`` piecewise, re-merged at the coarser of the two resolutions."""
    eps = max(A.merge_eps, B.merge_eps)
    return SpectrumSet.from_pieces(
        [(a_lo + b_lo, a_hi + b_hi) for a_lo, a_hi in A.pieces for b_lo, b_hi in B.pieces], eps)


# -- grid resolution -------------------------------------------------------

def default_merge_eps(m: ModelSpec, M: int) -> float:
    """One grid step times the largest per-step change of any cluster energy.

    Moving one momentum coordinate by ``2 pi / M`` changes the energy of any
    fiber or subsystem by at most ``(w_a + w_b) 2 pi / M``. Here ``w`` are the
    Lipschitz weights of the two dispersions involved. The two largest
    weights therefore bound every sampling gap of a connected band.
    """
    w = sorted((lipschitz_weight(f) for f in m.dispersions), reverse=True)
    step = (w[0] + w[1]) if len(w) > 1 else w[0]
    if step == 0:
        step = 1e-3
    return step * 2 * math.pi / M


@dataclass(frozen=True)
class GridParams:
    """Grid sizes for cluster spectra; ``Mk`` and ``merge_eps`` default from ``M``."""

    M: int
    Mk: int | None = None
    merge_eps: float | None = None
    threads: int = 1

    def kgrid(self, d: int) -> TorusGrid:
        return TorusGrid(self.Mk or self.M, d)

    def subgrid(self, d: int) -> TorusGrid:
        return TorusGrid(self.M, d)

    def eps(self, m: ModelSpec) -> float:
        return self.merge_eps if self.merge_eps is not None else default_merge_eps(m, self.M)


def _params(params: GridParams | int) -> GridParams:
    return params if isinstance(params, GridParams) else GridParams(int(params))


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cluster_samples(m: ModelSpec, C: ClusterDecomposition, K, params: GridParams | int) -> np.ndarray:
    """All sums ``sigma(h^{C_1}(k_1)) + ... + sigma(h^{C_l}(k_l))`` over grid tuples with ``sum k = K``."""
    params = _params(params)
    if len(C) < 2:
        raise ValueError("cluster spectra need #C >= 2; use the full fiber for one block")
    if C.N != m.N:
        raise ValueError(f"decomposition of {C.N} particles for an N={m.N} model")
    kgrid = params.kgrid(m.d)
    sub = params.subgrid(m.d)
    K = np.atleast_1d(np.asarray(K, dtype=float))
    K_n = kgrid.group_of(K)
    l = len(C)
    cache: dict = {}

    def spec(block: tuple[int, ...], n: tuple[int, ...]) -> np.ndarray:
        key = (block, n)
        if key not in cache:
            k = kgrid.spacing * np.asarray(n)
            cache[key] = eigenvalues(build_subsystem(m, block, k, sub))
        return cache[key]

    labels = [tuple(t) for t in np.indices((kgrid.M,) * m.d).reshape(m.d, -1).T]
    out = []
    for tup in product(labels, repeat=l - 1):
        last = tuple(int(x) for x in (K_n - np.sum(tup, axis=0, dtype=np.int64)) % kgrid.M) if tup else tuple(K_n)
        ns = list(tup) + [last]
        total = np.zeros(1)
        for block, n in zip(C.blocks, ns):
            total = (total[:, None] + spec(block, tuple(int(x) for x in n))[None, :]).ravel()
        out.append(total)
    return np.concatenate(out)


def cluster_spectrum(m: ModelSpec, C: ClusterDecomposition, K, params: GridParams | int) -> SpectrumSet:
    """Sampled spectrum of the cluster operator H^C(K) from its subsystem spectra."""
    params = _params(params)
    require_valid(m)
    return spectrum_from_samples(cluster_samples(m, C, K, params), params.eps(m))


def cluster_union(m: ModelSpec, K, params: GridParams | int, decompositions: Sequence[ClusterDecomposition]) -> SpectrumSet:
    params = _params(params)
    sets = _map(lambda D: cluster_spectrum(m, D, K, params), list(decompositions), params.threads)
    out = SpectrumSet((), (), params.eps(m))
    for s in sets:
        out = out | s
    return out


def hvz_spectrum(m: ModelSpec, K, params: GridParams | int) -> SpectrumSet:
    """Essential spectrum of H(K): union of the two-cluster spectra."""
    return cluster_union(m, K, params, two_cluster_decompositions(m.N))


def multi_cluster_union(m: ModelSpec, K, params: GridParams | int) -> SpectrumSet:
    """Union of the spectra of all cluster operators with at least two clusters."""
    return cluster_union(m, K, params, [D for D in enumerate_partitions(m.N) if len(D) >= 2])


@dataclass(frozen=True)
class DiscreteLevel:
    value: float
    distance: float
    borderline: bool


def classify_levels(m: ModelSpec, K, params: GridParams | int,
                    ess: SpectrumSet | None = None) -> list[DiscreteLevel]:
    """Full-fiber eigenvalues farther than ``merge_eps`` from the essential spectrum.

    Levels within twice the resolution are flagged ``borderline``.
    """
    params = _params(params)
    ess = hvz_spectrum(m, K, params) if ess is None else ess
    eps = params.eps(m)
    evals = eigenvalues(build_fiber_momentum(m, K, params.subgrid(m.d)))
    dist = np.atleast_1d(ess.distance(evals))
    return [DiscreteLevel(float(e), float(r), bool(r <= 2 * eps))
            for e, r in zip(evals, dist) if r > eps]


def discrete_spectrum(m: ModelSpec, K, params: GridParams | int) -> np.ndarray:
    return np.array([lev.value for lev in classify_levels(m, K, params)])


# -- K sweeps --------------------------------------------------------------

@dataclass
class BandStructure:
    K_values: list[np.ndarray] = field(default_factory=list)
    essential: list[SpectrumSet] = field(default_factory=list)
    levels: list[list[DiscreteLevel]] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for K, ess, levs in zip(self.K_values, self.essential, self.levels):
            kcols = {f"K{n + 1}": float(k) for n, k in enumerate(K)}
            for lo, hi in ess.pieces:
                out.append({**kcols, "band_lo": lo, "band_hi": hi, "level": ""})
            for lev in levs:
                out.append({**kcols, "band_lo": "", "band_hi": "", "level": lev.value})
        return out

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        d = len(self.K_values[0]) if self.K_values else 1
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.DictWriter(buf, [f"K{n + 1}" for n in range(d)] + ["band_lo", "band_hi", "level"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def sweep_momenta(grid: TorusGrid, S: int) -> list[np.ndarray]:
    """``S**d`` quasi-momenta ``2 pi n / S`` per axis, in grid order; requires ``S | M``."""
    if S < 1 or grid.M % S:
        raise ValueError(f"sweep count S={S} must divide the grid size M={grid.M}")
    step = grid.M // S
    ks = sorted(int(grid.from_group(n * step)) for n in range(S))
    return [grid.momentum(idx) for idx in product(ks, repeat=grid.d)]


def band_structure(m: ModelSpec, params: GridParams | int, S: int) -> BandStructure:
    params = _params(params)
    grid = params.subgrid(m.d)
    Ks = sweep_momenta(grid, S)
    serial = GridParams(params.M, params.Mk, params.merge_eps, 1)

    def one(K):
        ess = hvz_spectrum(m, K, serial)
        return ess, classify_levels(m, K, serial, ess)

    results = _map(one, Ks, params.threads)
    return BandStructure(Ks, [r[0] for r in results], [r[1] for r in results])
