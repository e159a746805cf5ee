"""
Numerical certification of the cutoff estimates on truncated coordinate boxes.

The cutoff ``rho`` switches off the region where particles of different
clusters are close. Its commutator with the kinetic energy decays like
``r**-delta``, and a pair potential restricted to separations ``>= r`` is
bounded by the potential's tail. Together they let an eigenvector of a finer
cluster operator be transplanted into an approximate eigenvector of a coarser
one. :func:`weyl_transplant` re-enacts that step on a finite box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .clusters import ClusterDecomposition, is_refinement, pair_split
from .model import ModelSpec, plus_norm, regularity_weight, require_valid
from .operators import FiberBasis, build_cluster_fiber, build_fiber_coordinate

BOX_FACTOR = 8
DENSE_NORM_LIMIT = 2000


class BoxTooSmallError(ValueError):
    """The box half-width is below ``BOX_FACTOR * r``."""


def psi(t, delta: float = 1.0) -> np.ndarray:
    """Profile ``clamp(t - 1, 0, 1)**delta``: 0 below 1, 1 above 2."""
    return np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0) ** delta


@dataclass(frozen=True)
class CutoffSpec:
    """Hölder data of the product cutoff built from :func:`psi`.

    ``holder_constant`` counts the factors of the product. Each factor moves by
    at most ``(|dx|_+ / r)**delta`` when the sites move by ``dx``.
    """

    holder_order: float = 1.0
    holder_constant: float = 1.0
    profile: Callable = field(default=psi, compare=False)

    def __post_init__(self):
        if not 0 < self.holder_order <= 1:
            raise ValueError("holder_order must lie in (0, 1]")
        if self.holder_constant < 0:
            raise ValueError("holder_constant must be >= 0")

    @classmethod
    def for_decomposition(cls, C: ClusterDecomposition, delta: float = 1.0) -> CutoffSpec:
        return cls(delta, float(len(pair_split(C)[1])))


def _pair_offsets(sites: np.ndarray, i: int, j: int, N: int) -> np.ndarray:
    """``y_i - y_j`` per state with particle N pinned at the origin."""
    yi = sites[:, i - 1, :] if i < N else 0
    yj = sites[:, j - 1, :] if j < N else 0
    return yi - yj


def cutoff_rho(C: ClusterDecomposition, r: float, sites: np.ndarray, delta: float = 1.0) -> np.ndarray:
    """``prod_{ij external} psi(|y_i - y_j|_+ / r)`` at every box state.

    Parameters
    ----------
    C : ClusterDecomposition
        Pairs in different blocks are cut off.
    r : float
        Cutoff scale, ``r >= 1``.
    sites : ndarray
        ``(S, N-1, d)`` lattice positions, as from ``FiberBasis.sites()``.
    """
    if r < 1:
        raise ValueError(f"cutoff scale r={r} must be >= 1")
    sites = np.asarray(sites)
    N = sites.shape[1] + 1
    if C.N != N:
        raise ValueError(f"decomposition of {C.N} particles for box states of {N}")
    rho = np.ones(sites.shape[0])
    for i, j in pair_split(C)[1]:
        rho *= psi(plus_norm(_pair_offsets(sites, i, j, N)) / r, delta)
    return rho


def operator_norm(A) -> float:
    """Spectral norm of a Hermitian (or i times anti-Hermitian) matrix."""
    if sp.issparse(A):
        if A.nnz == 0:
            return 0.0
        if A.shape[0] > DENSE_NORM_LIMIT:
            w = eigsh(A, k=1, which="LM", tol=1e-10, return_eigenvectors=False)
            return float(abs(w[0]))
        A = A.toarray()
    w = np.linalg.eigvalsh(A)
    return float(np.max(np.abs(w))) if w.size else 0.0


@dataclass(frozen=True)
class BoundCheck:
    r: float
    measured: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound * (1 + 1e-9) + 1e-12


def _box_guard(r: float, L: int) -> None:
    if r < 1:
        raise ValueError(f"cutoff scale r={r} must be >= 1")
    if L < BOX_FACTOR * r:
        raise BoxTooSmallError(f"box too small: half-width {L} < {BOX_FACTOR}*r = {BOX_FACTOR * r:g}")


def commutator_bound_check(m: ModelSpec, K, r: float, L: int,
                           C: ClusterDecomposition | None = None,
                           delta: float | None = None) -> BoundCheck:
    """Measured ``||[H0(K), Phi_r]||`` on a truncated box against ``C_rho r^-delta sum_j w_delta(eps_j)``."""
    require_valid(m)
    _box_guard(r, L)
    C = ClusterDecomposition.finest(m.N) if C is None else C
    delta = m.delta if delta is None else delta
    H0 = build_fiber_coordinate(m.free(), K, L, "truncated").matrix.tocsr()
    rho = cutoff_rho(C, r, H0_sites(m, L), delta)
    Phi = sp.diags(rho)
    comm = (H0 @ Phi - Phi @ H0).tocsr()
    comm.eliminate_zeros()
    measured = operator_norm(1j * comm)
    spec = CutoffSpec.for_decomposition(C, delta)
    weight = sum(regularity_weight(f, delta) for f in m.dispersions)
    return BoundCheck(r, measured, spec.holder_constant * weight / r ** delta)


def H0_sites(m: ModelSpec, L: int) -> np.ndarray:
    return FiberBasis("coordinate", m.d, tuple(range(1, m.N)), m.N, L=L, boundary="truncated").sites()


def potential_cutoff_check(m: ModelSpec, pair: tuple[int, int], r: float, L: int,
                           amplitude: float = 1.0) -> BoundCheck:
    """Measured ``||V_ij Psi_r||`` against ``A sup_{|y|_+ >= r} |v_ij(y)|``.

    ``Psi_r`` is ``psi(|y_i - y_j|_+ / r)``, so it vanishes where the pair is
    closer than ``r``.
    """
    require_valid(m)
    if r < 1:
        raise ValueError(f"cutoff scale r={r} must be >= 1")
    i, j = sorted(pair)
    v = m.potential(i, j)
    if v is None:
        return BoundCheck(r, 0.0, 0.0)
    y = _pair_offsets(H0_sites(m, L), i, j, m.N)
    measured = float(np.max(np.abs(v.value_at(y) * psi(plus_norm(y) / r, m.delta))))
    tail = [abs(c) for s, c in v.coeffs if sum(abs(t) for t in s) >= r]
    return BoundCheck(r, measured, amplitude * max(tail, default=0.0))


@dataclass(frozen=True)
class TransplantStep:
    r: float
    cut_norm: float
    residual: float | None

    @property
    def accepted(self) -> bool:
        return self.residual is not None


@dataclass
class TransplantReport:
    eigenvalue: float
    eigen_residual: float
    steps: list[TransplantStep]
    threshold: float

    @property
    def residuals(self) -> list[float]:
        return [s.residual for s in self.steps if s.accepted]

    @property
    def monotone(self) -> bool:
        res = self.residuals
        return all(b <= a * (1 + 1e-9) for a, b in zip(res, res[1:]))

    @property
    def passed(self) -> bool:
        res = self.residuals
        return bool(res) and len(res) == len(self.steps) and self.monotone and res[-1] < self.threshold


def weyl_transplant(m: ModelSpec, C: ClusterDecomposition, D: ClusterDecomposition, K, L: int,
                    r_schedule: Sequence[float], target: float, threshold: float = 0.1,
                    candidates: int = 1) -> TransplantReport:
    """Cut an eigenvector of the boxed ``H^C`` down with ``rho_r`` and test it against ``H^D``.

    The eigenpair of the truncated-box ``H^C`` closest to ``target`` plays the
    role of a Weyl vector. For each ``r``, ``g_r = rho_r f / ||rho_r f||`` and
    the residual ``||(H^D - lambda) g_r||`` is recorded. Values of ``r`` with
    ``||rho_r f|| < 1/2`` are reported with residual ``None``.

    With ``candidates > 1`` the eigenpairs nearest ``target`` are computed and
    the one keeping the most norm under the largest cutoff is used, the box
    analogue of moving far enough along a Weyl sequence.
    """
    require_valid(m)
    if C == D or not is_refinement(C, D):
        raise ValueError(f"{C} must be a strict refinement of {D}")
    HC = build_cluster_fiber(m, C, K, L=L, boundary="truncated").matrix.tocsc()
    HD = build_cluster_fiber(m, D, K, L=L, boundary="truncated").matrix.tocsr()
    # A fixed start vector keeps the selected eigenvector reproducible.
    v0 = np.ones(HC.shape[0], dtype=HC.dtype)
    k = max(1, min(int(candidates), HC.shape[0] - 2))
    w, vec = eigsh(HC, k=k, sigma=target, which="LM", v0=v0, tol=1e-12)
    sites = H0_sites(m, L)
    if k > 1:
        rho = cutoff_rho(C, max(r_schedule), sites, m.delta)
        n = int(np.argmax(np.linalg.norm(rho[:, None] * vec, axis=0)))
    else:
        n = 0
    lam, f = float(w[n]), vec[:, n] / np.linalg.norm(vec[:, n])
    eig_res = float(np.linalg.norm(HC @ f - lam * f))
    steps = []
    for r in r_schedule:
        g = cutoff_rho(C, r, sites, m.delta) * f
        cut = float(np.linalg.norm(g))
        if cut < 0.5:
            steps.append(TransplantStep(r, cut, None))
            continue
        g /= cut
        steps.append(TransplantStep(r, cut, float(np.linalg.norm(HD @ g - lam * g))))
    return TransplantReport(lam, eig_res, steps, threshold)
