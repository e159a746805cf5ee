"""
Finite Hermitian realizations of the fiber operator H(K) = H0(K) - V.

Two bases are supported.

momentum
    Functions of the N-1 momenta of the non-eliminated particles on a
    :class:`~lattice_hvz.model.TorusGrid`. The eliminated particle carries
    ``K - sum(p)``. A potential between particles a < b moves momentum ``t``
    from b to a; the matrix element is ``M**-d * sum_s v_hat(s) exp(i (s, t))``.
    That is the ``(2 pi)**(-d/2) (2 pi / M)**d v(t)`` quadrature of the
    integral kernel.

coordinate
    Functions of the relative positions ``x_1..x_{N-1}`` (``x_N = 0``) on a
    box ``{-L..L}**d`` per particle, either periodic (wraparound) or
    truncated. Particle ``a < N`` hops in its own coordinate; particle N
    hops all coordinates at once, ``sum_s e^{i(s,K)} eps_hat_N(s) T(-s)^(x)(N-1)``.

With ``2L + 1 = M`` the periodic coordinate matrix and the momentum matrix are
unitarily equivalent by the discrete Fourier transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Literal

import numpy as np
import scipy.sparse as sp

from .clusters import ClusterDecomposition, pair_split
from .model import (ModelError, ModelSpec, OffGridError, TorusGrid, require_valid,
                    symbol_eval)

HERMITIAN_TOL = 1e-12
MAX_DENSE_DIM = 20000

Boundary = Literal["periodic", "truncated"]


@dataclass(frozen=True)
class FiberBasis:
    """Basis metadata for a fiber matrix.

    ``coords`` lists the particles (1-based) whose coordinates label the basis,
    in basis order; ``eliminated`` is the particle expressed through the others.
    """

    kind: Literal["momentum", "coordinate"]
    d: int
    coords: tuple[int, ...]
    eliminated: int
    grid: TorusGrid | None = None
    L: int | None = None
    boundary: Boundary | None = None

    @property
    def n_coords(self) -> int:
        return len(self.coords)

    @property
    def axis_size(self) -> int:
        return self.grid.M if self.kind == "momentum" else 2 * self.L + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.axis_size,) * (self.n_coords * self.d)

    @property
    def size(self) -> int:
        return self.axis_size ** (self.n_coords * self.d)

    def labels(self) -> np.ndarray:
        """Axis indices of every basis state, shape ``(size, n_coords, d)``."""
        idx = np.indices(self.shape).reshape(len(self.shape), -1).T
        return idx.reshape(-1, self.n_coords, self.d)

    def flat(self, labels: np.ndarray) -> np.ndarray:
        lab = labels.reshape(labels.shape[0], -1)
        return np.ravel_multi_index(tuple(lab.T), self.shape)

    def momenta(self) -> np.ndarray:
        """Momenta of the coordinate particles per state, shape ``(size, n_coords, d)``."""
        if self.kind != "momentum":
            raise TypeError("momenta are only defined on a momentum basis")
        return self.grid.axis[self.labels()]

    def sites(self) -> np.ndarray:
        """Lattice positions per state, shape ``(size, n_coords, d)``."""
        if self.kind != "coordinate":
            raise TypeError("sites are only defined on a coordinate basis")
        return self.labels() - self.L


@dataclass(frozen=True)
class HermitianOperator:
    """A Hermitian matrix together with the basis it is written in."""

    basis: FiberBasis
    matrix: np.ndarray | sp.spmatrix
    K: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or n != self.basis.size:
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis size {self.basis.size}")
        skew = hermitian_defect(self.matrix)
        if skew > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (max |A - A^H| = {skew:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def write_triplets(self, out: str | Path | IO[str], tol: float = 0.0) -> None:
        """Write nonzero entries as ``row col re im`` lines (0-based indices)."""
        coo = sp.coo_matrix(self.matrix)
        keep = np.abs(coo.data) > tol
        lines = [f"# {self.basis.kind} basis, dim {self.dim}, K {np.asarray(self.K).tolist()}"]
        lines += [f"{r} {c} {v.real:.17g} {v.imag:.17g}"
                  for r, c, v in zip(coo.row[keep], coo.col[keep], coo.data[keep])]
        text = "\n".join(lines) + "\n"
        if hasattr(out, "write"):
            out.write(text)
        else:
            Path(out).write_text(text)


def hermitian_defect(A) -> float:
    if sp.issparse(A):
        diff = (A - A.conj().T).tocoo()
        return float(np.max(np.abs(diff.data), initial=0.0))
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T), initial=0.0))


def read_triplets(path: str | Path, dim: int | None = None) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        r, c, re, im = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(complex(float(re), float(im)))
    n = dim if dim is not None else (max(max(rows), max(cols)) + 1 if rows else 0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


# -- momentum representation -----------------------------------------------

def _check_eliminate(m: ModelSpec, eliminate: int | None) -> int:
    e = m.N if eliminate is None else int(eliminate)
    if not 1 <= e <= m.N:
        raise ValueError(f"eliminate={e} outside 1..{m.N}")
    return e


def _as_momentum(K, d: int) -> np.ndarray:
    K = np.atleast_1d(np.asarray(K, dtype=float))
    if K.shape != (d,):
        raise ValueError(f"quasi-momentum {K.tolist()} should have dimension {d}")
    return K


def transfer_amplitudes(v, grid: TorusGrid) -> np.ndarray:
    """``w(t) = M**-d sum_s v_hat(s) exp(2 pi i (s, t) / M)`` for every group label ``t``.

    Returned with shape ``(M,)*d`` indexed by ``t mod M``.
    """
    t = np.indices((grid.M,) * grid.d).reshape(grid.d, -1).T
    w = symbol_eval(v, grid.spacing * t) if v.coeffs else np.zeros(len(t), dtype=complex)
    return (np.asarray(w) / grid.size).reshape((grid.M,) * grid.d)


@dataclass(frozen=True)
class MomentumFiber:
    """Free energies and per-pair potential matrices of a momentum fiber.

    ``H(K) = diag(energies) - sum(potentials.values())``.
    """

    basis: FiberBasis
    K: np.ndarray
    energies: np.ndarray
    potentials: dict

    def potential_sum(self, pairs: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
        keys = self.potentials.keys() if pairs is None else pairs
        out = np.zeros((self.basis.size,) * 2, dtype=complex)
        for key in keys:
            if key in self.potentials:
                out += self.potentials[key]
        return out

    def hamiltonian(self, pairs: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
        return np.diag(self.energies.astype(complex)) - self.potential_sum(pairs)

    def group_momenta(self) -> np.ndarray:
        """Group labels of all N particle momenta per state, shape ``(size, N, d)``.

        The eliminated particle's label is only meaningful when K is on the grid.
        """
        g = self.basis.grid
        lab = g.to_group(self.basis.labels())
        K_n = np.rint(self.K / g.spacing).astype(np.int64)
        full = np.zeros((lab.shape[0], len(self.basis.coords) + 1, g.d), dtype=np.int64)
        cols = [a - 1 for a in self.basis.coords]
        full[:, cols, :] = lab
        full[:, self.basis.eliminated - 1, :] = (K_n - lab.sum(axis=1)) % g.M
        return full


def momentum_fiber(m: ModelSpec, K, grid: TorusGrid, eliminate: int | None = None) -> MomentumFiber:
    """Assemble the momentum-fiber pieces without any grid check on K."""
    if grid.d != m.d:
        raise ValueError(f"grid dimension {grid.d} does not match model dimension {m.d}")
    e = _check_eliminate(m, eliminate)
    K = _as_momentum(K, m.d)
    coords = tuple(a for a in range(1, m.N + 1) if a != e)
    basis = FiberBasis("momentum", m.d, coords, e, grid=grid)
    if basis.size > MAX_DENSE_DIM:
        raise ValueError(f"momentum basis of size {basis.size} is too large for dense assembly")

    labels = basis.labels()
    p = grid.axis[labels]
    p_elim = K - p.sum(axis=1)
    energies = np.zeros(basis.size)
    for slot, a in enumerate(coords):
        energies += np.real(symbol_eval(m.dispersions[a - 1], p[:, slot, :]))
    energies += np.real(symbol_eval(m.dispersions[e - 1], p_elim))

    slot_of = {a: s for s, a in enumerate(coords)}
    transfers = np.indices((grid.M,) * grid.d).reshape(grid.d, -1).T
    rows = np.arange(basis.size)
    base = grid.to_group(labels)
    potentials = {}
    for v in m.potentials:
        w = transfer_amplitudes(v, grid).reshape(-1)
        mat = np.zeros((basis.size, basis.size), dtype=complex)
        for t_idx, t in enumerate(transfers):
            if w[t_idx] == 0:
                continue
            shifted = base.copy()
            if v.i in slot_of:
                shifted[:, slot_of[v.i], :] += t
            if v.j in slot_of:
                shifted[:, slot_of[v.j], :] -= t
            cols = basis.flat(grid.from_group(shifted % grid.M))
            np.add.at(mat, (rows, cols), w[t_idx])
        potentials[v.pair] = mat
    return MomentumFiber(basis, K, energies, potentials)


def build_fiber_momentum(m: ModelSpec, K, grid: TorusGrid, eliminate: int | None = None,
                         pairs: Iterable[tuple[int, int]] | None = None) -> HermitianOperator:
    """Momentum-grid matrix of H(K); only ``pairs`` are kept when given."""
    require_valid(m)
    K = _as_momentum(K, m.d)
    grid.index_of(K)
    fib = momentum_fiber(m, K, grid, eliminate)
    return HermitianOperator(fib.basis, fib.hamiltonian(pairs), K)


# -- coordinate representation ---------------------------------------------

def _wrap(x: np.ndarray, L: int) -> np.ndarray:
    return (x + L) % (2 * L + 1) - L


def _potential_on_sites(v, y: np.ndarray, L: int, boundary: Boundary) -> np.ndarray:
    """``v_hat`` at relative positions ``y`` (shape ``(S, d)``); periodized on a periodic box."""
    if boundary == "truncated":
        return v.value_at(y)
    out = np.zeros(y.shape[0])
    yw = _wrap(y, L)
    for site, value in v.coeffs:
        s = _wrap(np.asarray(site), L)
        out += value.real * np.all(yw == s, axis=-1)
    return out


def build_fiber_coordinate(m: ModelSpec, K, L: int, boundary: Boundary = "periodic",
                           pairs: Iterable[tuple[int, int]] | None = None) -> HermitianOperator:
    """Sparse coordinate-box matrix of the fiber operator with particle N at the origin."""
    require_valid(m)
    if L < 1:
        raise ValueError("box half-width L must be >= 1")
    if boundary not in ("periodic", "truncated"):
        raise ValueError(f"unknown boundary {boundary!r}")
    K = _as_momentum(K, m.d)
    N, d = m.N, m.d
    basis = FiberBasis("coordinate", d, tuple(range(1, N)), N, L=L, boundary=boundary)
    x = basis.sites()
    S = basis.size
    rows_all, cols_all, vals_all = [], [], []

    def hop(shift: np.ndarray, value: complex) -> None:
        target = x + shift
        if boundary == "periodic":
            target = _wrap(target, L)
            keep = np.ones(S, dtype=bool)
        else:
            keep = np.all(np.abs(target) <= L, axis=(1, 2))
        rows_all.append(np.flatnonzero(keep))
        cols_all.append(basis.flat(target[keep] + L))
        vals_all.append(np.full(int(keep.sum()), value, dtype=complex))

    for a in range(1, N):
        for site, value in m.dispersions[a - 1].coeffs:
            shift = np.zeros((N - 1, d), dtype=np.int64)
            shift[a - 1] = site
            hop(shift, value)
    for site, value in m.dispersions[N - 1].coeffs:
        shift = -np.broadcast_to(np.asarray(site), (N - 1, d))
        hop(shift, value * np.exp(1j * np.dot(site, K)))

    keep_pairs = None if pairs is None else set(pairs)
    diag = np.zeros(S)
    for v in m.potentials:
        if keep_pairs is not None and v.pair not in keep_pairs:
            continue
        rel = x[:, v.i - 1, :] - (x[:, v.j - 1, :] if v.j < N else 0)
        diag -= _potential_on_sites(v, rel, L, boundary)
    rows_all.append(np.arange(S))
    cols_all.append(np.arange(S))
    vals_all.append(diag.astype(complex))

    mat = sp.coo_matrix((np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
                        shape=(S, S)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return HermitianOperator(basis, mat, K)


# -- cluster and subsystem operators ---------------------------------------

def build_cluster_fiber(m: ModelSpec, C: ClusterDecomposition, K, grid: TorusGrid | None = None,
                        L: int | None = None, boundary: Boundary = "periodic",
                        eliminate: int | None = None) -> HermitianOperator:
    """H^C(K) = H0(K) - V^C: the fiber matrix with only the pairs inside clusters of ``C``.

    Pass ``grid`` for the momentum representation or ``L`` for the coordinate one.
    """
    if C.N != m.N:
        raise ValueError(f"decomposition of {C.N} particles for an N={m.N} model")
    internal, _ = pair_split(C)
    if (grid is None) == (L is None):
        raise ValueError("give exactly one of grid (momentum) or L (coordinate)")
    if grid is not None:
        return build_fiber_momentum(m, K, grid, eliminate, pairs=internal)
    return build_fiber_coordinate(m, K, L, boundary, pairs=internal)


def build_subsystem(m: ModelSpec, block: Iterable[int], k, grid: TorusGrid) -> HermitianOperator:
    """Fiber operator of the particles in ``block`` at total quasi-momentum ``k``.

    The block's largest particle is eliminated. A singleton block gives the
    1x1 matrix ``[eps_a(k)]``.
    """
    block = sorted(set(block))
    if not block or block[0] < 1 or block[-1] > m.N:
        raise ModelError(f"block {block} not within 1..{m.N}")
    k = _as_momentum(k, m.d)
    if len(block) == 1:
        a = block[0]
        basis = FiberBasis("momentum", m.d, (), a, grid=grid)
        value = np.real(symbol_eval(m.dispersions[a - 1], k))
        return HermitianOperator(basis, np.array([[value]], dtype=complex), k)
    sub = m.restricted(block)
    fib = momentum_fiber(sub, k, grid)
    relabel = dict(enumerate(block, start=1))
    basis = FiberBasis("momentum", m.d, tuple(relabel[a] for a in fib.basis.coords),
                       relabel[fib.basis.eliminated], grid=grid)
    return HermitianOperator(basis, fib.hamiltonian(), k)
