"""
Weinberg-van Winter diagram machinery at grid scale.

A graph is an ordered list of interactions ``(i, j)`` read left to right.
Keeping the first 0, 1, ... links produces a coarsening sequence of cluster
decompositions. Its distinct members form the graph's string. Each new link
merges at most two clusters, so consecutive string entries differ by exactly
one merge.

Summing the resolvent's Neumann series string by string gives

    G(z) = D(z) + I(z) G(z),

with ``D`` collecting strings that end with two or more clusters and ``I`` the
connected strings stripped of their final ``G(z)``. For finite matrices this
is an exact rational identity in ``z``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .clusters import ClusterDecomposition, is_refinement, pair_split
from .model import ModelSpec, TorusGrid, require_valid
from .operators import MomentumFiber, momentum_fiber

MAX_STRING_N = 6
SINGULAR_TOL = 1e-8


class SingularResolventError(ValueError):
    """``z`` lies (numerically) in the spectrum of the operator being inverted."""


# -- graphs and strings ----------------------------------------------------

@dataclass(frozen=True)
class WvWGraph:
    N: int
    links: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        links = tuple((int(i), int(j)) for i, j in self.links)
        for i, j in links:
            if not 1 <= i < j <= self.N:
                raise ValueError(f"link ({i},{j}) must satisfy 1 <= i < j <= {self.N}")
        object.__setattr__(self, "links", links)

    def prefix(self, n: int) -> WvWGraph:
        return WvWGraph(self.N, self.links[:n])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n + 1))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cluster_of_graph(g: WvWGraph) -> ClusterDecomposition:
    """Connected components of the particles joined by the graph's links."""
    uf = _UnionFind(g.N)
    for i, j in g.links:
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for a in range(1, g.N + 1):
        groups.setdefault(uf.find(a), []).append(a)
    return ClusterDecomposition.of(groups.values())


def is_connected(g: WvWGraph) -> bool:
    return len(cluster_of_graph(g)) == 1


@dataclass(frozen=True)
class WvWString:
    """Chain ``(D_N, ..., D_k)`` from the finest partition, one merge per step."""

    chain: tuple[ClusterDecomposition, ...]

    def __post_init__(self):
        chain = tuple(self.chain)
        if not chain:
            raise ValueError("a string has at least one decomposition")
        N = chain[0].N
        if chain[0] != ClusterDecomposition.finest(N):
            raise ValueError("a string starts at the finest decomposition")
        for a, b in zip(chain, chain[1:]):
            if len(b) != len(a) - 1 or not is_refinement(a, b):
                raise ValueError(f"{a} -> {b} is not a single merge")
        object.__setattr__(self, "chain", chain)

    @property
    def index(self) -> int:
        return len(self.chain[-1])

    @property
    def N(self) -> int:
        return self.chain[0].N

    def to_list(self) -> list[list[list[int]]]:
        return [D.to_list() for D in self.chain]


def string_of_graph(g: WvWGraph) -> WvWString:
    chain = [cluster_of_graph(g.prefix(0))]
    for n in range(1, len(g.links) + 1):
        D = cluster_of_graph(g.prefix(n))
        if D != chain[-1]:
            chain.append(D)
    return WvWString(tuple(chain))


def _merges(D: ClusterDecomposition) -> list[ClusterDecomposition]:
    blocks = D.blocks
    out = []
    for a in range(len(blocks)):
        for b in range(a + 1, len(blocks)):
            rest = [blk for n, blk in enumerate(blocks) if n not in (a, b)]
            out.append(ClusterDecomposition.of(rest + [blocks[a] + blocks[b]]))
    return out


def enumerate_strings(N: int, k: int | None = None) -> list[WvWString]:
    """All strings of ``N`` particles, optionally only those of index ``k``."""
    if not 1 <= N <= MAX_STRING_N:
        raise ValueError(f"N={N} outside the supported range 1 <= N <= {MAX_STRING_N}")
    out: list[WvWString] = []

    def walk(chain: list[ClusterDecomposition]) -> None:
        if k is None or len(chain[-1]) == k:
            out.append(WvWString(tuple(chain)))
        if k is not None and len(chain[-1]) <= k:
            return
        for nxt in _merges(chain[-1]):
            walk(chain + [nxt])

    walk([ClusterDecomposition.finest(N)])
    return out


def string_census(N: int) -> dict[int, int]:
    counts = Counter(s.index for s in enumerate_strings(N))
    return dict(sorted(counts.items(), reverse=True))


# -- matrices on a momentum fiber ------------------------------------------

@dataclass
class FiberContext:
    """Free energies and pair potentials of one momentum fiber, shared by all WvW terms."""

    model: ModelSpec
    fiber: MomentumFiber

    @classmethod
    def build(cls, m: ModelSpec, K, grid: TorusGrid | int, eliminate: int | None = None) -> FiberContext:
        require_valid(m)
        grid = grid if isinstance(grid, TorusGrid) else TorusGrid(int(grid), m.d)
        grid.index_of(np.atleast_1d(np.asarray(K, dtype=float)))
        return cls(m, momentum_fiber(m, K, grid, eliminate))

    @property
    def N(self) -> int:
        return self.model.N

    @property
    def dim(self) -> int:
        return self.fiber.basis.size

    @property
    def energies(self) -> np.ndarray:
        return self.fiber.energies

    def V(self, pair: tuple[int, int]) -> np.ndarray:
        mat = self.fiber.potentials.get(tuple(pair))
        return mat if mat is not None else np.zeros((self.dim, self.dim), dtype=complex)

    def V_total(self, pairs: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
        return self.fiber.potential_sum(pairs)

    def interaction(self, D: ClusterDecomposition) -> np.ndarray:
        """``I^D``: sum of the potentials between different clusters of ``D``."""
        return self.V_total(pair_split(D)[1])

    def hamiltonian(self, D: ClusterDecomposition | None = None) -> np.ndarray:
        pairs = None if D is None else pair_split(D)[0]
        return self.fiber.hamiltonian(pairs)

    def G0(self, z: complex) -> np.ndarray:
        gap = np.min(np.abs(self.energies - z))
        if gap < SINGULAR_TOL:
            raise SingularResolventError(f"z={z} lies in the spectrum of H0(K) (gap {gap:.2e})")
        return np.diag(1.0 / (self.energies - z))

    @cached_property
    def _spectra(self) -> dict:
        return {}

    def resolvent(self, D: ClusterDecomposition | None, z: complex) -> np.ndarray:
        """``(H^D - z)^{-1}`` by a dense solve; ``D=None`` means the full operator."""
        H = self.hamiltonian(D)
        key = None if D is None else D.blocks
        if key not in self._spectra:
            self._spectra[key] = np.linalg.eigvalsh(H)
        gap = np.min(np.abs(self._spectra[key] - z))
        if gap < SINGULAR_TOL:
            raise SingularResolventError(f"z={z} is within {gap:.2e} of an eigenvalue of H^D")
        return np.linalg.solve(H - z * np.eye(self.dim), np.eye(self.dim, dtype=complex))


def fiber_context(m: ModelSpec, K, grid: TorusGrid | int, eliminate: int | None = None) -> FiberContext:
    return FiberContext.build(m, K, grid, eliminate)


def term_matrix(g: WvWGraph, z: complex, ctx: FiberContext) -> np.ndarray:
    """``G0 V_{i1 j1} G0 ... V_{in jn} G0`` for the graph's links in order."""
    if g.N != ctx.N:
        raise ValueError(f"graph on {g.N} particles for an N={ctx.N} fiber")
    G0 = ctx.G0(z)
    out = G0
    for pair in g.links:
        out = out @ ctx.V(pair) @ G0
    return out


def neumann_partial_sum(ctx: FiberContext, z: complex, n: int) -> np.ndarray:
    """``G0 sum_{m<=n} (V G0)^m``."""
    G0 = ctx.G0(z)
    VG0 = ctx.V_total() @ G0
    term, total = G0, G0.copy()
    for _ in range(n):
        term = term @ VG0
        total = total + term
    return total


def cluster_resolvent(ctx: FiberContext, D: ClusterDecomposition, z: complex) -> np.ndarray:
    if D.N != ctx.N:
        raise ValueError(f"decomposition of {D.N} particles for an N={ctx.N} fiber")
    return ctx.resolvent(D, z)


@dataclass
class WvWParts:
    D: np.ndarray
    I: np.ndarray
    string_count: int = 0


def assemble(ctx: FiberContext, z: complex) -> WvWParts:
    """Sum ``G_S(z)`` over all strings: disconnected part ``D`` and connected kernel ``I``."""
    N = ctx.N
    dim = ctx.dim
    Gs: dict = {}
    Is: dict = {}

    def G(D):
        if D not in Gs:
            Gs[D] = ctx.G0(z) if len(D) == N else ctx.resolvent(D, z)
        return Gs[D]

    def I(D):
        if D not in Is:
            Is[D] = ctx.interaction(D)
        return Is[D]

    D_sum = np.zeros((dim, dim), dtype=complex)
    I_sum = np.zeros((dim, dim), dtype=complex)
    count = 0

    def walk(D, prod):
        nonlocal D_sum, I_sum, count
        if len(D) == 1:
            return
        D_sum = D_sum + prod
        count += 1
        for nxt in _merges(D):
            link = I(D) - I(nxt)
            if len(nxt) == 1:
                I_sum = I_sum + prod @ link
                count += 1
            else:
                walk(nxt, prod @ link @ G(nxt))

    finest = ClusterDecomposition.finest(N)
    if N == 1:
        return WvWParts(G(finest), I_sum, 1)
    walk(finest, G(finest))
    return WvWParts(D_sum, I_sum, count)


def assemble_D(ctx: FiberContext, z: complex) -> np.ndarray:
    return assemble(ctx, z).D


def assemble_I(ctx: FiberContext, z: complex) -> np.ndarray:
    return assemble(ctx, z).I


def check_wvw_identity(ctx: FiberContext, z: complex) -> float:
    """Spectral norm of ``G - D - I G`` with ``G`` the directly inverted full resolvent."""
    parts = assemble(ctx, z)
    G = ctx.resolvent(None, z)
    return float(np.linalg.norm(G - parts.D - parts.I @ G, 2))


# -- translation commutant -------------------------------------------------

@dataclass(frozen=True)
class CommutantReport:
    connected: bool
    block: tuple[int, ...] | None
    residual: float | None


def translation_phase(ctx: FiberContext, block: Sequence[int], s) -> np.ndarray:
    """Diagonal of ``U_s = exp(i (s, sum_{a in block} p_a))`` on the fiber basis.

    The eliminated particle's momentum is ``K - sum(p)``; a block containing it
    picks up that expression, which differs from the complement's phase by a
    constant.
    """
    g = ctx.fiber.basis.grid
    mom = ctx.fiber.group_momenta()
    s = np.atleast_1d(np.asarray(s, dtype=np.int64))
    total = mom[:, [a - 1 for a in block], :].sum(axis=1)
    return np.exp(1j * g.spacing * (total @ s))


def commutant_check(g: WvWGraph, s, ctx: FiberContext, z: complex = -10.0,
                    block: Sequence[int] | None = None) -> CommutantReport:
    """``||T U_s - U_s T||`` for the graph's term ``T`` and the block translation ``U_s``.

    Without ``block`` the first cluster of the graph is used; a connected graph
    then has nothing to test and only its status is reported.
    """
    D = cluster_of_graph(g)
    connected = len(D) == 1
    if block is None:
        if connected:
            return CommutantReport(True, None, None)
        block = D.blocks[0]
    block = tuple(sorted(block))
    T = term_matrix(g, z, ctx)
    u = translation_phase(ctx, block, s)
    res = T * u[None, :] - u[:, None] * T
    return CommutantReport(connected, block, float(np.linalg.norm(res, 2)))
