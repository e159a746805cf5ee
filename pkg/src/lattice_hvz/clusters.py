"""Cluster decompositions: set partitions of {1, ..., N} and the pair classification they induce."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

MAX_PARTITION_N = 8


@dataclass(frozen=True, order=True)
class ClusterDecomposition:
    """A partition of ``{1..N}`` kept in canonical order.

    Blocks are sorted internally and ordered by their minimum element, so two
    decompositions are equal exactly when they describe the same partition.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = [tuple(sorted(set(int(a) for a in b))) for b in self.blocks]
        if any(not b for b in blocks):
            raise ValueError("cluster blocks must be nonempty")
        elements = [a for b in blocks for a in b]
        n = len(elements)
        if len(set(elements)) != n:
            raise ValueError(f"blocks {blocks} are not disjoint")
        if sorted(elements) != list(range(1, n + 1)):
            raise ValueError(f"blocks {blocks} do not cover 1..{n}")
        object.__setattr__(self, "blocks", tuple(sorted(blocks)))

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]]) -> ClusterDecomposition:
        return cls(tuple(tuple(b) for b in blocks))

    @classmethod
    def finest(cls, N: int) -> ClusterDecomposition:
        return cls(tuple((a,) for a in range(1, N + 1)))

    @classmethod
    def coarsest(cls, N: int) -> ClusterDecomposition:
        return cls((tuple(range(1, N + 1)),))

    @property
    def N(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def block_of(self, a: int) -> int:
        for k, b in enumerate(self.blocks):
            if a in b:
                return k
        raise KeyError(a)

    def same_block(self, i: int, j: int) -> bool:
        return self.block_of(i) == self.block_of(j)

    def to_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def _check_n(N: int, lo: int, hi: int | None = None) -> None:
    if N < lo or (hi is not None and N > hi):
        rng = f"{lo} <= N <= {hi}" if hi is not None else f"N >= {lo}"
        raise ValueError(f"N={N} outside the supported range {rng}")


def enumerate_partitions(N: int) -> list[ClusterDecomposition]:
    """All partitions of ``{1..N}`` via restricted growth strings (Bell(N) of them)."""
    _check_n(N, 1, MAX_PARTITION_N)
    out = []

    def grow(labels: list[int], top: int) -> None:
        if len(labels) == N:
            blocks: list[list[int]] = [[] for _ in range(top + 1)]
            for a, lab in enumerate(labels, start=1):
                blocks[lab].append(a)
            out.append(ClusterDecomposition.of(blocks))
            return
        for lab in range(top + 2):
            labels.append(lab)
            grow(labels, max(top, lab))
            labels.pop()

    grow([0], 0)
    return out


def two_cluster_decompositions(N: int) -> list[ClusterDecomposition]:
    """The ``2**(N-1) - 1`` partitions with exactly two blocks."""
    _check_n(N, 2)
    rest = range(2, N + 1)
    out = []
    for size in range(0, N - 1):
        for extra in combinations(rest, size):
            first = (1,) + extra
            out.append(ClusterDecomposition.of([first, [a for a in rest if a not in extra]]))
    return sorted(out)


def is_refinement(C: ClusterDecomposition, D: ClusterDecomposition) -> bool:
    """True when every block of ``C`` lies inside some block of ``D`` (C refines D)."""
    if C.N != D.N:
        raise ValueError(f"decompositions of different N ({C.N} vs {D.N})")
    owner = {a: k for k, b in enumerate(D.blocks) for a in b}
    return all(len({owner[a] for a in b}) == 1 for b in C.blocks)


def pair_split(C: ClusterDecomposition) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Split all pairs ``i < j`` into (same cluster, different clusters)."""
    owner = {a: k for k, b in enumerate(C.blocks) for a in b}
    internal, external = [], []
    for i, j in combinations(range(1, C.N + 1), 2):
        (internal if owner[i] == owner[j] else external).append((i, j))
    return internal, external
