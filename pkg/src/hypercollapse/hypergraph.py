"""Finite multi-hypergraphs and the Poisson(beta) sampler.

Edges are explicit vertex lists; the multiplicity of a subset is the number
of edges carrying it.  Size-1 edges (patches) are tracked in a token list so
a uniformly random patch can be drawn and deleted in O(1); size-0 edges
(debris) are only counted.
"""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .beta import BetaSeries


class Hypergraph:
    """Mutable multi-hypergraph on vertices ``0..n_vertices-1``.

    Attributes
    ----------
    edges : list of lists
        Current vertex list of every edge, kept sorted.  Edges are never
        deleted, only shrunk, so ``len(edges)`` is the conserved edge count.
    incidence : list of lists
        Edge ids through each vertex at construction time.  Entries for
        vertices that were removed are stale and never read again.
    patches : list
        Ids of the edges of current size 1 (one token per patch).
    debris_count : int
        Number of edges of current size 0.
    """

    def __init__(self, n_vertices: int, edges: Iterable[Sequence[int]] = ()):
        if n_vertices < 0:
            raise ValueError("n_vertices must be >= 0")
        self.n_vertices = n_vertices
        self.edges: list[list[int]] = []
        self.incidence: list[list[int]] = [[] for _ in range(n_vertices)]
        self.patches: list[int] = []
        self._patch_pos: dict[int, int] = {}
        self.debris_count = 0
        self.removed = bytearray(n_vertices)
        for e in edges:
            self.add_edge(e)

    def add_edge(self, vertices: Sequence[int]) -> int:
        vs = sorted(vertices)
        if len(set(vs)) != len(vs):
            raise ValueError(f"edge {vertices!r} repeats a vertex")
        if vs and (vs[0] < 0 or vs[-1] >= self.n_vertices):
            raise ValueError(f"edge {vertices!r} leaves the vertex range 0..{self.n_vertices - 1}")
        if any(self.removed[v] for v in vs):
            raise ValueError(f"edge {vertices!r} uses a removed vertex")
        eid = len(self.edges)
        self.edges.append(vs)
        for v in vs:
            self.incidence[v].append(eid)
        if len(vs) == 1:
            self._push_patch(eid)
        elif not vs:
            self.debris_count += 1
        return eid

    def _push_patch(self, eid: int) -> None:
        self._patch_pos[eid] = len(self.patches)
        self.patches.append(eid)

    def _drop_patch(self, eid: int) -> None:
        pos = self._patch_pos.pop(eid)
        last = self.patches.pop()
        if last != eid:
            self.patches[pos] = last
            self._patch_pos[last] = pos

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def patch_total(self) -> int:
        return len(self.patches)

    def patch_count(self, v: int) -> int:
        """Number of patches sitting on vertex ``v``."""
        if self.removed[v]:
            return 0
        return sum(1 for e in self.incidence[v] if len(self.edges[e]) == 1)

    def patched_vertices(self) -> set[int]:
        return {self.edges[e][0] for e in self.patches}

    def copy(self) -> "Hypergraph":
        h = Hypergraph.__new__(Hypergraph)
        h.n_vertices = self.n_vertices
        h.edges = [list(e) for e in self.edges]
        h.incidence = [list(i) for i in self.incidence]
        h.patches = list(self.patches)
        h._patch_pos = dict(self._patch_pos)
        h.debris_count = self.debris_count
        h.removed = bytearray(self.removed)
        return h

    def deduplicated(self) -> "Hypergraph":
        """The hypergraph ``min(Lambda, 1)``: one edge per occupied subset."""
        seen = dict.fromkeys(tuple(e) for e in self.edges)
        return Hypergraph(self.n_vertices, seen)

    def subset_counts(self) -> Counter:
        return Counter(tuple(e) for e in self.edges)

    def size_histogram(self) -> Counter:
        return Counter(len(e) for e in self.edges)

    def check_indices(self) -> None:
        """Rebuild the patch and debris indices from the edge list and compare.

        Raises ``AssertionError`` on any mismatch.
        """
        live = [v for v in range(self.n_vertices) if not self.removed[v]]
        for eid, e in enumerate(self.edges):
            assert e == sorted(set(e)), f"edge {eid} not strictly increasing: {e}"
            assert all(not self.removed[v] for v in e), f"edge {eid} holds a removed vertex"
            for v in e:
                assert eid in self.incidence[v], f"edge {eid} missing from incidence of {v}"
        for v in live:
            for eid in self.incidence[v]:
                assert v in self.edges[eid], f"stale incidence {eid} on live vertex {v}"
        expected = sorted(eid for eid, e in enumerate(self.edges) if len(e) == 1)
        assert sorted(self.patches) == expected, "patch index out of sync"
        assert all(self.patches[p] == e for e, p in self._patch_pos.items())
        assert self.debris_count == sum(1 for e in self.edges if not e), "debris count out of sync"

    # -- text format -------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"N={self.n_vertices}"]
        lines.extend(" ".join(map(str, e)) for e in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Hypergraph":
        """Parse the one-edge-per-line format (blank line = debris edge)."""
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith("N="):
            raise ValueError("missing 'N=<int>' header line")
        n = int(lines[0][2:])
        return cls(n, ([int(tok) for tok in line.split()] for line in lines[1:]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Hypergraph":
        return cls.from_text(Path(path).read_text())

    def __repr__(self) -> str:
        return (
            f"Hypergraph(N={self.n_vertices}, edges={len(self.edges)}, "
            f"patches={len(self.patches)}, debris={self.debris_count})"
        )


def uniform_subset(n: int, j: int, rng: np.random.Generator, buffer: list[int] | None = None) -> list[int]:
    """Uniform random ``j``-subset of ``range(n)``, sorted.

    Partial Fisher-Yates shuffle on ``buffer`` (a permutation of
    ``range(n)``).  The buffer is left permuted; any permutation is a valid
    starting point for the next draw, so it can be reused across calls.
    """
    if not 0 <= j <= n:
        raise ValueError(f"cannot draw a {j}-subset of {n} vertices")
    if buffer is None:
        buffer = list(range(n))
    picks = rng.integers(np.arange(j), n) if j else ()
    for i, k in enumerate(picks):
        k = int(k)
        buffer[i], buffer[k] = buffer[k], buffer[i]
    return sorted(buffer[:j])


def sample_edges(series: BetaSeries, n: int, rng: np.random.Generator) -> list[list[int]]:
    """Edge lists of a Poisson(beta) hypergraph on ``n`` vertices.

    For each size ``j``, ``Poisson(n * beta_j)`` edges are placed on
    independent uniform ``j``-subsets.
    """
    if n < 1:
        raise ValueError("need at least one vertex")
    if series.degree > n:
        raise ValueError(f"series has support up to j={series.degree} but only {n} vertices")
    counts = rng.poisson(n * np.asarray(series.coeffs))
    buffer = list(range(n))
    edges: list[list[int]] = []
    for j, m in enumerate(counts):
        if m == 0:
            continue
        if j == 0:
            edges.extend([] for _ in range(m))
            continue
        if j == 1:
            edges.extend([int(v)] for v in rng.integers(0, n, size=m))
            continue
        # one swap target per (edge, position); position i draws from [i, n)
        picks = rng.integers(np.arange(j), n, size=(m, j))
        for row in picks.tolist():
            for i, k in enumerate(row):
                buffer[i], buffer[k] = buffer[k], buffer[i]
            edges.append(sorted(buffer[:j]))
    return edges


def sample_poisson(series: BetaSeries, n: int, rng: np.random.Generator) -> Hypergraph:
    """Draw a Poisson(beta) hypergraph on ``n`` vertices."""
    return Hypergraph(n, sample_edges(series, n, rng))


def expected_subset_mean(series: BetaSeries, n: int, j: int) -> float:
    """Mean number of edges on one fixed ``j``-subset: ``n beta_j / C(n, j)``."""
    return n * series[j] / math.comb(n, j)
