"""Hypergraph collapse: repeatedly remove a patched vertex until no patch is left."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from .hypergraph import Hypergraph


class CollapseError(ValueError):
    """A requested removal is not a permitted collapse."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class Removal(NamedTuple):
    patches_removed: int  # patches on the removed vertex (all become debris)
    new_patches: int  # 2-edges through the vertex, now patches
    new_debris: int


class CollapseStep(NamedTuple):
    n: int
    vertex: int
    patches_on_vertex: int
    new_patches: int
    y: int  # patches before the step
    z: int  # debris before the step

    @property
    def w(self) -> int:
        return self.patches_on_vertex - 1

    @property
    def u(self) -> int:
        return self.new_patches


@dataclass
class CollapseTrace:
    n_vertices: int
    steps: list[CollapseStep]
    identifiable_vertices: frozenset[int]
    identifiable_edge_count: int
    terminal_debris: int
    final_patches: int = 0
    seed: int | None = field(default=None, compare=False)

    @property
    def v_star(self) -> int:
        return len(self.identifiable_vertices)

    @property
    def lambda_star(self) -> int:
        return self.identifiable_edge_count

    def y_path(self) -> np.ndarray:
        """Patch counts ``Y_0 .. Y_{|V*|}``."""
        return np.array([s.y for s in self.steps] + [self.final_patches], dtype=np.int64)

    def z_path(self) -> np.ndarray:
        return np.array([s.z for s in self.steps] + [self.terminal_debris], dtype=np.int64)

    def rows(self) -> list[tuple[int, int, int, int, int, int]]:
        """CSV rows ``(n, vertex, Y, Z, W, U)``."""
        return [(s.n, s.vertex, s.y, s.z, s.w, s.u) for s in self.steps]

    def summary(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "v_star": self.v_star,
            "lambda_star": self.lambda_star,
            "debris_final": self.terminal_debris,
            "seed": self.seed,
        }


TRACE_COLUMNS = ("n", "vertex", "Y", "Z", "W", "U")


def _remove(h: Hypergraph, v: int) -> Removal:
    patches_removed = new_patches = 0
    edges = h.edges
    for eid in h.incidence[v]:
        e = edges[eid]
        e.remove(v)
        size = len(e)
        if size == 0:
            h._drop_patch(eid)
            h.debris_count += 1
            patches_removed += 1
        elif size == 1:
            h._push_patch(eid)
            new_patches += 1
    h.removed[v] = 1
    return Removal(patches_removed, new_patches, patches_removed)


def remove_vertex(h: Hypergraph, v: int) -> Removal:
    """Remove patched vertex ``v`` from every edge of ``h`` (in place)."""
    if not 0 <= v < h.n_vertices or h.removed[v]:
        raise CollapseError(f"vertex {v} is not present")
    if h.patch_count(v) == 0:
        raise CollapseError(f"vertex {v} carries no patch")
    return _remove(h, v)


Order = Union[str, Sequence[int]]


def collapse(
    h: Hypergraph,
    order: Order = "random",
    rng: np.random.Generator | None = None,
    *,
    inplace: bool = False,
    check: bool = True,
) -> CollapseTrace:
    """Collapse ``h`` until it is stable and return the per-step trace.

    ``order`` is ``"random"`` (a uniformly chosen *patch*, so a vertex with
    several patches is proportionally more likely), ``"lowest"`` (smallest
    patched vertex id) or an explicit vertex sequence.  The explicit sequence
    must be a complete collapse: each vertex must carry a patch when its turn
    comes and no patch may remain at the end.

    With ``check`` the patch/debris/large-edge counters are reconciled with
    the edge total after every step.
    """
    mode = order if isinstance(order, str) else "explicit"
    if mode == "random":
        if rng is None:
            raise ValueError("random order needs an rng")
    elif mode == "lowest":
        heap = sorted(h.patched_vertices())
    elif mode == "explicit":
        explicit = [int(v) for v in order]
    else:
        raise ValueError(f"unknown order {order!r}")

    if not inplace:
        h = h.copy()
    original = [tuple(e) for e in h.edges]
    total = len(original)
    y, z = len(h.patches), h.debris_count
    large = total - y - z
    steps: list[CollapseStep] = []
    removed_vertices: list[int] = []
    n = 0
    while h.patches:
        if mode == "random":
            eid = h.patches[int(rng.integers(len(h.patches)))]
            v = h.edges[eid][0]
        elif mode == "lowest":
            v = heapq.heappop(heap)
            while h.removed[v]:
                v = heapq.heappop(heap)
        else:
            if n >= len(explicit):
                raise CollapseError(f"explicit order exhausted with {len(h.patches)} patches left", n)
            v = explicit[n]
            try:
                removal = remove_vertex(h, v)
            except CollapseError as exc:
                raise CollapseError(str(exc), n) from None
        if mode != "explicit":
            removal = _remove(h, v)
        if mode == "lowest":
            for eid in h.incidence[v]:
                if len(h.edges[eid]) == 1:
                    heapq.heappush(heap, h.edges[eid][0])
        steps.append(CollapseStep(n, v, removal.patches_removed, removal.new_patches, y, z))
        removed_vertices.append(v)
        y += removal.new_patches - removal.patches_removed
        z += removal.patches_removed
        large -= removal.new_patches
        if check:
            assert removal.patches_removed >= 1, f"step {n}: removed vertex carried no patch"
            assert y == len(h.patches) and z == h.debris_count, f"step {n}: counters out of sync"
            assert y + z + large == total == len(h.edges), f"step {n}: edge count not conserved"
        n += 1
    if mode == "explicit" and n < len(explicit):
        raise CollapseError(f"vertex {explicit[n]} requested after the collapse terminated", n)

    v_star = frozenset(removed_vertices)
    lambda_star = sum(1 for e in original if all(v in v_star for v in e))
    trace = CollapseTrace(h.n_vertices, steps, v_star, lambda_star, h.debris_count, y)
    if check:
        assert trace.terminal_debris == trace.identifiable_edge_count, "terminal identity violated"
    return trace


def identifiable_oracle(h: Hypergraph) -> frozenset[int]:
    """Identifiable vertices by direct fixed-point iteration of the definition.

    A vertex is added once some edge contains it and all of that edge's
    other vertices are already identified.  Independent of the collapse
    machinery; quadratic, intended for small hypergraphs.
    """
    identified: set[int] = set()
    edges = [e for e in h.edges if e]
    changed = True
    while changed:
        changed = False
        for e in edges:
            missing = [v for v in e if v not in identified]
            if len(missing) == 1:
                identified.add(missing[0])
                changed = True
    return frozenset(identified)
