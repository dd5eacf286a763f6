"""Embedded Markov chain of patch and debris counts under randomized collapse.

With ``Y`` patches left after ``n`` removals, the next removal takes
``1 + W`` patches to debris, ``W ~ Binomial(Y - 1, 1/(N - n))``, and turns the
``U ~ Poisson((N - n - 1) * lambda2(N, n))`` surviving 2-edges through the
removed vertex into patches.  A full trajectory costs O(N) draws instead of a
whole hypergraph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numba
import numpy as np

from .beta import BetaSeries

# lambda2 tail cut: only applied for long coefficient lists
_TAIL_RTOL = 1e-18
_LONG_SUPPORT = 64


@dataclass(frozen=True)
class ChainState:
    N: int
    n: int
    y: int
    z: int

    def __post_init__(self):
        if not 0 <= self.n <= self.N:
            raise ValueError(f"step index {self.n} outside 0..{self.N}")
        if self.y < 0 or self.z < 0:
            raise ValueError("patch and debris counts are nonnegative")

    @property
    def absorbed(self) -> bool:
        return self.y == 0


def lambda2(series: BetaSeries, N: int, n: int) -> float:
    """Poisson mean of the edge count on one fixed pair after ``n`` removals.

    ``N * sum_i (i+1)(i+2) beta_{i+2} n(n-1)...(n-i+1) / (N(N-1)...(N-i-1))``,
    accumulated with running products.
    """
    if not 0 <= n <= N - 2:
        raise ValueError(f"need 0 <= n <= N - 2, got n={n}, N={N}")
    coeffs = series.coeffs
    top = min(n, len(coeffs) - 3)
    tail_max = _suffix_max(coeffs)
    ratio = 1.0 / (N * (N - 1))
    total = 0.0
    for i in range(top + 1):
        if i:
            ratio *= (n - i + 1) / (N - i - 1)
        total += (i + 1) * (i + 2) * coeffs[i + 2] * ratio
        if len(coeffs) > _LONG_SUPPORT and (i + 3) ** 2 * ratio * tail_max[i + 2] <= _TAIL_RTOL * total:
            break
    return N * total


def _suffix_max(coeffs) -> list[float]:
    out = list(coeffs)
    for j in range(len(out) - 2, -1, -1):
        out[j] = max(out[j], out[j + 1])
    return out


@lru_cache(maxsize=32)
def _u_means(series: BetaSeries, N: int) -> np.ndarray:
    means = np.zeros(max(N, 1))
    if N >= 2:
        n = np.arange(N - 1, dtype=float)
        means[: N - 1] = (N - n - 1) * lambda2_table(series, N)
    means.setflags(write=False)
    return means


def lambda2_table(series: BetaSeries, N: int) -> np.ndarray:
    """``lambda2(series, N, n)`` for ``n = 0 .. N-2`` in one vectorised pass."""
    if N < 2:
        return np.zeros(0)
    coeffs = series.coeffs
    n = np.arange(N - 1, dtype=float)
    ratio = np.full(N - 1, 1.0 / (N * (N - 1)))
    total = np.zeros(N - 1)
    tail_max = _suffix_max(coeffs)
    for i in range(min(len(coeffs) - 3, N - 2) + 1):
        if i:
            # falling factorial n(n-1)...(n-i+1) vanishes once i > n
            ratio *= np.maximum(n - i + 1, 0.0) / (N - i - 1)
        total += (i + 1) * (i + 2) * coeffs[i + 2] * ratio
        if len(coeffs) > _LONG_SUPPORT and np.all(
            (i + 3) ** 2 * ratio * tail_max[i + 2] <= _TAIL_RTOL * total
        ):
            break
    return N * total


def u_mean(series: BetaSeries, N: int, n: int) -> float:
    """Mean of the new-patch count ``U`` at step ``n``; zero once no pair can remain."""
    return (N - n - 1) * lambda2(series, N, n) if n <= N - 2 else 0.0


def transition(state: ChainState, series: BetaSeries, rng: np.random.Generator) -> tuple[ChainState, int, int]:
    """One chain step; returns the new state with the drawn ``(W, U)``."""
    if state.y == 0:
        raise ValueError("state is absorbed (no patches left)")
    if state.n >= state.N:
        raise ValueError("all vertices already removed")
    N, n, y = state.N, state.n, state.y
    w = int(rng.binomial(y - 1, 1.0 / (N - n))) if y > 1 else 0
    mean = u_mean(series, N, n)
    u = int(rng.poisson(mean)) if mean > 0.0 else 0
    return ChainState(N, n + 1, y - 1 - w + u, state.z + 1 + w), w, u


def step(state: ChainState, series: BetaSeries, rng: np.random.Generator) -> ChainState:
    return transition(state, series, rng)[0]


def initial_state(series: BetaSeries, N: int, rng: np.random.Generator) -> ChainState:
    """``Y_0 ~ Poisson(N beta_1)`` patches and ``Z_0 ~ Poisson(N beta_0)`` debris."""
    y0 = int(rng.poisson(N * series[1]))
    z0 = int(rng.poisson(N * series[0]))
    return ChainState(N, 0, y0, z0)


@numba.njit(cache=True)
def _run_kernel(rng, N, y, z, means, ys, zs, ws, us, record):
    n = 0
    if record:
        ys[0] = y
        zs[0] = z
    while y > 0 and n < N:
        w = rng.binomial(y - 1, 1.0 / (N - n)) if y > 1 else 0
        m = means[n]
        u = rng.poisson(m) if m > 0.0 else 0
        if record:
            ws[n] = w
            us[n] = u
        y = y - 1 - w + u
        z = z + 1 + w
        n += 1
        if record:
            ys[n] = y
            zs[n] = z
    return n, y, z


class ChainRun(NamedTuple):
    N: int
    v_star_count: int
    lambda_star_count: int
    y: np.ndarray | None  # Y_0 .. Y_{v_star_count}
    z: np.ndarray | None
    w: np.ndarray | None  # W_1 .. W_{v_star_count}
    u: np.ndarray | None

    def summary(self, seed: int | None = None) -> dict:
        return {
            "n_vertices": self.N,
            "v_star": self.v_star_count,
            "lambda_star": self.lambda_star_count,
            "debris_final": self.lambda_star_count,
            "seed": seed,
        }

    def rows(self) -> list[tuple[int, int, int]]:
        if self.y is None:
            raise ValueError("trajectory was not recorded")
        return [(n, int(y), int(z)) for n, (y, z) in enumerate(zip(self.y, self.z))]


TRAJECTORY_COLUMNS = ("n", "Y", "Z")


def run(series: BetaSeries, N: int, rng: np.random.Generator, *, record: bool = True) -> ChainRun:
    """Run the chain from its Poisson initial state until no patch is left.

    ``v_star_count`` is the absorption step (the number of identifiable
    vertices) and ``lambda_star_count`` the debris at that step.  Without
    ``record`` only the terminal values are kept.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    start = initial_state(series, N, rng)
    means = _u_means(series, N)
    size = N + 1 if record else 1
    ys = np.zeros(size, dtype=np.int64)
    zs = np.zeros(size, dtype=np.int64)
    ws = np.zeros(max(size - 1, 1), dtype=np.int64)
    us = np.zeros(max(size - 1, 1), dtype=np.int64)
    n, y, z = _run_kernel(rng, N, start.y, start.z, means, ys, zs, ws, us, record)
    assert y == 0, "chain ended with patches left"
    if not record:
        return ChainRun(N, int(n), int(z), None, None, None, None)
    return ChainRun(N, int(n), int(z), ys[: n + 1], zs[: n + 1], ws[:n], us[:n])


def mean_increment(state: ChainState, series: BetaSeries) -> float:
    """Exact ``E[Y' - Y]`` from the binomial and Poisson means."""
    N, n = state.N, state.n
    return -1.0 - (state.y - 1) / (N - n) + u_mean(series, N, n)


def lambda2_envelope_error(series: BetaSeries, N: int, frac: float = 0.9) -> float:
    """``max_{n <= frac N} |N lambda2(N, n) - beta''(n/N)|``."""
    top = min(int(math.floor(frac * N)), N - 2)
    table = lambda2_table(series, N)[: top + 1]
    t = np.arange(top + 1) / N
    return float(np.max(np.abs(N * table - series.eval(t, 2))))
