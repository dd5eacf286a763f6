"""Generating series of a Poisson(beta) hypergraph and the thresholds derived from it.

A series is stored by its finite list of coefficients ``beta_j``; ``beta_j``
is the expected number of ``j``-edges per vertex.  The threshold function is

    f(t) = beta'(t) + log(1 - t)

and the collapse stops (in the large-N limit) at ``z_star``, the first point
where ``f`` becomes negative.  Tangential zeros of ``f`` before ``z_star`` are
the critical points at which the collapse may stop at random.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

SCAN_STEP = 1e-4
BISECT_TOL = 1e-12
TANGENCY_TOL = 1e-9
SCAN_UPPER = 1.0 - 1e-6
# grid minima below this are refined as tangency candidates
_CANDIDATE_LEVEL = 1e-5


def _horner(coeffs, t):
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * t + c
    return acc


def _check_unit(t, *, closed: bool):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or (not closed and np.any(arr >= 1.0)):
        bound = "[0, 1]" if closed else "[0, 1)"
        raise ValueError(f"t must lie in {bound}, got {t!r}")


@dataclass(frozen=True)
class BetaSeries:
    """Finite-support series ``beta(t) = sum_j coeffs[j] t**j`` with nonnegative coefficients."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a series needs at least one coefficient")
        if any(not math.isfinite(c) or c < 0.0 for c in coeffs):
            raise ValueError(f"coefficients must be finite and nonnegative: {coeffs}")
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_json(cls, text: str) -> "BetaSeries":
        values = json.loads(text)
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            raise ValueError("series literal must be a JSON array of numbers")
        return cls(tuple(values))

    def to_json(self) -> str:
        return json.dumps(list(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, j: int) -> float:
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else 0.0

    @property
    def is_pure_debris(self) -> bool:
        """True when only the empty-set coefficient is nonzero (nothing can ever be removed)."""
        return all(c == 0.0 for c in self.coeffs[1:])

    @cached_property
    def _derived(self) -> list[tuple[float, ...]]:
        out = [self.coeffs]
        c = list(self.coeffs)
        for _ in range(3):
            c = [j * c[j] for j in range(1, len(c))] or [0.0]
            out.append(tuple(c))
        return out

    def eval(self, t, order: int = 0):
        """Evaluate ``beta``, ``beta'``, ``beta''`` (order 0, 1, 2) at ``t`` by Horner's rule.

        ``t`` may be a float or an array.  Order 3 is accepted as well; the
        fluctuation code needs the third derivative.
        """
        if order not in (0, 1, 2, 3):
            raise ValueError(f"order must be 0, 1, 2 or 3, got {order}")
        _check_unit(t, closed=True)
        return _horner(self._derived[order], t)

    __call__ = eval

    def threshold(self, t):
        """``f(t) = beta'(t) + log(1 - t)``, defined for ``t`` in [0, 1)."""
        _check_unit(t, closed=False)
        if isinstance(t, np.ndarray):
            return self.eval(t, 1) + np.log1p(-t)
        return self.eval(t, 1) + math.log1p(-t)

    def threshold_slope(self, t):
        _check_unit(t, closed=False)
        return self.eval(t, 2) - 1.0 / (1.0 - t)

    def threshold_curvature(self, t):
        _check_unit(t, closed=False)
        return self.eval(t, 3) - 1.0 / (1.0 - t) ** 2

    def sigma_sq(self, t):
        """Variance clock of the reduced patch fluctuation: ``(f(t) + t) / (1 - t)``."""
        return (self.threshold(t) + t) / (1.0 - t)

    def scaled(self, factor: float) -> "BetaSeries":
        """Multiply every coefficient with index >= 1 by ``factor``."""
        return BetaSeries((self.coeffs[0],) + tuple(factor * c for c in self.coeffs[1:]))


def evaluate(series: BetaSeries, t, order: int = 0):
    return series.eval(t, order)


def threshold(series: BetaSeries, t):
    return series.threshold(t)


def sigma_sq(series: BetaSeries, t):
    return series.sigma_sq(t)


class ZeroInfo(NamedTuple):
    t: float
    residual: float  # f at the refined point
    curvature: float  # f'' at the refined point; 0 means an inflection, not a clean tangency


@dataclass(frozen=True)
class ThresholdReport:
    z_star: float
    zeros: tuple[float, ...]
    tangency_tolerance: float
    zero_details: tuple[ZeroInfo, ...] = ()
    degenerate: bool = False
    f_samples: tuple[np.ndarray, np.ndarray] | None = field(default=None, compare=False)

    @property
    def critical(self) -> bool:
        return bool(self.zeros)

    def to_dict(self) -> dict:
        return {
            "z_star": self.z_star,
            "zeros": list(self.zeros),
            "critical": self.critical,
            "degenerate": self.degenerate,
            "tangency_tolerance": self.tangency_tolerance,
            "zero_details": [z._asdict() for z in self.zero_details],
        }


def _first_negative(series: BetaSeries, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    # invariant: f(lo) >= 0 side, f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if series.threshold(mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def analyze(
    series: BetaSeries,
    *,
    step: float = SCAN_STEP,
    tangency_tolerance: float = TANGENCY_TOL,
    keep_samples: bool = False,
) -> ThresholdReport:
    """Locate ``z_star`` and the tangential zeros of ``f`` on ``[0, z_star)``.

    The threshold function is scanned on a uniform grid of width ``step`` up
    to ``1 - 1e-6``.  A sign change is refined by bisection; grid minima
    close to zero are refined by bounded minimisation and kept as tangential
    zeros when ``|f| <= tangency_tolerance`` there.  Resolution near 1 is
    limited by the grid: zeros of ``f`` may accumulate only at 1 and those
    closer than ``step`` to each other are not separated.
    """
    grid = np.append(np.arange(0.0, SCAN_UPPER, step), SCAN_UPPER)
    f = series.threshold(grid)
    samples = (grid, f) if keep_samples else None

    def report(z_star, details=(), degenerate=False):
        return ThresholdReport(
            z_star=float(z_star),
            zeros=tuple(d.t for d in details),
            tangency_tolerance=tangency_tolerance,
            zero_details=tuple(details),
            degenerate=degenerate,
            f_samples=samples,
        )

    details: list[ZeroInfo] = []
    degenerate = False
    if f[0] == 0.0:
        if f[1] < 0.0:
            return report(0.0)
        degenerate = True
        details.append(ZeroInfo(0.0, 0.0, float(series.threshold_curvature(0.0))))

    negative = np.flatnonzero(f < -tangency_tolerance)
    stop = negative[0] if negative.size else len(grid)

    interior = np.arange(1, min(stop, len(grid) - 1))
    is_min = (
        (f[interior] <= f[interior - 1])
        & (f[interior] <= f[interior + 1])
        & (f[interior] <= _CANDIDATE_LEVEL)
    )
    for k in interior[is_min]:
        a, b = grid[k - 1], grid[k + 1]
        res = minimize_scalar(
            lambda s: series.threshold(s), bounds=(a, b), method="bounded",
            options={"xatol": BISECT_TOL},
        )
        c = float(res.x)
        fc = float(series.threshold(c))
        if fc > f[k]:
            c, fc = float(grid[k]), float(f[k])
        if fc < -tangency_tolerance:
            # a dip between grid points: the first crossing lies before c
            return report(_first_negative(series, float(a), c), details, degenerate)
        if fc <= tangency_tolerance:
            if details and abs(details[-1].t - c) < step:
                continue
            details.append(ZeroInfo(c, fc, float(series.threshold_curvature(c))))

    if not negative.size:
        return report(1.0, details, degenerate)
    k = negative[0]
    return report(_first_negative(series, float(grid[k - 1]), float(grid[k])), details, degenerate)


class Truncation(NamedTuple):
    series: BetaSeries
    tail_mass: float


def truncate(
    source: BetaSeries | Callable[[int], float],
    max_index: int,
    *,
    tail_terms: int = 100_000,
) -> Truncation:
    """Keep the coefficients with index ``<= max_index``.

    ``source`` is either a series or a coefficient rule ``j -> beta_j``.  The
    discarded mass ``sum_{j > max_index} beta_j`` is returned alongside; for a
    rule it is summed until terms become negligible or ``tail_terms`` terms
    have been added.
    """
    if max_index < 0:
        raise ValueError("max_index must be >= 0")
    if isinstance(source, BetaSeries):
        kept = source.coeffs[: max_index + 1]
        return Truncation(BetaSeries(kept), float(math.fsum(source.coeffs[max_index + 1 :])))
    kept = tuple(float(source(j)) for j in range(max_index + 1))
    terms = []
    for j in range(max_index + 1, max_index + 1 + tail_terms):
        term = float(source(j))
        terms.append(term)
        if term <= 1e-17 * (math.fsum(terms) + 1e-300) and j > max_index + 10:
            break
    return Truncation(BetaSeries(kept), float(math.fsum(terms)))


def example21(p: float, alpha: float) -> BetaSeries:
    """Random graph with distinguished vertices: vertices open w.p. ``p``, edges w.p. ``alpha/N``."""
    if not 0.0 <= p < 1.0 or alpha < 0.0:
        raise ValueError("need 0 <= p < 1 and alpha >= 0")
    return BetaSeries((0.0, -math.log1p(-p), alpha / 2.0))


def example22(alpha: float) -> BetaSeries:
    """``beta(t) = alpha * (0.1 + 0.9 t)**7``, expanded binomially."""
    if alpha < 0.0:
        raise ValueError("alpha must be >= 0")
    return BetaSeries(tuple(alpha * math.comb(7, j) * 0.1 ** (7 - j) * 0.9**j for j in range(8)))


def tangent_series(zero: float = 0.5, degree: int = 10, top: float | None = None) -> BetaSeries:
    """``beta = b1 t + b2 t**2 + top * t**degree`` with ``f`` tangent to zero at ``zero``.

    ``b1`` and ``b2`` solve ``f(zero) = 0`` and ``f'(zero) = 0``.  By default
    ``top`` is chosen so that ``b2 = 0``, which gives the sharpest tangency
    available at this degree.  Raises ``ValueError`` when no nonnegative
    solution with ``f''(zero) > 0`` exists (e.g. degree 3 at ``zero = 0.5``).
    """
    c, J = float(zero), int(degree)
    if not 0.0 < c < 1.0 or J < 3:
        raise ValueError("need 0 < zero < 1 and degree >= 3")
    need = 1.0 / (1.0 - c)  # beta''(c) at a tangency
    if top is None:
        top = need / (J * (J - 1) * c ** (J - 2))
    b2 = (need - J * (J - 1) * top * c ** (J - 2)) / 2.0
    b1 = -math.log1p(-c) - 2.0 * b2 * c - J * top * c ** (J - 1)
    curvature = J * (J - 1) * (J - 2) * top * c ** (J - 3) - need**2
    if b1 < 0.0 or b2 < -1e-15 or top < 0.0:
        raise ValueError(f"no nonnegative tangent series: b1={b1}, b2={b2}, top={top}")
    if curvature <= 1e-12:
        raise ValueError(f"f''({c}) = {curvature} <= 0: zero is not a strict tangency")
    coeffs = [0.0] * (J + 1)
    coeffs[1], coeffs[2], coeffs[J] = b1, max(b2, 0.0), top
    return BetaSeries(tuple(coeffs))


PRESETS = {"example21": example21, "example22": example22, "tangent": tangent_series}


def parse_preset(spec: str) -> BetaSeries:
    """Parse ``name:arg1,arg2`` (e.g. ``example21:0.1,2``)."""
    name, _, args = spec.partition(":")
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = [float(a) for a in args.split(",") if a.strip()]
    if name == "tangent" and len(values) > 1:
        values[1] = int(values[1])
    return PRESETS[name](*values)


def load_series(source: str | Sequence[float]) -> BetaSeries:
    """Build a series from a JSON literal, a path to a JSON file, or a sequence."""
    if not isinstance(source, str):
        return BetaSeries(tuple(source))
    text = source.strip()
    if not text.startswith("["):
        text = Path(source).read_text()
    return BetaSeries.from_json(text)
