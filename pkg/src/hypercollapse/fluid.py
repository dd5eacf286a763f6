"""Fluid limit of the rescaled collapse and its Gaussian fluctuations.

In the large-N limit ``(n/N, Y_n/N, Z_n/N)`` follows the deterministic path

    x(t) = (t, (1-t) f(t), beta(t) - (1-t) log(1-t)),   f(t) = beta'(t) + log(1-t)

until the patch density ``(1-t) f(t)`` first hits zero.  Around the path the
patch density fluctuates on the ``N**-0.5`` scale; divided by ``1-t`` this
fluctuation is a Brownian motion run with the clock ``sigma_sq(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import xlogy

from .beta import BetaSeries, ThresholdReport, analyze


def drift(series: BetaSeries, x: Sequence[float]) -> tuple[float, float, float]:
    """Mean increment per removal of ``(x1, x2, x3)`` = (time, patches, debris) densities."""
    x1, x2, _ = x
    if x1 >= 1.0:
        raise ValueError(f"drift undefined for x1 >= 1 (got {x1})")
    rate = x2 / (1.0 - x1)
    return 1.0, -1.0 - rate + (1.0 - x1) * series.eval(x1, 2), 1.0 + rate


def drift_jacobian(series: BetaSeries, x: Sequence[float]) -> np.ndarray:
    x1, x2, _ = x
    a = 1.0 - x1
    jac = np.zeros((3, 3))
    jac[1, 0] = -x2 / a**2 - series.eval(x1, 2) + a * series.eval(x1, 3)
    jac[1, 1] = -1.0 / a
    jac[2, 0] = x2 / a**2
    jac[2, 1] = 1.0 / a
    return jac


def _closed_form(series: BetaSeries, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # valid on [0, 1]; at t = 1 both log terms vanish in the limit
    one_minus = 1.0 - t
    log_term = xlogy(one_minus, one_minus)
    x2 = one_minus * series.eval(t, 1) + log_term
    x3 = series.eval(t, 0) - log_term
    return x2, x3


def state_at(series: BetaSeries, t) -> np.ndarray:
    """Fluid point(s) ``x(t)`` for ``t`` in [0, 1], shape ``(..., 3)``.

    Unlike :func:`path`, ``t = 1`` is allowed and gives the limit
    ``(1, 0, beta(1))``.
    """
    t = np.asarray(t, dtype=float)
    x2, x3 = _closed_form(series, t)
    return np.stack([t, x2, x3], axis=-1)


class FluidPath(NamedTuple):
    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    sigma_sq: np.ndarray
    residual: float  # max |finite-difference derivative - drift| on the grid

    def rows(self):
        return list(zip(*(a.tolist() for a in (self.t, self.x1, self.x2, self.x3, self.sigma_sq))))


PATH_COLUMNS = ("t", "x1", "x2", "x3", "sigma_sq")


def path(series: BetaSeries, t_grid, *, fd_step: float = 1e-6) -> FluidPath:
    """Evaluate the closed-form fluid path on ``t_grid`` (points in [0, 1)).

    The returned ``residual`` measures how well the closed form solves
    ``x' = drift(x)`` there, using central differences of width ``fd_step``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if np.any(t < 0.0) or np.any(t >= 1.0):
        raise ValueError("grid points must lie in [0, 1)")
    x2, x3 = _closed_form(series, t)
    lo = np.maximum(t - fd_step, 0.0)
    hi = np.minimum(t + fd_step, 1.0 - 0.5 * (1.0 - t))
    (x2_lo, x3_lo), (x2_hi, x3_hi) = _closed_form(series, lo), _closed_form(series, hi)
    width = hi - lo
    rate = x2 / (1.0 - t)
    b2 = -1.0 - rate + (1.0 - t) * series.eval(t, 2)
    b3 = 1.0 + rate
    resid = np.maximum(np.abs((x2_hi - x2_lo) / width - b2), np.abs((x3_hi - x3_lo) / width - b3))
    return FluidPath(t, t.copy(), x2, x3, series.sigma_sq(t), float(np.max(resid)))


class Limits(NamedTuple):
    v_limit: float
    edge_limit: float


def limits(series: BetaSeries, report: ThresholdReport | None = None) -> Limits:
    """Limiting identifiable-vertex and identifiable-edge fractions in the generic case."""
    report = report or analyze(series)
    z = report.z_star
    if z >= 1.0:
        return Limits(1.0, float(series.eval(1.0, 0)))
    return Limits(z, float(series.eval(z, 0) - xlogy(1.0 - z, 1.0 - z)))


@dataclass(frozen=True)
class FluidReport:
    path: FluidPath
    z_star: float
    zeros: tuple[float, ...]
    v_limit: float
    edge_limit: float

    @property
    def sigma_sq_samples(self):
        return list(zip(self.path.t.tolist(), self.path.sigma_sq.tolist()))


def fluid_report(series: BetaSeries, points: int = 201, t_max: float | None = None) -> FluidReport:
    """Fluid path on ``points`` equally spaced times in ``[0, t_max]``.

    ``t_max`` defaults to ``z_star`` (capped just below 1).
    """
    report = analyze(series)
    if t_max is None:
        t_max = report.z_star
    t_max = min(t_max, 1.0 - 1e-6)
    grid = np.linspace(0.0, t_max, points)
    lim = limits(series, report)
    return FluidReport(path(series, grid), report.z_star, report.zeros, lim.v_limit, lim.edge_limit)


# -- critical-case limit law -------------------------------------------------


class ZLawSample(NamedTuple):
    value: float
    hit_zero_index: int | None  # which tangency stopped the collapse, if any


def _clock_times(report: ThresholdReport) -> np.ndarray:
    zeros = np.asarray(report.zeros, dtype=float)
    if zeros.size and zeros[0] <= 0.0:
        raise ValueError("tangency at t = 0: the limit law is not defined for beta_1 = 0")
    return zeros / (1.0 - zeros)


def sample_z_batch(report: ThresholdReport, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """``size`` exact draws of the terminal vertex fraction law.

    A Brownian motion is sampled at the clock times ``z/(1-z)`` of the
    tangential zeros; the draw is the first zero where it is negative, or
    ``z_star`` if there is none.  Returns ``(values, index)`` with index -1
    for ``z_star``.
    """
    times = _clock_times(report)
    values = np.full(size, report.z_star)
    index = np.full(size, -1, dtype=np.int64)
    if times.size == 0:
        return values, index
    steps = np.sqrt(np.diff(times, prepend=0.0))
    walk = np.cumsum(rng.standard_normal((size, times.size)) * steps, axis=1)
    negative = walk < 0.0
    hit = negative.any(axis=1)
    first = np.argmax(negative, axis=1)
    values[hit] = np.asarray(report.zeros)[first[hit]]
    index[hit] = first[hit]
    return values, index


def sample_z(report: ThresholdReport, rng: np.random.Generator) -> ZLawSample:
    values, index = sample_z_batch(report, rng, 1)
    return ZLawSample(float(values[0]), None if index[0] < 0 else int(index[0]))


def z_law(report: ThresholdReport) -> dict[float, float]:
    """Exact law for at most two tangential zeros (orthant probabilities)."""
    times = _clock_times(report)
    if times.size == 0:
        return {report.z_star: 1.0}
    if times.size == 1:
        return {report.zeros[0]: 0.5, report.z_star: 0.5}
    if times.size == 2:
        # P(W(s1) >= 0, W(s2) < 0) = 1/4 - arcsin(rho)/(2 pi), rho = corr
        rho = np.sqrt(times[0] / times[1])
        p2 = 0.25 - np.arcsin(rho) / (2.0 * np.pi)
        p_none = 0.5 - p2
        return {report.zeros[0]: 0.5, report.zeros[1]: float(p2), report.z_star: float(p_none)}
    raise NotImplementedError("closed form only for up to two zeros; use sample_z_batch")


# -- fluctuations ------------------------------------------------------------


class Fluctuations(NamedTuple):
    t: np.ndarray
    alpha: np.ndarray  # (paths, len(t)): patch fluctuation divided by (1 - t)
    gamma: np.ndarray | None  # (paths, len(t), 3) when the 3-d system was integrated


def _check_grid(t: np.ndarray, z_star: float) -> None:
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) < 0.0):
        raise ValueError("t_grid must be a nonempty nondecreasing 1-d sequence")
    if t[0] < 0.0 or t[-1] >= 1.0:
        raise ValueError("grid points must lie in [0, 1)")
    if z_star < 1.0 and t[-1] >= z_star:
        raise ValueError(f"grid reaches {t[-1]} beyond z_star = {z_star}")


def fluctuation_paths(
    series: BetaSeries,
    t_grid,
    rng: np.random.Generator,
    paths: int = 1,
    *,
    method: str = "exact",
    dt: float = 1e-4,
    full: bool = False,
    time_noise: bool = False,
) -> Fluctuations:
    """Sample the reduced patch fluctuation ``alpha_t`` on ``t_grid``.

    ``method="exact"`` draws ``alpha`` as Brownian motion in the clock
    ``sigma_sq(t)``, started from ``Normal(0, beta_1)``.  ``method="euler"``
    integrates

        d alpha = (sqrt(f) dB1 + sqrt((1-t) beta'') dB2) / (1 - t)

    with Euler-Maruyama steps of at most ``dt``.  ``full=True`` (Euler only)
    integrates the 3-d linear fluctuation system instead, with the debris
    component started from ``Normal(0, beta_0)``; ``time_noise`` adds the
    ``drift(x) dB3`` term that a Poisson clock would contribute.
    """
    t = np.asarray(t_grid, dtype=float)
    _check_grid(t, analyze(series).z_star)
    b1 = series[1]
    if method == "exact":
        if full:
            raise ValueError("the 3-d system is only available with method='euler'")
        clock = series.sigma_sq(t)
        var = np.diff(clock, prepend=series.sigma_sq(0.0))
        var[0] += series.sigma_sq(0.0)
        # clock is nondecreasing before z_star; clip rounding noise
        incr = rng.standard_normal((paths, t.size)) * np.sqrt(np.maximum(var, 0.0))
        return Fluctuations(t, np.cumsum(incr, axis=1), None)
    if method != "euler":
        raise ValueError(f"unknown method {method!r}")

    out_alpha = np.empty((paths, t.size))
    out_gamma = np.empty((paths, t.size, 3)) if full else None
    if full:
        gamma = np.zeros((paths, 3))
        gamma[:, 1] = rng.standard_normal(paths) * np.sqrt(b1)
        gamma[:, 2] = rng.standard_normal(paths) * np.sqrt(series[0])
    else:
        alpha = rng.standard_normal(paths) * np.sqrt(b1)
    s = 0.0
    for k, target in enumerate(t):
        while s < target:
            h = min(dt, target - s)
            if h <= 1e-15:
                break
            a = 1.0 - s
            f = max(float(series.threshold(s)), 0.0)
            v1 = np.sqrt(f)  # sqrt(x2 / (1 - x1))
            v2 = np.sqrt(a * series.eval(s, 2))
            dB = rng.standard_normal((paths, 3 if time_noise else 2)) * np.sqrt(h)
            if full:
                x = (s, a * f, 0.0)
                jac = drift_jacobian(series, x)
                noise = np.zeros((paths, 3))
                noise[:, 1] = v1 * dB[:, 0] + v2 * dB[:, 1]
                noise[:, 2] = -v1 * dB[:, 0]
                if time_noise:
                    noise += dB[:, 2:3] * np.asarray(drift(series, x))
                gamma = gamma + gamma @ jac.T * h + noise
            else:
                alpha = alpha + (v1 * dB[:, 0] + v2 * dB[:, 1]) / a
            s += h
        if full:
            out_gamma[:, k] = gamma
            out_alpha[:, k] = gamma[:, 1] / (1.0 - target)
        else:
            out_alpha[:, k] = alpha
    return Fluctuations(t, out_alpha, out_gamma)
