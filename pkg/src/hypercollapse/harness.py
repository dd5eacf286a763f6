"""Monte Carlo experiments over many independent collapses.

Every trial owns a Philox stream keyed by ``(master_seed, trial_index)``, so
results do not depend on worker count or scheduling order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import chain as chain_mod
from .beta import BetaSeries
from .collapse import collapse
from .fluid import state_at
from .hypergraph import sample_poisson

log = logging.getLogger(__name__)

ENGINES = ("full", "chain")
_MASK64 = (1 << 64) - 1


def trial_rng(master_seed: int, trial_index: int, purpose: int = 0) -> np.random.Generator:
    """Counter-based stream for one trial: Philox keyed by the seed and trial index."""
    key = np.array([master_seed & _MASK64, (trial_index << 8 | purpose) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Single integer identifying a trial stream (echoed in result files)."""
    return ((master_seed & _MASK64) << 32) ^ trial_index


@dataclass(frozen=True)
class ExperimentConfig:
    series: BetaSeries
    N: int
    trials: int
    master_seed: int = 0
    engine: str = "chain"
    record: str = "terminal"  # or "trajectories"
    workers: int = 1
    # extra per-trial statistics taken from the trajectory before discarding it
    probe_times: tuple[float, ...] = ()
    track_deviation: bool = False
    spot_check_rate: float = 0.01

    def __post_init__(self):
        if self.trials < 1 or self.N < 1:
            raise ValueError("need trials >= 1 and N >= 1")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.record not in ("terminal", "trajectories"):
            raise ValueError("record must be 'terminal' or 'trajectories'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def needs_trajectory(self) -> bool:
        return self.record == "trajectories" or bool(self.probe_times) or self.track_deviation

    def to_dict(self) -> dict:
        d = asdict(self)
        d["series"] = list(self.series.coeffs)
        d["probe_times"] = list(self.probe_times)
        return d


@dataclass(frozen=True)
class TrialSummary:
    trial_index: int
    seed: int
    v_frac: float
    edge_frac: float
    steps: int
    probes: tuple[int, ...] = ()  # Y at floor(t N) for each probe time
    sup_deviation: float | None = None


class Trajectory(NamedTuple):
    y: np.ndarray
    z: np.ndarray


class TrialError(RuntimeError):
    def __init__(self, trial_index: int, cause: BaseException):
        super().__init__(f"trial {trial_index}: {cause}")
        self.trial_index = trial_index


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: list[TrialSummary]
    trajectories: dict[int, Trajectory] = field(default_factory=dict)

    def v_fracs(self) -> np.ndarray:
        return np.array([s.v_frac for s in self.summaries])

    def edge_fracs(self) -> np.ndarray:
        return np.array([s.edge_frac for s in self.summaries])

    def steps(self) -> np.ndarray:
        return np.array([s.steps for s in self.summaries])

    def edge_counts(self) -> np.ndarray:
        return np.rint(self.edge_fracs() * self.config.N).astype(np.int64)


def _spot_check(config: ExperimentConfig, index: int) -> bool:
    if config.spot_check_rate <= 0.0:
        return False
    return trial_rng(config.master_seed, index, purpose=1).random() < config.spot_check_rate


def run_trial(config: ExperimentConfig, index: int) -> tuple[TrialSummary, Trajectory | None]:
    rng = trial_rng(config.master_seed, index)
    N = config.N
    try:
        if config.engine == "full":
            h = sample_poisson(config.series, N, rng)
            trace = collapse(h, "random", rng, inplace=True, check=_spot_check(config, index))
            v_star, lam_star = trace.v_star, trace.lambda_star
            traj = Trajectory(trace.y_path(), trace.z_path()) if config.needs_trajectory else None
        else:
            res = chain_mod.run(config.series, N, rng, record=config.needs_trajectory)
            v_star, lam_star = res.v_star_count, res.lambda_star_count
            traj = Trajectory(res.y, res.z) if config.needs_trajectory else None
    except Exception as exc:
        raise TrialError(index, exc) from exc

    probes: tuple[int, ...] = ()
    sup_dev = None
    if traj is not None:
        probes = tuple(
            int(traj.y[k]) if k < len(traj.y) else 0
            for k in (int(math.floor(t * N)) for t in config.probe_times)
        )
        if config.track_deviation:
            sup_dev = sup_deviation(traj, config.series, N)
    summary = TrialSummary(
        index, trial_seed(config.master_seed, index), v_star / N, lam_star / N, v_star, probes, sup_dev
    )
    return summary, traj if config.record == "trajectories" else None


def _run_block(config: ExperimentConfig, indices: Sequence[int]):
    return [run_trial(config, i) for i in indices]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run ``config.trials`` independent trials and collect per-trial summaries.

    With ``workers > 1`` blocks of trials go to a process pool; output order
    is by trial index either way.
    """
    indices = list(range(config.trials))
    if config.workers == 1:
        outcomes = _run_block(config, indices)
    else:
        blocks = [indices[k :: config.workers] for k in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as pool:
            parts = pool.map(_run_block, [config] * len(blocks), blocks)
            outcomes = sorted((o for part in parts for o in part), key=lambda o: o[0].trial_index)
    result = ExperimentResult(config, [o[0] for o in outcomes])
    if config.record == "trajectories":
        result.trajectories = {o[0].trial_index: o[1] for o in outcomes}
    log.info("ran %d %s trials at N=%d", config.trials, config.engine, config.N)
    return result


# -- statistics ----------------------------------------------------------------


class ChiSquareReport(NamedTuple):
    statistic: float
    p_value: float
    dof: int
    bins: int


def _merge_bins(counts_a: np.ndarray, counts_b: np.ndarray, n_a: int, n_b: int, min_expected: float):
    total = n_a + n_b
    merged_a, merged_b = [], []
    acc_a = acc_b = 0
    for ca, cb in zip(counts_a, counts_b):
        acc_a += ca
        acc_b += cb
        pooled = acc_a + acc_b
        if min(n_a, n_b) * pooled / total >= min_expected:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a or acc_b:
        if merged_a:
            merged_a[-1] += acc_a
            merged_b[-1] += acc_b
        else:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
    return np.array(merged_a), np.array(merged_b)


def _counts_on(sorted_values: np.ndarray, support: np.ndarray) -> np.ndarray:
    return np.searchsorted(sorted_values, support, side="right") - np.searchsorted(
        sorted_values, support, side="left"
    )


def compare_distributions(a: Sequence[int], b: Sequence[int], *, min_expected: float = 5.0) -> ChiSquareReport:
    """Two-sample chi-square test of equal distributions for integer outcomes.

    Outcomes are binned on their pooled support; adjacent bins are merged
    (in increasing order) until every expected count is at least
    ``min_expected``.  A single remaining bin means there is nothing to
    distinguish and is reported as ``p = 1``.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    support = np.union1d(a, b)
    counts_a = _counts_on(np.sort(a), support)
    counts_b = _counts_on(np.sort(b), support)
    ma, mb = _merge_bins(counts_a, counts_b, a.size, b.size, min_expected)
    if ma.size < 2:
        return ChiSquareReport(0.0, 1.0, 0, int(ma.size))
    table = np.vstack([ma, mb])
    pooled = table.sum(axis=0)
    expected = np.outer([a.size, b.size], pooled) / (a.size + b.size)
    statistic = float(np.sum((table - expected) ** 2 / expected))
    dof = ma.size - 1
    return ChiSquareReport(statistic, float(stats.chi2.sf(statistic, dof)), dof, int(ma.size))


class PointMass(NamedTuple):
    masses: dict[float, float]
    counts: dict[float, int]
    unclassified: int
    total: int


def two_point_mass(values: Sequence[float], candidates: Sequence[float], tol: float) -> PointMass:
    """Empirical mass at each candidate; a value farther than ``tol`` from all is unclassified."""
    cand = np.asarray(candidates, dtype=float)
    if np.unique(cand).size != cand.size:
        raise ValueError("candidates must be distinct")
    vals = np.asarray(values, dtype=float)
    dist = np.abs(vals[:, None] - cand[None, :])
    nearest = np.argmin(dist, axis=1)
    ok = dist[np.arange(vals.size), nearest] <= tol
    counts = {float(c): int(np.count_nonzero(ok & (nearest == k))) for k, c in enumerate(cand)}
    total = int(vals.size)
    masses = {c: n / total if total else 0.0 for c, n in counts.items()}
    return PointMass(masses, counts, int(total - ok.sum()), total)


def sup_deviation(traj: Trajectory, series: BetaSeries, N: int) -> float:
    """``sup_n |(n/N, Y_n/N, Z_n/N) - x(n/N)|`` over the recorded steps (Euclidean norm)."""
    y = np.asarray(traj.y, dtype=float)
    t = np.arange(y.size) / N
    fluid = state_at(series, t)
    dev = np.hypot(y / N - fluid[:, 1], np.asarray(traj.z, dtype=float) / N - fluid[:, 2])
    return float(dev.max())


class DeviationStats(NamedTuple):
    sups: np.ndarray
    median: float
    q90: float
    max: float

    def fraction_above(self, delta: float) -> float:
        return float(np.mean(self.sups > delta))


def trajectory_deviation(trajectories: Sequence[Trajectory], series: BetaSeries, N: int) -> DeviationStats:
    """Distribution over trials of the sup-norm distance to the fluid path."""
    sups = np.array([sup_deviation(tr, series, N) for tr in trajectories])
    return DeviationStats(sups, float(np.median(sups)), float(np.quantile(sups, 0.9)), float(sups.max()))
