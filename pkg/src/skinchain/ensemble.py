"""Trajectory ensembles: parallel execution, averages, and scaling fits.

Trajectories are embarrassingly parallel; each one derives its own random
stream from (master seed, trajectory index), and the reduction runs in
trajectory-index order, so results are bit-identical no matter how many
workers run or in which order they finish.  BLAS threading inside each
trajectory is pinned to one thread for the same reason.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .state import ObservableSet
from .trajectory import STOCHASTIC, TrajectoryConfig, run_trajectory

WORKERS_ENV = "SKINCHAIN_WORKERS"


@dataclass(frozen=True)
class EnsembleConfig:
    base: TrajectoryConfig  # its seed is the ensemble master seed
    n_traj: int
    steady_window_fraction: float = 0.25
    n_workers: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_traj < 2:
            raise ValueError("n_traj must be >= 2 for error bars")
        if not (0.0 < self.steady_window_fraction <= 1.0):
            raise ValueError("steady_window_fraction must lie in (0, 1]")


@dataclass
class SteadySummary:
    """Time average over the final window, then statistics over trajectories."""

    mean: dict
    stderr: dict
    per_trajectory: dict  # name -> (n_traj,) array of window means
    density_profile: np.ndarray
    density_profile_err: np.ndarray
    window_snapshots: int


@dataclass
class EnsembleRecord:
    config: EnsembleConfig
    times: np.ndarray
    mean: dict  # name -> (n_times,) array
    stderr: dict
    density_mean: np.ndarray  # n_times x L
    steady: SteadySummary


def _one_trajectory(args) -> dict:
    config, index = args
    with warnings.catch_warnings():
        # the base config already warned once about coarse gamma*dt
        warnings.simplefilter("ignore", UserWarning)
        cfg = replace(config, trajectory_index=index, record_density=True)
    try:
        with threadpool_limits(limits=1):
            rec = run_trajectory(cfg, STOCHASTIC)
    except Exception as exc:
        raise RuntimeError(f"trajectory {index}: {exc}") from exc
    out = {name: rec.scalar_series(name) for name in ObservableSet.SCALARS}
    out["density"] = rec.density_history
    out["times"] = rec.times
    return out


def resolve_workers(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _window_size(n_snapshots: int, fraction: float) -> int:
    return max(1, int(round(fraction * n_snapshots)))


def run_ensemble(config: EnsembleConfig) -> EnsembleRecord:
    """Run ``n_traj`` trajectories and reduce them in index order."""
    tasks = [(config.base, i) for i in range(config.n_traj)]
    workers = resolve_workers(config.n_workers)
    if workers == 1 or config.n_traj == 1:
        results = map(_one_trajectory, tasks)
        payload = list(results)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            payload = list(pool.map(_one_trajectory, tasks, chunksize=1))

    times = payload[0]["times"]
    scalars = {
        name: np.stack([r[name] for r in payload]) for name in ObservableSet.SCALARS
    }
    density_sum = np.zeros_like(payload[0]["density"])
    for r in payload:
        density_sum += r["density"]
    density_mean = density_sum / config.n_traj

    n = config.n_traj
    mean = {k: v.mean(axis=0) for k, v in scalars.items()}
    stderr = {k: v.std(axis=0, ddof=1) / np.sqrt(n) for k, v in scalars.items()}

    w = _window_size(len(times), config.steady_window_fraction)
    per_traj = {k: v[:, -w:].mean(axis=1) for k, v in scalars.items()}
    window_profiles = np.stack([r["density"][-w:].mean(axis=0) for r in payload])
    steady = SteadySummary(
        mean={k: float(v.mean()) for k, v in per_traj.items()},
        stderr={k: float(v.std(ddof=1) / np.sqrt(n)) for k, v in per_traj.items()},
        per_trajectory=per_traj,
        density_profile=window_profiles.mean(axis=0),
        density_profile_err=window_profiles.std(axis=0, ddof=1) / np.sqrt(n),
        window_snapshots=w,
    )
    return EnsembleRecord(config, times, mean, stderr, density_mean, steady)


@dataclass(frozen=True)
class CollapsePoint:
    L: int
    gamma: float
    S_cl_mean: float
    S_cl_err: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.S_cl_mean) or self.S_cl_mean < 0:
            raise ValueError(f"S_cl_mean must be finite and >= 0, got {self.S_cl_mean}")


@dataclass
class CollapseResult:
    table: np.ndarray  # columns: gamma*L, S_cl/L, err/L
    fit_c: Optional[float]  # amplitude of the constrained y = c/x tail fit
    slope: Optional[float]  # unconstrained log-log tail slope
    slope_err: Optional[float]
    n_tail: int


def _loglog_fit(x: np.ndarray, y: np.ndarray):
    """OLS of log y on log x; returns slope, intercept, slope stderr."""
    lx, ly = np.log(x), np.log(y)
    n = lx.size
    vx = lx - lx.mean()
    slope = float(np.dot(vx, ly) / np.dot(vx, vx))
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    if n > 2:
        s2 = float(np.dot(resid, resid)) / (n - 2)
        err = float(np.sqrt(s2 / np.dot(vx, vx)))
    else:
        err = float("inf")
    return slope, intercept, err


def collapse_scan(points: Sequence[CollapsePoint]) -> CollapseResult:
    """Rescale to (gamma*L, S_cl/L) and fit the large-argument tail.

    The tail is the largest decade of gamma*L present; the constrained
    ``c/x`` amplitude and the unconstrained log-log slope are both
    reported.  With fewer than 3 tail points the fit is refused but the
    collapse table is still returned.
    """
    if len({pt.L for pt in points}) < 3:
        raise ValueError("collapse needs at least 3 distinct system sizes")
    x = np.array([pt.gamma * pt.L for pt in points], dtype=float)
    y = np.array([pt.S_cl_mean / pt.L for pt in points], dtype=float)
    err = np.array([pt.S_cl_err / pt.L for pt in points], dtype=float)
    order = np.argsort(x)
    table = np.column_stack([x, y, err])[order]

    tail = (x >= x.max() / 10.0) & (y > 0)
    n_tail = int(tail.sum())
    if n_tail < 3:
        return CollapseResult(table, None, None, None, n_tail)
    slope, _, slope_err = _loglog_fit(x[tail], y[tail])
    fit_c = float(np.exp(np.mean(np.log(x[tail] * y[tail]))))
    return CollapseResult(table, fit_c, slope, slope_err, n_tail)


def scaling_exponent_fit(points: Sequence[tuple]) -> tuple:
    """Log-log slope of entropy against system size, with its stderr."""
    if len(points) < 3:
        raise ValueError("exponent fit needs at least 3 sizes")
    L = np.array([p[0] for p in points], dtype=float)
    S = np.array([p[1] for p in points], dtype=float)
    if np.any(S <= 0):
        raise ValueError("entropy values must be positive for a log-log fit")
    slope, _, err = _loglog_fit(L, S)
    return slope, err
