"""Single quantum trajectory: non-Hermitian drift plus stochastic jumps.

Each step applies the precomputed propagator ``exp(-i h_eff dt)``, then
draws one uniform per bond and fires bond ``n`` when
``r_n < gamma * dt * <P_n>``, with all expectations taken on the
post-drift state.  Fired jumps are applied in ascending bond order.

Randomness is counter-based: the uniforms of a step are a pure function
of (seed, trajectory_index, step, bond), so ensembles replay exactly no
matter how trajectories are scheduled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
import scipy.linalg

from .lattice import LatticeParams, build_h_eff
from .state import (
    JumpOnEmptyModeError,
    JumpOperator,
    ObservableSet,
    SlaterState,
    apply_jump,
    apply_propagator,
    bond_expectations,
    jump_expectation,
    measure,
)

_MASK64 = (1 << 64) - 1
GAMMA_DT_HARD_LIMIT = 0.5
GAMMA_DT_WARN_LIMIT = 0.1


class ScheduleMismatchError(RuntimeError):
    """Forced schedule fires a bond whose jump probability vanishes."""


class TrajectoryError(RuntimeError):
    """Failure inside a trajectory, annotated with the step index."""


def domain_wall_pattern(L: int) -> tuple:
    """|111..000>: first L//2 sites occupied."""
    return tuple(1 if i < L // 2 else 0 for i in range(L))


def neel_pattern(L: int) -> tuple:
    """|1010..>: even sites occupied."""
    return tuple(1 if i % 2 == 0 else 0 for i in range(L))


@dataclass(frozen=True)
class TrajectoryConfig:
    lattice: LatticeParams
    dt: float = 0.01
    t_max: float = 10.0
    initial_pattern: tuple = ()
    seed: int = 0
    trajectory_index: int = 0
    record_every: int = 10
    record_density: bool = False

    def __post_init__(self) -> None:
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        gdt = self.lattice.gamma * self.dt
        if gdt > GAMMA_DT_HARD_LIMIT:
            raise ValueError(
                f"gamma*dt = {gdt:.4g} exceeds the hard limit {GAMMA_DT_HARD_LIMIT}"
            )
        if gdt > GAMMA_DT_WARN_LIMIT:
            warnings.warn(
                f"gamma*dt = {gdt:.4g} > {GAMMA_DT_WARN_LIMIT}: coarse time steps "
                "bias the jump unraveling (pseudo skin effect)",
                stacklevel=2,
            )
        if self.t_max < 0:
            raise ValueError(f"t_max must be >= 0, got {self.t_max!r}")
        n = self.t_max / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"t_max/dt = {n!r} is not an integer step count")
        pattern = tuple(int(b) for b in self.initial_pattern)
        if len(pattern) != self.lattice.L:
            raise ValueError(
                f"initial_pattern has {len(pattern)} sites, lattice has {self.lattice.L}"
            )
        if any(b not in (0, 1) for b in pattern):
            raise ValueError("initial_pattern must be 0/1 valued")
        if sum(pattern) == 0:
            raise ValueError("initial_pattern must occupy at least one site")
        object.__setattr__(self, "initial_pattern", pattern)
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def snapshot_steps(self) -> list:
        steps = list(range(0, self.n_steps + 1, self.record_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps


@dataclass(frozen=True)
class JumpSchedule:
    """Forced (step, bond) events; ``None`` means sample stochastically."""

    forced: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.forced is not None:
            events = tuple((int(s), int(b)) for s, b in self.forced)
            if list(events) != sorted(events):
                raise ValueError("forced events must be sorted by (step, bond)")
            object.__setattr__(self, "forced", events)

    @property
    def stochastic(self) -> bool:
        return self.forced is None

    def bonds_at(self, step: int) -> list:
        if self.forced is None:
            return []
        return [b for s, b in self.forced if s == step]


STOCHASTIC = JumpSchedule(None)


def precompute_propagator(h_eff: np.ndarray, dt: float) -> np.ndarray:
    """Dense matrix exponential exp(-i h_eff dt), computed once per run."""
    if not (dt > 0):
        raise ValueError("dt must be > 0")
    K = scipy.linalg.expm(-1j * dt * np.asarray(h_eff, dtype=np.complex128))
    if not np.all(np.isfinite(K)):
        raise OverflowError("propagator overflowed; gamma*dt is absurdly large")
    return K


def _step_uniforms(seed: int, trajectory_index: int, step: int, n: int) -> np.ndarray:
    bg = np.random.Philox(
        counter=[step & _MASK64, 0, 0, 0],
        key=[seed & _MASK64, trajectory_index & _MASK64],
    )
    return np.random.Generator(bg).random(n)


def step(
    state: SlaterState,
    K: np.ndarray,
    jumps: Sequence[JumpOperator],
    gamma_dt: float,
    schedule: JumpSchedule,
    *,
    seed: int = 0,
    trajectory_index: int = 0,
    step_index: int = 0,
) -> tuple:
    """One drift-then-jump step; returns (new state, fired bond list)."""
    state = apply_propagator(state, K)
    if schedule.stochastic:
        probs = gamma_dt * bond_expectations(state, state.L, len(jumps))
        r = _step_uniforms(seed, trajectory_index, step_index, len(jumps))
        fired = [b for b in range(len(jumps)) if r[b] < probs[b]]
    else:
        fired = schedule.bonds_at(step_index)
        for b in fired:
            if jump_expectation(state, jumps[b]) <= 1e-12:
                raise ScheduleMismatchError(
                    f"forced jump on bond {b} at step {step_index} has zero probability"
                )
    for b in fired:
        state = apply_jump(state, jumps[b])
    return state, fired


def evolve(config: TrajectoryConfig, schedule: JumpSchedule = STOCHASTIC) -> Iterator[tuple]:
    """Yield (step_index, state, fired_bonds) for every step, starting at 0."""
    params = config.lattice
    K = precompute_propagator(build_h_eff(params), config.dt)
    jumps = [JumpOperator(params.L, b, params.theta) for b in params.bonds()]
    gamma_dt = params.gamma * config.dt
    state = SlaterState.from_occupation(config.initial_pattern)
    yield 0, state, []
    for n in range(1, config.n_steps + 1):
        try:
            state, fired = step(
                state,
                K,
                jumps,
                gamma_dt,
                schedule,
                seed=config.seed,
                trajectory_index=config.trajectory_index,
                step_index=n,
            )
        except (JumpOnEmptyModeError, ScheduleMismatchError, RuntimeError) as exc:
            raise TrajectoryError(f"step {n}: {exc}") from exc
        yield n, state, fired


@dataclass
class TrajectoryRecord:
    config: TrajectoryConfig
    snapshots: list  # time-ordered ObservableSet
    jump_log: list  # (step, bond) events
    density_history: Optional[np.ndarray] = None  # snapshot times x sites

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def scalar_series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])


def run_trajectory(
    config: TrajectoryConfig, schedule: JumpSchedule = STOCHASTIC
) -> TrajectoryRecord:
    """Full trajectory with snapshots every ``record_every`` steps."""
    snapshot_at = set(config.snapshot_steps())
    snapshots = []
    jump_log = []
    rows = [] if config.record_density else None
    for n, state, fired in evolve(config, schedule):
        jump_log.extend((n, b) for b in fired)
        if n in snapshot_at:
            obs = measure(state, n * config.dt)
            snapshots.append(obs)
            if rows is not None:
                rows.append(obs.density)
    history = np.array(rows) if rows is not None else None
    return TrajectoryRecord(config, snapshots, jump_log, history)
