"""Brute-force many-body reference in the fixed particle-number sector.

Basis words are integers with bit ``i`` standing for site ``i`` (LSB =
site 0), listed in ascending integer order; a word means creation
operators applied in ascending site order to the vacuum.  Operator matrix
elements carry the usual parity sign, the count of occupied sites below
the acted-on site.

This path never samples randomness: it replays jump schedules recorded by
the Gaussian engine so the two implementations can be compared state by
state.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .lattice import build_h_eff
from .state import JumpOperator, ObservableSet, _binary_entropy, measure
from .trajectory import STOCHASTIC, JumpSchedule, TrajectoryConfig, evolve

_MAX_SITES = 14


class SectorTooLargeError(ValueError):
    """Chain too long for dense many-body treatment."""


class ScheduleReplayError(RuntimeError):
    """Replayed jump annihilates the state (schedule/state mismatch)."""


@dataclass(frozen=True)
class FockBasis:
    L: int
    N: int
    words: tuple
    index: dict

    @classmethod
    def build(cls, L: int, N: int) -> "FockBasis":
        if L > _MAX_SITES:
            raise SectorTooLargeError(f"L = {L} exceeds the dense-sector guard {_MAX_SITES}")
        if not 1 <= N <= L:
            raise ValueError(f"need 1 <= N <= L, got N={N}, L={L}")
        words = tuple(
            sorted(sum(1 << s for s in sites) for sites in combinations(range(L), N))
        )
        return cls(L, N, words, {w: i for i, w in enumerate(words)})

    @property
    def dim(self) -> int:
        return len(self.words)


def _parity_below(word: int, site: int) -> int:
    return -1 if bin(word & ((1 << site) - 1)).count("1") % 2 else 1


def _annihilate(word: int, site: int):
    if not (word >> site) & 1:
        return 0, None
    return _parity_below(word, site), word & ~(1 << site)


def _create(word: int, site: int):
    if (word >> site) & 1:
        return 0, None
    return _parity_below(word, site), word | (1 << site)


def lift_quadratic(basis: FockBasis, h: np.ndarray) -> np.ndarray:
    """Sector matrix of ``sum_{mn} h[m, n] c+_m c_n``."""
    h = np.asarray(h)
    D = basis.dim
    H = np.zeros((D, D), dtype=np.complex128)
    for col, w in enumerate(basis.words):
        for n in range(basis.L):
            s1, w1 = _annihilate(w, n)
            if s1 == 0:
                continue
            for m in range(basis.L):
                if h[m, n] == 0:
                    continue
                s2, w2 = _create(w1, m)
                if s2 == 0:
                    continue
                H[basis.index[w2], col] += h[m, n] * s1 * s2
    return H


def number_phases(basis: FockBasis, site: int, theta: float) -> np.ndarray:
    """Diagonal of exp(i theta n_site) in the sector basis."""
    phase = np.exp(1j * theta)
    return np.array(
        [phase if (w >> site) & 1 else 1.0 for w in basis.words], dtype=np.complex128
    )


def lift_jump(basis: FockBasis, jump: JumpOperator) -> np.ndarray:
    """Sector matrix of the feedback jump: exp(i theta n_{i+1}) xi+ xi / 2."""
    a = jump.a_vector()
    proj = lift_quadratic(basis, 0.5 * np.outer(a, a.conj()))
    return number_phases(basis, jump.partner, jump.theta)[:, None] * proj


def slater_vector(basis: FockBasis, U: np.ndarray) -> np.ndarray:
    """Fock amplitudes of a Slater state: det of the occupied-row block."""
    U = np.asarray(U, dtype=np.complex128)
    if U.shape != (basis.L, basis.N):
        raise ValueError(f"orbital matrix must be {basis.L} x {basis.N}")
    psi = np.empty(basis.dim, dtype=np.complex128)
    for k, w in enumerate(basis.words):
        rows = [s for s in range(basis.L) if (w >> s) & 1]
        psi[k] = np.linalg.det(U[rows, :])
    return psi


def correlation_from_vector(basis: FockBasis, psi: np.ndarray) -> np.ndarray:
    """G[m, n] = <psi| c+_m c_n |psi> by direct operator application."""
    L = basis.L
    G = np.zeros((L, L), dtype=np.complex128)
    for col, w in enumerate(basis.words):
        amp = psi[col]
        if amp == 0:
            continue
        for n in range(L):
            s1, w1 = _annihilate(w, n)
            if s1 == 0:
                continue
            for m in range(L):
                s2, w2 = _create(w1, m)
                if s2 == 0:
                    continue
                G[m, n] += np.conj(psi[basis.index[w2]]) * amp * s1 * s2
    return G


def reduced_density_matrix(basis: FockBasis, psi: np.ndarray, n_sites: int) -> np.ndarray:
    """Exact partial trace onto the first ``n_sites`` sites.

    Number conservation keeps the kept-part particle parity fixed within
    each traced-out configuration, so no fermionic sign appears.
    """
    mask = (1 << n_sites) - 1
    groups = defaultdict(list)
    for k, w in enumerate(basis.words):
        groups[w >> n_sites].append((w & mask, k))
    rho = np.zeros((1 << n_sites, 1 << n_sites), dtype=np.complex128)
    for members in groups.values():
        for a1, k1 in members:
            for a2, k2 in members:
                rho[a1, a2] += psi[k1] * np.conj(psi[k2])
    return rho


def entanglement_from_vector(basis: FockBasis, psi: np.ndarray, n_sites: int) -> float:
    if n_sites == 0:
        return 0.0
    lam = np.linalg.eigvalsh(reduced_density_matrix(basis, psi, n_sites))
    lam = np.clip(lam, 1e-14, None)
    return float(-np.sum(lam * np.log(lam)))


def ed_observables(basis: FockBasis, psi: np.ndarray, time: float = 0.0) -> ObservableSet:
    """Every recorded observable from the exact sector vector."""
    G = correlation_from_vector(basis, psi)
    n = np.real(np.diag(G))
    half = basis.L // 2
    quarter = basis.L // 4
    g_fwd = sum(G[m, (m + 1) % basis.L] for m in range(basis.L))
    current = float((1j * (g_fwd - np.conj(g_fwd)) / basis.L).real)
    return ObservableSet(
        time=time,
        S_ent=entanglement_from_vector(basis, psi, quarter),
        S_cl=_binary_entropy(n),
        delta_n=abs(float(np.sum(n[:half]) - np.sum(n[half:]))) / basis.N,
        current_J=current,
        density=n,
    )


def sector_propagator(basis: FockBasis, h_eff: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H_eff dt) in the sector, by eigendecomposition when well
    conditioned, otherwise scaling-and-squaring."""
    H = lift_quadratic(basis, h_eff)
    try:
        lam, V = np.linalg.eig(H)
        cond = np.linalg.cond(V)
        if np.isfinite(cond) and cond < 1e8:
            return V @ (np.exp(-1j * dt * lam)[:, None] * np.linalg.inv(V))
    except np.linalg.LinAlgError:
        pass
    return scipy.linalg.expm(-1j * dt * H)


def ed_step(psi: np.ndarray, expK: np.ndarray, jump_mats) -> np.ndarray:
    """Drift then the scheduled jumps, each followed by normalization."""
    psi = expK @ psi
    psi = psi / np.linalg.norm(psi)
    for mat in jump_mats:
        psi = mat @ psi
        norm = np.linalg.norm(psi)
        if norm < 1e-12:
            raise ScheduleReplayError("scheduled jump annihilated the state")
        psi = psi / norm
    return psi


def replay(config: TrajectoryConfig, jump_log) -> list:
    """Run the exact sector dynamics under a recorded jump schedule.

    Returns ``(step, psi)`` at each snapshot step of ``config``.
    """
    params = config.lattice
    N = sum(config.initial_pattern)
    basis = FockBasis.build(params.L, N)
    h_eff = build_h_eff(params)
    expK = sector_propagator(basis, h_eff, config.dt)
    lifted = {
        b: lift_jump(basis, JumpOperator(params.L, b, params.theta))
        for b in params.bonds()
    }
    by_step = defaultdict(list)
    for s, b in jump_log:
        by_step[s].append(b)
    word = sum(1 << i for i, bit in enumerate(config.initial_pattern) if bit)
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[basis.index[word]] = 1.0
    snapshot_at = set(config.snapshot_steps())
    out = []
    if 0 in snapshot_at:
        out.append((0, psi.copy()))
    for n in range(1, config.n_steps + 1):
        psi = ed_step(psi, expK, [lifted[b] for b in sorted(by_step.get(n, []))])
        if n in snapshot_at:
            out.append((n, psi.copy()))
    return out


def compare_with_oracle(config: TrajectoryConfig, schedule: JumpSchedule = None) -> dict:
    """Run the Gaussian engine, replay its jump log exactly, and report the
    maximum deviation of G and of each scalar observable over all snapshots."""
    if schedule is None:
        schedule = STOCHASTIC
    snapshot_at = set(config.snapshot_steps())
    gauss_states = []
    jump_log = []
    for n, state, fired in evolve(config, schedule):
        jump_log.extend((n, b) for b in fired)
        if n in snapshot_at:
            gauss_states.append((n, state))

    N = sum(config.initial_pattern)
    basis = FockBasis.build(config.lattice.L, N)
    exact = replay(config, jump_log)

    dev = {k: 0.0 for k in ("G", "S_ent", "S_cl", "delta_n", "current_J")}
    for (n_g, state), (n_e, psi) in zip(gauss_states, exact):
        assert n_g == n_e
        G_gauss = state.correlation_matrix()
        G_exact = correlation_from_vector(basis, psi)
        dev["G"] = max(dev["G"], float(np.max(np.abs(G_gauss - G_exact))))
        obs_g = measure(state, n_g * config.dt)
        obs_e = ed_observables(basis, psi, n_e * config.dt)
        for key in ObservableSet.SCALARS:
            dev[key] = max(dev[key], abs(getattr(obs_g, key) - getattr(obs_e, key)))
    dev["n_snapshots"] = len(exact)
    dev["n_jumps"] = len(jump_log)
    return dev
