"""Pure Gaussian (Slater determinant) states and their observables.

A state of N fermions on L sites is an L x N matrix U of orthonormal
single-particle orbitals.  Everything measurable comes from the two-point
correlation matrix ``G[m, n] = <c+_m c_n> = (conj(U) @ U.T)[m, n]``.

Jumps act on the two-site quasi-mode ``xi+ = c+_i - i c+_{i+1}``: the
occupied component along the mode is projected out by column elimination,
the mode itself is re-inserted as the first column, and the feedback phase
multiplies row i+1 by ``exp(i theta)``.  A final QR restores
orthonormality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_CLAMP_EPS = 1e-14  # keeps log arguments away from 0 for round-off eigenvalues
_PIVOT_TOL = 1e-12


class JumpOnEmptyModeError(RuntimeError):
    """Jump requested on a quasi-mode with no occupied component."""


class RankDeficiencyError(RuntimeError):
    """Propagation collapsed the orbital matrix to deficient rank."""


@dataclass(frozen=True)
class JumpOperator:
    """Measurement-plus-feedback operator on bond ``bond`` of an L-site chain.

    The quasi-mode amplitude vector has exactly two nonzero entries,
    ``a[i] = 1`` and ``a[i+1] = -i`` (site L wraps to 0 for the periodic
    boundary bond), so ``|a|^2 = 2``.
    """

    L: int
    bond: int
    theta: float

    def __post_init__(self) -> None:
        if not 0 <= self.bond < self.L:
            raise ValueError(f"bond {self.bond} outside chain of {self.L} sites")

    @property
    def site(self) -> int:
        return self.bond

    @property
    def partner(self) -> int:
        return (self.bond + 1) % self.L

    def a_vector(self) -> np.ndarray:
        a = np.zeros(self.L, dtype=np.complex128)
        a[self.site] = 1.0
        a[self.partner] = -1.0j
        return a


class SlaterState:
    """Value-type wrapper around the L x N orbital matrix."""

    __slots__ = ("orbitals",)

    def __init__(self, orbitals: np.ndarray):
        orbitals = np.asarray(orbitals, dtype=np.complex128)
        if orbitals.ndim != 2:
            raise ValueError("orbitals must be a 2-d array")
        L, N = orbitals.shape
        if N < 1 or N > L:
            raise ValueError(f"need 1 <= N <= L, got L={L}, N={N}")
        self.orbitals = orbitals

    @property
    def L(self) -> int:
        return self.orbitals.shape[0]

    @property
    def N(self) -> int:
        return self.orbitals.shape[1]

    @classmethod
    def from_occupation(cls, pattern) -> "SlaterState":
        """Occupation-basis product state; one standard-basis column per 1."""
        bits = np.asarray(list(pattern), dtype=int)
        if bits.ndim != 1 or not np.all((bits == 0) | (bits == 1)):
            raise ValueError("pattern must be a flat sequence of 0/1")
        occupied = np.flatnonzero(bits)
        if occupied.size == 0:
            raise ValueError("pattern must occupy at least one site")
        U = np.zeros((bits.size, occupied.size), dtype=np.complex128)
        U[occupied, np.arange(occupied.size)] = 1.0
        return cls(U)

    def correlation_matrix(self) -> np.ndarray:
        """G[m, n] = <c+_m c_n>; Hermitian, idempotent, trace N."""
        U = self.orbitals
        return U.conj() @ U.T

    def orthonormality_defect(self) -> float:
        U = self.orbitals
        return float(np.max(np.abs(U.conj().T @ U - np.eye(self.N))))


def _qr_state(M: np.ndarray) -> SlaterState:
    Q, R = np.linalg.qr(M)
    rdiag = np.abs(np.diag(R))
    if rdiag.min() <= 1e-14 * max(rdiag.max(), 1e-300):
        raise RankDeficiencyError(
            "orbital matrix became rank deficient (catastrophic dissipation)"
        )
    return SlaterState(Q)


def apply_propagator(state: SlaterState, K: np.ndarray) -> SlaterState:
    """Drift step: orbitals <- Q of the QR factorization of K @ U."""
    return _qr_state(K @ state.orbitals)


def _mode_overlaps(state: SlaterState, jump: JumpOperator) -> np.ndarray:
    # <a|U_j> = conj(a) . U[:, j] = U[i, j] + i U[i+1, j]
    U = state.orbitals
    return U[jump.site, :] + 1j * U[jump.partner, :]


def jump_expectation(state: SlaterState, jump: JumpOperator) -> float:
    """Projector expectation <P> = (n_i + n_{i+1})/2 - Im G_{i,i+1}, in [0, 1]."""
    U = state.orbitals
    i, j = jump.site, jump.partner
    ni = float(np.sum(np.abs(U[i, :]) ** 2))
    nj = float(np.sum(np.abs(U[j, :]) ** 2))
    g_ij = complex(np.sum(U[i, :].conj() * U[j, :]))
    return 0.5 * (ni + nj) - g_ij.imag


def bond_expectations(state: SlaterState, L: int, n_bonds: int) -> np.ndarray:
    """<P_i> for bonds 0..n_bonds-1 in one vectorized pass."""
    U = state.orbitals
    occ = np.einsum("ik,ik->i", U.conj(), U).real
    shifted = np.roll(U, -1, axis=0)
    off = np.einsum("ik,ik->i", U.conj(), shifted)
    probs = 0.5 * (occ + np.roll(occ, -1)) - off.imag
    return probs[:n_bonds]


def apply_jump(state: SlaterState, jump: JumpOperator) -> SlaterState:
    """Normalized action of the jump operator on the state.

    Pivots on the column with the largest quasi-mode overlap (stablest
    elimination; column operations leave the determinant state invariant).
    """
    o = _mode_overlaps(state, jump)
    pivot = int(np.argmax(np.abs(o)))
    if abs(o[pivot]) < _PIVOT_TOL:
        raise JumpOnEmptyModeError(
            f"jump on unoccupied quasi-mode at bond {jump.bond}"
        )
    U = state.orbitals.copy()
    if pivot != 0:
        U[:, [0, pivot]] = U[:, [pivot, 0]]
        o[[0, pivot]] = o[[pivot, 0]]
    U[:, 1:] -= np.outer(U[:, 0], o[1:] / o[0])
    U[:, 0] = jump.a_vector() / np.sqrt(2.0)
    U[jump.partner, :] *= np.exp(1j * jump.theta)
    return _qr_state(U)


def _binary_entropy(lam: np.ndarray) -> float:
    lam = np.clip(np.real(lam), _CLAMP_EPS, 1.0 - _CLAMP_EPS)
    return float(-np.sum(lam * np.log(lam) + (1.0 - lam) * np.log(1.0 - lam)))


def entanglement_entropy(state: SlaterState, subsystem=None) -> float:
    """Bipartite entropy of a site interval from the sub-block of G.

    Natural logarithm; default subsystem is the first ``L // 4`` sites.
    Empty subsystem gives 0.
    """
    if subsystem is None:
        subsystem = range(state.L // 4)
    idx = np.fromiter(subsystem, dtype=int)
    if idx.size == 0:
        return 0.0
    UA = state.orbitals[idx, :]
    GA = UA.conj() @ UA.T
    lam = np.linalg.eigvalsh(GA)
    return _binary_entropy(lam)


def density(state: SlaterState) -> np.ndarray:
    """Site occupations <n_i> = diag G."""
    U = state.orbitals
    return np.einsum("ik,ik->i", U.conj(), U).real


def classical_entropy(state: SlaterState) -> float:
    """Sum of per-site binary entropies of <n_i>, with 0 log 0 = 0."""
    return _binary_entropy(density(state))


def density_imbalance(state: SlaterState) -> float:
    """|N_left - N_right| / N_total with left = first L//2 sites."""
    n = density(state)
    half = state.L // 2
    n_left = float(np.sum(n[:half]))
    n_right = float(np.sum(n[half:]))
    return abs(n_left - n_right) / float(state.N)


def particle_current(state: SlaterState) -> float:
    """Ring current (i/L) * sum_n (G_{n,n+1} - G_{n+1,n}), site L+1 = 1."""
    U = state.orbitals
    shifted = np.roll(U, -1, axis=0)
    g_fwd = np.sum(U.conj() * shifted)  # sum_n G_{n,n+1}
    val = 1j * (g_fwd - g_fwd.conjugate()) / state.L
    return float(val.real)


@dataclass(frozen=True)
class ObservableSet:
    """Snapshot of every recorded observable at one time."""

    time: float
    S_ent: float
    S_cl: float
    delta_n: float
    current_J: float
    density: np.ndarray = field(repr=False)

    SCALARS = ("S_ent", "S_cl", "delta_n", "current_J")


def measure(state: SlaterState, time: float, subsystem=None) -> ObservableSet:
    return ObservableSet(
        time=time,
        S_ent=entanglement_entropy(state, subsystem),
        S_cl=classical_entropy(state),
        delta_n=density_imbalance(state),
        current_J=particle_current(state),
        density=density(state),
    )
