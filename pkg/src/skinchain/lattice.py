"""Single-particle matrices and spectra for the monitored long-range chain.

The coherent part is a power-law hopping matrix ``h0`` with elements
``t / d(i,j)**p``.  Monitoring each bond ``(i, i+1)`` adds an asymmetric
hopping correction ``+/- gamma/4`` plus, per bond, ``-i*gamma/4`` on both
site diagonals (the overall dissipation).  Dropping the diagonals only
shifts the spectrum, which is convenient when plotting it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

OBC = "obc"
PBC = "pbc"


class EigensolverError(RuntimeError):
    """Dense eigensolver failed to converge."""


@dataclass(frozen=True)
class LatticeParams:
    """Chain geometry and monitoring parameters.

    ``p <= 1`` is allowed but sits in the singular-dispersion regime; the
    constructor does not reject it.
    """

    L: int
    p: float
    t: float = 1.0
    gamma: float = 0.0
    theta: float = math.pi
    bc: str = OBC

    def __post_init__(self) -> None:
        if not isinstance(self.L, (int, np.integer)) or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L!r}")
        if not (self.p > 0) or not math.isfinite(self.p):
            raise ValueError(f"p must be a finite positive real, got {self.p!r}")
        if not math.isfinite(self.t):
            raise ValueError(f"t must be finite, got {self.t!r}")
        if not (self.gamma >= 0) or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if not (0.0 <= self.theta <= math.pi + 1e-12):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta!r}")
        if self.bc not in (OBC, PBC):
            raise ValueError(f"bc must be '{OBC}' or '{PBC}', got {self.bc!r}")

    @property
    def n_bonds(self) -> int:
        return self.L - 1 if self.bc == OBC else self.L

    def bonds(self) -> range:
        """Bond indices; bond ``i`` couples sites ``i`` and ``(i+1) % L``."""
        return range(self.n_bonds)

    def singular_dispersion(self) -> bool:
        return self.p <= 1.0


def _distances(L: int, bc: str) -> np.ndarray:
    idx = np.arange(L)
    d = np.abs(idx[:, None] - idx[None, :])
    if bc == PBC:
        # minimal image; the even-L antipodal pair enters once per unordered
        # pair because each matrix element is written exactly once
        d = np.minimum(d, L - d)
    return d


def build_h0(params: LatticeParams) -> np.ndarray:
    """Power-law hopping matrix, exactly real-symmetric, zero diagonal."""
    d = _distances(params.L, params.bc).astype(float)
    np.fill_diagonal(d, np.inf)
    h = params.t / d**params.p
    np.fill_diagonal(h, 0.0)
    return h.astype(np.complex128)


def build_h_eff(params: LatticeParams, drop_overall_dissipation: bool = False) -> np.ndarray:
    """Non-Hermitian single-particle matrix driving the trajectory drift.

    Per monitored bond ``(i, i+1)``: ``+gamma/4`` on the forward hop,
    ``-gamma/4`` on the backward hop, and unless
    ``drop_overall_dissipation`` is set, ``-i*gamma/4`` on each of the two
    site diagonals (bulk sites collect ``-i*gamma/2`` under OBC, edges
    ``-i*gamma/4``).
    """
    h = build_h0(params)
    g4 = params.gamma / 4.0
    L = params.L
    for i in params.bonds():
        j = (i + 1) % L
        h[i, j] += g4
        h[j, i] -= g4
        if not drop_overall_dissipation:
            h[i, i] += -1j * g4
            h[j, j] += -1j * g4
    return h


def is_hermitian(h: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(h - h.conj().T)) < tol)


def spectrum(h: np.ndarray) -> np.ndarray:
    """All eigenvalues of ``h``, sorted lexicographically by (real, imag)."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def one_sided_hausdorff(src: np.ndarray, dst: np.ndarray) -> float:
    """max over ``src`` points of the distance to the nearest ``dst`` point."""
    src = np.asarray(src, dtype=complex).ravel()
    dst = np.asarray(dst, dtype=complex).ravel()
    dist = np.abs(src[:, None] - dst[None, :])
    return float(dist.min(axis=1).max())


def mode_velocity(k: float, p: float, m_cutoff: int) -> float:
    """Group velocity of the free dispersion, truncated at ``m_cutoff`` hops.

    ``-2 * sum_{m=1..cutoff} m * sin(m k) / m**p``.  The partial sum is
    cutoff-dependent for ``p <= 2``.
    """
    if m_cutoff < 1:
        raise ValueError("m_cutoff must be >= 1")
    m = np.arange(1, m_cutoff + 1, dtype=float)
    return float(-2.0 * np.sum(np.sin(m * k) / m ** (p - 1.0)))


def default_velocity_cutoff(params: LatticeParams) -> int:
    """Longest hop range available on the chain: L-1 open, L//2 periodic."""
    return params.L - 1 if params.bc == OBC else params.L // 2


def quasimode_weight(k: float, direction: str) -> float:
    """Momentum weight of the measured two-site quasi-mode.

    Right-movers carry ``(1 - sin k)/2``, left-movers ``(1 + sin k)/2``;
    the two add to one and average to 1/2 over the Brillouin zone.
    """
    if direction == "right":
        return 0.5 * (1.0 - math.sin(k))
    if direction == "left":
        return 0.5 * (1.0 + math.sin(k))
    raise ValueError(f"direction must be 'right' or 'left', got {direction!r}")
