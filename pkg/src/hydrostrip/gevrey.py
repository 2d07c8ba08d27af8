"""
Weighted norms measuring analyticity-type regularity in x.

The norm of f is  ( sum_j M_j^2 ||dx^j f||^2 )^(1/2)  with weights
M_j = (j+1)^r tau^(j+1) / (j!)^gamma  and a radius tau that decays
exponentially in time.  All weight arithmetic happens in log space: the
per-(j, k) terms M_j^2 k^(2j) span hundreds of orders of magnitude and
would overflow if formed directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GevreyParams",
    "WeightTable",
    "TruncationWarning",
    "RadiusFloorWarning",
    "weight_Mj",
    "tau_schedule",
    "gevrey_norm",
    "j_field",
]


class TruncationWarning(UserWarning):
    """The truncated j-sum left a tail above the reporting threshold."""


class RadiusFloorWarning(UserWarning):
    """The radius schedule dropped below its configured floor."""


@dataclass(frozen=True)
class GevreyParams:
    """
    Norm and radius-schedule parameters.

    gamma: regularity exponent (>= 1; 1 is analytic-type weighting)
    r: polynomial weight exponent, may be any real
    tau0: initial radius (> tau1)
    tau1: radius floor (> 0)
    beta: radius decay rate (>= 1); values > 4 unlock the wall-lift solvers
    Jmax: truncation index of the j-sum
    """

    gamma: float = 9.0 / 8.0
    r: float = 4.0
    tau0: float = 1.0
    tau1: float = 0.1
    beta: float = 8.0
    Jmax: int = 32

    def __post_init__(self) -> None:
        if not (self.tau0 > self.tau1 > 0.0):
            raise ValueError(f"need tau0 > tau1 > 0, got {self.tau0}, {self.tau1}")
        if self.gamma < 1.0:
            raise ValueError("gamma must be >= 1")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if self.Jmax < 8:
            raise ValueError("Jmax must be >= 8")


def weight_Mj(j: int, params: GevreyParams, tau: float, r: float | None = None) -> float:
    """
    log M_j = r log(j+1) + (j+1) log tau - gamma log(j!), via log-gamma.

    Returns the logarithm; exponentiating directly would overflow for the
    index/radius ranges the diagnostics use.
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    rr = params.r if r is None else r
    return rr * math.log(j + 1) + (j + 1) * math.log(tau) - params.gamma * math.lgamma(j + 1)


@dataclass(frozen=True)
class WeightTable:
    """log M_j for j = 0..Jmax at a fixed radius."""

    logM: np.ndarray
    tau: float
    r: float
    gamma: float

    @classmethod
    def build(cls, params: GevreyParams, tau: float, r: float | None = None) -> "WeightTable":
        rr = params.r if r is None else r
        j = np.arange(params.Jmax + 1)
        from scipy.special import gammaln

        logM = rr * np.log(j + 1.0) + (j + 1.0) * math.log(tau) - params.gamma * gammaln(j + 1.0)
        return cls(logM=logM, tau=tau, r=rr, gamma=params.gamma)


def tau_schedule(t: float, params: GevreyParams) -> float:
    """
    Radius at time t: tau0 * exp(-beta t).

    Warns (without clamping) once the value drops below the floor tau1.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    tau = params.tau0 * math.exp(-params.beta * t)
    if tau < params.tau1:
        warnings.warn(
            f"radius {tau:.3e} fell below the floor {params.tau1:.3e} at t = {t:.3e}",
            RadiusFloorWarning,
            stacklevel=2,
        )
    return tau


def _mode_energies(f, weighted: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per-wavenumber squared content q_k (y-quadrature applied for 2D fields)."""
    from .grid import ScalarX

    if isinstance(f, ScalarX):
        q = np.abs(f.coeffs) ** 2
    else:
        q = np.abs(f.coeffs) ** 2 @ f.grid.wy
    return f.grid.kx, q


def gevrey_norm(
    f,
    params: GevreyParams,
    tau: float,
    r: float | None = None,
    return_tail: bool = False,
    tail_tol: float = 1e-6,
):
    """
    Weighted norm sqrt( sum_{j<=Jmax} M_j^2 sum_k k^(2j) |f_k|^2 * quad_y ).

    Works on SpectralField (L2 in x and y) and ScalarX (L2 in x only).
    Accumulates per-(j, k) terms in log space with a max-subtraction before
    exponentiating.  The tail ratio (last j-shell over the total) is reported
    via a TruncationWarning when it exceeds tail_tol; pass return_tail=True
    to receive (norm, tail_ratio).
    """
    kx, q = _mode_energies(f)
    table = WeightTable.build(params, tau, r)
    js = np.arange(params.Jmax + 1)

    nz = (q > 0.0) & (kx != 0)
    log_terms = []
    shell_of_term = []
    if np.any(nz):
        logk = np.log(np.abs(kx[nz]))
        logq = np.log(q[nz])
        # exponent matrix: (Jmax+1, nk)
        expo = 2.0 * table.logM[:, None] + 2.0 * js[:, None] * logk[None, :] + logq[None, :]
        log_terms.append(expo.ravel())
        shell_of_term.append(np.repeat(js, expo.shape[1]))
    if q[kx == 0].sum() > 0.0:
        # k = 0 contributes only at j = 0 (higher x-derivatives vanish)
        log_terms.append(np.array([2.0 * table.logM[0] + math.log(q[kx == 0].sum())]))
        shell_of_term.append(np.array([0]))

    if not log_terms:
        return (0.0, 0.0) if return_tail else 0.0

    expo = np.concatenate(log_terms)
    shells = np.concatenate(shell_of_term)
    m = expo.max()
    scaled = np.exp(expo - m)
    total = scaled.sum()
    tail = scaled[shells == params.Jmax].sum()
    tail_ratio = float(tail / total)
    if tail_ratio > tail_tol:
        warnings.warn(
            f"j-sum tail ratio {tail_ratio:.2e} exceeds {tail_tol:.1e}; increase Jmax",
            TruncationWarning,
            stacklevel=2,
        )
    norm = math.exp(0.5 * (m + math.log(total)))
    return (norm, tail_ratio) if return_tail else norm


def j_field(f, j: int, params: GevreyParams, tau: float, r: float | None = None):
    """
    The weighted j-th x-derivative M_j dx^j f as a field of the same kind.

    The scale M_j |k|^j is assembled in log space per wavenumber; the phase
    i^j sign(k)^j is applied separately.
    """
    from .grid import ScalarX, SpectralField

    logM = weight_Mj(j, params, tau, r)
    kx = f.grid.kx
    scale = np.zeros(f.grid.Nx, dtype=complex)
    nz = kx != 0
    mag = np.exp(logM + j * np.log(np.abs(kx[nz])))
    scale[nz] = mag * (1j * np.sign(kx[nz])) ** j
    if j == 0:
        scale[~nz] = math.exp(logM)
    if isinstance(f, ScalarX):
        return ScalarX(f.coeffs * scale, f.grid)
    return SpectralField(f.coeffs * scale[:, None], f.grid)
