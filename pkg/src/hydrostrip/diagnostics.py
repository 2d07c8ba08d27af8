"""
Analysis-side quantities evaluated along trajectories: the convexity-weighted
energy of the interior vorticity, its nine-term rate identity, the vorticity
time-derivative field, running assumption checks, and the convexity monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .boundary_layer import BoundaryLayerLift, Decomposition, decompose_j
from .gevrey import GevreyParams, gevrey_norm, j_field, weight_Mj
from .grid import (
    ScalarX,
    SpectralField,
    cumint_from_0,
    d1,
    d2,
    ddx,
    from_spectral,
    int_0_to_1,
    product,
    to_spectral,
    trace,
)
from .physics import FlowState, vorticity_bc

__all__ = [
    "AssumptionBounds",
    "EnergyBudget",
    "ConvexityFloorError",
    "hydrostatic_energy",
    "energy_budget",
    "omega_dot",
    "assumption_monitor",
    "convexity_monitor",
]


class ConvexityFloorError(RuntimeError):
    """The weight 1/dy(omega) is unusable: the floor is violated."""


@dataclass(frozen=True)
class AssumptionBounds:
    """Running-bound constants: norm ceiling M and convexity floor delta0."""

    M: float = 1.0
    delta0: float = 0.1

    def __post_init__(self) -> None:
        if self.M < 1.0:
            raise ValueError("M must be >= 1")
        if not (0.0 < self.delta0 <= 0.25):
            raise ValueError("delta0 must lie in (0, 1/4]")


def _mean_x_int_y(values: np.ndarray, grid) -> float:
    """mean over x, trapezoid over y, of physical samples (Nx, Ny)."""
    return float(np.mean(values @ grid.wy))


def _weight(state: FlowState, floor: float) -> np.ndarray:
    dyo = from_spectral(d1(state.omega))
    if dyo.min() < floor:
        raise ConvexityFloorError(
            f"min dy(omega) = {dyo.min():.4g} < floor {floor:.4g}: 1/dy(omega) unusable"
        )
    return dyo


def hydrostatic_energy(decomp: Decomposition, state: FlowState, j: int,
                       params: GevreyParams, floor: float = 1e-10) -> float:
    """
    Convexity-weighted energy (1/2) mean_x int_y (w_j)^2 / dy(omega), where
    w_j is the weighted j-th x-derivative of the interior vorticity.
    """
    grid = state.u.grid
    dyo = _weight(state, floor)
    wj = from_spectral(j_field(decomp.omega_in, j, params, state.tau))
    return 0.5 * _mean_x_int_y(wj**2 / dyo, grid)


@dataclass
class EnergyBudget:
    """
    Evaluated rate identity for the weighted interior vorticity at index j.

    terms[0..8] hold, in order: the wall flux (with the Neumann datum
    substituted; the trace is taken zero-mean in x for j = 0), the two-wall
    lift remainder of the vertical-velocity cancellation, the weight-
    commutation term with the second y-derivative, the weight advection
    term, the advected-lift terms (x and y), the lift vertical-velocity
    term, and the two derivative-splitting (Leibniz) sums.  The identity
    reads  lhs_rate + damping + dissipation = terms[0] + terms[1] + terms[2]
    - terms[3] - ... - terms[8]; residual is its defect.
    """

    j: int
    t: float
    lhs_rate: float
    damping: float
    dissipation: float
    terms: np.ndarray
    residual: float
    max_term: float

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.max_term if self.max_term > 0 else 0.0


def _energy_frozen(omega_in_j: SpectralField, dyo: np.ndarray) -> float:
    w = from_spectral(omega_in_j)
    return _mean_x_int_y(w**2 / dyo, omega_in_j.grid)


def _log_binom(j: int, k: int) -> float:
    return gammaln(j + 1) - gammaln(k + 1) - gammaln(j - k + 1)


def energy_budget(
    states: tuple[FlowState, FlowState, FlowState],
    lift: BoundaryLayerLift | None,
    lift_indices: tuple[int, int, int] | None,
    j: int,
    params: GevreyParams,
    floor: float = 1e-10,
) -> EnergyBudget:
    """
    Evaluate the rate identity at the middle of three consecutive snapshots.

    The rate differentiates the weighted energy with the convexity weight
    frozen at the center snapshot (the weight's own drift is not part of the
    balance); the radius weight inside w_j follows each snapshot's time.
    With lift=None all lift-bearing terms vanish identically.
    """
    prev, mid, nxt = states
    grid = mid.u.grid
    dt_m = mid.t - prev.t
    dt_p = nxt.t - mid.t
    if abs(dt_p - dt_m) > 1e-12 * max(dt_p, dt_m):
        raise ValueError("snapshots must be equally spaced in time")

    dyo = _weight(mid, floor)
    its = lift_indices if lift_indices is not None else (0, 0, 0)

    def in_j(state: FlowState, it: int) -> Decomposition:
        om_j = j_field(state.omega, j, params, state.tau)
        u_j = j_field(state.u, j, params, state.tau)
        v_j = j_field(state.v, j, params, state.tau)
        return decompose_j(om_j, u_j, v_j, lift, j, it)

    d_prev = in_j(prev, its[0])
    d_mid = in_j(mid, its[1])
    d_next = in_j(nxt, its[2])

    lhs_rate = 0.5 * (
        _energy_frozen(d_next.omega_in, dyo) - _energy_frozen(d_prev.omega_in, dyo)
    ) / (2.0 * dt_m)

    w_in = from_spectral(d_mid.omega_in)
    damping = params.beta * (j + 1) * _mean_x_int_y(w_in**2 / dyo, grid)
    dy_w_in = from_spectral(d1(d_mid.omega_in))
    dissipation = _mean_x_int_y(dy_w_in**2 / dyo, grid)

    u = from_spectral(mid.u)
    v = from_spectral(mid.v)
    d2o = from_spectral(d2(mid.omega))

    terms = np.zeros(9)

    # wall flux, with the Neumann datum substituted for dy(w_in) at the walls
    datum = _wall_datum_j(d_mid, lift, j, its[1], mid, params)
    w_top = from_spectral(d_mid.omega_in)[:, -1]
    w_bot = from_spectral(d_mid.omega_in)[:, 0]
    terms[0] = float(
        np.mean(datum * (w_top / dyo[:, -1] - w_bot / dyo[:, 0]))
    )

    # two-wall lift remainder: mean_x (int_0^1 dx u_bl) * u_bl(., 1)
    dxu_bl = int_0_to_1(ddx(d_mid.u_bl)).physical()
    u_bl_top = from_spectral(d_mid.u_bl)[:, -1]
    terms[1] = float(np.mean(dxu_bl * u_bl_top))

    # weight commutation with the second derivative of omega
    terms[2] = _mean_x_int_y(dy_w_in * w_in * d2o / dyo**2, grid)

    # advection of the weight
    adv_dyo = u * from_spectral(ddx(d1(mid.omega))) + v * d2o
    terms[3] = 0.5 * _mean_x_int_y(w_in**2 * adv_dyo / dyo**2, grid)

    # advected-lift terms and the lift vertical velocity
    w_bl_x = from_spectral(ddx(d_mid.omega_bl))
    w_bl_y = from_spectral(d1(d_mid.omega_bl))
    terms[4] = _mean_x_int_y(u * w_bl_x * w_in / dyo, grid)
    terms[5] = _mean_x_int_y(v * w_bl_y * w_in / dyo, grid)
    terms[6] = _mean_x_int_y(from_spectral(d_mid.v_bl) * w_in, grid)

    # derivative-splitting sums
    logM = {m: weight_Mj(m, params, mid.tau) for m in range(j + 2)}
    for k in range(1, j + 1):
        factor = math.exp(logM[j] - logM[k] - logM[j - k + 1] + _log_binom(j, k))
        u_k = from_spectral(j_field(mid.u, k, params, mid.tau))
        om_jk1 = from_spectral(j_field(mid.omega, j - k + 1, params, mid.tau))
        terms[7] += factor * _mean_x_int_y(u_k * om_jk1 * w_in / dyo, grid)
    for k in range(1, j):
        factor = math.exp(logM[j] - logM[k] - logM[j - k] + _log_binom(j, k))
        v_k = from_spectral(j_field(mid.v, k, params, mid.tau))
        dy_om_jk = from_spectral(d1(j_field(mid.omega, j - k, params, mid.tau)))
        terms[8] += factor * _mean_x_int_y(v_k * dy_om_jk * w_in / dyo, grid)

    rhs = terms[0] + terms[1] + terms[2] - terms[3:].sum()
    residual = lhs_rate + damping + dissipation - rhs
    max_term = max(abs(lhs_rate), abs(damping), abs(dissipation), float(np.max(np.abs(terms))))
    return EnergyBudget(
        j=j, t=mid.t, lhs_rate=lhs_rate, damping=damping, dissipation=dissipation,
        terms=terms, residual=float(residual), max_term=float(max_term),
    )


def _wall_datum_j(d_mid: Decomposition, lift: BoundaryLayerLift | None, j: int, it: int,
                  mid: FlowState, params: GevreyParams) -> np.ndarray:
    """
    Physical samples of the interior Neumann value: the difference of the
    interior-vorticity traces (zero-mean in x for j = 0) plus the far-wall
    lift contribution 2*w_flat_j(y=1) - dy w_flat_j(y=1).
    """
    grid = mid.u.grid
    top = trace(d_mid.omega_in, 1.0).coeffs
    bot = trace(d_mid.omega_in, 0.0).coeffs
    diff = top - bot
    if j == 0:
        diff[grid.kx == 0] = 0.0
    if lift is not None:
        from .grid import _d1

        hg = lift.hgrid
        n1 = hg.n_unit
        w = lift.omega_flat[j][it]
        w_y1 = w[:, n1 - 1]
        dyw_y1 = _d1(w, hg.dy)[:, n1 - 1]
        diff = diff + 2.0 * w_y1 - dyw_y1
    return np.real(np.fft.ifft(diff * grid.Nx))


def omega_dot(state: FlowState) -> SpectralField:
    """
    Vorticity time derivative from the evolution equation:
    dyy omega - u dx omega - v dy omega.
    """
    grid = state.u.grid
    diff = d2(state.omega)
    t1 = product(state.u, ddx(state.omega))
    t2 = product(state.v, d1(state.omega))
    return SpectralField(diff.coeffs - t1.coeffs - t2.coeffs, grid)


@dataclass
class AssumptionReport:
    """Pass/fail with margins for the three running bounds."""

    norm_sum: float
    norm_bound_ok: bool
    dy_omega_min: float
    dy_omega_max: float
    convexity_ok: bool
    mixed_norm: float
    mixed_bound_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.norm_bound_ok and self.convexity_ok and self.mixed_bound_ok


def assumption_monitor(state: FlowState, params: GevreyParams, bounds: AssumptionBounds,
                       decomp: Decomposition | None = None) -> AssumptionReport:
    """
    Evaluate the three running bounds at the state's time: the two weighted
    norms (exponents 3r/4 and r/2) against M, the pointwise convexity window
    [delta0, 1/delta0], and the mixed sup-in-x L2-in-y norm of dyy(omega).
    """
    tau = state.tau
    n1 = gevrey_norm(state.omega, params, tau, r=0.75 * params.r)
    n2 = gevrey_norm(d1(state.omega), params, tau, r=0.5 * params.r)
    dyo = from_spectral(d1(state.omega))
    d2o = from_spectral(d2(state.omega))
    mixed = float(np.sqrt((d2o**2 @ state.u.grid.wy)).max())
    return AssumptionReport(
        norm_sum=n1 + n2,
        norm_bound_ok=(n1 + n2) <= bounds.M,
        dy_omega_min=float(dyo.min()),
        dy_omega_max=float(dyo.max()),
        convexity_ok=(dyo.min() >= bounds.delta0) and (dyo.max() <= 1.0 / bounds.delta0),
        mixed_norm=mixed,
        mixed_bound_ok=mixed <= bounds.M,
    )


@dataclass
class ConvexitySample:
    t: float
    dy_omega_min: float
    dy_omega_max: float
    wall_datum_residual: float


def convexity_monitor(states) -> list[ConvexitySample]:
    """
    Extrema of dy(omega) over the grid (walls included) per snapshot, plus
    the defect between the computed wall derivative and the prescribed
    Neumann value.
    """
    out = []
    for state in states:
        dyo = from_spectral(d1(state.omega))
        a = vorticity_bc(state).physical()
        wall_res = float(
            max(np.max(np.abs(dyo[:, 0] - a)), np.max(np.abs(dyo[:, -1] - a)))
        )
        out.append(
            ConvexitySample(
                t=state.t,
                dy_omega_min=float(dyo.min()),
                dy_omega_max=float(dyo.max()),
                wall_datum_residual=wall_res,
            )
        )
    return out
