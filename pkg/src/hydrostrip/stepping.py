"""
Time integration of the regularized channel system in primitive variables
(IMEX: explicit dealiased advection + closed-form pressure, implicit wall-
normal diffusion, exact integrating factor for the tangential regularization)
plus a vorticity-form stepper with the nonlocal Neumann wall datum.

The vertical-mean constraint is enforced exactly inside the implicit solve:
a y-constant Lagrange multiplier per wavenumber (the discrete stand-in for
the part of the pressure the closed formula misses at finite resolution) is
eliminated with a second banded solve against the constant load.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .gevrey import GevreyParams, gevrey_norm, tau_schedule
from .grid import (
    Grid,
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
)
from .physics import FlowState, h_datum, pressure_gradient, recover_v, vorticity_bc

__all__ = ["SolverConfig", "Trajectory", "BlowUpError", "step_primitive", "step_vorticity", "run"]


class BlowUpError(RuntimeError):
    """The state exceeded the blow-up thresholds."""


BLOWUP_MAX_OMEGA = 1e8


@dataclass
class SolverConfig:
    """Integration parameters; eta (wall-normal viscosity) is fixed to 1."""

    epsilon: float = 1e-3
    dt: float = 1e-4
    T_end: float = 0.1
    scheme: str = "crank_nicolson"
    form: str = "primitive"
    snapshot_every: int = 10
    cfl_limit: float = 0.5
    max_dt_halvings: int = 12

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if self.scheme not in ("implicit_euler", "crank_nicolson"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.form not in ("primitive", "vorticity"):
            raise ValueError(f"unknown form {self.form!r}")


class _BandedDiffusion:
    """
    Cached banded solver for (I + dt * theta * (-D2)) with either Dirichlet
    rows (primitive form) or ghost-point Neumann rows (vorticity form), and
    the response to the y-constant unit load used by the mean constraint.
    """

    def __init__(self, grid: Grid, dt: float, theta: float, bc: str):
        n = grid.Ny
        h = grid.dy
        self.grid = grid
        self.dt = dt
        self.theta = theta
        self.bc = bc
        lower = np.full(n, -1.0 / h**2)
        diag = np.full(n, 2.0 / h**2)
        upper = np.full(n, -1.0 / h**2)
        if bc == "neumann":
            diag[0] = 2.0 / h**2
            upper[1] = -2.0 / h**2
            diag[-1] = 2.0 / h**2
            lower[-2] = -2.0 / h**2
        self.lower, self.diag, self.upper = lower, diag, upper

        ab = np.zeros((3, n))
        ab[0, 1:] = dt * theta * upper[1:]
        ab[1, :] = 1.0 + dt * theta * diag
        ab[2, :-1] = dt * theta * lower[:-1]
        if bc == "dirichlet":
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
        self.ab = ab

        if bc == "dirichlet":
            load = np.full(n, dt)
            load[0] = load[-1] = 0.0
            self.constraint_response = solve_banded((1, 1), ab, load)
            self.constraint_mean = float(grid.wy @ self.constraint_response)

    def explicit_apply(self, w: np.ndarray) -> np.ndarray:
        """(I - dt (1-theta) (-D2)) w along the y-axis (last axis is y)."""
        if self.theta >= 1.0:
            return w.copy()
        c = self.dt * (1.0 - self.theta)
        out = (1.0 - c * self.diag) * w
        out[..., :-1] = out[..., :-1] - c * self.upper[1:] * w[..., 1:]
        out[..., 1:] = out[..., 1:] - c * self.lower[:-1] * w[..., :-1]
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Banded solve; rhs shape (Nx, Ny), solved along y."""
        return solve_banded((1, 1), self.ab, rhs.T).T


def _advection(state: FlowState) -> SpectralField:
    """-(u dx u + v dy u), dealiased."""
    grid = state.u.grid
    t1 = product(state.u, ddx(state.u))
    t2 = product(state.v, d1(state.u))
    return SpectralField(-(t1.coeffs + t2.coeffs), grid)


def _advection_omega(state: FlowState) -> SpectralField:
    """-(u dx omega + v dy omega), dealiased."""
    grid = state.u.grid
    t1 = product(state.u, ddx(state.omega))
    t2 = product(state.v, d1(state.omega))
    return SpectralField(-(t1.coeffs + t2.coeffs), grid)


def _primitive_substep(state: FlowState, dt: float, theta: float, epsilon: float,
                       grid: Grid, solver: _BandedDiffusion, forcing_state: FlowState) -> np.ndarray:
    """
    One IMEX update of u over dt: advection and pressure from forcing_state,
    theta-weighted diffusion, exact tangential-viscosity factor, and the
    exact mean-constraint elimination.  Returns new u coefficients.
    """
    adv = _advection(forcing_state)
    px = pressure_gradient(forcing_state)
    rhs_force = adv.coeffs - px.coeffs[:, None]

    efac = np.exp(-epsilon * grid.kx**2 * dt)
    efac_mid = np.exp(-epsilon * grid.kx**2 * dt * (1.0 - theta))
    rhs = efac[:, None] * solver.explicit_apply(state.u.coeffs) + (
        efac_mid[:, None] * dt * rhs_force
    )
    rhs[:, 0] = 0.0
    rhs[:, -1] = 0.0
    unew = solver.solve(rhs)

    # eliminate the k != 0 vertical means with the cached constant-load response
    means = unew @ grid.wy
    lam = means / solver.constraint_mean
    lam[grid.kx == 0] = 0.0
    unew -= lam[:, None] * solver.constraint_response[None, :]
    return unew


def step_primitive(state: FlowState, config: SolverConfig, params: GevreyParams | None = None,
                   _solvers: dict | None = None) -> FlowState:
    """
    Advance the primitive-variable state by one step.

    implicit_euler: one IMEX stage, first order.  crank_nicolson: midpoint
    predictor for the explicit terms plus theta = 1/2 diffusion, second
    order on smooth data.
    """
    grid = state.u.grid
    dt = config.dt
    cache = _solvers if _solvers is not None else {}

    if config.scheme == "implicit_euler":
        key = ("d", dt, 1.0)
        if key not in cache:
            cache[key] = _BandedDiffusion(grid, dt, 1.0, "dirichlet")
        unew = _primitive_substep(state, dt, 1.0, config.epsilon, grid, cache[key], state)
    else:
        key_half = ("d", dt / 2.0, 1.0)
        if key_half not in cache:
            cache[key_half] = _BandedDiffusion(grid, dt / 2.0, 1.0, "dirichlet")
        key_cn = ("d", dt, 0.5)
        if key_cn not in cache:
            cache[key_cn] = _BandedDiffusion(grid, dt, 0.5, "dirichlet")
        u_half = _primitive_substep(state, dt / 2.0, 1.0, config.epsilon, grid, cache[key_half], state)
        half = _rebuild(state, u_half, state.t + dt / 2.0, state.tau)
        unew = _primitive_substep(state, dt, 0.5, config.epsilon, grid, cache[key_cn], half)

    new_t = state.t + dt
    tau = tau_schedule(new_t, params) if params is not None else state.tau
    out = _rebuild(state, unew, new_t, tau)
    _check_finite(out)
    return out


def _rebuild(state: FlowState, u_coeffs: np.ndarray, t: float, tau: float) -> FlowState:
    grid = state.u.grid
    u = SpectralField(u_coeffs, grid)
    v = recover_v(u)
    omega = d1(u)
    new = FlowState(u=u, v=v, omega=omega, px=ScalarX.zeros(grid), t=t, tau=tau)
    new.px = pressure_gradient(new)
    return new


def _check_finite(state: FlowState) -> None:
    m = np.max(np.abs(state.omega.coeffs))
    if not np.isfinite(m) or m > BLOWUP_MAX_OMEGA:
        raise BlowUpError(f"max vorticity amplitude {m:.3e} at t = {state.t:.6f}")


def step_vorticity(state: FlowState, config: SolverConfig, params: GevreyParams | None = None,
                   _solvers: dict | None = None) -> FlowState:
    """
    Advance the vorticity-form state by one step: IMEX on omega with the
    nonlocal Neumann datum applied at both walls through ghost points, then
    u reconstructed from omega (zero at y=0 by construction; the top wall
    and the vertical-mean constraint fixed by constant shifts per mode).
    """
    grid = state.u.grid
    dt = config.dt
    h = grid.dy
    theta = 1.0 if config.scheme == "implicit_euler" else 0.5
    cache = _solvers if _solvers is not None else {}
    key = ("n", dt, theta)
    if key not in cache:
        cache[key] = _BandedDiffusion(grid, dt, theta, "neumann")
    solver = cache[key]

    adv = _advection_omega(state)
    g = vorticity_bc(state).coeffs  # Neumann value at both walls

    rhs = solver.explicit_apply(state.omega.coeffs) + dt * adv.coeffs
    # ghost-point datum: enters the bottom row with -2/h, the top with +2/h
    rhs[:, 0] -= dt * (2.0 / h) * g
    rhs[:, -1] += dt * (2.0 / h) * g
    wnew = solver.solve(rhs)

    # zero the vertical integral of the k != 0 modes so u(.,1) = 0 after
    # integration; the k = 0 integral is left untouched (it is conserved
    # exactly by the ghost-point scheme)
    means = wnew @ grid.wy
    means[grid.kx == 0] = 0.0
    wnew -= means[:, None]

    omega = SpectralField(wnew, grid)
    u = cumint_from_0(omega)
    ucoef = u.coeffs.copy()
    k0 = grid.kx == 0
    # remove the conserved-mode wall mismatch in the reconstruction only
    ucoef[k0] -= grid.y[None, :] * ucoef[k0][:, -1:]
    # vertical-mean constraint: subtract a wall-vanishing bump of unit mass
    bump = 6.0 * grid.y * (1.0 - grid.y)
    umeans = ucoef @ grid.wy
    umeans[k0] = 0.0
    ucoef -= umeans[:, None] * bump[None, :]
    u = SpectralField(ucoef, grid)

    new_t = state.t + dt
    tau = tau_schedule(new_t, params) if params is not None else state.tau
    v = recover_v(u)
    new = FlowState(u=u, v=v, omega=omega, px=ScalarX.zeros(grid), t=new_t, tau=tau)
    new.px = pressure_gradient(new)
    _check_finite(new)
    return new


@dataclass
class Trajectory:
    """Snapshots at cadence plus per-step h history and monitor series."""

    times: list[float] = field(default_factory=list)
    states: list[FlowState] = field(default_factory=list)
    h_times: list[float] = field(default_factory=list)
    h_series: list[np.ndarray] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)
    blew_up: bool = False
    dt_final: float = 0.0

    def record_state(self, state: FlowState) -> None:
        if self.times and state.t <= self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        self.times.append(state.t)
        self.states.append(state.copy())

    def h_array(self) -> np.ndarray:
        return np.asarray(self.h_series)


def _cfl_ok(state: FlowState, dt: float, config: SolverConfig) -> bool:
    grid = state.u.grid
    maxu = float(np.max(np.abs(from_spectral(state.u))))
    maxv = float(np.max(np.abs(from_spectral(state.v))))
    adv_x = dt * maxu * grid.Nx / (2.0 * np.pi)
    adv_y = dt * maxv / grid.dy
    return max(adv_x, adv_y) <= config.cfl_limit


def run(
    u0: SpectralField,
    config: SolverConfig,
    params: GevreyParams,
    monitors: tuple[str, ...] = ("norms", "convexity", "omega_dot"),
) -> Trajectory:
    """
    Integrate from u0 to T_end (or blow-up), recording snapshots at cadence,
    the h datum at every step, and the requested monitor series.

    Compatibility of the data is not enforced: instability experiments use
    incompatible or non-convex data on purpose.  A blow-up sets the flag and
    returns the partial trajectory.
    """
    from .diagnostics import omega_dot

    grid = u0.grid
    state = FlowState.from_u(u0, t=0.0, tau=params.tau0)
    stepper = step_primitive if config.form == "primitive" else step_vorticity
    cache: dict = {}

    traj = Trajectory()
    traj.series = {
        "t": [], "tau": [], "max_u": [], "max_omega": [],
        "norm_omega": [], "norm_dy_omega": [],
        "convexity_min": [], "convexity_max": [], "omega_dot_l2": [],
    }

    def record(state: FlowState) -> None:
        traj.record_state(state)
        s = traj.series
        s["t"].append(state.t)
        s["tau"].append(state.tau)
        s["max_u"].append(float(np.max(np.abs(from_spectral(state.u)))))
        s["max_omega"].append(float(np.max(np.abs(from_spectral(state.omega)))))
        if "norms" in monitors:
            s["norm_omega"].append(gevrey_norm(state.omega, params, state.tau, r=0.75 * params.r))
            s["norm_dy_omega"].append(
                gevrey_norm(d1(state.omega), params, state.tau, r=0.5 * params.r)
            )
        else:
            s["norm_omega"].append(float("nan"))
            s["norm_dy_omega"].append(float("nan"))
        if "convexity" in monitors:
            dyo = from_spectral(d1(state.omega))
            s["convexity_min"].append(float(dyo.min()))
            s["convexity_max"].append(float(dyo.max()))
        else:
            s["convexity_min"].append(float("nan"))
            s["convexity_max"].append(float("nan"))
        if "omega_dot" in monitors:
            from .grid import mean_square

            s["omega_dot_l2"].append(math.sqrt(mean_square(omega_dot(state))))
        else:
            s["omega_dot_l2"].append(float("nan"))

    traj.h_times.append(state.t)
    traj.h_series.append(h_datum(state.u).coeffs.copy())
    record(state)

    dt = config.dt
    halvings = 0
    nstep = 0
    while state.t < config.T_end - 1e-12:
        dt_step = min(dt, config.T_end - state.t)
        while not _cfl_ok(state, dt_step, config):
            dt_step /= 2.0
            dt = dt_step
            halvings += 1
            if halvings > config.max_dt_halvings:
                traj.blew_up = True
                traj.dt_final = dt
                return traj
        cfg = replace(config, dt=dt_step)
        try:
            state = stepper(state, cfg, params, _solvers=cache)
        except BlowUpError:
            traj.blew_up = True
            break
        nstep += 1
        traj.h_times.append(state.t)
        traj.h_series.append(h_datum(state.u).coeffs.copy())
        if nstep % config.snapshot_every == 0 or state.t >= config.T_end - 1e-12:
            record(state)
    traj.dt_final = dt
    return traj
