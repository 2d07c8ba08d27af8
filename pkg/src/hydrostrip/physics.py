"""
Algebraic relations of the hydrostatic channel model: velocity recovery from
incompressibility, the closed-form pressure gradient, the nonlocal vorticity
wall datum, the quadratic boundary datum h, and compatibility checking /
construction of initial data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

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
    trace,
)

__all__ = [
    "FlowState",
    "CompatibilityReport",
    "MeanConstraintError",
    "DataConstructionError",
    "recover_v",
    "pressure_gradient",
    "vorticity_bc",
    "h_datum",
    "check_compatibility",
    "build_convex_compatible_data",
]


class MeanConstraintError(ValueError):
    """The vertical mean of u has x-dependence beyond tolerance."""


class DataConstructionError(ValueError):
    """Requested initial data cannot be built with the given parameters."""


@dataclass
class FlowState:
    """Solver state: velocities, vorticity, pressure gradient, time, radius."""

    u: SpectralField
    v: SpectralField
    omega: SpectralField
    px: ScalarX
    t: float = 0.0
    tau: float = 1.0

    @classmethod
    def from_u(cls, u: SpectralField, t: float = 0.0, tau: float = 1.0) -> "FlowState":
        """Derive v, omega, px from u alone."""
        omega = d1(u)
        state = cls(u=u, v=recover_v(u), omega=omega, px=ScalarX.zeros(u.grid), t=t, tau=tau)
        state.px = pressure_gradient(state)
        return state

    def copy(self) -> "FlowState":
        return FlowState(
            u=self.u.copy(),
            v=self.v.copy(),
            omega=self.omega.copy(),
            px=self.px.copy(),
            t=self.t,
            tau=self.tau,
        )


def mean_constraint_residual(u: SpectralField) -> float:
    """max over k != 0 of |(int_0^1 u dy)_k|."""
    m = int_0_to_1(u).coeffs
    return float(np.max(np.abs(m[u.grid.kx != 0])))


def recover_v(u: SpectralField, tol: float = 1e-6) -> SpectralField:
    """
    Vertical velocity v = -int_0^y dx u, which vanishes at y=0 by
    construction and at y=1 whenever the vertical mean of u is x-independent.

    Raises MeanConstraintError when the constraint residual exceeds tol
    (v would fail to vanish at the top wall).
    """
    res = mean_constraint_residual(u)
    if res > tol:
        raise MeanConstraintError(
            f"mean-constraint residual {res:.3e} > {tol:.1e}: v(y=1) would not vanish"
        )
    return SpectralField(-cumint_from_0(ddx(u)).coeffs, u.grid)


def _tilde(s: ScalarX) -> ScalarX:
    """Remove the x-average (zero the k=0 coefficient)."""
    c = s.coeffs.copy()
    c[s.grid.kx == 0] = 0.0
    return ScalarX(c, s.grid)


def pressure_gradient(state: FlowState) -> ScalarX:
    """
    dx p = tilde(omega)|_{y=1} - tilde(omega)|_{y=0} - dx int_0^1 u^2 dy.

    The result has an exactly zero k=0 coefficient: both traces are
    zero-mean in x and the quadratic term is a pure x-derivative.
    """
    top = _tilde(trace(state.omega, 1.0))
    bot = _tilde(trace(state.omega, 0.0))
    usq = int_0_to_1(product(state.u, state.u))
    quad = ddx(usq)
    return ScalarX(top.coeffs - bot.coeffs - quad.coeffs, state.u.grid)


def vorticity_bc(state: FlowState) -> ScalarX:
    """Neumann wall datum for the vorticity; coincides with pressure_gradient."""
    return pressure_gradient(state)


def h_datum(u: SpectralField) -> ScalarX:
    """
    h = -int_0^1 u^2 dy + mean_x int_0^1 u^2 dy dx: zero x-mean by
    construction, with dx h equal to the quadratic term of the pressure.
    """
    g = int_0_to_1(product(u, u))
    c = -g.coeffs
    c[u.grid.kx == 0] = 0.0
    return ScalarX(c, u.grid)


@dataclass
class CompatibilityReport:
    """Residuals of the three data constraints plus curvature extrema."""

    mean_constraint_residual: float
    dirichlet_residual: float
    third_condition_residual: float
    convexity_min: float
    convexity_max: float
    tol: float = 1e-6

    def compatible(self, delta0: float = 0.0) -> bool:
        return (
            self.mean_constraint_residual < self.tol
            and self.dirichlet_residual < self.tol
            and self.third_condition_residual < self.tol
            and self.convexity_min >= delta0
        )


def _third_condition_rhs(u0: SpectralField) -> ScalarX:
    """
    Right side of the wall-curvature identity:
    -dx int_0^1 u0^2 dy + int_0^1 dyy u0 dy - mean_x int_0^1 dyy u0 dy,
    with all x-integrals under the normalized measure.
    """
    quad = ddx(int_0_to_1(product(u0, u0)))
    curv = int_0_to_1(d2(u0))
    tilde_curv = _tilde(curv)
    return ScalarX(tilde_curv.coeffs - quad.coeffs, u0.grid)


def check_compatibility(u0: SpectralField, delta0: float = 0.0, tol: float = 1e-6) -> CompatibilityReport:
    """
    Evaluate the three data constraints and the curvature extrema.

    The report is diagnostic: nothing is raised, the caller decides what a
    failing residual means for the experiment at hand.
    """
    grid = u0.grid
    res_mean = mean_constraint_residual(u0)

    phys = from_spectral(u0)
    res_dirichlet = float(max(np.max(np.abs(phys[:, 0])), np.max(np.abs(phys[:, -1]))))

    curv = d2(u0)
    rhs = _third_condition_rhs(u0).physical()
    wall0 = trace(curv, 0.0).physical()
    wall1 = trace(curv, 1.0).physical()
    res_third = float(max(np.max(np.abs(wall0 - rhs)), np.max(np.abs(wall1 - rhs))))

    curv_phys = from_spectral(curv)
    return CompatibilityReport(
        mean_constraint_residual=res_mean,
        dirichlet_residual=res_dirichlet,
        third_condition_residual=res_third,
        convexity_min=float(curv_phys.min()),
        convexity_max=float(curv_phys.max()),
        tol=tol,
    )


def _smootherstep(s: np.ndarray) -> np.ndarray:
    """C^2 ramp: 0 below 0, 1 above 1, 6s^5 - 15s^4 + 10s^3 between."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (6.0 * s**2 - 15.0 * s + 10.0)


def _base_profile(grid: Grid, delta0: float, wall_layer: float) -> np.ndarray:
    """
    x-independent velocity profile with zero wall values and curvature
    4*delta0 in the core.  With wall_layer > 0 the curvature ramps to zero at
    the walls (the value any exactly-compatible datum must take there, since
    the wall identity has zero x-average); with wall_layer = 0 the curvature
    is uniformly 4*delta0 and the wall identity is knowingly violated.
    """
    from .grid import _d2

    y = grid.y
    if wall_layer == 0.0:
        curv = np.full_like(y, 4.0 * delta0)
    else:
        ramp = _smootherstep(y / wall_layer) * _smootherstep((1.0 - y) / wall_layer)
        curv = 4.0 * delta0 * ramp
    # integrate curvature twice with the grid's cumulative trapezoid,
    # then fix b(0) = b(1) = 0 with a linear correction
    dy = grid.dy
    slope = np.concatenate([[0.0], np.cumsum(0.5 * (curv[1:] + curv[:-1]) * dy)])
    b = np.concatenate([[0.0], np.cumsum(0.5 * (slope[1:] + slope[:-1]) * dy)])
    b -= y * b[-1]
    if wall_layer == 0.0:
        return b
    # the x-mean row of the wall identity requires zero *discrete* wall
    # curvature; remove the one-sided-stencil truncation error with a
    # min-norm polynomial correction
    wall_curv = _d2(b, dy)[[0, -1]]
    basis = np.stack([y**p for p in range(8)], axis=1)
    d2b = _d2(basis.T, dy).T
    A = np.stack([basis[0, :], basis[-1, :], d2b[0, :], d2b[-1, :]], axis=0)
    rhs = np.array([0.0, 0.0, -wall_curv[0], -wall_curv[1]])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return b + basis @ sol


def _solve_mode_profile(
    grid: Grid, wall_curv0: complex, wall_curv1: complex, degree: int = 7
) -> np.ndarray:
    """
    Correction profile c(y) (complex samples) for one x-mode: c(0)=c(1)=0,
    zero vertical mean, and discrete wall curvatures s0, s1 solving the
    per-mode rows of the wall-curvature identity,
    s0 - int c'' = W0  and  s1 - int c'' = W1.

    All rows use the grid's own discrete operators, so the constructed data
    satisfies the discrete compatibility checks to round-off.
    """
    from .grid import _d2

    y = grid.y
    basis = np.stack([y**p for p in range(degree + 1)], axis=1)  # (Ny, nb)
    d2b = _d2(basis.T, grid.dy).T
    nb = basis.shape[1]
    # unknowns: nb polynomial coefficients plus the two wall curvatures
    A = np.zeros((7, nb + 2), dtype=float)
    rhs = np.zeros(7, dtype=complex)
    A[0, :nb] = basis[0, :]
    A[1, :nb] = basis[-1, :]
    A[2, :nb] = grid.wy @ basis
    A[3, :nb] = d2b[0, :]
    A[3, nb] = -1.0
    A[4, :nb] = d2b[-1, :]
    A[4, nb + 1] = -1.0
    A[5, :nb] = -(grid.wy @ d2b)
    A[5, nb] = 1.0
    rhs[5] = wall_curv0
    A[6, :nb] = -(grid.wy @ d2b)
    A[6, nb + 1] = 1.0
    rhs[6] = wall_curv1
    sol_re, *_ = np.linalg.lstsq(A, rhs.real, rcond=None)
    sol_im, *_ = np.linalg.lstsq(A, rhs.imag, rcond=None)
    coeffs = sol_re[:nb] + 1j * sol_im[:nb]
    return basis @ coeffs


def build_convex_compatible_data(
    grid: Grid,
    delta0: float,
    amplitude: float = 0.0,
    k0: int = 2,
    wall_layer: float = 0.15,
    max_iter: int = 12,
    tol: float = 1e-9,
) -> SpectralField:
    """
    Initial velocity u0 = base(y) + amplitude * correction(x, y).

    The base is convex with curvature 4*delta0 in the core.  The correction
    starts as a single x-mode at wavenumber k0 and is refined by a fixed
    point that re-solves the per-mode wall-curvature rows against the
    quadratic term they generate, so all k != 0 rows of the wall identity
    hold to round-off.  The k = 0 row forces zero wall curvature; it is
    satisfied when wall_layer > 0 and knowingly violated when wall_layer = 0
    (uniform curvature, for experiments that need a strict curvature floor).

    Raises DataConstructionError when the curvature window [4*delta0,
    1/(4*delta0)] is empty or the perturbation destroys interior convexity.
    """
    if delta0 <= 0.0 or delta0 > 0.25:
        raise DataConstructionError(
            f"delta0 = {delta0}: the curvature window [4*delta0, 1/(4*delta0)] is empty"
        )
    if amplitude < 0.0:
        raise DataConstructionError("amplitude must be nonnegative")
    if k0 <= 0 or k0 > grid.dealias_cut // 2:
        raise DataConstructionError(f"k0 = {k0} outside the usable wavenumber range")

    # with a strict curvature floor, raise the base so the perturbation
    # (normalized to unit curvature) cannot dip below 4*delta0
    floor_pad = amplitude if wall_layer == 0.0 else 0.0
    base = _base_profile(grid, delta0 + floor_pad / 4.0, wall_layer)
    samples = np.tile(base, (grid.Nx, 1))
    u0 = to_spectral(grid, samples)

    if amplitude > 0.0:
        # seed shape: zero walls, zero mean by antisymmetry about y = 1/2,
        # normalized so `amplitude` bounds the curvature perturbation
        y = grid.y
        shape = y * (1.0 - y) * (1.0 - 2.0 * y)
        shape = shape / 6.0  # max |shape''| = |12 y - 6| at walls = 6
        seed = amplitude * np.cos(k0 * grid.x)[:, None] * shape[None, :]
        u0 = to_spectral(grid, samples + seed)

        worst = np.inf
        for _ in range(max_iter):
            rhs = _third_condition_rhs(u0)
            curv = d2(u0)
            wall0 = trace(curv, 0.0).coeffs
            wall1 = trace(curv, 1.0).coeffs
            mis0 = rhs.coeffs - wall0
            mis1 = rhs.coeffs - wall1
            mis0[grid.kx == 0] = 0.0
            mis1[grid.kx == 0] = 0.0
            worst = max(np.max(np.abs(mis0)), np.max(np.abs(mis1)))
            if worst < tol:
                break
            upd = np.zeros((grid.Nx, grid.Ny), dtype=complex)
            fix = np.nonzero((np.abs(mis0) > tol / 4.0) | (np.abs(mis1) > tol / 4.0))[0]
            for ki in fix:
                upd[ki, :] = _solve_mode_profile(grid, mis0[ki], mis1[ki])
            u0 = SpectralField(u0.coeffs + upd, grid)
        else:
            warnings.warn(
                f"wall-identity fixed point stalled at residual {worst:.2e}", stacklevel=2
            )

    report = check_compatibility(u0)
    lo, hi = report.convexity_min, report.convexity_max
    if wall_layer == 0.0 and lo < 4.0 * delta0 - 1e-9:
        raise DataConstructionError(
            f"curvature floor {lo:.3g} dropped below 4*delta0 = {4.0 * delta0:.3g}"
        )
    cap = 1.0 / (4.0 * delta0)
    if hi > cap + 3.0 * amplitude + 1e-9:
        raise DataConstructionError(
            f"peak curvature {hi:.3g} exceeds the cap 1/(4*delta0) = {cap:.3g}"
        )
    if wall_layer > 0.0 and amplitude > 0.0:
        core = (grid.y > 2 * wall_layer) & (grid.y < 1.0 - 2 * wall_layer)
        curv_core = from_spectral(d2(u0))[:, core]
        if curv_core.min() < delta0:
            raise DataConstructionError(
                f"core curvature {curv_core.min():.3g} dropped below delta0 = {delta0}"
            )
    return u0
