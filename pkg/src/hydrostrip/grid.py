"""
Discretization substrate for the periodic strip T x [0, 1].

Fields are stored as complex Fourier coefficients in x (one coefficient per
integer wavenumber, numpy fft ordering) on a uniform y-grid. The x-measure is
normalized so that the k=0 coefficient equals the x-average of the field and
Parseval reads  mean_x |f|^2 = sum_k |f_k|^2.  The y-direction uses 2nd-order
finite differences and trapezoid quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "SpectralField",
    "ScalarX",
    "to_spectral",
    "from_spectral",
    "ddx",
    "y_calculus",
    "product",
]


@dataclass(frozen=True)
class Grid:
    """
    Uniform collocation grid: Fourier in x on a torus of length 2*pi,
    grid points y_i = i/(Ny-1) including both walls.

    Parameters
    ----------
    Nx : int
        Number of x collocation points. Power of two, >= 8.
    Ny : int
        Number of y grid points (walls included). Odd and >= 9, so that
        y = 1/2 is a grid point.
    """

    Nx: int
    Ny: int
    Lx: float = 2.0 * np.pi

    def __post_init__(self) -> None:
        if self.Nx < 8 or (self.Nx & (self.Nx - 1)) != 0:
            raise ValueError(f"Nx must be a power of two >= 8, got {self.Nx}")
        if self.Ny < 9 or self.Ny % 2 == 0:
            raise ValueError(f"Ny must be odd and >= 9, got {self.Ny}")
        if abs(self.Lx - 2.0 * np.pi) > 1e-14:
            raise ValueError("torus length is fixed to 2*pi")

        kx = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)  # integer wavenumbers
        cut = self.Nx // 3
        mask = np.abs(kx) <= cut
        y = np.linspace(0.0, 1.0, self.Ny)
        dy = y[1] - y[0]
        # trapezoid weights for int_0^1
        wy = np.full(self.Ny, dy)
        wy[0] = wy[-1] = dy / 2.0

        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "dealias_cut", cut)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dy", dy)
        object.__setattr__(self, "wy", wy)
        object.__setattr__(self, "x", np.arange(self.Nx) * (self.Lx / self.Nx))

    def y_index(self, ystar: float) -> int:
        """Grid index of y = ystar; raises if ystar is not a grid point."""
        idx = int(round(ystar / self.dy))
        if idx < 0 or idx >= self.Ny or abs(ystar - idx * self.dy) > 1e-12:
            raise ValueError(f"y = {ystar} is not a grid point (dy = {self.dy})")
        return idx


@dataclass
class SpectralField:
    """2D field as x-Fourier coefficients on the y-grid, shape (Nx, Ny)."""

    coeffs: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        expected = (self.grid.Nx, self.grid.Ny)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient shape {self.coeffs.shape} != {expected}")

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy(), self.grid)

    def physical(self) -> np.ndarray:
        return from_spectral(self)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(np.zeros((grid.Nx, grid.Ny), dtype=complex), grid)


@dataclass
class ScalarX:
    """Function of x only, as Fourier coefficients of shape (Nx,)."""

    coeffs: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        if self.coeffs.shape != (self.grid.Nx,):
            raise ValueError(f"coefficient shape {self.coeffs.shape} != ({self.grid.Nx},)")

    def copy(self) -> "ScalarX":
        return ScalarX(self.coeffs.copy(), self.grid)

    def physical(self) -> np.ndarray:
        return np.real(np.fft.ifft(self.coeffs * self.grid.Nx))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarX":
        return cls(np.zeros(grid.Nx, dtype=complex), grid)


def to_spectral(grid: Grid, samples: np.ndarray) -> SpectralField:
    """
    Transform physical samples (Nx, Ny) to dealiased Fourier coefficients.

    The forward transform divides by Nx, so the k=0 coefficient is the
    x-average and the round trip reproduces dealiased content exactly.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.Nx, grid.Ny):
        raise ValueError(f"sample shape {samples.shape} != {(grid.Nx, grid.Ny)}")
    coeffs = np.fft.fft(samples, axis=0) / grid.Nx
    coeffs[~grid.dealias_mask, :] = 0.0
    return SpectralField(coeffs, grid)


def scalar_to_spectral(grid: Grid, samples: np.ndarray) -> ScalarX:
    """Transform physical samples (Nx,) of an x-only function."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.Nx,):
        raise ValueError(f"sample shape {samples.shape} != ({grid.Nx},)")
    coeffs = np.fft.fft(samples) / grid.Nx
    coeffs[~grid.dealias_mask] = 0.0
    return ScalarX(coeffs, grid)


def from_spectral(f: SpectralField) -> np.ndarray:
    """Inverse transform to physical samples (Nx, Ny)."""
    return np.real(np.fft.ifft(f.coeffs * f.grid.Nx, axis=0))


def ddx(f: SpectralField | ScalarX, order: int = 1):
    """x-derivative of the given order: coefficient at k gains (ik)^order."""
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    mult = (1j * f.grid.kx) ** order
    if isinstance(f, ScalarX):
        return ScalarX(f.coeffs * mult, f.grid)
    return SpectralField(f.coeffs * mult[:, None], f.grid)


def _d1(values: np.ndarray, dy: float) -> np.ndarray:
    """Centered 2nd-order y-derivative along the last axis; one-sided at walls."""
    out = np.empty_like(values)
    out[..., 1:-1] = (values[..., 2:] - values[..., :-2]) / (2.0 * dy)
    out[..., 0] = (-3.0 * values[..., 0] + 4.0 * values[..., 1] - values[..., 2]) / (2.0 * dy)
    out[..., -1] = (3.0 * values[..., -1] - 4.0 * values[..., -2] + values[..., -3]) / (2.0 * dy)
    return out


def _d2(values: np.ndarray, dy: float) -> np.ndarray:
    """Centered 2nd-order second y-derivative; 4-point one-sided at walls."""
    out = np.empty_like(values)
    out[..., 1:-1] = (values[..., 2:] - 2.0 * values[..., 1:-1] + values[..., :-2]) / dy**2
    out[..., 0] = (
        2.0 * values[..., 0] - 5.0 * values[..., 1] + 4.0 * values[..., 2] - values[..., 3]
    ) / dy**2
    out[..., -1] = (
        2.0 * values[..., -1] - 5.0 * values[..., -2] + 4.0 * values[..., -3] - values[..., -4]
    ) / dy**2
    return out


def _cumtrapz(values: np.ndarray, dy: float) -> np.ndarray:
    """Cumulative trapezoid from y=0 along the last axis."""
    out = np.zeros_like(values)
    avg = 0.5 * (values[..., 1:] + values[..., :-1]) * dy
    np.cumsum(avg, axis=-1, out=out[..., 1:])
    return out


def y_calculus(f: SpectralField, op: str, ystar: float | None = None):
    """
    y-direction calculus on a spectral field.

    op is one of "d1", "d2" (finite-difference derivatives),
    "cumint_from_0" (cumulative trapezoid, returns a SpectralField),
    "int_0_to_1" (trapezoid integral, returns ScalarX),
    "trace" (value at the grid point y = ystar, returns ScalarX).
    """
    if op == "d1":
        return SpectralField(_d1(f.coeffs, f.grid.dy), f.grid)
    if op == "d2":
        if f.grid.Ny < 4:
            raise ValueError("d2 needs at least 4 y-points")
        return SpectralField(_d2(f.coeffs, f.grid.dy), f.grid)
    if op == "cumint_from_0":
        return SpectralField(_cumtrapz(f.coeffs, f.grid.dy), f.grid)
    if op == "int_0_to_1":
        return ScalarX(f.coeffs @ f.grid.wy, f.grid)
    if op == "trace":
        if ystar is None:
            raise ValueError("trace requires ystar")
        return ScalarX(f.coeffs[:, f.grid.y_index(ystar)].copy(), f.grid)
    raise ValueError(f"unknown y_calculus op: {op!r}")


def d1(f: SpectralField) -> SpectralField:
    return y_calculus(f, "d1")


def d2(f: SpectralField) -> SpectralField:
    return y_calculus(f, "d2")


def cumint_from_0(f: SpectralField) -> SpectralField:
    return y_calculus(f, "cumint_from_0")


def int_0_to_1(f: SpectralField) -> ScalarX:
    return y_calculus(f, "int_0_to_1")


def trace(f: SpectralField, ystar: float) -> ScalarX:
    return y_calculus(f, "trace", ystar)


def product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Dealiased pointwise product (2/3 rule): multiply physically, re-truncate."""
    return to_spectral(a.grid, from_spectral(a) * from_spectral(b))


def mean_square(f: SpectralField | ScalarX) -> float:
    """mean_x integral_y |f|^2 (for ScalarX just mean_x |f|^2), via Parseval."""
    if isinstance(f, ScalarX):
        return float(np.sum(np.abs(f.coeffs) ** 2))
    return float(np.sum(np.abs(f.coeffs) ** 2 @ f.grid.wy))
