"""
Periodic grids, real FFTs, Fourier multipliers and 2/3-rule dealiasing.

Layout conventions
------------------
1D fields are arrays of shape ``(n_x,)``; 2D fields have shape ``(n_x, n_y)``
with ``x`` along axis 0 (``indexing="ij"``). Spectra are the unnormalized
``numpy.fft.rfftn`` of the values, so the last axis is the half axis:

    1D: shape (n_x // 2 + 1,),  xi = 2 pi k / length_x, k >= 0
    2D: shape (n_x, n_y // 2 + 1), xi along axis 0 (full), eta along axis 1 (half)

``irfftn`` inverts this exactly, so a forward/inverse round trip is the identity.
Every multiplier built here vanishes on Nyquist lines; those modes are not
Hermitian-representable for odd symbols and sit outside the dealiased band.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "Multiplier",
    "MULTIPLIER_KINDS",
    "make_multiplier",
    "apply_multiplier",
    "dealias",
    "forward",
    "inverse",
]

MULTIPLIER_KINDS = ("dx", "dx2", "dx3", "hilbert", "dhalf", "abs", "dx_laplacian", "kp_nonlocal")
_TWO_D_KINDS = ("dx_laplacian", "kp_nonlocal")


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic sampling of ``[-L/2, L/2)`` (1D) or a rectangle (2D).

    Parameters
    ----------
    n_x, length_x : int, float
        Point count (power of two, >= 8) and period in x.
    n_y, length_y : int, float, optional
        Same in y; both given means a 2D grid.
    """

    n_x: int
    length_x: float
    n_y: int | None = None
    length_y: float | None = None

    def __post_init__(self) -> None:
        dims = [(self.n_x, self.length_x, "x")]
        if (self.n_y is None) != (self.length_y is None):
            raise ValueError("n_y and length_y must be given together")
        if self.n_y is not None:
            dims.append((self.n_y, self.length_y, "y"))
        for n, length, axis in dims:
            if int(n) != n or n < 8 or not _is_pow2(int(n)):
                raise ValueError(f"n_{axis} must be a power of two >= 8, got {n}")
            if not np.isfinite(length) or length <= 0:
                raise ValueError(f"length_{axis} must be positive, got {length}")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "length_x", float(self.length_x))
        if self.n_y is not None:
            object.__setattr__(self, "n_y", int(self.n_y))
            object.__setattr__(self, "length_y", float(self.length_y))

    @property
    def ndim(self) -> int:
        return 1 if self.n_y is None else 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_x,) if self.ndim == 1 else (self.n_x, self.n_y)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.shape

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.length_x,) if self.ndim == 1 else (self.length_x, self.length_y)

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        if self.ndim == 1:
            return (self.n_x // 2 + 1,)
        return (self.n_x, self.n_y // 2 + 1)

    @property
    def dx(self) -> float:
        return self.length_x / self.n_x

    @property
    def dy(self) -> float:
        if self.ndim == 1:
            raise ValueError("1D grid has no y spacing")
        return self.length_y / self.n_y

    @property
    def cell_size(self) -> float:
        """Quadrature weight of one grid point (length in 1D, area in 2D)."""
        return self.dx if self.ndim == 1 else self.dx * self.dy

    @cached_property
    def x(self) -> np.ndarray:
        """x coordinates, broadcastable against field values."""
        x = -self.length_x / 2 + np.arange(self.n_x) * self.dx
        return x if self.ndim == 1 else x[:, None]

    @cached_property
    def y(self) -> np.ndarray:
        if self.ndim == 1:
            raise ValueError("1D grid has no y coordinate")
        return (-self.length_y / 2 + np.arange(self.n_y) * self.dy)[None, :]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Full coordinate arrays with the field shape."""
        if self.ndim == 1:
            return (self.x.copy(),)
        return tuple(np.broadcast_arrays(self.x, self.y))

    @cached_property
    def kx(self) -> np.ndarray:
        """x wavenumbers xi, broadcastable against spectra."""
        if self.ndim == 1:
            return 2 * np.pi * np.fft.rfftfreq(self.n_x, d=self.dx)
        return (2 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx))[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        if self.ndim == 1:
            raise ValueError("1D grid has no y wavenumbers")
        return (2 * np.pi * np.fft.rfftfreq(self.n_y, d=self.dy))[None, :]

    @cached_property
    def mode_x(self) -> np.ndarray:
        """Integer mode index k of each spectral entry along x."""
        if self.ndim == 1:
            return np.arange(self.n_x // 2 + 1)
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x).astype(int)[:, None]

    @cached_property
    def mode_y(self) -> np.ndarray:
        if self.ndim == 1:
            raise ValueError("1D grid has no y modes")
        return np.arange(self.n_y // 2 + 1)[None, :]

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on spectral entries lying on a Nyquist line."""
        mask = np.abs(self.mode_x) == self.n_x // 2
        if self.ndim == 2:
            mask = mask | (self.mode_y == self.n_y // 2)
        return np.broadcast_to(mask, self.spectral_shape)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep |k| <= n/3 in every direction."""
        keep = np.abs(self.mode_x) <= self.n_x / 3
        if self.ndim == 2:
            keep = keep & (self.mode_y <= self.n_y / 3)
        return np.broadcast_to(keep, self.spectral_shape)

    @cached_property
    def xi_zero_mask(self) -> np.ndarray:
        """The xi = 0 plane (x-mean of each y row)."""
        return np.broadcast_to(self.mode_x == 0, self.spectral_shape)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def sample(self, func) -> "Field":
        """Field from ``func(x)`` or ``func(x, y)`` evaluated on the mesh."""
        return Field(self, np.asarray(func(*self.mesh()), dtype=float))


def forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Unnormalized real FFT over all grid axes."""
    return np.fft.rfftn(values, axes=tuple(range(grid.ndim)))


def inverse(grid: Grid, spectrum: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(spectrum, s=grid.shape, axes=tuple(range(grid.ndim)))


@dataclass(frozen=True, eq=False)
class Field:
    """Real-valued state on a grid; the spectrum is computed once and cached."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> "Field":
        return cls(grid, inverse(grid, spectrum))

    @cached_property
    def spectrum(self) -> np.ndarray:
        s = forward(self.grid, self.values)
        s.setflags(write=False)
        return s

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, scalar * self.values)

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_size)


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Pointwise Fourier symbol on a grid's rfft lattice."""

    grid: Grid
    symbol: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        symbol = np.array(np.broadcast_to(self.symbol, self.grid.spectral_shape), dtype=complex)
        if not np.all(np.isfinite(symbol)):
            raise ValueError(f"multiplier {self.label!r} has non-finite entries")
        symbol.setflags(write=False)
        object.__setattr__(self, "symbol", symbol)

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        _check_same_grid(self.grid, other.grid)
        return Multiplier(self.grid, self.symbol * other.symbol, f"{self.label}*{other.label}")


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def make_multiplier(grid: Grid, kind: str) -> Multiplier:
    """
    Symbol of a constant-coefficient operator.

    ``dx`` -> i xi, ``dx2`` -> -xi^2, ``dx3`` -> (i xi)^3, ``hilbert`` -> -i sgn(xi)
    with sgn(0) = 0, ``dhalf`` -> |xi|^(1/2), ``abs`` -> |xi|, ``dx_laplacian`` ->
    -i xi (xi^2 + eta^2), ``kp_nonlocal`` -> i eta^2 / xi with the xi = 0 plane
    set to zero (the x-antiderivative is only defined on x-mean-zero data).
    """
    if kind not in MULTIPLIER_KINDS:
        raise ValueError(f"unknown multiplier kind {kind!r}; expected one of {MULTIPLIER_KINDS}")
    if kind in _TWO_D_KINDS and grid.ndim != 2:
        raise ValueError(f"multiplier {kind!r} requires a 2D grid")
    xi = grid.kx
    if kind == "dx":
        s = 1j * xi
    elif kind == "dx2":
        s = -(xi**2) + 0j
    elif kind == "dx3":
        s = (1j * xi) ** 3
    elif kind == "hilbert":
        s = -1j * np.sign(xi)
    elif kind == "dhalf":
        s = np.sqrt(np.abs(xi)) + 0j
    elif kind == "abs":
        s = np.abs(xi) + 0j
    elif kind == "dx_laplacian":
        s = -1j * xi * (xi**2 + grid.ky**2)
    else:
        s = _kp_inverse_dx(grid) * 1j * grid.ky**2
    s = np.array(np.broadcast_to(s, grid.spectral_shape), dtype=complex)
    s[grid.nyquist_mask] = 0.0
    return Multiplier(grid, s, kind)


def _kp_inverse_dx(grid: Grid) -> np.ndarray:
    """1/xi off the xi = 0 plane, 0 on it."""
    xi = np.broadcast_to(grid.kx, grid.spectral_shape)
    out = np.zeros(grid.spectral_shape)
    nz = xi != 0
    out[nz] = 1.0 / xi[nz]
    return out


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Inverse transform of ``symbol * transform(f)``; the result is real by construction."""
    _check_same_grid(f.grid, m.grid)
    return Field.from_spectrum(f.grid, m.symbol * f.spectrum)


def dealias(f: Field) -> Field:
    """Zero every coefficient with |k| > n/3 along any axis (idempotent)."""
    return Field.from_spectrum(f.grid, np.where(f.grid.dealias_mask, f.spectrum, 0.0))
