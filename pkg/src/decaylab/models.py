"""
Dispersive models in the common evolution form  d/dt u_hat = L u_hat + N(u).

=========  ==================================  =====================  ===========
family     equation                            L (symbol)             flux F(u)
=========  ==================================  =====================  ===========
gkdv       u_t + (u_xx + u^p)_x = 0            i xi^3                 u^p
gardner    u_t + (u_xx + u^2 + mu u^3)_x = 0   i xi^3                 u^2 + mu u^3
bo         u_t + (H u_x + u^2)_x = 0           -i xi |xi|             u^2
zk2d       u_t + (u_xx + u_yy)_x + u u_x = 0   i xi (xi^2 + eta^2)    u^2 / 2
kp         u_t + u_xxx + u u_x                 i (xi^3 - k eta^2/xi)  u^2 / 2
           + k dx^-1 u_yy = 0
=========  ==================================  =====================  ===========

N(u) is the transform of -dx F(u), with the product formed in physical space
and 2/3-dealiased. For ``kp`` the xi = 0 plane of everything is kept at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from decaylab.spectral import Field, Grid, Multiplier, _kp_inverse_dx

__all__ = [
    "FAMILIES",
    "BLOWUP_THRESHOLD",
    "ModelSpec",
    "State",
    "linear_symbol",
    "nonlinear_rhs",
    "full_rhs",
    "project_kp",
]

FAMILIES = ("gkdv", "gardner", "bo", "zk2d", "kp")
_ONE_D = ("gkdv", "gardner", "bo")

# sup-norm above which a run is treated as blowing up
BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class ModelSpec:
    """Which PDE to evolve. ``kappa = -1`` is KP-I, ``+1`` is KP-II."""

    family: str
    p: int = 2
    mu: float = 0.0
    kappa: int | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.p) != self.p or self.p not in (2, 3, 4, 5):
            raise ValueError(f"p must be one of 2, 3, 4, 5, got {self.p}")
        if self.family != "gkdv" and self.p != 2:
            raise ValueError("p is only a parameter of the gkdv family")
        if not np.isfinite(self.mu) or self.mu < 0:
            raise ValueError(f"mu must be a finite real >= 0, got {self.mu}")
        if self.family != "gardner" and self.mu != 0:
            raise ValueError("mu is only a parameter of the gardner family")
        if self.family == "kp":
            if self.kappa not in (-1, 1):
                raise ValueError(f"kp needs kappa = -1 (KP-I) or +1 (KP-II), got {self.kappa}")
        elif self.kappa is not None:
            raise ValueError("kappa is only a parameter of the kp family")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def ndim(self) -> int:
        return 1 if self.family in _ONE_D else 2

    @property
    def tag(self) -> str:
        if self.family == "gkdv":
            return f"gkdv(p={self.p})"
        if self.family == "gardner":
            return f"gardner(mu={self.mu:g})"
        if self.family == "kp":
            return "kp-I" if self.kappa == -1 else "kp-II"
        return self.family

    def check_grid(self, grid: Grid) -> None:
        if grid.ndim != self.ndim:
            raise ValueError(f"{self.family} lives on a {self.ndim}D grid, got {grid.ndim}D")

    def flux(self, u: np.ndarray) -> np.ndarray:
        if self.family == "gkdv":
            return u**self.p
        if self.family == "gardner":
            return u * u * (1.0 + self.mu * u)
        if self.family == "bo":
            return u * u
        return 0.5 * u * u


@dataclass(frozen=True, eq=False)
class State:
    """Solution snapshot u(t, .) of a given model."""

    field: Field
    t: float
    model: ModelSpec

    def __post_init__(self) -> None:
        self.model.check_grid(self.field.grid)
        object.__setattr__(self, "t", float(self.t))

    @property
    def grid(self) -> Grid:
        return self.field.grid


def linear_symbol(model: ModelSpec, grid: Grid) -> Multiplier:
    """Purely imaginary dispersion symbol L of the model (zero on Nyquist lines)."""
    model.check_grid(grid)
    xi = grid.kx
    if model.family in ("gkdv", "gardner"):
        s = 1j * xi**3
    elif model.family == "bo":
        s = -1j * xi * np.abs(xi)
    elif model.family == "zk2d":
        s = 1j * xi * (xi**2 + grid.ky**2)
    else:
        s = 1j * xi**3 - 1j * model.kappa * grid.ky**2 * _kp_inverse_dx(grid)
        s = np.where(grid.xi_zero_mask, 0.0, s)
    s = np.array(np.broadcast_to(s, grid.spectral_shape), dtype=complex)
    s[grid.nyquist_mask] = 0.0
    return Multiplier(grid, s, f"L[{model.tag}]")


def _nonlinear_from_values(model: ModelSpec, grid: Grid, u: np.ndarray) -> np.ndarray:
    flux_hat = np.fft.rfftn(model.flux(u), axes=tuple(range(grid.ndim)))
    n_hat = np.where(grid.dealias_mask, -1j * grid.kx * flux_hat, 0.0)
    if model.family == "kp":
        n_hat[grid.xi_zero_mask] = 0.0
    return n_hat


def nonlinear_rhs(model: ModelSpec, f: Field) -> np.ndarray:
    """Spectrum of -dx F(u), dealiased (and xi = 0 plane zeroed for kp)."""
    model.check_grid(f.grid)
    return _nonlinear_from_values(model, f.grid, f.values)


def full_rhs(model: ModelSpec, f: Field) -> Field:
    """u_t = L u + N(u) in physical space."""
    L = linear_symbol(model, f.grid)
    return Field.from_spectrum(f.grid, L.symbol * f.spectrum + nonlinear_rhs(model, f))


def project_kp(f: Field) -> tuple[Field, np.ndarray]:
    """
    Remove the x-mean of every y row so dx^-1 is defined.

    Returns the projected field and the removed per-row constants.
    """
    if f.grid.ndim != 2:
        raise ValueError("KP projection needs a 2D grid")
    means = f.values.mean(axis=0)
    return Field(f.grid, f.values - means[None, :]), means
