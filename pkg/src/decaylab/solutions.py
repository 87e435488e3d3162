"""
Closed-form solutions sampled onto grids, and the residual oracles that certify them.

None of the formulas here is trusted on sight: each is checked in the test
suite against its PDE (``pde_residual``) or its profile equation
(``soliton_ode_residual``, ``bo_profile_residual``, ``lump_elliptic_residual``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from decaylab.models import ModelSpec, linear_symbol, project_kp
from decaylab.spectral import Field, Grid, apply_multiplier, make_multiplier

__all__ = [
    "SolitonParams",
    "BreatherParams",
    "LumpParams",
    "soliton_profile",
    "gkdv_soliton",
    "soliton_ode_residual",
    "breather_speeds",
    "breather_profile",
    "mkdv_breather",
    "bo_profile",
    "bo_soliton",
    "bo_profile_residual",
    "lump_profile",
    "kp_lump",
    "lump_elliptic_residual",
    "kp_line_soliton",
    "pde_residual",
]


@dataclass(frozen=True)
class SolitonParams:
    p: int = 2
    c: float = 1.0
    x0: float = 0.0

    def __post_init__(self) -> None:
        if self.p not in (2, 3, 4, 5):
            raise ValueError(f"soliton power must be 2..5, got {self.p}")
        if not self.c > 0:
            raise ValueError(f"soliton speed must be positive, got {self.c}")


@dataclass(frozen=True)
class BreatherParams:
    alpha: float = 1.0
    beta: float = 1.0
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"breather needs alpha, beta > 0, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class LumpParams:
    c: float = 1.0
    beta: float = 0.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"lump speed must be positive, got {self.c}")


def _need_dim(grid: Grid, ndim: int, what: str) -> None:
    if grid.ndim != ndim:
        raise ValueError(f"{what} needs a {ndim}D grid, got {grid.ndim}D")


# -- gKdV solitons ---------------------------------------------------------------


def soliton_profile(x: np.ndarray, p: int, c: float) -> np.ndarray:
    """Q_c(x) = [c(p+1)/2]^(1/(p-1)) sech^(2/(p-1))((p-1) sqrt(c) x / 2)."""
    amp = (c * (p + 1) / 2) ** (1.0 / (p - 1))
    z = np.abs((p - 1) * np.sqrt(c) * np.asarray(x, dtype=float) / 2)
    # sech z = 2 e^-z / (1 + e^-2z) never overflows
    e = np.exp(-z)
    return amp * (2 * e / (1 + e * e)) ** (2.0 / (p - 1))


def gkdv_soliton(params: SolitonParams, t: float, grid: Grid) -> Field:
    """Traveling soliton Q_c(x - c t - x0)."""
    _need_dim(grid, 1, "gkdv_soliton")
    return Field(grid, soliton_profile(grid.x - params.c * t - params.x0, params.p, params.c))


def soliton_ode_residual(params: SolitonParams, grid: Grid) -> float:
    """sup |Q'' - c Q + Q^p| with Q'' taken spectrally."""
    q = gkdv_soliton(SolitonParams(params.p, params.c, 0.0), 0.0, grid)
    qxx = apply_multiplier(q, make_multiplier(grid, "dx2")).values
    return float(np.max(np.abs(qxx - params.c * q.values + q.values**params.p)))


# -- mKdV breather ---------------------------------------------------------------


def breather_speeds(alpha: float, beta: float) -> tuple[float, float]:
    """(delta, gamma) = (alpha^2 - 3 beta^2, 3 alpha^2 - beta^2)."""
    return alpha**2 - 3 * beta**2, 3 * alpha**2 - beta**2


def breather_profile(x: np.ndarray, t: float, alpha: float, beta: float, x1: float = 0.0, x2: float = 0.0) -> np.ndarray:
    """
    2 sqrt(2) d/dx arctan(beta sin(alpha X) / (alpha cosh(beta Y))), X = x + delta t + x1,
    Y = x + gamma t + x2, with the x-derivative taken in closed form.
    """
    delta, gamma = breather_speeds(alpha, beta)
    ax = alpha * (np.asarray(x) + delta * t + x1)
    by = beta * (np.asarray(x) + gamma * t + x2)
    # divide through by cosh^2 to keep large |by| finite
    th = np.tanh(by)
    sech = 1.0 / np.cosh(by)
    num = alpha * beta * (alpha * np.cos(ax) - beta * np.sin(ax) * th) * sech
    den = alpha**2 + beta**2 * (np.sin(ax) * sech) ** 2
    return 2 * np.sqrt(2) * num / den


def mkdv_breather(params: BreatherParams, t: float, grid: Grid) -> Field:
    _need_dim(grid, 1, "mkdv_breather")
    return Field(grid, breather_profile(grid.x, t, params.alpha, params.beta, params.x1, params.x2))


# -- Benjamin-Ono soliton --------------------------------------------------------


def bo_profile(x: np.ndarray, c: float) -> np.ndarray:
    """-2c / (1 + c^2 x^2): the traveling wave of u_t + (H u_x + u^2)_x = 0, speed -c."""
    return -2 * c / (1 + (c * np.asarray(x)) ** 2)


def bo_soliton(c: float, t: float, grid: Grid, x0: float = 0.0) -> Field:
    """
    Benjamin-Ono soliton of speed magnitude ``c``.

    With H of symbol -i sgn(xi) and flux +u^2 the solitary wave is a negative
    Lorentzian travelling to the left: u = -2c / (1 + c^2 (x + c t - x0)^2).
    """
    _need_dim(grid, 1, "bo_soliton")
    if not c > 0:
        raise ValueError(f"BO soliton speed must be positive, got {c}")
    return Field(grid, bo_profile(grid.x + c * t - x0, c))


def bo_profile_residual(c: float, grid: Grid) -> float:
    """sup |H phi' + phi^2 + c phi| of the sampled profile, H phi' = |D| phi spectrally."""
    phi = Field(grid, bo_profile(grid.x, c))
    absd = apply_multiplier(phi, make_multiplier(grid, "abs")).values
    return float(np.max(np.abs(absd + phi.values**2 + c * phi.values)))


# -- KP lumps and line solitons --------------------------------------------------


def lump_profile(x: np.ndarray, y: np.ndarray, t: float = 0.0, c: float = 1.0, beta: float = 0.0,
                 x0: float = 0.0, y0: float = 0.0) -> np.ndarray:
    """
    Moving KP-I lump Q_c(x - c t - beta^2 t - beta (y - 2 beta t), y - 2 beta t),
    Q_c(x, y) = c Q(sqrt(c) x, c y), Q = 24 (3 - x^2 + y^2) / (3 + x^2 + y^2)^2.
    """
    yy = np.asarray(y) - y0 - 2 * beta * t
    xx = np.asarray(x) - x0 - c * t - beta**2 * t - beta * yy
    X = np.sqrt(c) * xx
    Y = c * yy
    r2 = X**2 + Y**2
    return c * 24 * (3 - X**2 + Y**2) / (3 + r2) ** 2


def kp_lump(params: LumpParams, t: float, grid: Grid, project: bool = True) -> Field:
    """Lump sampled on a 2D grid; by default each y row has its x-mean removed."""
    _need_dim(grid, 2, "kp_lump")
    f = Field(grid, lump_profile(grid.x, grid.y, t, params.c, params.beta, params.x0, params.y0))
    if project:
        f, _ = project_kp(f)
    return f


def lump_elliptic_residual(grid: Grid, c: float = 1.0) -> float:
    """
    sup of dx^2 Q_c - c Q_c + Q_c^2 / 2 - dx^-2 dy^2 Q_c on the periodic box.

    Q_c is x-mean projected; dx^-2 dy^2 has symbol eta^2 / xi^2 off the xi = 0
    plane, and the xi = 0 plane of the residual (where dx^-2 is undefined) is
    dropped before taking the sup.
    """
    _need_dim(grid, 2, "lump_elliptic_residual")
    q = kp_lump(LumpParams(c=c), 0.0, grid, project=True)
    qxx = apply_multiplier(q, make_multiplier(grid, "dx2")).values
    inv_dx2 = np.zeros(grid.spectral_shape)
    xi = np.broadcast_to(grid.kx, grid.spectral_shape)
    nz = xi != 0
    inv_dx2[nz] = 1.0 / xi[nz] ** 2
    nonlocal_sym = np.where(grid.nyquist_mask, 0.0, inv_dx2 * grid.ky**2)
    nonlocal_term = Field.from_spectrum(grid, nonlocal_sym * q.spectrum).values
    r = Field(grid, qxx - c * q.values + 0.5 * q.values**2 - nonlocal_term)
    r, _ = project_kp(r)
    return r.sup()


def kp_line_soliton(c: float, grid: Grid, x0: float = 0.0) -> Field:
    """KdV (p = 2) soliton in x, constant in y. Not x-mean projected (infinite energy)."""
    _need_dim(grid, 2, "kp_line_soliton")
    if not c > 0:
        raise ValueError(f"line soliton speed must be positive, got {c}")
    prof = soliton_profile(grid.x - x0, 2, c)
    return Field(grid, np.broadcast_to(prof, grid.shape))


# -- PDE residual oracle ---------------------------------------------------------


def pde_residual(model: ModelSpec, exact: Callable[[float], Field], t: float, grid: Grid, h: float = 1e-5) -> float:
    """
    sup |d/dt u - RHS(u)| at time t.

    d/dt u uses the fourth-order central difference on t +- h, t +- 2h, so the
    time-difference error (h^4) stays far below the spatial floor. The flux
    derivative is taken spectrally from the pointwise flux without the 2/3
    truncation: dealiasing belongs to the time stepper, not to the equation
    the formula is certified against.
    """
    samples = {}
    for k in (-2, -1, 0, 1, 2):
        f = exact(t + k * h)
        if f.grid != grid:
            raise ValueError("exact solution sampled on a different grid")
        samples[k] = f.values
    ut = (samples[-2] - 8 * samples[-1] + 8 * samples[1] - samples[2]) / (12 * h)
    u = Field(grid, samples[0])
    flux_hat = np.fft.rfftn(model.flux(u.values), axes=tuple(range(grid.ndim)))
    n_hat = np.where(grid.nyquist_mask, 0.0, -1j * grid.kx * flux_hat)
    if model.family == "kp":
        n_hat[grid.xi_zero_mask] = 0.0
    rhs = Field.from_spectrum(grid, linear_symbol(model, grid).symbol * u.spectrum + n_hat).values
    return float(np.max(np.abs(ut - rhs)))
