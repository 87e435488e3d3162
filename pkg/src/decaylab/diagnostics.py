"""
Conserved quantities, virial functionals, localized masses and decay-trend proxies.

Conventions
-----------
Mass is ``M = 1/2 int u^2`` for every model. Energies are the Hamiltonians
that the evolution conserves exactly, ``u_t = dx (dE/du)``:

=========  ================================================================
gkdv       1/2 u_x^2 - u^(p+1) / (p+1)
gardner    1/2 u_x^2 - u^3 / 3 - mu u^4 / 4
bo         1/2 u |D| u + u^3 / 3          (the soliton has negative energy)
zk2d       1/2 |grad u|^2 - u^3 / 6
kp         1/2 u_x^2 - 1/2 kappa (dx^-1 dy u)^2 - u^3 / 6
=========  ================================================================

The cubic coefficient 1/6 for zk2d and kp is the one matched to the flux
u^2 / 2. Momentum for kp is ``P = 1/2 int u dx^-1 dy u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from decaylab.models import ModelSpec, State
from decaylab.regions import RegionSpec, weights
from decaylab.spectral import Field, Grid, _kp_inverse_dx, apply_multiplier, inverse, make_multiplier
from decaylab.stepper import _build_plan, _Integrator

__all__ = [
    "mass",
    "l1_norm",
    "energy",
    "momentum_kp",
    "VirialSpec",
    "virial",
    "virial_rate_identity",
    "bo_weighted_energy",
    "local_mass",
    "TrendReport",
    "decay_trend",
    "SeriesRecord",
]

_KP_CONSTRAINT_TOL = 1e-9


def _quad(grid: Grid, integrand: np.ndarray) -> float:
    return float(np.sum(integrand) * grid.cell_size)


def mass(f: Field) -> float:
    """1/2 int u^2."""
    return 0.5 * _quad(f.grid, f.values**2)


def l1_norm(f: Field) -> float:
    """int |u|; reported for BO runs as an observable, not as a verified hypothesis."""
    return _quad(f.grid, np.abs(f.values))


def _kp_antiderivative_dy(f: Field) -> np.ndarray:
    """dx^-1 dy u, symbol eta / xi off the xi = 0 plane."""
    sym = _kp_inverse_dx(f.grid) * f.grid.ky
    sym = np.where(f.grid.nyquist_mask, 0.0, sym)
    return inverse(f.grid, sym * f.spectrum)


def energy(model: ModelSpec, f: Field) -> float:
    """Hamiltonian of ``model`` evaluated on ``f`` (see the module table)."""
    model.check_grid(f.grid)
    g, u = f.grid, f.values
    fam = model.family
    if fam in ("gkdv", "gardner", "kp"):
        ux = apply_multiplier(f, make_multiplier(g, "dx")).values
        kinetic = 0.5 * ux**2
    if fam == "gkdv":
        p = model.p
        return _quad(g, kinetic - u ** (p + 1) / (p + 1))
    if fam == "gardner":
        return _quad(g, kinetic - u**3 / 3 - model.mu * u**4 / 4)
    if fam == "bo":
        absd = apply_multiplier(f, make_multiplier(g, "abs")).values
        return _quad(g, 0.5 * u * absd + u**3 / 3)
    if fam == "zk2d":
        ux = apply_multiplier(f, make_multiplier(g, "dx")).values
        uy = inverse(g, np.where(g.nyquist_mask, 0.0, 1j * g.ky * f.spectrum))
        return _quad(g, 0.5 * (ux**2 + uy**2) - u**3 / 6)
    w = _kp_antiderivative_dy(f)
    return _quad(g, kinetic - 0.5 * model.kappa * w**2 - u**3 / 6)


def momentum_kp(f: Field) -> float:
    """1/2 int u dx^-1 dy u for x-mean-free fields."""
    if f.grid.ndim != 2:
        raise ValueError("momentum_kp needs a 2D field")
    row_means = f.values.mean(axis=0)
    if np.max(np.abs(row_means)) > _KP_CONSTRAINT_TOL * max(1.0, f.sup()):
        raise ValueError(f"field violates the KP constraint: max |x-mean| = {np.max(np.abs(row_means)):.3g}")
    return 0.5 * _quad(f.grid, f.values * _kp_antiderivative_dy(f))


# -- virial functionals ----------------------------------------------------------


@dataclass(frozen=True)
class VirialSpec:
    """
    Weight tanh(x / lambda(t)) with

    ``kdv``: lambda = t^(1/2) / log^2 t;  ``bo``: lambda = c t^(1-a) / log t;
    ``constant``: lambda = c.
    """

    law: str = "kdv"
    c: float = 1.0
    a: float = 0.0
    quantity: str = "weighted_u"

    def __post_init__(self) -> None:
        if self.law not in ("kdv", "bo", "constant"):
            raise ValueError(f"unknown lambda law {self.law!r}")
        if self.quantity not in ("weighted_u", "weighted_u2"):
            raise ValueError(f"unknown virial quantity {self.quantity!r}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.law == "bo" and not 0 <= self.a < 0.5:
            raise ValueError(f"a must lie in [0, 1/2), got {self.a}")

    def _check(self, t: float) -> None:
        if self.law != "constant" and not t > 1:
            raise ValueError(f"the {self.law} lambda law needs t > 1, got t={t}")

    def lam(self, t: float) -> float:
        self._check(t)
        if self.law == "kdv":
            return math.sqrt(t) / math.log(t) ** 2
        if self.law == "bo":
            return self.c * t ** (1 - self.a) / math.log(t)
        return self.c

    def log_rate(self, t: float) -> float:
        """lambda'(t) / lambda(t)."""
        self._check(t)
        if self.law == "kdv":
            return 0.5 / t - 2 / (t * math.log(t))
        if self.law == "bo":
            return (1 - self.a) / t - 1 / (t * math.log(t))
        return 0.0


def virial(f: Field, spec: VirialSpec, t: float) -> float:
    """int tanh(x / lambda(t)) u dx, or with u^2 for ``weighted_u2``."""
    if f.grid.ndim != 1:
        raise ValueError("virial needs a 1D field")
    psi = np.tanh(f.grid.x / spec.lam(t))
    u = f.values if spec.quantity == "weighted_u" else f.values**2
    return _quad(f.grid, psi * u)


def _virial_rhs(f: Field, spec: VirialSpec, t: float) -> float:
    lam = spec.lam(t)
    s = f.grid.x / lam
    th = np.tanh(s)
    d1 = 1 - th**2
    d3 = -2 * d1 * (1 - 3 * th**2)
    u = f.values
    return (
        _quad(f.grid, d3 * u) / lam**3
        + _quad(f.grid, d1 * u**2) / lam
        - spec.log_rate(t) * _quad(f.grid, s * d1 * u)
    )


def virial_rate_identity(s: State, spec: VirialSpec, h: float = 1e-3) -> tuple[float, float]:
    """
    Both sides of the KdV virial identity at ``s.t``.

    For u_t + (u_xx + u^2)_x = 0 and I(t) = int psi(x/lambda) u, integration by
    parts gives

        I' = lambda^-3 int psi''' u + lambda^-1 int psi' u^2 - (lambda'/lambda) int (x/lambda) psi' u

    with psi = tanh. ``lhs`` is the central difference (I(t+h) - I(t-h)) / 2h,
    using one ETDRK4 step forward and one backward from ``s``; ``rhs`` is the
    quadrature of the three terms above.
    """
    if s.model != ModelSpec("gkdv", p=2):
        raise ValueError(f"the virial identity is implemented for gkdv p=2, got {s.model.tag}")
    if spec.quantity != "weighted_u":
        raise ValueError("the virial identity is implemented for quantity weighted_u")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    spec._check(s.t - h)
    v = np.asarray(s.field.spectrum)
    fwd = Field(s.grid, inverse(s.grid, _Integrator(_build_plan(s.model, s.grid, h)).advance(v, s.t)))
    bwd = Field(s.grid, inverse(s.grid, _Integrator(_build_plan(s.model, s.grid, -h)).advance(v, s.t)))
    lhs = (virial(fwd, spec, s.t + h) - virial(bwd, spec, s.t - h)) / (2 * h)
    return lhs, _virial_rhs(s.field, spec, s.t)


def bo_weighted_energy(f: Field, lambda_val: float) -> float:
    """int (u^2 + (D^(1/2) u)^2) / (1 + (x / lambda)^2) dx."""
    if f.grid.ndim != 1:
        raise ValueError("bo_weighted_energy needs a 1D field")
    if not lambda_val > 0:
        raise ValueError(f"lambda must be positive, got {lambda_val}")
    dh = apply_multiplier(f, make_multiplier(f.grid, "dhalf")).values
    w = 1.0 / (1 + (f.grid.x / lambda_val) ** 2)
    return _quad(f.grid, (f.values**2 + dh**2) * w)


def local_mass(f: Field, spec: RegionSpec, t: float, power: int = 2, smoothing: float = 0.0, K: float = 1.0) -> float:
    """int over Omega(t) of u^power, with the region weight from ``regions.weights``."""
    if power not in (2, 4):
        raise ValueError(f"power must be 2 or 4, got {power}")
    w = weights(spec, t, f.grid, smoothing=smoothing, K=K)
    return _quad(f.grid, w.values * f.values**power)


# -- decay trend -----------------------------------------------------------------


@dataclass(frozen=True)
class TrendReport:
    """
    Finite-time proxies for liminf decay.

    Attributes
    ----------
    running_min : ndarray
        min of the values up to each sample.
    ratio : float
        min over the final window divided by the first value.
    exponent : float
        Least-squares slope of log(running_min) against log(t).
    plateau_ratio : float
        running_min at the end divided by running_min at the time midpoint.
    decays : bool
        False when the running minimum has stalled over the second half.
    """

    t: np.ndarray
    running_min: np.ndarray
    ratio: float
    exponent: float
    plateau_ratio: float
    decays: bool

    @property
    def verdict(self) -> str:
        return "decay" if self.decays else "no decay"


def decay_trend(series: Sequence[tuple[float, float]], window: float = 0.1, plateau_tol: float = 0.9) -> TrendReport:
    """
    Summarize a (t, value) series.

    These are proxies only: a liminf statement cannot be confirmed or refuted
    on a finite time interval.
    """
    if len(series) < 10:
        raise ValueError(f"decay_trend needs at least 10 samples, got {len(series)}")
    arr = np.asarray(series, dtype=float)
    t, v = arr[:, 0], arr[:, 1]
    if not np.all(np.diff(t) > 0):
        raise ValueError("times must be strictly increasing")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    run = np.minimum.accumulate(v)
    n_win = max(1, int(math.ceil(window * len(v))))
    ratio = float(np.min(v[-n_win:]) / v[0]) if v[0] != 0 else float("nan")

    ok = (t > 0) & (run > 0)
    if np.count_nonzero(ok) >= 2 and np.ptp(np.log(t[ok])) > 0:
        exponent = float(np.polyfit(np.log(t[ok]), np.log(run[ok]), 1)[0])
    else:
        exponent = float("nan")

    mid = np.searchsorted(t, 0.5 * (t[0] + t[-1]))
    plateau = float(run[-1] / run[mid]) if run[mid] > 0 else 0.0
    return TrendReport(t=t, running_min=run, ratio=ratio, exponent=exponent,
                       plateau_ratio=plateau, decays=plateau < plateau_tol)


# -- series rows -----------------------------------------------------------------


@dataclass(frozen=True)
class SeriesRecord:
    """One diagnostics row; dict columns keep their insertion order."""

    t: float
    mass: float
    energy: float
    momentum: float | None = None
    regions: dict[str, float] = field(default_factory=dict)
    quartic: dict[str, float] = field(default_factory=dict)
    virials: dict[str, float] = field(default_factory=dict)
    bo_weighted_energy: float | None = None
    l1: float | None = None

    def columns(self) -> list[str]:
        cols = ["t", "mass", "energy"]
        if self.momentum is not None:
            cols.append("momentum")
        cols += list(self.regions)
        cols += [f"{k}_u4" for k in self.quartic]
        cols += [f"virial_{k}" for k in self.virials]
        if self.bo_weighted_energy is not None:
            cols.append("bo_weighted_energy")
        if self.l1 is not None:
            cols.append("l1")
        return cols

    def values(self) -> list[float]:
        vals = [self.t, self.mass, self.energy]
        if self.momentum is not None:
            vals.append(self.momentum)
        vals += list(self.regions.values())
        vals += list(self.quartic.values())
        vals += list(self.virials.values())
        if self.bo_weighted_energy is not None:
            vals.append(self.bo_weighted_energy)
        if self.l1 is not None:
            vals.append(self.l1)
        return vals
