"""
Decay regions Omega(t), their parameter constraints, and indicator weights.

Every family is a union of intersections of half-space-like conditions
``margin(t, point) >= 0`` (or ``> 0`` where the region is open). The margin is
measured in length units, which is what the smoothed weights ramp over.

===============  ===============================================  ===================
family           region at time t                                 parameters
===============  ===============================================  ===================
kdv_central      |x| <= K c t^(1/2) / log^2 t                     c
bo_window        |x| <= K c t^(1-a) / log t                       a, c
moving_box_1d    |x - sign t^n| <= K t^b                          n, b, sign, quartic
extreme_1d       x <= -K t log^(1+eps) t  or  x > K C0 t          epsilon, C0, side
zk_box           |x| < K t^b,  |y| < K t^(b r)                    b, r
kp_box           |x - l1 t^m1| <= K t^b,  |y - l2 t^m2| <= K t^(b r)  b, r, m1, m2, l1, l2
kp_cone          s1 |x| + s2 |y| >= K t log^(1+eps) t             sigma1, sigma2, epsilon
kp_halfplane     x + s3 y >= K beta t                             sigma3, beta > 0
===============  ===============================================  ===================

``K`` instantiates the implicit constant of "<~" and scales every growth law
uniformly (default 1). The families that contain a logarithm need t > 1; the
pure power laws need only t > 0.

Choosing ``C0`` for ``extreme_1d``: no formula is available. A heuristic
(not a theorem) is ``C0 >= 10 * ||u0||_{H^1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from decaylab.spectral import Field, Grid

__all__ = [
    "REGION_FAMILIES",
    "RegionSpec",
    "Violation",
    "validate",
    "contains",
    "weights",
    "half_width",
]

# name -> (parameter names with defaults, required names, dimension, needs log)
_FAMILY_TABLE: dict[str, tuple[dict[str, Any], tuple[str, ...], int, bool]] = {
    "kdv_central": ({"c": 1.0}, (), 1, True),
    "bo_window": ({"c": 1.0}, ("a",), 1, True),
    "moving_box_1d": ({"sign": 1, "quartic": False}, ("n", "b"), 1, False),
    "extreme_1d": ({"side": "both"}, ("epsilon", "C0"), 1, True),
    "zk_box": ({}, ("b", "r"), 2, False),
    "kp_box": ({"m1": 0.0, "m2": 0.0, "l1": 0.0, "l2": 0.0}, ("b", "r"), 2, False),
    "kp_cone": ({}, ("sigma1", "sigma2", "epsilon"), 2, True),
    "kp_halfplane": ({}, ("sigma3", "beta"), 2, False),
}

REGION_FAMILIES = tuple(_FAMILY_TABLE)
_SIDES = ("left", "right", "both")


@dataclass(frozen=True)
class Violation:
    """One failed constraint: the inequality as written and the values that broke it."""

    constraint: str
    values: str

    def __str__(self) -> str:
        return f"{self.constraint} violated ({self.values})"


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """
    A region family with its parameters.

    Missing optional parameters are filled from the family defaults. The spec
    may hold invalid values; ``validate`` reports them and ``contains`` and
    ``weights`` refuse to evaluate until they are fixed.
    """

    family: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged = dict(_FAMILY_TABLE[self.family][0]) if self.family in _FAMILY_TABLE else {}
        merged.update(self.params)
        object.__setattr__(self, "params", MappingProxyType(merged))

    @classmethod
    def make(cls, family: str, **params: Any) -> "RegionSpec":
        return cls(family, params)

    def __getitem__(self, name: str) -> Any:
        return self.params[name]

    @property
    def ndim(self) -> int:
        return _FAMILY_TABLE[self.family][2]

    @property
    def needs_log(self) -> bool:
        return _FAMILY_TABLE[self.family][3]

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"RegionSpec({self.family}: {inner})"


# -- validation ------------------------------------------------------------------


def _real(v: Any) -> float | None:
    if isinstance(v, bool):
        return None
    try:
        x = float(v)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def validate(spec: RegionSpec) -> list[Violation]:
    """Every violated constraint of ``spec``; an empty list means valid."""
    if spec.family not in _FAMILY_TABLE:
        return [Violation(f"family in {REGION_FAMILIES}", f"family={spec.family!r}")]
    defaults, required, _, _ = _FAMILY_TABLE[spec.family]
    known = set(defaults) | set(required)
    out: list[Violation] = []
    for name in sorted(set(spec.params) - known):
        out.append(Violation(f"parameter in {sorted(known)}", f"unknown {name}={spec.params[name]!r}"))
    for name in required:
        if name not in spec.params:
            out.append(Violation(f"{name} given", f"{name} missing"))

    nums: dict[str, float] = {}
    for name in sorted(known):
        if name not in spec.params or name in ("side", "quartic"):
            continue
        x = _real(spec.params[name])
        if x is None:
            out.append(Violation(f"{name} a finite real", f"{name}={spec.params[name]!r}"))
        else:
            nums[name] = x
    if out:
        return out

    def need(ok: bool, constraint: str, **vals: float) -> None:
        if not ok:
            out.append(Violation(constraint, ", ".join(f"{k}={v:g}" for k, v in vals.items())))

    f = spec.family
    if f == "kdv_central":
        need(nums["c"] > 0, "c>0", c=nums["c"])
    elif f == "bo_window":
        a, c = nums["a"], nums["c"]
        need(0 <= a < 0.5, "a∈[0,1/2)", a=a)
        need(c > 0, "c>0", c=c)
    elif f == "moving_box_1d":
        n, b, sign = nums["n"], nums["b"], nums["sign"]
        quartic = spec.params["quartic"]
        need(sign in (-1.0, 1.0), "sign∈{−1,+1}", sign=sign)
        if not isinstance(quartic, bool):
            out.append(Violation("quartic∈{true,false}", f"quartic={quartic!r}"))
        if quartic is True:
            need(b < 4 / 7, "b<4/7", b=b)
        else:
            need(b < 2 / 3, "b<2/3", b=b)
        need(0 <= n <= 1 - b / 2, "0≤n≤1−b/2", n=n, b=b)
    elif f == "extreme_1d":
        need(nums["epsilon"] > 0, "ε>0", epsilon=nums["epsilon"])
        need(nums["C0"] > 0, "C₀>0", C0=nums["C0"])
        if spec.params["side"] not in _SIDES:
            out.append(Violation(f"side∈{set(_SIDES)}", f"side={spec.params['side']!r}"))
    elif f == "zk_box":
        b, r = nums["b"], nums["r"]
        need(1 / 3 < r < 3, "1/3<r<3", r=r)
        need(0 <= b < 2 / (3 + r), "0≤b<2/(3+r)", b=b, r=r)
    elif f == "kp_box":
        b, r, m1, m2 = nums["b"], nums["r"], nums["m1"], nums["m2"]
        need(5 / 3 < r < 3, "5/3<r<3", r=r)
        need(0 < b < 2 / (3 + r), "0<b<2/(3+r)", b=b, r=r)
        need(0 <= m1 < 1 - (b / 2) * (r + 1), "0≤m₁<1−(b/2)(r+1)", m1=m1, b=b, r=r)
        need(0 <= m2 < 1 - (b / 2) * (3 - r), "0≤m₂<1−(b/2)(3−r)", m2=m2, b=b, r=r)
    elif f == "kp_cone":
        s1, s2 = nums["sigma1"], nums["sigma2"]
        need(s1 >= 0 and s2 >= 0, "σ₁,σ₂≥0", sigma1=s1, sigma2=s2)
        need(not (s1 == 0 and s2 == 0), "σ₁,σ₂ not both zero", sigma1=s1, sigma2=s2)
        need(nums["epsilon"] > 0, "ε>0", epsilon=nums["epsilon"])
    elif f == "kp_halfplane":
        need(nums["beta"] > 0, "β>0", beta=nums["beta"])
    return out


def _require_valid(spec: RegionSpec) -> None:
    problems = validate(spec)
    if problems:
        raise ValueError(f"invalid {spec.family} region: " + "; ".join(map(str, problems)))


def _check_time(spec: RegionSpec, t: float) -> float:
    t = float(t)
    if spec.needs_log:
        if not t > 1:
            raise ValueError(f"{spec.family} is defined for t > 1, got t={t}")
    elif not t > 0:
        raise ValueError(f"{spec.family} is defined for t > 0, got t={t}")
    return t


# -- geometry --------------------------------------------------------------------

# a clause is a list of (margin, strict) terms that must all hold; a region is
# a union of clauses
_Term = tuple[np.ndarray, bool]


def half_width(spec: RegionSpec, t: float, K: float = 1.0) -> float:
    """Half-width of the 1D window families (kdv_central, bo_window, moving_box_1d)."""
    _require_valid(spec)
    t = _check_time(spec, t)
    p = spec.params
    if spec.family == "kdv_central":
        return K * p["c"] * math.sqrt(t) / math.log(t) ** 2
    if spec.family == "bo_window":
        return K * p["c"] * t ** (1 - p["a"]) / math.log(t)
    if spec.family == "moving_box_1d":
        return K * t ** p["b"]
    raise ValueError(f"{spec.family} has no single half-width")


def _clauses(spec: RegionSpec, t: float, coords: tuple[np.ndarray, ...], K: float) -> list[list[_Term]]:
    p = {k: (v if k in ("side", "quartic") else float(v)) for k, v in spec.params.items()}
    f = spec.family
    x = coords[0]
    if f in ("kdv_central", "bo_window"):
        return [[(half_width(spec, t, K) - np.abs(x), False)]]
    if f == "moving_box_1d":
        center = p["sign"] * t ** p["n"]
        return [[(half_width(spec, t, K) - np.abs(x - center), False)]]
    if f == "extreme_1d":
        left = [(-K * t * math.log(t) ** (1 + p["epsilon"]) - x, False)]
        right = [(x - K * p["C0"] * t, True)]
        return {"left": [left], "right": [right], "both": [left, right]}[p["side"]]
    y = coords[1]
    if f == "zk_box":
        return [[(K * t ** p["b"] - np.abs(x), True), (K * t ** (p["b"] * p["r"]) - np.abs(y), True)]]
    if f == "kp_box":
        return [[
            (K * t ** p["b"] - np.abs(x - p["l1"] * t ** p["m1"]), False),
            (K * t ** (p["b"] * p["r"]) - np.abs(y - p["l2"] * t ** p["m2"]), False),
        ]]
    if f == "kp_cone":
        return [[(p["sigma1"] * np.abs(x) + p["sigma2"] * np.abs(y) - K * t * math.log(t) ** (1 + p["epsilon"]), False)]]
    # kp_halfplane
    return [[(x + p["sigma3"] * y - K * p["beta"] * t, False)]]


def _sharp(clauses: list[list[_Term]]) -> np.ndarray:
    inside = None
    for clause in clauses:
        c = None
        for margin, strict in clause:
            ok = margin > 0 if strict else margin >= 0
            c = ok if c is None else c & ok
        inside = c if inside is None else inside | c
    return inside


def contains(spec: RegionSpec, t: float, point, K: float = 1.0) -> bool:
    """Whether ``point`` (x or (x, y)) lies in the region at time ``t``."""
    _require_valid(spec)
    t = _check_time(spec, t)
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.shape != (spec.ndim,):
        raise ValueError(f"{spec.family} needs a {spec.ndim}D point, got shape {pt.shape}")
    return bool(_sharp(_clauses(spec, t, tuple(pt), K)))


def weights(spec: RegionSpec, t: float, grid: Grid, smoothing: float = 0.0, K: float = 1.0) -> Field:
    """
    Indicator of the region sampled on ``grid``.

    ``smoothing = 0`` is the sharp indicator. For ``smoothing = w > 0`` each
    condition becomes ``(1 + tanh(margin / w)) / 2``; conditions in a clause
    multiply, and a union of clauses combines as ``1 - prod(1 - w_i)``.
    """
    _require_valid(spec)
    t = _check_time(spec, t)
    if grid.ndim != spec.ndim:
        raise ValueError(f"{spec.family} needs a {spec.ndim}D grid, got {grid.ndim}D")
    if not (math.isfinite(smoothing) and smoothing >= 0):
        raise ValueError(f"smoothing must be >= 0, got {smoothing}")
    clauses = _clauses(spec, t, grid.mesh(), K)
    if smoothing == 0:
        w = _sharp(clauses).astype(float)
    else:
        outside = np.ones(grid.shape)
        for clause in clauses:
            c = np.ones(grid.shape)
            for margin, _ in clause:
                c = c * 0.5 * (1 + np.tanh(margin / smoothing))
            outside = outside * (1 - c)
        w = 1 - outside
    return Field(grid, np.broadcast_to(w, grid.shape))
