"""
Experiment configs, runs, sweeps and on-disk formats.

Config grammar
--------------
UTF-8, one statement per line::

    # comment                       full-line or after whitespace
    [section]                       model, grid, time, initial, regions, diagnostics, run
    [region NAME]                   one per region; NAME becomes the CSV column
    [virial NAME]                   one per virial functional
    key = value                     number, true/false, bare word, or [v1, v2, ...]

Numbers may be written as ``64*pi`` or ``pi``. Every section and key is
checked; errors carry line numbers and are all reported together.

Outputs of ``run``
------------------
``series.csv``
    Header row, then one row per record time. Columns: t, mass, energy,
    [momentum], one per region (plus ``NAME_u4`` for gkdv p=4), one per
    virial (``virial_NAME``), [bo_weighted_energy, l1]. Values use 17 significant
    digits; a cell is ``nan`` where its region or weight is undefined (t <= 1
    for logarithmic laws).
``snap_NNNNN.ddl``
    Binary snapshots (format below), on the ``snapshot_every`` schedule.
``manifest.json``
    Resolved config, versions, derived run facts and the final status.

Snapshot format (little-endian)
-------------------------------
``b"DDL1"``, version u32, ndim u32, dims u64 x ndim, lengths f64 x ndim,
t f64, model tag u32, then the values as f64 in row-major order.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import math
import os
import platform
import re
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from decaylab import __version__
from decaylab.diagnostics import (
    SeriesRecord,
    VirialSpec,
    bo_weighted_energy,
    energy,
    l1_norm,
    local_mass,
    mass,
    momentum_kp,
    virial,
)
from decaylab.models import FAMILIES, ModelSpec, State, linear_symbol, project_kp
from decaylab.regions import RegionSpec, validate
from decaylab.solutions import (
    BreatherParams,
    LumpParams,
    SolitonParams,
    bo_soliton,
    gkdv_soliton,
    kp_line_soliton,
    kp_lump,
    mkdv_breather,
)
from decaylab.spectral import Field, Grid, dealias
from decaylab.stepper import BlowUpError, SolverError, evolve, make_plan

__all__ = [
    "ConfigError",
    "ConfigIssue",
    "InitialSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "Snapshot",
    "SnapshotError",
    "write_snapshot",
    "read_snapshot",
    "model_tag",
    "describe_tag",
    "read_series",
    "build_initial",
    "run",
    "main",
]

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2
WORKERS_ENV = "DDLAB_WORKERS"

# -- config parsing --------------------------------------------------------------


@dataclass(frozen=True)
class ConfigIssue:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}" if self.line else self.message


class ConfigError(ValueError):
    """All problems found in a config document."""

    def __init__(self, issues: Sequence[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("\n".join(map(str, self.issues)))


_NUM_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?:\s*\*\s*pi)?$")


def _scalar(text: str) -> Any:
    t = text.strip()
    if t in ("true", "false"):
        return t == "true"
    if t in ("pi", "+pi"):
        return math.pi
    if t == "-pi":
        return -math.pi
    m = _NUM_RE.match(t)
    if m:
        v = float(m.group(1))
        if "pi" in t:
            return v * math.pi
        if re.fullmatch(r"[+-]?\d+", m.group(1)):
            return int(m.group(1))
        return v
    if re.fullmatch(r"[A-Za-z_][\w.\-/]*", t):
        return t
    raise ValueError(f"cannot read value {t!r}")


def _value(text: str) -> Any:
    t = text.strip()
    if t.startswith("["):
        if not t.endswith("]"):
            raise ValueError("unterminated list")
        inner = t[1:-1].strip()
        items = [_scalar(s) for s in inner.split(",")] if inner else []
        kinds = {("num" if isinstance(v, (int, float)) and not isinstance(v, bool) else type(v).__name__) for v in items}
        if len(kinds) > 1:
            raise ValueError("lists must be homogeneous")
        return items
    return _scalar(t)


@dataclass
class _Section:
    kind: str
    name: str | None
    line: int
    items: dict[str, tuple[Any, int]] = field(default_factory=dict)


def _tokenize(text: str) -> tuple[list[_Section], list[ConfigIssue]]:
    sections: list[_Section] = []
    issues: list[ConfigIssue] = []
    seen: dict[tuple[str, str | None], int] = {}
    current: _Section | None = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = re.sub(r"(^|\s)#.*$", "", raw).strip()
        if not line:
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[\s*([a-z_]+)(?:\s+([A-Za-z_][\w\-]*))?\s*\]", line)
            if not m:
                issues.append(ConfigIssue(no, f"malformed section header {raw.strip()!r}"))
                current = None
                continue
            key = (m.group(1), m.group(2))
            if key in seen:
                label = " ".join(k for k in key if k)
                issues.append(ConfigIssue(no, f"duplicate section [{label}] (first at line {seen[key]}, again at line {no})"))
            seen.setdefault(key, no)
            current = _Section(m.group(1), m.group(2), no)
            sections.append(current)
            continue
        if "=" not in line:
            issues.append(ConfigIssue(no, f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if current is None:
            issues.append(ConfigIssue(no, f"key {key!r} outside any section"))
            continue
        if not re.fullmatch(r"[A-Za-z_]\w*", key):
            issues.append(ConfigIssue(no, f"invalid key {key!r}"))
            continue
        if key in current.items:
            first = current.items[key][1]
            issues.append(ConfigIssue(no, f"duplicate key {key!r} (first at line {first}, again at line {no})"))
            continue
        try:
            current.items[key] = (_value(val), no)
        except ValueError as exc:
            issues.append(ConfigIssue(no, str(exc)))
    return sections, issues


_INITIAL_KINDS: dict[str, dict[str, Any]] = {
    "soliton": {"c": 1.0, "x0": 0.0},
    "breather": {"alpha": 1.0, "beta": 1.0, "x1": 0.0, "x2": 0.0},
    "bo_soliton": {"c": 1.0, "x0": 0.0},
    "lump": {"c": 1.0, "beta": 0.0, "x0": 0.0, "y0": 0.0},
    "line_soliton": {"c": 1.0, "x0": 0.0},
    "gaussian": {"amplitude": 1.0, "width": 1.0, "center": 0.0, "center_y": 0.0},
    "random": {"amplitude": 1.0, "kmax": 8},
    "file": {"path": None},
}
_INITIAL_DIMS = {"soliton": 1, "breather": 1, "bo_soliton": 1, "lump": 2, "line_soliton": 2}


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    params: dict[str, Any]


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved and validated experiment description."""

    model: ModelSpec
    grid: Grid
    dt: float
    t_end: float
    record_every: float
    snapshot_every: float
    initial: InitialSpec
    regions: tuple[tuple[str, RegionSpec], ...] = ()
    K: float = 1.0
    smoothing: float = 0.0
    virials: tuple[tuple[str, VirialSpec], ...] = ()
    bo_c: float = 1.0
    bo_a: float = 0.0
    seed: int = 0
    base_dir: str = "."

    def to_dict(self) -> dict[str, Any]:
        g = self.grid
        return {
            "model": {"family": self.model.family, "p": self.model.p, "mu": self.model.mu,
                      "kappa": self.model.kappa, "tag": self.model.tag},
            "grid": {"n_x": g.n_x, "length_x": g.length_x, "n_y": g.n_y, "length_y": g.length_y},
            "time": {"dt": self.dt, "t_end": self.t_end, "record_every": self.record_every,
                     "snapshot_every": self.snapshot_every},
            "initial": {"kind": self.initial.kind, **self.initial.params},
            "regions": {"K": self.K, "smoothing": self.smoothing,
                        "specs": {name: {"family": r.family, **dict(r.params)} for name, r in self.regions}},
            "virials": {name: {"law": v.law, "c": v.c, "a": v.a, "quantity": v.quantity} for name, v in self.virials},
            "diagnostics": {"bo_c": self.bo_c, "bo_a": self.bo_a},
            "seed": self.seed,
        }


class _Reader:
    """Pulls typed values out of one section, collecting issues."""

    def __init__(self, sec: _Section, issues: list[ConfigIssue]):
        self.sec = sec
        self.issues = issues
        self.used: set[str] = set()

    def get(self, key: str, kind: str, default: Any = ..., allowed: Sequence[Any] | None = None) -> Any:
        self.used.add(key)
        if key not in self.sec.items:
            if default is ...:
                self.issues.append(ConfigIssue(self.sec.line, f"[{self.sec.kind}] needs key {key!r}"))
                return None
            return default
        v, no = self.sec.items[key]
        ok = {
            "num": isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
            "int": isinstance(v, int) and not isinstance(v, bool),
            "bool": isinstance(v, bool),
            "str": isinstance(v, str),
            "any": True,
        }[kind]
        if not ok:
            self.issues.append(ConfigIssue(no, f"{key} must be {kind}, got {v!r}"))
            return None
        if allowed is not None and v not in allowed:
            self.issues.append(ConfigIssue(no, f"{key} must be one of {list(allowed)}, got {v!r}"))
            return None
        return float(v) if kind == "num" else v

    def line_of(self, key: str) -> int:
        return self.sec.items[key][1] if key in self.sec.items else self.sec.line

    def finish(self, extra: Sequence[str] = ()) -> None:
        for key, (_, no) in self.sec.items.items():
            if key not in self.used and key not in extra:
                label = self.sec.kind + (f" {self.sec.name}" if self.sec.name else "")
                self.issues.append(ConfigIssue(no, f"unknown key {key!r} in [{label}]"))


_SINGLE = ("model", "grid", "time", "initial", "regions", "diagnostics", "run")
_NAMED = ("region", "virial")


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    """Parse and validate a config document; raises ``ConfigError`` listing every issue."""
    sections, issues = _tokenize(text)
    single: dict[str, _Section] = {}
    named: list[_Section] = []
    for sec in sections:
        if sec.kind in _SINGLE:
            if sec.name is not None:
                issues.append(ConfigIssue(sec.line, f"[{sec.kind}] takes no name"))
            single.setdefault(sec.kind, sec)
        elif sec.kind in _NAMED:
            if sec.name is None:
                issues.append(ConfigIssue(sec.line, f"[{sec.kind}] needs a name, e.g. [{sec.kind} central]"))
            else:
                named.append(sec)
        else:
            issues.append(ConfigIssue(sec.line, f"unknown section [{sec.kind}]"))
    for req in ("model", "grid", "time", "initial"):
        if req not in single:
            issues.append(ConfigIssue(0, f"missing section [{req}]"))
    if issues:
        raise ConfigError(issues)

    # model
    r = _Reader(single["model"], issues)
    family = r.get("family", "str", allowed=FAMILIES)
    p = r.get("p", "int", 2)
    mu = r.get("mu", "num", 0.0)
    kappa = r.get("kappa", "int", None)
    r.finish()
    model = None
    if family is not None and None not in (p, mu):
        try:
            model = ModelSpec(family, p=p, mu=mu, kappa=kappa)
        except ValueError as exc:
            issues.append(ConfigIssue(single["model"].line, str(exc)))

    # grid
    r = _Reader(single["grid"], issues)
    gvals = (r.get("n_x", "int"), r.get("length_x", "num"), r.get("n_y", "int", None), r.get("length_y", "num", None))
    r.finish()
    grid = None
    if None not in gvals[:2]:
        try:
            grid = Grid(*gvals)
        except ValueError as exc:
            issues.append(ConfigIssue(single["grid"].line, str(exc)))
    if model is not None and grid is not None and grid.ndim != model.ndim:
        issues.append(ConfigIssue(single["grid"].line, f"{model.family} needs a {model.ndim}D grid, got {grid.ndim}D"))

    # time
    r = _Reader(single["time"], issues)
    dt = r.get("dt", "num")
    t_end = r.get("t_end", "num")
    record_every = r.get("record_every", "num", None)
    snapshot_every = r.get("snapshot_every", "num", 0.0)
    r.finish()
    if dt is not None and not dt > 0:
        issues.append(ConfigIssue(r.line_of("dt"), f"dt must be > 0, got {dt:g}"))
    if t_end is not None and not t_end > 0:
        issues.append(ConfigIssue(r.line_of("t_end"), f"t_end must be > 0, got {t_end:g}"))
    if record_every is None:
        record_every = dt
    elif not record_every > 0:
        issues.append(ConfigIssue(r.line_of("record_every"), f"record_every must be > 0, got {record_every:g}"))
    if snapshot_every is not None and snapshot_every < 0:
        issues.append(ConfigIssue(r.line_of("snapshot_every"), f"snapshot_every must be >= 0, got {snapshot_every:g}"))

    # initial
    r = _Reader(single["initial"], issues)
    kind = r.get("kind", "str", allowed=tuple(_INITIAL_KINDS))
    initial = None
    if kind is not None:
        params = {}
        for key, default in _INITIAL_KINDS[kind].items():
            if key == "path":
                params[key] = r.get(key, "str")
            elif key == "kmax":
                params[key] = r.get(key, "int", default)
            else:
                params[key] = r.get(key, "num", default)
        r.finish()
        want = _INITIAL_DIMS.get(kind)
        if want is not None and model is not None and model.ndim != want:
            issues.append(ConfigIssue(single["initial"].line, f"initial kind {kind!r} is {want}D but {model.family} is {model.ndim}D"))
        if kind == "gaussian" and params["width"] is not None and not params["width"] > 0:
            issues.append(ConfigIssue(r.line_of("width"), "gaussian width must be > 0"))
        if kind in ("soliton", "bo_soliton", "lump", "line_soliton") and params["c"] is not None and not params["c"] > 0:
            issues.append(ConfigIssue(r.line_of("c"), f"{kind} speed c must be > 0"))
        if kind == "breather" and not (params["alpha"] and params["alpha"] > 0 and params["beta"] and params["beta"] > 0):
            issues.append(ConfigIssue(single["initial"].line, "breather needs alpha, beta > 0"))
        if kind == "random" and params["kmax"] is not None and params["kmax"] < 1:
            issues.append(ConfigIssue(r.line_of("kmax"), "kmax must be >= 1"))
        if kind == "file" and params["path"] is not None:
            path = Path(base_dir) / params["path"]
            if not path.is_file():
                issues.append(ConfigIssue(r.line_of("path"), f"snapshot file {str(path)!r} not found"))
        initial = InitialSpec(kind, params)

    # regions
    K, smoothing = 1.0, 0.0
    if "regions" in single:
        r = _Reader(single["regions"], issues)
        K = r.get("K", "num", 1.0)
        smoothing = r.get("smoothing", "num", 0.0)
        r.finish()
        if K is not None and not K > 0:
            issues.append(ConfigIssue(r.line_of("K"), f"K must be > 0, got {K:g}"))
        if smoothing is not None and smoothing < 0:
            issues.append(ConfigIssue(r.line_of("smoothing"), f"smoothing must be >= 0, got {smoothing:g}"))

    regions: list[tuple[str, RegionSpec]] = []
    virials: list[tuple[str, VirialSpec]] = []
    for sec in named:
        if sec.kind == "region":
            params = {k: v for k, (v, _) in sec.items.items() if k != "family"}
            if "family" not in sec.items:
                issues.append(ConfigIssue(sec.line, f"[region {sec.name}] needs key 'family'"))
                continue
            spec = RegionSpec(sec.items["family"][0], params)
            problems = validate(spec)
            for pr in problems:
                issues.append(ConfigIssue(sec.line, f"[region {sec.name}] {pr}"))
            if not problems:
                if model is not None and spec.ndim != model.ndim:
                    issues.append(ConfigIssue(sec.line, f"[region {sec.name}] is {spec.ndim}D but {model.family} is {model.ndim}D"))
                regions.append((sec.name, spec))
        else:
            r = _Reader(sec, issues)
            vals = (r.get("law", "str", "kdv"), r.get("c", "num", 1.0), r.get("a", "num", 0.0),
                    r.get("quantity", "str", "weighted_u"))
            r.finish()
            if None in vals:
                continue
            try:
                virials.append((sec.name, VirialSpec(*vals)))
            except ValueError as exc:
                issues.append(ConfigIssue(sec.line, f"[virial {sec.name}] {exc}"))
            if model is not None and model.ndim != 1:
                issues.append(ConfigIssue(sec.line, f"[virial {sec.name}] needs a 1D model"))
    names = [n for n, _ in regions] + [f"virial_{n}" for n, _ in virials]
    if len(set(names)) != len(names):
        issues.append(ConfigIssue(0, "region and virial names must be distinct"))

    bo_c, bo_a = 1.0, 0.0
    if "diagnostics" in single:
        r = _Reader(single["diagnostics"], issues)
        bo_c = r.get("bo_c", "num", 1.0)
        bo_a = r.get("bo_a", "num", 0.0)
        r.finish()
        if bo_c is not None and not bo_c > 0:
            issues.append(ConfigIssue(r.line_of("bo_c"), "bo_c must be > 0"))
        if bo_a is not None and not 0 <= bo_a < 0.5:
            issues.append(ConfigIssue(r.line_of("bo_a"), "bo_a must lie in [0, 1/2)"))

    seed = 0
    if "run" in single:
        r = _Reader(single["run"], issues)
        seed = r.get("seed", "int", 0)
        r.finish()
        if seed is not None and seed < 0:
            issues.append(ConfigIssue(r.line_of("seed"), "seed must be >= 0"))

    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(
        model=model, grid=grid, dt=dt, t_end=t_end, record_every=record_every,
        snapshot_every=snapshot_every, initial=initial, regions=tuple(regions), K=K,
        smoothing=smoothing, virials=tuple(virials), bo_c=bo_c, bo_a=bo_a, seed=seed,
        base_dir=str(base_dir),
    )


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError([ConfigIssue(0, f"cannot read {path}: {exc}")]) from exc
    return parse_config(text, base_dir=path.parent)


# -- snapshots -------------------------------------------------------------------

_MAGIC = b"DDL1"
_SNAPSHOT_VERSION = 1
_FAMILY_CODE = {name: i for i, name in enumerate(FAMILIES)}


class SnapshotError(ValueError):
    """Malformed, truncated or incompatible snapshot file."""


def model_tag(model: ModelSpec) -> int:
    """u32 tag: 16 * family index + (p for gkdv, 0 KP-I / 1 KP-II for kp, else 0)."""
    sub = model.p if model.family == "gkdv" else (1 if model.kappa == 1 else 0) if model.family == "kp" else 0
    return 16 * _FAMILY_CODE[model.family] + sub


def describe_tag(tag: int) -> str:
    fam_i, sub = divmod(tag, 16)
    if fam_i >= len(FAMILIES):
        return f"unknown({tag})"
    fam = FAMILIES[fam_i]
    if fam == "gkdv":
        return f"gkdv(p={sub})"
    if fam == "kp":
        return "kp-II" if sub == 1 else "kp-I"
    return fam


@dataclass(frozen=True, eq=False)
class Snapshot:
    values: np.ndarray
    lengths: tuple[float, ...]
    t: float
    tag: int

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    @classmethod
    def from_state(cls, s: State) -> "Snapshot":
        return cls(np.asarray(s.field.values), s.grid.lengths, s.t, model_tag(s.model))

    def grid(self) -> Grid:
        if len(self.dims) == 1:
            return Grid(self.dims[0], self.lengths[0])
        return Grid(self.dims[0], self.lengths[0], self.dims[1], self.lengths[1])


def write_snapshot(s: Snapshot, path: str | os.PathLike) -> Path:
    values = np.ascontiguousarray(s.values, dtype="<f8")
    ndim = values.ndim
    if ndim not in (1, 2) or len(s.lengths) != ndim:
        raise SnapshotError(f"snapshot must be 1D or 2D with matching lengths, got {values.shape}, {s.lengths}")
    head = _MAGIC + struct.pack(f"<II{ndim}Q{ndim}ddI", _SNAPSHOT_VERSION, ndim, *values.shape, *s.lengths, s.t, s.tag)
    path = Path(path)
    path.write_bytes(head + values.tobytes(order="C"))
    return path


def read_snapshot(path: str | os.PathLike) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise SnapshotError(f"{path}: truncated header ({len(data)} bytes)")
    if data[:4] != _MAGIC:
        raise SnapshotError(f"{path}: bad magic {data[:4]!r}, expected {_MAGIC!r}")
    version, ndim = struct.unpack_from("<II", data, 4)
    if version != _SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: version {version} not supported (expected {_SNAPSHOT_VERSION})")
    if ndim not in (1, 2):
        raise SnapshotError(f"{path}: ndim {ndim} not supported")
    fmt = f"<{ndim}Q{ndim}ddI"
    head_len = 12 + struct.calcsize(fmt)
    if len(data) < head_len:
        raise SnapshotError(f"{path}: truncated header ({len(data)} of {head_len} bytes)")
    fields = struct.unpack_from(fmt, data, 12)
    dims = tuple(int(d) for d in fields[:ndim])
    lengths = tuple(fields[ndim:2 * ndim])
    t, tag = fields[2 * ndim], fields[2 * ndim + 1]
    n_bytes = 8 * int(np.prod(dims))
    payload = data[head_len:]
    if len(payload) < n_bytes:
        raise SnapshotError(f"{path}: truncated payload ({len(payload)} of {n_bytes} bytes)")
    if len(payload) > n_bytes:
        raise SnapshotError(f"{path}: {len(payload) - n_bytes} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(float)
    return Snapshot(values, lengths, t, tag)


# -- CSV series ------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else format(v, ".17g")


def read_series(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Header and values of a series.csv, parsed back to binary64."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in row] for row in body], dtype=float).reshape(len(body), len(header))


# -- running ---------------------------------------------------------------------


def build_initial(cfg: ExperimentConfig) -> tuple[Field, dict[str, Any]]:
    """
    Initial field plus facts for the manifest.

    Every datum is 2/3-dealiased so it lies in the band the scheme keeps, and
    KP data are x-mean projected.
    """
    g, kind, p = cfg.grid, cfg.initial.kind, cfg.initial.params
    info: dict[str, Any] = {}
    if kind == "soliton":
        f = gkdv_soliton(SolitonParams(cfg.model.p, p["c"], p["x0"]), 0.0, g)
    elif kind == "breather":
        f = mkdv_breather(BreatherParams(p["alpha"], p["beta"], p["x1"], p["x2"]), 0.0, g)
    elif kind == "bo_soliton":
        f = bo_soliton(p["c"], 0.0, g, x0=p["x0"])
    elif kind == "lump":
        f = kp_lump(LumpParams(p["c"], p["beta"], p["x0"], p["y0"]), 0.0, g, project=False)
        ring = np.ones(g.shape, dtype=bool)
        ring[1:-1, 1:-1] = False
        info["lump_boundary_ring_sup"] = float(np.max(np.abs(f.values[ring])))
    elif kind == "line_soliton":
        f = kp_line_soliton(p["c"], g, x0=p["x0"])
    elif kind == "gaussian":
        r2 = (g.x - p["center"]) ** 2
        if g.ndim == 2:
            r2 = r2 + (g.y - p["center_y"]) ** 2
        f = Field(g, np.broadcast_to(p["amplitude"] * np.exp(-r2 / p["width"] ** 2), g.shape))
    elif kind == "random":
        rng = np.random.default_rng(cfg.seed)
        spec = np.zeros(g.spectral_shape, dtype=complex)
        keep = np.abs(g.mode_x) <= p["kmax"]
        if g.ndim == 2:
            keep = keep & (g.mode_y <= p["kmax"])
        keep = np.broadcast_to(keep, g.spectral_shape) & ~g.nyquist_mask
        spec[keep] = rng.standard_normal(np.count_nonzero(keep)) + 1j * rng.standard_normal(np.count_nonzero(keep))
        v = Field.from_spectrum(g, spec).values
        f = Field(g, p["amplitude"] * v / np.max(np.abs(v)))
    else:
        snap = read_snapshot(Path(cfg.base_dir) / p["path"])
        if snap.grid() != g:
            raise ValueError(f"snapshot grid {snap.grid()} does not match config grid {g}")
        f = Field(g, snap.values)
    f = dealias(f)
    info["initial_dealiased"] = True
    if cfg.model.family == "kp":
        f, means = project_kp(f)
        info["kp_removed_row_mean_max"] = float(np.max(np.abs(means)))
    return f, info


def _checkpoints(t_end: float, every: float) -> list[float]:
    if every <= 0:
        return []
    n = int(math.ceil(t_end / every * (1 - 1e-12)))
    return [min(k * every, t_end) for k in range(n + 1)]


def _record(cfg: ExperimentConfig, s: State) -> SeriesRecord:
    f, t, model = s.field, s.t, s.model
    regions: dict[str, float] = {}
    quartic: dict[str, float] = {}
    for name, spec in cfg.regions:
        defined = t > 1 if spec.needs_log else t > 0
        for target, power in ((regions, 2), (quartic, 4)):
            if power == 4 and not (model.family == "gkdv" and model.p == 4):
                continue
            target[name] = local_mass(f, spec, t, power=power, smoothing=cfg.smoothing, K=cfg.K) if defined else math.nan
    virials = {}
    for name, vs in cfg.virials:
        virials[name] = virial(f, vs, t) if (vs.law == "constant" or t > 1) else math.nan
    bo_val = None
    if model.family == "bo":
        bo_val = bo_weighted_energy(f, VirialSpec("bo", cfg.bo_c, cfg.bo_a).lam(t)) if t > 1 else math.nan
    return SeriesRecord(
        t=t, mass=mass(f), energy=energy(model, f),
        momentum=momentum_kp(f) if model.family == "kp" else None,
        regions=regions, quartic=quartic, virials=virials, bo_weighted_energy=bo_val,
        l1=l1_norm(f) if model.family == "bo" else None,
    )


def run(cfg: ExperimentConfig, output_dir: str | os.PathLike) -> int:
    """Run one experiment into ``output_dir``; returns the exit status."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    f0, info = build_initial(cfg)
    state = State(f0, 0.0, cfg.model)
    plan = make_plan(cfg.model, cfg.grid, cfg.dt)
    stiffness = float(cfg.dt * np.max(np.abs(linear_symbol(cfg.model, cfg.grid).symbol)))

    records = _checkpoints(cfg.t_end, cfg.record_every)
    snaps = _checkpoints(cfg.t_end, cfg.snapshot_every)
    stops = sorted(set(records) | set(snaps))
    record_set, snap_set = set(records), set(snaps)

    rows: list[SeriesRecord] = []
    snapshot_files: list[str] = []
    last_good: str | None = None
    status, error = "ok", None
    try:
        for t in stops:
            if t > state.t:
                state = evolve(state, plan, t)
            if t in record_set:
                rows.append(_record(cfg, state))
            if t in snap_set:
                name = f"snap_{len(snapshot_files):05d}.ddl"
                write_snapshot(Snapshot.from_state(state), out / name)
                snapshot_files.append(name)
                last_good = name
    except SolverError as exc:
        status = "blowup" if isinstance(exc, BlowUpError) else "nan"
        error = str(exc)
        last_good = "last_good.ddl"
        write_snapshot(Snapshot.from_state(state), out / last_good)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        writer.writerow(rows[0].columns())
        for rec in rows:
            writer.writerow([_fmt(v) for v in rec.values()])
    (out / "series.csv").write_text(buf.getvalue(), encoding="utf-8")

    manifest = {
        "config": cfg.to_dict(),
        "versions": {"decaylab": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "derived": {"stiffness_dt_max_abs_L": stiffness, "rows": len(rows), **info},
        "snapshots": snapshot_files,
        "status": status,
        "error": error,
        "last_good_snapshot": last_good,
        "t_reached": state.t,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK if status == "ok" else EXIT_ABORT


# -- CLI -------------------------------------------------------------------------


def _run_path(config_path: str, out_dir: str) -> tuple[str, int, str]:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        return config_path, EXIT_INVALID, str(exc)
    try:
        code = run(cfg, out_dir)
    except (ValueError, SnapshotError) as exc:
        return config_path, EXIT_INVALID, str(exc)
    return config_path, code, "ok" if code == EXIT_OK else "solver aborted (see manifest.json)"


def _cmd_run(args: argparse.Namespace) -> int:
    _, code, msg = _run_path(args.config, args.out)
    if code != EXIT_OK:
        print(msg, file=sys.stderr)
    return code


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    stiff = cfg.dt * float(np.max(np.abs(linear_symbol(cfg.model, cfg.grid).symbol)))
    print(f"ok: {cfg.model.tag} on {'x'.join(map(str, cfg.grid.shape))}, dt={cfg.dt:g}, "
          f"t_end={cfg.t_end:g}, dt*max|L|={stiff:.3g}")
    return EXIT_OK


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    paths = sorted(glob.glob(args.configs))
    if not paths:
        print(f"no configs match {args.configs!r}", file=sys.stderr)
        return EXIT_INVALID
    workers = args.workers or _default_workers()
    jobs = [(p, str(Path(args.out) / Path(p).stem)) for p in paths]
    if workers == 1:
        results = [_run_path(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_path, *zip(*jobs)))
    worst = EXIT_OK
    for path, code, msg in results:
        print(f"{path}: exit {code} ({msg.splitlines()[0] if msg else ''})")
        worst = max(worst, code)
    return worst


def _cmd_inspect(args: argparse.Namespace) -> int:
    try:
        snap = read_snapshot(args.snapshot)
    except (OSError, SnapshotError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    v = snap.values
    cell = float(np.prod([L / n for L, n in zip(snap.lengths, snap.dims)]))
    print(f"model   {describe_tag(snap.tag)} (tag {snap.tag})")
    print(f"dims    {' x '.join(map(str, snap.dims))}")
    print(f"lengths {' x '.join(format(L, '.17g') for L in snap.lengths)}")
    print(f"t       {snap.t:.17g}")
    print(f"min     {v.min():.17g}")
    print(f"max     {v.max():.17g}")
    print(f"mass    {0.5 * float(np.sum(v * v)) * cell:.17g}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="decaylab", description="Dispersive decay laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="run every config matching a glob")
    p.add_argument("configs", help="glob pattern, quoted")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None, help=f"default: ${WORKERS_ENV} or the CPU count")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("inspect", help="print a snapshot header and summary")
    p.add_argument("snapshot")
    p.set_defaults(func=_cmd_inspect)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
