import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decaylab.lab import (
    ConfigError,
    Snapshot,
    SnapshotError,
    describe_tag,
    load_config,
    main,
    model_tag,
    parse_config,
    read_series,
    read_snapshot,
    run,
    write_snapshot,
)
from decaylab.models import FAMILIES, ModelSpec

MINIMAL = """\
[model]
family = gkdv

[grid]
n_x = 256
length_x = 40

[time]
dt = 0.01
t_end = 1

[initial]
kind = soliton
"""

KDV_RUN = """\
# KdV soliton
[model]
family = gkdv
p = 2

[grid]
n_x = 1024
length_x = 64*pi

[time]
dt = 0.005
t_end = 10
record_every = 0.75
snapshot_every = 5

[initial]
kind = soliton
c = 1

[region central]
family = kdv_central

[region box]
family = moving_box_1d
n = 0
b = 0.5

[virial v]
law = kdv
"""


def _messages(exc_info):
    return [(i.line, i.message) for i in exc_info.value.issues]


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.model == ModelSpec("gkdv", p=2)
        assert cfg.grid.n_x == 256 and cfg.grid.length_x == 40.0
        assert cfg.record_every == cfg.dt and cfg.snapshot_every == 0
        assert cfg.initial.kind == "soliton" and cfg.initial.params["c"] == 1.0
        assert cfg.K == 1.0 and cfg.smoothing == 0.0 and cfg.regions == () and cfg.seed == 0

    def test_pi_expression(self):
        cfg = parse_config(MINIMAL.replace("length_x = 40", "length_x = 64*pi"))
        assert cfg.grid.length_x == 64 * math.pi

    def test_region_constraint_cited_verbatim(self):
        text = MINIMAL.replace("family = gkdv", "family = zk2d") + "\n".join([
            "[region box]", "family = zk_box", "b = 0.6", "r = 1", ""])
        text = text.replace("n_x = 256\nlength_x = 40", "n_x = 64\nlength_x = 40\nn_y = 64\nlength_y = 40")
        text = text.replace("kind = soliton", "kind = gaussian")
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        msgs = _messages(ei)
        assert len(msgs) == 1 and "0≤b<2/(3+r)" in msgs[0][1]
        assert msgs[0][0] == text.splitlines().index("[region box]") + 1

    def test_duplicate_key_cites_both_lines(self):
        text = MINIMAL.replace("dt = 0.01", "dt = 0.01\ndt = 0.02")
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        (line, msg), = _messages(ei)
        first = text.splitlines().index("dt = 0.01") + 1
        assert line == first + 1 and str(first) in msg

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as ei:
            parse_config(MINIMAL + "colour = red\n")
        (line, msg), = _messages(ei)
        assert line == MINIMAL.count("\n") + 1 and "colour" in msg and "[initial]" in msg

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"unknown section \[extras\]"):
            parse_config(MINIMAL + "[extras]\n")

    @pytest.mark.parametrize("old, new, needle", [
        ("dt = 0.01", "dt = 0", "dt must be > 0"),
        ("n_x = 256", "n_x = 100", "power of two"),
        ("family = gkdv", "family = nls", "family must be one of"),
        ("kind = soliton", "kind = lump", "2D"),
        ("t_end = 1", "t_end = 1 2", "line"),
    ])
    def test_errors(self, old, new, needle):
        with pytest.raises(ConfigError) as ei:
            parse_config(MINIMAL.replace(old, new))
        assert needle in str(ei.value)

    def test_all_issues_reported_together(self):
        text = MINIMAL.replace("dt = 0.01", "dt = -1").replace("t_end = 1", "t_end = 0")
        with pytest.raises(ConfigError) as ei:
            parse_config(text)
        assert len(ei.value.issues) == 2

    def test_missing_section(self):
        with pytest.raises(ConfigError, match=r"missing section \[time\]"):
            parse_config(MINIMAL.replace("[time]\ndt = 0.01\nt_end = 1\n", ""))


class TestSnapshots:
    @given(seed=st.integers(0, 2**16), two_d=st.booleans())
    def test_round_trip_bit_exact(self, seed, two_d, tmp_path_factory):
        rng = np.random.default_rng(seed)
        shape = (16, 8) if two_d else (32,)
        lengths = (3.5, math.pi) if two_d else (1 / 3,)
        snap = Snapshot(rng.standard_normal(shape), lengths, float(rng.random()), 33)
        path = write_snapshot(snap, tmp_path_factory.mktemp("s") / "a.ddl")
        back = read_snapshot(path)
        assert back.values.tobytes() == snap.values.tobytes()
        assert back.lengths == lengths and back.t == snap.t and back.tag == 33

    def test_header_layout(self, tmp_path):
        path = write_snapshot(Snapshot(np.arange(8.0), (2.0,), 1.5, 2), tmp_path / "a.ddl")
        data = path.read_bytes()
        assert data[:4] == b"DDL1"
        assert struct.unpack_from("<IIQddI", data, 4) == (1, 1, 8, 2.0, 1.5, 2)
        assert len(data) == 4 + 4 + 4 + 8 + 8 + 8 + 4 + 64

    def test_truncated(self, tmp_path):
        path = write_snapshot(Snapshot(np.arange(8.0), (2.0,), 0.0, 2), tmp_path / "a.ddl")
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(SnapshotError, match="truncated payload"):
            read_snapshot(path)
        path.write_bytes(path.read_bytes()[:20])
        with pytest.raises(SnapshotError, match="truncated header"):
            read_snapshot(path)

    def test_bad_magic_and_version(self, tmp_path):
        path = write_snapshot(Snapshot(np.arange(8.0), (2.0,), 0.0, 2), tmp_path / "a.ddl")
        data = path.read_bytes()
        path.write_bytes(b"XXXX" + data[4:])
        with pytest.raises(SnapshotError, match="bad magic"):
            read_snapshot(path)
        path.write_bytes(data[:4] + struct.pack("<I", 9) + data[8:])
        with pytest.raises(SnapshotError, match="version 9"):
            read_snapshot(path)

    def test_tags(self):
        assert describe_tag(model_tag(ModelSpec("gkdv", p=3))) == "gkdv(p=3)"
        assert describe_tag(model_tag(ModelSpec("kp", kappa=1))) == "kp-II"
        assert describe_tag(model_tag(ModelSpec("kp", kappa=-1))) == "kp-I"
        assert len({model_tag(ModelSpec(f)) for f in FAMILIES if f != "kp"}) == len(FAMILIES) - 1


@pytest.fixture(scope="module")
def kdv_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("kdv")
    (d / "kdv.cfg").write_text(KDV_RUN, encoding="utf-8")
    assert run(load_config(d / "kdv.cfg"), d / "out") == 0
    return d


class TestRun:
    def test_row_count_and_columns(self, kdv_run):
        header, arr = read_series(kdv_run / "out" / "series.csv")
        assert arr.shape[0] == math.ceil(10 / 0.75) + 1
        assert header == ["t", "mass", "energy", "central", "box", "virial_v"]
        assert arr[0, 0] == 0 and arr[-1, 0] == 10.0

    def test_undefined_cells_are_nan(self, kdv_run):
        header, arr = read_series(kdv_run / "out" / "series.csv")
        col = header.index("central")
        assert np.all(np.isnan(arr[arr[:, 0] <= 1, col]))
        assert np.all(np.isfinite(arr[arr[:, 0] > 1, col]))

    def test_mass_conserved(self, kdv_run):
        header, arr = read_series(kdv_run / "out" / "series.csv")
        m = arr[:, header.index("mass")]
        assert np.max(np.abs(m - m[0])) / m[0] <= 1e-10

    def test_csv_text_parses_back_exactly(self, kdv_run):
        text = (kdv_run / "out" / "series.csv").read_text().splitlines()[1:]
        _, arr = read_series(kdv_run / "out" / "series.csv")
        for row, line in zip(arr, text):
            assert ",".join("nan" if np.isnan(v) else format(v, ".17g") for v in row) == line

    def test_snapshots_and_manifest(self, kdv_run):
        man = json.loads((kdv_run / "out" / "manifest.json").read_text())
        assert man["status"] == "ok" and man["snapshots"] == ["snap_00000.ddl", "snap_00001.ddl", "snap_00002.ddl"]
        assert man["config"]["grid"]["n_x"] == 1024 and "numpy" in man["versions"]
        snap = read_snapshot(kdv_run / "out" / "snap_00002.ddl")
        assert snap.t == 10.0 and snap.dims == (1024,)

    def test_deterministic(self, kdv_run, tmp_path):
        assert run(load_config(kdv_run / "kdv.cfg"), tmp_path / "again") == 0
        for name in ("series.csv", "snap_00002.ddl"):
            assert (tmp_path / "again" / name).read_bytes() == (kdv_run / "out" / name).read_bytes()

    def test_blowup_recorded(self, tmp_path):
        text = MINIMAL.replace("family = gkdv", "family = gkdv\np = 5").replace("kind = soliton", "kind = gaussian\namplitude = 40")
        text = text.replace("t_end = 1", "t_end = 5")
        cfg = parse_config(text.replace("dt = 0.01", "dt = 0.05"))
        assert run(cfg, tmp_path) == 2
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["status"] in ("blowup", "nan") and man["last_good_snapshot"] == "last_good.ddl"
        assert read_snapshot(tmp_path / "last_good.ddl").t == man["t_reached"]


def test_bo_run_columns(tmp_path):
    text = MINIMAL.replace("family = gkdv", "family = bo").replace("kind = soliton", "kind = bo_soliton")
    text = text.replace("t_end = 1", "t_end = 2\nrecord_every = 0.5").replace("length_x = 40", "length_x = 200")
    assert run(parse_config(text), tmp_path) == 0
    header, arr = read_series(tmp_path / "series.csv")
    assert header == ["t", "mass", "energy", "bo_weighted_energy", "l1"]
    assert np.isnan(arr[:3, 3]).all() and np.isfinite(arr[3:, 3]).all() and np.all(arr[:, 4] > 0)


class TestCli:
    def test_invalid_config_no_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(MINIMAL.replace("dt = 0.01", "dt = 0"), encoding="utf-8")
        assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 1
        assert not (tmp_path / "out").exists()
        assert "dt must be > 0" in capsys.readouterr().err

    def test_validate(self, tmp_path, capsys):
        cfg = tmp_path / "ok.cfg"
        cfg.write_text(MINIMAL, encoding="utf-8")
        assert main(["validate", str(cfg)]) == 0
        assert capsys.readouterr().out.startswith("ok: gkdv")

    def test_inspect(self, kdv_run, capsys):
        assert main(["inspect", str(kdv_run / "out" / "snap_00002.ddl")]) == 0
        out = capsys.readouterr().out
        assert "gkdv(p=2)" in out and "t       10" in out

    def test_inspect_bad_file(self, tmp_path, capsys):
        (tmp_path / "x.ddl").write_bytes(b"nope")
        assert main(["inspect", str(tmp_path / "x.ddl")]) == 1

    def test_sweep(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("DDLAB_WORKERS", "1")
        (tmp_path / "a.cfg").write_text(MINIMAL, encoding="utf-8")
        (tmp_path / "b.cfg").write_text(MINIMAL.replace("c = 1", "").replace("kind = soliton", "kind = soliton\nc = 2"),
                                        encoding="utf-8")
        (tmp_path / "c.cfg").write_text(MINIMAL.replace("dt = 0.01", "dt = 0"), encoding="utf-8")
        code = main(["sweep", str(tmp_path / "*.cfg"), "--out", str(tmp_path / "out")])
        assert code == 1
        assert (tmp_path / "out" / "a" / "series.csv").exists() and (tmp_path / "out" / "b" / "series.csv").exists()
        assert not (tmp_path / "out" / "c").exists()
        lines = capsys.readouterr().out.splitlines()
        assert [ln.split(":")[1].split()[1] for ln in lines] == ["0", "0", "1"]
