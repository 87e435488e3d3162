import numpy as np
import pytest
from hypothesis import given, strategies as st

from decaylab.models import ModelSpec, State, full_rhs, linear_symbol, nonlinear_rhs, project_kp
from decaylab.spectral import Field, Grid

from conftest import band_limited

ALL_MODELS = [
    ModelSpec("gkdv", p=2), ModelSpec("gkdv", p=3), ModelSpec("gkdv", p=4), ModelSpec("gkdv", p=5),
    ModelSpec("gardner", mu=0.7), ModelSpec("bo"), ModelSpec("zk2d"),
    ModelSpec("kp", kappa=-1), ModelSpec("kp", kappa=1),
]


def grid_for(model):
    return Grid(64, 2 * np.pi) if model.ndim == 1 else Grid(32, 2 * np.pi, 32, 2 * np.pi)


class TestModelSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(family="heat"), dict(family="gkdv", p=6), dict(family="bo", p=3),
        dict(family="gardner", mu=-1.0), dict(family="gkdv", mu=1.0),
        dict(family="kp"), dict(family="kp", kappa=0), dict(family="zk2d", kappa=1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelSpec(**kwargs)

    def test_tags(self):
        assert ModelSpec("kp", kappa=-1).tag == "kp-I"
        assert ModelSpec("gkdv", p=4).tag == "gkdv(p=4)"

    def test_state_dimension_checked(self):
        with pytest.raises(ValueError):
            State(Grid(16, 1.0).zeros(), 0.0, ModelSpec("zk2d"))


class TestLinearSymbol:
    def test_gkdv_at_unit_mode(self):
        g = Grid(64, 2 * np.pi)
        assert linear_symbol(ModelSpec("gkdv"), g).symbol[1] == pytest.approx(1j)

    def test_kp_one_at_unit_modes(self):
        g = Grid(32, 2 * np.pi, 32, 2 * np.pi)
        assert linear_symbol(ModelSpec("kp", kappa=-1), g).symbol[1, 1] == pytest.approx(2j)

    def test_bo(self):
        g = Grid(64, 2 * np.pi)
        assert linear_symbol(ModelSpec("bo"), g).symbol[3] == pytest.approx(-9j)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.tag)
    def test_purely_imaginary(self, model):
        s = linear_symbol(model, grid_for(model)).symbol
        assert np.all(s.real == 0)

    def test_kp_zero_plane(self):
        g = Grid(32, 2 * np.pi, 32, 2 * np.pi)
        assert np.all(linear_symbol(ModelSpec("kp", kappa=1), g).symbol[0] == 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linear_symbol(ModelSpec("zk2d"), Grid(16, 1.0))


class TestNonlinear:
    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.tag)
    def test_zero_field(self, model):
        g = grid_for(model)
        assert np.all(nonlinear_rhs(model, g.zeros()) == 0)

    def test_constant_field(self):
        g = Grid(64, 2 * np.pi)
        f = Field(g, np.full(g.shape, 0.7))
        assert np.max(np.abs(nonlinear_rhs(ModelSpec("gkdv"), f))) <= 1e-12

    def test_cos_squared(self):
        g = Grid(128, 2 * np.pi)
        out = Field.from_spectrum(g, nonlinear_rhs(ModelSpec("gkdv"), g.sample(np.cos)))
        assert np.max(np.abs(out.values - np.sin(2 * g.x))) <= 1e-12

    @given(seed=st.integers(0, 2**16))
    def test_gardner_mu0_is_kdv(self, seed):
        g = Grid(64, 2 * np.pi)
        f = band_limited(g, np.random.default_rng(seed))
        a = nonlinear_rhs(ModelSpec("gkdv"), f)
        b = nonlinear_rhs(ModelSpec("gardner", mu=0.0), f)
        assert np.max(np.abs(a - b)) <= 1e-14 * max(1.0, np.max(np.abs(a)))

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.tag)
    def test_rhs_has_zero_mean(self, model, rng):
        g = grid_for(model)
        f = band_limited(g, rng, kmax=5)
        if model.family == "kp":
            f, _ = project_kp(f)
        rhs = full_rhs(model, f)
        assert abs(rhs.integral()) <= 1e-11 * max(1.0, rhs.sup())

    def test_kp_zero_plane(self, rng):
        g = Grid(32, 2 * np.pi, 32, 2 * np.pi)
        n = nonlinear_rhs(ModelSpec("kp", kappa=-1), band_limited(g, rng))
        assert np.all(n[0] == 0)


def test_project_kp_records_means(rng):
    g = Grid(16, 1.0, 8, 1.0)
    f = Field(g, rng.standard_normal(g.shape))
    p, means = project_kp(f)
    assert np.allclose(p.values.mean(axis=0), 0, atol=1e-15)
    assert np.allclose(p.values + means[None, :], f.values)
