import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_trig_field
from gch.spectral import (
    Field,
    Grid,
    derivative,
    dx_helmholtz_inverse,
    evaluate,
    helmholtz_inverse,
    inverse_transform,
    lp_norm,
    refined_sup,
    transform,
)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(1.0, 100)
    with pytest.raises(ValueError):
        Grid(-1.0, 64)
    with pytest.raises(ValueError):
        Grid(float("nan"), 64)


def test_grid_layout():
    g = Grid(2 * np.pi, 16)
    assert g.x[0] == pytest.approx(-np.pi)
    assert g.dx == pytest.approx(2 * np.pi / 16)
    assert g.xi[0] == pytest.approx(-8) and g.xi[-1] == pytest.approx(7)
    assert g.nyquist == pytest.approx(8)
    assert g.rweights.sum() == 16


def test_field_is_immutable_and_finite(torus):
    f = Field(torus, np.sin(torus.x))
    with pytest.raises(ValueError):
        f.samples[0] = 1.0
    bad = np.zeros(torus.N)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        Field(torus, bad)


def test_full_transform_roundtrip(torus, rng):
    f = random_trig_field(rng, torus, 10)
    back = inverse_transform(torus, transform(f))
    assert np.max(np.abs(back.samples - f.samples)) < 1e-12


def test_derivatives_of_trig(torus):
    x = torus.x
    f = Field(torus, np.sin(3 * x))
    assert np.max(np.abs(derivative(f).samples - 3 * np.cos(3 * x))) < 1e-12
    assert np.max(np.abs(derivative(f, 2).samples + 9 * np.sin(3 * x))) < 1e-12


def test_helmholtz_on_modes(torus):
    x = torus.x
    f = Field(torus, np.cos(2 * x))
    assert np.max(np.abs(helmholtz_inverse(f).samples - np.cos(2 * x) / 5)) < 1e-14
    assert np.max(np.abs(dx_helmholtz_inverse(f).samples + 2 * np.sin(2 * x) / 5)) < 1e-14


def test_lp_norms(torus):
    f = Field(torus, np.cos(torus.x))
    assert lp_norm(f, 2) == pytest.approx(np.sqrt(np.pi), rel=1e-13)
    assert lp_norm(f, np.inf) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


def test_evaluate_off_grid(torus):
    f = Field(torus, np.cos(3 * torus.x) + 0.5 * np.sin(torus.x))
    pts = np.linspace(-3, 3, 17) + 0.0123
    exact = np.cos(3 * pts) + 0.5 * np.sin(pts)
    assert np.max(np.abs(evaluate(f, pts) - exact)) < 1e-13


def test_refined_sup_recovers_off_grid_peak():
    g = Grid(2 * np.pi, 32)
    f = Field(g, np.cos(5 * (g.x - 0.5 * g.dx)))
    assert f.sup() < 0.999
    assert refined_sup(f) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31), st.integers(min_value=1, max_value=12))
def test_helmholtz_bound_property(seed, kmax):
    # ||Lambda^-2 f|| + ||d_x Lambda^-2 f|| <= 2 ||f|| in L^inf
    g = Grid(2 * np.pi, 256)
    f = random_trig_field(np.random.default_rng(seed), g, kmax)
    lhs = helmholtz_inverse(f).sup() + dx_helmholtz_inverse(f).sup()
    assert lhs <= 2 * refined_sup(f) * (1 + 1e-12)


def test_arithmetic_checks_grid(torus):
    other = Grid(2 * np.pi, 32)
    with pytest.raises(ValueError):
        Field(torus, np.zeros(64)) + Field(other, np.zeros(32))
    f = Field(torus, np.ones(64))
    assert ((2 * f - f) ** 2).sup() == 1.0


def test_refined_sup_skips_roundoff_below_atol():
    g = Grid(2 * np.pi, 1 << 14)
    noise = Field(g, 1e-16 * np.random.default_rng(3).standard_normal(g.N))
    assert refined_sup(noise, atol=1e-12) == np.max(np.abs(noise.samples))
    big = Field(g, np.cos(5 * g.x + 0.3) + noise.samples)
    assert refined_sup(big, atol=1e-12) == pytest.approx(1.0, abs=1e-12)
