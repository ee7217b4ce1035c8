import numpy as np
import pytest
import sympy as sp

from conftest import random_trig_field
from gch.littlewood_paley import build_cutoffs, dyadic_block, j_max
from gch.solver import (
    SolverConfig,
    coefficients,
    conserved_E,
    conserved_F,
    dealias_mask,
    evolve,
    flow_map,
    kept_index,
    rhs,
    suggest_dt,
    sup_along_flow,
)
from gch.spectral import Field, Grid, derivative, dx_helmholtz_inverse, refined_sup


def test_coefficients():
    assert coefficients(1) == (0.0, 1.0, 0.5)
    c1, c2, c3 = coefficients(2)
    assert (c1, c3) == (0.0, 1.0) and c2 == pytest.approx(5 / 3)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0, T=1.0, Q=2)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=-1.0, Q=2)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=1.0, Q=2, dealias_fraction=0.5)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=1.0, Q=2, snapshot_times=(0.5, 2.0))
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=1.0, Q=2, integrator="euler")
    cfg = SolverConfig(dt=0.1, T=1.0, Q=2)
    assert cfg.dealias_fraction == pytest.approx(1 / 3)
    assert cfg.snapshot_times == (0.0, 1.0)


def test_dealias_band():
    g = Grid(2 * np.pi, 64)
    assert kept_index(g, 2 / 6) == 10
    assert dealias_mask(g, 2 / 6).sum() == 11


@pytest.mark.parametrize("Q", [1, 2, 3])
def test_constant_is_stationary(Q):
    g = Grid(2 * np.pi, 32)
    assert rhs(Field(g, np.full(32, 0.8)), Q).sup() < 1e-15


def test_q1_matches_classical_form(rng):
    g = Grid(2 * np.pi, 128)
    for _ in range(10):
        u = random_trig_field(rng, g, 7)
        ux = derivative(u)
        ref = -u * ux - dx_helmholtz_inverse(u * u + 0.5 * ux * ux)
        assert np.max(np.abs(rhs(u, 1).samples - ref.samples)) <= 1e-13 * max(1.0, ref.sup())


def test_q2_matches_direct_form(rng):
    # -u^2 u_x - d_x Lambda^-2 (5/3 u^3 + u u_x^2)
    g = Grid(2 * np.pi, 128)
    u = random_trig_field(rng, g, 5, amp=0.5)
    ux = derivative(u)
    ref = -(u ** 2) * ux - dx_helmholtz_inverse((5 / 3) * u ** 3 + u * ux * ux)
    assert np.max(np.abs(rhs(u, 2).samples - ref.samples)) < 1e-12 * max(1.0, ref.sup())


def test_conserved_functionals_on_cosine():
    g = Grid(2 * np.pi, 64)
    u = Field(g, np.cos(g.x))
    assert conserved_E(u) == pytest.approx(2 * np.pi, rel=1e-14)
    x = sp.symbols("x")
    exact = sp.integrate(sp.cos(x) ** 4 + sp.cos(x) ** 2 * sp.sin(x) ** 2, (x, 0, 2 * sp.pi))
    assert conserved_F(u, 2) == pytest.approx(float(exact), rel=1e-14)
    zero = Field(g, np.zeros(64))
    assert conserved_E(zero) == 0.0 and conserved_F(zero, 3) == 0.0


def test_zero_stays_zero():
    g = Grid(2 * np.pi, 32)
    tr = evolve(Field(g, np.zeros(32)), SolverConfig(dt=0.1, T=1.0, Q=2))
    assert tr.states[-1].sup() == 0.0 and not tr.truncated


def test_snapshots_land_on_requested_times():
    g = Grid(2 * np.pi, 32)
    u0 = Field(g, 0.2 * np.cos(g.x))
    cfg = SolverConfig(dt=0.07, T=1.0, Q=2, snapshot_times=(0.25, 0.6, 1.0))
    tr = evolve(u0, cfg)
    assert tr.times == [0.0, 0.25, 0.6, 1.0]
    assert tr.states[0] is not None and np.array_equal(tr.states[0].samples, u0.samples)
    assert len(tr.diagnostics) == 4 and set(tr.diagnostics[0]) == {"E", "F", "sup", "lipschitz"}


def test_rejects_out_of_band_data():
    g = Grid(2 * np.pi, 32)
    with pytest.raises(ValueError, match="dealiasing"):
        evolve(Field(g, np.cos(12 * g.x)), SolverConfig(dt=0.1, T=1.0, Q=2))


def test_blowup_is_flagged_not_raised():
    g = Grid(2 * np.pi, 32)
    u0 = Field(g, 0.5 + 0.1 * np.cos(g.x))
    tr = evolve(u0, SolverConfig(dt=0.01, T=1.0, Q=1, forcing=lambda t: np.full(17, np.nan)))
    assert tr.truncated and tr.blowup_time == pytest.approx(0.01)
    grow = evolve(u0, SolverConfig(dt=0.01, T=1.0, Q=1, blowup_factor=1.01,
                                   forcing=lambda t: np.eye(1, 17, 0).ravel() * 32.0 * 5))
    assert grow.truncated and grow.blowup_time < 1.0


def test_conservation_short_run():
    g = Grid(2 * np.pi, 64)
    u0 = Field(g, 0.4 + 0.3 * np.cos(g.x) - 0.1 * np.sin(2 * g.x))
    tr = evolve(u0, SolverConfig(dt=0.01, T=0.5, Q=2))
    d0, d1 = tr.diagnostics[0], tr.diagnostics[-1]
    assert abs(d1["E"] - d0["E"]) / d0["E"] < 1e-9
    assert abs(d1["F"] - d0["F"]) / d0["F"] < 1e-8


def test_suggest_dt_scales_with_amplitude():
    g = Grid(2 * np.pi, 64)
    a = suggest_dt(Field(g, 0.5 * np.cos(g.x)), 2)
    b = suggest_dt(Field(g, np.cos(g.x)), 2)
    assert a == pytest.approx(4 * b)


def test_flow_map_trivial_velocities():
    g = Grid(2 * np.pi, 32)
    x0 = np.array([-1.0, 0.0, 0.5])
    tr = evolve(Field(g, np.zeros(32)), SolverConfig(dt=0.1, T=1.0, Q=2, dense=True))
    assert np.array_equal(flow_map(tr, x0).final(), x0)
    c = 0.7
    tr = evolve(Field(g, np.full(32, c)), SolverConfig(dt=0.1, T=1.0, Q=3, dense=True))
    paths = flow_map(tr, x0)
    assert np.allclose(paths.final(), x0 + c ** 3, atol=1e-13)
    assert not paths.wrapped.any()
    fast = evolve(Field(g, np.full(32, 2.0)), SolverConfig(dt=0.1, T=1.0, Q=2, dense=True))
    assert flow_map(fast, x0).wrapped.all()


def test_flow_map_requires_dense():
    g = Grid(2 * np.pi, 32)
    tr = evolve(Field(g, np.zeros(32)), SolverConfig(dt=0.1, T=0.2, Q=2))
    with pytest.raises(ValueError):
        flow_map(tr, [0.0])


def test_flow_preserves_block_sup():
    g = Grid(2 * np.pi, 256)
    u0 = Field(g, 0.5 + 0.3 * np.cos(g.x) + 0.2 * np.sin(3 * g.x))
    tr = evolve(u0, SolverConfig(dt=0.02, T=0.5, Q=2, dense=True))
    cut = build_cutoffs()
    for j in range(-1, 2):
        blk = dyadic_block(tr.states[-1], j, cut)
        s = refined_sup(blk)
        assert abs(sup_along_flow(tr, blk) - s) <= 1e-6 * max(s, 1e-300)
