import math

import numpy as np
import pytest
from scipy.integrate import quad

from gch.initial_data import (
    GAMMA,
    DataParams,
    InfeasibleGridError,
    build_bundle,
    bump,
    cell_periods_of,
    e0_report,
    feasible,
    lemma_e1_report,
    lemma_e2_report,
    min_block_index,
    plan_grid,
    resolvable_indices,
    synthetic_index_set,
    term_support_report,
    with_scale,
)
from gch.littlewood_paley import SmoothCutoff, j_max
from gch.solver import default_dealias_fraction
from gch.spectral import Field, Grid, evaluate, refined_sup


def test_params_validation():
    with pytest.raises(ValueError):
        DataParams(n=20, Q=2)
    with pytest.raises(ValueError):
        DataParams(n=16, Q=1)
    with pytest.raises(ValueError):
        DataParams(n=16, Q=2, gamma=0.7)
    with pytest.raises(ValueError):
        DataParams(n=16, Q=2, family="other")
    with pytest.raises(ValueError):
        DataParams.lambda_family(1000, 2)
    p = DataParams(n=16, Q=2)
    assert p.carrier == 2 ** 16 and p.indices == (8,)
    assert p.prefactor == pytest.approx(16 ** (-1 / 3))
    assert p.log_n == pytest.approx(math.log(16))


def test_min_block_index_keeps_bands_on_plateau():
    for Q in (2, 3, 4):
        ell = min_block_index(Q)
        lo = 2.0 ** (ell + 1) * GAMMA - (Q + 1) * 2.0 ** -Q
        hi = 2.0 ** (ell + 1) * GAMMA + (Q + 1) * 2.0 ** -Q
        assert 4 / 3 * 2 ** ell <= lo and hi <= 1.5 * 2 ** ell
    assert min_block_index(2) == 4 and min_block_index(3) == 3


def test_synthetic_indices_grow():
    sizes = [len(synthetic_index_set(m, 2)) for m in range(10, 15)]
    assert sizes == [1, 2, 3, 4, 5]


def test_bump_matches_inverse_transform():
    # chi_check(x) = (1/pi) int_0^{2^-Q} chi(xi) cos(x xi) dxi on a torus wide enough to drop images
    p = DataParams(n=16, Q=2)
    g = Grid(2 * np.pi * 300 / GAMMA, 8192)
    chi = SmoothCutoff(4.0 ** -2, 2.0 ** -2)
    b = Field(g, bump(p, g, 0.0))
    for x in (0.0, 1.7, -5.0, 12.5):
        exact = quad(lambda s: chi(s) * np.cos(x * s), 0, 0.25, limit=200, epsabs=1e-14)[0] / np.pi
        assert evaluate(b, [x])[0] == pytest.approx(exact, abs=1e-8 * b.sup())


def test_plan_grid_lattice_and_headroom():
    p = DataParams(n=16, Q=2)
    g = plan_grid(p)
    q = g.L * GAMMA / (2 * math.pi)
    assert abs(q - round(q)) < 1e-9
    kept = default_dealias_fraction(2) * g.nyquist
    assert kept >= p.max_frequency
    assert resolvable_indices(p, g)
    assert cell_periods_of(p, g) >= 1


def test_plan_grid_reports_infeasible():
    with pytest.raises(InfeasibleGridError) as exc:
        plan_grid(DataParams(n=32, Q=2))
    assert exc.value.required_points > 2 ** 40
    assert exc.value.required_bytes > 2 ** 40
    assert not feasible(DataParams(n=32, Q=2))


def test_support_certification(bundle16):
    assert bundle16.leakage["low"] <= 1e-10
    assert bundle16.leakage["high"] <= 1e-10
    rep = term_support_report(bundle16)
    assert rep["passed"]
    assert all(r["leakage"] <= 1e-10 for r in rep["terms"])


def test_u0_identity(bundle16):
    p = bundle16.params
    expected = p.prefactor * (bundle16.u_high.samples + bundle16.u_low.samples)
    assert np.array_equal(bundle16.u0.samples, expected)
    meta = bundle16.metadata()
    assert meta["profile_hash"] == p.cutoff.profile_hash and len(meta["profile_hash"]) == 16


def test_lemma_e1_against_peak(bundle16):
    # with a single index the high peak sits at the bump centre where both cosines equal 1
    p, g = bundle16.params, bundle16.grid
    rep = lemma_e1_report(bundle16)
    peak = bump(p, g, 0.0).max()
    c = bundle16.centers[8]
    x_peak = (-c + g.L / 2) % g.L - g.L / 2
    at_peak = evaluate(bundle16.u_high, [x_peak], tol=1e-13)[0]
    assert p.carrier * at_peak / p.log_n == pytest.approx(peak, rel=1e-9)
    assert refined_sup(bundle16.u_high) <= at_peak * (1 + 1e-9)
    assert rep["high_over_log_n"] == pytest.approx(peak * (1 + GAMMA), rel=2e-2)
    assert 0 < rep["low_lipschitz"] < 1


def test_lemma_e2_dominance(bundle16):
    rep = lemma_e2_report(bundle16)
    assert rep["indices"] == [8]
    assert rep["dominance"]["8"]["ratio"] >= 10
    assert rep["ratio"] == pytest.approx(rep["restricted_norm"] / math.log(16) ** 2)


def test_e0_block_ratio_matches_symbol(bundle16):
    # d_x Lambda^-2 on a carrier 2^{j+1} g contributes 2^{j+1} g / (1 + 4^{j+1} g^2),
    # so 2^j ||Delta_j E0|| / ||Delta_j w|| -> 1/(2 g) = 12/17
    rep = e0_report(bundle16)
    k = 2.0 ** 9 * GAMMA
    expected = 2.0 ** 8 * k / (1 + k * k)
    assert rep["ratio_to_weight"] == pytest.approx(expected, rel=1e-3)
    assert rep["E0_restricted_B1"] >= 0.35 * rep["weight_restricted_B0"]


def test_lambda_family_layout(small_lambda_bundle):
    b = small_lambda_bundle
    assert b.params.indices == (4,)
    assert max(b.leakage.values()) <= 1e-10
    assert b.params.max_frequency <= default_dealias_fraction(2) * b.grid.nyquist
    assert max(b.params.indices) <= j_max(b.grid)


def test_zero_scale_gives_zero_data():
    p = with_scale(DataParams.lambda_family(2 ** 10, 2), 0.0)
    b = build_bundle(p)
    assert b.u0.sup() == 0.0
