from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vohedge import (AssumptionError, BinomialParams, DiscreteParams, GaussianParams,
                     TradingGrid, bs_delta_coeffs, call_measure, compute_fs,
                     deterministic_strategy_error, digital_measure, discretize, discretize_model,
                     exponential_measure, fs_pure_coeffs, initial_capital, j0_date_gradient,
                     j0_kernel, j0_kernel_stationary, j0_stationary, j0_total, put_measure,
                     reconstruct_payoff)
from vohedge.hedging_error import PairEvaluator, b_coeff, exact_second_moment, rho
from vohedge.mc_oracle import sample_nig

from conftest import ELEC, NIG_BASE, S0, STRIKE, T, nig_scaled
from test_fs_core import TRI_PROBS, TRI_VALUES
from trees import enumerate_paths, optimal_hedge_by_least_squares

ATOMS = [(0.5 + 2j, 0.3 - 0.1j), (0.5 - 2j, 0.3 + 0.1j), (1.7, 0.002)]


def _digital_paper_measure():
    return discretize(digital_measure(STRIKE, U=100.0, taper=0.0), 32, 16)


def _tri_table():
    return discretize_model(DiscreteParams(TRI_VALUES, TRI_PROBS), TradingGrid.uniform(4, 1.0))


def _binomial_table(n, a=0.08, b=-0.06, p=0.45):
    return discretize_model(BinomialParams(a, b, (p,) * n), TradingGrid.uniform(n, 1.0))


# --- pointwise kernels -------------------------------------------------------

@given(st.floats(-1.0, 2.0), st.floats(-10.0, 10.0))
def test_rho_with_zero_vanishes(re, im):
    t = discretize_model(NIG_BASE, TradingGrid.uniform(3, T))
    assert abs(rho(0.0, complex(re, im), 2, t)) < 1e-15


@given(st.floats(-1.0, 2.0), st.floats(-5.0, 5.0), st.floats(-1.0, 2.0), st.floats(-5.0, 5.0))
def test_binomial_rho_factorizes(yr, yi, zr, zi):
    t = _binomial_table(3)
    y, z = complex(yr, yi), complex(zr, zi)
    lhs = rho(y, z, 2, t) * rho(1.0, 1.0, 2, t)
    rhs = rho(y, 1.0, 2, t) * rho(z, 1.0, 2, t)
    # round-off floor: each rho carries an absolute error of order eps |m(y)| |m(1)|
    m = lambda x: abs(t.m(x)[1])
    floor = 1e-15 * m(y) * m(z) * m(1.0) ** 2
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs)) + floor


def test_rho11_matches_sampled_moments():
    t = discretize_model(NIG_BASE, TradingGrid.uniform(1, T))
    x = np.exp(sample_nig(NIG_BASE, T, 1_000_000, seed=9))
    r = rho(1.0, 1.0, 1, t).real
    assert r > 0
    # variance of exp(X) with a delete-half jackknife style split for the SE
    halves = [x[::2].var(ddof=1), x[1::2].var(ddof=1)]
    se = abs(halves[0] - halves[1]) / 2 + x.var() * np.sqrt(2.0 / x.size) * 3
    assert abs(r - x.var(ddof=1)) < 3 * se


def test_b_with_one_vanishes():
    t = discretize_model(ELEC, TradingGrid.uniform(4, T))
    assert abs(b_coeff(0.3 + 2j, 1.0, 3, t)) < 1e-14


def test_binomial_kernel_vanishes():
    t = _binomial_table(4)
    y = np.array([0.5 + 1j, 1.7, -0.4 - 3j])
    v = j0_kernel(t, y[:, None], y[None, :], S0)
    scale = np.abs(np.exp(np.add.outer(y, y) * np.log(S0)))
    assert np.all(np.abs(v) <= 1e-12 * scale)


def test_kernel_of_underlying_vanishes():
    t = discretize_model(NIG_BASE, TradingGrid.uniform(5, T))
    assert abs(j0_kernel(t, 1.0, 0.5 + 3j, S0)) < 1e-12 * S0 ** 1.5


def test_kernel_matches_least_squares_on_tree():
    # single real atom s^0.5: J0 is the least-squares residual of the tree
    t = _tri_table()
    _, err2, _, _ = optimal_hedge_by_least_squares(TRI_VALUES, TRI_PROBS, S0, np.sqrt)
    assert j0_kernel(t, 0.5, 0.5, S0).real == pytest.approx(err2, rel=1e-9)


def test_gaussian_kernel_nonzero_and_consistent():
    t = discretize_model(GaussianParams(0.05, 0.3), TradingGrid.uniform(6, 1.0))
    k = j0_kernel(t, 0.5, 0.5, S0).real
    rep = j0_total(t, discretize(exponential_measure([(0.5, 1.0)])), S0)
    assert k > 0
    assert rep.j0 == pytest.approx(k, rel=1e-12)


def test_stationary_kernel_single_date():
    t = discretize_model(NIG_BASE, TradingGrid.uniform(1, T))
    y, z = 0.5 + 1j, 0.7 - 2j
    beta = b_coeff(y, z, 1, t)
    assert j0_kernel_stationary(t, y, z, S0) == pytest.approx(beta * S0 ** (y + z), rel=1e-12)


def _closed_form_floor(t, size: float) -> float:
    # the closed form divides by rho(1,1), amplifying round-off by m(2) / rho(1,1) per date
    m1, m2 = t.m_real(1.0)[0], t.m_real(2.0)[0]
    return 1e-15 * t.n * size * m2 / (m2 - m1 * m1)


@given(st.floats(-0.5, 1.5), st.floats(-8.0, 8.0), st.floats(-0.5, 1.5), st.floats(-8.0, 8.0),
       st.integers(1, 30), st.floats(0.1, 3.0))
def test_stationary_kernel_equals_general(yr, yi, zr, zi, n, c):
    t = discretize_model(nig_scaled(c), TradingGrid.uniform(n, T))
    y, z = complex(yr, yi), complex(zr, zi)
    a = j0_kernel(t, y, z, S0)
    b = j0_kernel_stationary(t, y, z, S0)
    assert abs(a - b) <= 1e-10 * abs(a) + _closed_form_floor(t, S0 ** (yr + zr))


def test_stationary_kernel_when_ratio_equals_mgf():
    # y = 0 makes a(y,z) h(y) h(z) coincide with m(y+z): the equal-ratio branch
    t = discretize_model(NIG_BASE, TradingGrid.uniform(7, T))
    z = 0.4 + 1.5j
    a, b = j0_kernel_stationary(t, 0.0, z, S0), j0_kernel(t, 0.0, z, S0)
    assert abs(a - b) <= 1e-10 * abs(b) + _closed_form_floor(t, abs(S0 ** z))


# --- totals ----------------------------------------------------------------

def test_digital_uniform_std():
    t = discretize_model(nig_scaled(1.0), TradingGrid.uniform(12, T))
    rep = j0_total(t, _digital_paper_measure(), S0, terminal="truncated")
    assert rep.std == pytest.approx(0.1952, rel=0.01)
    assert rep.v0 == pytest.approx(0.4813, abs=0.001)


def test_call_electricity_uniform_std():
    t = discretize_model(ELEC, TradingGrid.uniform(10, T))
    assert j0_total(t, discretize(call_measure(STRIKE)), S0).std == pytest.approx(2.6154, rel=0.01)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_binomial_total_vanishes(n):
    t = _binomial_table(n)
    rep = j0_total(t, discretize(exponential_measure(ATOMS)), S0)
    assert abs(rep.j0) < 1e-10 * S0 ** (2 * 1.7)


def test_stationary_total_equals_general():
    t = discretize_model(nig_scaled(1.0), TradingGrid.uniform(12, T))
    d = _digital_paper_measure()
    a = j0_total(t, d, S0, terminal="truncated").j0
    b = j0_stationary(t, d, S0, terminal="truncated").j0
    assert b == pytest.approx(a, rel=1e-10)


def test_stationary_rejects_nonuniform():
    t = discretize_model(NIG_BASE, TradingGrid([0.0, 0.1, T]))
    with pytest.raises(AssumptionError):
        j0_stationary(t, discretize(call_measure(STRIKE)), S0)


@pytest.mark.parametrize("measure", [lambda: discretize(exponential_measure(ATOMS)),
                                     lambda: discretize(call_measure(STRIKE, U=60.0), 16, 8)])
def test_total_matches_tree_least_squares(measure):
    d = measure()
    t = _tri_table()
    c, err2, _, _ = optimal_hedge_by_least_squares(TRI_VALUES, TRI_PROBS, S0,
                                                   lambda s: reconstruct_payoff(d, s))
    rep = j0_total(t, d, S0, terminal="truncated")
    assert rep.j0 == pytest.approx(err2, rel=1e-8)
    assert rep.v0 == pytest.approx(c, rel=1e-10)


def test_full_and_half_row_sums_agree():
    t = discretize_model(ELEC, TradingGrid([0.0, 0.05, 0.13, 0.2, T]))
    d = discretize(call_measure(STRIKE), 16, 8)
    half = j0_total(t, d, S0, pairs=PairEvaluator(d))
    full = j0_total(t, d, S0, pairs=PairEvaluator(d, halve=False))
    assert full.j0 == pytest.approx(half.j0, rel=1e-11)
    assert full.imag_residue < 1e-8 * full.j0


def test_exact_second_moment_on_tree():
    t = _tri_table()
    d = discretize(call_measure(STRIKE, U=400.0), 64, 16)
    prices, pr, _ = enumerate_paths(TRI_VALUES, TRI_PROBS, S0)
    expect = pr @ np.maximum(prices[:, -1] - STRIKE, 0.0) ** 2
    assert exact_second_moment(t, d, S0) == pytest.approx(expect, rel=1e-3)


def test_exact_terminal_swaps_only_the_second_moment():
    t = _tri_table()
    d = discretize(call_measure(STRIKE, U=400.0), 64, 16)
    prices, pr, _ = enumerate_paths(TRI_VALUES, TRI_PROBS, S0)
    truncated_sm = pr @ reconstruct_payoff(d, prices[:, -1]) ** 2
    ex = j0_total(t, d, S0, terminal="exact")
    tr = j0_total(t, d, S0, terminal="truncated")
    assert ex.j0 - tr.j0 == pytest.approx(exact_second_moment(t, d, S0) - truncated_sm, rel=1e-8)


def test_pair_domain_check():
    t = discretize_model(nig_scaled(0.14), TradingGrid.uniform(2, T))
    d = discretize(exponential_measure([(3.5, 1.0)]))
    with pytest.raises(AssumptionError):
        j0_total(t, d, S0)


# --- deterministic strategies -----------------------------------------------

def test_unhedged_position_is_payoff_moments():
    t = _tri_table()
    d = discretize(call_measure(STRIKE, U=400.0), 64, 16)
    prices, pr, _ = enumerate_paths(TRI_VALUES, TRI_PROBS, S0)
    pay = reconstruct_payoff(d, prices[:, -1])
    err = deterministic_strategy_error(t, d, np.zeros((4, d.size)), 0.0, S0, terminal="truncated")
    assert err.bias == pytest.approx(pr @ pay, rel=1e-10)
    assert err.variance == pytest.approx(pr @ pay ** 2 - (pr @ pay) ** 2, rel=1e-8)


def test_strategy_error_matches_tree_enumeration():
    t = _tri_table()
    d = discretize(exponential_measure(ATOMS))
    f, _ = bs_delta_coeffs(t, d, S0)
    prices, pr, _ = enumerate_paths(TRI_VALUES, TRI_PROBS, S0)
    gains = np.zeros(len(pr))
    for k in range(4):
        sp = prices[:, k]
        v = (np.exp(np.multiply.outer(np.log(sp), d.z - 1)) @ (d.w * f[k])).real
        gains += v * (prices[:, k + 1] - sp)
    err = reconstruct_payoff(d, prices[:, -1]) - 1.5 - gains
    rep = deterministic_strategy_error(t, d, f, 1.5, S0)
    assert rep.bias == pytest.approx(pr @ err, rel=1e-10)
    assert rep.variance == pytest.approx(pr @ err ** 2 - (pr @ err) ** 2, rel=1e-9)


def test_bs_coefficients_vanish_at_zero_node():
    d = discretize(exponential_measure([(0.0, 1.0), (1.0, 1.0)]))
    f, _ = bs_delta_coeffs(discretize_model(NIG_BASE, TradingGrid.uniform(3, T)), d, S0)
    np.testing.assert_allclose(f[:, d.z == 0], 0.0)


def test_bs_delta_electricity_uniform():
    t = discretize_model(ELEC, TradingGrid.uniform(10, T))
    d = discretize(call_measure(STRIKE))
    f, v_bs = bs_delta_coeffs(t, d, S0)
    err = deterministic_strategy_error(t, d, f, v_bs, S0)
    assert err.std == pytest.approx(2.6217, rel=0.01)
    assert v_bs == pytest.approx(initial_capital(compute_fs(t, d), S0), rel=0.005)


def test_bs_delta_two_dates_bias():
    t = discretize_model(ELEC, TradingGrid.uniform(2, T))
    d = discretize(call_measure(STRIKE))
    f, v_bs = bs_delta_coeffs(t, d, S0)
    assert deterministic_strategy_error(t, d, f, v_bs, S0).bias == pytest.approx(-0.04, abs=0.04)


@pytest.mark.parametrize("n", [2, 6, 20])
def test_bs_not_better_than_vo_in_gaussian_model(n):
    t = discretize_model(GaussianParams(0.02, 0.3), TradingGrid.uniform(n, 0.5))
    d = discretize(call_measure(STRIKE))
    f, v_bs = bs_delta_coeffs(t, d, S0)
    vo = j0_total(t, d, S0).j0
    assert deterministic_strategy_error(t, d, f, v_bs, S0).variance >= vo * (1 - 1e-8)
    fs = compute_fs(t, d)
    pure = deterministic_strategy_error(t, d, fs_pure_coeffs(fs), initial_capital(fs, S0), S0)
    assert pure.variance >= vo * (1 - 1e-8)


# --- date sensitivities -----------------------------------------------------

@pytest.mark.parametrize("model, measure, terminal", [
    (ELEC, lambda: discretize(call_measure(STRIKE, U=60.0), 16, 8), "auto"),
    (nig_scaled(1.0), lambda: discretize(digital_measure(STRIKE, U=60.0, taper=0.0), 16, 8),
     "truncated"),
    (nig_scaled(0.5), lambda: discretize(put_measure(STRIKE, U=60.0), 16, 8), "exact"),
])
def test_date_gradient_matches_plain_differences(model, measure, terminal):
    d = measure()
    grid = TradingGrid([0.0, 0.04, 0.1, 0.17, 0.21, T])
    h = 1e-5
    j, g = j0_date_gradient(discretize_model(model, grid), d, S0, h, terminal=terminal)
    assert j == pytest.approx(j0_total(discretize_model(model, grid), d, S0,
                                       terminal=terminal).j0, rel=1e-11)
    for i in range(1, grid.n):
        up, dn = grid.dates.copy(), grid.dates.copy()
        up[i] += h
        dn[i] -= h
        jp = j0_total(discretize_model(model, TradingGrid(up)), d, S0, terminal=terminal).j0
        jm = j0_total(discretize_model(model, TradingGrid(dn)), d, S0, terminal=terminal).j0
        assert g[i - 1] == pytest.approx((jp - jm) / (2 * h), rel=1e-6, abs=1e-9 * j / T)
