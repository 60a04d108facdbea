from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vohedge import (NumericsError, ParameterError, call_measure, digital_measure, discretize,
                     exponential_measure, put_measure, reconstruct_payoff)
from vohedge.payoff_measures import DiscretizedMeasure

from conftest import STRIKE


def test_call_reconstruction_far_from_strike():
    d = discretize(call_measure(STRIKE, U=200.0))
    assert reconstruct_payoff(d, 120.0) == pytest.approx(21.0, abs=5e-3)
    assert reconstruct_payoff(d, 50.0) == pytest.approx(0.0, abs=1e-3)


@pytest.mark.xfail(strict=True, reason="truncating the call kernel at U=200 leaves a "
                                       "tail of order 1e-2 next to the strike")
def test_call_reconstruction_at_the_money_to_1e4():
    d = discretize(call_measure(STRIKE, R=0.5, U=200.0))
    assert reconstruct_payoff(d, 100.0) == pytest.approx(1.0, abs=1e-4)


def test_call_reconstruction_converges_with_truncation():
    errs = [abs(reconstruct_payoff(discretize(call_measure(STRIKE, U=u), 128), 100.0) - 1.0)
            for u in (200.0, 800.0, 3200.0)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 2e-3


def test_reconstruction_vanishes_near_zero():
    # the finite node sum decays like s^R with R = 0.5
    d = discretize(call_measure(STRIKE))
    v6, v10 = abs(reconstruct_payoff(d, 1e-6)), abs(reconstruct_payoff(d, 1e-10))
    assert v10 < 1e-7 and v10 < 2e-2 * v6


def test_real_support_of_call():
    assert call_measure(STRIKE).real_support == {0.5, 1.0}


def test_put_reconstruction():
    d = discretize(put_measure(STRIKE, U=400.0))
    assert reconstruct_payoff(d, 50.0) == pytest.approx(49.0, abs=1e-3)
    assert reconstruct_payoff(d, 120.0) == pytest.approx(0.0, abs=1e-3)


@pytest.mark.parametrize("s", [50.0, 80.0, 150.0, 300.0])
def test_put_call_parity(s):
    c = discretize(call_measure(STRIKE, U=400.0))
    p = discretize(put_measure(STRIKE, U=400.0))
    assert reconstruct_payoff(c, s) - reconstruct_payoff(p, s) - (s - STRIKE) == pytest.approx(
        0.0, abs=1e-3)


def test_digital_at_strike_tends_to_half():
    vals = [reconstruct_payoff(discretize(digital_measure(STRIKE, U=u, taper=0.0), 128), STRIKE)
            for u in (100.0, 200.0, 400.0)]
    errs = [abs(v - 0.5) for v in vals]
    assert errs[2] < errs[1] < errs[0]


@pytest.mark.parametrize("s, expect", [(2 * STRIKE, 1.0), (STRIKE / 2, 0.0), (150.0, 1.0)])
def test_digital_far_from_strike(s, expect):
    d = discretize(digital_measure(STRIKE))
    assert reconstruct_payoff(d, s) == pytest.approx(expect, abs=1e-3)


def test_atoms_pass_through():
    m = exponential_measure([(0.5 + 1j, 0.2 - 0.1j), (0.5 - 1j, 0.2 + 0.1j), (2.0, 1.0)])
    d = discretize(m)
    assert d.size == 3
    np.testing.assert_array_equal(np.sort_complex(d.z), np.sort_complex(np.array([0.5 + 1j, 0.5 - 1j, 2.0])))


@pytest.mark.parametrize("panels, order", [(8, 4), (32, 16), (5, 7)])
def test_node_count(panels, order):
    d = discretize(call_measure(STRIKE), panels, order)
    assert d.size == 1 + panels * order


def test_panel_refinement_halves_error():
    s = np.array([80.0, 99.0, 100.0, 120.0])
    m = call_measure(STRIKE, U=100.0)
    ref = reconstruct_payoff(discretize(m, 512, 16), s)
    errs = [np.max(np.abs(reconstruct_payoff(discretize(m, p, 4), s) - ref)) for p in (4, 8, 16)]
    floor = 1e-11
    assert errs[1] <= max(0.5 * errs[0], floor)
    assert errs[2] <= max(0.5 * errs[1], floor)


def test_conjugate_closure_enforced():
    with pytest.raises(NumericsError):
        DiscretizedMeasure(np.array([0.5 + 1j]), np.array([1.0 + 0j]), exponential_measure([(1.0, 1.0)]))


def test_square_measure_reconstructs_squared_payoff():
    d = discretize(call_measure(STRIKE, U=400.0))
    s = np.array([60.0, 130.0])
    assert reconstruct_payoff(d.square, s) == pytest.approx(
        np.maximum(s - STRIKE, 0.0) ** 2, abs=0.05)


@pytest.mark.parametrize("bad", [lambda: call_measure(-1.0), lambda: call_measure(STRIKE, R=1.5),
                                 lambda: put_measure(STRIKE, R=0.5),
                                 lambda: digital_measure(STRIKE, R=-0.5),
                                 lambda: exponential_measure([])])
def test_constructor_validation(bad):
    with pytest.raises(ParameterError):
        bad()


def test_reconstruction_needs_positive_prices():
    with pytest.raises(ParameterError):
        reconstruct_payoff(discretize(call_measure(STRIKE)), 0.0)


@given(st.floats(-2.0, 3.0), st.floats(0.1, 5.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
       st.floats(1.0, 300.0))
def test_atomic_reconstruction_is_exact(re, im, wr, wi, s):
    z = complex(re, im)
    w = complex(wr, wi)
    d = discretize(exponential_measure([(z, w), (z.conjugate(), w.conjugate())]))
    expect = 2 * (w * s ** z).real
    assert reconstruct_payoff(d, s) == pytest.approx(expect, rel=1e-12, abs=1e-12 * abs(s ** z))


@given(st.floats(1.0, 400.0))
def test_call_reconstruction_is_real_and_bounded(s):
    d = discretize(call_measure(STRIKE, U=200.0), 32, 8)
    v = reconstruct_payoff(d, s)
    assert abs(v - max(s - STRIKE, 0.0)) < 0.2
