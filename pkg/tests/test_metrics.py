import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpsim.metrics import (
    KITAEV_FAIL,
    KITAEV_FAIL_DISTANCE,
    AllInformationLostError,
    UndefinedMeanError,
    circular_distance,
    circular_stats,
    distance,
    fidelity,
    fit_error_scaling,
    kitaev_trial_bound,
    majority_vote_update,
    n_min,
    relative_mean_error,
    success_probability,
)


def rand_rho(d, rng):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return r / np.trace(r)


def test_fidelity_of_orthogonal_and_identical_states():
    assert fidelity(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(0)
    rng = np.random.default_rng(0)
    r = rand_rho(4, rng)
    assert fidelity(r, r) == pytest.approx(1, abs=1e-9)


def test_fidelity_pure_state_is_overlap_root():
    psi = np.array([1, 1j]) / math.sqrt(2)
    rho = np.diag([0.7, 0.3])
    assert fidelity(np.outer(psi, psi.conj()), rho) == pytest.approx(math.sqrt(0.5), abs=1e-14)


def test_fidelity_resolves_tiny_infidelity():
    psi = np.array([1.0, 0.0])
    eps = 1e-11
    rho = np.diag([1 - eps, eps])
    assert 1 - fidelity(np.outer(psi, psi), rho) == pytest.approx(eps / 2, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fidelity_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = rand_rho(4, rng), rand_rho(4, rng)
    f = fidelity(a, b)
    assert 0 <= f <= 1
    assert f == pytest.approx(fidelity(b, a), abs=1e-8)


def test_fidelity_normalizes_inputs():
    assert fidelity(2 * np.diag([1, 0]), np.diag([0.5, 0.5])) == pytest.approx(math.sqrt(0.5))


def test_distance_values():
    assert distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(2)
    assert distance(np.eye(2) / 2, np.eye(2) / 2) == 0
    psi = np.array([1, 1]) / math.sqrt(2)
    assert distance(np.diag([1, 0]), np.outer(psi, psi)) == pytest.approx(1)


def test_circular_stats_of_delta_and_wrap():
    bins = np.zeros(8)
    bins[3] = 1
    s = circular_stats(bins)
    assert s.mean == pytest.approx(3 / 8)
    assert s.std == pytest.approx(0, abs=1e-7)
    wrap = np.zeros(8)
    wrap[0] = wrap[7] = 0.5
    assert circular_distance(circular_stats(wrap).mean, 15 / 16) < 1e-12


def test_circular_stats_failures():
    with pytest.raises(UndefinedMeanError):
        circular_stats([0.5, 0.5])
    with pytest.raises(UndefinedMeanError):
        circular_stats([0, 0, 0, 0])
    with pytest.raises(ValueError):
        circular_stats([1, 0], spread="wild")


def test_angular_spread_small_for_narrow_peaks():
    bins = np.zeros(64)
    bins[10:13] = [0.25, 0.5, 0.25]
    c, a = circular_stats(bins, "circular"), circular_stats(bins, "angular")
    assert c.std == pytest.approx(a.std, rel=0.01)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_circular_distance_properties(a, b):
    d = circular_distance(a, b)
    assert 0 <= d <= 0.5
    assert d == pytest.approx(circular_distance(b, a), abs=1e-12)
    assert circular_distance(a + 1, b) == pytest.approx(d, abs=1e-9)


def test_relative_error_and_n_min():
    assert relative_mean_error(0.26, 0.25) == pytest.approx(0.04)
    assert n_min(3, 0.1, 0.5) == pytest.approx(1.28)
    with pytest.raises(AllInformationLostError):
        n_min(3, 0.1, 1.0)


def test_trial_bound_oracle_and_sentinel():
    assert kitaev_trial_bound(0.1, 0.0, 0.0) == pytest.approx(69.84, abs=0.01)
    assert kitaev_trial_bound(0.1, KITAEV_FAIL_DISTANCE, 0.0) == KITAEV_FAIL
    assert kitaev_trial_bound(0.1, 0.0, 1.0) == KITAEV_FAIL
    assert kitaev_trial_bound(0.1, 0.0, 0.5) == pytest.approx(2 * 69.84, abs=0.02)
    with pytest.raises(ValueError):
        kitaev_trial_bound(0.0, 0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.2), st.floats(0, 0.2))
def test_trial_bound_monotone_in_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert kitaev_trial_bound(0.05, lo, 0.1) <= kitaev_trial_bound(0.05, hi, 0.1)


def test_success_probability_brackets_phase():
    bins = np.arange(8) / 28
    assert success_probability(bins, 0.3) == pytest.approx((2 + 3) / 28)
    assert success_probability(bins, 0.95) == pytest.approx((7 + 0) / 28)
    with pytest.raises(ValueError):
        success_probability(bins, 0.3, m=4)


def test_majority_vote_oracle():
    assert majority_vote_update(0.6, 0.4, 3)[0] == pytest.approx(0.648, abs=1e-12)
    assert majority_vote_update(0.6, 0.4, 1) == (0.6, 0.4)
    with pytest.raises(ValueError):
        majority_vote_update(0.6, 0.4, 2)
    with pytest.raises(ValueError):
        majority_vote_update(0.6, 0.6, 3)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.sampled_from([1, 3, 5, 7, 9]))
def test_majority_vote_sums_to_one_and_amplifies(p, n):
    a, b = majority_vote_update(p, 1 - p, n)
    assert a + b == pytest.approx(1, abs=1e-12)
    if p > 0.5:
        assert a >= p - 1e-12


def test_fit_recovers_power_law():
    pts = [(p, 0.4 * p**3) for p in np.logspace(-3, -2, 6)]
    fit = fit_error_scaling(pts)
    assert fit.exponent == pytest.approx(3, abs=1e-9)
    assert fit.coefficient == pytest.approx(0.4, rel=1e-9)


def test_fit_drops_nonpositive_points():
    pts = [(p, p**2) for p in np.logspace(-3, -2, 5)] + [(0.5, 0.0)]
    with pytest.warns(UserWarning):
        fit = fit_error_scaling(pts)
    assert fit.exponent == pytest.approx(2)
    with pytest.raises(ValueError):
        fit_error_scaling([(0.1, 0.1)])
