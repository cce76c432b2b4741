import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from lpsim.engine import ImpossibleBranchError, from_matrix, from_vector, new_state
from lpsim.measure import (
    branch_distribution,
    lost_information,
    lost_information_sum,
    measurement_projector,
    outcome_for_uniform,
    post_select,
    sample_measurement,
)


def ghz_like(weights):
    v = np.sqrt(np.asarray(weights, dtype=complex))
    return from_vector(v / np.linalg.norm(v))


def test_measurement_projector_shape():
    p = measurement_projector({0: 1}, 2).matrix
    assert np.allclose(np.diag(p), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        measurement_projector({2: 0}, 2)
    with pytest.raises(ValueError):
        measurement_projector({0: 2}, 2)


def test_post_select_logs_and_traces_out():
    s = ghz_like([0.1, 0.2, 0.3, 0.4])
    out = post_select(s, {0: 1}, trace_out=True)
    assert out.n_qubits == 1
    assert out.trace_log == pytest.approx((0.7,))
    assert np.allclose(np.diag(out.matrix).real, [3 / 7, 4 / 7])


def test_post_select_impossible_branch():
    with pytest.raises(ImpossibleBranchError):
        post_select(new_state(2), {1: 1})


def test_lost_information_oracle():
    assert lost_information([0.9, 0.8]) == pytest.approx(0.28, abs=1e-15)
    assert lost_information([]) == 0.0
    with pytest.raises(ValueError):
        lost_information([1.2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), max_size=30))
def test_lost_information_two_forms_agree(log):
    assert abs(lost_information(log) - lost_information_sum(log)) < 1e-12


def test_successive_post_selection_multiplies():
    s = ghz_like([0.1, 0.2, 0.3, 0.4])
    a = post_select(post_select(s, {0: 1}), {1: 0})
    assert lost_information(a.trace_log) == pytest.approx(1 - 0.3, abs=1e-12)


def test_branch_distribution_covers_all_outcomes():
    s = ghz_like([0.1, 0.2, 0.3, 0.4])
    br = branch_distribution(s, [1, 0])
    assert [b.bits for b in br] == ["00", "01", "10", "11"]
    assert [b.probability for b in br] == pytest.approx([0.1, 0.3, 0.2, 0.4])
    assert all(b.state.trace_log == () for b in br)
    assert len(branch_distribution(s, [0], prune=0.45)) == 1


def test_outcome_for_uniform_is_inverse_cdf():
    probs = [0.2, 0.5, 0.3]
    assert outcome_for_uniform(probs, 0.0) == 0
    assert outcome_for_uniform(probs, 0.2) == 1
    assert outcome_for_uniform(probs, 0.69) == 1
    assert outcome_for_uniform(probs, 0.999) == 2


def test_sampling_converges_to_born_rule():
    rng = np.random.default_rng(12)
    s = ghz_like([0.1, 0.2, 0.3, 0.4])
    counts = {"00": 0, "01": 0, "10": 0, "11": 0}
    for _ in range(4000):
        bits, post = sample_measurement(s, [0, 1], rng)
        counts[bits] += 1
    assert post.trace_log == ()
    _, pval = chisquare(list(counts.values()), [400, 800, 1200, 1600])
    assert pval > 1e-3


def test_sampling_is_reproducible():
    rho = np.diag([0.25, 0.25, 0.5, 0]).astype(complex)
    a = [sample_measurement(from_matrix(rho), [0, 1], np.random.default_rng(7))[0] for _ in range(5)]
    b = [sample_measurement(from_matrix(rho), [0, 1], np.random.default_rng(7))[0] for _ in range(5)]
    assert a == b
    assert all(x != "11" for x in a)


def test_sampled_collapse_is_normalized():
    plus = from_vector(np.array([1, 1]) / math.sqrt(2))
    bits, out = sample_measurement(plus, [0], np.random.default_rng(0))
    assert out.trace() == pytest.approx(1)
    assert out.matrix[int(bits), int(bits)] == pytest.approx(1)
