import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpsim.engine import from_vector, new_state, tensor
from lpsim.fivequbit import build_code
from lpsim.metrics import circular_distance
from lpsim.qpe import (
    AccuracyError,
    EstimationFailure,
    PhaseHistogram,
    QpeConfig,
    alpha_from_probabilities,
    feedback_angle,
    ipea_run,
    kitaev_estimator,
    kitaev_iteration,
    kitaev_run,
    reduced_two_qubit,
    run_iteration,
    initial_sensor,
)

TURN = 2 * math.pi


def test_config_validation():
    for bad in ({"m": 0}, {"repeats": 2}, {"axis": "y"}, {"sensor_state": "0"},
                {"ancilla": "qutrit"}, {"correction": "maybe"}, {"syndrome_ancillas": 2}, {"lps_every": 0}):
        with pytest.raises(ValueError):
            QpeConfig(**bad)


def test_true_phase_sign_follows_eigenvalue():
    assert QpeConfig(theta=TURN * 0.3, axis="x", sensor_state="+").true_phase == pytest.approx(0.3)
    assert QpeConfig(theta=TURN * 0.3, axis="x", sensor_state="-").true_phase == pytest.approx(0.7)
    assert QpeConfig(theta=TURN * 0.3, axis="z", sensor_state="1").true_phase == pytest.approx(0.7)


def test_register_layouts():
    phys = QpeConfig().register
    assert (phys.n_qubits, phys.ancilla, phys.sensor) == (2, (0,), 1)
    log = QpeConfig(ancilla="logical").register
    assert (log.n_qubits, log.sensor, log.syndrome) == (7, 5, (6,))
    four = QpeConfig(ancilla="logical", syndrome_ancillas=4).register
    assert four.syndrome == (6, 7, 8, 9)
    ideal = QpeConfig(ancilla="logical", syndrome_mode="ideal").register
    assert ideal.n_qubits == 6


def test_noise_times_land_on_the_right_qubits():
    reg = QpeConfig(ancilla="logical", ancilla_t2=5.0, sensor_t2=9.0).register
    assert reg.spec.t2[5] == 9.0
    assert set(reg.spec.t2[:5]) == {5.0} and reg.spec.t2[6] == 5.0


def test_feedback_angle():
    assert feedback_angle([]) == 0
    assert feedback_angle([1]) == pytest.approx(-math.pi / 2)
    assert feedback_angle([1, 1]) == pytest.approx(-TURN * 0.375)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_physical_ipea_is_exact_on_representable_phases(m):
    for j in range(2**m):
        h = ipea_run(QpeConfig(m=m, theta=TURN * j / 2**m))
        assert h.bins[j] == pytest.approx(1, abs=1e-9)
        assert h.lost_info == 0


def test_logical_ipea_matches_physical_without_noise():
    for mode in ("ideal", "circuit"):
        cfg = QpeConfig(m=2, theta=TURN / 3, ancilla="logical", syndrome_mode=mode)
        ref = ipea_run(cfg.replace(ancilla="physical"))
        got = ipea_run(cfg)
        assert np.allclose(got.bins, ref.bins, atol=1e-9)
        assert got.lost_info == pytest.approx(0, abs=1e-9)


def test_irrational_phase_peaks_on_neighbouring_bins():
    h = ipea_run(QpeConfig(m=4, theta=TURN / 3, axis="z", sensor_state="0"))
    top = set(np.argsort(h.bins)[-2:])
    assert top == {0b0101, 0b0110}
    assert h.bins.sum() == pytest.approx(1)


def test_majority_vote_sharpens_the_histogram():
    base = QpeConfig(m=3, theta=TURN * 0.3, sensor_t2=30.0)
    p1 = ipea_run(base).bins
    p5 = ipea_run(base.replace(repeats=5)).bins
    assert p5.max() > p1.max()
    assert p5.sum() == pytest.approx(1)


def test_lps_yields_lost_information_under_noise():
    cfg = QpeConfig(m=2, theta=TURN * 0.3, ancilla="logical", ancilla_t2=50.0, syndrome_mode="ideal")
    h = ipea_run(cfg)
    assert 0 < h.lost_info < 1
    assert h.bins.sum() + h.pruned_mass == pytest.approx(1, abs=1e-9)
    phys = ipea_run(cfg.replace(ancilla="physical"))
    assert phys.lost_info == 0


def test_pruning_accounts_for_mass_and_enforces_bound():
    cfg = QpeConfig(m=4, theta=TURN / math.sqrt(3), sensor_t2=20.0, prune=1e-2, pruned_bound=1.0)
    h = ipea_run(cfg)
    assert h.pruned_mass > 0
    assert h.bins.sum() + h.pruned_mass == pytest.approx(1, abs=1e-9)
    with pytest.raises(AccuracyError):
        ipea_run(cfg.replace(pruned_bound=1e-9))


def test_histogram_serialization_round_trip():
    h = ipea_run(QpeConfig(m=2, theta=1.0, sensor_t2=10.0))
    back = PhaseHistogram.from_json(h.to_json())
    assert np.array_equal(back.bins, h.bins) and back.lost_info == h.lost_info
    csv = h.to_csv().splitlines()
    assert csv[0] == "bin,label,probability" and csv[2].startswith("1,01,")


def test_reruns_are_bit_identical():
    cfg = QpeConfig(m=2, theta=1.0, ancilla="logical", correction="ec", ancilla_t2=40.0, syndrome_mode="ideal")
    a = run_iteration(cfg, initial_sensor(cfg), 1, rng=np.random.default_rng(4))
    b = run_iteration(cfg, initial_sensor(cfg), 1, rng=np.random.default_rng(4))
    assert [o.probability for o in a.outcomes] == [o.probability for o in b.outcomes]


def test_ec_mixture_sums_to_one():
    cfg = QpeConfig(m=2, theta=1.0, ancilla="logical", correction="ec", ancilla_t2=40.0, syndrome_mode="ideal")
    res = run_iteration(cfg, initial_sensor(cfg), 0)
    assert sum(o.probability for o in res.outcomes) == pytest.approx(1)
    assert res.retained == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.999))
def test_alpha_inverts_iteration_probabilities(a):
    p_i = (1 + math.cos(TURN * a)) / 2
    p_s = (1 - math.sin(TURN * a)) / 2
    assert circular_distance(alpha_from_probabilities(p_i, p_s), a) < 1e-9


def test_kitaev_iteration_probabilities_follow_cosine():
    phi = 0.3
    cfg = QpeConfig(m=3, theta=TURN * phi)
    for k in (1, 2, 3):
        p0, lost = kitaev_iteration(cfg, k, "I")
        assert p0 == pytest.approx((1 + math.cos(TURN * 2 ** (k - 1) * phi)) / 2, abs=1e-12)
        assert lost == 0
    with pytest.raises(ValueError):
        kitaev_iteration(cfg, 4)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_kitaev_estimator_exact_inputs(m):
    for j in range(2 ** (m + 2)):
        phi = j / 2 ** (m + 2)
        alphas = [(2 ** (k - 1) * phi) % 1 for k in range(1, m + 1)]
        assert kitaev_estimator(alphas) == pytest.approx(phi, abs=1e-12)


def test_kitaev_estimator_rejects_inconsistent_alphas():
    with pytest.raises(EstimationFailure):
        kitaev_estimator([0.375, 0.375])
    with pytest.raises(ValueError):
        kitaev_estimator([0.1], m=2)


def test_kitaev_run_recovers_phase():
    res = kitaev_run(QpeConfig(m=2, theta=TURN * 0.375))
    assert res.estimate == pytest.approx(0.375)
    assert res.lost_info == 0


def test_reduced_two_qubit_of_encoded_product():
    block = build_code()
    v = block.logical_vector(0.6, 0.8)
    s = tensor(from_vector(v), new_state(1, "1"))
    red = reduced_two_qubit(s, block, 5)
    assert red.trace == pytest.approx(1)
    want = np.kron([0.6, 0.8], [0, 1])
    assert np.allclose(red.normalized, np.outer(want, want))
