"""Iterative phase estimation (Kitaev's two-basis variant and IPEA) on physical or logical ancillas.

Register layouts:

* physical ancilla: ``[ancilla, sensor]``
* logical ancilla: ``[block0..block4, sensor, syndrome ancilla(s)]``

The signal is ``U = exp(i theta sigma_axis)``; its eigenvalue on a sensor
eigenstate with ``sigma_axis`` eigenvalue ``lam`` is ``exp(2 pi i phi)`` with
``phi = lam * theta / 2pi (mod 1)``.  Between iterations only the sensor's
2x2 state is carried over; the ancilla is freshly prepared.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .engine import (
    DensityState,
    from_vector,
    new_state,
    partial_trace,
    project_diagonal,
    project_local,
    tensor,
)
from .fivequbit import (
    CodeBlock,
    build_code,
    correction_branches,
    logical_controlled_rotation,
    logical_h,
    logical_rz,
    logical_s,
    lps,
    parity_projector,
    sample_branch,
)
from .gates import Circuit, controlled_signal, run_gate_step, standard_gate
from .measure import BRANCH_ZERO, Branch, branch_distribution
from .metrics import majority_vote_update
from .noise import NoiseSpec

SENSOR_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
}
_EIGENVALUE = {("z", "0"): 1, ("z", "1"): -1, ("x", "+"): 1, ("x", "-"): -1}


class AccuracyError(RuntimeError):
    """Pruned probability mass exceeded the configured bound."""


class EstimationFailure(RuntimeError):
    """The Kitaev consistency sweep found no admissible digit."""


@dataclass(frozen=True)
class QpeConfig:
    """Everything one phase-estimation run needs.

    Times are in units of the gate time; ``math.inf`` switches a process off.
    ``correction="lps"`` post-selects the trivial syndrome, ``"ec"`` applies
    one round of error correction, ``"none"`` does neither.  Only logical
    ancillas use it.
    """

    m: int = 4
    theta: float = 2 * math.pi / 3
    axis: str = "x"
    sensor_state: str = "+"
    ancilla: str = "physical"
    correction: str = "lps"
    sps: bool = False
    accelerated: bool = False
    repeats: int = 1
    ancilla_t1: float = math.inf
    ancilla_t2: float = math.inf
    sensor_t1: float = math.inf
    sensor_t2: float = math.inf
    gate_time: float = 1.0
    n_sub: int = 20
    idle_noise: bool = True
    syndrome_mode: str = "circuit"
    syndrome_ancillas: int = 1
    h_depth: int = 10
    rz_depth: int = 3
    lps_every: int = 1
    prune: float = 0.0
    pruned_bound: float = 1e-6
    ec_trajectories: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.repeats < 1 or self.repeats % 2 == 0:
            raise ValueError("repeats must be a positive odd integer")
        if self.axis not in ("x", "z"):
            raise ValueError("axis must be 'x' or 'z'")
        if (self.axis, self.sensor_state) not in _EIGENVALUE:
            raise ValueError(f"sensor state {self.sensor_state!r} is not an eigenstate of sigma_{self.axis}")
        if self.ancilla not in ("physical", "logical"):
            raise ValueError("ancilla must be 'physical' or 'logical'")
        if self.correction not in ("lps", "ec", "none"):
            raise ValueError("correction must be 'lps', 'ec' or 'none'")
        if self.syndrome_ancillas not in (1, 4):
            raise ValueError("syndrome_ancillas must be 1 or 4")
        if self.lps_every < 1:
            raise ValueError("lps_every must be >= 1")

    @property
    def true_phase(self) -> float:
        lam = _EIGENVALUE[(self.axis, self.sensor_state)]
        return (lam * self.theta / (2 * math.pi)) % 1.0

    def replace(self, **changes) -> "QpeConfig":
        return QpeConfig(**{**asdict(self), **changes})

    @cached_property
    def register(self) -> "Register":
        return Register.build(self)


@dataclass(frozen=True, eq=False)
class Register:
    n_qubits: int
    ancilla: tuple[int, ...]  # the phase-readout qubit(s): one physical, or five in the block
    sensor: int
    syndrome: tuple[int, ...]
    block: CodeBlock | None
    spec: NoiseSpec

    @classmethod
    def build(cls, cfg: QpeConfig) -> "Register":
        if cfg.ancilla == "physical":
            anc, sensor, synd, block = (0,), 1, (), None
        else:
            block = build_code((0, 1, 2, 3, 4))
            anc, sensor = block.qubits, 5
            synd = tuple(range(6, 6 + cfg.syndrome_ancillas)) if cfg.syndrome_mode == "circuit" else ()
        n = 2 if block is None else 6 + len(synd)
        t1 = [cfg.ancilla_t1] * n
        t2 = [cfg.ancilla_t2] * n
        t1[sensor], t2[sensor] = cfg.sensor_t1, cfg.sensor_t2
        spec = NoiseSpec(tuple(t1), tuple(t2), cfg.gate_time, cfg.n_sub, cfg.idle_noise)
        return cls(n, anc, sensor, synd, block, spec)

    @property
    def logical(self) -> bool:
        return self.block is not None


# -- circuit pieces -----------------------------------------------------------

def _hadamard(reg: Register, cfg: QpeConfig) -> Circuit:
    if reg.logical:
        return logical_h(reg.block, reg.n_qubits, cfg.h_depth)
    return Circuit.sequential(reg.n_qubits, [standard_gate("H", reg.ancilla)])


def _rz(reg: Register, cfg: QpeConfig, omega: float) -> Circuit:
    if reg.logical:
        return logical_rz(reg.block, omega, reg.n_qubits, cfg.rz_depth)
    return Circuit.sequential(reg.n_qubits, [standard_gate("RZ", reg.ancilla, omega)])


def _phase_s(reg: Register, cfg: QpeConfig) -> Circuit:
    if reg.logical:
        return logical_s(reg.block, reg.n_qubits, cfg.rz_depth)
    return Circuit.sequential(reg.n_qubits, [standard_gate("S", reg.ancilla)])


def controlled_power(reg: Register, cfg: QpeConfig, power: int) -> Circuit:
    """Controlled ``U**(2**power)`` from the (logical or physical) ancilla onto the sensor."""
    if not reg.logical:
        return controlled_signal(power, cfg.theta, cfg.axis, cfg.accelerated, reg.ancilla[0], reg.sensor, reg.n_qubits)
    # exp(i theta sigma) = R_sigma(-2 theta)
    if cfg.accelerated:
        return logical_controlled_rotation(reg.block, reg.sensor, -2 * cfg.theta * 2**power, cfg.axis, reg.n_qubits)
    return logical_controlled_rotation(reg.block, reg.sensor, -2 * cfg.theta, cfg.axis, reg.n_qubits) * (2**power)


def _run(state: DensityState, circuit: Circuit, spec: NoiseSpec) -> DensityState:
    for step in circuit.steps:
        state = run_gate_step(state, step, spec)
    return state


def initial_sensor(cfg: QpeConfig) -> np.ndarray:
    v = SENSOR_STATES[cfg.sensor_state]
    return np.outer(v, v.conj())


def prepare(reg: Register, sensor_rho: np.ndarray) -> DensityState:
    """Ancilla in (logical) ``|0>``, sensor in ``sensor_rho``, syndrome ancillas in ``|0>``."""
    sensor = DensityState(1, np.asarray(sensor_rho, dtype=complex))
    if not reg.logical:
        return tensor(new_state(1), sensor)
    parts = [from_vector(reg.block.codeword_0), sensor]
    if reg.syndrome:
        parts.append(new_state(len(reg.syndrome)))
    return tensor(*parts)


def _sps(state: DensityState, reg: Register, cfg: QpeConfig) -> DensityState:
    v = SENSOR_STATES[cfg.sensor_state]
    return project_local(state, np.outer(v, v.conj()), [reg.sensor])


@dataclass(frozen=True, eq=False)
class Outcome:
    bit: int
    probability: float  # among surviving (post-selected) runs
    sensor: np.ndarray  # normalized 2x2 sensor state conditioned on the bit


def pre_measurement_states(
    cfg: QpeConfig,
    sensor_rho: np.ndarray,
    power: int,
    omega: float = 0.0,
    kitaev_k: str | None = None,
    digit_index: int = 0,
) -> list[tuple[float, DensityState]]:
    """States right before the ancilla readout, as ``(weight, state)`` pairs.

    One pair normally; error correction returns its full syndrome tree.
    Post-selections along the way are logged in each state's ``trace_log``.
    """
    reg, spec = cfg.register, cfg.register.spec
    state = prepare(reg, sensor_rho)
    state = _run(state, _hadamard(reg, cfg), spec)
    state = _run(state, controlled_power(reg, cfg, power), spec)
    if omega != 0.0:
        state = _run(state, _rz(reg, cfg, omega), spec)
    if kitaev_k == "S":
        state = _run(state, _phase_s(reg, cfg), spec)
    elif kitaev_k not in (None, "I"):
        raise ValueError("K must be 'I' or 'S'")
    branches = [(1.0, state)]
    if reg.logical and digit_index % cfg.lps_every == 0:
        mode = cfg.syndrome_mode
        anc = reg.syndrome or None
        if cfg.correction == "lps":
            branches = [(1.0, lps(state, reg.block, mode, spec, anc))]
        elif cfg.correction == "ec":
            branches = [(b.probability, b.state) for b in correction_branches(state, reg.block, mode, spec, anc)]
    out = []
    for w, st in branches:
        st = _run(st, _hadamard(reg, cfg), spec)
        if cfg.sps:
            st = _sps(st, reg, cfg)
        out.append((w, st))
    return out


def readout(state: DensityState, reg: Register) -> list[Outcome]:
    """Ancilla outcome distribution and the conditioned sensor state per outcome."""
    if not reg.logical:
        return [
            Outcome(int(b.bits), b.probability, partial_trace(b.state, [reg.sensor]).matrix)
            for b in branch_distribution(state, [reg.ancilla[0]])
        ]
    rest = state.n_qubits - 5
    out = []
    for bit in (0, 1):
        diag = np.repeat(parity_projector(bit), 2**rest)
        weight = float(np.sum(state.probabilities() * diag)) / state.trace()
        if weight <= BRANCH_ZERO:
            continue
        collapsed = project_diagonal(state, diag, floor=-np.inf, log=False)
        out.append(Outcome(bit, weight, partial_trace(collapsed, [reg.sensor]).matrix))
    return out


@dataclass(frozen=True, eq=False)
class IterationResult:
    outcomes: list[Outcome]
    retained: float


def run_iteration(
    cfg: QpeConfig,
    sensor_rho: np.ndarray,
    power: int,
    omega: float = 0.0,
    kitaev_k: str | None = None,
    digit_index: int = 0,
    rng: np.random.Generator | None = None,
) -> IterationResult:
    """One iteration down to the readout distribution.

    With error correction a single syndrome trajectory is sampled from
    ``rng`` (or the exact mixture over syndromes is used when ``rng`` is None).
    """
    reg = cfg.register
    states = pre_measurement_states(cfg, sensor_rho, power, omega, kitaev_k, digit_index)
    if len(states) > 1 and rng is not None:
        st, _ = sample_branch([Branch(str(i), w, s) for i, (w, s) in enumerate(states)], rng.random())
        states = [(1.0, st)]
    if len(states) == 1:
        st = states[0][1]
        return IterationResult(readout(st, reg), st.retained)
    total = sum(w for w, _ in states)
    mats = sum(w / total * s.matrix for w, s in states)
    mixed = DensityState(states[0][1].n_qubits, mats, states[0][1].trace_log)
    return IterationResult(readout(mixed, reg), mixed.retained)


# -- histograms ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseHistogram:
    bins: np.ndarray
    lost_info: float
    m: int
    pruned_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "label", "probability"])
        for i, p in enumerate(self.bins):
            w.writerow([i, format(i, f"0{self.m}b"), repr(float(p))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.m,
                "bins": [float(p) for p in self.bins],
                "lost_info": self.lost_info,
                "pruned_mass": self.pruned_mass,
                "meta": self.meta,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PhaseHistogram":
        d = json.loads(text)
        return cls(np.array(d["bins"]), d["lost_info"], d["m"], d["pruned_mass"], d.get("meta", {}))


def feedback_angle(later_bits: Sequence[int]) -> float:
    """``-2 pi (0.0 x_{k+1} x_{k+2} ...)`` for the bits measured after digit k."""
    return -2 * math.pi * sum(x * 2.0 ** -(j + 2) for j, x in enumerate(later_bits))


def ipea_run(cfg: QpeConfig) -> PhaseHistogram:
    """Exact measurement-tree evaluation of IPEA, least significant digit first."""
    # node: (bits measured so far for digits k+1..m, weight, retained product, sensor state)
    nodes = [((), 1.0, 1.0, initial_sensor(cfg))]
    pruned = 0.0
    for idx, k in enumerate(range(cfg.m, 0, -1)):
        children = []
        for later, weight, kept, sensor in nodes:
            res = run_iteration(cfg, sensor, k - 1, feedback_angle(later), digit_index=idx)
            probs = {o.bit: o.probability for o in res.outcomes}
            p0, p1 = probs.get(0, 0.0), probs.get(1, 0.0)
            s = p0 + p1
            p0, p1 = majority_vote_update(p0 / s, p1 / s, cfg.repeats)
            voted = {0: p0, 1: p1}
            for o in res.outcomes:
                w = weight * voted[o.bit]
                if w <= cfg.prune:
                    pruned += w
                    continue
                children.append(((o.bit,) + later, w, kept * res.retained, o.sensor))
        nodes = children
    bins = np.zeros(2**cfg.m)
    kept_mass = 0.0
    for bits, weight, kept, _ in nodes:
        bins[int("".join(map(str, bits)), 2)] += weight
        kept_mass += weight * kept
    total = bins.sum()
    if pruned > cfg.pruned_bound:
        raise AccuracyError(f"pruned mass {pruned:.3e} exceeds bound {cfg.pruned_bound:.1e}")
    lost = 1.0 - kept_mass / total if total > 0 else 1.0
    return PhaseHistogram(bins, float(min(max(lost, 0.0), 1.0)), cfg.m, pruned, {"true_phase": cfg.true_phase})


# -- Kitaev -------------------------------------------------------------------

def kitaev_iteration(cfg: QpeConfig, k: int, kitaev_k: str = "I") -> tuple[float, float]:
    """``(P(0), lost_info)`` for digit ``k`` with a fresh sensor."""
    if not 1 <= k <= cfg.m:
        raise ValueError("k must satisfy 1 <= k <= m")
    res = run_iteration(cfg, initial_sensor(cfg), k - 1, 0.0, kitaev_k)
    p0 = sum(o.probability for o in res.outcomes if o.bit == 0)
    return float(p0), 1.0 - res.retained


def alpha_from_probabilities(p_i: float, p_s: float) -> float:
    return (math.atan2(1 - 2 * p_s, 2 * p_i - 1) / (2 * math.pi)) % 1.0


def _circ(a: float) -> float:
    a %= 1.0
    return min(a, 1.0 - a)


def kitaev_estimator(alphas: Sequence[float], m: int | None = None) -> float:
    """Reconcile ``alpha_k ~ 2**(k-1) phi`` (k = 1..m) into an (m+2)-bit phase."""
    m = len(alphas) if m is None else m
    if len(alphas) != m:
        raise ValueError("need exactly m alpha values")
    octant = int(round((alphas[m - 1] % 1.0) * 8)) % 8
    bits = [0] * (m + 2)  # bits[j-1] holds phi_j
    bits[m - 1], bits[m], bits[m + 1] = (octant >> 2) & 1, (octant >> 1) & 1, octant & 1
    for j in range(m - 1, 0, -1):
        tail = bits[j] / 4 + bits[j + 1] / 8
        a = alphas[j - 1]
        if _circ(tail - a) < 0.25:
            bits[j - 1] = 0
        elif _circ(0.5 + tail - a) < 0.25:
            bits[j - 1] = 1
        else:
            raise EstimationFailure(f"no consistent digit {j} for alpha={a:.4f}")
    return sum(b * 2.0 ** -(i + 1) for i, b in enumerate(bits))


@dataclass(frozen=True)
class KitaevResult:
    estimate: float
    p_i: tuple[float, ...]
    p_s: tuple[float, ...]
    alphas: tuple[float, ...]
    lost_info: float


def kitaev_run(cfg: QpeConfig) -> KitaevResult:
    p_i, p_s, kept = [], [], 1.0
    for k in range(1, cfg.m + 1):
        pi, li = kitaev_iteration(cfg, k, "I")
        ps, ls = kitaev_iteration(cfg, k, "S")
        p_i.append(pi)
        p_s.append(ps)
        kept *= (1 - li) * (1 - ls)
    alphas = [alpha_from_probabilities(a, b) for a, b in zip(p_i, p_s)]
    return KitaevResult(kitaev_estimator(alphas, cfg.m), tuple(p_i), tuple(p_s), tuple(alphas), 1 - kept)


# -- two-qubit reduction ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedState:
    raw: np.ndarray
    trace: float

    @property
    def normalized(self) -> np.ndarray:
        if self.trace <= 0:
            raise ValueError("reduced state has no weight in the code space")
        return self.raw / self.trace


def reduced_two_qubit(state: DensityState, block: CodeBlock, sensor: int) -> ReducedState:
    """``<x_L y| rho |x'_L y'>`` over the code basis and the sensor (not trace preserving)."""
    keep = list(block.qubits) + [sensor]
    rho = partial_trace(state, keep).matrix if state.n_qubits > 6 or keep != list(range(6)) else state.matrix
    v = np.kron(block.basis, np.eye(2))
    raw = v.conj().T @ rho @ v
    return ReducedState(raw, float(np.trace(raw).real))


def two_qubit_view(state: DensityState, reg: Register) -> ReducedState:
    """(ancilla, sensor) state for either register layout."""
    if reg.logical:
        return reduced_two_qubit(state, reg.block, reg.sensor)
    red = partial_trace(state, [reg.ancilla[0], reg.sensor]).matrix
    return ReducedState(red, float(np.trace(red).real))


def ideal_iteration_state(cfg: QpeConfig, power: int, kitaev_k: str | None = None, omega: float = 0.0) -> np.ndarray:
    """Noiseless physical-ancilla pre-measurement state for the same iteration."""
    ideal = cfg.replace(
        ancilla="physical", ancilla_t1=math.inf, ancilla_t2=math.inf, sensor_t1=math.inf, sensor_t2=math.inf, sps=False
    )
    ((_, st),) = pre_measurement_states(ideal, initial_sensor(ideal), power, omega, kitaev_k)
    return st.matrix
