"""T1/T2 Kraus decoherence and the single-shot depolarizing channel."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .engine import DensityState, basis_bits, conjugate_local, new_state

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-qubit relaxation/dephasing times plus gate timing.

    Times share the unit of ``gate_time``; ``math.inf`` disables a process.
    ``idle_noise=False`` restricts decoherence to qubits targeted in the
    current gate-step.
    """

    t1: tuple[float, ...]
    t2: tuple[float, ...]
    gate_time: float = 1.0
    n_sub: int = 20
    idle_noise: bool = True

    def __post_init__(self):
        object.__setattr__(self, "t1", tuple(float(t) for t in self.t1))
        object.__setattr__(self, "t2", tuple(float(t) for t in self.t2))
        if len(self.t1) != len(self.t2):
            raise ValueError("t1 and t2 must list the same number of qubits")
        if any(t <= 0 for t in self.t1 + self.t2):
            raise ValueError("T1 and T2 must be positive")
        if self.n_sub < 1 or self.gate_time <= 0:
            raise ValueError("need n_sub >= 1 and gate_time > 0")

    @classmethod
    def uniform(cls, n: int, t1: float = math.inf, t2: float = math.inf, **kwargs) -> "NoiseSpec":
        return cls((t1,) * n, (t2,) * n, **kwargs)

    @classmethod
    def noiseless(cls, n: int, **kwargs) -> "NoiseSpec":
        return cls.uniform(n, **kwargs)

    @property
    def n_qubits(self) -> int:
        return len(self.t1)

    @property
    def dt(self) -> float:
        return self.gate_time / self.n_sub

    def with_times(self, qubits: Iterable[int], t1: float | None = None, t2: float | None = None) -> "NoiseSpec":
        t1s, t2s = list(self.t1), list(self.t2)
        for q in qubits:
            if t1 is not None:
                t1s[q] = t1
            if t2 is not None:
                t2s[q] = t2
        return replace(self, t1=tuple(t1s), t2=tuple(t2s))

    def noisy_qubits(self, active: Iterable[int] | None = None) -> tuple[int, ...]:
        """Qubits that will actually receive a channel."""
        pool = range(self.n_qubits) if active is None else active
        return tuple(sorted(q for q in set(pool) if math.isfinite(self.t1[q]) or math.isfinite(self.t2[q])))


def _rate(dt: float, t: float) -> float:
    return 0.0 if math.isinf(t) else -math.expm1(-dt / t)


def substep_probs(spec: NoiseSpec, qubit: int) -> tuple[float, float]:
    """``(p_decay, p_dephase)`` for one substep of length ``dt``."""
    return _rate(spec.dt, spec.t1[qubit]), _rate(spec.dt, spec.t2[qubit])


def step_probs(spec: NoiseSpec, qubit: int) -> tuple[float, float]:
    """Probabilities equivalent to ``n_sub`` composed substeps (a whole gate time)."""
    return _rate(spec.gate_time, spec.t1[qubit]), _rate(spec.gate_time, spec.t2[qubit])


def _check_p(p: float, upper: float = 1.0) -> None:
    if not (0.0 <= p <= upper):
        raise ValueError(f"probability {p} outside [0, {upper}]")


def damping_kraus(p: float) -> tuple[np.ndarray, np.ndarray]:
    e1 = math.sqrt(1 - p) / 2 * (IDENTITY - SIGMA_Z) + 0.5 * (IDENTITY + SIGMA_Z)
    e2 = math.sqrt(p) / 2 * (SIGMA_X + 1j * SIGMA_Y)
    return e1, e2


def _damp_matrix(rho: np.ndarray, n: int, qubit: int, p: float) -> np.ndarray:
    e1, e2 = damping_kraus(p)
    return conjugate_local(rho, n, e1, [qubit]) + conjugate_local(rho, n, e2, [qubit])


def dephasing_mask(n: int, factors: dict[int, float]) -> np.ndarray:
    """Elementwise multiplier scaling coherences between differing bits of each qubit."""
    bits = basis_bits(n)
    mask = np.ones((2**n, 2**n))
    for q, f in factors.items():
        if f != 1.0:
            differ = bits[:, q][:, None] != bits[:, q][None, :]
            mask = np.where(differ, mask * f, mask)
    return mask


def apply_amplitude_damping(state: DensityState, qubit: int, p_decay: float) -> DensityState:
    """``rho -> E1 rho E1^dag + E2 rho E2^dag`` on ``qubit``."""
    _check_p(p_decay)
    if p_decay == 0.0:
        return state
    return state.evolve(_damp_matrix(state.matrix, state.n_qubits, qubit, p_decay))


def apply_dephasing(state: DensityState, qubit: int, p_dephase: float) -> DensityState:
    """``rho -> (1 - p/2) rho + (p/2) Z rho Z`` on ``qubit``."""
    _check_p(p_dephase)
    if p_dephase == 0.0:
        return state
    zrz = conjugate_local(state.matrix, state.n_qubits, SIGMA_Z, [qubit])
    return state.evolve((1 - p_dephase / 2) * state.matrix + (p_dephase / 2) * zrz)


def apply_depolarizing(state: DensityState, qubit: int, p: float) -> DensityState:
    """``rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)``.

    Completely positive for ``p <= 1``; ``p = 3/4`` is the fully mixing point.
    Values above 3/4 are accepted with a warning since they over-rotate past
    the maximally mixed state.
    """
    if p < 0:
        raise ValueError(f"depolarizing probability {p} < 0")
    if p > 1:
        raise ValueError(f"depolarizing probability {p} > 1")
    if p > 0.75:
        warnings.warn(f"depolarizing probability {p} beyond the fully mixing point 3/4", stacklevel=2)
    if p == 0.0:
        return state
    n, rho = state.n_qubits, state.matrix
    out = (1 - p) * rho
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        out = out + (p / 3) * conjugate_local(rho, n, s, [qubit])
    return state.evolve(out)


def decohere_matrix(rho: np.ndarray, n: int, probs: dict[int, tuple[float, float]]) -> np.ndarray:
    """Damping then dephasing on each qubit in ``probs`` (``qubit -> (p_decay, p_dephase)``)."""
    for q in sorted(probs):
        p_dec, p_deph = probs[q]
        if p_dec > 0:
            rho = _damp_matrix(rho, n, q, p_dec)
        if p_deph > 0:
            zrz = conjugate_local(rho, n, SIGMA_Z, [q])
            rho = (1 - p_deph / 2) * rho + (p_deph / 2) * zrz
    return rho


def decohere_all(state: DensityState, spec: NoiseSpec, active_qubits: Iterable[int] | None = None) -> DensityState:
    """One substep of damping then dephasing on every active qubit."""
    probs = {q: substep_probs(spec, q) for q in spec.noisy_qubits(active_qubits)}
    if not probs:
        return state
    return state.evolve(decohere_matrix(state.matrix, state.n_qubits, probs))


def worst_case_gate_fidelity(spec: NoiseSpec, noise_kind: str, qubit: int = 0) -> float:
    """Fidelity after one idle gate-step from the state most hurt by ``noise_kind``.

    ``|+>`` for dephasing (only T2 acts), ``|1>`` for damping (only T1 acts).
    """
    from .metrics import fidelity

    if noise_kind == "dephasing":
        single = NoiseSpec((math.inf,), (spec.t2[qubit],), spec.gate_time, spec.n_sub)
        start = new_state(1, "0")
        start = start.evolve(np.full((2, 2), 0.5, dtype=complex))
    elif noise_kind == "damping":
        single = NoiseSpec((spec.t1[qubit],), (math.inf,), spec.gate_time, spec.n_sub)
        start = new_state(1, "1")
    else:
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    state = start
    for _ in range(single.n_sub):
        state = decohere_all(state, single)
    return fidelity(state.matrix, start.matrix)


def dephasing_time_for_fidelity(fid: float, gate_time: float = 1.0) -> float:
    """T2 whose worst-case single-gate fidelity equals ``fid`` (inverse of the closed form)."""
    if not (0.5**0.5 < fid <= 1.0):
        raise ValueError("dephasing fidelity must lie in (1/sqrt(2), 1]")
    if fid == 1.0:
        return math.inf
    return gate_time / -math.log(2 * fid * fid - 1)


def damping_time_for_fidelity(fid: float, gate_time: float = 1.0) -> float:
    """T1 whose worst-case single-gate fidelity equals ``fid``."""
    if not (0.0 < fid <= 1.0):
        raise ValueError("damping fidelity must lie in (0, 1]")
    if fid == 1.0:
        return math.inf
    return gate_time / (-2 * math.log(fid))


def time_for_fidelity(fid: float, noise_kind: str, gate_time: float = 1.0) -> float:
    if noise_kind == "dephasing":
        return dephasing_time_for_fidelity(fid, gate_time)
    if noise_kind == "damping":
        return damping_time_for_fidelity(fid, gate_time)
    raise ValueError(f"unknown noise kind {noise_kind!r}")


def depolarize_all(state: DensityState, qubits: Sequence[int], p: float) -> DensityState:
    for q in qubits:
        state = apply_depolarizing(state, q, p)
    return state
