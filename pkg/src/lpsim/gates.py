"""Gate library and gate-step evolution interleaving Hamiltonian dynamics with decoherence.

A gate ``G`` is stored through a Hermitian generator ``H_G`` with
``G = exp(i H_G)``.  A gate-step lasting one gate time is split into
``n_sub`` substeps; each substep applies one decoherence step to every noisy
qubit and then ``exp(i H dt / T_g)`` with ``H`` the sum of the step's
generators.

:func:`run_gate_step` evaluates this exactly but factorized: channels on
different qubits commute, and a gate commutes with noise on qubits outside
its support, so each gate touching noisy qubits becomes one cached
superoperator on its own support, noiseless gates are applied once, and
idle qubits receive the composed full-step channel.
:func:`run_gate_step_reference` is the literal full-register loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import schur

from .engine import DensityState, QubitOperator, apply_unitary, conjugate_local, embed, superop_local
from .noise import (
    IDENTITY,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    NoiseSpec,
    damping_kraus,
    decohere_all,
    dephasing_mask,
    step_probs,
    substep_probs,
)

# Gates on at most this many qubits get a cached Liouville superoperator.
SUPEROP_MAX_QUBITS = 3

_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def expm_hermitian(h: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``exp(i * scale * h)`` for Hermitian ``h`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * scale * w)) @ v.conj().T


def generator_of(u: np.ndarray) -> np.ndarray:
    """Principal Hermitian ``h`` with ``exp(i h) = u`` (eigenphases in ``(-pi, pi]``)."""
    t, z = schur(np.asarray(u, dtype=complex), output="complex")
    phases = np.angle(np.diag(t))
    phases = np.where(phases <= -math.pi + 1e-12, math.pi, phases)
    h = (z * phases) @ z.conj().T
    return (h + h.conj().T) / 2


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    targets: tuple[int, ...]
    generator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        dim = 2 ** len(self.targets)
        if self.generator.shape != (dim, dim):
            raise ValueError(f"generator shape {self.generator.shape} does not fit {len(self.targets)} targets")
        if np.abs(self.generator - self.generator.conj().T).max() > 1e-10:
            raise ValueError(f"generator of {self.name} is not Hermitian")

    @classmethod
    def from_unitary(cls, name: str, targets: Sequence[int], u: np.ndarray) -> "Gate":
        return cls(name, tuple(targets), generator_of(u))

    @cached_property
    def unitary(self) -> np.ndarray:
        return expm_hermitian(self.generator)

    def fraction(self, t: float, name: str | None = None) -> "Gate":
        """The same gate with its generator scaled by ``t`` (``G**t``)."""
        return Gate(name or f"{self.name}^{t:g}", self.targets, self.generator * t)

    def on(self, *targets: int) -> "Gate":
        return Gate(self.name, tuple(targets), self.generator)

    def __repr__(self) -> str:
        return f"{self.name}{list(self.targets)}"


@dataclass(frozen=True)
class GateStep:
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        seen: set[int] = set()
        for g in self.gates:
            if seen & set(g.targets):
                raise ValueError(f"gate {g!r} overlaps another gate in the same step")
            seen |= set(g.targets)

    @property
    def targets(self) -> frozenset[int]:
        return frozenset(q for g in self.gates for q in g.targets)

    def describe(self) -> str:
        return " | ".join(repr(g) for g in self.gates) if self.gates else "idle"


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    steps: tuple[GateStep, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for step in self.steps:
            if any(q >= self.n_qubits or q < 0 for q in step.targets):
                raise ValueError(f"step {step.describe()} leaves the {self.n_qubits}-qubit register")

    @classmethod
    def sequential(cls, n_qubits: int, gates: Iterable[Gate]) -> "Circuit":
        return cls(n_qubits, tuple(GateStep((g,)) for g in gates))

    @classmethod
    def idle(cls, n_qubits: int, depth: int) -> "Circuit":
        return cls(n_qubits, (GateStep(),) * depth)

    @property
    def depth(self) -> int:
        return len(self.steps)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits on different registers")
        return Circuit(self.n_qubits, self.steps + other.steps)

    def __mul__(self, reps: int) -> "Circuit":
        return Circuit(self.n_qubits, self.steps * reps)

    def dump(self) -> str:
        """One gate-step per line."""
        return "\n".join(f"{i:4d}: {s.describe()}" for i, s in enumerate(self.steps))

    def unitary(self) -> np.ndarray:
        """Noiseless product of all steps (for tests and small registers)."""
        u = np.eye(2**self.n_qubits, dtype=complex)
        for step in self.steps:
            for g in step.gates:
                u = embed(g.unitary, g.targets, self.n_qubits).matrix @ u
        return u


# -- gate library -------------------------------------------------------------

_FIXED = {
    "I": IDENTITY,
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]),
    "CNOT": np.kron(_P0, IDENTITY) + np.kron(_P1, SIGMA_X),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_FIXED_GENERATORS = {name: generator_of(u) for name, u in _FIXED.items()}
_FIXED_GENERATORS["I"] = np.zeros((2, 2), dtype=complex)


def canonical_matrix(name: str, *params: float) -> np.ndarray:
    """Textbook matrix of a named gate (rotations use ``exp(-i theta sigma / 2)``)."""
    name = name.upper()
    if name in _FIXED:
        return _FIXED[name].copy()
    if name in ("RX", "RY", "RZ"):
        (theta,) = params
        s = _PAULI[name[1].lower()]
        return math.cos(theta / 2) * IDENTITY - 1j * math.sin(theta / 2) * s
    if name in ("CRX", "CRY", "CRZ"):
        return np.kron(_P0, IDENTITY) + np.kron(_P1, canonical_matrix(name[1:], *params))
    if name in ("SIG", "CSIG"):
        axis, theta = params
        inner = math.cos(theta) * IDENTITY + 1j * math.sin(theta) * _PAULI[axis]
        return inner if name == "SIG" else np.kron(_P0, IDENTITY) + np.kron(_P1, inner)
    raise ValueError(f"unknown gate {name!r}")


def standard_gate(name: str, targets: Sequence[int], *params) -> Gate:
    """Named gate on ``targets``.

    Fixed gates: I X Y Z H S SDG T CNOT CZ SWAP.  Rotations ``RX RY RZ`` and
    their controlled forms take an angle.  ``SIG``/``CSIG`` take
    ``(axis, theta)`` and apply ``exp(i theta sigma_axis)``, i.e. phase
    ``exp(i theta)`` on the +1 eigenstate of ``sigma_axis``.
    """
    key = name.upper()
    targets = tuple(targets)
    if key in _FIXED_GENERATORS:
        return Gate(key, targets, _FIXED_GENERATORS[key])
    if key in ("RX", "RY", "RZ"):
        (theta,) = params
        return Gate(f"{key}({theta:.6g})", targets, -theta / 2 * _PAULI[key[1].lower()])
    if key in ("CRX", "CRY", "CRZ"):
        (theta,) = params
        return Gate(f"{key}({theta:.6g})", targets, np.kron(_P1, -theta / 2 * _PAULI[key[2].lower()]))
    if key in ("SIG", "CSIG"):
        axis, theta = params
        gen = theta * _PAULI[axis]
        if key == "CSIG":
            gen = np.kron(_P1, gen)
        return Gate(f"{key}{axis}({theta:.6g})", targets, gen)
    raise ValueError(f"unknown gate {name!r}")


def controlled_signal(
    power: int,
    theta: float,
    axis: str,
    accelerated: bool,
    control: int,
    target: int,
    n_qubits: int,
) -> Circuit:
    """Controlled ``U**(2**power)`` with ``U = exp(i theta sigma_axis)``.

    Accelerated: a single gate-step with the angle multiplied up.
    Non-accelerated: ``2**power`` consecutive single-angle steps.
    """
    if power < 0:
        raise ValueError("power must be >= 0")
    if axis not in ("x", "z"):
        raise ValueError("signal axis must be 'x' or 'z'")
    if accelerated:
        return Circuit.sequential(n_qubits, [standard_gate("CSIG", (control, target), axis, theta * 2**power)])
    gate = standard_gate("CSIG", (control, target), axis, theta)
    return Circuit(n_qubits, (GateStep((gate,)),) * (2**power))


# -- evolution ----------------------------------------------------------------

def _liouville(k_ops: Iterable[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in k_ops)


def _embed_small(op: np.ndarray, j: int, k: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**j), op), np.eye(2 ** (k - j - 1)))


@lru_cache(maxsize=4096)
def _gate_superop(generator_bytes: bytes, k: int, probs: tuple, n_sub: int) -> np.ndarray:
    gen = np.frombuffer(generator_bytes, dtype=complex).reshape(2**k, 2**k)
    u_sub = expm_hermitian(gen, 1.0 / n_sub)
    s_u = np.kron(u_sub, u_sub.conj())
    s_d = np.eye(4**k, dtype=complex)
    for j, (p_dec, p_deph) in enumerate(probs):
        if p_dec > 0:
            s_d = _liouville(_embed_small(e, j, k) for e in damping_kraus(p_dec)) @ s_d
        if p_deph > 0:
            ks = (math.sqrt(1 - p_deph / 2) * np.eye(2**k), math.sqrt(p_deph / 2) * _embed_small(SIGMA_Z, j, k))
            s_d = _liouville(ks) @ s_d
    return np.linalg.matrix_power(s_u @ s_d, n_sub)


@lru_cache(maxsize=1024)
def _mask(n: int, factors: tuple[tuple[int, float], ...]) -> np.ndarray:
    return dephasing_mask(n, dict(factors))


def _fast_decohere(rho: np.ndarray, n: int, probs: dict[int, tuple[float, float]]) -> np.ndarray:
    """Damping then dephasing per qubit; the per-qubit channels commute, so dephasing is one mask."""
    factors = []
    for q in sorted(probs):
        p_dec, p_deph = probs[q]
        if p_dec > 0:
            e1, e2 = damping_kraus(p_dec)
            rho = conjugate_local(rho, n, e1, [q]) + conjugate_local(rho, n, e2, [q])
        if p_deph > 0:
            factors.append((q, 1.0 - p_deph))
    if factors:
        rho = rho * _mask(n, tuple(factors))
    return rho


@lru_cache(maxsize=4096)
def _fractional_unitary(generator_bytes: bytes, k: int, n_sub: int) -> np.ndarray:
    gen = np.frombuffer(generator_bytes, dtype=complex).reshape(2**k, 2**k)
    return expm_hermitian(gen, 1.0 / n_sub)


def run_gate_step(
    state: DensityState,
    step: GateStep,
    spec: NoiseSpec,
    active_qubits: Iterable[int] | None = None,
) -> DensityState:
    """Evolve through one gate-step of duration ``T_g`` with interleaved decoherence."""
    n = state.n_qubits
    if spec.n_qubits != n:
        raise ValueError(f"noise spec covers {spec.n_qubits} qubits, state has {n}")
    noisy = set(spec.noisy_qubits(active_qubits))
    rho = state.matrix
    for gate in step.gates:
        g_noisy = [q for q in gate.targets if q in noisy]
        if not g_noisy:
            rho = conjugate_local(rho, n, gate.unitary, gate.targets)
            continue
        k = len(gate.targets)
        gen = np.ascontiguousarray(gate.generator, dtype=complex)
        if k <= SUPEROP_MAX_QUBITS:
            probs = tuple(substep_probs(spec, q) if q in noisy else (0.0, 0.0) for q in gate.targets)
            sop = _gate_superop(gen.tobytes(), k, probs, spec.n_sub)
            rho = superop_local(rho, n, sop, gate.targets)
        else:
            u_sub = _fractional_unitary(gen.tobytes(), k, spec.n_sub)
            probs = {q: substep_probs(spec, q) for q in g_noisy}
            for _ in range(spec.n_sub):
                rho = _fast_decohere(rho, n, probs)
                rho = conjugate_local(rho, n, u_sub, gate.targets)
    if spec.idle_noise:
        idle = noisy - step.targets
        if idle:
            rho = _fast_decohere(rho, n, {q: step_probs(spec, q) for q in idle})
    return state.evolve(rho)


def run_gate_step_reference(
    state: DensityState,
    step: GateStep,
    spec: NoiseSpec,
    active_qubits: Iterable[int] | None = None,
) -> DensityState:
    """Literal evaluation on the full register: ``n_sub`` x (decohere all, then ``exp(i H dt/T_g)``)."""
    n = state.n_qubits
    h = np.zeros((2**n, 2**n), dtype=complex)
    for gate in step.gates:
        h += embed(gate.generator, gate.targets, n).matrix
    u = QubitOperator(n, expm_hermitian(h, spec.dt / spec.gate_time))
    active = spec.noisy_qubits(active_qubits)
    if not spec.idle_noise:
        active = tuple(q for q in active if q in step.targets)
    for _ in range(spec.n_sub):
        state = decohere_all(state, spec, active)
        state = apply_unitary(state, u)
    return state


def run_circuit(
    state: DensityState,
    circuit: Circuit,
    spec: NoiseSpec,
    active_qubits: Iterable[int] | None = None,
) -> DensityState:
    if circuit.n_qubits != state.n_qubits:
        raise ValueError("circuit and state registers differ")
    for step in circuit.steps:
        state = run_gate_step(state, step, spec, active_qubits)
    return state
