"""The five-qubit perfect code: codewords, syndromes, post-selection, correction and logical gates.

Syndromes are handled internally as per-generator bit strings: bit ``i`` is 1
when the error anticommutes with generator ``i``.  The reference table of
causes labels its rows with the running XOR of those bits (what a single
measurement ancilla reports when it is reused without being reset);
:func:`table_label` converts between the two.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import null_space

from .engine import (
    PROJECTION_FLOOR,
    DensityState,
    ImpossibleBranchError,
    apply_gate,
    conjugate_local,
    project_diagonal,
    project_local,
)
from .gates import Circuit, Gate, GateStep, generator_of, run_gate_step, standard_gate
from .measure import BRANCH_ZERO, Branch, branch_distribution
from .noise import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, NoiseSpec

GENERATORS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")

# Signed 16-term expansions, amplitude 1/4 each.
ZERO_TERMS = (
    "+00000", "+10010", "+01001", "+10100", "+01010", "-11011", "-00110", "-11000",
    "-11101", "-00011", "-11110", "-01111", "-10001", "-01100", "-10111", "+00101",
)
ONE_TERMS = (
    "+11111", "+01101", "+10110", "+01011", "+10101", "-00100", "-11001", "-00111",
    "-00010", "-11100", "-00001", "-10000", "-01110", "-10011", "-01000", "+11010",
)

LOGICAL_H_DEPTH = 10
LOGICAL_RZ_DEPTH = 3

_PAULI_MATS = {"I": IDENTITY, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


class CodeConstructionError(RuntimeError):
    pass


def pauli_matrix(label: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for c in label:
        m = np.kron(m, _PAULI_MATS[c])
    return m


def _terms_vector(terms: Sequence[str]) -> np.ndarray:
    v = np.zeros(32, dtype=complex)
    for t in terms:
        v[int(t[1:], 2)] += (1.0 if t[0] == "+" else -1.0) / 4
    return v


def _anticommutes(a: str, b: str) -> bool:
    return sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y) % 2 == 1


def syndrome_of(error: str, generators: Sequence[str] = GENERATORS) -> str:
    """Per-generator syndrome of a Pauli error string."""
    return "".join("1" if _anticommutes(error, g) else "0" for g in generators)


def table_label(syndrome: str) -> str:
    """Running-XOR label used by the reference cause table."""
    out, acc = [], 0
    for b in syndrome:
        acc ^= int(b)
        out.append(str(acc))
    return "".join(out)


def syndrome_from_label(label: str) -> str:
    """Inverse of :func:`table_label`."""
    bits = [int(b) for b in label]
    return "".join(str(b ^ (bits[i - 1] if i else 0)) for i, b in enumerate(bits))


def low_weight_errors(max_weight: int = 2, n: int = 5) -> list[str]:
    """Every Pauli string on ``n`` qubits with weight 1..max_weight."""
    out = []
    for w in range(1, max_weight + 1):
        for sites in itertools.combinations(range(n), w):
            for paulis in itertools.product("XYZ", repeat=w):
                s = ["I"] * n
                for q, p in zip(sites, paulis):
                    s[q] = p
                out.append("".join(s))
    return out


@dataclass(frozen=True, eq=False)
class CodeBlock:
    qubits: tuple[int, ...]
    generators: tuple[str, ...]
    codeword_0: np.ndarray
    codeword_1: np.ndarray
    syndrome_table: Mapping[str, str]  # per-generator syndrome -> weight-1 correction
    causes: Mapping[str, tuple[str, ...]] = field(repr=False)

    @property
    def basis(self) -> np.ndarray:
        """``32 x 2`` isometry whose columns are the codewords."""
        return np.stack([self.codeword_0, self.codeword_1], axis=1)

    def logical_vector(self, alpha: complex, beta: complex) -> np.ndarray:
        return alpha * self.codeword_0 + beta * self.codeword_1


def build_code(qubits: Sequence[int] = (0, 1, 2, 3, 4)) -> CodeBlock:
    qubits = tuple(int(q) for q in qubits)
    if len(qubits) != 5 or len(set(qubits)) != 5:
        raise ValueError("a code block needs five distinct qubits")
    zero, one = _terms_vector(ZERO_TERMS), _terms_vector(ONE_TERMS)
    for g in GENERATORS:
        gm = pauli_matrix(g)
        if not (np.allclose(gm @ zero, zero, atol=1e-12) and np.allclose(gm @ one, one, atol=1e-12)):
            raise CodeConstructionError(f"codewords are not stabilized by {g}")
    if abs(np.vdot(zero, one)) > 1e-12:
        raise CodeConstructionError("codewords not orthogonal")

    causes: dict[str, list[str]] = {}
    for err in low_weight_errors(2):
        causes.setdefault(syndrome_of(err), []).append(err)
    table = {}
    for s, errs in causes.items():
        w1 = [e for e in errs if sum(c != "I" for c in e) == 1]
        if len(w1) != 1 or s == "0000":
            raise CodeConstructionError(f"syndrome {s} lacks a unique weight-1 cause")
        table[s] = w1[0]
    if len(table) != 15:
        raise CodeConstructionError("weight-1 errors do not cover all 15 syndromes")
    return CodeBlock(qubits, GENERATORS, zero, one, table, {s: tuple(v) for s, v in causes.items()})


def syndrome_table_csv(block: CodeBlock) -> str:
    """One row per syndrome: table label, per-generator syndrome, correction, all weight<=2 causes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "syndrome", "correction", "causes"])
    rows = sorted(block.syndrome_table.items(), key=lambda kv: table_label(kv[0]))
    for s, corr in rows:
        w.writerow([table_label(s), s, corr, " ".join(block.causes[s])])
    return buf.getvalue()


# -- projectors ---------------------------------------------------------------

def stabilizer_projector(block: CodeBlock, syndrome: str) -> np.ndarray:
    """``prod_i (I + (-1)^{s_i} g_i) / 2`` as a 32x32 matrix on the block."""
    p = np.eye(32, dtype=complex)
    for bit, g in zip(syndrome, block.generators):
        sign = -1.0 if bit == "1" else 1.0
        p = p @ (np.eye(32) + sign * pauli_matrix(g)) / 2
    return p


def code_projector(block: CodeBlock) -> np.ndarray:
    b = block.basis
    return b @ b.conj().T


def parity_projector(parity: int, n: int = 5) -> np.ndarray:
    """``(I + (-1)^parity Z^{(x)n}) / 2`` as a diagonal."""
    w = np.array([bin(i).count("1") % 2 for i in range(2**n)])
    return (w == parity).astype(float)


def code_space_unitary(block: CodeBlock, u: np.ndarray) -> np.ndarray:
    """``V u V^dag`` on the code space, identity on its complement."""
    b = block.basis
    return b @ np.asarray(u, dtype=complex) @ b.conj().T + (np.eye(32) - b @ b.conj().T)


# -- encoding -----------------------------------------------------------------

def encoding_unitary(block: CodeBlock) -> np.ndarray:
    """Unitary on ``(source, block...)`` mapping ``|a>|00000>`` to ``|0>|a_L>``."""
    cols = np.zeros((64, 64), dtype=complex)
    cols[:32, 0] = block.codeword_0  # source |0>, block |0_L>
    cols[:32, 32] = block.codeword_1  # image of |1>|00000>
    # Complete the isometry with an orthonormal basis of the remaining space.
    cols[:, [i for i in range(64) if i not in (0, 32)]] = null_space(cols[:, [0, 32]].conj().T)
    return cols


def encode(state: DensityState, block: CodeBlock, source_qubit: int) -> DensityState:
    """Noiseless encoding of ``source_qubit`` into ``block`` (which must start in ``|00000>``).

    The source is left in ``|0>``.
    """
    if source_qubit in block.qubits:
        raise ValueError("source qubit overlaps the code block")
    return apply_gate(state, encoding_unitary(block), (source_qubit,) + block.qubits)


def decode(state: DensityState, block: CodeBlock, source_qubit: int) -> DensityState:
    if source_qubit in block.qubits:
        raise ValueError("source qubit overlaps the code block")
    return apply_gate(state, encoding_unitary(block).conj().T, (source_qubit,) + block.qubits)


# -- syndrome extraction ------------------------------------------------------

ALL_SYNDROMES = tuple(format(i, "04b") for i in range(16))


def syndrome_distribution(state: DensityState, block: CodeBlock) -> dict[str, float]:
    """Exact probability of each per-generator syndrome."""
    n = state.n_qubits
    out = {}
    for s in ALL_SYNDROMES:
        proj = conjugate_local(state.matrix, n, stabilizer_projector(block, s), block.qubits)
        out[s] = float(np.trace(proj).real) / state.trace()
    return out


def collapse_syndrome(
    state: DensityState, block: CodeBlock, syndrome: str, log: bool = True, floor: float = PROJECTION_FLOOR
) -> DensityState:
    return project_local(state, stabilizer_projector(block, syndrome), block.qubits, floor=floor, log=log)


def extraction_circuit(block: CodeBlock, ancilla: int, generator: str, n_qubits: int) -> Circuit:
    """H, four controlled Paulis from the ancilla, H: six gate-steps measuring one generator."""
    steps = [GateStep((standard_gate("H", (ancilla,)),))]
    for q, p in zip(block.qubits, generator):
        if p == "I":
            continue
        name = {"X": "CNOT", "Z": "CZ"}.get(p)
        gate = standard_gate(name, (ancilla, q)) if name else Gate.from_unitary(
            "CY", (ancilla, q), np.kron(np.diag([1, 0]), IDENTITY) + np.kron(np.diag([0, 1]), SIGMA_Y)
        )
        steps.append(GateStep((gate,)))
    steps.append(GateStep((standard_gate("H", (ancilla,)),)))
    return Circuit(n_qubits, tuple(steps))


def _run(state: DensityState, circuit: Circuit, spec: NoiseSpec | None) -> DensityState:
    if spec is None:
        spec = NoiseSpec.noiseless(state.n_qubits)
    for step in circuit.steps:
        state = run_gate_step(state, step, spec)
    return state


def _reset(state: DensityState, qubit: int, bit: str) -> DensityState:
    return apply_gate(state, SIGMA_X, (qubit,)) if bit == "1" else state


def syndrome_branches(
    state: DensityState,
    block: CodeBlock,
    mode: str = "ideal",
    spec: NoiseSpec | None = None,
    ancillas: Sequence[int] | None = None,
    prune: float = 0.0,
) -> list[Branch]:
    """Every syndrome outcome with its probability and collapsed state (unlogged).

    ``mode="circuit"`` runs the extraction gates with noise.  With one
    ancilla it is reused for each generator and reset after each readout;
    with four ancillas each generator gets its own.  Ancillas must start in
    ``|0>`` and are returned to ``|0>``.
    """
    if mode == "ideal":
        out = []
        for s, p in syndrome_distribution(state, block).items():
            if p > max(prune, BRANCH_ZERO):
                out.append(Branch(s, p, collapse_syndrome(state, block, s, log=False, floor=-np.inf)))
        return out
    if mode != "circuit":
        raise ValueError(f"unknown syndrome mode {mode!r}")
    ancillas = _check_ancillas(block, ancillas, state.n_qubits)
    n = state.n_qubits
    frontier = [Branch("", 1.0, state)]
    for i, g in enumerate(block.generators):
        anc = ancillas[i % len(ancillas)]
        nxt = []
        for br in frontier:
            evolved = _run(br.state, extraction_circuit(block, anc, g, n), spec)
            for leaf in branch_distribution(evolved, [anc], prune=prune):
                p = br.probability * leaf.probability
                if p > prune:
                    nxt.append(Branch(br.bits + leaf.bits, p, _reset(leaf.state, anc, leaf.bits)))
        frontier = nxt
    return frontier


def _check_ancillas(block: CodeBlock, ancillas: Sequence[int] | None, n: int) -> tuple[int, ...]:
    if ancillas is None:
        raise ValueError("circuit-mode syndrome extraction needs ancilla qubits")
    ancillas = tuple(ancillas)
    if len(ancillas) not in (1, 4):
        raise ValueError("use one reused ancilla or four dedicated ones")
    if set(ancillas) & set(block.qubits) or any(a >= n for a in ancillas):
        raise ValueError("ancillas must be distinct from the block and inside the register")
    return ancillas


def syndrome_extract(
    state: DensityState,
    block: CodeBlock,
    mode: str = "ideal",
    spec: NoiseSpec | None = None,
    ancillas: Sequence[int] | None = None,
    syndrome: str | None = None,
) -> tuple[DensityState, dict[str, float]]:
    """Syndrome distribution; if ``syndrome`` is given the returned state is forced onto it (logged)."""
    branches = syndrome_branches(state, block, mode, spec, ancillas)
    dist = {s: 0.0 for s in ALL_SYNDROMES}
    for br in branches:
        dist[br.bits] = br.probability
    if syndrome is None:
        return state, dist
    ps = dist.get(syndrome, 0.0)
    chosen = [br for br in branches if br.bits == syndrome]
    if ps < PROJECTION_FLOOR or not chosen:
        raise ImpossibleBranchError(f"syndrome {syndrome} has weight {ps:.3e}", retained=ps)
    out = chosen[0].state
    return out.evolve(out.matrix, state.trace_log + (min(ps, 1.0),)), dist


def lps(
    state: DensityState,
    block: CodeBlock,
    mode: str = "ideal",
    spec: NoiseSpec | None = None,
    ancillas: Sequence[int] | None = None,
    floor: float = PROJECTION_FLOOR,
) -> DensityState:
    """Post-select the trivial syndrome.

    Ideal mode logs one retained fraction; circuit mode logs one per
    generator readout.
    """
    if mode == "ideal":
        return collapse_syndrome(state, block, "0000", log=True, floor=floor)
    if mode != "circuit":
        raise ValueError(f"unknown syndrome mode {mode!r}")
    ancillas = _check_ancillas(block, ancillas, state.n_qubits)
    n = state.n_qubits
    for i, g in enumerate(block.generators):
        anc = ancillas[i % len(ancillas)]
        state = _run(state, extraction_circuit(block, anc, g, n), spec)
        keep = np.array([1.0 if b == 0 else 0.0 for b in _bit_column(n, anc)])
        state = project_diagonal(state, keep, floor=floor)
    return state


def _bit_column(n: int, q: int) -> np.ndarray:
    return (np.arange(2**n) >> (n - 1 - q)) & 1


def lps_depth(mode: str = "circuit") -> int:
    if mode == "ideal":
        return 0
    return sum(2 + sum(c != "I" for c in g) for g in GENERATORS)


def apply_correction(state: DensityState, block: CodeBlock, syndrome: str) -> DensityState:
    if syndrome == "0000":
        return state
    return apply_gate(state, pauli_matrix(block.syndrome_table[syndrome]), block.qubits)


def correction_branches(
    state: DensityState,
    block: CodeBlock,
    mode: str = "ideal",
    spec: NoiseSpec | None = None,
    ancillas: Sequence[int] | None = None,
) -> list[Branch]:
    """Exact outcome tree of one correction round: every syndrome with its corrected state."""
    return [
        Branch(br.bits, br.probability, apply_correction(br.state, block, br.bits))
        for br in syndrome_branches(state, block, mode, spec, ancillas)
    ]


def error_correct(
    state: DensityState,
    block: CodeBlock,
    rng: np.random.Generator | int,
    mode: str = "ideal",
    spec: NoiseSpec | None = None,
    ancillas: Sequence[int] | None = None,
) -> tuple[DensityState, str]:
    """Sample a syndrome, apply its weight-1 correction; returns the state and the syndrome seen."""
    rng = np.random.default_rng(rng)
    branches = correction_branches(state, block, mode, spec, ancillas)
    return sample_branch(branches, rng.random())


def sample_branch(branches: Sequence[Branch], x: float) -> tuple[DensityState, str]:
    """Inverse-CDF choice of a branch for a uniform draw ``x``."""
    cdf = np.cumsum([b.probability for b in branches])
    i = min(int(np.searchsorted(cdf, x * cdf[-1], side="right")), len(branches) - 1)
    return branches[i].state, branches[i].bits


# -- logical gates ------------------------------------------------------------

def logical_cnot(block: CodeBlock, target: int, n_qubits: int) -> Circuit:
    """Five CNOTs, one from each block qubit onto ``target`` (five gate-steps)."""
    if target in block.qubits:
        raise ValueError("target must lie outside the block")
    return Circuit.sequential(n_qubits, [standard_gate("CNOT", (q, target)) for q in block.qubits])


def logical_cz(block: CodeBlock, target: int, n_qubits: int) -> Circuit:
    if target in block.qubits:
        raise ValueError("target must lie outside the block")
    return Circuit.sequential(n_qubits, [standard_gate("CZ", (q, target)) for q in block.qubits])


def _physical(name: str, target: int, n_qubits: int, *params) -> Circuit:
    return Circuit.sequential(n_qubits, [standard_gate(name, (target,), *params)])


def logical_controlled_rotation(
    block: CodeBlock, target: int, theta: float, axis: str, n_qubits: int
) -> Circuit:
    """Controlled ``R_axis(theta)`` from the logical qubit onto a physical target.

    ``R_z(theta/2) . CNOT_L . R_z(-theta/2) . CNOT_L``; the x axis
    conjugates the target by H.  Exact: the two target rotations cancel
    when the control is ``|0_L>``.
    """
    if axis not in ("x", "z"):
        raise ValueError("axis must be 'x' or 'z'")
    cx = logical_cnot(block, target, n_qubits)
    body = (
        _physical("RZ", target, n_qubits, theta / 2)
        + cx
        + _physical("RZ", target, n_qubits, -theta / 2)
        + cx
    )
    if axis == "x":
        h = _physical("H", target, n_qubits)
        body = h + body + h
    return body


def _code_space_gate(block: CodeBlock, name: str, u: np.ndarray, depth: int, n_qubits: int) -> Circuit:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    gen = generator_of(code_space_unitary(block, u))
    step = GateStep((Gate(f"{name}/{depth}", block.qubits, gen / depth),))
    return Circuit(n_qubits, (step,) * depth)


def logical_h(block: CodeBlock, n_qubits: int, depth: int = LOGICAL_H_DEPTH) -> Circuit:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    return _code_space_gate(block, "H_L", h, depth, n_qubits)


def logical_rz(block: CodeBlock, theta: float, n_qubits: int, depth: int = LOGICAL_RZ_DEPTH) -> Circuit:
    rz = np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    return _code_space_gate(block, f"RZ_L({theta:.6g})", rz, depth, n_qubits)


def logical_s(block: CodeBlock, n_qubits: int, depth: int = LOGICAL_RZ_DEPTH) -> Circuit:
    return _code_space_gate(block, "S_L", np.diag([1, 1j]), depth, n_qubits)


def _transversal(block: CodeBlock, name: str, n_qubits: int) -> Circuit:
    return Circuit(n_qubits, (GateStep(tuple(standard_gate(name, (q,)) for q in block.qubits)),))


def logical_x(block: CodeBlock, n_qubits: int) -> Circuit:
    return _transversal(block, "X", n_qubits)


def logical_z(block: CodeBlock, n_qubits: int) -> Circuit:
    return _transversal(block, "Z", n_qubits)


def logical_operator(block: CodeBlock, circuit: Circuit) -> np.ndarray:
    """2x2 action of a noiseless block-only circuit on the code space (``V^dag U V``)."""
    b = block.basis
    u = circuit_block_unitary(block, circuit)
    return b.conj().T @ u @ b


def circuit_block_unitary(block: CodeBlock, circuit: Circuit) -> np.ndarray:
    """32x32 product of the circuit's gates restricted to the block qubits."""
    pos = {q: i for i, q in enumerate(block.qubits)}
    sub = Circuit(5, tuple(GateStep(tuple(g.on(*(pos[t] for t in g.targets)) for g in s.gates)) for s in circuit.steps))
    return sub.unitary()


def product_state(*vectors: Iterable[complex]) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for x in vectors:
        v = np.kron(v, np.asarray(x, dtype=complex))
    return v
