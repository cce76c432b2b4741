"""Dense density-matrix states and the linear-algebra primitives built on them.

Bit order convention (shared by every module): qubit 0 is the most
significant bit of a basis-state index, i.e. ``|q0 q1 ... q_{n-1}>`` sits at
index ``sum(q_i << (n - 1 - i))``.  ``embed(X, [1], 2)`` is therefore
``I (x) X``.
"""

from __future__ import annotations

import os
import string
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MAX_QUBITS = 8
PROJECTION_FLOOR = 1e-14
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10

# LPSIM_CHECK=1 validates Hermiticity/PSD after every engine call.
_CHECK = os.environ.get("LPSIM_CHECK", "") not in ("", "0")


class CapacityError(ValueError):
    """Requested register exceeds the configured qubit cap."""


class ImpossibleBranchError(RuntimeError):
    """Post-selection onto an outcome with (numerically) zero probability."""

    def __init__(self, message: str, retained: float = 0.0):
        super().__init__(message)
        self.retained = retained


@dataclass(frozen=True, eq=False)
class QubitOperator:
    """A ``2**n x 2**n`` operator on the full register."""

    n_qubits: int
    matrix: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        dim = 2**self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"operator shape {self.matrix.shape} does not match {self.n_qubits} qubits"
            )
        if self.unitary:
            err = np.abs(self.matrix.conj().T @ self.matrix - np.eye(dim)).max()
            if err > 1e-10:
                raise ValueError(f"operator flagged unitary but |U^dag U - I| = {err:.2e}")


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density matrix over ``n_qubits`` plus the retained-trace log of past projections."""

    n_qubits: int
    matrix: np.ndarray
    trace_log: tuple[float, ...] = field(default=())

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def retained(self) -> float:
        """Product of all logged retained fractions."""
        return float(np.prod(self.trace_log)) if self.trace_log else 1.0

    def evolve(self, matrix: np.ndarray, trace_log: tuple[float, ...] | None = None) -> "DensityState":
        out = replace(self, matrix=matrix, trace_log=self.trace_log if trace_log is None else trace_log)
        if _CHECK:
            out.check()
        return out

    def check(self, tol: float = HERMITIAN_TOL) -> None:
        """Raise ``AssertionError`` if the matrix is not Hermitian and PSD within ``tol``."""
        herm = np.abs(self.matrix - self.matrix.conj().T).max()
        if herm > tol:
            raise AssertionError(f"state not Hermitian: {herm:.2e}")
        low = np.linalg.eigvalsh(self.matrix).min()
        if low < -PSD_TOL:
            raise AssertionError(f"state not PSD: min eigenvalue {low:.2e}")
        if any(not (0.0 <= p <= 1.0 + 1e-12) for p in self.trace_log):
            raise AssertionError(f"trace log out of range: {self.trace_log}")

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)


def _check_targets(targets: Sequence[int], n: int) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"targets {targets} out of range for {n} qubits")
    return targets


def new_state(n: int, bits: str | None = None, max_qubits: int = MAX_QUBITS) -> DensityState:
    """Return ``|bits><bits|`` on ``n`` qubits (all zeros when ``bits`` is omitted)."""
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds the cap of {max_qubits}")
    bits = "0" * n if bits is None else bits
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise ValueError(f"basis string {bits!r} invalid for {n} qubits")
    rho = np.zeros((2**n, 2**n), dtype=complex)
    idx = int(bits, 2) if n else 0
    rho[idx, idx] = 1.0
    return DensityState(n, rho)


def from_vector(psi: np.ndarray) -> DensityState:
    psi = np.asarray(psi, dtype=complex).ravel()
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size:
        raise ValueError("state vector length is not a power of two")
    return DensityState(n, np.outer(psi, psi.conj()))


def from_matrix(rho: np.ndarray) -> DensityState:
    rho = np.asarray(rho, dtype=complex)
    n = int(round(np.log2(rho.shape[0])))
    if rho.shape != (2**n, 2**n):
        raise ValueError("density matrix must be square with power-of-two size")
    return DensityState(n, rho)


def tensor(*states: DensityState) -> DensityState:
    """Kronecker product of states; earlier arguments take the more significant qubits."""
    mat = np.ones((1, 1), dtype=complex)
    log: tuple[float, ...] = ()
    for s in states:
        mat = np.kron(mat, s.matrix)
        log = log + s.trace_log
    return DensityState(int(round(np.log2(mat.shape[0]))), mat, log)


# -- local tensor contractions ------------------------------------------------

def apply_local(op: np.ndarray, tensor_: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract a ``2**k x 2**k`` matrix into ``k`` axes of a ``(2,)*N`` tensor."""
    k = len(axes)
    opt = op.reshape((2,) * (2 * k))
    out = np.tensordot(opt, tensor_, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def conjugate_local(rho: np.ndarray, n: int, op: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Return ``op rho op^dag`` with ``op`` acting on ``targets``."""
    t = rho.reshape((2,) * (2 * n))
    t = apply_local(op, t, targets)
    t = apply_local(op.conj(), t, [n + q for q in targets])
    return t.reshape(rho.shape)


def superop_local(rho: np.ndarray, n: int, sop: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a row-major Liouville superoperator on ``targets``.

    ``sop`` maps ``vec(sigma)`` to ``vec(E(sigma))`` where ``vec`` is the row-major
    flattening of the local ``2**k x 2**k`` block.
    """
    t = rho.reshape((2,) * (2 * n))
    axes = list(targets) + [n + q for q in targets]
    return apply_local(sop, t, axes).reshape(rho.shape)


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> QubitOperator:
    """Embed a small operator on ``targets`` into the full ``n``-qubit register."""
    op = np.asarray(op, dtype=complex)
    targets = _check_targets(targets, n)
    if op.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"operator of shape {op.shape} cannot act on {len(targets)} qubits")
    eye = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    full = apply_local(op, eye, targets).reshape(2**n, 2**n)
    unitary = bool(np.allclose(op.conj().T @ op, np.eye(op.shape[0]), atol=1e-12))
    return QubitOperator(n, full, unitary=unitary)


def apply_unitary(state: DensityState, U: QubitOperator) -> DensityState:
    """``rho -> U rho U^dag``."""
    if U.n_qubits != state.n_qubits:
        raise ValueError(f"operator on {U.n_qubits} qubits applied to {state.n_qubits}-qubit state")
    m = U.matrix
    return state.evolve(m @ state.matrix @ m.conj().T)


def apply_gate(state: DensityState, op: np.ndarray, targets: Sequence[int]) -> DensityState:
    """Apply a small unitary on ``targets`` without building the full matrix."""
    targets = _check_targets(targets, state.n_qubits)
    return state.evolve(conjugate_local(state.matrix, state.n_qubits, np.asarray(op, dtype=complex), targets))


def partial_trace(state: DensityState, keep: Sequence[int]) -> DensityState:
    """Reduced state on ``keep`` (in the order given); the trace log is carried along."""
    if len(keep) == 0:
        raise ValueError("keep list must be nonempty")
    n = state.n_qubits
    keep = _check_targets(keep, n)
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    spec = f"{''.join(rows)}{''.join(cols)}->{out}"
    k = len(keep)
    red = np.einsum(spec, state.matrix.reshape((2,) * (2 * n))).reshape(2**k, 2**k)
    return DensityState(k, red, state.trace_log)


def _normalize_after_projection(
    state: DensityState, projected: np.ndarray, floor: float, log: bool
) -> DensityState:
    before = state.trace()
    after = float(np.trace(projected).real)
    ps = after / before if before > 0 else 0.0
    if ps < floor:
        raise ImpossibleBranchError(f"post-selected branch has weight {ps:.3e}", retained=max(ps, 0.0))
    ps = min(ps, 1.0)
    trace_log = state.trace_log + (ps,) if log else state.trace_log
    return state.evolve(projected / after, trace_log)


def project(
    state: DensityState,
    P: QubitOperator | np.ndarray,
    floor: float = PROJECTION_FLOOR,
    log: bool = True,
) -> DensityState:
    """Project with ``P``, log the retained fraction ``Ps`` and renormalize.

    ``log=False`` is used for probabilistic (sampled) measurements, whose
    collapse is not a loss of information.
    """
    mat = P.matrix if isinstance(P, QubitOperator) else np.asarray(P, dtype=complex)
    if mat.shape != state.matrix.shape:
        raise ValueError("projector dimension does not match the state")
    if np.abs(mat @ mat - mat).max() > 1e-10:
        raise ValueError("operator is not a projector (P^2 != P)")
    projected = mat @ state.matrix @ mat.conj().T
    return _normalize_after_projection(state, projected, floor, log)


def project_local(
    state: DensityState,
    P: np.ndarray,
    targets: Sequence[int],
    floor: float = PROJECTION_FLOOR,
    log: bool = True,
) -> DensityState:
    """Same as :func:`project`, with ``P`` acting only on ``targets``."""
    targets = _check_targets(targets, state.n_qubits)
    projected = conjugate_local(state.matrix, state.n_qubits, np.asarray(P, dtype=complex), targets)
    return _normalize_after_projection(state, projected, floor, log)


def project_diagonal(
    state: DensityState,
    diag: np.ndarray,
    floor: float = PROJECTION_FLOOR,
    log: bool = True,
) -> DensityState:
    """Project with a diagonal 0/1 projector given by its diagonal."""
    d = np.asarray(diag, dtype=float)
    projected = state.matrix * np.outer(d, d)
    return _normalize_after_projection(state, projected, floor, log)


def basis_bits(n: int) -> np.ndarray:
    """``(2**n, n)`` array: row ``i`` holds the bits of index ``i``, qubit 0 first."""
    idx = np.arange(2**n)
    return ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int8)
