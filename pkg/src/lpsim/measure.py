"""Projective measurement, post-selection, outcome sampling and lost-information accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import (
    PROJECTION_FLOOR,
    DensityState,
    QubitOperator,
    basis_bits,
    partial_trace,
    project_diagonal,
)


# Branches lighter than this are numerical noise and are never expanded.
BRANCH_ZERO = 1e-14


@dataclass(frozen=True)
class MeasurementRecord:
    qubits: tuple[int, ...]
    bits: str
    probability: float
    retained: float


@dataclass(frozen=True, eq=False)
class Branch:
    bits: str
    probability: float
    state: DensityState


def _diag_projector(outcomes: Mapping[int, int], n: int) -> np.ndarray:
    bits = basis_bits(n)
    keep = np.ones(2**n, dtype=bool)
    for q, b in outcomes.items():
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} outside register of {n}")
        if b not in (0, 1):
            raise ValueError(f"outcome for qubit {q} must be 0 or 1")
        keep &= bits[:, q] == b
    return keep.astype(float)


def measurement_projector(outcomes: Mapping[int, int], n: int) -> QubitOperator:
    """Tensor product of ``(I + Z)/2`` / ``(I - Z)/2`` on measured qubits and ``I`` elsewhere."""
    return QubitOperator(n, np.diag(_diag_projector(outcomes, n)).astype(complex))


def post_select(
    state: DensityState,
    outcomes: Mapping[int, int],
    trace_out: bool = False,
    floor: float = PROJECTION_FLOOR,
) -> DensityState:
    """Force the listed qubits onto the given bits, logging the retained fraction."""
    out = project_diagonal(state, _diag_projector(outcomes, state.n_qubits), floor=floor)
    if trace_out:
        keep = [q for q in range(state.n_qubits) if q not in outcomes]
        out = partial_trace(out, keep)
    return out


def _marginal(state: DensityState, qubits: Sequence[int]) -> np.ndarray:
    """Probabilities of each bit string on ``qubits`` (qubits[0] most significant)."""
    n = state.n_qubits
    diag = state.probabilities()
    bits = basis_bits(n)[:, list(qubits)]
    idx = bits @ (1 << np.arange(len(qubits))[::-1]) if len(qubits) else np.zeros(2**n, dtype=int)
    probs = np.bincount(idx, weights=diag, minlength=2 ** len(qubits))
    return probs / probs.sum()


def _collapse(state: DensityState, qubits: Sequence[int], bits: str) -> DensityState:
    outcomes = {q: int(b) for q, b in zip(qubits, bits)}
    return project_diagonal(state, _diag_projector(outcomes, state.n_qubits), floor=-np.inf, log=False)


def sample_measurement(
    state: DensityState,
    qubits: Sequence[int],
    rng: np.random.Generator,
) -> tuple[str, DensityState]:
    """Sample an outcome by inverse CDF over the reduced diagonal and collapse the state.

    The collapse is not logged as lost information: a sampled measurement
    keeps every trajectory.
    """
    probs = _marginal(state, qubits)
    cdf = np.cumsum(probs)
    x = rng.random()
    i = int(np.searchsorted(cdf, x, side="right"))
    i = min(i, len(probs) - 1)
    while probs[i] == 0 and i > 0:  # guards against round-off at the top of the CDF
        i -= 1
    bits = format(i, f"0{len(qubits)}b") if qubits else ""
    return bits, _collapse(state, qubits, bits)


def outcome_for_uniform(probs: Sequence[float], x: float) -> int:
    """First index ``i`` with ``x < cumsum(probs)[i]``."""
    cdf = np.cumsum(probs)
    return min(int(np.searchsorted(cdf, x, side="right")), len(cdf) - 1)


def branch_distribution(
    state: DensityState,
    qubits: Sequence[int],
    prune: float = 0.0,
) -> list[Branch]:
    """Every outcome with probability above ``prune``, each with its collapsed state."""
    probs = _marginal(state, qubits)
    out = []
    for i, p in enumerate(probs):
        if p > max(prune, BRANCH_ZERO):
            bits = format(i, f"0{len(qubits)}b") if qubits else ""
            out.append(Branch(bits, float(p), _collapse(state, qubits, bits)))
    return out


def lost_information(trace_log: Sequence[float]) -> float:
    """``1 - prod(Ps)``."""
    for p in trace_log:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"retained fraction {p} outside [0, 1]")
    return float(1.0 - np.prod(trace_log)) if len(trace_log) else 0.0


def lost_information_sum(trace_log: Sequence[float]) -> float:
    """Telescoping form: ``sum_i (prod_{k<i} Ps_k) (1 - Ps_i)``."""
    total, kept = 0.0, 1.0
    for p in trace_log:
        total += kept * (1.0 - p)
        kept *= p
    return total
