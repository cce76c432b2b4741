"""State-comparison metrics, circular statistics and closed-form figures of merit."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import comb

KITAEV_MARGIN = (2 - math.sqrt(2)) / 4
KITAEV_FAIL_DISTANCE = (math.sqrt(2) - 1) / 2
# Returned by kitaev_trial_bound inside the failure region.
KITAEV_FAIL = math.inf


class UndefinedMeanError(ValueError):
    """Resultant length is zero, so the circular mean does not exist."""


class AllInformationLostError(ValueError):
    """Lost information reached 1; no post-selected trials survive."""


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-8:
        raise ValueError(f"matrix not positive semidefinite (min eigenvalue {w.min():.2e})")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _normalized(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    rho = (rho + rho.conj().T) / 2
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("cannot normalize a matrix with nonpositive trace")
    return rho / tr


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` after normalizing both inputs."""
    rho, sigma = _normalized(rho), _normalized(sigma)
    # A pure argument gives sqrt(<psi|rho|psi>) exactly; the eigen route loses ~1e-8 near F = 1.
    for a, b in ((rho, sigma), (sigma, rho)):
        if abs(np.vdot(a, a).real - 1) < 1e-12:
            w, v = np.linalg.eigh(a)
            psi = v[:, -1]
            return float(min(1.0, math.sqrt(max(0.0, np.vdot(psi, b @ psi).real))))
    s = _psd_sqrt(rho)
    inner = s @ sigma @ s
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(min(1.0, np.sqrt(np.clip(w, 0, None)).sum()))


def distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``Tr |rho - sigma|^2``, the squared Frobenius norm of the difference."""
    diff = _normalized(rho) - _normalized(sigma)
    return float(np.vdot(diff, diff).real)


@dataclass(frozen=True)
class CircularStats:
    mean: float  # turns, in [0, 1)
    std: float  # turns
    resultant: float


def circular_stats(bins: Sequence[float], spread: str = "circular") -> CircularStats:
    """Mean, spread and resultant length of a distribution over ``len(bins)`` phase bins.

    ``spread="circular"`` gives ``sqrt(-2 ln R) / 2pi``; ``"angular"`` gives
    ``sqrt(2 (1 - R)) / 2pi``.  Both are in turns.
    """
    p = np.asarray(getattr(bins, "bins", bins), dtype=float)
    total = p.sum()
    if total <= 0:
        raise UndefinedMeanError("empty histogram")
    z = np.sum(p * np.exp(2j * np.pi * np.arange(p.size) / p.size)) / total
    r = float(abs(z))
    if r < 1e-12:
        raise UndefinedMeanError("resultant length is zero")
    r = min(r, 1.0)
    mean = float(np.angle(z) / (2 * np.pi)) % 1.0
    if spread == "circular":
        std = math.sqrt(max(0.0, -2 * math.log(r))) / (2 * math.pi)
    elif spread == "angular":
        std = math.sqrt(max(0.0, 2 * (1 - r))) / (2 * math.pi)
    else:
        raise ValueError(f"unknown spread {spread!r}")
    return CircularStats(mean, std, r)


def circular_distance(a: float, b: float) -> float:
    """Shortest distance between two phases in turns, in ``[0, 0.5]``."""
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


def relative_mean_error(mean: float, true_phase: float) -> float:
    return circular_distance(mean, true_phase) / true_phase


def n_min(m: int, sigma: float, lost_info: float) -> float:
    """Trials needed for the statistical error to reach the digital error ``2**-m``."""
    if lost_info >= 1:
        raise AllInformationLostError("all information lost")
    return 4.0**m * sigma**2 / (1 - lost_info)


def kitaev_trial_bound(eps: float, dist: float, lost_info: float) -> float:
    """Minimal trials for the Kitaev estimator to succeed with probability ``1 - eps``.

    Returns :data:`KITAEV_FAIL` when ``dist`` reaches the failure distance.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if lost_info >= 1:
        return KITAEV_FAIL
    margin = KITAEV_MARGIN**2 - dist**2 / 2
    if dist >= KITAEV_FAIL_DISTANCE * (1 - 1e-12) or margin <= 0:
        return KITAEV_FAIL
    return math.log(2 / eps) / (2 * (1 - lost_info) * margin)


def success_probability(bins: Sequence[float], true_phase: float, m: int | None = None) -> float:
    """Mass of the two bins bracketing ``true_phase`` (turns) from below and above."""
    p = np.asarray(getattr(bins, "bins", bins), dtype=float)
    size = p.size if m is None else 2**m
    if size != p.size:
        raise ValueError("histogram size does not match m")
    low = int(math.floor((true_phase % 1.0) * size + 1e-12)) % size
    return float(p[low] + p[(low + 1) % size])


def majority_vote_update(p0: float, p1: float, n: int) -> tuple[float, float]:
    """Outcome probabilities after a majority vote over ``n`` (odd) repetitions."""
    if n < 1 or n % 2 == 0:
        raise ValueError("number of repetitions must be a positive odd integer")
    if abs(p0 + p1 - 1) > 1e-9:
        raise ValueError("p0 + p1 must equal 1")
    if n == 1:
        return p0, p1
    ks = np.arange(n // 2 + 1)
    c = comb(n, ks)
    new0 = float(np.sum(c * p1**ks * p0 ** (n - ks)))
    new1 = float(np.sum(c * p0**ks * p1 ** (n - ks)))
    return new0, new1


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    coefficient: float
    residual: float


def fit_error_scaling(points: Iterable[tuple[float, float]]) -> ScalingFit:
    """Least-squares fit of ``log P = log c + a log p``."""
    pts = [(float(p), float(e)) for p, e in points]
    kept = [(p, e) for p, e in pts if p > 0 and e > 0]
    if len(kept) < len(pts):
        warnings.warn(f"dropped {len(pts) - len(kept)} nonpositive points from the fit", stacklevel=2)
    if len(kept) < 4:
        raise ValueError("need at least 4 positive points to fit")
    x = np.log([p for p, _ in kept])
    y = np.log([e for _, e in kept])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return ScalingFit(float(slope), float(math.exp(intercept)), residual)
