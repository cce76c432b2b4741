"""Sweep experiments.  Each returns a list of row dicts; the CLI handles I/O."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .engine import DensityState, from_vector, new_state, tensor
from .fivequbit import build_code, lps, logical_cnot
from .gates import Circuit, run_gate_step, standard_gate
from .measure import lost_information
from .metrics import (
    KITAEV_FAIL,
    UndefinedMeanError,
    circular_distance,
    circular_stats,
    distance,
    fidelity,
    fit_error_scaling,
    kitaev_trial_bound,
    n_min,
    relative_mean_error,
    success_probability,
)
from .noise import NoiseSpec, depolarize_all, time_for_fidelity
from .qpe import (
    QpeConfig,
    ideal_iteration_state,
    initial_sensor,
    ipea_run,
    pre_measurement_states,
    reduced_two_qubit,
    two_qubit_view,
)

PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
KITAEV_ANGLES = tuple((0.05 + 0.1 * i) * 2 * math.pi for i in range(10))


def fidelity_grid(lo: float = 3e-4, hi: float = 4e-2, points: int = 15) -> list[float]:
    """Worst-case gate fidelities with ``1 - F`` log-spaced between ``lo`` and ``hi``."""
    return [float(1 - x) for x in np.logspace(math.log10(lo), math.log10(hi), points)]


# -- interaction length -------------------------------------------------------

def _run(state: DensityState, circuit: Circuit, spec: NoiseSpec) -> DensityState:
    for step in circuit.steps:
        state = run_gate_step(state, step, spec)
    return state


def interaction_length_point(fid: float, depths: Sequence[int], syndrome_mode: str = "circuit", idle_noise: bool = True):
    """Fidelity with ``|++>`` after each depth of CNOTs, logical (+ noisy LPS) and physical.

    Depths are evaluated incrementally along one trajectory of CNOTs.
    """
    t2 = time_for_fidelity(fid, "dephasing") if fid < 1 else math.inf
    block = build_code()
    target = np.outer(np.kron(PLUS, PLUS), np.kron(PLUS, PLUS).conj())
    depths = sorted(depths)

    n_log = 7 if syndrome_mode == "circuit" else 6
    spec_log = NoiseSpec.uniform(n_log, t2=t2, idle_noise=idle_noise)
    plus_l = block.logical_vector(1 / math.sqrt(2), 1 / math.sqrt(2))
    parts = [from_vector(plus_l), from_vector(PLUS)] + ([new_state(1)] if n_log == 7 else [])
    log_state = tensor(*parts)
    cx_l = logical_cnot(block, 5, n_log)

    spec_phys = NoiseSpec.uniform(2, t2=t2, idle_noise=idle_noise)
    phys_state = from_vector(np.kron(PLUS, PLUS))
    cx = Circuit.sequential(2, [standard_gate("CNOT", (0, 1))])

    rows, done = [], 0
    for d in depths:
        for _ in range(d - done):
            log_state = _run(log_state, cx_l, spec_log)
            phys_state = _run(phys_state, cx, spec_phys)
        done = d
        anc = (6,) if n_log == 7 else None
        post = lps(log_state, block, syndrome_mode, spec_log, anc)
        red = reduced_two_qubit(post, block, 5)
        f_log = fidelity(red.normalized, target)
        f_phys = fidelity(phys_state.matrix, target)
        rows.append(
            {
                "depth": d,
                "fidelity": fid,
                "t2": t2,
                "f_logical": f_log,
                "f_physical": f_phys,
                "delta_f": f_log - f_phys,
                "lost_info": lost_information(post.trace_log),
            }
        )
    return rows


# -- Kitaev fidelity ----------------------------------------------------------

def kitaev_fidelity_point(
    fid: float,
    theta: float,
    kitaev_k: str = "I",
    noise: str = "dephasing",
    ec_trajectories: int = 200,
    seed: int = 0,
    base: QpeConfig | None = None,
) -> dict:
    """One accelerated Kitaev iteration (k = 1) with noisy ancillas and a perfect ground-state sensor."""
    t = time_for_fidelity(fid, noise) if fid < 1 else math.inf
    base = base or QpeConfig(m=1, axis="z", sensor_state="0", accelerated=True)
    noise_kw = {"ancilla_t2": t} if noise == "dephasing" else {"ancilla_t1": t}
    cfg = base.replace(theta=theta, **noise_kw)
    ideal = ideal_iteration_state(cfg, 0, kitaev_k)
    out = {"fidelity": fid, "theta": theta}

    def _score(c: QpeConfig) -> tuple[list[tuple[float, float, float]], list[float]]:
        items, lost = [], []
        for w, st in pre_measurement_states(c, initial_sensor(c), 0, 0.0, kitaev_k):
            red = two_qubit_view(st, c.register)
            rho = red.normalized
            items.append((w, fidelity(rho, ideal), distance(rho, ideal)))
            lost.append(lost_information(st.trace_log) if red.trace > 0 else 1.0)
        return items, lost

    (phys,), (l_phys,) = _score(cfg.replace(ancilla="physical", sps=True))
    (logi,), (l_log,) = _score(cfg.replace(ancilla="logical", sps=True, correction="lps"))
    ec_items, _ = _score(cfg.replace(ancilla="logical", sps=False, correction="ec"))
    weights = np.array([w for w, _, _ in ec_items])
    weights = weights / weights.sum()
    rng = np.random.default_rng(seed)
    picks = np.searchsorted(np.cumsum(weights), rng.random(ec_trajectories), side="right")
    picks = np.minimum(picks, len(weights) - 1)
    ec_f = np.array([ec_items[i][1] for i in picks])
    out.update(
        f_physical=phys[1],
        f_logical=logi[1],
        f_ec=float(ec_f.mean()),
        f_ec_sem=float(ec_f.std(ddof=1) / math.sqrt(len(ec_f))) if len(ec_f) > 1 else 0.0,
        f_ec_exact=float(sum(w * f for w, (_, f, _) in zip(weights, ec_items))),
        d_physical=phys[2],
        d_logical=logi[2],
        lost_physical=l_phys,
        lost_logical=l_log,
    )
    return out


def average_rows(rows: Sequence[dict], key: str = "fidelity") -> list[dict]:
    """Average numeric columns of rows sharing ``key``; SEM columns combine in quadrature."""
    groups: dict[float, list[dict]] = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    out = []
    for k in sorted(groups, reverse=True):
        g = groups[k]
        avg = {key: k}
        for col in g[0]:
            if col in (key, "theta"):
                continue
            vals = np.array([r[col] for r in g], dtype=float)
            if col.endswith("_sem"):
                avg[col] = float(np.sqrt(np.sum(vals**2)) / len(vals))
            else:
                avg[col] = float(vals.mean())
        out.append(avg)
    return out


def kitaev_trials_rows(averaged: Sequence[dict], eps_list: Iterable[float] = (0.1, 0.05, 0.01)) -> list[dict]:
    rows = []
    for r in averaged:
        for eps in eps_list:
            nb_p = kitaev_trial_bound(eps, r["d_physical"], r["lost_physical"])
            nb_l = kitaev_trial_bound(eps, r["d_logical"], r["lost_logical"])
            rows.append(
                {
                    "fidelity": r["fidelity"],
                    "eps": eps,
                    "n_physical": nb_p,
                    "n_logical": nb_l,
                    "fail_physical": nb_p == KITAEV_FAIL,
                    "fail_logical": nb_l == KITAEV_FAIL,
                }
            )
    return rows


# -- IPEA ---------------------------------------------------------------------

def _noise_fields(role: str, kind: str, t: float) -> dict:
    return {f"{role}_{'t2' if kind == 'dephasing' else 't1'}": t}


def ipea_sensing_point(
    fid: float,
    m: int,
    base: QpeConfig,
    noisy_role: str = "sensor",
    noise: str = "dephasing",
    spread: str = "circular",
) -> dict:
    """Physical and logical IPEA at one noise point: accuracy, spread, N_min and lost information."""
    t = time_for_fidelity(fid, noise) if fid < 1 else math.inf
    row = {"fidelity": fid, "m": m}
    truth = base.true_phase
    for kind in ("physical", "logical"):
        cfg = base.replace(m=m, ancilla=kind, **_noise_fields(noisy_role, noise, t))
        hist = ipea_run(cfg)
        try:
            st = circular_stats(hist.bins, spread)
            err = circular_distance(st.mean, truth)
            rel = relative_mean_error(st.mean, truth)
            sigma = st.std
        except UndefinedMeanError:
            err = rel = sigma = math.nan
        row[f"err_{kind}"] = err
        row[f"rel_err_{kind}"] = rel
        row[f"sigma_{kind}"] = sigma
        row[f"lost_{kind}"] = hist.lost_info
        row[f"n_min_{kind}"] = n_min(m, sigma, hist.lost_info) if hist.lost_info < 1 else math.inf
        row[f"p_success_{kind}"] = success_probability(hist.bins, truth)
        row[f"pruned_{kind}"] = hist.pruned_mass
    row["ratio_phys_over_log"] = row["n_min_physical"] / row["n_min_logical"] if row["n_min_logical"] else math.inf
    row["ratio_log_over_phys"] = row["n_min_logical"] / row["n_min_physical"] if row["n_min_physical"] else math.inf
    return row


def crossover(xs: Sequence[float], diffs: Sequence[float]) -> list[float]:
    """Linear-interpolated zeros of ``diffs`` along ``xs``."""
    out = []
    for (x0, d0), (x1, d1) in zip(zip(xs, diffs), zip(xs[1:], diffs[1:])):
        if not (math.isfinite(d0) and math.isfinite(d1)):
            continue
        if d0 == 0:
            out.append(x0)
        elif d0 * d1 < 0:
            out.append(x0 + (x1 - x0) * d0 / (d0 - d1))
    if diffs and diffs[-1] == 0:
        out.append(xs[-1])
    return out


def _interp(xs: Sequence[float], ys: Sequence[float], x: float) -> float:
    order = np.argsort(xs)
    return float(np.interp(x, np.asarray(xs)[order], np.asarray(ys)[order]))


def sensing_summary(rows: Sequence[dict]) -> dict:
    """Per-m crossovers of mean accuracy and of the N_min ratio, with lost information there."""
    out: dict = {}
    for m in sorted({r["m"] for r in rows}):
        sub = sorted((r for r in rows if r["m"] == m), key=lambda r: r["fidelity"])
        xs = [r["fidelity"] for r in sub]
        acc = crossover(xs, [r["err_logical"] - r["err_physical"] for r in sub])
        ratio = crossover(xs, [math.log(r["ratio_phys_over_log"]) if r["ratio_phys_over_log"] > 0 else -math.inf
                               for r in sub])
        lost = [_interp(xs, [r["lost_logical"] for r in sub], x) for x in ratio]
        out[f"m{m}"] = {"accuracy_crossovers": acc, "ratio_crossovers": ratio, "lost_at_ratio_crossovers": lost}
    return out


# -- scaling ------------------------------------------------------------------

def scaling_point(p: float, logical_state: str = "0") -> dict:
    """Depolarize all five qubits of an encoded state, post-select the trivial syndrome ideally."""
    block = build_code()
    if logical_state == "0":
        vec = block.codeword_0
    elif logical_state == "+":
        vec = block.logical_vector(1 / math.sqrt(2), 1 / math.sqrt(2))
    else:
        raise ValueError("logical state must be '0' or '+'")
    ideal = from_vector(vec)
    noisy = depolarize_all(ideal, range(5), p)
    post = lps(noisy, block, "ideal", floor=0.0)
    f = fidelity(post.matrix, ideal.matrix)
    return {"p": p, "p_error": 1 - f, "lost_info": lost_information(post.trace_log)}


def scaling_fit(rows: Sequence[dict], lo: float = 1e-3, hi: float = 1e-2):
    pts = [(r["p"], r["p_error"]) for r in rows if lo <= r["p"] <= hi]
    return fit_error_scaling(pts)
