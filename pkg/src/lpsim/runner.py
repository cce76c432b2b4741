"""Experiment registry, config resolution and the sweep runner behind the CLI."""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from . import experiments as ex
from . import svg
from .qpe import QpeConfig


class ConfigError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


SENSING_SCENARIOS = {
    # dephasing sensor on |+> measuring R_x, perfect ancillas
    "dephasing-sensor": dict(axis="x", sensor_state="+", noisy_role="sensor", noise="dephasing"),
    # amplitude-damped sensor in |1> measuring R_z, perfect ancillas
    "damping-sensor": dict(axis="z", sensor_state="1", noisy_role="sensor", noise="damping"),
    # perfect sensor in |1> measuring R_z, dephasing ancillas
    "noisy-ancillas": dict(axis="z", sensor_state="1", noisy_role="ancilla", noise="dephasing"),
}

_QPE_KEYS = ("idle_noise", "syndrome_mode", "syndrome_ancillas", "h_depth", "rz_depth", "lps_every", "prune", "n_sub")

_COMMON = {
    "seed": 1234,
    "workers": 1,
    "fidelity_lo": 3e-4,
    "fidelity_hi": 4e-2,
    "fidelity_points": 15,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "interaction-length": {
        **_COMMON,
        "depths": [1, 2, 5, 10, 20, 35, 50, 75, 100, 130, 160, 199],
        "syndrome_mode": "circuit",
        "idle_noise": True,
    },
    "kitaev-fidelity": {
        **_COMMON,
        "angles": [round(0.05 + 0.1 * i, 2) for i in range(10)],
        "kitaev_k": "I",
        "noise": "dephasing",
        "ec_trajectories": 200,
        "idle_noise": True,
        "syndrome_mode": "circuit",
        "h_depth": 10,
        "rz_depth": 3,
    },
    "kitaev-trials": {
        **_COMMON,
        "angles": [round(0.05 + 0.1 * i, 2) for i in range(10)],
        "kitaev_k": "I",
        "noise": "dephasing",
        "eps": [0.1, 0.05, 0.01],
        "ec_trajectories": 200,
        "idle_noise": True,
        "syndrome_mode": "circuit",
        "h_depth": 10,
        "rz_depth": 3,
    },
    "ipea-success": {
        **_COMMON,
        "m": [3, 9],
        "repeats": [1, 3, 5],
        "theta_turns": 1 / math.sqrt(3),
        "noisy_role": "sensor",
        "idle_noise": True,
        "syndrome_mode": "circuit",
        "h_depth": 10,
        "rz_depth": 3,
        "prune": 0.0,
    },
    "ipea-sensing": {
        **_COMMON,
        "m": [3, 4, 5, 6, 7, 8, 9],
        "theta_turns": 1 / math.sqrt(3),
        "scenario": "dephasing-sensor",
        "spread": "circular",
        "idle_noise": True,
        "syndrome_mode": "circuit",
        "h_depth": 10,
        "rz_depth": 3,
        "prune": 0.0,
    },
    "scaling": {
        "seed": 1234,
        "workers": 1,
        "p": [float(x) for x in np.logspace(-3, -2, 10)],
        "logical_state": "0",
        "fit_lo": 1e-3,
        "fit_hi": 1e-2,
    },
}

FULL_OVERRIDES: dict[str, dict[str, Any]] = {
    "interaction-length": {"depths": list(range(1, 200)), "fidelity_points": 40},
    "kitaev-fidelity": {"fidelity_points": 40},
    "kitaev-trials": {"fidelity_points": 40},
    "ipea-success": {"fidelity_points": 40, "repeats": [1, 3, 5, 7, 9]},
    "ipea-sensing": {"fidelity_points": 40},
    "scaling": {"p": [float(x) for x in np.logspace(-4, -1, 31)]},
}


# -- config -------------------------------------------------------------------

def _coerce(value: Any) -> Any:
    """YAML 1.1 reads ``1e-9`` as a string; turn such strings into floats."""
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    if isinstance(value, dict):
        return {k: _coerce(v) for k, v in value.items()}
    return value


def load_config_file(path: str | Path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return _coerce(data)


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as err:
        raise ConfigError(f"bad value for {key}: {err}") from err
    return key.strip(), _coerce(value)


def resolve_config(experiment: str, file_cfg: dict | None = None, overrides: dict | None = None, full: bool = False) -> dict:
    """Defaults, then ``--full`` grids, then the config file, then CLI overrides."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cfg = copy.deepcopy(DEFAULTS[experiment])
    if full:
        cfg.update(copy.deepcopy(FULL_OVERRIDES[experiment]))
    for layer in (file_cfg or {}, overrides or {}):
        for k, v in layer.items():
            if k == "experiment":
                if v != experiment:
                    raise ConfigError(f"config is for {v!r}, not {experiment!r}")
                continue
            if k not in cfg:
                raise ConfigError(f"unknown key {k!r} for {experiment}")
            cfg[k] = v
    _validate(experiment, cfg)
    return cfg


def _validate(experiment: str, cfg: dict) -> None:
    for key in ("depths", "angles", "m", "repeats", "p", "eps"):
        if key in cfg:
            if not isinstance(cfg[key], list) or not cfg[key]:
                raise ConfigError(f"{key} must be a nonempty list")
    if "fidelity_points" in cfg and int(cfg["fidelity_points"]) < 1:
        raise ConfigError("fidelity_points must be >= 1")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError("seed must be an integer")
    if cfg.get("scenario", "dephasing-sensor") not in SENSING_SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg['scenario']!r}")
    if any(int(r) % 2 == 0 for r in cfg.get("repeats", [1])):
        raise ConfigError("repeats must be odd")
    if any(int(m) > 9 or int(m) < 1 for m in cfg.get("m", [1])):
        raise ConfigError("m must lie in 1..9")
    if cfg.get("kitaev_k", "I") not in ("I", "S"):
        raise ConfigError("kitaev_k must be I or S")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def fidelities(cfg: dict) -> list[float]:
    return ex.fidelity_grid(cfg["fidelity_lo"], cfg["fidelity_hi"], int(cfg["fidelity_points"]))


# -- points -------------------------------------------------------------------

def _qpe_kwargs(cfg: dict) -> dict:
    return {k: cfg[k] for k in _QPE_KEYS if k in cfg}


def plan(experiment: str, cfg: dict) -> list[dict]:
    """Independent work items, in output order."""
    if experiment == "interaction-length":
        return [{"fidelity": f} for f in fidelities(cfg)]
    if experiment in ("kitaev-fidelity", "kitaev-trials"):
        return [{"fidelity": f, "angle": a, "index": i} for i, (f, a) in enumerate(
            (f, a) for f in fidelities(cfg) for a in cfg["angles"])]
    if experiment == "ipea-success":
        return [{"fidelity": f, "m": int(m), "repeats": int(n)} for m in cfg["m"] for n in cfg["repeats"] for f in fidelities(cfg)]
    if experiment == "ipea-sensing":
        return [{"fidelity": f, "m": int(m)} for m in cfg["m"] for f in fidelities(cfg)]
    if experiment == "scaling":
        return [{"p": float(p)} for p in cfg["p"]]
    raise ConfigError(f"unknown experiment {experiment!r}")


def estimated_cost(experiment: str, cfg: dict, point: dict) -> float:
    """Rough gate-step count of one point (for ``--dry-run``)."""
    if experiment == "interaction-length":
        return 5 * max(cfg["depths"]) + 24 * len(cfg["depths"])
    if experiment in ("kitaev-fidelity", "kitaev-trials"):
        return 3 * (14 + 24 + 2 * cfg.get("h_depth", 10)) + 16 * 24
    if experiment in ("ipea-success", "ipea-sensing"):
        m = point["m"]
        return m * 2 ** (m - 1) * 14 + (2**m - 1) * (24 + 2 * cfg.get("h_depth", 10) + cfg.get("rz_depth", 3))
    return 1.0


def _sensing_base(cfg: dict) -> tuple[QpeConfig, str, str]:
    sc = SENSING_SCENARIOS[cfg.get("scenario", "dephasing-sensor")]
    base = QpeConfig(
        theta=2 * math.pi * float(cfg["theta_turns"]),
        axis=sc["axis"],
        sensor_state=sc["sensor_state"],
        **_qpe_kwargs(cfg),
    )
    return base, sc["noisy_role"], sc["noise"]


def run_point(experiment: str, cfg: dict, point: dict, seed: int) -> list[dict]:
    if experiment == "interaction-length":
        return ex.interaction_length_point(point["fidelity"], cfg["depths"], cfg["syndrome_mode"], cfg["idle_noise"])
    if experiment in ("kitaev-fidelity", "kitaev-trials"):
        base = QpeConfig(m=1, axis="z", sensor_state="0", accelerated=True, **_qpe_kwargs(cfg))
        row = ex.kitaev_fidelity_point(
            point["fidelity"], 2 * math.pi * point["angle"], cfg["kitaev_k"], cfg["noise"],
            int(cfg["ec_trajectories"]), seed, base,
        )
        return [row]
    if experiment == "ipea-success":
        base = QpeConfig(theta=2 * math.pi * float(cfg["theta_turns"]), axis="x", sensor_state="+",
                         repeats=point["repeats"], **_qpe_kwargs(cfg))
        role = cfg["noisy_role"]
        row = ex.ipea_sensing_point(point["fidelity"], point["m"], base, noisy_role=role)
        ideal = ex.ipea_sensing_point(1.0, point["m"], base, noisy_role=role)
        return [{
            "fidelity": point["fidelity"], "m": point["m"], "n": point["repeats"],
            "p_success_ideal": ideal["p_success_physical"],
            "p_success_physical": row["p_success_physical"],
            "p_success_logical": row["p_success_logical"],
            "diff_physical": ideal["p_success_physical"] - row["p_success_physical"],
            "diff_logical": ideal["p_success_physical"] - row["p_success_logical"],
            "lost_logical": row["lost_logical"],
            "pruned_physical": row["pruned_physical"],
            "pruned_logical": row["pruned_logical"],
        }]
    if experiment == "ipea-sensing":
        base, role, noise = _sensing_base(cfg)
        base = base.replace(m=point["m"])
        return [ex.ipea_sensing_point(point["fidelity"], point["m"], base, role, noise, spread=cfg.get("spread", "circular"))]
    if experiment == "scaling":
        return [ex.scaling_point(point["p"], cfg["logical_state"])]
    raise ConfigError(f"unknown experiment {experiment!r}")


def _point_job(args):
    experiment, cfg, point, seed = args
    return run_point(experiment, cfg, point, seed)


def point_seeds(root: int, count: int) -> list[int]:
    """Per-point seeds derived by index, independent of scheduling."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(root).spawn(count)]


# -- aggregation --------------------------------------------------------------

def aggregate(experiment: str, cfg: dict, rows: list[dict]) -> tuple[list[dict], dict]:
    """Final table plus a summary dict for ``meta.json``."""
    summary: dict[str, Any] = {}
    if experiment in ("kitaev-fidelity", "kitaev-trials"):
        rows = ex.average_rows(rows)
        xs = [r["fidelity"] for r in rows]
        summary["crossovers_logical_minus_physical"] = ex.crossover(xs, [r["f_logical"] - r["f_physical"] for r in rows])
        if experiment == "kitaev-trials":
            rows = ex.kitaev_trials_rows(rows, cfg["eps"])
    elif experiment == "ipea-sensing":
        summary.update(ex.sensing_summary(rows))
    elif experiment == "interaction-length":
        summary["sign_change_depths"] = sorted({
            d for d in cfg["depths"]
            if ex.crossover(*zip(*[(r["fidelity"], r["delta_f"]) for r in rows if r["depth"] == d]))
        })
    elif experiment == "scaling":
        try:
            fit = ex.scaling_fit(rows, cfg["fit_lo"], cfg["fit_hi"])
            summary["fit"] = {"exponent": fit.exponent, "coefficient": fit.coefficient, "residual": fit.residual}
        except ValueError as err:
            summary["fit_error"] = str(err)
    pruned = sum(v for r in rows for k, v in r.items() if k.startswith("pruned_") and isinstance(v, float))
    summary["pruned_mass_total"] = pruned
    return rows, summary


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def plot(experiment: str, rows: list[dict]) -> str:
    if experiment == "interaction-length":
        depths = sorted({r["depth"] for r in rows})
        fids = sorted({r["fidelity"] for r in rows})
        lut = {(r["depth"], r["fidelity"]): r["delta_f"] for r in rows}
        grid = [[lut.get((d, f), math.nan) for d in depths] for f in fids]
        return svg.heatmap(grid, depths, fids, "F_logical - F_physical", "CNOT count", "worst-case fidelity")
    if experiment == "kitaev-fidelity":
        xs = [r["fidelity"] for r in rows]
        return svg.line_plot({
            "physical+SPS": (xs, [r["f_physical"] for r in rows]),
            "logical+SPS+LPS": (xs, [r["f_logical"] for r in rows]),
            "logical+EC": (xs, [r["f_ec"] for r in rows]),
        }, "Kitaev iteration fidelity", "worst-case fidelity", "fidelity")
    if experiment == "scaling":
        xs = [math.log10(r["p"]) for r in rows if r["p"] > 0]
        return svg.line_plot({"P_error": (xs, [r["p_error"] for r in rows if r["p"] > 0])},
                             "error after post-selection", "log10 p", "P_error", logy=True)
    if experiment == "ipea-sensing":
        series = {}
        for m in sorted({r["m"] for r in rows}):
            sub = [r for r in rows if r["m"] == m]
            xs = [r["fidelity"] for r in sub]
            series[f"phys m={m}"] = (xs, [r["err_physical"] for r in sub])
            series[f"log m={m}"] = (xs, [r["err_logical"] for r in sub])
        return svg.line_plot(series, "error of the circular mean", "worst-case fidelity", "turns", logy=True)
    if experiment == "ipea-success":
        series = {}
        for key in sorted({(r["m"], r["n"]) for r in rows}):
            sub = [r for r in rows if (r["m"], r["n"]) == key]
            xs = [r["fidelity"] for r in sub]
            series[f"phys m={key[0]} n={key[1]}"] = (xs, [r["diff_physical"] for r in sub])
            series[f"log m={key[0]} n={key[1]}"] = (xs, [r["diff_logical"] for r in sub])
        return svg.line_plot(series, "ideal minus noisy success probability", "worst-case fidelity", "difference")
    if experiment == "kitaev-trials":
        series = {}
        for eps in sorted({r["eps"] for r in rows}):
            sub = [r for r in rows if r["eps"] == eps]
            xs = [r["fidelity"] for r in sub]
            series[f"phys eps={eps}"] = (xs, [r["n_physical"] for r in sub])
            series[f"log eps={eps}"] = (xs, [r["n_logical"] for r in sub])
        return svg.line_plot(series, "Kitaev trial bound", "worst-case fidelity", "N", logy=True)
    return svg.line_plot({}, experiment)


# -- driver -------------------------------------------------------------------

@dataclass
class RunResult:
    rows: list[dict]
    summary: dict
    completed: int
    total: int
    outdir: Path | None

    @property
    def partial(self) -> bool:
        return self.completed < self.total


def execute(
    experiment: str,
    cfg: dict,
    outdir: Path | None = None,
    budget: float | None = None,
    make_plot: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> RunResult:
    points = plan(experiment, cfg)
    seeds = point_seeds(cfg["seed"], len(points))
    jobs = [(experiment, cfg, p, s) for p, s in zip(points, seeds)]
    start = time.monotonic()
    results: list[list[dict]] = []
    workers = int(cfg.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_point_job, j) for j in jobs]
            for fut in futures:  # gathered in submission order
                if budget is not None and time.monotonic() - start > budget:
                    for f in futures:
                        f.cancel()
                    break
                results.append(fut.result())
                if progress:
                    progress(len(results), len(jobs))
    else:
        for j in jobs:
            if budget is not None and time.monotonic() - start > budget:
                break
            results.append(_point_job(j))
            if progress:
                progress(len(results), len(jobs))
    rows = [r for chunk in results for r in chunk]
    if experiment in ("kitaev-fidelity", "kitaev-trials") and len(results) < len(jobs):
        # only average fidelities whose angles all finished
        n_angles = len(cfg["angles"])
        rows = rows[: (len(results) // n_angles) * n_angles]
    table, summary = aggregate(experiment, cfg, rows) if rows else ([], {"pruned_mass_total": 0.0})
    res = RunResult(table, summary, len(results), len(jobs), outdir)
    if outdir is not None:
        write_outputs(experiment, cfg, res, points, make_plot)
    return res


def write_outputs(experiment: str, cfg: dict, res: RunResult, points: list[dict], make_plot: bool) -> None:
    out = res.outdir
    out.mkdir(parents=True, exist_ok=True)
    (out / "data.csv").write_text(rows_to_csv(res.rows))
    meta = {
        "experiment": experiment,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "version": __version__,
        "status": "partial" if res.partial else "complete",
        "completed_points": points[: res.completed],
        "total_points": res.total,
        "summary": res.summary,
        "pruned_mass_total": res.summary.get("pruned_mass_total", 0.0),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
    if make_plot and res.rows:
        (out / "plot.svg").write_text(plot(experiment, res.rows))


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return str(v)
