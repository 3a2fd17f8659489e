"""Parameter sweeps and DP comparisons producing CSV-ready rows."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import yaml

from . import __version__
from .config import ExperimentConfig, config_to_dict
from .dp import DpGrid, solve
from .energy import SystemParams
from .policies import DpTable, make_policy
from .simulator import evaluate, exact_expected_energy
from .chains import stationary_dist
from .threshold import find_q_threshold

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "axis", "value", "policy", "D", "K", "Q", "P11", "P00", "Pgg", "Pbb", "n", "base_seed",
    "mean_energy_J", "stddev_J", "dp_value_J", "rel_gap", "params_hash", "error",
)


def policy_params(name: str, params: SystemParams) -> SystemParams:
    """Buffer size each policy is evaluated at: none for zero-opt, at least D for large-sub."""
    if name == "zero-opt":
        return params.with_(Q=0)
    if name == "large-sub" and params.Q < params.D:
        return params.with_(Q=params.D)
    return params


def apply_axis(params: SystemParams, axis: str | None, value: float) -> SystemParams:
    if axis is None:
        return params
    if axis == "P11":
        return params.with_(P11=float(value))
    if axis == "K":
        return params.with_(K=int(value))
    return params.with_(**{axis: int(value) if value == int(value) else float(value)})


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _base_row(axis, value, name, p: SystemParams, n, seed) -> dict:
    return {
        "axis": axis or "",
        "value": "" if axis is None else value,
        "policy": name,
        "D": p.D, "K": p.K, "Q": p.Q,
        "P11": p.P11, "P00": p.P00, "Pgg": p.Pgg, "Pbb": p.Pbb,
        "n": n, "base_seed": seed,
        "mean_energy_J": None, "stddev_J": None, "dp_value_J": None, "rel_gap": None,
        "params_hash": p.digest(), "error": "",
    }


class _ThresholdCache:
    """BACS thresholds keyed by the parameters with the buffer size removed."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.store: dict[str, float] = {}

    def __call__(self, params: SystemParams) -> float:
        if self.cfg.q_threshold is not None:
            return self.cfg.q_threshold
        key = params.with_(Q=0).digest()
        if key not in self.store:
            res = find_q_threshold(params, self.cfg.episodes, base_seed=self.cfg.seed, rounding=self.cfg.rounding)
            self.store[key] = res.q_threshold
        return self.store[key]


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    """Evaluate every policy at every sweep value; one row per cell.

    A failing cell gets its message in the ``error`` column and the sweep continues.
    """
    values = cfg.values if cfg.axis else [None]
    thresholds = _ThresholdCache(cfg)
    rows = []
    for value in values:
        base = apply_axis(cfg.params, cfg.axis, value) if cfg.axis else cfg.params
        for name in sorted(cfg.policies):
            p = policy_params(name, base)
            row = _base_row(cfg.axis, value, name, p, cfg.episodes, cfg.seed)
            try:
                kw = {"q_threshold": thresholds(p)} if name == "bacs" else {}
                if name == "dp":
                    kw["solution"] = solve(p, DpGrid())
                policy = make_policy(name, p, **kw)
                rep = evaluate(p, policy, cfg.episodes, cfg.seed, rounding=cfg.rounding, initial=cfg.initial)
                row["mean_energy_J"] = rep.mean_energy
                row["stddev_J"] = rep.std_energy
            except Exception as exc:  # recorded per cell
                log.warning("cell %s=%s policy=%s failed: %s", cfg.axis, value, name, exc)
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def dp_initial_value(solution, params: SystemParams, initial=None) -> float:
    if initial is not None:
        return solution.initial_value(*initial)
    pc = stationary_dist(params.cpu_chain)
    ph = stationary_dist(params.channel_chain)
    return sum(pc[c] * ph[h] * solution.initial_value(c, h) for c in (0, 1) for h in (0, 1))


def run_dp_compare(cfg: ExperimentConfig, grid: DpGrid = DpGrid()) -> list[dict]:
    """Exact expected energy of each policy next to the DP optimum on the same grid.

    Policies are evaluated by path enumeration (no sampling), so ``n`` is 0.
    Budget errors from the DP propagate.
    """
    p = cfg.params
    solution = solve(p, grid)
    opt = dp_initial_value(solution, p, cfg.initial)
    thresholds = _ThresholdCache(cfg)
    rows = []
    for name in sorted(cfg.policies):
        row = _base_row(None, None, name, p, 0, cfg.seed)
        row["dp_value_J"] = opt
        try:
            kw = {"q_threshold": thresholds(p)} if name == "bacs" else {}
            policy = DpTable(p, solution) if name == "dp" else make_policy(name, p, **kw)
            val = exact_expected_energy(p, policy, rounding=True, initial=cfg.initial)
            row["mean_energy_J"] = val
            row["rel_gap"] = (val - opt) / opt if opt > 0 else 0.0
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_results(rows: list[dict], cfg: ExperimentConfig, out, command: str) -> tuple[Path, Path]:
    """Write the CSV and a YAML sidecar holding the fully resolved configuration."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    meta = out.with_name(out.name + ".meta.yaml")
    meta.write_text(
        yaml.safe_dump(
            {"command": command, "version": __version__, "config": config_to_dict(cfg)}, sort_keys=True
        )
    )
    return out, meta
