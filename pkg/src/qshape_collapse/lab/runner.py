"""Scenario execution and result persistence."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..dynamics import (
    EnsembleResult,
    TrajectoryRecord,
    gamblers_ruin,
    run_ensemble,
    run_superselection,
    run_trajectory,
    zeno_run,
    zeno_survival_oracle,
)
from ..netcore import label
from ..qcore import PAULI_X, PAULI_Z, HermitianOperator, QuantumState
from ..qiit import CollapseOperatorSet
from .scenario import Scenario, load_scenario

log = logging.getLogger(__name__)

SIG_DIGITS = 12


def round_sig(obj: Any, digits: int = SIG_DIGITS) -> Any:
    """Recursively round floats to ``digits`` significant digits (NaN/inf become None)."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{digits}g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist(), digits)
    if isinstance(obj, dict):
        return {str(k): round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    """Git-style blob hash of the canonical JSON encoding."""
    data = canonical_json(obj).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class Series:
    header: list[str]
    rows: list[list[float]]


@dataclass
class ResultBundle:
    scenario: dict
    config_hash: str
    summary: dict
    series: dict[str, Series] = field(default_factory=dict)
    records: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def summary_hash(self) -> str:
        return content_hash(self.summary)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "summary": self.summary,
            "summary_hash": self.summary_hash,
            "records": self.records,
            "series": sorted(self.series),
            "meta": self.meta,
        }

    def summary_text(self) -> str:
        lines = [f"scenario: {self.scenario.get('name')}", f"config hash: {self.config_hash}"]
        lines += _flatten(self.summary)
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        """Persist as ``<out>/<name>-<hash>/{bundle.json, summary.txt, series/*.csv}``."""
        run_dir = Path(out_dir) / f"{self.scenario.get('name', 'run')}-{self.config_hash[:10]}"
        (run_dir / "series").mkdir(parents=True, exist_ok=True)
        (run_dir / "bundle.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        (run_dir / "summary.txt").write_text(self.summary_text())
        for name, s in self.series.items():
            with open(run_dir / "series" / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(s.header)
                w.writerows(round_sig(s.rows))
        return run_dir


def _flatten(d: Any, prefix: str = "") -> list[str]:
    if isinstance(d, dict) and d:
        return [line for k, v in d.items() for line in _flatten(v, f"{prefix}{k}.")]
    return [f"{prefix[:-1]}: {d}"]


# --- kind handlers -----------------------------------------------------------


def _trajectory_series(rec: TrajectoryRecord, n: int) -> Series:
    d = rec.states.shape[1]
    header = ["t"] + [f"p{label(s, n)}" for s in range(d)] + ["norm"]
    probs = np.abs(rec.states) ** 2
    rows = [[float(t), *map(float, p), float(nm)] for t, p, nm in zip(rec.times, probs, rec.norms)]
    return Series(header, rows)


def _trajectory_summary(rec: TrajectoryRecord, n: int) -> dict:
    out = rec.collapse_outcome
    return {
        "collapse_outcome": "none" if out is None else label(out, n),
        "collapse_time": rec.collapse_time,
        "dt": rec.dt,
        "final_probabilities": {label(s, n): float(p) for s, p in enumerate(np.abs(rec.states[-1]) ** 2)},
        "norm_range": [float(rec.norms.min()), float(rec.norms.max())],
        "noise_warnings": list(rec.noise_warnings),
    }


def _ensemble_summary(res: EnsembleResult, n: int, analysis) -> dict:
    s = res.summary()
    out = {"trials": res.trials, "dt": res.dt, "norm_range": s["norm_range"], "noise_warnings": s["noise_warnings"]}
    keyed = {("none" if k is None else label(k, n)): v for k, v in res.outcomes.items()}
    if "frequencies" in analysis:
        out["outcomes"] = dict(sorted(keyed.items()))
        out["frequencies"] = {k: v / res.trials for k, v in sorted(keyed.items())}
        out["intervals_3sigma"] = {
            ("none" if k is None else label(k, n)): list(res.interval(k)) for k in sorted(res.outcomes, key=lambda x: -1 if x is None else x)
        }
    if "martingale" in analysis:
        out["max_martingale_z"] = s["max_martingale_z"]
        out["branch_weight_initial"] = res.branch_mean[0].tolist()
        out["branch_weight_final"] = res.branch_mean[-1].tolist()
    if "collapse_times" in analysis:
        out["collapsed_fraction"] = s["collapsed_fraction"]
        out["collapse_time_median"] = s["collapse_time_median"]
        out["collapse_time_quartiles"] = s["collapse_time_quartiles"]
    return out


def _ensemble_series(res: EnsembleResult) -> Series:
    E = res.branch_mean.shape[1]
    header = ["t"] + [f"branch{e}_mean" for e in range(E)] + [f"branch{e}_std" for e in range(E)]
    rows = [[float(t), *map(float, m), *map(float, sd)] for t, m, sd in zip(res.times, res.branch_mean, res.branch_std)]
    return Series(header, rows)


def _run_collapse(sc: Scenario, bundle: ResultBundle, workers: int) -> None:
    n = sc.network.n_units
    system = sc.system()
    index = int(sc.doc.get("trajectory_index", 0))
    rec = run_trajectory(sc.config, system, index) if sc.kind == "collapse" else run_superselection(sc.config, system, index)
    bundle.summary.update(_trajectory_summary(rec, n))
    bundle.series["trajectory"] = _trajectory_series(rec, n)
    bundle.records.append({"index": index, "collapse_outcome": bundle.summary["collapse_outcome"], "collapse_time": rec.collapse_time})


def _run_ensemble(sc: Scenario, bundle: ResultBundle, workers: int) -> None:
    n = sc.network.n_units
    basis = sc.basis()
    if sc.sweep is None:
        runs = [(None, sc.config)]
    else:
        key, values = sc.sweep
        runs = [(v, sc.config.replace(**{key: v})) for v in values]
    for value, cfg in runs:
        res = run_ensemble(cfg, sc.system(cfg, basis), sc.trials, workers=workers)
        summ = _ensemble_summary(res, n, sc.analysis)
        tag = "ensemble" if value is None else f"{sc.sweep[0]}={value}"
        if value is None:
            bundle.summary.update(summ)
        else:
            bundle.summary.setdefault("sweep", {})[str(value)] = summ
        if "martingale" in sc.analysis:
            bundle.series[tag.replace("=", "_")] = _ensemble_series(res)
        bundle.records.append({"run": tag, "branches": [list(b) for b in res.branch_labels]})


def _run_zeno(sc: Scenario, bundle: ResultBundle, workers: int) -> None:
    z = sc.doc["zeno"]
    omega, t_max = float(z["omega"]), float(z["t_max"])
    H = HermitianOperator(omega * PAULI_X)
    Q = CollapseOperatorSet.from_operators([HermitianOperator((np.eye(2) + PAULI_Z) / 2)], labels=[("P0",)])
    psi0 = QuantumState.basis(0, 2)
    rng = np.random.default_rng(sc.config.seed)
    rows, table = [], []
    for N in sorted(z["measurements"]):
        r = zeno_run(H, Q, psi0, t_max / N, t_max, rng, sc.trials)
        oracle = zeno_survival_oracle(omega, t_max / N, N)
        rows.append([N, t_max / N, r.survival, oracle, r.final_occupancy])
        table.append({"measurements": N, "interval": t_max / N, "survival": r.survival, "oracle": oracle,
                      "abs_error": abs(r.survival - oracle), "final_occupancy": r.final_occupancy})
    bundle.summary["trials"] = sc.trials
    bundle.summary["zeno"] = table
    bundle.summary["max_abs_error"] = max(t["abs_error"] for t in table)
    bundle.series["zeno"] = Series(["measurements", "interval", "survival", "oracle", "final_occupancy"], rows)


def _run_ruin(sc: Scenario, bundle: ResultBundle, workers: int) -> None:
    s1, s2 = sc.doc["ruin"]["stakes"]
    r = gamblers_ruin(s1, s2, sc.trials, np.random.default_rng(sc.config.seed))
    se = math.sqrt(max(r.p1 * r.p2, 1e-300) / r.trials)
    bundle.summary.update({
        "trials": r.trials, "stakes": [s1, s2], "p1": r.p1, "p2": r.p2,
        "p1_expected": s1 / (s1 + s2), "p1_interval_3sigma": [r.p1 - 3 * se, r.p1 + 3 * se],
        "mean_duration": r.mean_duration, "mean_duration_expected": s1 * s2,
    })


_HANDLERS = {
    "collapse": _run_collapse,
    "superselection": _run_collapse,
    "ensemble": _run_ensemble,
    "zeno": _run_zeno,
    "ruin": _run_ruin,
}


def execute(sc: Scenario, workers: int = 1) -> ResultBundle:
    echo = dict(sc.doc)
    echo.setdefault("trials", sc.trials)
    bundle = ResultBundle(scenario=echo, config_hash=content_hash(echo), summary={})
    t0 = time.perf_counter()
    _HANDLERS[sc.kind](sc, bundle, workers)
    if sc.notices:
        bundle.summary["notices"] = list(sc.notices)
    bundle.summary = round_sig(bundle.summary)
    bundle.meta = {"wall_seconds": round(time.perf_counter() - t0, 3), "version": __version__,
                   "created": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    return bundle


def run_scenario(path: str | Path, out: str | Path | None = None, seed: int | None = None,
                 trials: int | None = None, workers: int = 1) -> ResultBundle:
    """Load, run and (when ``out`` is given) persist a scenario."""
    sc = load_scenario(path).with_overrides(seed=seed, trials=trials)
    bundle = execute(sc, workers=workers)
    if out is not None:
        run_dir = bundle.write(out)
        bundle.meta["output_dir"] = str(run_dir)
        log.info("wrote %s", run_dir)
    return bundle
