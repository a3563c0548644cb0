"""Result emission: per-run CSVs, summary JSON, and band CSVs for plotting.

Reports are written atomically (tmp directory, then rename) and all floats
pass through Python's repr, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import tempfile

import numpy as np

from .controller import RunResult, VerificationSummary


def _f(x) -> float:
    return float(x)


def run_csv_rows(rr: RunResult) -> list:
    n = rr.trajectory.states.shape[1]
    m = rr.trajectory.inputs.shape[1]
    s = rr.trajectory.disturbances.shape[1]
    header = (["t"] + ["x%d" % (i + 1) for i in range(n)]
              + ["u%d" % (j + 1) for j in range(m)]
              + ["w%d" % (k + 1) for k in range(s)] + ["status"])
    return [header] + [[str(v) if isinstance(v, str) else repr(_f(v)) if not
                        isinstance(v, int) else str(v) for v in row]
                       for row in rr.to_rows()]


def write_run_csv(path: str, rr: RunResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerows(run_csv_rows(rr))


def band_rows(runs: list) -> list:
    """Pointwise mean/min/max of every state and input component over the runs."""
    states = np.stack([r.trajectory.states for r in runs])
    inputs = np.stack([r.trajectory.inputs for r in runs])
    n, m = states.shape[2], inputs.shape[2]
    header = ["t"]
    for i in range(n):
        header += ["x%d_mean" % (i + 1), "x%d_min" % (i + 1), "x%d_max" % (i + 1)]
    for j in range(m):
        header += ["u%d_mean" % (j + 1), "u%d_min" % (j + 1), "u%d_max" % (j + 1)]
    rows = [header]
    T = states.shape[1]
    for t in range(T):
        row = [str(t)]
        for i in range(n):
            col = states[:, t, i]
            row += [repr(_f(col.mean())), repr(_f(col.min())), repr(_f(col.max()))]
        for j in range(m):
            if t < inputs.shape[1]:
                col = inputs[:, t, j]
                row += [repr(_f(col.mean())), repr(_f(col.min())), repr(_f(col.max()))]
            else:
                row += ["", "", ""]
        rows.append(row)
    return rows


def write_bands_csv(path: str, runs: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerows(band_rows(runs))


def summary_dict(summary: VerificationSummary, name: str, mode: str, seed: int,
                 delta: float) -> dict:
    per_run = [{
        "run": i,
        "satisfied": bool(r.satisfied),
        "feasible": bool(r.feasible_all),
        "robustness": _f(r.rho_phi),
        "input_cost": _f(r.input_cost),
        "energy_proxy": _f(r.energy_proxy),
    } for i, r in enumerate(summary.runs)]
    return {
        "scenario": name,
        "mode": mode,
        "seed": seed,
        "delta": _f(delta),
        "runs": summary.n_runs,
        "satisfaction_rate": _f(summary.satisfaction_rate),
        "feasibility_rate": _f(summary.feasibility_rate),
        "energy_proxy_mean": _f(summary.energy_mean),
        "energy_proxy_std": _f(summary.energy_std),
        "input_cost_mean": _f(summary.input_cost_mean),
        "beta": _f(summary.beta),
        "feasibility_confidence_floor": None if summary.confidence_floor is None
        else _f(summary.confidence_floor),
        "feasibility_confidence_line": summary.confidence_line,
        "per_run": per_run,
    }


def summary_json_text(summary_data: dict) -> str:
    return json.dumps(summary_data, indent=2, sort_keys=True) + "\n"


def write_report(out_dir: str, summary_data: dict, runs: list) -> None:
    """Write summary.json, bands.csv, and runs/run_XXX.csv atomically."""
    parent = os.path.dirname(os.path.abspath(out_dir)) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".report-", dir=parent)
    try:
        with open(os.path.join(tmp, "summary.json"), "w", encoding="utf-8") as fh:
            fh.write(summary_json_text(summary_data))
        write_bands_csv(os.path.join(tmp, "bands.csv"), runs)
        run_dir = os.path.join(tmp, "runs")
        os.makedirs(run_dir)
        for i, rr in enumerate(runs):
            write_run_csv(os.path.join(run_dir, "run_%03d.csv" % i), rr)
        if os.path.isdir(out_dir):
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
