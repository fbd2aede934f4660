"""Result tables across finished runs, plus plot-script emission.

Every number is recomputed from the raw metrics.csv files (the last
evaluation row of each run); runs with the same configuration are grouped
into a mean +- stddev row.
"""

from __future__ import annotations

from pathlib import Path

from .config import load_config
from .metrics import read_metrics

PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Plots reward / penalty / multiplier-weight time series from metrics.csv
# files. Data comes only from the CSVs listed below.
import csv
import sys

import matplotlib.pyplot as plt

RUNS = {runs!r}


def load(path):
    with open(path) as fh:
        assert fh.readline().startswith("#")
        rows = list(csv.DictReader(fh))
    return rows


fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 9))
for run in RUNS:
    rows = load(run + "/metrics.csv")
    steps = [float(r["learner_step"]) for r in rows]
    lam = [float(r["mean_lambda_weight"]) for r in rows]
    ev = [(float(r["learner_step"]), float(r[REWARD_COL]), float(r[PENALTY_COL]))
          for r in rows if r.get(REWARD_COL)]
    axes[0].plot([e[0] for e in ev], [e[1] for e in ev], label=run)
    axes[1].plot([e[0] for e in ev], [e[2] for e in ev], label=run)
    axes[2].plot(steps, lam, label=run)
axes[0].set_ylabel("eval reward (full)")
axes[1].set_ylabel("eval penalty (full)")
axes[2].set_ylabel("mean multiplier weight")
axes[2].set_xlabel("learner step")
axes[0].legend(fontsize=7)
plt.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else "metrics.png"
plt.savefig(out, dpi=120)
print("wrote", out)
"""


def _last_eval_row(rows: list[dict], tag: str) -> dict | None:
    key = f"eval_{tag}reward_full"
    for row in reversed(rows):
        if row.get(key) is not None:
            return row
    return None


def collect_run(run_dir) -> list[dict]:
    """Per-run report records: one per evaluation-z (single record otherwise)."""
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.cfg")
    _, rows = read_metrics(run_dir / "metrics.csv")
    z_values = cfg.eval_z_values() or [None]
    records = []
    for z in z_values:
        tag = "" if z is None else f"z{z:g}_"
        row = _last_eval_row(rows, tag)
        if row is None:
            raise ValueError(f"{run_dir}: no evaluation rows in metrics.csv")
        n_costs = 0
        while f"eval_{tag}penalty{n_costs}_full" in row:
            n_costs += 1
        rec = {
            "run": str(run_dir),
            "mode": cfg.mode,
            "env": cfg.env,
            "z": z,
            "group": (run_dir / "config.cfg").read_text(),
            "reward_full": row[f"eval_{tag}reward_full"],
            "reward_last": row[f"eval_{tag}reward_last"],
            "overshoot_full": row[f"eval_{tag}overshoot_full"],
            "overshoot_last": row[f"eval_{tag}overshoot_last"],
            "penalty_full": sum(row[f"eval_{tag}penalty{i}_full"] for i in range(n_costs)),
            "penalty_last": sum(row[f"eval_{tag}penalty{i}_last"] for i in range(n_costs)),
        }
        records.append(rec)
    return records


NUMERIC = ("reward_full", "penalty_full", "reward_last", "penalty_last",
           "overshoot_full", "overshoot_last")


def build_report(run_dirs) -> tuple[list[dict], list[str]]:
    """Returns (records incl. aggregate rows, warnings)."""
    records, warnings = [], []
    for run_dir in run_dirs:
        try:
            records.extend(collect_run(run_dir))
        except (OSError, ValueError) as err:
            warnings.append(f"skipping {run_dir}: {err}")
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        groups.setdefault((rec["group"], rec["z"]), []).append(rec)
    aggregates = []
    for (_, z), members in groups.items():
        if len(members) < 2:
            continue
        agg = {"run": f"mean+-std over {len(members)} runs", "mode": members[0]["mode"],
               "env": members[0]["env"], "z": z, "aggregate": True}
        for key in NUMERIC:
            vals = [m[key] for m in members]
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            agg[key] = mean
            agg[key + "_std"] = var**0.5
        aggregates.append(agg)
    return records + aggregates, warnings


def format_table(records: list[dict]) -> str:
    headers = ["run", "env", "mode", "z", "reward_full", "penalty_full",
               "reward_last", "penalty_last", "overshoot_full", "overshoot_last"]
    rows = [headers]
    for rec in records:
        row = [Path(rec["run"]).name if not rec.get("aggregate") else rec["run"],
               rec["env"], rec["mode"], "" if rec["z"] is None else f"{rec['z']:g}"]
        for key in NUMERIC[:2] + NUMERIC[2:4] + NUMERIC[4:]:
            val = f"{rec[key]:.4f}"
            if rec.get(key + '_std') is not None:
                val += f" +- {rec[key + '_std']:.4f}"
            row.append(val)
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def format_csv(records: list[dict]) -> str:
    headers = ["run", "env", "mode", "z"] + list(NUMERIC)
    lines = [",".join(headers)]
    for rec in records:
        cells = [str(rec["run"]), rec["env"], rec["mode"],
                 "" if rec["z"] is None else f"{rec['z']:g}"]
        cells += [f"{rec[k]:.6f}" for k in NUMERIC]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_plot_script(path, run_dirs, reward_col: str = "eval_reward_full",
                     penalty_col: str = "eval_penalty0_full") -> None:
    script = PLOT_SCRIPT.format(runs=[str(r) for r in run_dirs])
    script = script.replace("REWARD_COL", repr(reward_col)).replace(
        "PENALTY_COL", repr(penalty_col))
    Path(path).write_text(script)
