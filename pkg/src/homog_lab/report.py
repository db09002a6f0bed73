"""Writing experiment reports: CSV tables, SVG convergence plots, provenance."""

from __future__ import annotations

import csv
import json
import re
from datetime import datetime, timezone
from pathlib import Path

RESULTS_HEADER = ("experiment", "epsilon", "t", "x", "statistic_name", "value", "se")
VERDICTS_HEADER = ("criterion_id", "measured", "threshold", "pass")


def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_results(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in rows:
            w.writerow([r.experiment, _num(r.epsilon), _num(r.t), _num(r.x),
                        r.statistic_name, _num(r.value), _num(r.se)])


def write_verdicts(verdicts, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VERDICTS_HEADER)
        for v in verdicts:
            w.writerow([v.criterion_id, _num(v.measured), _num(v.threshold),
                        "true" if v.passed else "false"])


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_")


def write_curve_svg(curve, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(curve.eps, curve.values, marker="o")
    if curve.reference is not None:
        ax.axhline(curve.reference, color="grey", linestyle="--", linewidth=1)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("epsilon")
    ax.set_ylabel(curve.ylabel)
    ax.set_title(curve.name)
    fig.tight_layout()
    # fixed metadata and hash salt keep the file reproducible
    matplotlib.rcParams["svg.hashsalt"] = "homog-lab"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(reports, out_dir) -> list:
    """Write ``results.csv``, ``verdicts.csv``, one SVG per curve and ``report.json``.

    ``reports`` may be one report or a list; an empty list gives header-only
    tables.  Run-dependent provenance (runtime, timestamp) goes only into
    ``report.json`` so the CSV files are byte-identical across reruns.
    """
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for rep in reports for r in rep.rows]
    verdicts = [v for rep in reports for v in rep.verdicts]
    written = [out / "results.csv", out / "verdicts.csv"]
    write_results(rows, written[0])
    write_verdicts(verdicts, written[1])
    for rep in reports:
        for c in rep.curves:
            p = out / f"{_slug(rep.experiment)}_{_slug(c.name)}.svg"
            write_curve_svg(c, p)
            written.append(p)
    meta = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "reports": [dict(rep.provenance, runtime_seconds=round(rep.runtime, 3),
                         passed=rep.passed) for rep in reports],
    }
    (out / "report.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    written.append(out / "report.json")
    return written
