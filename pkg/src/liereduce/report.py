"""Residual figures and the delimited table that goes with them."""
from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .numeric import Report  # noqa: E402

FLOOR = 1e-18  # exact zeros still need a spot on a log axis


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()


def residual_figure(rep: Report, path: Path) -> Path:
    res = np.abs(rep.residuals.astype(float))
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.semilogy(rep.xs.astype(float), np.maximum(res, FLOOR), lw=1)
    ax.axhline(rep.threshold, color="k", ls="--", lw=0.8, label=f"threshold {rep.threshold:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("|residual|")
    verdict = "PASS" if rep.passed else "FAIL"
    ax.set_title(f"{rep.name}: {verdict}", fontsize=9)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_reports(reports: Sequence[Report], outdir: str | Path) -> list[Path]:
    """One PNG per check plus summary.csv (check, max_residual, threshold, result)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, rep in enumerate(reports, start=1):
        written.append(residual_figure(rep, outdir / f"{i:02d}_{_slug(rep.name)}.png"))
    table = outdir / "summary.csv"
    with table.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "max_residual", "threshold", "result"])
        for rep in reports:
            w.writerow([rep.name, f"{rep.max_residual:.3e}", rep.threshold, "PASS" if rep.passed else "FAIL"])
    written.append(table)
    return written
