"""Render benchmark summary CSVs as convergence curves with error bands.

Input schema (one row per algorithm and query index):

    algorithm,n,mean_best,sd_best,replications

Each algorithm becomes one line (mean best value vs number of queries) with
a shaded band of ``band_multiplier`` standard deviations around it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_COLUMNS = ["algorithm", "n", "mean_best", "sd_best", "replications"]


class SchemaError(ValueError):
    """Summary CSV does not match the expected column layout."""


@dataclass
class PlotSpec:
    csv_paths: list
    band_multiplier: float = 0.2
    xlabel: str = "number of queries"
    ylabel: str = "best observed value"
    title: str | None = None
    out_path: str | Path = "figure.png"
    vector: bool = False
    algorithms: list = field(default_factory=list)  # optional subset filter

    def __post_init__(self):
        if self.band_multiplier <= 0:
            raise ValueError("band_multiplier must be > 0")
        if not self.csv_paths:
            raise ValueError("at least one CSV path is required")


def read_summary(path) -> dict[str, dict[str, np.ndarray]]:
    """Parse one summary CSV into {algorithm: {n, mean, sd}} arrays."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != EXPECTED_COLUMNS:
            missing = [c for c in EXPECTED_COLUMNS if c not in header]
            extra = [c for c in header if c not in EXPECTED_COLUMNS]
            raise SchemaError(
                f"{path}: bad columns; missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        rows = [(r[0], int(r[1]), float(r[2]), float(r[3])) for r in reader if r]
    curves: dict[str, dict[str, list]] = {}
    for alg, n, mean, sd in rows:
        c = curves.setdefault(alg, {"n": [], "mean": [], "sd": []})
        c["n"].append(n)
        c["mean"].append(mean)
        c["sd"].append(sd)
    out = {}
    for alg, c in curves.items():
        order = np.argsort(c["n"])
        out[alg] = {
            "n": np.asarray(c["n"])[order],
            "mean": np.asarray(c["mean"])[order],
            "sd": np.asarray(c["sd"])[order],
        }
    return out


def collect_curves(spec: PlotSpec) -> dict[str, dict[str, np.ndarray]]:
    """Merge curves from all CSVs; a repeated algorithm name gets the file
    stem appended so every curve stays distinguishable."""
    merged: dict[str, dict[str, np.ndarray]] = {}
    for path in spec.csv_paths:
        for alg, curve in read_summary(path).items():
            label = alg if alg not in merged else f"{alg} ({Path(path).stem})"
            merged[label] = curve
    if spec.algorithms:
        missing = [a for a in spec.algorithms if a not in merged]
        if missing:
            raise SchemaError(f"requested algorithms not in data: {missing}")
        merged = {a: merged[a] for a in spec.algorithms}
    if not merged:
        raise SchemaError("no algorithm rows found in the input CSVs")
    return merged


def render(spec: PlotSpec):
    """Draw the figure and write it to ``spec.out_path``; returns the Figure."""
    curves = collect_curves(spec)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for alg in sorted(curves):
        c = curves[alg]
        band = spec.band_multiplier * c["sd"]
        (line,) = ax.plot(c["n"], c["mean"], label=alg, linewidth=1.8)
        ax.fill_between(c["n"], c["mean"] - band, c["mean"] + band, alpha=0.2, color=line.get_color())
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fmt = "svg" if (spec.vector or out.suffix == ".svg") else None
    fig.savefig(out, dpi=150, format=fmt)
    return fig
