"""Render benchmark figures from result CSV files.

Input is the benchmark runner's CSV output, consumed purely through the file
schema: per-round rows (``experiment_id, algorithm, run, t, cumulative_regret,
learner_loss, comparator_loss``) for regret-versus-time figures, and sweep
rows (``experiment_id, axis, value, algorithm, run, final_cumulative_regret``)
for final-regret figures.  Rendering is read-only and deterministic: the same
inputs produce byte-identical images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KIND_REGRET_VS_TIME = "regret_vs_time"
KIND_FINAL_VS_AVAILABILITY = "final_vs_availability"
KIND_FINAL_VS_K = "final_vs_K"
KINDS = (KIND_REGRET_VS_TIME, KIND_FINAL_VS_AVAILABILITY, KIND_FINAL_VS_K)

RESULT_COLUMNS = ("algorithm", "run", "t", "cumulative_regret")
SWEEP_COLUMNS = ("axis", "value", "algorithm", "run", "final_cumulative_regret")


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure: inputs, kind, output path, and per-algorithm labels.

    When ``labels`` is given, every algorithm appearing in the CSV must be
    either labeled or listed in ``exclude``; silently dropping a curve would
    misrepresent the benchmark.
    """

    csv_paths: tuple[str, ...]
    kind: str
    out_path: str
    labels: dict[str, str] = field(default_factory=dict)
    exclude: tuple[str, ...] = ()
    dpi: int = 150
    title: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r} (expected one of {KINDS})")
        if not self.csv_paths:
            raise ValueError("need at least one input CSV")


def _read_rows(paths, required) -> list[dict]:
    rows: list[dict] = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [col for col in required if col not in header]
            if missing:
                raise SchemaError(
                    f"{path}: missing required column(s) {', '.join(missing)}"
                )
            rows.extend(reader)
    if not rows:
        raise SchemaError(f"no data rows in {', '.join(str(p) for p in paths)}")
    return rows


def _resolve_labels(spec: PlotSpec, algorithms: set[str]) -> dict[str, str]:
    kept = algorithms - set(spec.exclude)
    if spec.labels:
        unlabeled = sorted(kept - set(spec.labels))
        if unlabeled:
            raise ValueError(
                f"algorithm(s) {', '.join(unlabeled)} present in the CSV but neither "
                "labeled nor excluded"
            )
        return {alg: spec.labels[alg] for alg in sorted(kept)}
    return {alg: alg for alg in sorted(kept)}


def _regret_curves(rows, kept) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-algorithm mean and sample std of cumulative regret by round."""
    by_run: dict[tuple[str, str], dict[int, float]] = {}
    for row in rows:
        alg = row["algorithm"]
        if alg not in kept:
            continue
        key = (alg, row["run"])
        try:
            t = int(row["t"])
            value = float(row["cumulative_regret"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"non-numeric t/cumulative_regret row: {row}") from exc
        by_run.setdefault(key, {})[t] = value

    horizons = {max(points) for points in by_run.values()}
    if len(horizons) != 1:
        raise SchemaError(f"runs disagree on the horizon: {sorted(horizons)}")
    horizon = horizons.pop()
    curves: dict[str, list[np.ndarray]] = {}
    for (alg, run), points in sorted(by_run.items()):
        missing = [t for t in range(1, horizon + 1) if t not in points]
        if missing:
            raise SchemaError(
                f"algorithm {alg} run {run}: missing round(s) "
                f"{missing[0]}..{missing[-1]} of {horizon}"
            )
        curves.setdefault(alg, []).append(
            np.array([points[t] for t in range(1, horizon + 1)])
        )
    out = {}
    for alg, runs in curves.items():
        stacked = np.stack(runs)
        mean = stacked.mean(axis=0)
        std = (
            stacked.std(axis=0, ddof=1)
            if stacked.shape[0] > 1
            else np.zeros(stacked.shape[1])
        )
        out[alg] = (mean, std)
    return out


def _final_points(rows, kept, axis) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-algorithm (x, mean, std) of final regret along a sweep axis."""
    values: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        if row["axis"] != axis:
            raise SchemaError(
                f"expected sweep axis {axis!r}, found {row['axis']!r} "
                "(column 'axis')"
            )
        alg = row["algorithm"]
        if alg not in kept:
            continue
        try:
            x = float(row["value"])
            y = float(row["final_cumulative_regret"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"non-numeric value/final_cumulative_regret row: {row}") from exc
        values.setdefault(alg, {}).setdefault(x, []).append(y)
    out = {}
    for alg, by_x in values.items():
        xs = np.array(sorted(by_x))
        mean = np.array([np.mean(by_x[x]) for x in xs])
        std = np.array(
            [np.std(by_x[x], ddof=1) if len(by_x[x]) > 1 else 0.0 for x in xs]
        )
        out[alg] = (xs, mean, std)
    return out


def plot(spec: PlotSpec) -> Path:
    """Render one figure; returns the written image path."""
    if spec.kind == KIND_REGRET_VS_TIME:
        rows = _read_rows(spec.csv_paths, RESULT_COLUMNS)
    else:
        rows = _read_rows(spec.csv_paths, SWEEP_COLUMNS)
    labels = _resolve_labels(spec, {row["algorithm"] for row in rows})
    if not labels:
        raise ValueError("every algorithm was excluded; nothing to plot")

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if spec.kind == KIND_REGRET_VS_TIME:
        curves = _regret_curves(rows, set(labels))
        rounds = None
        for alg in sorted(curves):
            mean, std = curves[alg]
            rounds = np.arange(1, mean.size + 1)
            (line,) = ax.plot(rounds, mean, label=labels[alg], linewidth=1.5)
            ax.fill_between(
                rounds, mean - std, mean + std, color=line.get_color(), alpha=0.2,
                linewidth=0,
            )
        ax.set_xlabel("round t")
        ax.set_ylabel("cumulative regret")
        if rounds is not None:
            ax.set_xlim(1, rounds[-1])
    else:
        axis = "availability" if spec.kind == KIND_FINAL_VS_AVAILABILITY else "K"
        points = _final_points(rows, set(labels), axis)
        for alg in sorted(points):
            xs, mean, std = points[alg]
            ax.errorbar(xs, mean, yerr=std, label=labels[alg], marker="o", capsize=3)
        ax.set_xlabel("availability probability a" if axis == "availability" else "number of arms K")
        ax.set_ylabel("final cumulative regret")

    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi, format="png")
    plt.close(fig)
    return out
