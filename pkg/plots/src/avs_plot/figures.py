"""Chart rendering for experiment CSVs.

Input is the fixed harness schema:
policy,obs_model,stage,n_sim,particles,episodes,found,mean_steps,std_steps,mean_time_s,failures

Four figure kinds share the same x-axis (simulation count per decision):
``success`` and ``steps`` carry a dashed random-walk reference line,
``time`` shows the wall-time trade-off, ``ablation`` compares observation
models. Rendering never touches the input file, and identical inputs give
byte-identical images.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

KINDS = ("success", "steps", "time", "ablation")

_BASE_COLUMNS = ["policy", "obs_model", "stage", "n_sim", "particles", "episodes", "found"]
_COLUMNS_BY_KIND = {
    "success": _BASE_COLUMNS,
    "steps": _BASE_COLUMNS + ["mean_steps", "std_steps"],
    "time": _BASE_COLUMNS + ["mean_time_s"],
    "ablation": _BASE_COLUMNS + ["mean_steps"],
}

_INT_FIELDS = ("n_sim", "particles", "episodes", "found")
_FLOAT_FIELDS = ("mean_steps", "std_steps", "mean_time_s")


class ValidationError(ValueError):
    """CSV rejected; the message carries the offending row."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str | Path
    kind: str
    out_path: str | Path

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def load_rows(csv_path: str | Path, kind: str) -> list[dict]:
    """Read and type the CSV; raises ValidationError with a row diagnostic."""
    required = _COLUMNS_BY_KIND[kind]
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise ValidationError("row 1: empty CSV, expected a header line")
        for column in required:
            if column not in header:
                raise ValidationError(
                    f"row 1: missing required column {column!r} for kind {kind!r}"
                )
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            row: dict = dict(raw)
            for field in _INT_FIELDS:
                if field in header:
                    try:
                        row[field] = int(raw[field])
                    except (TypeError, ValueError):
                        raise ValidationError(
                            f"row {lineno}: invalid value {raw.get(field)!r} for column {field!r}"
                        ) from None
            for field in _FLOAT_FIELDS:
                if field in header and raw.get(field) not in (None, ""):
                    try:
                        row[field] = float(raw[field])
                    except (TypeError, ValueError):
                        raise ValidationError(
                            f"row {lineno}: invalid value {raw.get(field)!r} for column {field!r}"
                        ) from None
            rows.append(row)
    if not rows:
        raise ValidationError("row 2: no data rows")
    return rows


def _series(rows: list[dict]) -> dict[tuple[str, str], list[dict]]:
    """Planner rows grouped by (policy, obs_model), sorted by n_sim."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        if row["policy"] == "random":
            continue
        groups.setdefault((row["policy"], row["obs_model"]), []).append(row)
    for rows_ in groups.values():
        rows_.sort(key=lambda r: r["n_sim"])
    return groups


def _random_reference(rows: list[dict], field: str) -> float | None:
    values = [
        r[field]
        for r in rows
        if r["policy"] == "random" and isinstance(r[field], (int, float)) and not _is_nan(r[field])
    ]
    return float(values[0]) if values else None


def _is_nan(value) -> bool:
    return isinstance(value, float) and math.isnan(value)


def _new_axes(ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    ax.set_xlabel("simulations per decision")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, ax, out_path: str | Path) -> None:
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_success(rows: list[dict], out_path: str | Path) -> None:
    episodes = rows[0]["episodes"]
    fig, ax = _new_axes(f"episodes with object found (of {episodes})", "Success vs simulations")
    for (policy, obs_model), series in _series(rows).items():
        ax.plot(
            [r["n_sim"] for r in series],
            [r["found"] for r in series],
            marker="o",
            label=f"{policy} ({obs_model})",
        )
    reference = _random_reference(rows, "found")
    if reference is not None:
        ax.axhline(reference, linestyle="--", color="gray", label="random walk")
    _finish(fig, ax, out_path)


def _plot_steps(rows: list[dict], out_path: str | Path) -> None:
    fig, ax = _new_axes("mean steps (successful episodes)", "Steps vs simulations")
    for (policy, obs_model), series in _series(rows).items():
        pts = [r for r in series if not _is_nan(r["mean_steps"])]
        ax.errorbar(
            [r["n_sim"] for r in pts],
            [r["mean_steps"] for r in pts],
            yerr=[r["std_steps"] for r in pts],
            marker="o",
            capsize=3,
            label=f"{policy} ({obs_model})",
        )
    reference = _random_reference(rows, "mean_steps")
    if reference is not None:
        ax.axhline(reference, linestyle="--", color="gray", label="random walk")
    _finish(fig, ax, out_path)


def _plot_time(rows: list[dict], out_path: str | Path) -> None:
    fig, ax = _new_axes("mean wall time per episode [s]", "Planning time vs simulations")
    for (policy, obs_model), series in _series(rows).items():
        ax.plot(
            [r["n_sim"] for r in series],
            [r["mean_time_s"] for r in series],
            marker="o",
            label=f"{policy} ({obs_model})",
        )
    _finish(fig, ax, out_path)


def _plot_ablation(rows: list[dict], out_path: str | Path) -> None:
    episodes = rows[0]["episodes"]
    fig, ax = _new_axes(
        f"episodes with object found (of {episodes})", "Grid vs binary observations"
    )
    by_obs: dict[str, list[dict]] = {}
    for row in rows:
        if row["policy"] != "random":
            by_obs.setdefault(row["obs_model"], []).append(row)
    for obs_model, series in sorted(by_obs.items()):
        series.sort(key=lambda r: r["n_sim"])
        ax.plot(
            [r["n_sim"] for r in series],
            [r["found"] for r in series],
            marker="s" if obs_model == "binary" else "o",
            label=f"{obs_model} observations",
        )
    reference = _random_reference(rows, "found")
    if reference is not None:
        ax.axhline(reference, linestyle="--", color="gray", label="random walk")
    _finish(fig, ax, out_path)


_RENDERERS = {
    "success": _plot_success,
    "steps": _plot_steps,
    "time": _plot_time,
    "ablation": _plot_ablation,
}


def render_figure(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path."""
    rows = load_rows(spec.csv_path, spec.kind)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    _RENDERERS[spec.kind](rows, out)
    return out


def render_all(csv_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Emit every figure kind into ``out_dir`` with fixed file names."""
    out_dir = Path(out_dir)
    return [
        render_figure(FigureSpec(csv_path, kind, out_dir / f"{kind}.png"))
        for kind in KINDS
    ]
