"""Experiment harness: single runs, parameter sweeps, paired-seed algorithm
comparisons, CSV persistence, and self-contained SVG line plots.

The CSV files are the contract; plots are a convenience. One detail row per
(algorithm, axis value, seed, slot), one run row per (algorithm, axis value,
seed), and mean/std aggregate rows per (algorithm, axis value). Floats are
serialized with 9 significant digits, which is what the byte-identical
determinism guarantee is stated over.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import run_horizon_ga, solve_slot_atsm, solve_slot_no_offload
from .config import ConfigError, ScenarioConfig
from .scenario import generate_scenario
from .solver import run_horizon, solve_slot_jcorm


# ---------------------------------------------------------------------------
# single experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    """One algorithm run over one scenario horizon."""

    algorithm: str
    seed: int
    slot_metrics: list            # model.SlotMetrics per slot
    decisions: list
    traces: list
    infeasible_slots: list        # slot indices that needed a fallback
    utility_bits: float           # cumulative over the horizon
    total_uplinked_bits: float
    total_energy_j: float
    mean_ds_delay_s: float
    wall_seconds: float


_SLOT_SOLVERS = {
    "jcorm": solve_slot_jcorm,
    "atsm": solve_slot_atsm,
    "no-offload": solve_slot_no_offload,
}


def run_experiment(cfg: ScenarioConfig) -> ExperimentResult:
    """Generate the scenario for ``cfg.seed`` and run ``cfg.algo`` over the
    horizon. The genetic algorithm searches the whole horizon at once; the
    other algorithms decide slot by slot."""
    cfg.validate()
    state = generate_scenario(cfg, cfg.seed)
    if cfg.algo == "ga":
        horizon = run_horizon_ga(cfg, state)
    else:
        horizon = run_horizon(cfg, state, _SLOT_SOLVERS[cfg.algo])
    return ExperimentResult(
        algorithm=cfg.algo,
        seed=cfg.seed,
        slot_metrics=horizon.slot_metrics,
        decisions=horizon.decisions,
        traces=horizon.traces,
        infeasible_slots=list(horizon.infeasible_slots),
        utility_bits=horizon.utility_bits,
        total_uplinked_bits=horizon.total_uplinked_bits,
        total_energy_j=horizon.total_energy_j,
        mean_ds_delay_s=horizon.mean_ds_delay_s,
        wall_seconds=horizon.wall_seconds,
    )


# ---------------------------------------------------------------------------
# sweep axes
# ---------------------------------------------------------------------------

def _plain_axis(name):
    def setter(cfg, value):
        return cfg.copy(**{name: value})
    return setter


def _set_ds_size(cfg, value):
    # the axis value is the exact per-device DS task volume
    return cfg.copy(ds_size_min_bits=value, ds_size_max_bits=value)


def _set_storage_capacity(cfg, value):
    free = min(cfg.storage_initial_free_bits, value)
    return cfg.copy(storage_capacity_bits=value, storage_initial_free_bits=free)


SWEEP_AXES = {
    "leo_bandwidth_hz": _plain_axis("leo_bandwidth_hz"),
    "uav_bandwidth_hz": _plain_axis("uav_bandwidth_hz"),
    "ds_size_bits": _set_ds_size,
    "storage_capacity_bits": _set_storage_capacity,
    "storage_initial_free_bits": _plain_axis("storage_initial_free_bits"),
    "rician_k0": _plain_axis("rician_k0"),
    "omega": _plain_axis("omega"),
    "beta": _plain_axis("beta"),
    "pmax_w": _plain_axis("pmax_w"),
    "num_uavs": _plain_axis("num_uavs"),
}

_INT_AXES = {"num_uavs"}


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Return a copy of ``cfg`` with the sweep axis set to ``value``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(
            f"unknown sweep axis {axis!r}; known axes: {sorted(SWEEP_AXES)}")
    if axis in _INT_AXES:
        value = int(value)
    return SWEEP_AXES[axis](cfg, value)


# ---------------------------------------------------------------------------
# result rows and CSV persistence
# ---------------------------------------------------------------------------

# wall-clock stays out of the CSV: identical inputs must give byte-identical
# files, and timings are not reproducible
CSV_COLUMNS = ("algorithm", "axis", "value", "seed", "slot", "kind",
               "utility_bits", "uplinked_bits", "energy_j", "ds_delay_s",
               "infeasible_slots")

_FLOAT_COLUMNS = {"value", "utility_bits", "uplinked_bits", "energy_j",
                  "ds_delay_s"}
_INT_COLUMNS = {"seed", "slot", "infeasible_slots"}


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def result_rows(result: ExperimentResult, axis: str = "", value=None) -> list:
    """Flatten one experiment into slot rows plus one run row."""
    rows = []
    bad = set(result.infeasible_slots)
    for t, metrics in enumerate(result.slot_metrics):
        rows.append({
            "algorithm": result.algorithm, "axis": axis, "value": value,
            "seed": result.seed, "slot": t, "kind": "slot",
            "utility_bits": metrics.utility_bits,
            "uplinked_bits": metrics.total_uplinked_bits,
            "energy_j": metrics.total_energy_j,
            "ds_delay_s": metrics.mean_ds_delay_s,
            "infeasible_slots": int(t in bad),
        })
    rows.append({
        "algorithm": result.algorithm, "axis": axis, "value": value,
        "seed": result.seed, "slot": None, "kind": "run",
        "utility_bits": result.utility_bits,
        "uplinked_bits": result.total_uplinked_bits,
        "energy_j": result.total_energy_j,
        "ds_delay_s": result.mean_ds_delay_s,
        "infeasible_slots": len(result.infeasible_slots),
    })
    return rows


_AGG_METRICS = ("utility_bits", "uplinked_bits", "energy_j", "ds_delay_s")


def aggregate_rows(rows: list) -> list:
    """Mean and population-std rows per (algorithm, axis value), computed
    over the run rows, appended in first-seen group order."""
    groups: dict = {}
    for row in rows:
        if row["kind"] != "run":
            continue
        key = (row["algorithm"], row["axis"], row["value"])
        groups.setdefault(key, []).append(row)
    out = []
    for (algo, axis, value), runs in groups.items():
        for kind, stat in (("mean", np.mean), ("std", np.std)):
            agg = {
                "algorithm": algo, "axis": axis, "value": value,
                "seed": None, "slot": None, "kind": kind,
                "infeasible_slots": int(sum(r["infeasible_slots"] for r in runs))
                if kind == "mean" else None,
            }
            for metric in _AGG_METRICS:
                agg[metric] = float(stat([r[metric] for r in runs]))
            out.append(agg)
    return out


def write_csv(rows: list, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def read_csv(path: str) -> list:
    """Read rows written by write_csv, parsing numeric columns back. Empty
    cells come back as None."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for raw in reader:
            row = {}
            for col in CSV_COLUMNS:
                cell = raw[col]
                if cell == "":
                    row[col] = None
                elif col in _INT_COLUMNS:
                    row[col] = int(cell)
                elif col in _FLOAT_COLUMNS:
                    row[col] = float(cell)
                else:
                    row[col] = cell
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# sweeps and comparisons
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    axis: str
    values: list
    seeds: list
    algorithms: list
    rows: list                    # slot + run + aggregate rows, CSV-ready

    def stat_metric(self, algorithm: str, metric: str, kind: str = "mean") -> np.ndarray:
        """Aggregate metric per axis value, in self.values order."""
        table = {row["value"]: row[metric] for row in self.rows
                 if row["kind"] == kind and row["algorithm"] == algorithm}
        return np.array([table[v] for v in self.values], dtype=float)


def _sweep_cell(args):
    cfg_text, axis, value, algo, seed = args
    from .config import load_config_text
    base = load_config_text(cfg_text)
    cfg = apply_axis(base, axis, value).copy(algo=algo, seed=seed)
    return result_rows(run_experiment(cfg), axis=axis, value=value)


def run_sweep(base_cfg: ScenarioConfig, axis: str, values, seeds,
              algorithms=None, workers: int = 1) -> SweepResult:
    """Run every (algorithm, axis value, seed) cell and assemble the row
    table. Cells are independent, so ``workers > 1`` fans them out over
    processes; assembly order is fixed either way, keeping the CSV
    byte-identical for identical inputs."""
    algorithms = list(algorithms) if algorithms else [base_cfg.algo]
    values = list(values)
    seeds = [int(s) for s in seeds]
    apply_axis(base_cfg, axis, values[0] if values else 0)  # fail fast on axis name

    cells = [(algo, value, seed)
             for algo in algorithms for value in values for seed in seeds]
    rows: list = []
    if workers > 1 and len(cells) > 1:
        from .config import config_to_text
        cfg_text = config_to_text(base_cfg)
        args = [(cfg_text, axis, value, algo, seed) for algo, value, seed in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell_rows in pool.map(_sweep_cell, args):
                rows.extend(cell_rows)
    else:
        for algo, value, seed in cells:
            cfg = apply_axis(base_cfg, axis, value).copy(algo=algo, seed=seed)
            rows.extend(result_rows(run_experiment(cfg), axis=axis, value=value))
    rows.extend(aggregate_rows(rows))
    return SweepResult(axis, values, seeds, algorithms, rows)


def run_compare(base_cfg: ScenarioConfig, algorithms, seeds) -> SweepResult:
    """Paired-seed comparison of several algorithms at a fixed configuration.
    Modeled as a degenerate sweep over the single value None."""
    algorithms = list(algorithms)
    seeds = [int(s) for s in seeds]
    rows: list = []
    for algo in algorithms:
        for seed in seeds:
            cfg = base_cfg.copy(algo=algo, seed=seed)
            rows.extend(result_rows(run_experiment(cfg), axis="", value=None))
    rows.extend(aggregate_rows(rows))
    return SweepResult("", [None], seeds, algorithms, rows)


# ---------------------------------------------------------------------------
# SVG line plots (self-contained, no renderer dependencies)
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_METRIC_LABELS = {
    "utility_bits": "cumulative utility (bits)",
    "uplinked_bits": "total uplinked data (bits)",
    "energy_j": "total energy (J)",
    "ds_delay_s": "mean DS completion time (s)",
}


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def render_svg_lines(title: str, x_label: str, y_label: str, x_values,
                     series: dict) -> str:
    """Render line series {name: (means, stds)} into an SVG string."""
    width, height = 640, 440
    left, right, top, bottom = 80, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom

    xs = np.asarray(x_values, dtype=float)
    ys = np.concatenate([np.asarray(m, dtype=float) for m, _ in series.values()])
    es = np.concatenate([np.asarray(s, dtype=float) for _, s in series.values()])
    x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo = float(np.min(ys - es))
    y_hi = float(np.max(ys + es))
    pad = 0.05 * (y_hi - y_lo) or max(abs(y_hi), 1.0) * 0.05
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for xt in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{sx(xt):.1f}" y1="{top + ph}" x2="{sx(xt):.1f}" '
                     f'y2="{top + ph + 5}" stroke="#444"/>')
        parts.append(f'<text x="{sx(xt):.1f}" y="{top + ph + 18}" '
                     f'text-anchor="middle">{format(xt, ".4g")}</text>')
    for yt in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{left - 5}" y1="{sy(yt):.1f}" x2="{left}" '
                     f'y2="{sy(yt):.1f}" stroke="#444"/>')
        parts.append(f'<text x="{left - 8}" y="{sy(yt) + 4:.1f}" '
                     f'text-anchor="end">{format(yt, ".4g")}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 15}" '
                 f'text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="20" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {top + ph / 2:.1f})">{y_label}</text>')

    for i, (name, (means, stds)) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        means = np.asarray(means, dtype=float)
        stds = np.asarray(stds, dtype=float)
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, means))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for x, y, e in zip(xs, means, stds):
            if e > 0:
                parts.append(f'<line x1="{sx(x):.2f}" y1="{sy(y - e):.2f}" '
                             f'x2="{sx(x):.2f}" y2="{sy(y + e):.2f}" '
                             f'stroke="{color}" stroke-width="1"/>')
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        ly = top + 14 + 16 * i
        parts.append(f'<line x1="{left + pw - 120}" y1="{ly - 4}" '
                     f'x2="{left + pw - 96}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{left + pw - 90}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_sweep_outputs(result: SweepResult, out_dir: str,
                        formats=("csv", "svg")) -> list:
    """Persist a sweep: one CSV, and one SVG per metric when requested.
    Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = result.axis or "compare"
    written = []
    if "csv" in formats:
        path = os.path.join(out_dir, f"{stem}.csv")
        write_csv(result.rows, path)
        written.append(path)
    if "svg" in formats and result.axis and result.values:
        xs = [float(v) for v in result.values]
        for metric, label in _METRIC_LABELS.items():
            series = {}
            for algo in result.algorithms:
                means = result.stat_metric(algo, metric, "mean")
                stds = result.stat_metric(algo, metric, "std")
                series[algo] = (means, stds)
            svg = render_svg_lines(f"{metric} vs {result.axis}", result.axis,
                                   label, xs, series)
            path = os.path.join(out_dir, f"{stem}_{metric}.svg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(svg)
            written.append(path)
    return written
