"""Experiment orchestration: MSE-vs-sample-size curves, CSV emission,
and a minimal SVG renderer for the log-log curves.

Output is fully deterministic: a fixed config text yields byte-identical
CSV and SVG files regardless of thread count, because trials run on
independent derived streams and a single writer emits rows in a fixed
sort order with round-trip float formatting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bounds import minimax_lower_bound
from .core import (
    Dictionary,
    ProblemConfig,
    make_dirac_hadamard_dictionary,
    make_identity_dictionary,
)
from .datagen import GeneratorSeed
from .expconfig import ExperimentConfig
from .learners import empirical_mse, make_itkm_learner, oracle_ls_learner

CSV_HEADER = ("experiment_id,dictionary_kind,m,p,s,snr_db,n_samples,trial,"
              "mse,mse_std_error,bound_value,bound_conditions_met,seed")


@dataclass(frozen=True)
class ResultRow:
    """One CSV row: a single trial (trial >= 1) or the per-grid-point
    aggregate (trial is None, serialized as "mean")."""

    experiment_id: str
    dictionary_kind: str
    m: int
    p: int
    s: int
    snr_db: float
    n_samples: int
    trial: int | None
    mse: float
    mse_std_error: float | None
    bound_value: float
    bound_conditions_met: bool
    seed: int

    @property
    def is_aggregate(self) -> bool:
        return self.trial is None


def _fmt_float(value: float | None) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def _row_fields(row: ResultRow) -> list[str]:
    return [
        row.experiment_id,
        row.dictionary_kind,
        str(row.m),
        str(row.p),
        str(row.s),
        _fmt_float(row.snr_db),
        str(row.n_samples),
        "mean" if row.trial is None else str(row.trial),
        _fmt_float(row.mse),
        _fmt_float(row.mse_std_error),
        _fmt_float(row.bound_value),
        "true" if row.bound_conditions_met else "false",
        str(row.seed),
    ]


def _row_sort_key(row: ResultRow):
    return (
        row.experiment_id,
        row.dictionary_kind,
        row.snr_db,
        row.n_samples,
        row.trial is None,          # trials first, aggregate last
        row.trial if row.trial is not None else 0,
    )


def resolve_dictionary(config: ExperimentConfig) -> Dictionary:
    """Generating dictionary for a config: one of the built-in kinds, or
    a whitespace/comma text matrix loaded from a file path."""
    kind = config.dictionary_kind
    if kind == "identity":
        return make_identity_dictionary(config.m)
    if kind == "dirac_hadamard":
        return make_dirac_hadamard_dictionary(config.m)
    with open(kind, encoding="utf-8") as fh:
        text = fh.read()
    entries = np.loadtxt(text.splitlines(), delimiter="," if "," in text else None)
    entries = np.atleast_2d(entries)
    if entries.shape != (config.m, config.p):
        raise ValueError(
            f"dictionary file {kind!r} has shape {entries.shape}, "
            f"config wants ({config.m}, {config.p})"
        )
    return Dictionary(entries)


def run_mse_curve(config: ExperimentConfig, *, n_jobs: int | None = None) -> list[ResultRow]:
    """Run the configured learner over the sample-size grid.

    Per grid point: `trials` independent replications of
    generate-then-learn, one row per trial plus one aggregate row, the
    closed-form risk bound evaluated at that grid point's N.  All
    randomness derives from (master_seed, grid index, trial index).
    """
    dictionary = resolve_dictionary(config)
    base = ProblemConfig(
        m=config.m, p=config.p, s=config.s,
        sigma_a=config.sigma_a, sigma=config.sigma, r=config.r,
        reference=dictionary, n_samples=1,
    )
    snr_db = base.snr_db()
    if config.learner == "itkm":
        learner = make_itkm_learner(config.itkm)
    else:
        learner = oracle_ls_learner

    rows: list[ResultRow] = []
    for grid_index, n in enumerate(config.n_grid):
        cfg = replace(base, n_samples=n)
        seed = GeneratorSeed(config.master_seed, stream_id=grid_index)
        estimate, errors = empirical_mse(
            cfg, dictionary, learner, config.trials, seed,
            n_jobs=n_jobs, return_trial_errors=True,
        )
        bound = minimax_lower_bound(cfg)
        common = dict(
            experiment_id=config.experiment_id,
            dictionary_kind=config.dictionary_kind,
            m=config.m, p=config.p, s=config.s,
            snr_db=snr_db, n_samples=n,
            bound_value=bound.value,
            bound_conditions_met=bound.conditions_met,
            seed=config.master_seed,
        )
        for trial_index, err in enumerate(errors, start=1):
            rows.append(ResultRow(trial=trial_index, mse=float(err),
                                  mse_std_error=None, **common))
        rows.append(ResultRow(trial=None, mse=estimate.mean,
                              mse_std_error=estimate.std_error, **common))
    return rows


def emit_csv(rows: list[ResultRow], path: str) -> None:
    """Write rows (deterministically sorted) with the fixed header, LF
    line endings, and shortest round-trip float formatting."""
    if not rows:
        raise ValueError("no rows to emit")
    lines = [CSV_HEADER]
    for row in sorted(rows, key=_row_sort_key):
        lines.append(",".join(_row_fields(row)))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


_SERIES_COLORS = ("#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97",
                  "#c77d1e", "#4a4a4a")


def emit_plot_svg(rows: list[ResultRow], path: str) -> None:
    """Render aggregate rows as a log2-log2 plot: one solid polyline of
    MSE vs N per (dictionary_kind, snr_db) series, plus dashed lines for
    the distinct risk-bound curves."""
    aggregates = [row for row in rows if row.is_aggregate]
    if not aggregates:
        raise ValueError("no aggregate rows to plot")

    series: dict[tuple[str, float], list[ResultRow]] = {}
    for row in sorted(aggregates, key=_row_sort_key):
        series.setdefault((row.dictionary_kind, row.snr_db), []).append(row)

    def pts(values):
        return [(math.log2(n), math.log2(v)) for n, v in values if v > 0]

    curves = []      # (label, points, color index)
    bound_curves = {}  # frozen coords -> label, for dedup
    for index, ((kind, snr_db), group) in enumerate(sorted(series.items())):
        label = f"{kind}, {snr_db:g} dB"
        curves.append((label, pts((r.n_samples, r.mse) for r in group), index))
        bound_pts = tuple(pts((r.n_samples, r.bound_value) for r in group))
        bound_curves.setdefault(bound_pts, f"bound ({label})")

    all_pts = [pt for _, cpts, _ in curves for pt in cpts]
    all_pts += [pt for cpts in bound_curves for pt in cpts]
    if not all_pts:
        raise ValueError("no positive values to plot")
    xs = [pt[0] for pt in all_pts]
    ys = [pt[1] for pt in all_pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_pad = 0.5 if x_hi == x_lo else 0.05 * (x_hi - x_lo)
    y_pad = 0.5 if y_hi == y_lo else 0.05 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    width, height = 640, 480
    left, right, top, bottom = 60, 180, 20, 50

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right)

    def sy(y):
        return top + (y_hi - y) / (y_hi - y_lo) * (height - top - bottom)

    def polyline(cpts, style):
        coords = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in cpts)
        return f'  <polyline fill="none" {style} points="{coords}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'  <rect width="{width}" height="{height}" fill="white"/>',
        f'  <line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>',
        f'  <line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for xt in range(math.ceil(x_lo), math.floor(x_hi) + 1):
        parts.append(
            f'  <text x="{sx(xt):.3f}" y="{height - bottom + 18}" font-size="11" '
            f'text-anchor="middle">{xt}</text>'
        )
    y_step = max(1, round((y_hi - y_lo) / 8))
    yt = math.ceil(y_lo)
    while yt <= y_hi:
        parts.append(
            f'  <text x="{left - 8}" y="{sy(yt):.3f}" font-size="11" '
            f'text-anchor="end" dominant-baseline="middle">{yt}</text>'
        )
        yt += y_step
    parts.append(
        f'  <text x="{(left + width - right) / 2:.1f}" y="{height - 12}" font-size="12" '
        f'text-anchor="middle">log2 N</text>'
    )
    parts.append(
        f'  <text x="16" y="{(top + height - bottom) / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 {(top + height - bottom) / 2:.1f})">'
        f'log2 MSE</text>'
    )

    legend_y = top + 10
    for label, cpts, index in curves:
        color = _SERIES_COLORS[index % len(_SERIES_COLORS)]
        if cpts:
            parts.append(polyline(cpts, f'stroke="{color}" stroke-width="1.5"'))
        parts.append(
            f'  <line x1="{width - right + 10}" y1="{legend_y}" '
            f'x2="{width - right + 34}" y2="{legend_y}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'  <text x="{width - right + 40}" y="{legend_y + 4}" font-size="11">{label}</text>'
        )
        legend_y += 18
    for cpts, label in sorted(bound_curves.items(), key=lambda kv: kv[1]):
        if not cpts:
            continue
        parts.append(polyline(cpts, 'stroke="#555555" stroke-width="1.2" '
                                    'stroke-dasharray="6 4"'))
        parts.append(
            f'  <line x1="{width - right + 10}" y1="{legend_y}" '
            f'x2="{width - right + 34}" y2="{legend_y}" stroke="#555555" '
            f'stroke-width="1.2" stroke-dasharray="6 4"/>'
        )
        parts.append(
            f'  <text x="{width - right + 40}" y="{legend_y + 4}" font-size="11">{label}</text>'
        )
        legend_y += 18
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts) + "\n")
