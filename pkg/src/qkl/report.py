"""CSV emission, run manifests and small standalone SVG plots."""

import csv
import hashlib
import json
import math
import re
from collections import defaultdict
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "SCHEMAS",
    "emit_csv",
    "read_csv",
    "sha256_of",
    "write_manifest",
    "emit_svg",
    "PLOT_KINDS",
]

# column order and sort keys of every table the CLI writes
SCHEMAS = {
    "generalization": (("d", "seed", "kernel", "lambda", "train_mse", "test_mse", "best_test"),
                       ("d", "seed", "kernel", "lambda")),
    "spectrum": (("d", "seed", "rank", "eigenvalue"), ("d", "seed", "rank")),
    "alignment": (("d", "seed", "kernel", "kta"), ("d", "seed", "kernel")),
    "alignment_curve": (("d", "seed", "kernel", "i", "C"), ("d", "seed", "kernel", "i")),
    "haar": (("moment_id", "empirical", "analytic", "stderr"), ("moment_id",)),
    "concentration": (("d", "mean_dev", "variance"), ("d",)),
    "shot_cost": (("d", "signal_rms", "shots", "empirical_rel_error"), ("d",)),
}

_INT = re.compile(r"-?\d+")


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse(text):
    if _INT.fullmatch(text):
        return int(text)
    if text in ("true", "false"):
        return text == "true"
    try:
        return float(text)
    except ValueError:
        return text


def emit_csv(rows, path, schema=None, columns=None, keys=None):
    """Write homogeneous rows as a UTF-8, LF-terminated CSV with a header.

    Columns and sort keys come from ``schema`` (a name in :data:`SCHEMAS`),
    from explicit ``columns``/``keys``, or default to the first row's fields
    sorted by every non-float column.  Floats use the shortest round-trip
    representation; booleans are written as ``true``/``false``.
    """
    rows = list(rows)
    if schema is not None:
        columns, keys = SCHEMAS[schema]
    if columns is None:
        if not rows:
            raise InvalidArgumentError("cannot infer columns of an empty row set")
        columns = tuple(rows[0])
    columns = tuple(columns)
    for row in rows:
        if set(row) != set(columns):
            raise InvalidArgumentError(f"row fields {sorted(row)} do not match columns {list(columns)}")
    if keys is None:
        keys = tuple(c for c in columns if rows and not isinstance(rows[0][c], (float, np.floating)))
    rows = sorted(rows, key=lambda r: tuple(r[k] for k in keys))
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[c]) for c in columns])
    return path


def read_csv(path):
    """Parse a file written by :func:`emit_csv` back into typed row dicts."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        return [{c: _parse(v) for c, v in zip(header, line)} for line in reader]


def sha256_of(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, *, config, version, master_seed, files, timings):
    """Record what a run produced: config, seed, checksums and wall-clock."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "qkl",
        "version": version,
        "master_seed": master_seed,
        "config": config,
        "files": {Path(f).name: sha256_of(f) for f in files},
        "wall_clock_seconds": timings,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


# --- SVG -------------------------------------------------------------------

PLOT_KINDS = ("mse_vs_qubits", "spectrum_vs_qubits", "kta_histogram", "cumulative_alignment")
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_W, _H = 560, 380
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 130, 40, 50


def _esc(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ticks(lo, hi, log):
    if log:
        return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + step / 2, step))


def _frame(title, xlabel, ylabel, xlim, ylim, log_y):
    x0, x1 = xlim
    y0, y1 = ylim
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(x):
        return _LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        v = math.log10(y) if log_y else y
        return _TOP + ph - (v - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text transform="translate(16 {_TOP + ph / 2:.1f}) rotate(-90)" text-anchor="middle">'
        f"{_esc(ylabel)}</text>",
    ]
    for t in _ticks(x0, x1, False):
        parts.append(f'<line x1="{sx(t):.1f}" y1="{_TOP + ph}" x2="{sx(t):.1f}" y2="{_TOP + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{sx(t):.1f}" y="{_TOP + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1, log_y):
        v = math.log10(t) if log_y else t
        if not y0 - 1e-9 <= v <= y1 + 1e-9:
            continue
        label = f"1e{round(v)}" if log_y else f"{t:g}"
        parts.append(f'<line x1="{_LEFT - 4}" y1="{sy(t):.1f}" x2="{_LEFT}" y2="{sy(t):.1f}" stroke="black"/>')
        parts.append(f'<text x="{_LEFT - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{label}</text>')
    return parts, sx, sy


def _legend(parts, names):
    for k, name in enumerate(names):
        y = _TOP + 10 + 16 * k
        x = _W - _RIGHT + 12
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 24}" y="{y + 4}" class="legend">{_esc(name)}</text>')


def _line_plot(series, title, xlabel, ylabel, log_y):
    """``series`` maps a name to ``(xs, ys, dashed)``."""
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    if log_y:
        positive = [y for y in ys if y > 0]
        floor = min(positive) if positive else 1e-300
        series = {k: (sx, [max(y, floor) for y in sy_], dash) for k, (sx, sy_, dash) in series.items()}
        ys = [max(y, floor) for y in ys]
        ylim = (math.floor(math.log10(min(ys))), math.ceil(math.log10(max(ys))))
        if ylim[0] == ylim[1]:
            ylim = (ylim[0] - 1, ylim[1])
    else:
        ylim = (min(ys), max(ys))
    parts, sx, sy = _frame(title, xlabel, ylabel, (min(xs), max(xs)), ylim, log_y)
    for k, (name, (px, py, dashed)) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        dash = ' stroke-dasharray="5 3"' if dashed else ""
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{pts}" '
                     f'data-series="{_esc(name)}"/>')
        for x, y in zip(px, py):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}" '
                         f'data-series="{_esc(name)}" data-x="{x!r}" data-y="{y!r}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _histogram(groups, title, xlabel, bins=20):
    values = [v for vs in groups.values() for v in vs]
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.05, hi + 0.05
    edges = np.linspace(lo, hi, bins + 1)
    counts = {k: np.histogram(v, bins=edges)[0] for k, v in groups.items()}
    top = max(int(c.max()) for c in counts.values())
    parts, sx, sy = _frame(title, xlabel, "count", (lo, hi), (0, top), False)
    width = (sx(edges[1]) - sx(edges[0])) / max(len(groups), 1)
    for k, (name, c) in enumerate(counts.items()):
        color = _COLORS[k % len(_COLORS)]
        for b, count in enumerate(c):
            if count == 0:
                continue
            x = sx(edges[b]) + k * width
            parts.append(f'<rect x="{x:.2f}" y="{sy(count):.2f}" width="{width:.2f}" '
                         f'height="{sy(0) - sy(count):.2f}" fill="{color}" fill-opacity="0.8" '
                         f'data-series="{_esc(name)}" data-x="{edges[b]!r}" data-y="{int(count)}"/>')
    _legend(parts, list(counts))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _mean_by(rows, group, x, y):
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        acc[r[group]][r[x]].append(r[y])
    return {g: (sorted(v), [float(np.mean(v[k])) for k in sorted(v)]) for g, v in acc.items()}


def emit_svg(rows, plot_kind, path):
    """Render one of :data:`PLOT_KINDS` from experiment rows into ``path``.

    ``mse_vs_qubits`` expects generalization rows (only ``best_test`` rows
    are plotted; solid = test, dashed = train), ``spectrum_vs_qubits``
    spectrum rows (ranks 1-4), ``kta_histogram`` alignment rows and
    ``cumulative_alignment`` alignment-curve rows.
    """
    rows = list(rows)
    if not rows:
        raise InvalidArgumentError("no data to plot")
    if plot_kind == "mse_vs_qubits":
        best = [r for r in rows if r.get("best_test", True)]
        series = {}
        for name, (xs, ys) in _mean_by(best, "kernel", "d", "test_mse").items():
            series[f"{name} test"] = (xs, ys, False)
        for name, (xs, ys) in _mean_by(best, "kernel", "d", "train_mse").items():
            series[f"{name} train"] = (xs, ys, True)
        svg = _line_plot(series, "Mean squared error", "qubits d", "MSE", log_y=True)
    elif plot_kind == "spectrum_vs_qubits":
        top = [r for r in rows if r["rank"] <= 4]
        series = {f"eigenvalue {k}": (xs, ys, False)
                  for k, (xs, ys) in sorted(_mean_by(top, "rank", "d", "eigenvalue").items())}
        svg = _line_plot(series, "Spectrum of the biased kernel", "qubits d", "eigenvalue of K/n",
                         log_y=True)
    elif plot_kind == "kta_histogram":
        groups = defaultdict(list)
        for r in rows:
            groups[r["kernel"]].append(r["kta"])
        svg = _histogram(dict(groups), "Centered kernel-target alignment", "alignment")
    elif plot_kind == "cumulative_alignment":
        series = {k: (xs, ys, False) for k, (xs, ys) in _mean_by(rows, "kernel", "i", "C").items()}
        svg = _line_plot(series, "Task-model alignment", "component i", "C(i)", log_y=False)
    else:
        raise InvalidArgumentError(f"unknown plot kind {plot_kind!r}")
    path = Path(path)
    path.write_text(svg, encoding="utf-8")
    return path
