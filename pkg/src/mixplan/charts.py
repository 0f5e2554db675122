"""Dependency-free grouped-bar charts for sweep results.

Emits standalone SVG with fixed coordinate rounding and a fixed palette,
so rerunning a sweep produces byte-identical chart files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from .scenarios import SweepRow

__all__ = ["CHART_METRICS", "grouped_bar_svg", "write_sweep_charts"]

# metric attribute -> axis label
CHART_METRICS = (
    ("total_cost", "total cost ($)"),
    ("server_cost", "server cost ($)"),
    ("network_cost", "network cost ($)"),
    ("max_delay_ms", "max delay (ms)"),
    ("vm_count", "VM count"),
    ("allocated_mb", "allocated memory (MB)"),
    ("mean_compression_rate", "mean compression rate"),
)

_PALETTE = ("#4878a8", "#e49444", "#6a9f58", "#d1605e", "#857aab", "#9f8f6b")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _nice_ceiling(x: float) -> float:
    """Smallest 1/2/5 * 10^k value >= x, for a tidy axis top."""
    if x <= 0:
        return 1.0
    import math

    exp = math.floor(math.log10(x))
    for mult in (1.0, 2.0, 5.0, 10.0):
        top = mult * 10.0**exp
        if top >= x - 1e-12:
            return top
    return 10.0 ** (exp + 1)


def grouped_bar_svg(
    title: str,
    ylabel: str,
    groups: Sequence[str],
    series: Sequence[tuple[str, Sequence[float | None]]],
    width: int = 720,
    height: int = 360,
) -> str:
    """Render one grouped bar chart.

    `series` is a list of (name, values) with one value per group; None
    leaves a gap (e.g. an infeasible run).
    """
    left, right, top, bottom = 64, 16, 40, 56
    plot_w = width - left - right
    plot_h = height - top - bottom
    values = [v for _, vals in series for v in vals if v is not None]
    vmax = _nice_ceiling(max(values) if values else 1.0)

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    out.append(
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>'
    )
    out.append(
        f'<text x="14" y="{top + plot_h / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + plot_h / 2:.0f})">{escape(ylabel)}</text>'
    )

    ticks = 5
    for i in range(ticks + 1):
        frac = i / ticks
        y = top + plot_h * (1 - frac)
        out.append(
            f'<line x1="{left}" y1="{_fmt(y)}" x2="{left + plot_w}" y2="{_fmt(y)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{_fmt(vmax * frac)}</text>'
        )

    n_groups = max(len(groups), 1)
    n_series = max(len(series), 1)
    group_w = plot_w / n_groups
    bar_w = group_w * 0.8 / n_series
    for gi, gname in enumerate(groups):
        gx = left + gi * group_w
        for si, (_, vals) in enumerate(series):
            v = vals[gi] if gi < len(vals) else None
            if v is None:
                continue
            h = plot_h * (v / vmax) if vmax > 0 else 0.0
            x = gx + group_w * 0.1 + si * bar_w
            y = top + plot_h - h
            color = _PALETTE[si % len(_PALETTE)]
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_w)}" '
                f'height="{_fmt(h)}" fill="{color}"><title>{escape(gname)} '
                f"{escape(series[si][0])}: {v:.6g}</title></rect>"
            )
        out.append(
            f'<text x="{_fmt(gx + group_w / 2)}" y="{height - bottom + 16}" '
            f'text-anchor="middle">{escape(gname)}</text>'
        )

    # legend along the bottom edge
    lx = left
    ly = height - 14
    for si, (sname, _) in enumerate(series):
        color = _PALETTE[si % len(_PALETTE)]
        out.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{lx + 16}" y="{ly}">{escape(sname)}</text>')
        lx += 16 + 8 * len(sname) + 24

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_sweep_charts(rows: Iterable[SweepRow], out_dir: str | Path) -> list[Path]:
    """One SVG per metric, grouped by scenario size, one bar per
    scenario/distribution pair.  Returns the written paths."""
    rows = list(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    group_keys: list[tuple[str, int]] = []
    series_keys: list[str] = []
    for r in rows:
        gk = (r.scenario, r.n)
        if gk not in group_keys:
            group_keys.append(gk)
        if r.distribution not in series_keys:
            series_keys.append(r.distribution)
    by_key = {(r.scenario, r.n, r.distribution): r for r in rows}
    groups = [f"{k}-{n}" for k, n in group_keys]

    written: list[Path] = []
    for attr, label in CHART_METRICS:
        series = []
        for dist in series_keys:
            vals: list[float | None] = []
            for k, n in group_keys:
                r = by_key.get((k, n, dist))
                v = getattr(r, attr) if r is not None else None
                vals.append(float(v) if v is not None else None)
            series.append((dist, vals))
        svg = grouped_bar_svg(title=label, ylabel=label, groups=groups, series=series)
        path = out / f"sweep_{attr}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    return written
