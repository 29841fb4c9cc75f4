"""Covariate balance and propensity overlap diagnostics.

The absolute standardized difference uses a fixed denominator: the pooled
*unweighted* within-group standard deviation, ``sqrt((s1^2 + s0^2) / 2)``.
Holding it fixed across weighting schemes keeps a single love plot comparable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .estimation import hajek_means
from .propensity import PropensityModel
from .weighting import Scheme, WeightSet, balancing_weights

ASD_THRESHOLD = 0.1
TAIL_LO, TAIL_HI = 0.05, 0.95
EXACT_BALANCE_TOL = 1e-6


def _group_var(x):
    # sample variance; a singleton group contributes zero spread
    return float(np.var(x, ddof=1)) if x.shape[0] > 1 else 0.0


def pooled_sd(x, group) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(group)
    return math.sqrt((_group_var(x[z == 1]) + _group_var(x[z == 0])) / 2.0)


def asd_values(x, group, weights=None) -> float:
    """ASD of one covariate vector; unit weights when ``weights`` is None.

    Returns ``inf`` when the pooled SD is zero but the means differ, and 0
    when both are zero.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(group)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    m1, m0 = hajek_means(x, z, w)
    diff = abs(m1 - m0)
    s = pooled_sd(x, z)
    if s == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / s


def asd(ds: Dataset, covariate: str, ws: WeightSet | None = None) -> float:
    """Absolute standardized difference of ``covariate``, optionally weighted."""
    return asd_values(ds.column(covariate), ds.group, None if ws is None else ws.weights)


@dataclass(frozen=True)
class OverlapSummary:
    edges: np.ndarray
    counts: dict
    tail_mass: dict
    n_excluded: int = 0

    def rows(self):
        for g in (1, 0):
            for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts[g]):
                yield g, float(lo), float(hi), int(c)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["group", "bin_lo", "bin_hi", "count"])
            for g, lo, hi, c in self.rows():
                out.writerow([g, repr(lo), repr(hi), c])


def overlap_summary(model, group, bins: int = 20, exclude=None) -> OverlapSummary:
    """Per-group histogram of propensities over equal-width bins of [0, 1].

    ``model`` is a :class:`PropensityModel` or an array of propensities.
    Units flagged in ``exclude`` (e.g. trimmed units) are left out of the
    counts and reported in ``n_excluded``. Tail mass is the fraction of a
    group's units with propensity below 0.05 or above 0.95.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    e = model.propensities if isinstance(model, PropensityModel) else np.asarray(model, float)
    z = np.asarray(group)
    keep = np.ones(e.shape[0], dtype=bool)
    if exclude is not None:
        keep[np.asarray(list(exclude), dtype=int)] = False
    idx = np.clip(np.floor(e * bins).astype(int), 0, bins - 1)
    counts, tails = {}, {}
    for g in (1, 0):
        m = (z == g) & keep
        counts[g] = np.bincount(idx[m], minlength=bins)
        eg = e[m]
        tails[g] = float(np.mean((eg < TAIL_LO) | (eg > TAIL_HI))) if eg.size else 0.0
    return OverlapSummary(np.linspace(0.0, 1.0, bins + 1), counts, tails, int(np.sum(~keep)))


@dataclass(frozen=True)
class BalanceRow:
    name: str
    unweighted: float
    by_scheme: dict


@dataclass(frozen=True)
class BalanceReport:
    rows: list
    schemes: tuple
    threshold: float
    propensity_summary: OverlapSummary
    flags: dict = field(default_factory=dict)

    @property
    def exact_balance_ok(self) -> bool:
        """Overlap-weighted ASDs of model covariates all within 1e-6."""
        if Scheme.OW not in self.schemes:
            return True
        return all(r.by_scheme[Scheme.OW] <= EXACT_BALANCE_TOL for r in self.rows)

    def max_asd(self, scheme=None) -> float:
        if scheme is None:
            return max(r.unweighted for r in self.rows)
        scheme = Scheme.parse(scheme)
        return max(r.by_scheme[scheme] for r in self.rows)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["covariate", "unweighted", *[s.value for s in self.schemes]])
            for r in self.rows:
                out.writerow([r.name, repr(r.unweighted),
                              *[repr(r.by_scheme[s]) for s in self.schemes]])


def balance_report(ds: Dataset, model: PropensityModel, schemes=("ipw", "att", "ow"),
                   threshold: float = ASD_THRESHOLD, bins: int = 20,
                   weight_sets: dict | None = None) -> BalanceReport:
    """ASD of every model covariate, unweighted and under each scheme.

    Rows are sorted by unweighted ASD, largest first (love-plot order; ties
    keep model order). ``flags`` maps ``"unweighted"`` and each scheme to the
    covariates whose ASD exceeds ``threshold``.
    """
    schemes = tuple(Scheme.parse(s) for s in schemes)
    if model.propensities.shape[0] != ds.n_units:
        raise ValueError("model was not fitted on this dataset")
    weight_sets = dict(weight_sets or {})
    for s in schemes:
        if s not in weight_sets:
            weight_sets[s] = balancing_weights(model, ds.group, s)
    rows = []
    for name in model.names[1:]:
        x = ds.column(name)
        rows.append(BalanceRow(
            name,
            asd_values(x, ds.group),
            {s: asd_values(x, ds.group, weight_sets[s].weights) for s in schemes},
        ))
    rows.sort(key=lambda r: -r.unweighted)
    flags = {"unweighted": [r.name for r in rows if r.unweighted > threshold]}
    for s in schemes:
        flags[s] = [r.name for r in rows if r.by_scheme[s] > threshold]
    trimmed = set()
    for ws in weight_sets.values():
        trimmed.update(ws.trimmed)
    summary = overlap_summary(model, ds.group, bins, exclude=sorted(trimmed) or None)
    return BalanceReport(rows, schemes, threshold, summary, flags)


# --- dependency-free SVG ---------------------------------------------------

_COLORS = {"unweighted": "#444444", "ipw": "#d62728", "att": "#1f77b4",
           "atc": "#9467bd", "ow": "#2ca02c"}


def _svg(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def _esc(text) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def love_plot_svg(report: BalanceReport) -> str:
    """Love plot: one row per covariate, ASD on the x axis, dotted line at the threshold."""
    left, right, top, row_h = 170, 30, 30, 18
    width = 640
    height = top + row_h * max(len(report.rows), 1) + 60
    finite = [v for r in report.rows for v in (r.unweighted, *r.by_scheme.values()) if math.isfinite(v)]
    xmax = max([report.threshold * 1.5, *finite]) * 1.05
    sx = lambda v: left + (width - left - right) * min(v, xmax) / xmax  # noqa: E731
    body = []
    x_thr = sx(report.threshold)
    y_end = top + row_h * len(report.rows)
    body.append(f'<line x1="{sx(0):.2f}" y1="{top - 10}" x2="{sx(0):.2f}" y2="{y_end}" stroke="black"/>')
    body.append(f'<line x1="{x_thr:.2f}" y1="{top - 10}" x2="{x_thr:.2f}" y2="{y_end}" '
                f'stroke="black" stroke-dasharray="2,3"/>')
    for i, r in enumerate(report.rows):
        y = top + row_h * i + row_h / 2
        body.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{_esc(r.name)}</text>')
        points = [("unweighted", r.unweighted)] + [(s.value, v) for s, v in r.by_scheme.items()]
        for key, v in points:
            body.append(f'<circle cx="{sx(v):.2f}" cy="{y:.1f}" r="3.5" fill="{_COLORS[key]}"/>')
    for k in range(5):
        v = xmax * k / 4
        body.append(f'<text x="{sx(v):.2f}" y="{y_end + 16}" text-anchor="middle">{v:.2f}</text>')
    body.append(f'<text x="{(left + width - right) / 2:.1f}" y="{y_end + 34}" '
                f'text-anchor="middle">Absolute standardized difference</text>')
    keys = ["unweighted"] + [s.value for s in report.schemes]
    for j, key in enumerate(keys):
        x = left + 90 * j
        body.append(f'<circle cx="{x}" cy="{y_end + 48}" r="3.5" fill="{_COLORS[key]}"/>')
        body.append(f'<text x="{x + 7}" y="{y_end + 52}">{key}</text>')
    return _svg(width, height, body)


def ps_density_svg(summary: OverlapSummary, labels=("group 1", "group 0")) -> str:
    """Mirrored per-group histograms of the estimated propensity score."""
    width, height, pad = 560, 320, 40
    mid = height / 2
    bins = len(summary.edges) - 1
    dens = {g: summary.counts[g] / max(summary.counts[g].sum(), 1) for g in (1, 0)}
    top = max(float(dens[1].max()), float(dens[0].max()), 1e-12)
    bw = (width - 2 * pad) / bins
    body = []
    for g, sign, color in ((1, -1, "#1f77b4"), (0, 1, "#ff7f0e")):
        for b in range(bins):
            h = (mid - pad) * dens[g][b] / top
            y = mid - h if sign < 0 else mid
            body.append(f'<rect x="{pad + b * bw:.2f}" y="{y:.2f}" width="{bw:.2f}" '
                        f'height="{h:.2f}" fill="{color}" fill-opacity="0.75"/>')
    body.append(f'<line x1="{pad}" y1="{mid}" x2="{width - pad}" y2="{mid}" stroke="black"/>')
    for k in range(6):
        x = pad + (width - 2 * pad) * k / 5
        body.append(f'<text x="{x:.1f}" y="{height - 10}" text-anchor="middle">{k / 5:.1f}</text>')
    body.append(f'<text x="{pad}" y="{pad - 16}">{_esc(labels[0])} (up)</text>')
    body.append(f'<text x="{pad}" y="{height - 26}">{_esc(labels[1])} (down)</text>')
    return _svg(width, height, body)
