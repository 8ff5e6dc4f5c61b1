"""Figure construction from bench result rows."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

EXPECTED_HEADER = ["experiment", "scheme", "n", "t", "kind", "metric", "value", "se", "seed"]

KINDS = ("variance-ratio", "rate-loglog")


class MalformedCsvError(ValueError):
    pass


class MissingSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    """What to plot: a CSV, a plot kind, series selectors, an output image.

    Series selectors are scheme pairs (``stratified/ordered-stratified``)
    for ``variance-ratio`` plots and ``scheme@phi`` pairs
    (``stratified@tanh``) for ``rate-loglog`` plots.  The output format
    follows the file suffix (PNG or SVG).
    """

    csv_path: str
    kind: str
    series: tuple[str, ...]
    out_path: str
    figsize: tuple[float, float] = field(default=(7.0, 4.5))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.series:
            raise MissingSeriesError("no series selected")


def load_rows(csv_path: str) -> list[dict]:
    try:
        with open(csv_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != EXPECTED_HEADER:
                raise MalformedCsvError(
                    f"unexpected header {reader.fieldnames}; expected {EXPECTED_HEADER}"
                )
            rows = list(reader)
    except OSError as exc:
        raise MalformedCsvError(f"cannot read {csv_path}: {exc}") from exc
    for row in rows:
        try:
            row["value"] = float(row["value"])
            row["n"] = int(row["n"]) if row["n"] else None
            row["t"] = int(row["t"]) if row["t"] else None
        except ValueError as exc:
            raise MalformedCsvError(f"bad numeric field in row {row}") from exc
    return rows


def _series_rows(rows, metric, scheme, experiment=None):
    out = [
        r for r in rows
        if r["metric"] == metric and r["scheme"] == scheme
        and (experiment is None or r["experiment"] == experiment)
    ]
    return out


def _render_variance_ratio(rows, spec, ax):
    for name in spec.series:
        picked = _series_rows(rows, "var_ratio", name)
        if not picked:
            raise MissingSeriesError(
                f"no var_ratio rows for scheme pair {name!r} in {spec.csv_path}"
            )
        picked.sort(key=lambda r: r["t"])
        ax.plot([r["t"] for r in picked], [r["value"] for r in picked],
                marker="o", markersize=3, label=name)
    ax.axhline(1.0, color="grey", linewidth=0.8, linestyle="--")
    ax.set_xlabel("t")
    ax.set_ylabel("var_ratio")
    ax.legend()


def _render_rate_loglog(rows, spec, ax):
    for name in spec.series:
        scheme, sep, phi = name.partition("@")
        if not sep:
            raise MissingSeriesError(
                f"rate series must look like scheme@phi, got {name!r}"
            )
        experiment = f"rate/phi={phi}"
        var_rows = _series_rows(rows, "var", scheme, experiment)
        slope_rows = _series_rows(rows, "slope", scheme, experiment)
        intercept_rows = _series_rows(rows, "intercept", scheme, experiment)
        if not var_rows or not slope_rows or not intercept_rows:
            raise MissingSeriesError(
                f"no rate rows for {name!r} in {spec.csv_path}"
            )
        var_rows.sort(key=lambda r: r["n"])
        ns = [r["n"] for r in var_rows]
        vs = [r["value"] for r in var_rows]
        slope = slope_rows[0]["value"]
        intercept = intercept_rows[0]["value"]
        points = ax.scatter(ns, vs, s=18, label=f"{name} (slope {slope:.3f})")
        fitted = [math.exp(intercept) * n**slope for n in ns]
        ax.plot(ns, fitted, linewidth=0.9, color=points.get_facecolor()[0])
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("var")
    ax.legend()


def render(spec: PlotSpec):
    """Build the figure for ``spec``, save it, and return it.

    The returned figure's line/scatter data are exactly the CSV values, so
    callers can verify that nothing was recomputed.
    """
    rows = load_rows(spec.csv_path)
    fig, ax = plt.subplots(figsize=spec.figsize, dpi=100)
    try:
        if spec.kind == "variance-ratio":
            _render_variance_ratio(rows, spec, ax)
        else:
            _render_rate_loglog(rows, spec, ax)
        fig.tight_layout()
        fig.savefig(spec.out_path, metadata=_stable_metadata(spec.out_path))
    except Exception:
        plt.close(fig)
        raise
    return fig


def _stable_metadata(out_path: str) -> dict:
    # strip volatile metadata so identical inputs give identical files
    if out_path.lower().endswith(".svg"):
        return {"Date": None}
    if out_path.lower().endswith(".png"):
        return {"Software": "plotviz"}
    return {}
