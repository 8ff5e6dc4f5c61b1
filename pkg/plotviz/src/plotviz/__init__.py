"""Render bench CSV outputs as figures.

A read-only consumer: every plotted number (including slope annotations)
is taken verbatim from the CSV; nothing is refit or recomputed.
"""

__version__ = "0.1.0"

from .render import MalformedCsvError, MissingSeriesError, PlotSpec, load_rows, render

__all__ = [
    "__version__",
    "MalformedCsvError",
    "MissingSeriesError",
    "PlotSpec",
    "load_rows",
    "render",
]
