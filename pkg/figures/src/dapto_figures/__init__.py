"""Figure rendering for dapto benchmark CSVs."""

from .render import KINDS, NoDataError, PlotSpec, SchemaError, render

__version__ = "0.1.0"
