"""Training-curve figures from metrics CSV files."""

from .render import CurveSpec, SchemaError, epoch_series, read_metrics, render_curves

__version__ = "0.1.0"
