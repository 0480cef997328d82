"""Figure rendering for sleeping-bandit benchmark CSV files."""

from .plotting import PlotSpec, SchemaError, plot

__version__ = "0.1.0"
__all__ = ["PlotSpec", "SchemaError", "plot", "__version__"]
