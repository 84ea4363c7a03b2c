"""Publication-style figures for lrperc CSV/JSON artifacts."""

from .io import SchemaError, read_report, read_sweep, read_two_point, shell_average
from .figures import FigureSpec, render

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SchemaError",
    "read_report",
    "read_sweep",
    "read_two_point",
    "render",
    "shell_average",
    "__version__",
]
