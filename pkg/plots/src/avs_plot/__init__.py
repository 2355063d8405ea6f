"""Figure generation for avs experiment CSVs."""

from .figures import (
    KINDS,
    FigureSpec,
    ValidationError,
    load_rows,
    render_all,
    render_figure,
)

__version__ = "0.1.0"
