"""Figure rendering for b2bvalue result CSVs."""

from .render import (
    FigureSpec,
    GroupStats,
    RATE_METRICS,
    RenderError,
    RenderedFigure,
    render_marginal,
    render_violins,
)

__version__ = "0.1.0"
