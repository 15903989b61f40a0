"""Figure regeneration for satedge experiment outputs.

Reads the CSVs a satedge run directory contains and redraws the four
figure families as vector images.  Only the documented CSV layout is
consumed; the solver package itself is not imported.
"""

from satedge_plots.figures import PlotDataError, main, make_figures

__version__ = "0.1.0"

__all__ = ["PlotDataError", "main", "make_figures", "__version__"]
