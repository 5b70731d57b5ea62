"""Static report figures for geolatnet run directories."""

from .figures import FIGURE_KINDS, FigureSpec, PlotsError, render

__version__ = "0.1.0"
