"""Static-figure renderer for the lab's CSV artifacts.

Pure file-in/file-out: this package reads the headered CSV files the
simulation CLI writes and renders figures from them.  It never imports the
solver — the CSV headers below are its entire knowledge of the producer.
"""

from .figures import EXPECTED_HEADERS, FigureSpec, KINDS, render

__all__ = ["EXPECTED_HEADERS", "FigureSpec", "KINDS", "render"]

__version__ = "0.1.0"
