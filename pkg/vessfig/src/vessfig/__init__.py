"""Batch figure rendering for the dispatch planner's CSV outputs.

Display-only: every number shown comes from the input file, including the
certified bound on the shifted-distribution figure.
"""

__version__ = "0.1.0"

from .errors import SchemaMismatch
from .figures import FigureJob, KINDS, render

__all__ = ["FigureJob", "KINDS", "SchemaMismatch", "render", "__version__"]
