"""Augmented Euler-Korteweg / Navier-Stokes-Korteweg workbench on the 1-D torus."""
from .constitutive import ModelParams
from .field import Field, Grid, make_grid

__version__ = "0.1.0"
__all__ = ["ModelParams", "Grid", "Field", "make_grid", "__version__"]
