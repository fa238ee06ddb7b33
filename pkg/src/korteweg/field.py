"""Uniform periodic 1-D grid with Fourier differentiation and trapezoid quadrature.

Solver code works directly on numpy arrays through the ``Grid`` methods;
``Field`` is the validated carrier used at the public surface and for
serialization.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridError, NonFiniteError


@dataclass(frozen=True)
class Grid:
    n: int
    length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise GridError(f"n must be an even integer >= 8, got {self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise GridError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)

    @cached_property
    def _ik_odd(self) -> np.ndarray:
        ik = 1j * self.wavenumbers
        ik[-1] = 0.0  # Nyquist mode has no odd-order derivative on a real grid
        return ik

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1) <= self.n // 3

    def deriv(self, values, order: int = 1) -> np.ndarray:
        """Pseudo-spectral derivative of node values."""
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        fhat = np.fft.rfft(values)
        if order == 1:
            fhat *= self._ik_odd
        else:
            fhat *= -self.wavenumbers**2
        return np.fft.irfft(fhat, n=self.n)

    def dealias(self, values) -> np.ndarray:
        """2/3-rule truncation: zero every mode above n/3."""
        fhat = np.fft.rfft(values)
        fhat[~self._dealias_mask] = 0.0
        return np.fft.irfft(fhat, n=self.n)

    def quad(self, values) -> float:
        return float(self.dx * np.sum(values))

    def nested_in(self, other: "Grid") -> int:
        """Return k such that ``other`` refines this grid k-fold with shared nodes."""
        ratio = other.n // self.n
        if other.n % self.n or not np.isclose(other.length, self.length, rtol=1e-14, atol=0):
            raise GridError(f"grid n={other.n} does not refine grid n={self.n}")
        return ratio

    def to_dict(self) -> dict:
        return {"n": self.n, "length": self.length}


def make_grid(n: int, length: float) -> Grid:
    return Grid(int(n), float(length))


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("field contains NaN or Inf")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(grid.x))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def deriv(f: Field, order: int = 1) -> Field:
    return Field(f.grid, f.grid.deriv(f.values, order))


def quad(f: Field) -> float:
    return f.grid.quad(f.values)


def norm_l2(f: Field) -> float:
    return float(np.sqrt(f.grid.quad(f.values**2)))


def norm_linf(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def write_fields_csv(path, grid: Grid, columns: dict) -> None:
    """Write node coordinates and named columns; floats use round-trip repr."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", *names])
        data = [np.asarray(columns[c], dtype=float) for c in names]
        for j, xj in enumerate(grid.x):
            writer.writerow([repr(float(xj)), *(repr(float(col[j])) for col in data)])


def read_fields_csv(path) -> dict:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = np.array([[float(v) for v in row] for row in body]).T
    return {name: cols[i] for i, name in enumerate(header)}
