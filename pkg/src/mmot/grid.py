"""Uniform cell-centred grids on the unit square and the fields that live on them.

Arrays are indexed ``values[k, l]`` with ``k`` along x and ``l`` along y; cell
``(k, l)`` has centre ``((k + 1/2) / nx, (l + 1/2) / ny)``.  Potentials are plain
float arrays of shape ``(nx, ny)``; densities are wrapped in :class:`DensityField`
so that the unit-mass invariant is checked once at construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import AllZeroInput, GridMismatch

MASS_TOL = 1e-12
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) < 2 or int(self.ny) < 2:
            raise ValueError(f"grid needs at least 2 cells per axis, got {self.nx}x{self.ny}")

    @classmethod
    def from_shape(cls, shape) -> "Grid2D":
        if len(shape) != 2:
            raise GridMismatch(f"expected a 2D array, got shape {tuple(shape)}")
        return cls(int(shape[0]), int(shape[1]))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.nx * self.ny)

    @property
    def spacing(self) -> tuple[float, float]:
        return (1.0 / self.nx, 1.0 / self.ny)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1D cell-centre coordinates along x and y."""
        return (np.arange(self.nx) + 0.5) / self.nx, (np.arange(self.ny) + 0.5) / self.ny

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinate arrays ``(X, Y)`` of shape ``(nx, ny)``."""
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")


@dataclass(frozen=True, eq=False)
class DensityField:
    """Nonnegative density (w.r.t. Lebesgue measure) with unit total mass."""

    values: np.ndarray
    grid: Grid2D = field(default=None)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        grid = self.grid if self.grid is not None else Grid2D.from_shape(values.shape)
        if values.shape != grid.shape:
            raise GridMismatch(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("density contains non-finite values")
        if values.min() < 0:
            raise ValueError("density must be nonnegative")
        mass = grid.cell_area * values.sum()
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"density must have unit mass, got {mass!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def normalized(cls, values) -> "DensityField":
        """Rescale a nonnegative array to unit mass."""
        values = np.asarray(values, dtype=float)
        grid = Grid2D.from_shape(values.shape)
        total = values.sum() * grid.cell_area
        if not total > 0:
            raise AllZeroInput("cannot normalise an array with zero total mass")
        return cls(values / total, grid)

    @property
    def shape(self):
        return self.values.shape

    def mass(self) -> float:
        return float(self.grid.cell_area * self.values.sum())

    def cell_masses(self) -> np.ndarray:
        return self.values * self.grid.cell_area


def as_values(field_or_array) -> np.ndarray:
    """Return the raw array behind a field, or the array itself."""
    if isinstance(field_or_array, DensityField):
        return field_or_array.values
    return np.asarray(field_or_array, dtype=float)


def check_same_grid(*arrays) -> Grid2D:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise GridMismatch(f"fields live on different grids: {sorted(shapes)}")
    return Grid2D.from_shape(shapes.pop())


def density_from_image(pixels, floor: float = DEFAULT_FLOOR) -> DensityField:
    """Turn an intensity image into a probability density on a grid of the same shape.

    ``floor`` is added as a fraction of the maximum intensity before normalisation,
    so that empty image regions still carry a little mass.
    """
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim != 2 or pixels.size == 0:
        raise ValueError("pixels must be a nonempty 2D array")
    if floor < 0:
        raise ValueError("floor must be nonnegative")
    if np.any(pixels < 0) or not np.all(np.isfinite(pixels)):
        raise ValueError("pixel intensities must be finite and nonnegative")
    peak = pixels.max()
    if peak <= 0:
        raise AllZeroInput("image is entirely zero; nothing to normalise")
    return DensityField.normalized(pixels + floor * peak)


def integrate_against(f, mu) -> float:
    """Discrete integral of a potential against a density, ``a * sum(f * mu)``."""
    f = np.asarray(f, dtype=float)
    m = as_values(mu)
    grid = check_same_grid(f, m)
    return float(grid.cell_area * np.sum(f * m))


def l1_distance(mu, nu) -> float:
    m, n = as_values(mu), as_values(nu)
    grid = check_same_grid(m, n)
    return float(grid.cell_area * np.abs(m - n).sum())
