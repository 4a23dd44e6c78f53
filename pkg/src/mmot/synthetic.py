"""Synthetic marginals used by the validation suites and the tests."""
from __future__ import annotations

import numpy as np

from .grid import DensityField, Grid2D


def bump(n: int, center, radius: float, ny: int | None = None) -> np.ndarray:
    """Smooth compactly supported bump ``(1 - r^2/R^2)^3`` sampled at cell centres."""
    X, Y = Grid2D(n, ny or n).centers()
    r2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)


def translated_bumps(n: int, start=(0.2, 0.2), step=(0.2, 0.2), count: int = 4, radius: float = 0.08):
    """``count`` unit-mass copies of one bump, each shifted by ``step`` from the last.

    With the defaults the chain cost ``sum 1/2 |x_i - x_{i+1}|^2`` has optimal
    value ``(count - 1) * |step|^2 / 2 = 0.12``.
    """
    out = []
    for i in range(count):
        c = (start[0] + i * step[0], start[1] + i * step[1])
        out.append(DensityField.normalized(bump(n, c, radius)))
    return out


def translated_cost(step=(0.2, 0.2), count: int = 4) -> float:
    return 0.5 * (count - 1) * float(step[0] ** 2 + step[1] ** 2)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def shape_images(n: int) -> list[np.ndarray]:
    """Four overlapping smooth shapes: disc, ellipse, rounded square, ring.

    All are centred near the middle of the domain so that transport between
    them is a deformation rather than a long-range move.
    """
    X, Y = Grid2D(n, n).centers()
    soft = 0.03
    disc = _smoothstep((0.22 - np.hypot(X - 0.5, Y - 0.5)) / soft)
    ell = _smoothstep((1.0 - np.hypot((X - 0.5) / 0.3, (Y - 0.52) / 0.15)) / (soft / 0.2))
    sq = _smoothstep((0.18 - np.maximum(np.abs(X - 0.48), np.abs(Y - 0.5))) / soft)
    rr = np.hypot(X - 0.5, Y - 0.5)
    ring = _smoothstep((0.08 - np.abs(rr - 0.2)) / soft)
    return [disc, ell, sq, ring]


def shape_marginals(n: int, floor: float = 1e-3) -> list[DensityField]:
    from .grid import density_from_image

    return [density_from_image(img, floor=floor) for img in shape_images(n)]


def corner_shapes(n: int) -> list[np.ndarray]:
    """Four distinct shapes for the bilinear interpolation atlas: cross, heart, tooth-like, duck-like blob."""
    X, Y = Grid2D(n, n).centers()
    u, v = X - 0.5, Y - 0.5
    soft = 1.5 / n
    cross = np.maximum(
        _smoothstep((0.07 - np.abs(u)) / soft) * _smoothstep((0.28 - np.abs(v)) / soft),
        _smoothstep((0.07 - np.abs(v)) / soft) * _smoothstep((0.28 - np.abs(u)) / soft),
    )
    # heart curve (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0, scaled; axis 0 is treated as "down"
    hx, hy = v / 0.27, -u / 0.27 + 0.1
    implicit = (hx**2 + hy**2 - 1) ** 3 - hx**2 * hy**3
    gx, gy = np.gradient(implicit, 1.0 / n)
    dist = implicit / np.maximum(np.hypot(gx, gy), 1e-12)
    heart = _smoothstep(0.5 - dist / (2 * soft))
    tooth = (_smoothstep((0.25 - np.hypot(u + 0.05, v)) / soft)
             * (1 - _smoothstep((0.1 - np.hypot(u - 0.2, v)) / soft)))
    body = _smoothstep((1 - np.hypot((u - 0.08) / 0.2, (v + 0.02) / 0.27)) / (soft / 0.2))
    head = _smoothstep((0.1 - np.hypot(u + 0.17, v - 0.15)) / soft)
    duck = np.maximum(body, head)
    return [cross, heart, tooth, duck]


def smooth_noise(shape, rng, blur: float = 2.0) -> np.ndarray:
    """Gaussian-filtered white noise scaled to unit maximum modulus."""
    from scipy.ndimage import gaussian_filter

    field = gaussian_filter(rng.standard_normal(shape), blur, mode="reflect")
    return field / np.abs(field).max()


def random_density(shape, rng, contrast: float = 0.8) -> DensityField:
    """Smooth strictly positive density; ``contrast`` < 1 keeps it away from zero."""
    return DensityField.normalized(1.0 + contrast * smooth_noise(shape, rng))


def line_density(masses, ny: int = 2) -> DensityField:
    """Embed point masses at ``(k + 1/2) / n`` on the unit interval as a grid density constant in y."""
    p = np.asarray(masses, dtype=float)
    return DensityField.normalized(np.repeat(p[:, None], ny, axis=1))


def line_points(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n
