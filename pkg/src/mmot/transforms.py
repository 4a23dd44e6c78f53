"""Discrete Legendre and c-transforms on the grid, gradients and pushforwards.

The Legendre transform ``phi*(s) = max_x <x, s> - phi(x)`` over the grid cell
centres is computed exactly by nesting two 1D transforms (rows, then columns).
Each 1D transform walks the lower convex hull of ``(x_i, phi_i)``, which takes
linear time because both the points and the query slopes are sorted.
"""
from __future__ import annotations

import numba
import numpy as np
from scipy.ndimage import map_coordinates

from .exceptions import GridMismatch, NonpositiveWeight
from .grid import Grid2D, as_values, check_same_grid


@numba.njit(cache=True)
def _legendre_1d(x, phi, slopes, out, arg):
    # lower hull of (x_i, phi_i); x ascending
    n = x.shape[0]
    hull = np.empty(n, dtype=np.int64)
    h = 0
    for i in range(n):
        while h >= 2:
            a = hull[h - 2]
            b = hull[h - 1]
            # drop b if it lies on or above the segment a -> i
            if (phi[b] - phi[a]) * (x[i] - x[a]) >= (phi[i] - phi[a]) * (x[b] - x[a]):
                h -= 1
            else:
                break
        hull[h] = i
        h += 1
    k = 0
    for j in range(slopes.shape[0]):
        s = slopes[j]
        best = x[hull[k]] * s - phi[hull[k]]
        while k + 1 < h:
            cand = x[hull[k + 1]] * s - phi[hull[k + 1]]
            if cand > best:
                best = cand
                k += 1
            else:
                break
        out[j] = best
        arg[j] = hull[k]


@numba.njit(cache=True)
def _legendre_2d(phi, x, y, sx, sy):
    nx, ny = phi.shape
    mx, my = sx.shape[0], sy.shape[0]
    partial = np.empty((nx, my))
    parg = np.empty((nx, my), dtype=np.int64)
    row = np.empty(my)
    rarg = np.empty(my, dtype=np.int64)
    for k in range(nx):
        _legendre_1d(y, phi[k], sy, row, rarg)
        partial[k, :] = row
        parg[k, :] = rarg
    out = np.empty((mx, my))
    ax = np.empty((mx, my), dtype=np.int64)
    ay = np.empty((mx, my), dtype=np.int64)
    col_in = np.empty(nx)
    col_out = np.empty(mx)
    carg = np.empty(mx, dtype=np.int64)
    for l in range(my):
        for k in range(nx):
            col_in[k] = -partial[k, l]
        _legendre_1d(x, col_in, sx, col_out, carg)
        for i in range(mx):
            out[i, l] = col_out[i]
            ax[i, l] = carg[i]
            ay[i, l] = parg[carg[i], l]
    return out, ax, ay


def _legendre(phi, slopes_x, slopes_y):
    phi = np.ascontiguousarray(phi, dtype=float)
    x, y = Grid2D.from_shape(phi.shape).axes()
    sx = np.ascontiguousarray(slopes_x, dtype=float)
    sy = np.ascontiguousarray(slopes_y, dtype=float)
    return _legendre_2d(phi, x, y, sx, sy)


def legendre_transform(phi) -> np.ndarray:
    """``phi*(y) = max_x (x . y - phi(x))`` with ``x`` and ``y`` ranging over cell centres."""
    phi = np.asarray(phi, dtype=float)
    x, y = Grid2D.from_shape(phi.shape).axes()
    return _legendre(phi, x, y)[0]


SPLAT_MODES = ("bilinear", "adaptive", "nearest", "argmin")


def _check_weight(w):
    if not w > 0:
        raise NonpositiveWeight(f"cost weight must be positive, got {w}")


def c_transform(f, w: float = 1.0) -> np.ndarray:
    """``f^c(y) = min_x (w/2)|x - y|^2 - f(x)`` over grid cell centres.

    Uses ``f^c(y) = (w/2)|y|^2 - phi*(w y)`` with ``phi = (w/2)|x|^2 - f``.
    """
    _check_weight(w)
    f = np.asarray(f, dtype=float)
    grid = Grid2D.from_shape(f.shape)
    x, y = grid.axes()
    X, Y = grid.centers()
    sq = 0.5 * w * (X * X + Y * Y)
    return sq - _legendre(sq - f, w * x, w * y)[0]


def c_transform_with_argmin(f, w: float = 1.0):
    """``f^c`` together with the index arrays ``(ix, iy)`` of a minimiser for every ``y``."""
    _check_weight(w)
    f = np.asarray(f, dtype=float)
    grid = Grid2D.from_shape(f.shape)
    x, y = grid.axes()
    X, Y = grid.centers()
    sq = 0.5 * w * (X * X + Y * Y)
    phi_star, ix, iy = _legendre(sq - f, w * x, w * y)
    return sq - phi_star, ix, iy


def double_c_transform(f, w: float = 1.0) -> np.ndarray:
    """``f^{cc}``: the smallest c-concave function above ``f``."""
    return c_transform(c_transform(f, w), w)


def c_transform_argmin(f, w: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force minimiser indices of the c-transform (lowest linear index on ties).

    Quadratic in the number of cells; meant for diagnostics on small grids.
    """
    _check_weight(w)
    f = np.asarray(f, dtype=float)
    grid = Grid2D.from_shape(f.shape)
    X, Y = grid.centers()
    px, py = X.ravel(), Y.ravel()
    vals = 0.5 * w * ((px[:, None] - px[None, :]) ** 2 + (py[:, None] - py[None, :]) ** 2) - f.ravel()[:, None]
    idx = np.argmin(vals, axis=0)
    return np.unravel_index(idx.reshape(f.shape), f.shape)


def gradient_field(f) -> tuple[np.ndarray, np.ndarray]:
    """Centred differences inside, one-sided at the boundary."""
    f = np.asarray(f, dtype=float)
    hx, hy = Grid2D.from_shape(f.shape).spacing
    gx, gy = np.gradient(f, hx, hy, edge_order=1)
    return gx, gy


def _deposit_axis(p, n, mode):
    p = np.clip(p, 0.0, n - 1.0)
    snapped = np.rint(p)
    p = np.where(np.abs(p - snapped) < 1e-9, snapped, p)
    if mode == "nearest":
        i0 = np.rint(p).astype(np.int64)
        return i0, i0, np.zeros_like(p)
    i0 = np.minimum(np.floor(p).astype(np.int64), n - 1)
    frac = p - i0
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, frac


def splat(mass, target_x, target_y, shape, mode: str = "bilinear") -> np.ndarray:
    """Deposit point masses at continuous positions onto cell centres.

    Returns deposited *mass* per cell.  Positions are clamped to the rectangle
    spanned by the outermost cell centres.
    """
    nx, ny = shape
    mass = np.asarray(mass, dtype=float).ravel()
    px = np.asarray(target_x, dtype=float).ravel() * nx - 0.5
    py = np.asarray(target_y, dtype=float).ravel() * ny - 0.5
    x0, x1, fx = _deposit_axis(px, nx, mode)
    y0, y1, fy = _deposit_axis(py, ny, mode)
    out = np.zeros(nx * ny)
    for ix, wx in ((x0, 1.0 - fx), (x1, fx)):
        for iy, wy in ((y0, 1.0 - fy), (y1, fy)):
            out += np.bincount(ix * ny + iy, weights=mass * wx * wy, minlength=nx * ny)
    return out.reshape(nx, ny)


def _stretch(p, axis):
    # largest extent, in cells, of the image of one source cell along ``axis``
    d = np.abs(np.diff(p, axis=axis))
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 0)
    back = np.pad(d, pad, mode="edge")
    pad[axis] = (0, 1)
    fwd = np.pad(d, pad, mode="edge")
    return np.maximum(back, fwd)


def adaptive_splat(mass, target_x, target_y, max_sub: int = 8) -> np.ndarray:
    """Bilinear splatting that subdivides source cells whose image spans more than a cell.

    ``mass``, ``target_x`` and ``target_y`` are grids of the same shape; the
    target of a sub-point is interpolated bilinearly from the targets of the
    surrounding cell centres.  Cells that are not stretched deposit a single
    point, so this agrees with :func:`splat` wherever the map does not expand.
    """
    mass = np.asarray(mass, dtype=float)
    nx, ny = mass.shape
    px = np.asarray(target_x, dtype=float) * nx - 0.5
    py = np.asarray(target_y, dtype=float) * ny - 0.5
    kx = np.clip(np.ceil(np.maximum(_stretch(px, 0), _stretch(py, 0)) - 1e-9), 1, max_sub).astype(int)
    ky = np.clip(np.ceil(np.maximum(_stretch(px, 1), _stretch(py, 1)) - 1e-9), 1, max_sub).astype(int)
    live = mass > 0
    out = np.zeros(nx * ny)
    key = kx * (max_sub + 1) + ky
    for k in np.unique(key[live]):
        a, b = divmod(int(k), max_sub + 1)
        ii, jj = np.nonzero(live & (key == k))
        if a == 1 and b == 1:
            sx, sy, m = px[ii, jj], py[ii, jj], mass[ii, jj]
        else:
            ox = (np.arange(a) + 0.5) / a - 0.5
            oy = (np.arange(b) + 0.5) / b - 0.5
            OX, OY = np.meshgrid(ox, oy, indexing="ij")
            ci = np.clip(ii[:, None] + OX.ravel()[None, :], 0, nx - 1).ravel()
            cj = np.clip(jj[:, None] + OY.ravel()[None, :], 0, ny - 1).ravel()
            coords = np.vstack([ci, cj])
            sx = map_coordinates(px, coords, order=1, mode="nearest")
            sy = map_coordinates(py, coords, order=1, mode="nearest")
            m = np.repeat(mass[ii, jj] / (a * b), a * b)
        out += splat(m, (sx + 0.5) / nx, (sy + 0.5) / ny, (nx, ny)).ravel()
    return out.reshape(nx, ny)


def pushforward_map(f_prime, w: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``S(x) = x - grad f'(x) / w`` evaluated at the cell centres."""
    _check_weight(w)
    f_prime = np.asarray(f_prime, dtype=float)
    X, Y = Grid2D.from_shape(f_prime.shape).centers()
    gx, gy = gradient_field(f_prime)
    return X - gx / w, Y - gy / w


def argmin_pushforward(u, mu, w: float = 1.0) -> np.ndarray:
    """Density obtained by moving the mass of ``mu`` at ``y`` onto a minimiser of ``c(., y) - u``.

    This is the map whose pushforward makes ``mu_k - T#mu`` an exact
    supergradient of the discrete dual in ``u``.
    """
    m = as_values(mu)
    u = np.asarray(u, dtype=float)
    grid = check_same_grid(u, m)
    _, ix, iy = c_transform_with_argmin(u, w)
    out = np.bincount((ix * grid.ny + iy).ravel(), weights=m.ravel(), minlength=m.size)
    return out.reshape(m.shape)


def pushforward(f_prime, mu, w: float = 1.0, mode: str = "bilinear") -> np.ndarray:
    """Density of ``S#mu`` with ``S(x) = x - grad f'(x) / w``.

    ``mode`` is ``"bilinear"`` (default), ``"nearest"`` or ``"adaptive"``
    (see :func:`adaptive_splat`).  ``"argmin"``
    replaces ``S`` by the discrete c-transform minimiser of ``f'^c``, which
    agrees with the minimiser for any ``u`` with ``u^c = f'`` away from ties.
    Mass is conserved exactly up to rounding; no rescaling is applied.
    """
    m = as_values(mu)
    f_prime = np.asarray(f_prime, dtype=float)
    if f_prime.shape != m.shape:
        raise GridMismatch(f"potential {f_prime.shape} and density {m.shape} differ")
    if mode not in SPLAT_MODES:
        raise ValueError(f"unknown splatting mode {mode!r}")
    if mode == "argmin":
        return argmin_pushforward(c_transform(f_prime, w), m, w)
    grid = check_same_grid(f_prime, m)
    sx, sy = pushforward_map(f_prime, w)
    if mode == "adaptive":
        deposited = adaptive_splat(m * grid.cell_area, sx, sy)
    else:
        deposited = splat(m * grid.cell_area, sx, sy, grid.shape, mode)
    return deposited / grid.cell_area
