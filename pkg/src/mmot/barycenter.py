"""Wasserstein barycenters as a multi-marginal problem on the complete graph."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .exceptions import BadWeights
from .graph import CostGraph, PairwiseCost
from .grid import DensityField, as_values, check_same_grid
from .solver import MmotProblem, SolverConfig, solve
from .transforms import pushforward

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12


def check_weights(weights) -> np.ndarray:
    lam = np.asarray(weights, dtype=float).ravel()
    if lam.size < 2:
        raise BadWeights("need at least two weights")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise BadWeights(f"weights must be positive, got {lam.tolist()}")
    if abs(lam.sum() - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"weights must sum to 1, got {lam.sum()!r}")
    return lam


def gs_cost_graph(weights) -> CostGraph:
    """Complete graph with edge weights ``lambda_i * lambda_j``.

    Since ``sum_{i<j} l_i l_j |x_i - x_j|^2 = sum_i l_i |x_i - xbar|^2`` when the
    weights sum to one, the multi-marginal problem on this graph has the
    barycenter as the image of every marginal.
    """
    lam = check_weights(weights)
    m = lam.size
    edges = [(i, j, PairwiseCost(lam[i] * lam[j])) for i in range(m) for j in range(i + 1, m)]
    return CostGraph(m, tuple(edges))


@dataclass(frozen=True)
class BarycenterProblem:
    marginals: tuple
    weights: tuple

    def __post_init__(self):
        margs = tuple(m if isinstance(m, DensityField) else DensityField(m) for m in self.marginals)
        lam = check_weights(self.weights)
        if len(margs) != lam.size:
            raise BadWeights(f"{lam.size} weights for {len(margs)} marginals")
        for m in margs[1:]:
            check_same_grid(margs[0], m)
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "weights", tuple(float(v) for v in lam))

    def to_mmot(self) -> MmotProblem:
        return MmotProblem(gs_cost_graph(self.weights), self.marginals)


def extract_barycenter(potential, mu, weight: float, mode: str = "bilinear") -> DensityField:
    """Push ``mu`` forward under ``x - grad f(x) / weight``."""
    if not weight > 0:
        raise BadWeights(f"weight must be positive, got {weight}")
    values = pushforward(potential, mu, weight, mode=mode)
    return DensityField(np.maximum(values, 0.0) / (values.sum() / values.size))


def solve_barycenter(problem: BarycenterProblem, config: SolverConfig | None = None, node: int = 0):
    """Solve the multi-marginal problem and extract the barycenter from ``node``.

    Extraction uses the same splatting mode as the solve.  Returns ``(barycenter, SolveResult)``.
    """
    config = config or SolverConfig()
    result = solve(problem.to_mmot(), config)
    bary = extract_barycenter(result.potentials[node], problem.marginals[node], problem.weights[node],
                              mode=config.splatting)
    return bary, result


def barycenter(marginals, weights, config: SolverConfig | None = None, node: int = 0) -> DensityField:
    """Barycenter of ``marginals``; zero weights drop their marginal.

    A single remaining marginal is returned unchanged.
    """
    lam = np.asarray(weights, dtype=float)
    if lam.size != len(marginals):
        raise BadWeights(f"{lam.size} weights for {len(marginals)} marginals")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"weights must be nonnegative and sum to 1, got {lam.tolist()}")
    keep = np.flatnonzero(lam > 0)
    margs = [marginals[i] if isinstance(marginals[i], DensityField) else DensityField(marginals[i])
             for i in keep]
    if len(keep) == 1:
        return margs[0]
    sub = lam[keep] / lam[keep].sum()
    if node not in keep:
        node = int(keep[0])
    bary, _ = solve_barycenter(BarycenterProblem(tuple(margs), tuple(sub)), config,
                               int(np.searchsorted(keep, node)))
    return bary


def bilinear_weights(u: float, v: float) -> np.ndarray:
    return np.array([(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v])


def _atlas_cell(args):
    corners, u, v, config = args
    return barycenter(corners, bilinear_weights(u, v), config)


def barycentric_grid(corner_images, steps: int, config: SolverConfig | None = None, jobs: int = 1):
    """``steps x steps`` barycenters of four corners under bilinear weights.

    Entry ``[i][j]`` uses ``u = i / (steps - 1)`` and ``v = j / (steps - 1)``.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if len(corner_images) != 4:
        raise ValueError("need exactly four corner densities")
    corners = [c if isinstance(c, DensityField) else DensityField(c) for c in corner_images]
    params = np.linspace(0.0, 1.0, steps)
    tasks = [(corners, u, v, config) for u in params for v in params]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_atlas_cell, tasks))
    else:
        cells = [_atlas_cell(t) for t in tasks]
    return [cells[i * steps:(i + 1) * steps] for i in range(steps)]


def _mass_above(values, level=0.1):
    return values[values > level * values.max()].sum() / values.sum()


def sharpness(density, blur: float = 2.0):
    """``(fraction of mass above 10% of max, same for a Gaussian-blurred copy)``."""
    values = as_values(density)
    blurred = gaussian_filter(values, blur, mode="nearest")
    return _mass_above(values), _mass_above(blurred)


def is_sharp(density, blur: float = 2.0) -> bool:
    own, smoothed = sharpness(density, blur)
    return own > smoothed
