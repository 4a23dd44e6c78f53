"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np

from .exceptions import GridMismatch
from .graph import CostGraph
from .grid import DensityField, density_from_image


def check_density(values, normalize: bool = False, floor: float = 0.0) -> DensityField:
    """Return a :class:`DensityField`.

    With ``normalize=True`` arbitrary nonnegative arrays are accepted and
    rescaled to unit mass (after adding ``floor`` times the maximum).
    """
    if isinstance(values, DensityField):
        return values
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"densities must be 2D arrays, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("density contains NaN or inf")
    if normalize:
        if np.any(arr < 0):
            raise ValueError("density must be nonnegative")
        return density_from_image(arr, floor=floor)
    return DensityField(arr)


def check_marginals(marginals, normalize: bool = False, floor: float = 0.0, min_count: int = 2) -> tuple:
    """Validate a sequence of densities that must share one grid."""
    if isinstance(marginals, np.ndarray) and marginals.ndim == 3:
        marginals = list(marginals)
    margs = tuple(check_density(m, normalize, floor) for m in marginals)
    if len(margs) < min_count:
        raise ValueError(f"need at least {min_count} marginals, got {len(margs)}")
    shapes = {m.shape for m in margs}
    if len(shapes) != 1:
        raise GridMismatch(f"marginals live on different grids: {sorted(shapes)}")
    return margs


def check_graph(graph, n_marginals: int) -> CostGraph:
    """``None`` means the unit-weight chain through all marginals."""
    if graph is None:
        return CostGraph.chain(n_marginals)
    if not isinstance(graph, CostGraph):
        graph = CostGraph(n_marginals, tuple(graph))
    if graph.n_nodes != n_marginals:
        raise ValueError(f"graph has {graph.n_nodes} nodes but {n_marginals} marginals were given")
    return graph
