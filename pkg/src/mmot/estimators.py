"""scikit-learn style front ends for the dual ascent solver."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .barycenter import BarycenterProblem, extract_barycenter
from .solver import MmotProblem, SolverConfig, solve
from .transforms import pushforward
from .validation import check_graph, check_marginals


class _SolverParams(BaseEstimator):
    # every SolverConfig field is a constructor parameter of the estimators
    def _config(self) -> SolverConfig:
        return SolverConfig(
            sigma0=self.sigma0,
            armijo_slope=self.armijo_slope,
            shrink=self.shrink,
            grow=self.grow,
            max_iters=self.max_iters,
            tol_objective=self.tol_objective,
            tol_residual=self.tol_residual,
            root_mode=self.root_mode,
            root=self.root,
            max_backtracks=self.max_backtracks,
            patience=self.patience,
            splatting=self.splatting,
            update=self.update,
        )


class MultiMarginalOT(_SolverParams):
    """Pairwise multi-marginal transport between densities on one grid.

    Parameters
    ----------
    graph : CostGraph or iterable of (i, j, weight), optional
        Pairwise costs ``(w/2)|x_i - x_j|^2``.  Defaults to the unit chain.
    normalize : bool
        Rescale inputs to unit mass instead of requiring it.
    floor : float
        Relative density floor applied when normalizing.
    warm_start : bool
        Start the next ``fit`` from the previous tree potentials.

    The remaining parameters are the fields of :class:`SolverConfig`.

    Attributes
    ----------
    potentials_ : list of ndarray
        One dual potential per input marginal.
    objective_ : float
    history_ : list of dict
    converged_ : bool
    n_iter_ : int
    """

    def __init__(self, graph=None, *, normalize=False, floor=0.0, sigma0=None, armijo_slope=0.1,
                 shrink=0.5, grow=1.1, max_iters=500, tol_objective=1e-9, tol_residual=1e-4,
                 root_mode="cycle", root=0, max_backtracks=20, patience=None, splatting="bilinear",
                 update="potential", warm_start=False):
        self.graph = graph
        self.normalize = normalize
        self.floor = floor
        self.sigma0 = sigma0
        self.armijo_slope = armijo_slope
        self.shrink = shrink
        self.grow = grow
        self.max_iters = max_iters
        self.tol_objective = tol_objective
        self.tol_residual = tol_residual
        self.root_mode = root_mode
        self.root = root
        self.max_backtracks = max_backtracks
        self.patience = patience
        self.splatting = splatting
        self.update = update
        self.warm_start = warm_start

    def fit(self, X, y=None):
        """Solve the dual problem; ``X`` is a sequence of 2D densities."""
        margs = check_marginals(X, self.normalize, self.floor)
        problem = MmotProblem(check_graph(self.graph, len(margs)), margs)
        initial = None
        if self.warm_start and hasattr(self, "tree_potentials_"):
            if self.tree_potentials_.shape[1:] == problem.shape:
                initial = self.tree_potentials_
        result = solve(problem, self._config(), initial=initial)
        self.marginals_ = margs
        self.result_ = result
        self.potentials_ = result.potentials
        self.tree_potentials_ = result.tree_potentials
        self.objective_ = result.objective
        self.history_ = result.history
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        return self

    def score(self, X=None, y=None) -> float:
        """Dual objective of the fitted potentials."""
        check_is_fitted(self, "objective_")
        return self.objective_

    def transport(self, source: int, target: int) -> np.ndarray:
        """Image of marginal ``source`` under the two-marginal map towards ``target``.

        Uses the fitted potential of ``source`` with the weight of the edge
        between them; only meaningful on a two-node graph or a leaf edge.
        """
        check_is_fitted(self, "potentials_")
        graph = check_graph(self.graph, len(self.marginals_))
        w = graph.weight(source, target)
        return pushforward(self.potentials_[source], self.marginals_[source], w, mode=self.splatting)


class WassersteinBarycenter(_SolverParams):
    """Weighted barycenter of densities, computed as a multi-marginal problem.

    Parameters
    ----------
    weights : array-like, optional
        Positive weights summing to one; equal weights by default.
    node : int
        Marginal whose potential the barycenter is read from.

    Solver parameters are as in :class:`MultiMarginalOT`, except that
    splatting defaults to ``"adaptive"`` since the output is an image.

    Attributes
    ----------
    barycenter_ : ndarray
        Density of the barycenter on the input grid.
    weights_ : ndarray
    result_ : SolveResult
    """

    def __init__(self, weights=None, *, node=0, normalize=False, floor=0.0, sigma0=None,
                 armijo_slope=0.1, shrink=0.5, grow=1.1, max_iters=500, tol_objective=1e-9,
                 tol_residual=1e-4, root_mode="cycle", root=0, max_backtracks=20, patience=None,
                 splatting="adaptive", update="potential"):
        self.weights = weights
        self.node = node
        self.normalize = normalize
        self.floor = floor
        self.sigma0 = sigma0
        self.armijo_slope = armijo_slope
        self.shrink = shrink
        self.grow = grow
        self.max_iters = max_iters
        self.tol_objective = tol_objective
        self.tol_residual = tol_residual
        self.root_mode = root_mode
        self.root = root
        self.max_backtracks = max_backtracks
        self.patience = patience
        self.splatting = splatting
        self.update = update

    def fit(self, X, y=None):
        margs = check_marginals(X, self.normalize, self.floor)
        m = len(margs)
        weights = np.full(m, 1.0 / m) if self.weights is None else np.asarray(self.weights, dtype=float)
        if not 0 <= self.node < m:
            raise ValueError(f"node {self.node} is not one of the {m} marginals")
        problem = BarycenterProblem(margs, tuple(weights))
        result = solve(problem.to_mmot(), self._config())
        bary = extract_barycenter(result.potentials[self.node], margs[self.node],
                                  problem.weights[self.node], mode=self.splatting)
        self.marginals_ = margs
        self.weights_ = np.asarray(problem.weights)
        self.result_ = result
        self.potentials_ = result.potentials
        self.barycenter_ = np.array(bary.values)
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        return self

    def extract(self, node: int) -> np.ndarray:
        """Barycenter read off from another marginal's potential."""
        check_is_fitted(self, "result_")
        bary = extract_barycenter(self.potentials_[node], self.marginals_[node], self.weights_[node],
                                  mode=self.splatting)
        return np.array(bary.values)
