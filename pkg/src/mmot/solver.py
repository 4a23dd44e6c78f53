"""Dual gradient ascent for pairwise multi-marginal transport on a rooted tree.

Each iteration picks a root, computes net potentials from the leaves up,
takes one H^1 gradient step on every non-root potential and re-derives the
root potential as the sum of its children's net potentials, which keeps the
potential tuple exactly feasible for the discrete problem.  Step sizes come
from a backtracking Armijo search.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ChildNotReady, GridMismatch
from .graph import CostGraph, RootedTree, recover_duals, root_tree, run_order, unroll
from .grid import DensityField, as_values, l1_distance
from .poisson import inverse_neumann_laplacian
from .transforms import SPLAT_MODES, argmin_pushforward, c_transform, pushforward

logger = logging.getLogger(__name__)

HISTORY_FIELDS = ("iter", "root", "sigma", "objective", "residual", "backtracks", "wall_ms")


@dataclass(frozen=True)
class MmotProblem:
    graph: CostGraph
    marginals: tuple

    def __post_init__(self):
        margs = tuple(m if isinstance(m, DensityField) else DensityField(m) for m in self.marginals)
        if len(margs) != self.graph.n_nodes:
            raise ValueError(f"graph has {self.graph.n_nodes} nodes but {len(margs)} marginals were given")
        shapes = {m.shape for m in margs}
        if len(shapes) != 1:
            raise GridMismatch(f"marginals live on different grids: {sorted(shapes)}")
        object.__setattr__(self, "marginals", margs)

    @property
    def shape(self):
        return self.marginals[0].shape


@dataclass(frozen=True)
class SolverConfig:
    """Line-search and stopping parameters.

    ``sigma0=None`` means ``1 / max edge weight``.  ``root_mode`` is ``"cycle"``
    (root ``k mod n`` at iteration ``k``, over tree nodes) or ``"fixed"``.
    A line search that exhausts ``max_backtracks`` ends the solve once it has
    happened ``patience`` times in a row; ``None`` means once per tree node in
    cycle mode (every root has failed) and once in fixed mode.
    """

    sigma0: float | None = None
    armijo_slope: float = 0.1
    shrink: float = 0.5
    grow: float = 1.1
    max_iters: int = 500
    tol_objective: float = 1e-9
    tol_residual: float = 1e-4
    root_mode: str = "cycle"
    root: int = 0
    max_backtracks: int = 20
    patience: int | None = None
    splatting: str = "bilinear"
    update: str = "potential"

    def __post_init__(self):
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not 0 < self.armijo_slope < 1:
            raise ValueError("armijo_slope must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.grow > 1:
            raise ValueError("grow must exceed 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_iters < 0 or self.max_backtracks < 1:
            raise ValueError("max_iters must be >= 0 and max_backtracks >= 1")
        if self.root_mode not in ("cycle", "fixed"):
            raise ValueError(f"root_mode must be 'cycle' or 'fixed', got {self.root_mode!r}")
        if self.splatting not in SPLAT_MODES:
            raise ValueError(f"unknown splatting mode {self.splatting!r}")
        if self.update not in ("net", "potential"):
            raise ValueError(f"update must be 'net' or 'potential', got {self.update!r}")


@dataclass
class DualState:
    """Potentials for every tree node plus the bookkeeping of the ascent."""

    potentials: np.ndarray
    nets: np.ndarray
    net_ready: np.ndarray
    root: int = 0
    iteration: int = 0
    objective_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)

    @classmethod
    def zeros(cls, n_nodes: int, shape, root: int = 0) -> "DualState":
        return cls(
            potentials=np.zeros((n_nodes, *shape)),
            nets=np.zeros((n_nodes, *shape)),
            net_ready=np.zeros(n_nodes, dtype=bool),
            root=root,
        )

    def copy(self) -> "DualState":
        return replace(
            self,
            potentials=self.potentials.copy(),
            nets=self.nets.copy(),
            net_ready=self.net_ready.copy(),
            objective_history=list(self.objective_history),
            residual_history=list(self.residual_history),
        )


def net_potential(i: int, state: DualState, rt: RootedTree) -> np.ndarray:
    """``f'_i = (f_i - sum_{children j} f'_j)^c`` on the edge from ``i`` to its parent."""
    if i == rt.root:
        raise ValueError("the root has no outgoing edge and hence no net potential")
    kids = rt.children[i]
    for j in kids:
        if not state.net_ready[j]:
            raise ChildNotReady(f"net potential of child {j} is needed before node {i}")
    u = state.potentials[i]
    if kids:
        u = u - state.nets[list(kids)].sum(axis=0)
    return c_transform(u, rt.weight[i])


def _refresh_nets(state: DualState, rt: RootedTree, order) -> None:
    state.net_ready[:] = False
    for k in order[:-1]:
        state.nets[k] = net_potential(k, state, rt)
        state.net_ready[k] = True


def _set_root(state: DualState, rt: RootedTree) -> None:
    kids = list(rt.children[rt.root])
    state.potentials[rt.root] = state.nets[kids].sum(axis=0)
    state.root = rt.root


def tighten(state: DualState, rt: RootedTree) -> DualState:
    """Recompute all net potentials for ``rt`` and replace the root by their sum.

    The result is the c-conjugate completion of the non-root potentials, so it
    satisfies the dual constraint exactly and never lowers the objective.
    """
    _refresh_nets(state, rt, run_order(rt))
    _set_root(state, rt)
    return state


def dual_objective(state: DualState, mus) -> float:
    """``sum_i a * sum(f_i * mu_i)`` over all tree nodes, root included."""
    vals = np.stack([as_values(m) for m in mus])
    area = 1.0 / vals[0].size
    return float(area * np.einsum("ijk,ijk->", state.potentials, vals))


def net_coordinates(state: DualState, rt: RootedTree) -> dict:
    """``u_k = f_k - sum_children f'_k`` for every non-root node.

    The tightened dual is a function of these variables alone, and its exact
    gradient in them is ``a (mu_k - S#mu_parent)`` node by node.
    """
    work = state.copy()
    _refresh_nets(work, rt, run_order(rt))
    out = {}
    for k in rt.non_root():
        kids = list(rt.children[k])
        out[k] = work.potentials[k] - work.nets[kids].sum(axis=0) if kids else work.potentials[k].copy()
    return out


def state_from_net_coordinates(u: dict, rt: RootedTree, shape) -> DualState:
    """Inverse of :func:`net_coordinates`; the root is set from the children's nets."""
    state = DualState.zeros(rt.n_nodes, shape, rt.root)
    for k in run_order(rt)[:-1]:
        state.nets[k] = c_transform(u[k], rt.weight[k])
        kids = list(rt.children[k])
        state.potentials[k] = u[k] + state.nets[kids].sum(axis=0) if kids else np.array(u[k], dtype=float)
        state.net_ready[k] = True
    _set_root(state, rt)
    return state


def _pushed(state, rt, mus, k, mode):
    if mode == "argmin":
        kids = list(rt.children[k])
        u = state.potentials[k] - state.nets[kids].sum(axis=0) if kids else state.potentials[k]
        return argmin_pushforward(u, mus[rt.parent[k]], rt.weight[k])
    return pushforward(state.nets[k], mus[rt.parent[k]], rt.weight[k], mode=mode)


def ascent_direction(state: DualState, rt: RootedTree, mus, splatting: str = "bilinear"):
    """Gradients for every non-root node at the current point.

    Refreshes the net potentials on ``state`` as a side effect.  Returns
    ``(directions, residual_fields)`` keyed by node.
    """
    order = run_order(rt)
    _refresh_nets(state, rt, order)
    directions, residuals = {}, {}
    for k in order[:-1]:
        r = as_values(mus[k]) - _pushed(state, rt, mus, k, splatting)
        residuals[k] = r
        directions[k] = inverse_neumann_laplacian(r)
    return directions, residuals


def _apply(state, rt, directions, sigma, update="potential"):
    """Move every non-root node along its direction and re-tighten.

    ``update="net"`` shifts the net variable ``u_k = f_k - sum_children f'_j``
    (the children's net potentials are then recomputed, so ``f_k`` absorbs
    their change); ``"potential"`` shifts ``f_k`` itself.  Expects the nets on
    ``state`` to be current for ``rt``.
    """
    trial = state.copy()
    if update == "net":
        for k in directions:
            kids = list(rt.children[k])
            if kids:
                trial.potentials[k] -= state.nets[kids].sum(axis=0)
        for k, g in directions.items():
            trial.potentials[k] += sigma * g
        trial.net_ready[:] = False
        for k in run_order(rt)[:-1]:
            trial.nets[k] = c_transform(trial.potentials[k], rt.weight[k])
            kids = list(rt.children[k])
            if kids:
                trial.potentials[k] += trial.nets[kids].sum(axis=0)
            trial.net_ready[k] = True
        _set_root(trial, rt)
        return trial
    for k, g in directions.items():
        trial.potentials[k] += sigma * g
    return tighten(trial, rt)


def ascent_step(rt: RootedTree, state: DualState, mus, sigma: float, splatting: str = "bilinear",
                update: str = "potential") -> DualState:
    """One gradient-ascent sweep: ``f_k += sigma (-Lap)^{-1}(mu_k - S#mu_parent)`` for non-root ``k``.

    The net potentials driving the step are computed from the pre-step
    potentials in run order; the root is then reset from freshly recomputed
    net potentials so that the returned tuple is dual feasible.
    """
    if not sigma > 0:
        raise ValueError("step size must be positive")
    work = state.copy()
    directions, _ = ascent_direction(work, rt, mus, splatting)
    new = _apply(work, rt, directions, sigma, update)
    new.iteration = state.iteration + 1
    return new


def marginal_residual(state: DualState, mus, rt: RootedTree, splatting: str = "bilinear") -> float:
    """Largest L1 mismatch ``|mu_k - S#mu_parent|`` over non-root nodes."""
    work = state.copy()
    _refresh_nets(work, rt, run_order(rt))
    worst = 0.0
    for k in rt.non_root():
        worst = max(worst, l1_distance(mus[k], _pushed(work, rt, mus, k, splatting)))
    return worst


@dataclass
class SolveResult:
    tree_potentials: np.ndarray
    potentials: list
    objective: float
    history: list
    converged: bool
    status: str
    n_iter: int
    tree: CostGraph
    dup_map: np.ndarray
    root: int

    @property
    def objective_history(self) -> list:
        return [row["objective"] for row in self.history]

    def iterations_to(self, target: float, tol: float):
        """First iteration whose objective is within ``tol`` of ``target`` (None if never)."""
        for row in self.history:
            if abs(row["objective"] - target) <= tol:
                return row["iter"]
        return None


def _root_for(config: SolverConfig, it: int, n: int) -> int:
    if config.root_mode == "cycle":
        return it % n
    if not 0 <= config.root < n:
        raise ValueError(f"fixed root {config.root} outside the {n}-node tree")
    return config.root


def solve(problem: MmotProblem, config: SolverConfig | None = None, callback=None, initial=None) -> SolveResult:
    """Maximise the dual of a pairwise MMOT problem by rooted-tree gradient ascent.

    ``callback(row, state)`` is invoked after every iteration with the history
    row.  ``initial`` optionally holds starting potentials, one per tree node
    (e.g. ``tree_potentials`` of an earlier result); the default is zero.  Returns a :class:`SolveResult`; ``converged`` is false when the
    iteration budget ran out or the line search could not make progress.
    """
    config = config or SolverConfig()
    tree, dup_map = unroll(problem.graph)
    mus = [problem.marginals[d] for d in dup_map]
    n = tree.n_nodes
    max_w = max(c.weight for _, _, c in tree.edges) if tree.edges else 1.0
    sigma0 = config.sigma0 if config.sigma0 is not None else 1.0 / max_w
    sigma = sigma0
    rooted = {}

    def rooted_at(r):
        if r not in rooted:
            rooted[r] = root_tree(tree, r, dup_map)
        return rooted[r]

    root0 = _root_for(config, 0, n)
    state = DualState.zeros(n, problem.shape, root0)
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        if initial.shape != state.potentials.shape:
            raise ValueError(f"initial potentials must have shape {state.potentials.shape}, got {initial.shape}")
        state.potentials[:] = initial
    state = tighten(state, rooted_at(root0))
    best = dual_objective(state, mus)
    state.objective_history.append(best)
    history = [dict(iter=0, root=root0, sigma=sigma, objective=best, residual=float("nan"),
                    backtracks=0, wall_ms=0.0)]
    status, converged = "max_iters", False
    t_start = time.perf_counter()

    patience = config.patience or (n if config.root_mode == "cycle" else 1)
    it = 0
    failures = 0
    while True:
        r = _root_for(config, it, n)
        rt = rooted_at(r)
        tighten(state, rt)
        directions, residuals = ascent_direction(state, rt, mus, config.splatting)
        area = 1.0 / state.potentials[0].size
        residual = float(max((area * np.abs(res).sum() for res in residuals.values()), default=0.0))
        state.residual_history.append(residual)
        history[-1]["residual"] = residual
        if residual < config.tol_residual:
            status, converged = "residual", True
            break
        if it >= config.max_iters:
            break
        reference = max(dual_objective(state, mus), best)
        slope = area * sum(float(np.vdot(residuals[k], directions[k])) for k in directions)
        accepted = None
        sigma_start = sigma
        for b in range(config.max_backtracks):
            trial = _apply(state, rt, directions, sigma, config.update)
            value = dual_objective(trial, mus)
            if value - reference >= config.armijo_slope * sigma * slope:
                accepted = (trial, value, b)
                break
            sigma *= config.shrink
        it += 1
        if accepted is None:
            failures += 1
            logger.info("line search failed at iteration %d (sigma=%.3e)", it, sigma)
            history.append(dict(iter=it, root=r, sigma=sigma, objective=best, residual=float("nan"),
                                backtracks=config.max_backtracks,
                                wall_ms=1e3 * (time.perf_counter() - t_start)))
            if failures >= patience:
                status = "line_search_failed"
                break
            sigma = sigma_start
            continue
        failures = 0
        state, value, backtracks = accepted
        state.iteration = it
        previous, best = best, value
        state.objective_history.append(value)
        row = dict(iter=it, root=r, sigma=sigma, objective=value, residual=float("nan"),
                   backtracks=backtracks, wall_ms=1e3 * (time.perf_counter() - t_start))
        history.append(row)
        if callback is not None:
            callback(row, state)
        sigma *= config.grow
        if abs(value - previous) <= config.tol_objective * max(abs(value), 1e-300):
            status, converged = "stalled", True
            break

    tree_pots = state.potentials.copy()
    return SolveResult(
        tree_potentials=tree_pots,
        potentials=recover_duals(list(tree_pots), dup_map, problem.graph.n_nodes),
        objective=best,
        history=history,
        converged=converged,
        status=status,
        n_iter=it,
        tree=tree,
        dup_map=dup_map,
        root=state.root,
    )
