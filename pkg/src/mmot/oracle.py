"""Exact small-instance oracle: the multi-marginal transport LP and dual certificates.

The LP is solved with a dense two-phase revised simplex.  Every structural
column (one per tuple of support points) has exactly one unit entry per
marginal, which keeps pricing a vectorised gather.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import TooLarge
from .graph import CostGraph
from .grid import DensityField, Grid2D

MAX_TUPLES = 200_000
MAX_ROWS = 4_000


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure; ``points`` has shape ``(n, d)``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.size:
            raise ValueError("need one weight per support point")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.size

    @classmethod
    def from_density(cls, density) -> "DiscreteMeasure":
        """Cell centres of a grid density with their cell masses."""
        d = density if isinstance(density, DensityField) else DensityField(density)
        X, Y = Grid2D.from_shape(d.shape).centers()
        return cls(np.column_stack([X.ravel(), Y.ravel()]), d.cell_masses().ravel())


def _as_measure(m) -> DiscreteMeasure:
    if isinstance(m, DiscreteMeasure):
        return m
    return DiscreteMeasure.from_density(m)


def tuple_costs(marginals, graph: CostGraph) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographic tuples of support indices and their costs."""
    sizes = [m.size for m in marginals]
    idx = np.indices(sizes).reshape(len(sizes), -1).T
    points = np.stack([m.points[idx[:, i]] for i, m in enumerate(marginals)], axis=1)
    return idx, graph.total_cost(points)


@dataclass
class LpResult:
    value: float
    plan: np.ndarray
    duals: list
    iterations: int


class _Simplex:
    """Revised simplex for ``min c x  s.t.  A x = b, x >= 0`` with 0/1 tuple columns.

    Columns ``0..n-1`` are structural (``rows[j]`` lists their unit entries);
    columns ``n..n+r-1`` are the Phase I artificials.
    """

    refactor_every = 50
    tol = 1e-11

    def __init__(self, rows, b):
        self.rows = rows
        self.n = rows.shape[0]
        self.r = b.size
        self.b = b
        self.basis = np.arange(self.n, self.n + self.r)
        self.Binv = np.eye(self.r)
        self.x_B = b.copy()
        self.since_refactor = 0
        self.iterations = 0

    def column(self, j):
        a = np.zeros(self.r)
        if j < self.n:
            np.add.at(a, self.rows[j], 1.0)
        else:
            a[j - self.n] = 1.0
        return a

    def refactor(self):
        B = np.column_stack([self.column(j) for j in self.basis])
        self.Binv = np.linalg.inv(B)
        self.x_B = self.Binv @ self.b
        self.since_refactor = 0

    def reduced_costs(self, c_struct, c_basis):
        y = c_basis @ self.Binv
        return c_struct - y[self.rows].sum(axis=1), y

    def pivot(self, enter, leave_pos, d):
        piv = d[leave_pos]
        row = self.Binv[leave_pos] / piv
        self.Binv -= np.outer(d, row)
        self.Binv[leave_pos] = row
        theta = self.x_B[leave_pos] / piv
        self.x_B -= theta * d
        self.x_B[leave_pos] = theta
        self.basis[leave_pos] = enter
        self.since_refactor += 1
        self.iterations += 1
        if self.since_refactor >= self.refactor_every:
            self.refactor()

    def run(self, c_struct, c_art, max_iter):
        """Optimise over structural columns; artificial columns never re-enter."""
        degenerate = 0
        for _ in range(max_iter):
            c_basis = np.where(self.basis < self.n, c_struct[np.minimum(self.basis, self.n - 1)],
                               c_art[np.maximum(self.basis - self.n, 0)])
            rc, y = self.reduced_costs(c_struct, c_basis)
            scale = max(1.0, np.abs(c_struct).max(initial=0.0))
            candidates = np.flatnonzero(rc < -1e-12 * scale)
            if candidates.size == 0:
                return y
            enter = int(candidates[0]) if degenerate > 50 else int(candidates[np.argmin(rc[candidates])])
            d = self.Binv @ self.column(enter)
            pos = np.flatnonzero(d > self.tol)
            if pos.size == 0:
                raise RuntimeError("LP is unbounded, which a transport problem cannot be")
            ratios = np.maximum(self.x_B[pos], 0.0) / d[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-14]
            leave = int(ties[np.argmin(self.basis[ties])]) if degenerate > 50 else int(ties[0])
            degenerate = degenerate + 1 if best <= 1e-14 else 0
            self.pivot(enter, leave, d)
        raise RuntimeError(f"simplex did not terminate in {max_iter} pivots")

    def drive_out_artificials(self):
        for pos in range(self.r):
            if self.basis[pos] < self.n:
                continue
            # any structural column with a nonzero in this row of B^-1 A can replace it
            vals = self.Binv[pos][self.rows].sum(axis=1)
            nonbasic = np.ones(self.n, dtype=bool)
            nonbasic[self.basis[self.basis < self.n]] = False
            cand = np.flatnonzero(nonbasic & (np.abs(vals) > 1e-9))
            if cand.size:
                j = int(cand[0])
                self.pivot(j, pos, self.Binv @ self.column(j))
        self.refactor()


def lp_mmot(marginals, graph: CostGraph, max_tuples: int = MAX_TUPLES, max_iter: int = 100_000) -> LpResult:
    """Solve the discrete multi-marginal transport LP exactly.

    ``marginals`` are :class:`DiscreteMeasure` or grid densities; ``plan`` has
    shape ``(n_1, ..., n_m)``.  ``duals[i]`` are simplex multipliers for the
    marginal constraints, one value per support point; they are feasible for
    the dual with every tuple cost.
    """
    margs = [_as_measure(m) for m in marginals]
    if len(margs) != graph.n_nodes:
        raise ValueError(f"graph has {graph.n_nodes} nodes but {len(margs)} marginals were given")
    sizes = [m.size for m in margs]
    n_tuples = int(np.prod(sizes, dtype=np.int64))
    if n_tuples > max_tuples:
        raise TooLarge(f"{n_tuples} tuples exceed the oracle cap of {max_tuples}")
    if sum(sizes) > MAX_ROWS:
        raise TooLarge(f"{sum(sizes)} marginal constraints exceed the oracle cap of {MAX_ROWS}")
    idx, cost = tuple_costs(margs, graph)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    rows = idx + offsets[None, :]
    b = np.concatenate([m.weights for m in margs])

    lp = _Simplex(rows, b)
    lp.run(np.zeros(n_tuples), np.ones(lp.r), max_iter)
    infeasibility = lp.x_B[lp.basis >= lp.n].sum()
    if infeasibility > 1e-9:
        raise RuntimeError(f"phase one left infeasibility {infeasibility:.3e}")
    lp.drive_out_artificials()
    y = lp.run(cost, np.zeros(lp.r), max_iter)

    x = np.zeros(n_tuples)
    structural = lp.basis < lp.n
    x[lp.basis[structural]] = np.maximum(lp.x_B[structural], 0.0)
    duals = [y[o:o + s].copy() for o, s in zip(offsets, sizes)]
    return LpResult(value=float(cost @ x), plan=x.reshape(sizes), duals=duals, iterations=lp.iterations)


def plan_residual(plan, marginals) -> float:
    """Largest absolute violation of the marginal constraints."""
    plan = np.asarray(plan)
    worst = 0.0
    for i, m in enumerate(marginals):
        axes = tuple(a for a in range(plan.ndim) if a != i)
        worst = max(worst, float(np.abs(plan.sum(axis=axes) - _as_measure(m).weights).max()))
    return worst


@dataclass
class DualCertificate:
    max_violation: float
    dual_value: float
    n_checked: int

    def gap_to(self, value: float) -> float:
        """``value - dual_value``; nonnegative for any feasible dual."""
        return float(value - self.dual_value)


def certify_duals(potentials, marginals, graph: CostGraph, samples: int | None = None, seed=0) -> DualCertificate:
    """Check ``sum_i f_i(x_i) <= c(x)`` and evaluate ``sum_i <f_i, mu_i>``.

    All tuples are enumerated when there are at most ``MAX_TUPLES`` of them
    and ``samples`` is None; otherwise ``samples`` tuples (default 10^4) are
    drawn uniformly over the supports.
    """
    margs = [_as_measure(m) for m in marginals]
    pots = [np.asarray(f, dtype=float).ravel() for f in potentials]
    if len(pots) != len(margs) or any(p.size != m.size for p, m in zip(pots, margs)):
        raise ValueError("need one potential value per support point of every marginal")
    dual_value = float(sum(p @ m.weights for p, m in zip(pots, margs)))
    sizes = [m.size for m in margs]
    n_tuples = int(np.prod(sizes, dtype=np.float64))
    if samples is None and n_tuples <= MAX_TUPLES:
        idx, cost = tuple_costs(margs, graph)
    else:
        rng = np.random.default_rng(seed)
        idx = np.column_stack([rng.integers(0, s, size=samples or 10_000) for s in sizes])
        points = np.stack([m.points[idx[:, i]] for i, m in enumerate(margs)], axis=1)
        cost = graph.total_cost(points)
    total = sum(p[idx[:, i]] for i, p in enumerate(pots))
    return DualCertificate(float((total - cost).max()), dual_value, idx.shape[0])


def w2_squared_1d(x, p, y, q) -> float:
    """``W_2^2`` between two discrete measures on the line via the monotone coupling."""
    x, p, y, q = (np.asarray(a, dtype=float).ravel() for a in (x, p, y, q))
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, p, y, q = x[ox], p[ox], y[oy], q[oy]
    cp, cq = np.cumsum(p), np.cumsum(q)
    levels = np.unique(np.concatenate([[0.0], cp, cq]))
    levels = levels[levels <= min(cp[-1], cq[-1])]
    mid = 0.5 * (levels[1:] + levels[:-1])
    ix = np.minimum(np.searchsorted(cp, mid), x.size - 1)
    iy = np.minimum(np.searchsorted(cq, mid), y.size - 1)
    return float(np.sum(np.diff(levels) * (x[ix] - y[iy]) ** 2))

