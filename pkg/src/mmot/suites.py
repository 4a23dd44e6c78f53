"""Self-check suites behind ``mmot validate``.

Every suite returns a list of :class:`Check`.  The fast suites (``unroll``,
``transforms``, ``poisson``, ``oracle``, ``gradient``) run in seconds; the
solver suites default to 256 x 256 grids and take minutes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .barycenter import BarycenterProblem, barycentric_grid, extract_barycenter, sharpness
from .graph import CostGraph, PairwiseCost, root_tree, unroll
from .grid import DensityField, density_from_image, l1_distance
from .oracle import DiscreteMeasure, certify_duals, lp_mmot, plan_residual, w2_squared_1d
from .poisson import inverse_neumann_laplacian, neumann_laplacian
from .solver import (MmotProblem, SolverConfig, ascent_direction, dual_objective, solve,
                     state_from_net_coordinates)
from .synthetic import (bump, corner_shapes, line_density, line_points, random_density, shape_marginals,
                        smooth_noise, translated_bumps, translated_cost)
from .transforms import c_transform, double_c_transform


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def random_connected_graph(rng, m: int, p: float = 0.4) -> CostGraph:
    """Random spanning tree plus each remaining pair with probability ``p``; weights in [0.5, 2]."""
    order = rng.permutation(m)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, m)}
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < p:
                pairs.add((i, j))
    edges = tuple((i, j, PairwiseCost(float(rng.uniform(0.5, 2.0)))) for i, j in sorted(pairs))
    return CostGraph(m, edges)


def brute_c_transform(f, w: float = 1.0) -> np.ndarray:
    """``min_x (w/2)|x - y|^2 - f(x)`` by enumerating every pair of cells."""
    f = np.asarray(f, dtype=float)
    nx, ny = f.shape
    x, y = (np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny
    dx = (x[:, None] - x[None, :]) ** 2
    dy = (y[:, None] - y[None, :]) ** 2
    # axes: source i, source j, target k, target l
    cost = 0.5 * w * (dx[:, None, :, None] + dy[None, :, None, :])
    return (cost - f[:, :, None, None]).min(axis=(0, 1))


def _edge_multiset(graph):
    return sorted((min(i, j), max(i, j), c.weight) for i, j, c in graph.edges)


def suite_unroll(seed=0, size=None, count=100):
    rng = np.random.default_rng(seed)
    bad = []
    for t in range(count):
        m = int(rng.integers(2, 9))
        g = random_connected_graph(rng, m, p=float(rng.uniform(0.0, 0.8)))
        tree, dup = unroll(g)
        folded = sorted((min(dup[i], dup[j]), max(dup[i], dup[j]), c.weight) for i, j, c in tree.edges)
        ok = (tree.n_nodes - m == len(g.edges) + 1 - m and tree.is_tree()
              and folded == _edge_multiset(g) and np.array_equal(dup[:m], np.arange(m)))
        if not ok:
            bad.append(t)
    return [Check(f"unroll on {count} random connected graphs", not bad, f"failures at {bad}" if bad else "")]


def suite_transforms(seed=0, size=None, count=200):
    rng = np.random.default_rng(seed)
    worst_exact = worst_cc = worst_ccc = 0.0
    for _ in range(count):
        shape = tuple(int(s) for s in rng.integers(2, 33, size=2))
        w = float(rng.uniform(0.25, 4.0))
        f = rng.standard_normal(shape) * rng.choice([1e-3, 0.1, 1.0])
        fc = c_transform(f, w)
        worst_exact = max(worst_exact, float(np.abs(fc - brute_c_transform(f, w)).max()))
        fcc = double_c_transform(f, w)
        worst_cc = max(worst_cc, float((f - fcc).max()))
        worst_ccc = max(worst_ccc, float(np.abs(c_transform(fcc, w) - fc).max()))
    return [
        Check("c-transform equals brute force", worst_exact <= 1e-12, f"max error {worst_exact:.2e}"),
        Check("f^cc >= f", worst_cc <= 1e-12, f"max violation {worst_cc:.2e}"),
        Check("(f^cc)^c = f^c", worst_ccc <= 1e-12, f"max error {worst_ccc:.2e}"),
    ]


def suite_poisson(seed=0, size=None):
    rng = np.random.default_rng(seed)
    worst_eig = worst_round = 0.0
    for nx, ny in [(8, 8), (16, 12), (33, 7), (64, 64)]:
        x, y = (np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny
        for p, q in [(1, 0), (0, 1), (2, 3), (nx - 1, ny - 1)]:
            mode = np.cos(np.pi * p * x)[:, None] * np.cos(np.pi * q * y)[None, :]
            lam = (2 - 2 * np.cos(np.pi * p / nx)) * nx**2 + (2 - 2 * np.cos(np.pi * q / ny)) * ny**2
            worst_eig = max(worst_eig, float(np.abs(inverse_neumann_laplacian(mode) - mode / lam).max()))
        u = rng.standard_normal((nx, ny))
        u -= u.mean()
        back = inverse_neumann_laplacian(neumann_laplacian(u))
        worst_round = max(worst_round, float(np.abs(back - u).max() / np.abs(u).max()))
    return [
        Check("cosine modes are eigenvectors", worst_eig <= 1e-10, f"max error {worst_eig:.2e}"),
        Check("Laplacian roundtrip", worst_round <= 1e-10, f"max relative error {worst_round:.2e}"),
    ]


def random_line_instance(rng, m: int, n_points: int = 8, graph: str = "chain"):
    """1D masses on ``n_points`` cell centres and a chain or cycle with unit weights."""
    masses = [rng.dirichlet(np.ones(n_points)) for _ in range(m)]
    g = CostGraph.chain(m) if graph == "chain" else CostGraph.cycle(m)
    return masses, g


def suite_oracle(seed=0, size=None):
    """The exact LP against the quantile coupling and its own optimality conditions."""
    rng = np.random.default_rng(seed)
    x = line_points(8)
    checks = []
    worst_w2 = 0.0
    for _ in range(10):
        p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        res = lp_mmot([DiscreteMeasure(x, p), DiscreteMeasure(x, q)], CostGraph.chain(2))
        worst_w2 = max(worst_w2, abs(res.value - 0.5 * w2_squared_1d(x, p, x, q)))
    checks.append(Check("two-marginal LP equals half the quantile W2^2", worst_w2 <= 1e-12,
                        f"max error {worst_w2:.2e}"))
    worst_res = worst_viol = worst_gap = 0.0
    for m in (3, 4):
        for kind in ("chain", "cycle"):
            masses, g = random_line_instance(rng, m, graph=kind)
            margs = [DiscreteMeasure(x, p) for p in masses]
            res = lp_mmot(margs, g)
            cert = certify_duals(res.duals, margs, g)
            worst_res = max(worst_res, plan_residual(res.plan, margs), -float(res.plan.min()))
            worst_viol = max(worst_viol, cert.max_violation)
            worst_gap = max(worst_gap, abs(cert.gap_to(res.value)))
    checks += [
        Check("LP plans are feasible", worst_res <= 1e-12, f"max violation {worst_res:.2e}"),
        Check("LP duals are feasible", worst_viol <= 1e-12, f"max violation {worst_viol:.2e}"),
        Check("LP primal and dual values agree", worst_gap <= 1e-12, f"max gap {worst_gap:.2e}"),
    ]
    return checks


def suite_equivalence(seed=0, size=None, config=None):
    """Grid solver against the LP on 1D instances embedded as 8 x 2 grids."""
    rng = np.random.default_rng(seed)
    x = line_points(8)
    checks = []
    for m in (3, 4):
        for kind in ("chain", "cycle"):
            masses, g = random_line_instance(rng, m, graph=kind)
            lp = lp_mmot([DiscreteMeasure(x, p) for p in masses], g)
            margs = [line_density(p) for p in masses]
            res = solve(MmotProblem(g, tuple(margs)), config)
            rel = abs(res.objective - lp.value) / lp.value
            cert = certify_duals(res.potentials, margs, g)
            checks.append(Check(f"{m} marginals, {kind}: objective within 1e-3 of LP", rel <= 1e-3,
                                f"solver {res.objective:.6g} LP {lp.value:.6g} rel {rel:.2e}"))
            checks.append(Check(f"{m} marginals, {kind}: duals feasible", cert.max_violation <= 1e-8,
                                f"max violation {cert.max_violation:.2e}"))
            checks.append(Check(f"{m} marginals, {kind}: objective below LP", res.objective <= lp.value + 1e-6,
                                f"excess {res.objective - lp.value:.2e}"))
    return checks


def gradient_check(n: int = 16, n_dirs: int = 10, eps: float = 1e-6, seed=0, graph=None, root: int = 0):
    """Relative errors between central differences of the dual and the H^1 gradient.

    The dual is taken as a function of the net variables ``u_k`` of the
    non-root nodes (see :func:`state_from_net_coordinates`), where the exact
    discrete gradient uses the c-transform minimiser as transport map.
    """
    rng = np.random.default_rng(seed)
    graph = graph or CostGraph.chain(3)
    tree, dup = unroll(graph)
    margs = [random_density((n, n), rng) for _ in range(graph.n_nodes)]
    mus = [margs[d] for d in dup]
    rt = root_tree(tree, root, dup)
    u = {k: 0.05 * smooth_noise((n, n), rng) for k in rt.non_root()}

    def objective(v):
        return dual_objective(state_from_net_coordinates(v, rt, (n, n)), mus)

    state = state_from_net_coordinates(u, rt, (n, n))
    grads, _ = ascent_direction(state, rt, mus, "argmin")
    area = 1.0 / (n * n)
    errors = []
    for _ in range(n_dirs):
        xi = {k: smooth_noise((n, n), rng) for k in u}
        plus = objective({k: u[k] + eps * xi[k] for k in u})
        minus = objective({k: u[k] - eps * xi[k] for k in u})
        fd = (plus - minus) / (2 * eps)
        # <g, xi>_{H^1} = a * sum(grad g . grad xi) = a * <g, -Lap xi>
        h1 = area * sum(float(np.vdot(grads[k], neumann_laplacian(xi[k]))) for k in u)
        errors.append(abs(fd - h1) / max(abs(fd), abs(h1), 1e-300))
    return errors


def suite_gradient(seed=0, size=None):
    checks = []
    for name, graph in [("chain", CostGraph.chain(3)), ("triangle", CostGraph.cycle(3))]:
        for root in (0, 1):
            errs = gradient_check(n=size or 16, seed=seed, graph=graph, root=root)
            checks.append(Check(f"H^1 gradient vs finite differences, {name}, root {root + 1}",
                                max(errs) <= 1e-4, f"max relative error {max(errs):.2e}"))
    return checks


def _monotone(result) -> bool:
    values = result.objective_history
    return all(b >= a for a, b in zip(values, values[1:]))


def suite_table1(seed=0, size=None):
    n = size or 256
    target = translated_cost()
    problem = MmotProblem(CostGraph.chain(4), tuple(translated_bumps(n)))
    res = solve(problem, SolverConfig(max_iters=120))
    it2, it4 = res.iterations_to(target, 1e-2), res.iterations_to(target, 1e-4)
    err = abs(res.objective - target)
    return [
        Check("error 1e-2 within 15 iterations", it2 is not None and it2 <= 15, f"iterations {it2}"),
        Check("error 1e-4 within 120 iterations", it4 is not None and it4 <= 120,
              f"iterations {it4}, final error {err:.2e}"),
        Check("objective monotone", _monotone(res), f"{len(res.objective_history)} accepted values"),
    ]


def gluing_errors(marginals, iterations: int = 10, config=None):
    """Relative error of the chain objective per iteration against summed two-marginal solves."""
    reference = sum(
        solve(MmotProblem(CostGraph.chain(2), (a, b)), config).objective
        for a, b in zip(marginals, marginals[1:])
    )
    res = solve(MmotProblem(CostGraph.chain(len(marginals)), tuple(marginals)),
                replace(config or SolverConfig(), max_iters=iterations))
    return [abs(row["objective"] - reference) / reference for row in res.history], reference


def suite_table2(seed=0, size=None):
    n = size or 256
    checks = []
    for name, margs in [("translated blobs", translated_bumps(n)), ("shape deformation", shape_marginals(n))]:
        errors, ref = gluing_errors(margs)
        first = next((i for i, e in enumerate(errors) if e <= 1e-3), None)
        checks.append(Check(f"gluing identity to 1e-3 within 10 iterations, {name}", first is not None,
                            f"reference {ref:.6g}, error after 10 iterations {errors[-1]:.2e}"))
    return checks


def suite_cycling(seed=0, size=None):
    n = size or 256
    target = translated_cost()
    problem = MmotProblem(CostGraph.chain(4), tuple(translated_bumps(n)))
    cyc = solve(problem, SolverConfig(max_iters=20)).iterations_to(target, 1e-2 * target)
    fixed = [solve(problem, SolverConfig(max_iters=100, root_mode="fixed", root=r)).iterations_to(target, 1e-2 * target)
             for r in range(4)]
    best = min((f for f in fixed if f is not None), default=None)
    return [Check("cycling reaches 1e-2 in 20 iterations, every fixed root needs more than 100",
                  cyc is not None and cyc <= 20 and best is None, f"cycle {cyc}, fixed {fixed}")]


def suite_barycenter(seed=0, size=None):
    n = size or 256
    blob = DensityField.normalized(bump(n, (0.5, 0.5), 0.15))
    same = BarycenterProblem((blob, blob), (0.5, 0.5))
    res = solve(same.to_mmot())
    l1_same = l1_distance(extract_barycenter(res.potentials[0], blob, 0.5), blob)
    a = DensityField.normalized(bump(n, (0.3, 0.3), 0.15))
    b = DensityField.normalized(bump(n, (0.7, 0.5), 0.15))
    expect = DensityField.normalized(bump(n, (0.5, 0.4), 0.15))
    res = solve(BarycenterProblem((a, b), (0.5, 0.5)).to_mmot())
    bary = [extract_barycenter(res.potentials[i], m, 0.5) for i, m in enumerate((a, b))]
    return [
        Check("identical marginals reproduce themselves", l1_same <= 1e-3, f"L1 {l1_same:.2e}"),
        Check("translated blobs meet at the mean translate", max(l1_distance(x, expect) for x in bary) <= 5e-2,
              f"L1 {[round(l1_distance(x, expect), 4) for x in bary]}"),
        Check("extraction from two nodes agrees", l1_distance(*bary) <= 5e-2, f"L1 {l1_distance(*bary):.2e}"),
    ]


def suite_atlas(seed=0, size=None, jobs: int = 1):
    n = size or 128
    corners = [density_from_image(c) for c in corner_shapes(n)]
    grid = barycentric_grid(corners, 3, SolverConfig(splatting="adaptive"), jobs=jobs)
    checks = []
    for i, row in enumerate(grid):
        for j, cell in enumerate(row):
            own, blurred = sharpness(cell)
            checks.append(Check(f"atlas cell ({i}, {j}) sharper than its blur", own > blurred,
                                f"{own:.4f} vs {blurred:.4f}"))
    return checks


SUITES = {
    "unroll": suite_unroll,
    "transforms": suite_transforms,
    "poisson": suite_poisson,
    "oracle": suite_oracle,
    "gradient": suite_gradient,
    "equivalence": suite_equivalence,
    "table1": suite_table1,
    "table2": suite_table2,
    "cycling": suite_cycling,
    "barycenter": suite_barycenter,
    "atlas": suite_atlas,
}
QUICK = ("unroll", "transforms", "poisson", "oracle", "gradient")


def run_suite(name: str, seed=0, size=None) -> list[Check]:
    """Run one suite, ``"quick"`` (the fast ones) or ``"all"``."""
    if name == "quick":
        names = QUICK
    elif name == "all":
        names = tuple(SUITES)
    elif name in SUITES:
        names = (name,)
    else:
        raise KeyError(name)
    checks = []
    for s in names:
        for c in SUITES[s](seed=seed, size=size):
            c.name = f"{s}: {c.name}"
            checks.append(c)
    return checks
