"""Acceptance criteria, one test and one PASS/FAIL line per criterion."""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mmot.barycenter import BarycenterProblem, barycentric_grid, extract_barycenter, sharpness
from mmot.graph import CostGraph, unroll
from mmot.grid import DensityField, density_from_image, l1_distance
from mmot.oracle import DiscreteMeasure, certify_duals, lp_mmot
from mmot.poisson import inverse_neumann_laplacian, neumann_laplacian
from mmot.solver import MmotProblem, SolverConfig, solve
from mmot.suites import gradient_check, random_connected_graph
from mmot.synthetic import (bump, corner_shapes, line_density, line_points, shape_marginals,
                            translated_bumps, translated_cost)
from mmot.transforms import c_transform, double_c_transform

pytestmark = pytest.mark.slow

N = 256


def report(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def monotone(history):
    values = [row["objective"] for row in history]
    return all(b >= a for a, b in zip(values, values[1:]))


@pytest.fixture(scope="module")
def translation():
    return MmotProblem(CostGraph.chain(4), tuple(translated_bumps(N)))


@pytest.fixture(scope="module")
def translation_run(translation):
    start = time.perf_counter()
    res = solve(translation, SolverConfig(max_iters=120))
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def gluing_runs():
    out = {}
    for name, margs in [("translation", translated_bumps(N)), ("shapes", shape_marginals(N))]:
        reference = sum(solve(MmotProblem(CostGraph.chain(2), pair)).objective
                        for pair in zip(margs, margs[1:]))
        out[name] = (reference, solve(MmotProblem(CostGraph.chain(4), tuple(margs)), SolverConfig(max_iters=10)))
    return out


@pytest.fixture(scope="module")
def cycling_runs(translation):
    cyc = solve(translation, SolverConfig(max_iters=20))
    fixed = [solve(translation, SolverConfig(max_iters=101, root_mode="fixed", root=r)) for r in range(4)]
    return cyc, fixed


@pytest.fixture(scope="module")
def oracle_runs():
    rng = np.random.default_rng(0)
    x = line_points(8)
    out = []
    for m in (3, 4):
        for graph in (CostGraph.chain(m), CostGraph.cycle(m)):
            masses = [rng.dirichlet(np.ones(8)) for _ in range(m)]
            lp = lp_mmot([DiscreteMeasure(x, p) for p in masses], graph).value
            margs = [line_density(p) for p in masses]
            out.append((graph, margs, lp, solve(MmotProblem(graph, tuple(margs)))))
    return out


def blob(center):
    return DensityField.normalized(bump(N, center, 0.15))


@pytest.fixture(scope="module")
def barycenter_runs():
    cfg = SolverConfig(splatting="adaptive")
    mu = blob((0.5, 0.5))
    a, b = blob((0.3, 0.3)), blob((0.7, 0.5))
    same = solve(BarycenterProblem((mu, mu), (0.5, 0.5)).to_mmot(), cfg)
    moved = solve(BarycenterProblem((a, b), (0.5, 0.5)).to_mmot(), cfg)
    return (mu, same), ((a, b), moved)


def test_criterion_1_translation(translation_run):
    target = translated_cost()
    assert target == pytest.approx(0.12)
    res, seconds = translation_run
    it2, it4 = res.iterations_to(target, 1e-2), res.iterations_to(target, 1e-4)
    passed = it2 is not None and it2 <= 15 and it4 is not None and it4 <= 120 and seconds <= 60
    report(1, "translation test reaches 1e-2 in <= 15 and 1e-4 in <= 120 iterations within 60 s", passed,
           f"1e-2 at {it2}, 1e-4 at {it4}, final error {abs(res.objective - target):.1e}, {seconds:.1f} s")


def test_criterion_2_gluing(gluing_runs):
    details, passed = [], True
    for name, (reference, res) in gluing_runs.items():
        errors = [abs(row["objective"] - reference) / reference for row in res.history]
        passed &= any(e <= 1e-3 for e in errors)
        details.append(f"{name}: reference {reference:.5f}, error after 10 iterations {errors[-1]:.1e}")
    report(2, "chain objective within 1e-3 of summed two-marginal values in <= 10 iterations", passed,
           "; ".join(details))


def test_criterion_3_root_cycling(cycling_runs):
    target = translated_cost()
    cyc, fixed = cycling_runs
    cyc_it = cyc.iterations_to(target, 1e-2 * target)
    fixed_it = [res.iterations_to(target, 1e-2 * target) for res in fixed]
    passed = cyc_it is not None and cyc_it <= 20 and all(f is None for f in fixed_it)
    report(3, "cycling reaches relative error 1e-2 in <= 20 iterations, no fixed root within 100", passed,
           f"cycling at {cyc_it}, fixed roots {fixed_it}")


def test_criterion_4_oracle_equivalence(oracle_runs):
    worst_rel = worst_viol = 0.0
    for graph, margs, lp, res in oracle_runs:
        worst_rel = max(worst_rel, abs(res.objective - lp) / lp)
        worst_viol = max(worst_viol, certify_duals(res.potentials, margs, graph).max_violation)
    report(4, "solver objective within 1e-3 of the LP with dual violation <= 1e-8",
           worst_rel <= 1e-3 and worst_viol <= 1e-8,
           f"max relative gap {worst_rel:.1e}, max violation {worst_viol:.1e}")


def test_criterion_5_unroll():
    rng = np.random.default_rng(0)
    failures = 0
    for _ in range(100):
        m = int(rng.integers(2, 9))
        g = random_connected_graph(rng, m, p=float(rng.uniform(0.0, 0.8)))
        tree, dup = unroll(g)
        folded = sorted((min(dup[i], dup[j]), max(dup[i], dup[j]), c.weight) for i, j, c in tree.edges)
        original = sorted((min(i, j), max(i, j), c.weight) for i, j, c in g.edges)
        ok = tree.n_nodes - m == g.n_edges + 1 - m and tree.is_tree() and folded == original
        failures += not ok
    report(5, "unroll duplicates, acyclicity and edge multiset on 100 random graphs", failures == 0,
           f"{failures} failures")


def brute_force(f, w):
    nx, ny = f.shape
    X, Y = np.meshgrid((np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    cost = 0.5 * w * ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=-1)
    return (cost - f.ravel()[:, None]).min(axis=0).reshape(nx, ny)


def test_criterion_6_transform_exactness():
    rng = np.random.default_rng(0)
    exact = cc = ccc = 0.0
    for _ in range(200):
        shape = tuple(int(s) for s in rng.integers(2, 33, size=2))
        w = float(rng.uniform(0.25, 4.0))
        f = rng.standard_normal(shape) * rng.choice([1e-3, 0.1, 1.0])
        fc = c_transform(f, w)
        exact = max(exact, float(np.abs(fc - brute_force(f, w)).max()))
        fcc = double_c_transform(f, w)
        cc = max(cc, float((f - fcc).max()))
        ccc = max(ccc, float(np.abs(c_transform(fcc, w) - fc).max()))
    report(6, "c-transform equals brute force; f^cc >= f; (f^cc)^c = f^c",
           exact <= 1e-12 and cc <= 1e-12 and ccc <= 1e-12,
           f"errors {exact:.1e}, {cc:.1e}, {ccc:.1e} over 200 fields")


def test_criterion_7_gradient():
    errors = []
    for graph in (CostGraph.chain(3), CostGraph.cycle(3)):
        for root in (0, 1):
            errors += gradient_check(n=16, n_dirs=10, seed=root, graph=graph, root=root)
    report(7, "H^1 gradient matches central differences within 1e-4", max(errors) <= 1e-4,
           f"max relative error {max(errors):.1e} over {len(errors)} directions")


def test_criterion_8_poisson():
    rng = np.random.default_rng(0)
    eig = rt = 0.0
    for nx, ny in [(8, 8), (16, 16), (16, 12), (33, 7), (64, 64)]:
        x, y = (np.arange(nx) + 0.5) / nx, (np.arange(ny) + 0.5) / ny
        for p, q in [(1, 0), (0, 1), (2, 3), (nx - 1, ny - 1)]:
            mode = np.cos(np.pi * p * x)[:, None] * np.cos(np.pi * q * y)[None, :]
            lam = (2 - 2 * np.cos(np.pi * p / nx)) * nx**2 + (2 - 2 * np.cos(np.pi * q / ny)) * ny**2
            eig = max(eig, float(np.abs(inverse_neumann_laplacian(mode) - mode / lam).max()))
        rhs = rng.standard_normal((nx, ny))
        rhs -= rhs.mean()
        rt = max(rt, float(np.abs(neumann_laplacian(inverse_neumann_laplacian(rhs)) - rhs).max()))
    report(8, "Neumann eigenvectors and Laplacian roundtrip to 1e-10", eig <= 1e-10 and rt <= 1e-10,
           f"eigen error {eig:.1e}, roundtrip error {rt:.1e}")


def test_criterion_9_barycenter(barycenter_runs):
    (mu, same), ((a, b), moved) = barycenter_runs
    same_l1 = l1_distance(extract_barycenter(same.potentials[0], mu, 0.5, "adaptive"), mu)
    bary = [extract_barycenter(moved.potentials[i], m, 0.5, "adaptive") for i, m in enumerate((a, b))]
    to_mean = max(l1_distance(x, blob((0.5, 0.4))) for x in bary)
    nodes = l1_distance(*bary)

    corners = [density_from_image(c) for c in corner_shapes(128)]
    grid = barycentric_grid(corners, 3, SolverConfig(splatting="adaptive"))
    blunt = [(i, j) for i, row in enumerate(grid) for j, cell in enumerate(row)
             if not np.greater(*sharpness(cell))]
    passed = same_l1 <= 1e-3 and to_mean <= 5e-2 and nodes <= 5e-2 and not blunt
    report(9, "barycenter reproduction, translate, node agreement and sharp 3x3 atlas", passed,
           f"identical L1 {same_l1:.1e}, to mean translate {to_mean:.3f}, between nodes {nodes:.3f}, "
           f"atlas tiles failing sharpness {blunt}")


def test_criterion_10_monotonicity(translation_run, gluing_runs, cycling_runs, oracle_runs, barycenter_runs):
    runs = {"translation": translation_run[0], "cycling": cycling_runs[0],
            "barycenter identical": barycenter_runs[0][1], "barycenter translated": barycenter_runs[1][1]}
    runs.update({f"gluing {k}": v[1] for k, v in gluing_runs.items()})
    runs.update({f"fixed root {r}": res for r, res in enumerate(cycling_runs[1])})
    runs.update({f"oracle {k}": run[3] for k, run in enumerate(oracle_runs)})
    bad = [k for k, res in runs.items() if not monotone(res.history)]
    report(10, "objective non-decreasing over accepted steps of every gated run", not bad,
           f"{len(runs)} runs, non-monotone: {bad}")
