"""Command line front end: ``mmot solve | barycenter | atlas | validate``.

Exit codes: 0 success (converged), 1 bad arguments or config, 2 file I/O,
3 solver stopped without converging, 4 a validation check failed.

A solve config is an INI file::

    [graph]
    marginal 1 = a.pgm        # paths relative to the config file
    marginal 2 = b.png
    edge 1 2 = 1.0            # weight w of (w/2)|x_1 - x_2|^2
    # chain = 1.0             # instead of edges: unit chain through all marginals
    floor = 1e-6              # density floor, fraction of each image's max

    [solver]
    max_iters = 500           # any SolverConfig field; root is 1-based

    [output]
    dir = out                 # relative to the config file
    history = history.csv
    potentials = potential_{i}.raw
    timing = no               # yes fills the wall_ms column
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import os
import sys

import numpy as np

from .barycenter import barycenter, barycentric_grid
from .exceptions import AllZeroInput, BadWeights, ConfigError, GridMismatch, MMOTError
from .graph import CostGraph, parse_graph_spec
from .grid import DEFAULT_FLOOR, density_from_image
from .io import read_image, write_image, write_raw
from .solver import HISTORY_FIELDS, MmotProblem, SolverConfig, solve
from .transforms import SPLAT_MODES

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PARSE, EXIT_IO, EXIT_NOT_CONVERGED, EXIT_VALIDATION = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for I/O here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _coerce(field: dataclasses.Field, text: str):
    text = text.strip()
    if field.name == "sigma0" and text.lower() in ("", "none", "auto"):
        return None
    if field.name == "patience" and text.lower() in ("", "none", "auto"):
        return None
    if field.name in ("max_iters", "max_backtracks", "patience"):
        return int(text)
    if field.name == "root":
        value = int(text)
        if value < 1:
            raise ValueError("root is 1-based")
        return value - 1
    if field.name in ("root_mode", "splatting", "update"):
        return text
    return float(text)


def solver_config(section, overrides=None) -> SolverConfig:
    """Build a :class:`SolverConfig` from ``key = value`` pairs plus command line overrides."""
    fields = {f.name: f for f in dataclasses.fields(SolverConfig)}
    kwargs = {}
    for key, text in (section or {}).items():
        if key not in fields:
            raise ConfigError(f"unknown solver option {key!r}")
        try:
            kwargs[key] = _coerce(fields[key], text)
        except ValueError as exc:
            raise ConfigError(f"solver option {key}: {exc}") from exc
    kwargs.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "max_iters", None) is not None:
        out["max_iters"] = args.max_iters
    if getattr(args, "tol", None) is not None:
        out["tol_residual"] = args.tol
    if getattr(args, "root", None) is not None:
        if args.root < 1:
            raise ConfigError("--root is 1-based")
        out["root_mode"], out["root"] = "fixed", args.root - 1
    if getattr(args, "cycle", False):
        out["root_mode"] = "cycle"
    return out


def read_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parser


def graph_from_section(section, base_dir):
    """``(graph, marginal paths, floor)`` from a ``[graph]`` section."""
    lines, chain = [], None
    floor = DEFAULT_FLOOR
    for key, value in section.items():
        if key == "chain":
            chain = value
        elif key == "floor":
            floor = value
        else:
            lines.append(f"{key} {value}")
    graph, paths = parse_graph_spec("\n".join(lines))
    try:
        floor = float(floor)
        if chain is not None:
            if graph.edges:
                raise ConfigError("give either chain or edges, not both")
            graph = CostGraph.chain(graph.n_nodes, float(chain))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not graph.edges:
        raise ConfigError("graph has no edges")
    return graph, [os.path.join(base_dir, p) for p in paths], floor


def load_densities(paths, floor=DEFAULT_FLOOR):
    out = []
    for p in paths:
        try:
            pixels = read_image(p)
        except FileNotFoundError as exc:
            raise FileNotFoundError(f"no such image: {p}") from exc
        except (OSError, ValueError) as exc:
            raise OSError(f"cannot read image {p}: {exc}") from exc
        out.append(density_from_image(pixels, floor=floor))
    return out


def write_history(path, history, timing=False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            values = []
            for key in HISTORY_FIELDS:
                v = row[key]
                if key == "wall_ms" and not timing:
                    values.append("")
                elif isinstance(v, (float, np.floating)):
                    values.append(repr(float(v)))
                else:
                    values.append(v)
            writer.writerow(values)


def cmd_solve(args) -> int:
    config_path = args.config
    cfg = read_config(config_path)
    base = os.path.dirname(os.path.abspath(config_path))
    if "graph" not in cfg:
        raise ConfigError("config has no [graph] section")
    graph, paths, floor = graph_from_section(cfg["graph"], base)
    config = solver_config(cfg["solver"] if "solver" in cfg else None, _overrides(args))
    out = cfg["output"] if "output" in cfg else {}
    out_dir = args.output or os.path.join(base, out.get("dir", "."))
    margs = load_densities(paths, floor)
    result = solve(MmotProblem(graph, tuple(margs)), config)

    os.makedirs(out_dir, exist_ok=True)
    timing = str(out.get("timing", "no")).lower() in ("1", "yes", "true", "on")
    write_history(os.path.join(out_dir, out.get("history", "history.csv")), result.history, timing)
    pattern = out.get("potentials", "potential_{i}.raw")
    for i, f in enumerate(result.potentials, 1):
        write_raw(os.path.join(out_dir, pattern.format(i=i)), f)
    print(f"objective {result.objective!r}")
    print(f"status {result.status} after {result.n_iter} iterations", file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _parse_weights(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse weights {text!r}") from exc


def _config_for(args):
    # image outputs default to adaptive splatting, which avoids holes where maps expand
    section = {"splatting": "adaptive"}
    if args.config:
        cfg = read_config(args.config)
        if "solver" in cfg:
            section.update(cfg["solver"])
    overrides = _overrides(args)
    overrides["splatting"] = args.splatting
    return solver_config(section, overrides)


def cmd_barycenter(args) -> int:
    lam = _parse_weights(args.weights)
    if lam.size != len(args.images):
        raise BadWeights(f"{lam.size} weights for {len(args.images)} images")
    config = _config_for(args)
    margs = load_densities(args.images, args.floor)
    bary = barycenter(margs, lam, config, node=args.node - 1)
    write_image(args.output, bary.values)
    return EXIT_OK


def cmd_atlas(args) -> int:
    if len(args.images) != 4:
        raise ConfigError("atlas needs exactly four corner images")
    config = _config_for(args)
    corners = load_densities(args.images, args.floor)
    grid = barycentric_grid(corners, args.steps, config, jobs=args.jobs)
    os.makedirs(args.output, exist_ok=True)
    ext = args.format
    s = args.steps
    with open(os.path.join(args.output, "index.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "col", "u", "v", "w1", "w2", "w3", "w4", "file"])
        for i, row in enumerate(grid):
            for j, cell in enumerate(row):
                name = f"tile_{i}_{j}.{ext}"
                write_image(os.path.join(args.output, name), cell.values)
                u, v = i / (s - 1), j / (s - 1)
                w = [(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v]
                writer.writerow([i, j, repr(u), repr(v), *map(repr, w), name])
    return EXIT_OK


def cmd_validate(args) -> int:
    from .suites import QUICK, SUITES, run_suite

    if args.suite not in SUITES and args.suite not in ("quick", "all"):
        names = ", ".join([*SUITES, "quick", "all"])
        print(f"unknown suite {args.suite!r}; choose from {names}", file=sys.stderr)
        return EXIT_PARSE
    checks = run_suite(args.suite, seed=args.seed, size=args.size)
    print("TAP version 13")
    for k, c in enumerate(checks, 1):
        status = "ok" if c.passed else "not ok"
        line = f"{status} {k} - {c.name}"
        print(f"{line} # {c.detail}" if c.detail else line)
    print(f"1..{len(checks)}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def _solver_flags(p):
    p.add_argument("--config", help="INI file whose [solver] section sets solver options")
    p.add_argument("--root", type=int, help="fixed root node (1-based tree node)")
    p.add_argument("--cycle", action="store_true", help="cycle the root through all tree nodes")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float, help="marginal L1 residual tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmot", description="Multi-marginal optimal transport on 2D grids.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the problem described by a config file")
    p.add_argument("config_file", nargs="?", help="same as --config")
    _solver_flags(p)
    p.add_argument("-o", "--output", help="output directory (overrides [output] dir)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("barycenter", help="weighted barycenter of images")
    p.add_argument("images", nargs="+")
    p.add_argument("--weights", required=True, help="comma separated, summing to 1")
    p.add_argument("--node", type=int, default=1, help="marginal to extract from (1-based)")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    _solver_flags(p)
    p.add_argument("--splatting", choices=SPLAT_MODES, help="default adaptive")
    p.add_argument("-o", "--output", required=True, help="output image (.pgm or .png)")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("atlas", help="grid of barycenters between four corner images")
    p.add_argument("images", nargs=4)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--format", choices=("pgm", "png"), default="pgm")
    _solver_flags(p)
    p.add_argument("--splatting", choices=SPLAT_MODES, help="default adaptive")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("validate", help="run a self-check suite, TAP output")
    p.add_argument("suite", help="suite name, 'quick' or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, help="grid size for the solver suites")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve":
        args.config = args.config or args.config_file
        if not args.config:
            parser.error("solve needs a config file")
    try:
        return args.func(args)
    except (ConfigError, BadWeights) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GridMismatch, AllZeroInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MMOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
