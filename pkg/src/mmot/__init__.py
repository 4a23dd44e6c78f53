"""Multi-marginal optimal transport with pairwise quadratic costs on 2D grids."""
from .barycenter import BarycenterProblem, barycenter, barycentric_grid, extract_barycenter, gs_cost_graph
from .estimators import MultiMarginalOT, WassersteinBarycenter
from .exceptions import (AllZeroInput, BadWeights, ChildNotReady, ConfigError, DisconnectedGraph,
                         GridMismatch, InvalidRoot, LineSearchFailed, MMOTError, NonpositiveWeight,
                         NotATree, TooLarge)
from .graph import CostGraph, PairwiseCost, parse_graph_spec, recover_duals, root_tree, run_order, unroll
from .grid import DensityField, Grid2D, density_from_image, integrate_against, l1_distance
from .oracle import DiscreteMeasure, certify_duals, lp_mmot
from .poisson import inverse_neumann_laplacian, neumann_laplacian
from .solver import MmotProblem, SolverConfig, SolveResult, solve
from .transforms import c_transform, double_c_transform, legendre_transform, pushforward

__version__ = "0.1.0"
