"""Hard-core Metropolis dynamics on grids and exact energy-landscape analysis."""
from .errors import ComputationError, ValidationError
from .graph import Graph
from .grid import (
    Boundary,
    BridgeReport,
    GridGraph,
    GridSpec,
    PathRecord,
    build_grid,
    chessboard,
    detect_bridges,
    energy,
    gamma_formula,
    reduction_path_open,
    reduction_path_toric,
    reference_path,
    row_wastage,
    stripe_wastage,
    wastage,
)
from .landscape import Cycle, CycleTree, EnergyLandscape, ExponentReport, Verdict
from .states import StateSpace, as_landscape, enumerate_states

__all__ = [
    "Boundary", "BridgeReport", "ComputationError", "Cycle", "CycleTree", "EnergyLandscape",
    "ExponentReport", "Graph", "GridGraph", "GridSpec", "PathRecord", "StateSpace",
    "ValidationError", "Verdict", "as_landscape", "build_grid", "chessboard", "detect_bridges",
    "energy", "enumerate_states", "gamma_formula", "reduction_path_open", "reduction_path_toric",
    "reference_path", "row_wastage", "stripe_wastage", "wastage",
]
