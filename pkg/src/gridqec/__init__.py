"""Grid-state qubit error correction simulator and analysis library."""

from .hilbert import (
    DensityMatrix,
    FiniteEnergyParams,
    FockSpace,
    GridCode,
    annihilation_op,
    characteristic_function,
    characteristic_function_grid,
    conditional_displacement_op,
    displacement_op,
    grid_state,
    marginal_distribution,
    partial_trace,
    vacuum_state,
    wigner,
)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "FiniteEnergyParams",
    "FockSpace",
    "GridCode",
    "annihilation_op",
    "characteristic_function",
    "characteristic_function_grid",
    "conditional_displacement_op",
    "displacement_op",
    "grid_state",
    "marginal_distribution",
    "partial_trace",
    "vacuum_state",
    "wigner",
    "__version__",
]
