"""Numerical experiments on the linear instability of shear flows in the Prandtl equation."""
from .errors import PrandtlLabError
from .shear_flow import ShearFlow, ShearFlowParams, build_shear_flow, energy_constant
from .shear_layer import ShearLayerProfile, assemble_B, solve_tau
from .dispersion import find_unstable_eigenvalue, solve_omega_bvp
from .quasimode import Quasimode, assemble_quasimode
from .ivp_evolution import run_ivp, measure_growth_rate
from .bvp_march import march_bvp, apply_L, invert_L
from .experiments import ExperimentConfig, run_experiment, compare_goldens

__all__ = [
    "PrandtlLabError", "ShearFlow", "ShearFlowParams", "build_shear_flow", "energy_constant",
    "ShearLayerProfile", "assemble_B", "solve_tau", "find_unstable_eigenvalue",
    "solve_omega_bvp", "Quasimode", "assemble_quasimode", "run_ivp", "measure_growth_rate",
    "march_bvp", "apply_L", "invert_L", "ExperimentConfig", "run_experiment", "compare_goldens",
]
