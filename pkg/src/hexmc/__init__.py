"""Expected spectral statistics of honeycomb tight-binding models with
random vacancies: Monte Carlo, multilevel Monte Carlo with supercell
control variates, and exhaustive enumeration."""

from .disorder import DefectConfiguration, DedupCache, SeedSpec, enumerate_configs, restrict, sample_defects
from .lattice import LatticeSpec, PartitionMap, Supercell, build_supercell, honeycomb, partition_quarters
from .mlmc import (
    ComplexityExponents,
    LevelPlan,
    MlmcEstimate,
    RateEstimates,
    complexity_exponents,
    control_variate_sample,
    fit_rates,
    optimal_samples,
    slmc_comparison,
    splitting_theta,
)
from .qoi import EnergyGrid, IdosCurve, SmoothingSpec, dos_by_differentiation, idos, idos_sharp, smoothing_g
from .runner import Engine, parallel_map
from .spectrum import BandGrid, BzGrid, estimate_solve_cost, make_bz_grid, solve_bands
from .tbmodel import (
    BlochOperatorPair,
    GrapheneNNModel,
    MultiOrbitalModel,
    assemble_bloch,
    hermiticity_check,
    load_coupling_table,
)

__version__ = "0.1.0"
