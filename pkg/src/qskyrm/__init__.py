"""Quantum skyrmion lattice models, driving, topology, and thermodynamics."""

from ._version import __version__
from .config import (EXPERIMENT_KINDS, ExperimentConfig, GridSpec,
                     dump_config, load_config, parse_config)
from .dynamics import (PhaseDecomposition, PhaseTrajectory, PropagationResult,
                       QuenchProtocol, StepControl, TransitionMatrix,
                       phase_decomposition, phase_trajectory, propagate,
                       stochasticity_defects, transition_matrix)
from .errors import (CacheError, ConfigError, ConvergenceError,
                     DegenerateTriangleError, DimensionCapError, LatticeError,
                     LevelCrossingError, QskyrmError, TruncationError,
                     VanishingMomentError)
from .experiments import SpectrumStore, run_experiment
from .lattice import (Bond, Lattice, LatticeSpec, ModelParams,
                      build_hamiltonian, build_lattice, boundary_terms,
                      dmi_axis, hamiltonian_parts, site_operator)
from .spectral import (EigenSystem, check_thermal_truncation,
                       degenerate_clusters, diagonalize,
                       retained_weight_fraction, spin_expectation,
                       spin_expectations, spin_texture)
from .thermo import (CycleReport, ThermalEnsemble, adiabatic_stroke_work,
                     carnot_bound, efficiency, free_energy_change, heat_in,
                     irreversible_work, log_partition, mean_work, populations,
                     run_otto_cycle, thermal_ensemble)
from .topology import (SpinField, half_solid_angle, topological_index,
                       winding_parameter)

__all__ = [
    "__version__",
    # configuration
    "ExperimentConfig", "GridSpec", "EXPERIMENT_KINDS", "parse_config",
    "load_config", "dump_config",
    # lattice model
    "LatticeSpec", "ModelParams", "Bond", "Lattice", "build_lattice",
    "dmi_axis", "site_operator", "hamiltonian_parts", "boundary_terms",
    "build_hamiltonian",
    # spectra
    "EigenSystem", "diagonalize", "degenerate_clusters", "spin_expectation",
    "spin_expectations", "spin_texture", "retained_weight_fraction",
    "check_thermal_truncation",
    # topology
    "SpinField", "half_solid_angle", "topological_index", "winding_parameter",
    # driving
    "QuenchProtocol", "StepControl", "PropagationResult", "TransitionMatrix",
    "PhaseDecomposition", "PhaseTrajectory", "propagate", "transition_matrix",
    "stochasticity_defects", "phase_trajectory", "phase_decomposition",
    # thermodynamics
    "ThermalEnsemble", "CycleReport", "log_partition", "populations",
    "thermal_ensemble", "free_energy_change", "adiabatic_stroke_work",
    "heat_in", "irreversible_work", "mean_work", "efficiency", "carnot_bound",
    "run_otto_cycle",
    # orchestration
    "SpectrumStore", "run_experiment",
    # errors
    "QskyrmError", "LatticeError", "DimensionCapError",
    "DegenerateTriangleError", "VanishingMomentError", "ConvergenceError",
    "LevelCrossingError", "TruncationError", "ConfigError", "CacheError",
]
