"""Planar formation graphs: rigidity, dynamics, equilibria, bifurcation.

The package models groups of planar agents that regulate distances to
the co-leaders they observe. It provides the graph and rigidity
machinery, the decentralized gradient flows with their closed-form
Jacobian factorizations, equilibrium censuses with stability verdicts,
transcritical bifurcation analysis along a target-length parameter, and
a scenario-driven command line front end.
"""

from .bifurcation import (
    BranchPoint,
    SotomayorReport,
    TranscriticalReport,
    formation_family,
    gauge_slice_z_basis,
    logistic_equilibria,
    logistic_family,
    logistic_reference,
    mu_sweep,
    sotomayor_at_witness,
    sotomayor_check,
    transcritical_detect,
)
from .cli import Scenario, emit_report, load_scenario, main, run_scenario
from .dynamics import (
    BUILTIN_LAW_NAMES,
    ControlLaw,
    CustomLaw,
    Eq1PlainLaw,
    GradientPlainLaw,
    GradientSquaredLaw,
    VectorFieldBundle,
    builtin_law,
    edge_weights,
    eval_F_x,
    eval_F_z,
    jacobian_d,
    jacobian_z,
    reduced_J,
    verify_compatibility,
    zdprime_vectors,
    zprime_vectors,
)
from .equilibria import (
    BENCHMARK_LENGTHS,
    BENCHMARK_SPECTRA,
    CensusReport,
    ConventionCandidate,
    ConventionReport,
    EquilibriumRecord,
    aligned_parameters,
    canonical_gauge,
    census,
    classify_kind,
    design_frameworks,
    gauge_fixed_spectrum,
    gauge_slice_basis,
    identify_convention,
    poincare_index,
    scalar_census,
    solve_ancillary_aligned,
)
from .errors import (
    BlowUpError,
    ConfigurationError,
    ConvergenceError,
    DimensionError,
    FormationForgeError,
    FormulaDomainError,
    InconsistentStateError,
    InfeasibleLengthsError,
    ScenarioError,
    SingularityError,
    UnknownLawError,
)
from .graph import (
    AdjacencyBundle,
    FormationGraph,
    adjacency_bundle,
    contains_subformation,
    edge_adjacency,
    mixed_adjacency,
    outvalence,
    two_cycles,
)
from .numkernel import (
    NewtonResult,
    Spectrum,
    Trajectory,
    eigenvalues,
    fd_jacobian,
    fd_second_directional,
    integrate_ode,
    kron_I2,
    left_nullspace,
    newton_root,
    rank_tol,
)
from .rigidity import (
    EdgeVectors,
    Framework,
    SingularLengths,
    TargetLengths,
    edge_block_rows,
    edge_errors,
    edge_vectors,
    in_singular_set,
    is_infinitesimally_rigid,
    is_minimally_rigid,
    make_singular_lengths,
    planar_cross,
    realize_two_cycles,
    rigidity_matrix,
    singular_witnesses,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyBundle",
    "BENCHMARK_LENGTHS",
    "BENCHMARK_SPECTRA",
    "BUILTIN_LAW_NAMES",
    "BlowUpError",
    "BranchPoint",
    "CensusReport",
    "ConfigurationError",
    "ControlLaw",
    "ConvergenceError",
    "ConventionCandidate",
    "ConventionReport",
    "CustomLaw",
    "DimensionError",
    "EdgeVectors",
    "Eq1PlainLaw",
    "EquilibriumRecord",
    "FormationForgeError",
    "FormationGraph",
    "Framework",
    "FormulaDomainError",
    "GradientPlainLaw",
    "GradientSquaredLaw",
    "InconsistentStateError",
    "InfeasibleLengthsError",
    "NewtonResult",
    "Scenario",
    "ScenarioError",
    "SingularLengths",
    "SingularityError",
    "SotomayorReport",
    "Spectrum",
    "TargetLengths",
    "Trajectory",
    "TranscriticalReport",
    "UnknownLawError",
    "VectorFieldBundle",
    "adjacency_bundle",
    "aligned_parameters",
    "builtin_law",
    "canonical_gauge",
    "census",
    "classify_kind",
    "contains_subformation",
    "design_frameworks",
    "edge_adjacency",
    "edge_block_rows",
    "edge_errors",
    "edge_vectors",
    "edge_weights",
    "eigenvalues",
    "emit_report",
    "eval_F_x",
    "eval_F_z",
    "fd_jacobian",
    "fd_second_directional",
    "formation_family",
    "gauge_fixed_spectrum",
    "gauge_slice_basis",
    "gauge_slice_z_basis",
    "identify_convention",
    "in_singular_set",
    "integrate_ode",
    "is_infinitesimally_rigid",
    "is_minimally_rigid",
    "jacobian_d",
    "jacobian_z",
    "kron_I2",
    "left_nullspace",
    "load_scenario",
    "logistic_equilibria",
    "logistic_family",
    "logistic_reference",
    "main",
    "make_singular_lengths",
    "mixed_adjacency",
    "mu_sweep",
    "newton_root",
    "outvalence",
    "planar_cross",
    "poincare_index",
    "rank_tol",
    "realize_two_cycles",
    "reduced_J",
    "rigidity_matrix",
    "run_scenario",
    "scalar_census",
    "singular_witnesses",
    "solve_ancillary_aligned",
    "sotomayor_at_witness",
    "sotomayor_check",
    "transcritical_detect",
    "two_cycles",
    "verify_compatibility",
    "zdprime_vectors",
    "zprime_vectors",
]
