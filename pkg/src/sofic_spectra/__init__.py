"""Finite-volume spectral statistics of random operators over sofic groups."""

__version__ = "0.1.0"

from .exact import ComplexRational
from .groups import (
    BallCapacityError,
    CayleyBall,
    GroupSpec,
    GroupValidationError,
    PatternWindow,
    ball,
    finite_group,
    free_group,
    lattice_group,
    multiply,
    translate_window,
)
from .sofic import (
    FiniteQuotient,
    GoodnessReport,
    LabeledFiniteGraph,
    SoficApproximation,
    SoficCompatibilityError,
    SoficDefectReport,
    edge_graph,
    good_vertices,
    goodness_defect_bound,
    lattice_quotient,
    product_with_quotient,
    random_permutation_approximation,
    sofic_defect,
    torus_approximation,
)
from .measures import (
    Alphabet,
    Configuration,
    EnumerationBudgetError,
    IIDProduct,
    Mixture,
    PeriodicOrbit,
    WindowDistribution,
    binary_alphabet,
    empirical_window_distribution,
    lattice_periodic,
    le_diagnostic,
    lift_configuration,
    model_alphabet,
    pullback_window,
    pushforward_window_distribution,
    sample_configuration,
    target_marginal,
    target_marginal_on,
)
from .operators import (
    AssemblyError,
    InducedOperator,
    LocalRule,
    RuleValidationError,
    adjacency_rule,
    assemble_graph_schrodinger,
    assemble_induced,
    diagonal_rule,
    expected_moment,
    export_matrix_market,
    laplacian_rule,
    power_diagonal_check,
    schrodinger_rule,
    table_rule,
    validate_local_rule,
)
from .spectral import (
    EigensolverError,
    IDSCurve,
    SpectralMeasureView,
    Spectrum,
    atom_mass,
    counting_function,
    eigen_spectrum,
    ids_curve,
    kolmogorov_distance,
    punctured_mass,
    punctured_mass_bound,
    reference_ids,
)
from .monotone import (
    GershgorinCertificate,
    MonotoneIDSReport,
    MonotonicityError,
    RationalSchedule,
    ScheduleError,
    ValueSets,
    apply_schedule,
    build_schedule,
    gershgorin_psd,
    monotone_ids_report,
    schedule_step_psd_check,
    value_sets_of,
)
