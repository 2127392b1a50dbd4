"""Borel-plane analysis of parameter-space partition functions, and
optimizers guided by the critical objective values it finds."""

from .series_core import (
    BorelSeries,
    DegeneratePadeError,
    InvalidInputError,
    PadeApproximant,
    PowerSeries,
    QuadratureError,
    Singularity,
    TargetSet,
    borel_transform,
    laplace_resum,
    pade,
    pade_poles,
    ratio_test,
    scan_singularities,
    select_targets,
)
from .landscape import (
    MLP,
    Dataset,
    ObjectiveFunction,
    analytic_potential,
    critical_points,
    critical_values,
    cross_entropy_objective,
    mse_objective,
    synthetic_1d_dataset,
)
from .partition_estimator import (
    AnalysisConfig,
    AnalysisReport,
    CouplingRange,
    PartitionSample,
    analyze,
    borel_analysis,
    coupling_range_search,
    fit_series,
    mc_partition,
    variational_partition,
)
from .optimizer import BaseOptimizerState, GuidanceState, Trajectory, guidance_factor, surge_step, train
from .quartic_oracle import (
    OracleReport,
    euler_series_fixture,
    exact_quartic_Z,
    quartic_asymptotic_coeffs,
    verify_resummation,
)

__version__ = "0.1.0"
