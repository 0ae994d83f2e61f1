"""Numerical witnesses for Favard theory of linear stochastic equations with
recurrent coefficients: almost-period scanning, linear cocycles and dichotomies,
Euler-Maruyama ensembles, bounded-Lipschitz distances and end-to-end experiments."""

from .almost_periods import (
    AlmostPeriodReport,
    bebutov_distance,
    levitan_inclusion_check,
    relative_density_gap,
    scan_almost_periods,
    shift_test,
)
from .cocycle import (
    DichotomyCertificate,
    LinearSystem,
    cauchy_operator,
    cocycle_residual,
    fit_dichotomy,
    projection_path,
    propagate,
    rigidity_margin,
    stability_probe,
    translated_projection,
    verify_dichotomy_bounds,
)
from .errors import ConfigError, DomainError, NoDichotomyError, PreconditionError
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    compatibility_in_distribution,
    run_bohr_experiment,
    run_convergence_experiment,
    run_experiment,
    run_hyperbolic_experiment,
    run_levitan_experiment,
    run_periodic_experiment,
)
from .measures import EmpiricalMeasure, bl_auto, bl_distance, bl_distance_subsampled, gaussian_w2
from .sde import (
    Empirical,
    Gaussian,
    MomentCurve,
    PathEnsemble,
    PointMass,
    SdeSystem,
    boundedness_probe,
    marginal_law,
    moment_odes,
    pullback_solution,
    simulate_paths,
)
from .signals import (
    Composed,
    QuasiPeriodicSpec,
    Sampled,
    Signal,
    bohr_witness,
    constant,
    levitan_example,
    signal_from_dict,
    translate,
    trig,
)

__version__ = "0.1.0"
