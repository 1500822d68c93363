"""
Experiment registry - one runner per experiment kind

Every runner takes a validated ExperimentConfig plus the worker/chunk
settings and returns a ConvergenceReport. main.py dispatches through
EXPERIMENT_FUNCTIONS and lists EXPERIMENT_DEFINITIONS.
"""
from typing import List, Optional, Tuple

import numpy as np

from app.services.config import ExperimentConfig, get_chunk_size, get_workers
from app.services.convergence_stats import ConvergenceReport, check_theta_schedule
from app.services.max_limits import (
    max_attraction_report, max_limit_report, mid_supermodularity_check, nas_max_residual,
    logistic_closure_report, perturbed_mid_df, subordinated_cdf_with_error
)
from app.services.pgf_family import lemma22_report, semigroup_residual, stable_pair_theta
from app.services.report import ReportRow, rows_from_report
from app.services.sum_limits import nas_sum_residual, sum_attraction_report, sum_limit_report
from app.services.transforms import describe_mu, mid_df_eval, phi_mid_df_eval

DEFAULT_TOLERANCES = {
    "lemma22": 1e-3,
    "nas-sum": 0.05,
    "sum-attraction": 1e-3,
    "nas-max": 0.05,
    "max-attraction": 1e-3,
    "mid-check": 1e-9,
    "semigroup": 1e-10,
    "closure": 1e-8,
}

# Floor for 3 standard errors when the subordinator is degenerate
MIN_SUBORDINATION_TOLERANCE = 1e-12


def _tolerance(config: ExperimentConfig) -> Optional[float]:
    if config.tolerance is not None:
        return config.tolerance
    return DEFAULT_TOLERANCES.get(config.kind)


def _sum_grid(config: ExperimentConfig) -> np.ndarray:
    """t grid for CF checks, v grid for Laplace checks of positive summands"""
    if config.summand_family().uses_laplace:
        return config.v_values()
    return config.t_values()


# ==================== COUNT SCALING ====================

def run_lemma22(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    return lemma22_report(
        config.pgf_spec(),
        schedule=config.schedule_values(),
        v_grid=config.v_values(),
        tolerance=_tolerance(config),
        slack=config.slack,
    )


def run_semigroup(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    """
    Per theta: the N-sum-stability residual at the matched theta* when the
    pair is stable (distance column) and at theta itself (residual column)
    """
    grid = config.z_values()
    schedule = config.schedule_values()
    check_theta_schedule(schedule)
    distances, residuals = [], []
    for theta in schedule:
        spec = config.pgf_spec(theta)
        matched = stable_pair_theta(spec)
        naive = semigroup_residual(spec, grid)
        residuals.append(naive)
        distances.append(naive if matched is None else semigroup_residual(spec, grid, matched))

    spec = config.pgf_spec(schedule[0])
    return ConvergenceReport(
        label=f"semigroup j={spec.j} k={spec.k} {spec.phi.describe()}",
        schedule=schedule,
        distances=distances,
        residuals=residuals,
        tolerance=_tolerance(config),
        slack=config.slack,
        check_trend=False,
    )


# ==================== SUMS ====================

def run_nas_sum(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    summand = config.summand_family()
    psi = config.psi_spec()
    grid = _sum_grid(config)
    schedule = config.schedule_values()
    check_theta_schedule(schedule)
    return ConvergenceReport(
        label=f"nas-sum {summand.kind}",
        schedule=schedule,
        distances=[nas_sum_residual(summand, psi, theta, grid) for theta in schedule],
        tolerance=_tolerance(config),
        slack=config.slack,
    )


def run_sum_limit(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    schedule = config.schedule_values()
    return sum_limit_report(
        config.summand_family(),
        config.pgf_spec(schedule[0]),
        config.psi_spec(),
        schedule,
        config.stream(),
        reps=config.reps,
        t_grid=_sum_grid(config),
        tolerance=_tolerance(config),
        slack=config.slack,
        chunk_size=chunk_size,
        workers=workers,
        count_sampler=config.count_sampler,
    )


def run_sum_attraction(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    return sum_attraction_report(
        config.attraction_scheme(),
        config.lt_spec(),
        config.psi_spec(),
        schedule=config.schedule_values(),
        t_grid=_sum_grid(config),
        j=config.j,
        k=config.k,
        tolerance=_tolerance(config),
        slack=config.slack,
    )


# ==================== MAXIMA ====================

def run_nas_max(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    mu = config.mu_spec()
    grid = config.y_values()
    schedule = config.schedule_values()
    check_theta_schedule(schedule)
    return ConvergenceReport(
        label=f"nas-max {describe_mu(mu)}",
        schedule=schedule,
        distances=[nas_max_residual(mu, theta, grid) for theta in schedule],
        tolerance=_tolerance(config),
        slack=config.slack,
    )


def run_max_limit(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    schedule = config.schedule_values()
    return max_limit_report(
        config.mu_spec(),
        config.pgf_spec(schedule[0]),
        schedule,
        config.stream(),
        reps=config.reps,
        y_grid=config.y_values(),
        tolerance=_tolerance(config),
        slack=config.slack,
        chunk_size=chunk_size,
        workers=workers,
        count_sampler=config.count_sampler,
    )


def run_max_attraction(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    return max_attraction_report(
        config.max_attraction_scheme(),
        config.lt_spec(),
        schedule=config.schedule_values(),
        y_grid=config.y_values(),
        j=config.j,
        k=config.k,
        tolerance=_tolerance(config),
        slack=config.slack,
    )


def run_subordination(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    """
    Monte Carlo P{Y(Z) <= y} at config.point against phi(T(y)).
    distance = |estimate - exact|, residual = the estimate itself,
    tolerance = 3 standard errors unless overridden.
    """
    phi = config.lt_spec()
    mu = config.mu_spec()
    point = np.asarray(config.point, dtype=float)
    estimate, error = subordinated_cdf_with_error(
        phi, mu, point, config.draws, config.stream().generator()
    )
    exact = float(phi_mid_df_eval(phi, mu, point))
    tolerance = _tolerance(config)
    if tolerance is None:
        tolerance = max(3.0 * error, MIN_SUBORDINATION_TOLERANCE)
    return ConvergenceReport(
        label=f"subordination {phi.describe()} {describe_mu(mu)} at ({point[0]:g}, {point[1]:g})",
        schedule=[float(config.draws)],
        distances=[abs(estimate - exact)],
        residuals=[estimate],
        tolerance=tolerance,
        slack=config.slack,
        check_trend=False,
        schedule_kind="draws",
        extras={"exact": exact, "standard_error": float(error)},
    )


def run_mid_check(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    """
    Supermodularity scan of G, phi(T) or the perturbed fixture.
    distance = max(worst delta, 0), residual = worst delta.
    """
    phi = config.lt_spec()
    mu = config.mu_spec()
    if config.mid_target == "mid":
        df = lambda y: mid_df_eval(mu, y)
    elif config.mid_target == "phi_mid":
        df = lambda y: phi_mid_df_eval(phi, mu, y)
    else:
        df = perturbed_mid_df(mu)

    tolerance = _tolerance(config)
    lattice = config.lattice_values()
    result = mid_supermodularity_check(df, lattice, lattice, slack=tolerance)
    return ConvergenceReport(
        label=f"mid-check {config.mid_target} {describe_mu(mu)}",
        schedule=[float(len(lattice))],
        distances=[max(result.worst_delta, 0.0)],
        residuals=[result.worst_delta],
        tolerance=tolerance,
        slack=config.slack,
        check_trend=False,
        schedule_kind="lattice",
        extras={
            "worst_rectangle": [[float(v) for v in corner] for corner in result.worst_rectangle],
            "worst_delta": float(result.worst_delta),
            "rectangles_checked": int(result.rectangles_checked),
        },
    )


def run_closure(config: ExperimentConfig, workers: int = 1, chunk_size: int = 10_000) -> ConvergenceReport:
    return logistic_closure_report(
        config.lt_spec(),
        config.mu_alpha,
        r_schedule=config.schedule_values(),
        y_grid=config.y_values(),
        tolerance=_tolerance(config),
        slack=config.slack,
    )


# ==================== DISPATCH ====================

# Experiment catalogue (printed by `philab list-experiments`)
EXPERIMENT_DEFINITIONS = [
    {
        "name": "lemma22",
        "description": "Laplace transform of theta N_theta against phi(k v) as theta decreases",
        "schedule": "theta",
        "keys": ["phi", "phi_alpha", "phi_beta", "j", "k", "v_max", "v_points"]
    },
    {
        "name": "nas-sum",
        "description": "NaS residual sup |(1 - h_theta)/theta - psi| for a summand family",
        "schedule": "theta",
        "keys": ["summand", "summand_alpha", "psi", "psi_b", "psi_alpha", "psi_rate", "t_min", "t_max"]
    },
    {
        "name": "sum-limit",
        "description": "Simulated N_theta-sums against the phi-ID limit phi(k psi)",
        "schedule": "theta",
        "keys": ["phi", "summand", "psi", "j", "k", "reps", "seed", "count_sampler"]
    },
    {
        "name": "sum-attraction",
        "description": "Analytic P_n(h_n) against phi(k psi) with theta = 1/n (full or partial)",
        "schedule": "n",
        "keys": ["phi", "summand", "psi", "norming_scale", "norming_power", "centering", "subsequence"]
    },
    {
        "name": "nas-max",
        "description": "NaS residual sup |(1 - H_theta)/theta - T| for H_theta = G^theta",
        "schedule": "theta",
        "keys": ["mu", "mu_alpha1", "mu_alpha2", "mu_alpha", "mu_r", "y_low", "y_high", "y_points"]
    },
    {
        "name": "max-limit",
        "description": "Simulated N_theta-maxima against the phi-MID limit phi(k T)",
        "schedule": "theta",
        "keys": ["phi", "mu", "j", "k", "reps", "seed", "count_sampler"]
    },
    {
        "name": "max-attraction",
        "description": "Analytic P_n(H_n) against phi(k T) with theta = 1/n (full or partial)",
        "schedule": "n",
        "keys": ["phi", "mu", "norming_powers", "norming_scale", "subsequence"]
    },
    {
        "name": "subordination",
        "description": "Monte Carlo P{Y(Z) <= y} against phi(T(y)) within 3 standard errors",
        "schedule": "draws",
        "keys": ["phi", "mu", "point", "draws", "seed"]
    },
    {
        "name": "mid-check",
        "description": "Log-supermodularity scan of a bivariate d.f. on a lattice",
        "schedule": "lattice",
        "keys": ["mid_target", "phi", "mu", "lattice_low", "lattice_high", "lattice_points"]
    },
    {
        "name": "semigroup",
        "description": "N-sum-stability residual P_theta(z) - phi(phi^-1(z)/theta*)",
        "schedule": "theta",
        "keys": ["phi", "j", "k", "z_points"]
    },
    {
        "name": "closure",
        "description": "Logistic phi-MID laws approaching the independent one as r increases to 1",
        "schedule": "r",
        "keys": ["phi", "mu_alpha", "y_low", "y_high", "y_points"]
    }
]


# Map experiment kinds to runners
EXPERIMENT_FUNCTIONS = {
    "lemma22": run_lemma22,
    "nas-sum": run_nas_sum,
    "sum-limit": run_sum_limit,
    "sum-attraction": run_sum_attraction,
    "nas-max": run_nas_max,
    "max-limit": run_max_limit,
    "max-attraction": run_max_attraction,
    "subordination": run_subordination,
    "mid-check": run_mid_check,
    "semigroup": run_semigroup,
    "closure": run_closure
}


def run_experiment(
        config: ExperimentConfig,
        workers: Optional[int] = None,
        chunk_size: Optional[int] = None
) -> Tuple[ConvergenceReport, List[ReportRow]]:
    """Dispatch one config section and turn its report into CSV rows"""
    runner = EXPERIMENT_FUNCTIONS[config.kind]
    report = runner(
        config,
        workers=get_workers() if workers is None else workers,
        chunk_size=get_chunk_size() if chunk_size is None else chunk_size,
    )
    return report, rows_from_report(config.name, report)
