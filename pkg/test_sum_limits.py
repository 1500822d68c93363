"""
Test script for random sums and their phi-ID limits
Run this to verify NaS residuals, N-sum simulation and the attraction reports
"""
import math
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.services.convergence_stats import RandomStreamSpec, ks_distance
from app.services.errors import DomainError
from app.services.pgf_family import PgfSpec
from app.services.sum_limits import (
    AttractionScheme, SummandFamily, classical_sum_attraction_distance, nas_sum_residual,
    simulate_n_sum, sum_attraction_report, sum_limit_report
)
from app.services.transforms import LtSpec, PsiSpec

GAMMA_1 = LtSpec.gamma(1.0, 1.0)
EXPONENTIAL = SummandFamily("exponential_scaled")
CAUCHY = SummandFamily("cauchy_scaled")
BROKEN = SummandFamily("broken_exponential")
DRIFT = PsiSpec.drift(1.0)
CAUCHY_PSI = PsiSpec.symmetric_stable(1.0)
T_GRID = np.linspace(-5.0, 5.0, 101)


def rng(index=0):
    return RandomStreamSpec(314, index).generator()


def exp_cdf(x):
    return 1.0 - np.exp(-np.maximum(x, 0.0))


# ==================== SUMMANDS ====================

def test_summand_transforms():
    print("🧪 Testing summand families...")
    assert EXPONENTIAL.transform(0.5, 2.0) == pytest.approx(1.0 / (1.0 - 1j))
    assert CAUCHY.transform(0.1, -3.0) == pytest.approx(math.exp(-0.3))
    positive = SummandFamily("positive_stable_scaled", 0.5)
    assert positive.uses_laplace
    assert positive.transform(0.2, 4.0) == pytest.approx(math.exp(-0.4))
    with pytest.raises(DomainError):
        positive.transform(0.2, -1.0)


def test_invalid_summand_family():
    with pytest.raises(DomainError):
        SummandFamily("lognormal")
    with pytest.raises(DomainError):
        SummandFamily("positive_stable_scaled", 1.5)


def test_empty_sums_are_zero():
    draws = EXPONENTIAL.sample_sum(0.1, np.array([0, 0, 3, 0]), rng(1))
    assert draws[0] == 0.0 and draws[1] == 0.0 and draws[3] == 0.0
    assert draws[2] > 0.0


# ==================== NAS RESIDUALS ====================

def test_nas_residual_examples():
    print("🧪 Testing nas_sum_residual...")
    assert nas_sum_residual(EXPONENTIAL, DRIFT, 0.01, T_GRID) == pytest.approx(0.2496883, abs=1e-7)
    assert nas_sum_residual(CAUCHY, CAUCHY_PSI, 0.01, T_GRID) == pytest.approx(0.122942, abs=1e-6)


@pytest.mark.parametrize("family,psi", [(EXPONENTIAL, DRIFT), (CAUCHY, CAUCHY_PSI)])
def test_nas_residual_shrinks_with_theta(family, psi):
    previous = nas_sum_residual(family, psi, 0.1, T_GRID)
    for theta in (0.05, 0.025, 0.0125):
        current = nas_sum_residual(family, psi, theta, T_GRID)
        assert current <= 0.6 * previous
        previous = current


def test_broken_family_violates_nas():
    residuals = [nas_sum_residual(BROKEN, DRIFT, theta, T_GRID) for theta in (1e-1, 1e-2, 1e-3)]
    assert residuals[-1] > residuals[0]


# ==================== SIMULATION ====================

def test_geometric_sum_approaches_exponential():
    print("🧪 Testing simulate_n_sum...")
    count = PgfSpec(0, 1, 1e-3, GAMMA_1)
    sample = simulate_n_sum(EXPONENTIAL, count, 100_000, rng(2))
    assert sample.shape == (100_000,)
    assert np.all(sample >= 0.0)
    assert ks_distance(sample, exp_cdf) <= 0.02


def test_wald_identity_for_sum_mean():
    count = PgfSpec(0, 1, 0.01, GAMMA_1)
    sample = simulate_n_sum(EXPONENTIAL, count, 100_000, rng(3))
    # E[N] E[X] = (1 / theta) theta
    assert abs(np.mean(sample) - 1.0) <= 0.02


def test_mixture_sampler_for_sums():
    count = PgfSpec(0, 1, 1e-2, GAMMA_1)
    sample = simulate_n_sum(EXPONENTIAL, count, 50_000, rng(4), count_sampler="mixture")
    assert abs(np.mean(sample) - 1.0) <= 0.03


def test_simulate_rejects_bad_reps():
    with pytest.raises(DomainError):
        simulate_n_sum(EXPONENTIAL, PgfSpec(0, 1, 0.1, GAMMA_1), 0, rng(5))


@pytest.mark.parametrize("theta", [0.0, -0.1])
def test_nas_residual_rejects_nonpositive_theta(theta):
    with pytest.raises(DomainError):
        nas_sum_residual(EXPONENTIAL, DRIFT, theta, T_GRID)


# ==================== SUM LIMIT REPORTS ====================

@pytest.mark.parametrize("index", [0, 1, 2, 3])
def test_geometric_exponential_report(index):
    print("🧪 Testing sum_limit_report...")
    report = sum_limit_report(
        EXPONENTIAL, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT,
        schedule=(1.0, 1e-1, 1e-3), stream=RandomStreamSpec(20240101, index),
    )
    assert len(report.distances) == 3
    assert report.final_distance <= 0.02
    assert report.passed
    assert report.residuals[-1] == pytest.approx(
        nas_sum_residual(EXPONENTIAL, DRIFT, 1e-3, T_GRID)
    )


@pytest.mark.parametrize("index", [0, 1, 2, 3])
def test_linnik_report(index):
    report = sum_limit_report(
        CAUCHY, PgfSpec(0, 1, 1.0, GAMMA_1), CAUCHY_PSI,
        schedule=(1.0, 1e-1, 1e-3), stream=RandomStreamSpec(20240101, index),
    )
    assert report.final_distance <= 0.02
    assert report.passed


def test_k2_report_targets_phi_of_2_psi():
    report = sum_limit_report(
        EXPONENTIAL, PgfSpec(0, 2, 1.0, GAMMA_1), DRIFT,
        schedule=(1e-1, 1e-2), stream=RandomStreamSpec(20240101, 2), reps=50_000,
    )
    assert report.final_distance <= 0.04
    # N has mean k / theta, so the k = 1 target phi(psi) is missed by far
    stretched = sum_limit_report(
        SummandFamily("exponential_scaled"), PgfSpec(0, 2, 1.0, GAMMA_1), PsiSpec.drift(0.5),
        schedule=(1e-1, 1e-2), stream=RandomStreamSpec(20240101, 2), reps=50_000,
    )
    assert stretched.final_distance > 0.1


def test_broken_scaling_fails():
    report = sum_limit_report(
        BROKEN, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT,
        schedule=(1e-1, 1e-2, 1e-3), stream=RandomStreamSpec(7), reps=20_000,
    )
    assert not report.passed
    assert report.final_distance > 0.5


def test_sum_limit_is_reproducible_across_workers():
    kwargs = dict(schedule=(1e-1, 1e-2), stream=RandomStreamSpec(99), reps=20_000, chunk_size=3_000)
    serial = sum_limit_report(EXPONENTIAL, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT, workers=1, **kwargs)
    threaded = sum_limit_report(EXPONENTIAL, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT, workers=3, **kwargs)
    assert serial.distances == threaded.distances


def test_sum_limit_rejects_mismatched_phi():
    with pytest.raises(DomainError):
        sum_limit_report(
            EXPONENTIAL, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT,
            schedule=(1e-1,), stream=RandomStreamSpec(1), phi=LtSpec.positive_stable(0.5),
        )
    with pytest.raises(DomainError):
        sum_limit_report(
            EXPONENTIAL, PgfSpec(0, 1, 1.0, GAMMA_1), DRIFT,
            schedule=(1e-2, 1e-1), stream=RandomStreamSpec(1),
        )


# ==================== ATTRACTION ====================

def test_attraction_example_value():
    print("🧪 Testing sum_attraction_report...")
    scheme = AttractionScheme(CAUCHY)
    report = sum_attraction_report(scheme, GAMMA_1, CAUCHY_PSI, schedule=(100,), t_grid=[1.0], tolerance=1e-2)
    # 1 / (1 + 100 (1 - e^(-1/100))) against 1 / 2
    assert report.distances[0] == pytest.approx(abs(0.5012492 - 0.5), abs=1e-7)


def test_cauchy_attraction_report():
    report = sum_attraction_report(AttractionScheme(CAUCHY), GAMMA_1, CAUCHY_PSI)
    assert report.schedule_kind == "n"
    assert all(b < a for a, b in zip(report.distances, report.distances[1:]))
    assert report.final_distance <= 1e-3
    assert report.passed
    # the classical DA distance shrinks along with it
    assert report.residuals[-1] < report.residuals[0]


def test_partial_attraction_matches_full_sequence():
    partial = AttractionScheme(CAUCHY, subsequence=(3, 9, 27, 81, 243, 729, 2187, 6561))
    partial_report = sum_attraction_report(partial, GAMMA_1, CAUCHY_PSI)
    full_report = sum_attraction_report(AttractionScheme(CAUCHY), GAMMA_1, CAUCHY_PSI, schedule=(27, 243, 2187))
    shared = dict(zip(partial_report.schedule, partial_report.distances))
    for n, distance in zip(full_report.schedule, full_report.distances):
        assert shared[n] == pytest.approx(distance, abs=1e-9)
    assert partial_report.final_distance <= 1e-3


def test_classical_distance_at_exact_limit():
    scheme = AttractionScheme(CAUCHY)
    # exp(-n (1 - e^(-|t|/n))) tends to e^(-|t|)
    assert classical_sum_attraction_distance(scheme, CAUCHY_PSI, 1e6, T_GRID) <= 1e-5


def test_attraction_scheme_validation():
    with pytest.raises(DomainError):
        AttractionScheme(CAUCHY, norming_scale=0.0)
    with pytest.raises(DomainError):
        AttractionScheme(CAUCHY, subsequence=(9, 3))
    with pytest.raises(DomainError):
        AttractionScheme(SummandFamily("positive_stable_scaled", 0.5), centering=1.0)


if __name__ == "__main__":
    print("=" * 60)
    print("SUM LIMITS TEST")
    print("=" * 60)
    sys.exit(pytest.main([__file__, "-q"]))
