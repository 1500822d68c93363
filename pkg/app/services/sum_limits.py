"""
Sum limits - random sums X_1 + ... + X_N and their phi-ID limits

Simulation of N_theta-sums, the NaS residual (1 - h_theta)/theta - psi,
Monte Carlo convergence reports against phi(k psi) and the analytic
phi-attraction / partial phi-attraction reports.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.services.convergence_stats import (
    ConvergenceReport, RandomStreamSpec, check_n_schedule, check_theta_schedule,
    empirical_cf, mc_tolerance, run_chunked, sup_distance, t_grid as default_t_grid
)
from app.services.errors import DomainError
from app.services.pgf_family import PgfSpec, get_count_sampler, pgf_formula
from app.services.transforms import (
    LtSpec, PsiSpec, psi_eval, sample_subordinator, scaled_phi_id_cf
)

EXPONENTIAL_SCALED = "exponential_scaled"
CAUCHY_SCALED = "cauchy_scaled"
POSITIVE_STABLE_SCALED = "positive_stable_scaled"
BROKEN_EXPONENTIAL = "broken_exponential"
SUMMAND_FAMILIES = (EXPONENTIAL_SCALED, CAUCHY_SCALED, POSITIVE_STABLE_SCALED, BROKEN_EXPONENTIAL)


# ==================== SUMMAND FAMILIES ====================

@dataclass(frozen=True)
class SummandFamily:
    """
    Triangular-array summands X_theta,j.

    exponential_scaled:     h_theta(t) = 1/(1 - i theta t), X = theta Exp(1)
    cauchy_scaled:          h_theta(t) = exp(-theta |t|),   X = theta Cauchy
    positive_stable_scaled: LT exp(-theta s^alpha),         X = theta^(1/alpha) S
    broken_exponential:     h_theta(t) = 1/(1 - i sqrt(theta) t), wrong scaling
    """
    kind: str
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in SUMMAND_FAMILIES:
            raise DomainError(f"Unknown summand family: {self.kind}")
        if self.kind == POSITIVE_STABLE_SCALED and not (0 < self.alpha < 1):
            raise DomainError("Positive stable summands need 0 < alpha < 1")

    @property
    def uses_laplace(self) -> bool:
        """Positive summands are checked through Laplace transforms on s >= 0"""
        return self.kind == POSITIVE_STABLE_SCALED

    def transform(self, theta: float, t) -> np.ndarray:
        """h_theta(t) (CF), or the Laplace transform at s = t for positive summands"""
        t = np.asarray(t, dtype=float)
        if self.kind == EXPONENTIAL_SCALED:
            return 1.0 / (1.0 - 1j * theta * t)
        if self.kind == BROKEN_EXPONENTIAL:
            return 1.0 / (1.0 - 1j * math.sqrt(theta) * t)
        if self.kind == CAUCHY_SCALED:
            return np.exp(-theta * np.abs(t)) + 0j
        if np.any(t < 0):
            raise DomainError("Laplace argument must be >= 0")
        return np.exp(-theta * t ** self.alpha) + 0j

    def _stable(self) -> LtSpec:
        return LtSpec.positive_stable(self.alpha)

    def sample(self, theta: float, rng: np.random.Generator, size=None):
        if self.kind == EXPONENTIAL_SCALED:
            return theta * rng.standard_exponential(size)
        if self.kind == BROKEN_EXPONENTIAL:
            return math.sqrt(theta) * rng.standard_exponential(size)
        if self.kind == CAUCHY_SCALED:
            return theta * rng.standard_cauchy(size)
        return theta ** (1.0 / self.alpha) * sample_subordinator(self._stable(), rng, size)

    def sample_sum(self, theta: float, counts, rng: np.random.Generator) -> np.ndarray:
        """
        One draw of X_1 + ... + X_N per count, by convolution closure:
        Gamma(N) for exponentials, Cauchy(N theta), (N theta)^(1/alpha) S.
        Empty sums are exactly 0.
        """
        counts = np.asarray(counts, dtype=np.int64)
        size = counts.shape
        positive = counts > 0
        n = counts.astype(float)

        if self.kind in (EXPONENTIAL_SCALED, BROKEN_EXPONENTIAL):
            scale = theta if self.kind == EXPONENTIAL_SCALED else math.sqrt(theta)
            draws = scale * rng.gamma(shape=np.maximum(n, 1.0), size=size)
        elif self.kind == CAUCHY_SCALED:
            draws = n * theta * rng.standard_cauchy(size)
        else:
            stable = sample_subordinator(self._stable(), rng, size)
            draws = (n * theta) ** (1.0 / self.alpha) * stable
        return np.where(positive, draws, 0.0)


@dataclass(frozen=True)
class AttractionScheme:
    """
    Normalized base law: h_n(t) = h(t / a_n) exp(-i t b), a_n = scale n^power.

    The base CF h is the theta = 1 member of `base`. With `subsequence`
    set, reports run along theta_{n_m} = 1/n_m (partial attraction).
    """
    base: SummandFamily
    norming_scale: float = 1.0
    norming_power: float = 1.0
    centering: float = 0.0
    subsequence: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not self.norming_scale > 0:
            raise DomainError("Norming constants must be positive")
        if self.subsequence is not None:
            check_n_schedule(self.subsequence)
        if self.centering != 0.0 and self.base.uses_laplace:
            raise DomainError("Centering is not defined for Laplace-checked summands")

    def norming(self, n: float) -> float:
        return self.norming_scale * n ** self.norming_power

    def normalized_transform(self, n: float, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        h = self.base.transform(1.0, t / self.norming(n))
        if self.centering:
            h = h * np.exp(-1j * t * self.centering)
        return h


# ==================== SIMULATION ====================

def simulate_n_sum(
        x: SummandFamily,
        count: PgfSpec,
        reps: int,
        rng: np.random.Generator,
        count_sampler: str = "inversion"
) -> np.ndarray:
    """
    reps i.i.d. realizations of X_1 + ... + X_N with N ~ count and the
    summands at the same theta as the count. N = 0 gives exactly 0.

    Raises:
        HeavyTailError: propagated from inversion count sampling
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    counts = get_count_sampler(count_sampler)(count, rng, size=reps)
    return x.sample_sum(count.theta, counts, rng)


def nas_sum_residual(x: SummandFamily, psi: PsiSpec, theta: float, t_grid) -> float:
    """sup over t_grid of |(1 - h_theta(t)) / theta - psi(t)|"""
    if not theta > 0:
        raise DomainError("theta must be > 0")
    grid = np.asarray(t_grid, dtype=float)
    scaled = (1.0 - x.transform(theta, grid)) / theta
    return sup_distance(scaled, psi_eval(psi, grid))


def sum_limit_report(
        x: SummandFamily,
        count: PgfSpec,
        psi: PsiSpec,
        schedule: Sequence[float],
        stream: RandomStreamSpec,
        reps: int = 100_000,
        t_grid=None,
        phi: Optional[LtSpec] = None,
        tolerance: Optional[float] = None,
        slack: float = 0.05,
        chunk_size: int = 10_000,
        workers: int = 1,
        count_sampler: str = "inversion"
) -> ConvergenceReport:
    """
    Per theta: sup over t_grid of |empirical CF of N_theta-sums - phi(k psi(t))|,
    with the NaS residual recorded alongside.

    count supplies j, k and phi; its theta is replaced by the schedule.
    Every schedule entry reuses the same stream.
    """
    check_theta_schedule(schedule)
    if phi is not None and phi != count.phi:
        raise DomainError("Count PGF must use the same phi as the target law")

    if t_grid is None:
        grid = np.linspace(0.0, 10.0, 101) if x.uses_laplace else default_t_grid()
    else:
        grid = np.asarray(t_grid, dtype=float)
    target = scaled_phi_id_cf(count.phi, psi, count.k, grid)

    distances, residuals = [], []
    for theta in schedule:
        count_theta = count.with_theta(theta)
        sample = run_chunked(
            stream,
            reps,
            lambda rng, n: simulate_n_sum(x, count_theta, n, rng, count_sampler),
            chunk_size=chunk_size,
            workers=workers,
        )
        ecf = empirical_cf(sample, grid, laplace=x.uses_laplace)
        distances.append(sup_distance(ecf, target))
        residuals.append(nas_sum_residual(x, psi, theta, grid))

    return ConvergenceReport(
        label=f"sum-limit {x.kind} j={count.j} k={count.k} {count.phi.describe()}",
        schedule=list(schedule),
        distances=distances,
        residuals=residuals,
        tolerance=mc_tolerance(reps) if tolerance is None else tolerance,
        slack=slack,
    )


# ==================== ATTRACTION ====================

def classical_sum_attraction_distance(
        scheme: AttractionScheme, psi: PsiSpec, n: float, t_grid
) -> float:
    """sup over t_grid of |exp(-n (1 - h_n(t))) - exp(-psi(t))| (classical DA)"""
    grid = np.asarray(t_grid, dtype=float)
    poissonized = np.exp(-n * (1.0 - scheme.normalized_transform(n, grid)))
    return sup_distance(poissonized, np.exp(-np.asarray(psi_eval(psi, grid))))


def sum_attraction_report(
        scheme: AttractionScheme,
        phi: LtSpec,
        psi: PsiSpec,
        schedule: Sequence[float] = (1e2, 1e3, 1e4),
        t_grid=None,
        j: int = 0,
        k: int = 1,
        tolerance: float = 1e-3,
        slack: float = 0.05
) -> ConvergenceReport:
    """
    Per n: sup over t_grid of |P_n(h_n(t)) - phi(k psi(t))| with theta = 1/n,
    evaluated analytically. The residual column holds the classical DA
    distance so both sides of the DA <-> D-phi-A coincidence are visible.
    """
    steps = list(scheme.subsequence) if scheme.subsequence is not None else list(schedule)
    check_n_schedule(steps)
    if t_grid is None:
        grid = np.linspace(0.0, 10.0, 101) if scheme.base.uses_laplace else default_t_grid()
    else:
        grid = np.asarray(t_grid, dtype=float)
    target = scaled_phi_id_cf(phi, psi, k, grid)

    distances, residuals = [], []
    for n in steps:
        count = PgfSpec(j=j, k=k, theta=1.0 / n, phi=phi)
        composed = pgf_formula(count, scheme.normalized_transform(n, grid))
        distances.append(sup_distance(composed, target))
        residuals.append(classical_sum_attraction_distance(scheme, psi, n, grid))

    partial = scheme.subsequence is not None
    return ConvergenceReport(
        label=f"sum-attraction {scheme.base.kind} {'partial' if partial else 'full'}",
        schedule=[float(n) for n in steps],
        distances=distances,
        residuals=residuals,
        tolerance=tolerance,
        slack=slack,
        schedule_kind="n",
    )
