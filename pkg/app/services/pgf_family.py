"""
PGF family - the class P_phi(s) = { s^j phi((1 - s^k) / theta) }

Evaluation, probability-mass extraction by Fourier inversion on the unit
circle, count sampling, the theta N_theta => k U scaling law and the
N-sum-stability residual.
"""
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from app.services.convergence_stats import ConvergenceReport, check_theta_schedule, sup_distance
from app.services.errors import DomainError, HeavyTailError, NumericFailureError
from app.services.transforms import (
    GAMMA, LtSpec, lt_eval, lt_formula, lt_inverse, lt_mean, sample_subordinator
)

IMAG_RESIDUAL_LIMIT = 1e-8
NEGATIVE_MASS_FLOOR = -1e-12
ALIAS_TOLERANCE = 1e-12
MAX_FFT_POINTS = 2 ** 20

HARD_COUNT_CAP = MAX_FFT_POINTS // 8
INITIAL_COUNT_TABLE = 64
COVERAGE_TOLERANCE = 1e-9
POISSON_MEAN_CAP = 1e18

DEFAULT_THETA_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class PgfSpec:
    """Member of P_phi: shift j, block size k, scale theta, mixing transform phi"""
    j: int
    k: int
    theta: float
    phi: LtSpec

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise DomainError("j must be a nonnegative integer")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("k must be a positive integer")
        if not self.theta > 0:
            raise DomainError("theta must be > 0")

    def with_theta(self, theta: float) -> "PgfSpec":
        return replace(self, theta=theta)


@dataclass(frozen=True, eq=False)
class PmfTable:
    """Masses p_0..p_n_max plus the mass of the tail that was not enumerated"""
    masses: np.ndarray
    truncation_mass: float

    @property
    def n_max(self) -> int:
        return len(self.masses) - 1

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def reconstruct(self, s) -> np.ndarray:
        """sum_n p_n s^n over the enumerated masses"""
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), self.masses)


# ==================== EVALUATION ====================

def pgf_formula(spec: PgfSpec, s) -> np.ndarray:
    """P_theta(s) on real or complex s with |s| <= 1 (no domain checks)"""
    s = np.asarray(s)
    return s ** spec.j * lt_formula(spec.phi, (1.0 - s ** spec.k) / spec.theta)


def pgf_eval(spec: PgfSpec, s):
    """
    P_theta(s) = s^j phi((1 - s^k) / theta) for s in [0, 1].

    Raises:
        DomainError: if s is outside [0, 1]
    """
    arr = np.asarray(s, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError("PGF argument must lie in [0, 1]")
    out = pgf_formula(spec, arr)
    return out.item() if out.ndim == 0 else out


def harris_pgf(s, a: float, k: int):
    """Harris count PGF s / [a - (a - 1) s^k]^(1/k)"""
    s = np.asarray(s, dtype=float)
    out = s / (a - (a - 1.0) * s ** k) ** (1.0 / k)
    return out.item() if out.ndim == 0 else out


def pgf_mean(spec: PgfSpec) -> float:
    """E[N] = P'(1) = j + k E[Z] / theta"""
    return spec.j + spec.k * lt_mean(spec.phi) / spec.theta


# ==================== MASS EXTRACTION ====================

def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _circle_coefficients(spec: PgfSpec, points: int) -> np.ndarray:
    """Cauchy coefficient formula on `points` equispaced unit-circle nodes"""
    nodes = np.exp(2j * np.pi * np.arange(points) / points)
    return np.fft.fft(pgf_formula(spec, nodes)) / points


def _table_points(n_max: int) -> int:
    return _next_pow2(4 * (n_max + 1))


@lru_cache(maxsize=256)
def pgf_pmf(spec: PgfSpec, n_max: int) -> PmfTable:
    """Cached extract_pmf for fixed table sizes"""
    return extract_pmf(spec, n_max)


def extract_pmf(spec: PgfSpec, n_max: int) -> PmfTable:
    """
    Masses p_0..p_n_max of N_theta by discrete Fourier inversion.

    Starts at >= 4 (n_max + 1) nodes and doubles the node count until the
    enumerated masses stop moving (aliasing from the tail), up to
    MAX_FFT_POINTS.

    Raises:
        DomainError: if n_max < 1
        NumericFailureError: if the imaginary residual exceeds 1e-8 or a
            mass falls below -1e-12
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")

    points = _table_points(n_max)
    coeffs = _circle_coefficients(spec, points)
    while points < MAX_FFT_POINTS:
        finer = _circle_coefficients(spec, 2 * points)
        change = np.max(np.abs(finer[: n_max + 1] - coeffs[: n_max + 1]))
        coeffs, points = finer, 2 * points
        if change <= ALIAS_TOLERANCE:
            break

    head = coeffs[: n_max + 1]
    residual = float(np.max(np.abs(head.imag)))
    if residual > IMAG_RESIDUAL_LIMIT:
        raise NumericFailureError(
            f"Mass extraction residual {residual:.3e} exceeds {IMAG_RESIDUAL_LIMIT:g}"
        )
    lowest = float(np.min(head.real))
    if lowest < NEGATIVE_MASS_FLOOR:
        raise NumericFailureError(f"Extracted mass {lowest:.3e} below the numeric floor")

    masses = np.clip(head.real, 0.0, None)
    masses.setflags(write=False)
    truncation = max(float(np.sum(coeffs[n_max + 1:].real)), 0.0)
    return PmfTable(masses=masses, truncation_mass=truncation)


# ==================== SAMPLING ====================

def sample_count(
        spec: PgfSpec,
        rng: np.random.Generator,
        size=None,
        max_count: int = HARD_COUNT_CAP
):
    """
    Draw N_theta by inverting the cumulative masses.

    The table doubles from INITIAL_COUNT_TABLE until the cumulative mass
    reaches 1 - 1e-9 or covers the largest uniform drawn. Growing tables
    are not cached.

    Raises:
        HeavyTailError: if the table would exceed max_count, or need more
            than MAX_FFT_POINTS nodes, first
    """
    u = rng.random(size)
    u_max = float(np.max(u))

    n_max = INITIAL_COUNT_TABLE
    while True:
        cdf = extract_pmf(spec, n_max).cdf()
        covered = cdf[-1]
        if covered >= 1.0 - COVERAGE_TOLERANCE or covered > u_max:
            break
        if n_max * 2 > max_count or _table_points(n_max * 2) > MAX_FFT_POINTS:
            raise HeavyTailError(
                f"Count table reached {n_max} entries with cumulative mass "
                f"{covered:.6f}; N_theta is too heavy-tailed for inversion"
            )
        n_max *= 2

    counts = np.minimum(np.searchsorted(cdf, u, side="right"), n_max)
    return int(counts) if np.ndim(counts) == 0 else counts.astype(np.int64)


def sample_count_mixture(spec: PgfSpec, rng: np.random.Generator, size=None):
    """
    Draw N_theta = j + k * Poisson(Z / theta) with Z ~ phi.

    Exact for every member of P_phi, including infinite-mean counts.
    Poisson means above POISSON_MEAN_CAP saturate.
    """
    z = np.asarray(sample_subordinator(spec.phi, rng, size), dtype=float)
    lam = np.minimum(z / spec.theta, POISSON_MEAN_CAP)
    counts = spec.j + spec.k * rng.poisson(lam)
    return int(counts) if np.ndim(counts) == 0 else counts.astype(np.int64)


COUNT_SAMPLERS = {
    "inversion": sample_count,
    "mixture": sample_count_mixture,
}


def get_count_sampler(name: str):
    sampler = COUNT_SAMPLERS.get(name)
    if sampler is None:
        raise DomainError(f"Unknown count sampler: {name}")
    return sampler


# ==================== SCALING LAW (theta N_theta => k U) ====================

def scaled_count_lt(spec: PgfSpec, v):
    """
    Laplace transform of theta N_theta:
        exp(-v j theta) phi((1 - exp(-v k theta)) / theta)

    Raises:
        DomainError: if v < 0
    """
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("Laplace argument must be >= 0")
    theta = spec.theta
    out = np.exp(-arr * spec.j * theta) * lt_formula(
        spec.phi, -np.expm1(-arr * spec.k * theta) / theta
    )
    return out.item() if out.ndim == 0 else out


def lemma22_report(
        spec: PgfSpec,
        schedule: Sequence[float] = DEFAULT_THETA_SCHEDULE,
        v_grid: Optional[Sequence[float]] = None,
        tolerance: float = 1e-3,
        slack: float = 0.05
) -> ConvergenceReport:
    """
    sup over v_grid of |LT(theta N_theta)(v) - phi(k v)| for each theta.

    spec supplies j, k and phi; its own theta is replaced by the schedule.
    """
    check_theta_schedule(schedule)
    grid = np.linspace(0.0, 10.0, 101) if v_grid is None else np.asarray(v_grid, dtype=float)
    target = lt_eval(spec.phi, spec.k * grid)
    distances = [
        sup_distance(scaled_count_lt(spec.with_theta(theta), grid), target)
        for theta in schedule
    ]
    return ConvergenceReport(
        label=f"lemma22 j={spec.j} k={spec.k} {spec.phi.describe()}",
        schedule=list(schedule),
        distances=distances,
        tolerance=tolerance,
        slack=slack,
    )


# ==================== N-SUM STABILITY ====================

def semigroup_residual(
        spec: PgfSpec,
        z_grid: Sequence[float],
        relation_theta: Optional[float] = None
) -> float:
    """
    sup over z_grid of |P_theta(z) - phi(phi^{-1}(z) / theta_r)|.

    theta_r defaults to spec.theta; a zero residual identifies an
    N-sum-stable pair.
    """
    z = np.asarray(z_grid, dtype=float)
    if z.size == 0 or np.any(z <= 0) or np.any(z >= 1):
        raise DomainError("z_grid must be a nonempty subset of (0, 1)")
    theta_r = spec.theta if relation_theta is None else relation_theta
    relation = lt_eval(spec.phi, np.asarray(lt_inverse(spec.phi, z)) / theta_r)
    return sup_distance(pgf_eval(spec, z), relation)


def stable_pair_theta(spec: PgfSpec) -> Optional[float]:
    """
    theta* for which P_theta(z) = phi(phi^{-1}(z) / theta*) holds exactly.

    Harris counts (Gamma(1/k, beta) mixing, j = 1) satisfy the relation with
    theta* = beta theta / (1 + beta theta); other members have no such theta*.
    """
    phi = spec.phi
    if phi.family != GAMMA or spec.j != 1:
        return None
    if not math.isclose(phi.alpha, 1.0 / spec.k, rel_tol=1e-12):
        return None
    scaled = phi.beta * spec.theta
    return scaled / (1.0 + scaled)
