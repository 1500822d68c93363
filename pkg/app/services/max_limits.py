"""
Max limits - componentwise N-maxima of bivariate vectors and their phi-MID limits

H_theta = G^theta with G = exp(-T) a MID law. Covers sampling, empirical
distribution functions, the NaS residual (1 - H_theta)/theta - T, Monte
Carlo and analytic convergence reports, subordination P{Y(Z) <= y} and the
d = 2 supermodularity test for exponent-measure structure.
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from app.services.convergence_stats import (
    ConvergenceReport, RandomStreamSpec, check_n_schedule, check_theta_schedule,
    log_lattice, mc_tolerance, run_chunked, sup_distance
)
from app.services.errors import DomainError, UnsupportedSamplerError
from app.services.pgf_family import PgfSpec, get_count_sampler, pgf_formula
from app.services.transforms import (
    INDEP_FRECHET, ExponentMeasureSpec, LtSpec, describe_mu, exponent_measure_eval,
    lt_formula, mid_df_eval, sample_subordinator
)

SUPERMODULARITY_SLACK = 1e-9
DEFAULT_LATTICE = np.geomspace(0.1, 10.0, 20)
DEFAULT_R_SCHEDULE = (0.9, 0.99, 0.999, 1.0)


def default_y_grid() -> np.ndarray:
    """7 x 7 log-spaced points on [0.25, 4]^2"""
    return log_lattice(0.25, 4.0, 7)


def _as_grid(y_grid) -> np.ndarray:
    return default_y_grid() if y_grid is None else np.asarray(y_grid, dtype=float)


# ==================== SCHEMES ====================

@dataclass(frozen=True)
class MaxSchemeSpec:
    """Triangular-array vectors Y_theta,j with d.f. H_theta(y) = exp(-theta T(y))"""
    mu: ExponentMeasureSpec
    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be > 0")

    def with_theta(self, theta: float) -> "MaxSchemeSpec":
        return replace(self, theta=theta)

    def df(self, y):
        return np.exp(-self.theta * np.asarray(exponent_measure_eval(self.mu, y)))


class EmpiricalDf2:
    """
    Empirical d.f. of bivariate points. Empty maxima are stored as the
    bottom of the support rectangle.
    """

    def __init__(self, points: np.ndarray, bottom: Tuple[float, float] = (0.0, 0.0)):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise DomainError("Empirical d.f. needs an (n, 2) array of points")
        if points.shape[0] == 0:
            raise DomainError("Empirical d.f. of an empty sample")
        self.points = points
        self.bottom = bottom

    def __len__(self) -> int:
        return self.points.shape[0]

    def __call__(self, y):
        """Fraction of points <= y componentwise, for one point or an (m, 2) grid"""
        query = np.asarray(y, dtype=float)
        flat = np.atleast_2d(query)
        out = np.array([
            np.mean((self.points[:, 0] <= y1) & (self.points[:, 1] <= y2))
            for y1, y2 in flat
        ])
        if query.ndim == 1:
            return float(out[0])
        return out

    @property
    def atom_mass(self) -> float:
        """Share of realizations sitting exactly at the bottom (N = 0)"""
        at_bottom = np.all(self.points == np.asarray(self.bottom), axis=1)
        return float(np.mean(at_bottom))


# ==================== SAMPLING ====================

def _require_sampler(mu: ExponentMeasureSpec):
    if mu.family != INDEP_FRECHET:
        raise UnsupportedSamplerError(
            f"No sampler for {describe_mu(mu)}; only independent Frechet vectors are simulated"
        )


def sample_mid_vector(
        scheme: MaxSchemeSpec,
        rng: Optional[np.random.Generator] = None,
        size=None,
        uniforms=None
):
    """
    Draw Y with d.f. H_theta by componentwise inversion:
        Y_i = (theta / E_i)^(1/alpha_i),  E_i = -log U_i

    `uniforms` (shape (..., 2)) replaces the random U for reproducing a
    specific draw.

    Raises:
        UnsupportedSamplerError: for dependent (logistic) exponent measures
    """
    _require_sampler(scheme.mu)
    if uniforms is None:
        shape = (2,) if size is None else tuple(np.atleast_1d(size)) + (2,)
        u = 1.0 - rng.random(shape)
    else:
        u = np.asarray(uniforms, dtype=float)
    e = -np.log(u)
    alphas = np.asarray(scheme.mu.marginal_indices)
    return (scheme.theta / e) ** (1.0 / alphas)


def sample_n_max_vector(scheme: MaxSchemeSpec, counts, rng: np.random.Generator) -> np.ndarray:
    """
    Componentwise maximum of N draws per count. The max of N draws from
    G^theta is a single draw from G^(N theta); N = 0 yields the bottom.
    """
    _require_sampler(scheme.mu)
    counts = np.asarray(counts, dtype=np.int64)
    e = rng.standard_exponential(counts.shape + (2,))
    alphas = np.asarray(scheme.mu.marginal_indices)
    scale = (scheme.theta * counts.astype(float))[..., None]
    draws = (scale / e) ** (1.0 / alphas)
    return np.where((counts > 0)[..., None], draws, np.asarray(scheme.mu.bottom))


def _n_max_points(
        scheme: MaxSchemeSpec,
        count: PgfSpec,
        reps: int,
        rng: np.random.Generator,
        count_sampler: str
) -> np.ndarray:
    if reps < 1:
        raise DomainError("reps must be >= 1")
    if not np.isclose(scheme.theta, count.theta, rtol=1e-12, atol=0.0):
        raise DomainError("Scheme and count must use the same theta")
    counts = get_count_sampler(count_sampler)(count, rng, size=reps)
    return sample_n_max_vector(scheme, counts, rng)


def simulate_n_max(
        scheme: MaxSchemeSpec,
        count: PgfSpec,
        reps: int,
        rng: np.random.Generator,
        count_sampler: str = "inversion"
) -> EmpiricalDf2:
    """
    Empirical d.f. of reps realizations of max(Y_1, ..., Y_N), N ~ count.

    Raises:
        DomainError: if scheme and count disagree on theta
        UnsupportedSamplerError: for logistic exponent measures
        HeavyTailError: propagated from inversion count sampling
    """
    points = _n_max_points(scheme, count, reps, rng, count_sampler)
    return EmpiricalDf2(points, scheme.mu.bottom)


# ==================== NaS RESIDUAL ====================

def nas_max_residual(mu: ExponentMeasureSpec, theta: float, y_grid) -> float:
    """sup over y_grid of |(1 - H_theta(y)) / theta - T(y)|"""
    if not theta > 0:
        raise DomainError("theta must be > 0")
    t_values = np.asarray(exponent_measure_eval(mu, y_grid), dtype=float)
    scaled = -np.expm1(-theta * t_values) / theta
    return sup_distance(scaled, t_values)


def _phi_mid_target(phi: LtSpec, mu: ExponentMeasureSpec, k: int, grid: np.ndarray) -> np.ndarray:
    """phi(k T(y)) on the grid"""
    return np.real(lt_formula(phi, k * np.asarray(exponent_measure_eval(mu, grid))))


def max_limit_report(
        mu: ExponentMeasureSpec,
        count: PgfSpec,
        schedule: Sequence[float],
        stream: RandomStreamSpec,
        reps: int = 100_000,
        y_grid=None,
        phi: Optional[LtSpec] = None,
        tolerance: Optional[float] = None,
        slack: float = 0.05,
        chunk_size: int = 10_000,
        workers: int = 1,
        count_sampler: str = "inversion"
) -> ConvergenceReport:
    """
    Per theta: sup over y_grid of |empirical d.f. of N_theta-maxima - phi(k T(y))|,
    with the NaS residual recorded alongside.

    count supplies j, k and phi; its theta is replaced by the schedule and
    every schedule entry reuses the same stream.
    """
    check_theta_schedule(schedule)
    _require_sampler(mu)
    if phi is not None and phi != count.phi:
        raise DomainError("Count PGF must use the same phi as the target law")

    grid = _as_grid(y_grid)
    target = _phi_mid_target(count.phi, mu, count.k, grid)

    distances, residuals = [], []
    for theta in schedule:
        scheme = MaxSchemeSpec(mu, theta)
        count_theta = count.with_theta(theta)
        points = run_chunked(
            stream,
            reps,
            lambda rng, n: _n_max_points(scheme, count_theta, n, rng, count_sampler),
            chunk_size=chunk_size,
            workers=workers,
        )
        empirical = EmpiricalDf2(points, mu.bottom)
        distances.append(sup_distance(empirical(grid), target))
        residuals.append(nas_max_residual(mu, theta, grid))

    return ConvergenceReport(
        label=f"max-limit {describe_mu(mu)} j={count.j} k={count.k} {count.phi.describe()}",
        schedule=list(schedule),
        distances=distances,
        residuals=residuals,
        tolerance=mc_tolerance(reps) if tolerance is None else tolerance,
        slack=slack,
    )


# ==================== SUBORDINATION ====================

def subordinated_cdf_with_error(
        phi: LtSpec,
        mu: ExponentMeasureSpec,
        y,
        draws: int,
        rng: np.random.Generator
):
    """
    Monte Carlo estimate of P{Y(Z) <= y} = E[exp(-Z T(y))] and its standard
    error (sample SD / sqrt(draws)). Works for one point or an (m, 2) grid.
    """
    if draws < 2:
        raise DomainError("draws must be >= 2")
    t_values = np.asarray(exponent_measure_eval(mu, y), dtype=float)
    z = np.asarray(sample_subordinator(phi, rng, draws), dtype=float)
    values = np.exp(-np.multiply.outer(z, t_values))
    estimate = values.mean(axis=0)
    error = values.std(axis=0, ddof=1) / np.sqrt(draws)
    if t_values.ndim == 0:
        return float(estimate), float(error)
    return estimate, error


def subordinated_cdf(phi: LtSpec, mu: ExponentMeasureSpec, y, draws: int, rng: np.random.Generator):
    estimate, _ = subordinated_cdf_with_error(phi, mu, y, draws, rng)
    return estimate


# ==================== MID STRUCTURE ====================

@dataclass
class SupermodularityResult:
    passed: bool
    worst_delta: float
    worst_rectangle: Tuple[Tuple[float, float], Tuple[float, float]]
    rectangles_checked: int


def perturbed_mid_df(mu: ExponentMeasureSpec, strength: float = 0.5) -> Callable:
    """
    G(y) (1 - strength (1 - G_1(y_1)) (1 - G_2(y_2))) with G_i the margins of G.

    A negative-dependence perturbation that is a valid d.f. but not MID;
    mid_supermodularity_check rejects it.
    """
    if not 0 < strength <= 1:
        raise DomainError("strength must lie in (0, 1]")
    a1, a2 = mu.marginal_indices

    def evaluate(y):
        points = np.asarray(y, dtype=float)
        g = np.asarray(mid_df_eval(mu, points), dtype=float)
        g1 = np.exp(-points[..., 0] ** -a1)
        g2 = np.exp(-points[..., 1] ** -a2)
        return g * (1.0 - strength * (1.0 - g1) * (1.0 - g2))

    return evaluate


def mid_supermodularity_check(
        df: Callable,
        xs: Optional[Sequence[float]] = None,
        ys: Optional[Sequence[float]] = None,
        slack: float = SUPERMODULARITY_SLACK
) -> SupermodularityResult:
    """
    Scan every lattice rectangle a <= b for
        T(a1, a2) + T(b1, b2) <= T(a1, b2) + T(b1, a2),  T = -log df

    Delta is the left side minus the right side; the check passes when the
    largest Delta is <= slack.

    Raises:
        DomainError: if df <= 0 somewhere on the lattice
    """
    xs = DEFAULT_LATTICE if xs is None else np.asarray(xs, dtype=float)
    ys = DEFAULT_LATTICE if ys is None else np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2:
        raise DomainError("Lattice needs at least two points per axis")

    mesh = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    values = np.asarray(df(mesh.reshape(-1, 2)), dtype=float).reshape(len(xs), len(ys))
    if np.any(values <= 0):
        bad = np.argwhere(values <= 0)[0]
        raise DomainError(
            f"d.f. vanishes at ({xs[bad[0]]:g}, {ys[bad[1]]:g}); "
            "its positivity set is not the lattice rectangle"
        )
    t = -np.log(values)

    # delta[i, k, j, l] for the rectangle (xs[i], ys[j]) - (xs[k], ys[l])
    delta = (
        t[:, None, :, None] + t[None, :, None, :]
        - t[:, None, None, :] - t[None, :, :, None]
    )
    ordered = (
        np.less.outer(np.arange(len(xs)), np.arange(len(xs)))[:, :, None, None]
        & np.less.outer(np.arange(len(ys)), np.arange(len(ys)))[None, None, :, :]
    )
    masked = np.where(ordered, delta, -np.inf)
    i, k, j, l = np.unravel_index(np.argmax(masked), masked.shape)
    worst = float(masked[i, k, j, l])
    return SupermodularityResult(
        passed=worst <= slack,
        worst_delta=worst,
        worst_rectangle=((float(xs[i]), float(ys[j])), (float(xs[k]), float(ys[l]))),
        rectangles_checked=int(np.count_nonzero(ordered)),
    )


# ==================== MAX ATTRACTION ====================

@dataclass(frozen=True)
class MaxAttractionScheme:
    """
    Normalized base law H_n(y) = H(a_1n y_1, a_2n y_2), a_in = scale n^gamma_i,
    with H = exp(-T_base). gamma defaults to 1/alpha_i of the base margins.
    With `subsequence` set, reports run along theta_{n_m} = 1/n_m.
    """
    base: ExponentMeasureSpec
    norming_powers: Optional[Tuple[float, float]] = None
    norming_scale: float = 1.0
    subsequence: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not self.norming_scale > 0:
            raise DomainError("Norming constants must be positive")
        if self.subsequence is not None:
            check_n_schedule(self.subsequence)

    @property
    def powers(self) -> Tuple[float, float]:
        if self.norming_powers is not None:
            return tuple(self.norming_powers)
        a1, a2 = self.base.marginal_indices
        return (1.0 / a1, 1.0 / a2)

    def norming(self, n: float) -> np.ndarray:
        return self.norming_scale * np.power(float(n), np.asarray(self.powers))

    def normalized_exponent(self, n: float, y) -> np.ndarray:
        """T_base(a_n y), so that H_n = exp(-normalized_exponent)"""
        scaled = np.asarray(y, dtype=float) * self.norming(n)
        return np.asarray(exponent_measure_eval(self.base, scaled), dtype=float)

    def normalized_df(self, n: float, y) -> np.ndarray:
        return np.exp(-self.normalized_exponent(n, y))


def classical_max_attraction_distance(
        scheme: MaxAttractionScheme, target: ExponentMeasureSpec, n: float, y_grid
) -> float:
    """sup over y_grid of |exp(-n (1 - H_n(y))) - G(y)| (classical max-attraction)"""
    grid = np.asarray(y_grid, dtype=float)
    poissonized = np.exp(n * np.expm1(-scheme.normalized_exponent(n, grid)))
    return sup_distance(poissonized, mid_df_eval(target, grid))


def max_attraction_report(
        scheme: MaxAttractionScheme,
        phi: LtSpec,
        target: Optional[ExponentMeasureSpec] = None,
        schedule: Sequence[float] = (1e2, 1e3, 1e4),
        y_grid=None,
        j: int = 0,
        k: int = 1,
        tolerance: float = 1e-3,
        slack: float = 0.05
) -> ConvergenceReport:
    """
    Per n: sup over y_grid of |P_n(H_n(y)) - phi(k T(y))| with theta = 1/n.
    The residual column holds the classical max-attraction distance.
    """
    target = scheme.base if target is None else target
    steps = list(scheme.subsequence) if scheme.subsequence is not None else list(schedule)
    check_n_schedule(steps)
    grid = _as_grid(y_grid)
    limit = _phi_mid_target(phi, target, k, grid)

    distances, residuals = [], []
    for n in steps:
        count = PgfSpec(j=j, k=k, theta=1.0 / n, phi=phi)
        composed = np.real(pgf_formula(count, scheme.normalized_df(n, grid)))
        distances.append(sup_distance(composed, limit))
        residuals.append(classical_max_attraction_distance(scheme, target, n, grid))

    partial = scheme.subsequence is not None
    return ConvergenceReport(
        label=f"max-attraction {describe_mu(scheme.base)} {'partial' if partial else 'full'}",
        schedule=[float(n) for n in steps],
        distances=distances,
        residuals=residuals,
        tolerance=tolerance,
        slack=slack,
        schedule_kind="n",
    )


# ==================== CLOSURE ====================

def logistic_closure_report(
        phi: LtSpec,
        alpha: float,
        r_schedule: Sequence[float] = DEFAULT_R_SCHEDULE,
        y_grid=None,
        tolerance: float = 1e-8,
        slack: float = 0.05
) -> ConvergenceReport:
    """
    sup over y_grid of |phi(T_logistic(alpha, r)) - phi(T_indep(alpha, alpha))|
    as r increases to 1: limits of phi-MID laws stay phi-MID.
    """
    if len(r_schedule) == 0:
        raise DomainError("Schedule must be nonempty")
    if any(later <= earlier for earlier, later in zip(r_schedule, r_schedule[1:])):
        raise DomainError("r schedule must be strictly increasing")

    grid = _as_grid(y_grid)
    limit = _phi_mid_target(phi, ExponentMeasureSpec.indep_frechet(alpha, alpha), 1, grid)
    distances = [
        sup_distance(_phi_mid_target(phi, ExponentMeasureSpec.logistic(alpha, r), 1, grid), limit)
        for r in r_schedule
    ]
    return ConvergenceReport(
        label=f"closure Logistic({alpha:g}, r -> 1) {phi.describe()}",
        schedule=list(r_schedule),
        distances=distances,
        tolerance=tolerance,
        slack=slack,
        schedule_kind="r",
    )
