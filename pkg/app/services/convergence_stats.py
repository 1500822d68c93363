"""
Convergence stats - empirical transforms, distances and trend verdicts
Also owns the reproducible randomness contract used by every Monte Carlo run
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy.stats

from app.services.errors import DomainError

DEFAULT_SLACK = 0.05
MIN_MC_TOLERANCE = 0.02
MAX_SEED = 2 ** 64 - 1


# ==================== RANDOM STREAMS ====================

@dataclass(frozen=True)
class RandomStreamSpec:
    """
    Counter-based random stream: Philox keyed by a SeedSequence whose spawn
    key is (stream_index, chunk). Same (seed, index, chunk) -> same stream.
    """
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= MAX_SEED:
            raise DomainError("Master seed must be a 64-bit nonnegative integer")
        if self.stream_index < 0:
            raise DomainError("Stream index must be nonnegative")

    def generator(self, chunk: Optional[int] = None) -> np.random.Generator:
        spawn_key = (self.stream_index,) if chunk is None else (self.stream_index, chunk)
        seed_seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=spawn_key)
        return np.random.Generator(np.random.Philox(seed_seq))


def run_chunked(
        stream: RandomStreamSpec,
        reps: int,
        draw_chunk: Callable[[np.random.Generator, int], np.ndarray],
        chunk_size: int = 10_000,
        workers: int = 1
) -> np.ndarray:
    """
    Run reps replications in fixed-size chunks, chunk i on stream.generator(i).

    Output only depends on (stream, reps, chunk_size); the worker count
    changes wall time, not results.
    """
    if reps < 1:
        raise DomainError("reps must be >= 1")
    if chunk_size < 1:
        raise DomainError("chunk_size must be >= 1")

    sizes = [min(chunk_size, reps - start) for start in range(0, reps, chunk_size)]

    def task(index: int) -> np.ndarray:
        return np.asarray(draw_chunk(stream.generator(index), sizes[index]))

    if workers <= 1 or len(sizes) == 1:
        parts = [task(index) for index in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, range(len(sizes))))
    return np.concatenate(parts, axis=0)


# ==================== EMPIRICAL TRANSFORMS ====================

def empirical_cf(sample: Sequence[float], t, laplace: bool = False):
    """
    (1/n) sum exp(i t x_j), or the empirical Laplace transform
    (1/n) sum exp(-t x_j) when laplace=True.

    Negative t is evaluated at |t| and conjugated, so the result is
    exactly Hermitian.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("Empirical transform of an empty sample")

    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.shape, dtype=complex)
    for idx, value in enumerate(ts):
        if laplace:
            out[idx] = complex(np.mean(np.exp(-value * x)), 0.0)
            continue
        a = abs(value)
        re = np.mean(np.cos(a * x))
        im = np.mean(np.sin(a * x))
        out[idx] = complex(re, im if value >= 0 else -im)

    if np.ndim(t) == 0:
        return complex(out[0])
    return out


# ==================== DISTANCES ====================

def ks_distance(sample: Sequence[float], cdf: Callable) -> float:
    """
    Kolmogorov-Smirnov statistic of sample against a (vectorized) d.f:
    sup over the sorted sample of max(|i/n - F(x_i)|, |F(x_i) - (i-1)/n|).
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("KS distance of an empty sample")
    result = scipy.stats.ks_1samp(x, lambda v: np.asarray(cdf(v), dtype=float),
                                  alternative="two-sided", method="asymp")
    return float(result.statistic)


def sup_grid_distance(f: Callable, g: Callable, grid: Iterable) -> float:
    """max over grid of |f - g| (complex modulus where applicable)"""
    points = list(grid)
    if not points:
        raise DomainError("Grid must be nonempty")
    return max(abs(complex(f(point)) - complex(g(point))) for point in points)


def sup_distance(values_a, values_b) -> float:
    """Vectorized sup |a - b| over already-evaluated grids"""
    a = np.asarray(values_a)
    b = np.asarray(values_b)
    if a.size == 0:
        raise DomainError("Grid must be nonempty")
    return float(np.max(np.abs(a - b)))


def trend_check(distances: Sequence[float], slack: float = DEFAULT_SLACK) -> bool:
    """
    Pass iff each entry is <= previous * (1 + slack) and last <= first.

    Raises:
        DomainError: if fewer than two distances are given
    """
    values = [float(d) for d in distances]
    if len(values) < 2:
        raise DomainError("trend_check needs at least two distances")
    steps_ok = all(
        current <= previous * (1.0 + slack)
        for previous, current in zip(values, values[1:])
    )
    return steps_ok and values[-1] <= values[0]


def mc_tolerance(reps: int, grid_factor: float = 1.0) -> float:
    """max(0.02, 3 * reps^(-1/2) * grid_factor)"""
    return max(MIN_MC_TOLERANCE, 3.0 * grid_factor / math.sqrt(reps))


# ==================== GRIDS ====================

def t_grid(t_min: float = -5.0, t_max: float = 5.0, points: int = 101) -> np.ndarray:
    return np.linspace(t_min, t_max, points)


def log_lattice(low: float, high: float, points: int) -> np.ndarray:
    """Log-spaced points x log-spaced points, returned as an (n*n, 2) array"""
    axis = np.geomspace(low, high, points)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel()])


# ==================== CONVERGENCE REPORT ====================

@dataclass
class ConvergenceReport:
    """
    Per-schedule distances with a trend verdict.

    passed implies final_distance <= tolerance.
    """
    label: str
    schedule: List[float]
    distances: List[float]
    tolerance: float
    residuals: Optional[List[float]] = None
    slack: float = DEFAULT_SLACK
    check_trend: bool = True
    schedule_kind: str = "theta"  # "theta" or "n"
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def trend_ok(self) -> bool:
        if not self.check_trend or len(self.distances) < 2:
            return True
        return trend_check(self.distances, self.slack)

    @property
    def final_distance(self) -> float:
        return float(self.distances[-1])

    @property
    def final_residual(self) -> Optional[float]:
        if not self.residuals:
            return None
        return float(self.residuals[-1])

    @property
    def passed(self) -> bool:
        return self.trend_ok and self.final_distance <= self.tolerance

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "schedule": [float(v) for v in self.schedule],
            "distances": [float(d) for d in self.distances],
            "residuals": [float(r) for r in self.residuals] if self.residuals else None,
            "tolerance": float(self.tolerance),
            "trend_ok": bool(self.trend_ok),
            "final_distance": self.final_distance,
            "passed": bool(self.passed),
            **self.extras
        }


# ==================== SCHEDULES ====================

def check_theta_schedule(schedule: Sequence[float]):
    """theta schedules are nonempty and strictly decreasing to 0"""
    if len(schedule) == 0:
        raise DomainError("Schedule must be nonempty")
    if any(theta <= 0 for theta in schedule):
        raise DomainError("theta values must be > 0")
    if any(later >= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise DomainError("theta schedule must be strictly decreasing")


def check_n_schedule(schedule: Sequence[float]):
    """n schedules (theta = 1/n) are nonempty, positive and strictly increasing"""
    if len(schedule) == 0:
        raise DomainError("Schedule must be nonempty")
    if any(n <= 0 for n in schedule):
        raise DomainError("n values must be > 0")
    if any(later <= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise DomainError("n schedule must be strictly increasing")
