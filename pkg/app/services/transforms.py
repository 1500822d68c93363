"""
Transforms - Laplace transforms, ID exponents and exponent measures

A phi-ID characteristic function is phi(psi(t)) and a phi-MID distribution
function is phi(T(y)). Each phi family is evaluated through one analytic
formula valid on Re(v) >= 0 (principal branches), so the same code serves
real Laplace arguments and the complex exponents of CF compositions.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from app.services.errors import DomainError

ArrayLike = Union[float, np.ndarray]

# ==================== FAMILY TAGS ====================

GAMMA = "gamma"
POSITIVE_STABLE = "positive_stable"
POINT_MASS = "point_mass"
LT_FAMILIES = (GAMMA, POSITIVE_STABLE, POINT_MASS)

DRIFT = "drift"
SYMMETRIC_STABLE = "symmetric_stable"
EXP_EXPONENT = "exp_exponent"
PSI_FAMILIES = (DRIFT, SYMMETRIC_STABLE, EXP_EXPONENT)

INDEP_FRECHET = "indep_frechet"
LOGISTIC = "logistic"
MU_FAMILIES = (INDEP_FRECHET, LOGISTIC)

# Absolute tolerance on v for the bisection inverse
INVERSE_TOLERANCE = 1e-12
MAX_BISECTION_STEPS = 400


def _as_output(values: np.ndarray) -> ArrayLike:
    """Scalars come back as Python numbers, arrays stay arrays"""
    if np.ndim(values) == 0:
        value = values.item()
        return value
    return values


# ==================== LAPLACE TRANSFORMS (phi) ====================

@dataclass(frozen=True)
class LtSpec:
    """
    Laplace transform phi of a positive mixing variable Z.

    gamma:           phi(v) = (1 + v/beta)^(-alpha)
    positive_stable: phi(v) = exp(-v^alpha), 0 < alpha < 1
    point_mass:      phi(v) = exp(-c v), i.e. Z == c
    """
    family: str
    alpha: float = 1.0
    beta: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.family not in LT_FAMILIES:
            raise DomainError(f"Unknown Laplace transform family: {self.family}")
        if self.family == GAMMA and not (self.alpha > 0 and self.beta > 0):
            raise DomainError("Gamma transform needs alpha > 0 and beta > 0")
        if self.family == POSITIVE_STABLE and not (0 < self.alpha < 1):
            raise DomainError("Positive stable transform needs 0 < alpha < 1")
        if self.family == POINT_MASS and not self.c > 0:
            raise DomainError("Point mass transform needs c > 0")

    @classmethod
    def gamma(cls, alpha: float, beta: float = 1.0) -> "LtSpec":
        return cls(GAMMA, alpha=alpha, beta=beta)

    @classmethod
    def positive_stable(cls, alpha: float) -> "LtSpec":
        return cls(POSITIVE_STABLE, alpha=alpha)

    @classmethod
    def point_mass(cls, c: float = 1.0) -> "LtSpec":
        return cls(POINT_MASS, c=c)

    def describe(self) -> str:
        if self.family == GAMMA:
            return f"Gamma({self.alpha:g},{self.beta:g})"
        if self.family == POSITIVE_STABLE:
            return f"PositiveStable({self.alpha:g})"
        return f"PointMass({self.c:g})"


def lt_formula(phi: LtSpec, v) -> np.ndarray:
    """
    Evaluate phi on real or complex arguments with Re(v) >= 0.
    No domain checks: callers validate.
    """
    v = np.asarray(v)
    if phi.family == GAMMA:
        return np.exp(-phi.alpha * np.log1p(v / phi.beta))

    if phi.family == POSITIVE_STABLE:
        if np.iscomplexobj(v):
            is_zero = v == 0
            safe = np.where(is_zero, 1.0, v)
            powered = np.where(is_zero, 0.0, np.exp(phi.alpha * np.log(safe)))
        else:
            powered = np.power(v, phi.alpha)
        return np.exp(-powered)

    return np.exp(-phi.c * v)


def lt_eval(phi: LtSpec, v: ArrayLike) -> ArrayLike:
    """
    phi(v) for v >= 0.

    Raises:
        DomainError: if any v is negative or NaN
    """
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("Laplace transform argument must be >= 0")
    return _as_output(lt_formula(phi, arr))


def _closed_form_inverse(phi: LtSpec, z: np.ndarray) -> np.ndarray:
    log_z = np.log(z)
    if phi.family == GAMMA:
        # beta * (z^(-1/alpha) - 1), written with expm1 for z near 1
        return phi.beta * np.expm1(-log_z / phi.alpha)
    if phi.family == POSITIVE_STABLE:
        return np.power(-log_z, 1.0 / phi.alpha)
    return -log_z / phi.c


def _bisection_inverse(phi: LtSpec, target: float) -> float:
    """Monotone bisection on [0, 2^m], doubling until phi(2^m) < target"""
    if target >= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while float(lt_formula(phi, hi)) >= target:
        lo, hi = hi, hi * 2.0

    for _ in range(MAX_BISECTION_STEPS):
        if hi - lo <= INVERSE_TOLERANCE:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if float(lt_formula(phi, mid)) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lt_inverse(phi: LtSpec, z: ArrayLike, method: str = "auto") -> ArrayLike:
    """
    Solve phi(v) = z for v >= 0.

    Args:
        phi: Laplace transform spec
        z: value(s) in (0, 1]
        method: "auto" uses the closed form, "bisection" forces the
            monotone bisection fallback

    Raises:
        DomainError: if z <= 0 or z > 1
    """
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0) or np.any(arr > 1):
        raise DomainError("Laplace transform inverse needs z in (0, 1]")

    if method == "bisection":
        flat = [_bisection_inverse(phi, float(value)) for value in arr.ravel()]
        return _as_output(np.asarray(flat).reshape(arr.shape))
    if method != "auto":
        raise DomainError(f"Unknown inversion method: {method}")

    out = _closed_form_inverse(phi, arr)
    return _as_output(np.where(arr == 1.0, 0.0, out))


def lt_mean(phi: LtSpec) -> float:
    """E[Z] for the mixing variable (infinite for positive stable)"""
    if phi.family == GAMMA:
        return phi.alpha / phi.beta
    if phi.family == POSITIVE_STABLE:
        return math.inf
    return phi.c


def sample_subordinator(phi: LtSpec, rng: np.random.Generator, size=None):
    """
    Draw Z with Laplace transform phi.

    Positive stable draws use Kanter's representation of the
    Chambers-Mallows-Stuck construction:
        Z = sin(aU) / sin(U)^(1/a) * (sin((1-a)U) / E)^((1-a)/a)
    with U ~ Uniform(0, pi], E ~ Exp(1); its transform is exp(-v^a).
    """
    if phi.family == GAMMA:
        return rng.gamma(shape=phi.alpha, scale=1.0 / phi.beta, size=size)

    if phi.family == POSITIVE_STABLE:
        a = phi.alpha
        u = math.pi * (1.0 - rng.random(size))
        e = rng.standard_exponential(size)
        return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (
            np.sin((1.0 - a) * u) / e
        ) ** ((1.0 - a) / a)

    if size is None:
        return phi.c
    return np.full(size, phi.c)


# ==================== ID EXPONENTS (psi) ====================

@dataclass(frozen=True)
class PsiSpec:
    """
    Characteristic exponent psi with omega = exp(-psi) an ID CF.

    drift:            psi(t) = -i b t
    symmetric_stable: psi(t) = |t|^alpha, 0 < alpha <= 2
    exp_exponent:     psi(t) = log(1 - i t / rate)
    """
    family: str
    b: float = 1.0
    alpha: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise DomainError(f"Unknown exponent family: {self.family}")
        if self.family == SYMMETRIC_STABLE and not (0 < self.alpha <= 2):
            raise DomainError("Symmetric stable exponent needs 0 < alpha <= 2")
        if self.family == EXP_EXPONENT and not self.rate > 0:
            raise DomainError("Exponential exponent needs rate > 0")

    @classmethod
    def drift(cls, b: float) -> "PsiSpec":
        return cls(DRIFT, b=b)

    @classmethod
    def symmetric_stable(cls, alpha: float) -> "PsiSpec":
        return cls(SYMMETRIC_STABLE, alpha=alpha)

    @classmethod
    def exp_exponent(cls, rate: float) -> "PsiSpec":
        return cls(EXP_EXPONENT, rate=rate)


def psi_eval(psi: PsiSpec, t: ArrayLike) -> ArrayLike:
    """psi(t) as a complex value (or complex array)"""
    t = np.asarray(t, dtype=float)
    if psi.family == DRIFT:
        out = -1j * psi.b * t
    elif psi.family == SYMMETRIC_STABLE:
        out = np.abs(t) ** psi.alpha + 0j
    else:
        out = np.log(1.0 - 1j * t / psi.rate)
    return _as_output(out)


def scaled_phi_id_cf(phi: LtSpec, psi: PsiSpec, scale: float, t: ArrayLike) -> ArrayLike:
    """phi(scale * psi(t)); scale = k gives the limit of k-block count schemes"""
    exponent = scale * np.asarray(psi_eval(psi, t), dtype=complex)
    return _as_output(lt_formula(phi, exponent))


def phi_id_cf(phi: LtSpec, psi: PsiSpec, t: ArrayLike) -> ArrayLike:
    """The phi-ID characteristic function f(t) = phi(psi(t))"""
    return scaled_phi_id_cf(phi, psi, 1.0, t)


# ==================== EXPONENT MEASURES (mu) ====================

@dataclass(frozen=True)
class ExponentMeasureSpec:
    """
    Bivariate exponent measure through its co-survival functional
    T(y) = mu([bottom, y]^c).

    indep_frechet: T(y) = y1^(-alpha1) + y2^(-alpha2)
    logistic:      T(y) = (y1^(-alpha/r) + y2^(-alpha/r))^r, 0 < r <= 1
    """
    family: str
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if self.family not in MU_FAMILIES:
            raise DomainError(f"Unknown exponent measure family: {self.family}")
        if self.family == INDEP_FRECHET and not (self.alpha1 > 0 and self.alpha2 > 0):
            raise DomainError("Independent Frechet needs alpha1, alpha2 > 0")
        if self.family == LOGISTIC and not (self.alpha > 0 and 0 < self.r <= 1):
            raise DomainError("Logistic needs alpha > 0 and 0 < r <= 1")

    @classmethod
    def indep_frechet(cls, alpha1: float, alpha2: float) -> "ExponentMeasureSpec":
        return cls(INDEP_FRECHET, alpha1=alpha1, alpha2=alpha2)

    @classmethod
    def logistic(cls, alpha: float, r: float) -> "ExponentMeasureSpec":
        return cls(LOGISTIC, alpha=alpha, r=r)

    @property
    def bottom(self) -> Tuple[float, float]:
        return (0.0, 0.0)

    @property
    def marginal_indices(self) -> Tuple[float, float]:
        """Frechet indices of the two margins (T is homogeneous per margin)"""
        if self.family == INDEP_FRECHET:
            return (self.alpha1, self.alpha2)
        return (self.alpha, self.alpha)


def _check_points(mu: ExponentMeasureSpec, y) -> np.ndarray:
    points = np.asarray(y, dtype=float)
    if points.shape[-1:] != (2,):
        raise DomainError("Points must be bivariate (last axis of length 2)")
    if np.any(np.isnan(points)) or np.any(points <= np.asarray(mu.bottom)):
        raise DomainError("Point must lie strictly above the bottom of the support")
    return points


def exponent_measure_eval(mu: ExponentMeasureSpec, y) -> ArrayLike:
    """
    T(y) for y strictly above the bottom; infinite coordinates contribute 0.

    Raises:
        DomainError: if some coordinate is at or below the bottom
    """
    points = _check_points(mu, y)
    y1, y2 = points[..., 0], points[..., 1]
    if mu.family == INDEP_FRECHET:
        out = y1 ** -mu.alpha1 + y2 ** -mu.alpha2
    else:
        power = mu.alpha / mu.r
        out = (y1 ** -power + y2 ** -power) ** mu.r
    return _as_output(out)


def mid_df_eval(mu: ExponentMeasureSpec, y) -> ArrayLike:
    """MID distribution function G(y) = exp(-T(y))"""
    return _as_output(np.exp(-np.asarray(exponent_measure_eval(mu, y))))


def phi_mid_df_eval(phi: LtSpec, mu: ExponentMeasureSpec, y) -> ArrayLike:
    """phi-MID distribution function F(y) = phi(T(y))"""
    return _as_output(lt_formula(phi, np.asarray(exponent_measure_eval(mu, y))))


def recover_mid_from_phi_mid(phi: LtSpec, f_value: ArrayLike) -> ArrayLike:
    """
    exp(-phi^{-1}(F)): maps a phi-MID value back to the MID value it came from.

    Raises:
        DomainError: if F is outside (0, 1]
    """
    return _as_output(np.exp(-np.asarray(lt_inverse(phi, f_value))))


def describe_mu(mu: Optional[ExponentMeasureSpec]) -> str:
    if mu is None:
        return "-"
    if mu.family == INDEP_FRECHET:
        return f"IndepFrechet({mu.alpha1:g},{mu.alpha2:g})"
    return f"Logistic({mu.alpha:g},{mu.r:g})"
