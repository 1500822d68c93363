"""
Configuration - environment settings and experiment config files

Environment (.env is honored):
    PHILAB_WORKERS        Monte Carlo worker threads (never changes results)
    PHILAB_CHUNK_SIZE     replications per derived random stream
    PHILAB_DATABASE_URL   run ledger used by --record and history

Experiment files are INI style, one [section] per experiment:

    [geometric-exponential]
    kind = sum-limit
    phi = gamma
    summand = exponential_scaled
    psi = drift
    schedule = 1e-1, 1e-2, 1e-3
"""
import configparser
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from fuzzywuzzy import fuzz
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from app.services.convergence_stats import RandomStreamSpec, log_lattice, t_grid
from app.services.errors import ConfigError
from app.services.pgf_family import COUNT_SAMPLERS, PgfSpec
from app.services.sum_limits import SUMMAND_FAMILIES, AttractionScheme, SummandFamily
from app.services.max_limits import MaxAttractionScheme
from app.services.transforms import (
    LT_FAMILIES, MU_FAMILIES, PSI_FAMILIES, ExponentMeasureSpec, LtSpec, PsiSpec
)

load_dotenv()

DEFAULT_WORKERS = 1
DEFAULT_CHUNK_SIZE = 10_000
DEFAULT_DATABASE_URL = "sqlite:///./philab_runs.db"
DEFAULT_SEED = 20240101

EXPERIMENT_KINDS = (
    "lemma22", "nas-sum", "sum-limit", "sum-attraction", "nas-max", "max-limit",
    "max-attraction", "subordination", "mid-check", "semigroup", "closure",
)

SUM_KINDS = ("nas-sum", "sum-limit", "sum-attraction")
MAX_KINDS = ("nas-max", "max-limit", "max-attraction", "subordination", "mid-check", "closure")

# Kinds whose schedule is n (theta = 1/n) or r rather than theta
N_SCHEDULE_KINDS = ("sum-attraction", "max-attraction")
DEFAULT_SCHEDULES = {
    "sum-attraction": (1e2, 1e3, 1e4),
    "max-attraction": (1e2, 1e3, 1e4),
    "closure": (0.9, 0.99, 0.999, 1.0),
    "sum-limit": (1e-1, 1e-2, 1e-3),
    "max-limit": (1e-1, 1e-2),
    "nas-sum": (1e-1, 5e-2, 2.5e-2, 1e-2, 5e-3, 2.5e-3, 1e-3),
    "nas-max": (1e-1, 5e-2, 2.5e-2, 1e-2, 5e-3, 2.5e-3, 1e-3),
}
FALLBACK_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)

MID_CHECK_TARGETS = ("mid", "phi_mid", "perturbed")


# ==================== ENVIRONMENT ====================

def _positive_int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {raw!r}")
    return value


def get_workers() -> int:
    return _positive_int_env("PHILAB_WORKERS", DEFAULT_WORKERS)


def get_chunk_size() -> int:
    return _positive_int_env("PHILAB_CHUNK_SIZE", DEFAULT_CHUNK_SIZE)


def get_database_url() -> str:
    return os.getenv("PHILAB_DATABASE_URL", DEFAULT_DATABASE_URL)


# ==================== KIND LOOKUP ====================

def kind_similarity(given: str, known: str) -> int:
    """Best of ratio / partial ratio on cleaned names (0-100)"""
    clean_given = given.lower().replace("_", "-").replace(" ", "")
    clean_known = known.lower()
    return max(fuzz.ratio(clean_given, clean_known), fuzz.partial_ratio(clean_given, clean_known))


def suggest_kind(given: str, threshold: int = 75) -> Optional[str]:
    """Closest experiment kind for a misspelled one, or None"""
    scored = sorted(((kind_similarity(given, kind), kind) for kind in EXPERIMENT_KINDS), reverse=True)
    score, kind = scored[0]
    return kind if score >= threshold else None


# ==================== EXPERIMENT CONFIG ====================

def _split_list(value):
    if isinstance(value, str):
        parts = value.replace(";", ",").replace(",", " ").split()
        return parts
    return value


class ExperimentConfig(BaseModel):
    """One experiment section, flattened to key=value pairs"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    kind: str

    # mixing transform phi
    phi: str = "gamma"
    phi_alpha: float = 1.0
    phi_beta: float = 1.0
    phi_c: float = 1.0

    # count PGF
    j: int = 0
    k: int = 1
    theta: float = 0.5
    count_sampler: str = "inversion"

    # sums
    summand: Optional[str] = None
    summand_alpha: float = 0.5
    psi: Optional[str] = None
    psi_b: float = 1.0
    psi_alpha: float = 1.0
    psi_rate: float = 1.0
    norming_scale: float = 1.0
    norming_power: float = 1.0
    centering: float = 0.0

    # maxima
    mu: str = "indep_frechet"
    mu_alpha1: float = 1.0
    mu_alpha2: float = 1.0
    mu_alpha: float = 1.0
    mu_r: float = 0.5
    norming_powers: Optional[Tuple[float, float]] = None
    point: Tuple[float, float] = (1.0, 1.0)
    mid_target: str = "phi_mid"

    # schedules and grids
    schedule: Optional[Tuple[float, ...]] = None
    subsequence: Optional[Tuple[int, ...]] = None
    t_min: float = -5.0
    t_max: float = 5.0
    t_points: int = 101
    v_max: float = 10.0
    v_points: int = 101
    y_low: float = 0.25
    y_high: float = 4.0
    y_points: int = 7
    z_points: int = 99
    lattice_low: float = 0.1
    lattice_high: float = 10.0
    lattice_points: int = 20

    # Monte Carlo and verdicts
    reps: int = 100_000
    draws: int = 100_000
    seed: int = DEFAULT_SEED
    stream_index: int = 0
    tolerance: Optional[float] = None
    slack: float = 0.05

    @field_validator("schedule", "subsequence", "norming_powers", "point", mode="before")
    @classmethod
    def parse_lists(cls, value):
        return _split_list(value)

    @field_validator("summand", "psi", mode="before")
    @classmethod
    def empty_is_none(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none", "-"):
            return None
        return value

    @field_validator("kind")
    @classmethod
    def known_kind(cls, value: str) -> str:
        if value not in EXPERIMENT_KINDS:
            suggestion = suggest_kind(value)
            hint = f" (did you mean '{suggestion}'?)" if suggestion else ""
            raise ValueError(f"unknown experiment kind '{value}'{hint}")
        return value

    @field_validator("phi")
    @classmethod
    def known_phi(cls, value: str) -> str:
        if value not in LT_FAMILIES:
            raise ValueError(f"phi must be one of {', '.join(LT_FAMILIES)}")
        return value

    @field_validator("mu")
    @classmethod
    def known_mu(cls, value: str) -> str:
        if value not in MU_FAMILIES:
            raise ValueError(f"mu must be one of {', '.join(MU_FAMILIES)}")
        return value

    @field_validator("count_sampler")
    @classmethod
    def known_sampler(cls, value: str) -> str:
        if value not in COUNT_SAMPLERS:
            raise ValueError(f"count_sampler must be one of {', '.join(COUNT_SAMPLERS)}")
        return value

    @field_validator("mid_target")
    @classmethod
    def known_mid_target(cls, value: str) -> str:
        if value not in MID_CHECK_TARGETS:
            raise ValueError(f"mid_target must be one of {', '.join(MID_CHECK_TARGETS)}")
        return value

    @field_validator("reps", "draws", "t_points", "v_points", "y_points", "z_points", "lattice_points")
    @classmethod
    def positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be a positive integer")
        return value

    @field_validator("seed")
    @classmethod
    def seed_range(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError("seed must be a 64-bit nonnegative integer")
        return value

    @model_validator(mode="after")
    def kind_requirements(self) -> "ExperimentConfig":
        if self.kind in SUM_KINDS:
            if self.summand is None or self.psi is None:
                raise ValueError(f"{self.kind} needs both 'summand' and 'psi'")
            if self.summand not in SUMMAND_FAMILIES:
                raise ValueError(f"summand must be one of {', '.join(SUMMAND_FAMILIES)}")
            if self.psi not in PSI_FAMILIES:
                raise ValueError(f"psi must be one of {', '.join(PSI_FAMILIES)}")
        if self.schedule is not None and len(self.schedule) == 0:
            raise ValueError("schedule must be nonempty")
        return self

    # ==================== BUILDERS ====================

    def lt_spec(self) -> LtSpec:
        return LtSpec(self.phi, alpha=self.phi_alpha, beta=self.phi_beta, c=self.phi_c)

    def psi_spec(self) -> PsiSpec:
        return PsiSpec(self.psi, b=self.psi_b, alpha=self.psi_alpha, rate=self.psi_rate)

    def mu_spec(self) -> ExponentMeasureSpec:
        return ExponentMeasureSpec(
            self.mu, alpha1=self.mu_alpha1, alpha2=self.mu_alpha2, alpha=self.mu_alpha, r=self.mu_r
        )

    def summand_family(self) -> SummandFamily:
        return SummandFamily(self.summand, alpha=self.summand_alpha)

    def pgf_spec(self, theta: Optional[float] = None) -> PgfSpec:
        return PgfSpec(j=self.j, k=self.k, theta=self.theta if theta is None else theta, phi=self.lt_spec())

    def attraction_scheme(self) -> AttractionScheme:
        return AttractionScheme(
            self.summand_family(),
            norming_scale=self.norming_scale,
            norming_power=self.norming_power,
            centering=self.centering,
            subsequence=self.subsequence,
        )

    def max_attraction_scheme(self) -> MaxAttractionScheme:
        return MaxAttractionScheme(
            self.mu_spec(),
            norming_powers=self.norming_powers,
            norming_scale=self.norming_scale,
            subsequence=self.subsequence,
        )

    def stream(self) -> RandomStreamSpec:
        return RandomStreamSpec(self.seed, self.stream_index)

    def schedule_values(self) -> List[float]:
        if self.schedule is not None:
            return list(self.schedule)
        return list(DEFAULT_SCHEDULES.get(self.kind, FALLBACK_SCHEDULE))

    def t_values(self) -> np.ndarray:
        return t_grid(self.t_min, self.t_max, self.t_points)

    def v_values(self) -> np.ndarray:
        return np.linspace(0.0, self.v_max, self.v_points)

    def y_values(self) -> np.ndarray:
        return log_lattice(self.y_low, self.y_high, self.y_points)

    def z_values(self) -> np.ndarray:
        """Interior grid of (0, 1) for N-sum-stability residuals"""
        return np.linspace(0.0, 1.0, self.z_points + 2)[1:-1]

    def lattice_values(self) -> np.ndarray:
        return np.geomspace(self.lattice_low, self.lattice_high, self.lattice_points)


# ==================== LOADING ====================

def _parse_override(raw: str) -> Tuple[Optional[str], str, str]:
    if "=" not in raw:
        raise ConfigError(f"Override '{raw}' is not of the form key=value")
    key, value = raw.split("=", 1)
    key = key.strip()
    section = None
    if "." in key:
        section, key = key.split(".", 1)
    if not key:
        raise ConfigError(f"Override '{raw}' has an empty key")
    return section, key, value.strip()


def apply_overrides(
        sections: Dict[str, Dict[str, str]],
        overrides: Sequence[str] = (),
        seed: Optional[int] = None
) -> Dict[str, Dict[str, str]]:
    """--set key=value hits every section, --set section.key=value only one"""
    merged = {name: dict(values) for name, values in sections.items()}
    for raw in overrides:
        section, key, value = _parse_override(raw)
        if section is None:
            for values in merged.values():
                values[key] = value
        elif section in merged:
            merged[section][key] = value
        else:
            raise ConfigError(f"Override '{raw}' names unknown section '{section}'")
    if seed is not None:
        for values in merged.values():
            values["seed"] = str(seed)
    return merged


def _format_validation_error(name: str, error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "section"
        problems.append(f"{where}: {item['msg']}")
    return f"[{name}] " + "; ".join(problems)


def build_configs(sections: Dict[str, Dict[str, str]]) -> List[ExperimentConfig]:
    if not sections:
        raise ConfigError("Config defines no experiment sections")
    configs = []
    for name, values in sections.items():
        try:
            configs.append(ExperimentConfig(name=name, **values))
        except ValidationError as e:
            raise ConfigError(_format_validation_error(name, e))
    return configs


def read_sections(path: str) -> Dict[str, Dict[str, str]]:
    """
    Read an INI experiment file into {section: {key: value}}

    Raises:
        ConfigError: if the file is missing or malformed
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Malformed config {path}: {e}")
    return {name: dict(parser.items(name)) for name in parser.sections()}


def load_experiments(
        path: str,
        overrides: Sequence[str] = (),
        seed: Optional[int] = None
) -> List[ExperimentConfig]:
    sections = read_sections(path)
    return build_configs(apply_overrides(sections, overrides, seed))
