"""Data model, validation, standardization, and shared arithmetic.

All values are immutable after construction; every operation here is a
pure function, safe to call concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DomainError,
    EmptyGroupError,
    NonBinaryTreatmentError,
    NonFiniteError,
    ValidationError,
)


class Estimand(enum.Enum):
    """Causal quantity targeted by an analysis.

    MEAN_TREATED is the population mean of the treated potential outcome;
    MEAN_CONTROL_OF_TREATED is the control potential outcome mean among
    the treated (the uncertain half of the ATT). ATE and ATT are the
    corresponding effect contrasts.
    """

    MEAN_TREATED = "mu1"
    MEAN_CONTROL_OF_TREATED = "mu01"
    ATE = "ate"
    ATT = "att"


@dataclass(frozen=True)
class Dataset:
    """Outcomes, binary treatment, covariates, and column labels.

    Construct via :func:`validate` to enforce the invariants; direct
    construction performs no checking.
    """

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray
    names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n1(self) -> int:
        return int(self.z.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def take(self, idx: np.ndarray) -> "Dataset":
        """Row subset / resample by integer indices (no re-validation)."""
        return Dataset(self.y[idx], self.z[idx], self.x[idx], self.names)


@dataclass(frozen=True)
class SensConfig:
    """Sensitivity-analysis configuration: Λ, coverage level, bootstrap size."""

    lambda_sens: float = 1.0
    alpha: float = 0.05
    b_reps: int = 1000
    seed: int = 0
    iota: float = 0.0

    def __post_init__(self):
        if self.lambda_sens < 1.0:
            raise DomainError("lambda_sens must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must be in (0, 1)")
        if self.iota < 0.0:
            raise DomainError("iota must be >= 0")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"interval lo {self.lo} > hi {self.hi}")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Scaling:
    """Per-column (mean, sd) used to standardize, plus constant-column flags."""

    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray  # boolean mask; flagged columns were zeroed

    def inverse(self, x_std: np.ndarray) -> np.ndarray:
        return x_std * self.sd + self.mean


def _as_float_array(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def validate(dataset: Dataset) -> Dataset:
    """Check the dataset invariants and return a normalized copy.

    Raises EMPTY_GROUP, NON_FINITE, or NON_BINARY_TREATMENT errors; on
    success both groups are nonempty and y/x are finite float arrays.
    """
    y = _as_float_array(dataset.y, "y")
    z_raw = np.asarray(dataset.z)
    x = np.asarray(dataset.x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    names = tuple(dataset.names)

    n = y.shape[0]
    if z_raw.shape[0] != n or x.shape[0] != n:
        raise ValidationError(
            f"length mismatch: y={n}, z={z_raw.shape[0]}, x={x.shape[0]}"
        )
    if len(names) != x.shape[1]:
        raise ValidationError(
            f"{len(names)} names for {x.shape[1]} covariate columns"
        )
    if len(set(names)) != len(names):
        raise ValidationError("covariate names must be distinct")

    if not np.all(np.isfinite(y)):
        raise NonFiniteError("outcome contains NaN or infinite entries")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("covariates contain NaN or infinite entries")

    z_float = np.asarray(z_raw, dtype=float)
    if not np.all(np.isin(z_float, (0.0, 1.0))):
        raise NonBinaryTreatmentError("treatment entries must be 0 or 1")
    z = z_float.astype(np.int64)

    n1 = int(z.sum())
    if n1 == 0 or n1 == n:
        raise EmptyGroupError(
            f"both groups must be nonempty (n1={n1}, n0={n - n1})"
        )
    return Dataset(y=y, z=z, x=x, names=names)


def standardize(dataset: Dataset) -> tuple[Dataset, Scaling]:
    """Center and scale each covariate column over the full sample.

    Uses the n-1 denominator for the standard deviation. Constant columns
    are zeroed and flagged in the returned scaling record instead of
    raising.
    """
    x = dataset.x
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    constant = sd <= 0.0
    safe_sd = np.where(constant, 1.0, sd)
    x_std = (x - mean) / safe_sd
    x_std[:, constant] = 0.0
    scaled = Dataset(y=dataset.y, z=dataset.z, x=x_std, names=dataset.names)
    return scaled, Scaling(mean=mean, sd=safe_sd, constant=constant)


def flip_treatment(dataset: Dataset) -> Dataset:
    """Swap treated/control labels.

    Estimating the control-side mean is symmetric to the treated side, so
    control-side analyses reuse the treated-side machinery on the flipped
    data.
    """
    return replace(dataset, z=1 - dataset.z)


def odds_ratio(p1: float, p2: float) -> float:
    """Odds ratio (p1/(1-p1)) / (p2/(1-p2)) for probabilities in (0, 1)."""
    if not (0.0 < p1 < 1.0) or not (0.0 < p2 < 1.0):
        raise DomainError(f"probabilities must be in (0, 1): got {p1}, {p2}")
    return (p1 / (1.0 - p1)) / (p2 / (1.0 - p2))
