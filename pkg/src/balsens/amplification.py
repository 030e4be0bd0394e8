"""Finite-sample interpretation utilities: oracle tilts, error bounds,
the imbalance/strength decomposition, and contour data for sensitivity
plots.

The error of interest is the gap between the estimate under oracle
weights (which exactly balance the relevant potential outcome) and the
estimate under the fitted weights. That error factors as
delta_u * beta_u: the imbalance of the not-exactly-balanced covariate
component times its outcome coefficient. Fixing the error bound E at
Λ* yields the curve beta = E / delta, which is compared against the
observed covariates' (imbalance, strength) benchmark points.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.spatial import ConvexHull, QhullError

from .core import Dataset, Estimand, Interval
from .errors import (
    DomainError,
    InfeasibleError,
    NoBenchmarksError,
    RankDeficientError,
)
from .balancer import TargetGroup, hajek_mean
from .sensitivity import ShiftSpec, extrema


class Verdict(enum.Enum):
    SENSITIVE = "sensitive"
    AMBIGUOUS = "ambiguous"
    ROBUST = "robust"


@dataclass(frozen=True)
class OracleFit:
    """Exponential tilt of the fitted weights hitting an outcome target."""

    oracle_gamma: np.ndarray
    tilt: float
    achieved_target: float


@dataclass(frozen=True)
class Benchmark:
    """Imbalance and outcome strength of one observed covariate."""

    name: str
    delta_pre: float
    delta_post: float
    beta_hat: float
    delta_pre_signed: float
    delta_post_signed: float
    flagged: bool = False


@dataclass(frozen=True)
class Decomposition:
    """Per-covariate treatment projection (U), residual (W), benchmarks."""

    u: np.ndarray
    w: np.ndarray
    benchmarks: tuple[Benchmark, ...]
    residual_imbalance: np.ndarray  # diagnostic: weighted imbalance of each W


@dataclass(frozen=True)
class ContourResult:
    curve: np.ndarray  # (grid, 2) columns (delta, beta); empty when E = 0
    hull: np.ndarray   # hull vertex polygon, (m, 2)
    error_bound: float
    no_confounding_needed: bool = False


@dataclass(frozen=True)
class AmplificationResult:
    error_bound: float
    curve: np.ndarray
    benchmarks: tuple[Benchmark, ...]
    hull: np.ndarray
    lambda_sens: float
    no_confounding_needed: bool = False


def oracle_weights(
    y_group: np.ndarray,
    gamma_hat: np.ndarray,
    target: float,
    tol: float = 1e-10,
) -> OracleFit:
    """KL-closest weights to gamma_hat whose Hajek outcome mean hits target.

    The minimizer of sum(g log(g/gamma_hat)) under one linear equality is
    an exponential tilt gamma_hat * exp(t * y); the scalar t is found by
    root-finding on the weighted-mean constraint.
    """
    y = np.asarray(y_group, dtype=float)
    g = np.asarray(gamma_hat, dtype=float)
    if np.any(g <= 0):
        raise DomainError("base weights must be strictly positive to tilt")
    if not (y.min() < target < y.max()) and not np.isclose(target, hajek_mean(y, g)):
        raise InfeasibleError(
            f"target {target} outside the open outcome range "
            f"({y.min()}, {y.max()})"
        )

    y_center = y - y.mean()  # stabilizes exp() for large tilts

    def gap(t: float) -> float:
        expo = t * y_center
        w = g * np.exp(expo - expo.max())  # scale-free in the Hajek ratio
        return hajek_mean(y, w) - target

    if abs(gap(0.0)) <= tol:
        return OracleFit(oracle_gamma=g.copy(), tilt=0.0,
                         achieved_target=hajek_mean(y, g))

    lo, hi = -1.0, 1.0
    for _ in range(200):
        if gap(lo) < 0 < gap(hi):
            break
        lo *= 2.0
        hi *= 2.0
    else:
        raise InfeasibleError("could not bracket the tilt parameter")
    tilt = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16)
    expo = tilt * y_center
    oracle = g * np.exp(expo - expo.max())
    oracle *= g.sum() / oracle.sum()  # keep the total mass of the base weights
    achieved = hajek_mean(y, oracle)
    if abs(achieved - target) > tol:
        raise InfeasibleError(
            f"tilt root-finding missed the target by {achieved - target:.3e}"
        )
    return OracleFit(oracle_gamma=oracle, tilt=tilt, achieved_target=achieved)


def error_bounds(
    dataset: Dataset,
    gamma_hat: np.ndarray,
    lambda_sens: float,
    estimand: Estimand,
) -> Interval:
    """Signed bounds on (oracle estimate - point estimate) at this Λ."""
    res = extrema(dataset, gamma_hat, ShiftSpec(lambda_sens, estimand))
    point = extrema(dataset, gamma_hat, ShiftSpec(1.0, estimand)).min_est
    return Interval(res.min_est - point, res.max_est - point)


def _target_group_for(estimand: Estimand) -> TargetGroup:
    if estimand is Estimand.MEAN_TREATED:
        return TargetGroup.TREATED_TO_FULL
    if estimand in (Estimand.MEAN_CONTROL_OF_TREATED, Estimand.ATT):
        return TargetGroup.CONTROL_TO_TREATED
    raise DomainError("decompose the two ATE means separately")


def decompose(
    dataset: Dataset,
    gamma_hat: np.ndarray,
    estimand: Estimand = Estimand.MEAN_TREATED,
    flagged: np.ndarray | None = None,
    joint_outcome_fit: bool = True,
) -> Decomposition:
    """Treatment projection / residual split and covariate benchmarks.

    Expects standardized covariates. For each covariate, U holds the
    fitted values of its regression on treatment assignment and W the
    residuals. delta_pre is the unweighted group-vs-target imbalance,
    delta_post the weighted one, and beta_hat the covariate's coefficient
    in a regression of the group's observed outcome on all covariates
    (jointly by default; marginally with joint_outcome_fit=False).
    """
    z = dataset.z.astype(float)
    x = dataset.x
    n, d = x.shape
    if flagged is None:
        flagged = np.zeros(d, dtype=bool)

    # fitted values of each covariate on (1, Z): group means by arm
    treated = dataset.z == 1
    mean1 = x[treated].mean(axis=0)
    mean0 = x[~treated].mean(axis=0)
    u = np.where(treated[:, None], mean1, mean0)
    w = x - u

    tg = _target_group_for(estimand)
    group = treated if tg is TargetGroup.TREATED_TO_FULL else ~treated
    if tg is TargetGroup.TREATED_TO_FULL:
        target_mean = x.mean(axis=0)
        target_mean_w = w.mean(axis=0)
    else:
        target_mean = mean1
        target_mean_w = w[treated].mean(axis=0)

    gamma = np.asarray(gamma_hat, dtype=float)
    group_mean = x[group].mean(axis=0)
    weighted_mean = gamma @ x[group] / gamma.sum()
    residual_imbalance = gamma @ w[group] / gamma.sum() - target_mean_w

    keep = ~flagged
    if not np.any(keep):
        raise NoBenchmarksError("all covariate columns are flagged constant")
    y_group = dataset.y[group]
    design_cols = np.column_stack([np.ones(group.sum()), x[group][:, keep]])
    if joint_outcome_fit:
        coef, _, rank, _ = np.linalg.lstsq(design_cols, y_group, rcond=None)
        if rank < design_cols.shape[1]:
            raise RankDeficientError(
                "covariate matrix is rank deficient for the outcome regression"
            )
        betas = np.zeros(d)
        betas[keep] = coef[1:]
    else:
        betas = np.zeros(d)
        for j in np.flatnonzero(keep):
            cols = np.column_stack([np.ones(group.sum()), x[group][:, j]])
            betas[j] = np.linalg.lstsq(cols, y_group, rcond=None)[0][1]

    if np.any(flagged):
        warnings.warn(
            "constant covariate columns are excluded from the benchmarks",
            RuntimeWarning,
        )

    benchmarks = tuple(
        Benchmark(
            name=dataset.names[j],
            delta_pre=float(abs(group_mean[j] - target_mean[j])),
            delta_post=float(abs(weighted_mean[j] - target_mean[j])),
            beta_hat=float(betas[j]),
            delta_pre_signed=float(group_mean[j] - target_mean[j]),
            delta_post_signed=float(weighted_mean[j] - target_mean[j]),
            flagged=bool(flagged[j]),
        )
        for j in range(d)
    )
    return Decomposition(
        u=u, w=w, benchmarks=benchmarks, residual_imbalance=residual_imbalance
    )


def _benchmark_points(benchmarks, which: str) -> np.ndarray:
    pts = [
        (b.delta_post if which == "post" else b.delta_pre, abs(b.beta_hat))
        for b in benchmarks
        if not b.flagged
    ]
    if not pts:
        raise NoBenchmarksError("no unflagged covariates to benchmark against")
    return np.array(pts)


def _hull_polygon(benchmarks) -> np.ndarray:
    """Convex hull of the post-weighting points plus origin and axis caps."""
    red = _benchmark_points(benchmarks, "post")
    pts = np.vstack([
        red,
        [0.0, 0.0],
        [0.0, red[:, 1].max()],
        [red[:, 0].max(), 0.0],
    ])
    try:
        hull = ConvexHull(pts)
        return pts[hull.vertices]
    except QhullError:
        return np.empty((0, 2))  # degenerate (collinear) region has no area


def contour(
    error_bound: float,
    grid: int = 200,
    benchmarks: tuple[Benchmark, ...] = (),
    delta_range: tuple[float, float] | None = None,
) -> ContourResult:
    """Sample the curve delta * beta = E over a log-spaced delta range."""
    if error_bound < 0:
        raise DomainError("error bound must be nonnegative")
    hull = _hull_polygon(benchmarks) if benchmarks else np.empty((0, 2))
    if error_bound == 0.0:
        return ContourResult(
            curve=np.empty((0, 2)),
            hull=hull,
            error_bound=0.0,
            no_confounding_needed=True,
        )
    if delta_range is None:
        deltas = np.array(
            [d for b in benchmarks for d in (b.delta_pre, b.delta_post)
             if not b.flagged and d > 0]
        )
        if deltas.size:
            lo, hi = deltas.min() / 4.0, deltas.max() * 4.0
        else:
            lo, hi = error_bound / 100.0, error_bound * 100.0
    else:
        lo, hi = delta_range
    if not 0 < lo < hi:
        raise DomainError("delta range must be positive and increasing")
    delta = np.geomspace(lo, hi, grid)
    curve = np.column_stack([delta, error_bound / delta])
    return ContourResult(curve=curve, hull=hull, error_bound=error_bound)


def _points_in_hull(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    if polygon.shape[0] < 3:
        return np.zeros(points.shape[0], dtype=bool)
    hull = ConvexHull(polygon)
    # equations give outward normals: inside iff A x + b <= 0 for all facets
    a = hull.equations[:, :2]
    b = hull.equations[:, 2]
    return np.all(points @ a.T + b <= -1e-12, axis=1)


def classify(result: AmplificationResult) -> Verdict:
    """Sensitive / ambiguous / robust verdict from curve vs. benchmarks.

    Sensitive when the error curve passes through the post-weighting
    imbalance region; robust when it clears the rectangle spanned by the
    worst pre-weighting imbalance and the strongest outcome coefficient.
    """
    if result.curve.size == 0:
        raise NoBenchmarksError("empty error curve; nothing to classify")
    if not result.benchmarks:
        raise NoBenchmarksError("no covariate benchmarks to compare against")
    if np.any(_points_in_hull(result.curve, result.hull)):
        return Verdict.SENSITIVE
    pre = _benchmark_points(result.benchmarks, "pre")
    corner = pre[:, 0].max() * _benchmark_points(result.benchmarks, "post")[:, 1].max()
    if result.error_bound > corner:
        return Verdict.ROBUST
    return Verdict.AMBIGUOUS


def amplify(
    dataset: Dataset,
    gamma_hat: np.ndarray,
    lambda_sens: float,
    estimand: Estimand,
    flagged: np.ndarray | None = None,
    grid: int = 200,
) -> AmplificationResult:
    """Error bound at Λ, decomposition benchmarks, and the contour data.

    Expects standardized covariates and a fit matching the estimand's
    reweighted group. E is the maximum absolute value of the signed error
    bounds.
    """
    bounds = error_bounds(dataset, gamma_hat, lambda_sens, estimand)
    e = max(abs(bounds.lo), abs(bounds.hi))
    dec = decompose(dataset, gamma_hat, estimand, flagged)
    cont = contour(e, grid=grid, benchmarks=dec.benchmarks)
    return AmplificationResult(
        error_bound=e,
        curve=cont.curve,
        benchmarks=dec.benchmarks,
        hull=cont.hull,
        lambda_sens=lambda_sens,
        no_confounding_needed=cont.no_confounding_needed,
    )
