"""Shifted estimators and exact extrema over the confounding box.

Under the marginal sensitivity model every unit carries an odds ratio
r_i in [1/L, L] between the covariate-only and the true treatment
probability. The point estimate becomes a ratio that is linear in each
r_i, so its extrema over the box sit at vertices and are found exactly
by Dinkelbach iterations: repeatedly pick the vertex maximizing
numerator - t * denominator and update t to that vertex's ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Estimand, Interval
from .errors import (
    DomainError,
    HOutOfRangeError,
    NoConvergenceError,
    ZeroWeightSumError,
)
from .balancer import TargetGroup, WeightFit, hajek_mean


@dataclass(frozen=True)
class ShiftSpec:
    lambda_sens: float
    estimand: Estimand

    def __post_init__(self):
        if self.lambda_sens < 1.0:
            raise DomainError("lambda_sens must be >= 1")


@dataclass(frozen=True)
class ExtremaResult:
    min_est: float
    max_est: float
    argmin_r: np.ndarray
    argmax_r: np.ndarray
    iterations: int
    degenerate: bool = False

    def interval(self) -> Interval:
        return Interval(self.min_est, self.max_est)

    def to_dict(self) -> dict:
        return {
            "min_est": self.min_est,
            "max_est": self.max_est,
            "argmin_r": self.argmin_r.tolist(),
            "argmax_r": self.argmax_r.tolist(),
            "iterations": self.iterations,
            "degenerate": self.degenerate,
        }


def _shift_rule(estimand: Estimand) -> str:
    """Which shifted-weight formula applies to the reweighted group."""
    if estimand is Estimand.MEAN_TREATED:
        return "inverse_propensity"  # gamma ~ 1/pi: 1 + (gamma-1)e^h
    if estimand in (Estimand.MEAN_CONTROL_OF_TREATED, Estimand.ATT):
        return "odds"  # gamma ~ pi/(1-pi): e^{-h} gamma
    raise DomainError(
        "ATE has no single-group shift; analyze the two means separately"
    )


def shift_weights(
    gamma: np.ndarray,
    h_values: np.ndarray,
    estimand: Estimand,
    lambda_sens: float | None = None,
) -> np.ndarray:
    """Perturb fitted weights by a log odds-ratio vector h.

    When ``lambda_sens`` is given, every |h_i| must stay within
    log(lambda_sens) (up to 1e-12).
    """
    gamma = np.asarray(gamma, dtype=float)
    h = np.asarray(h_values, dtype=float)
    if lambda_sens is not None:
        bound = np.log(lambda_sens)
        if np.any(np.abs(h) > bound + 1e-12):
            raise HOutOfRangeError(
                f"|h| exceeds log(lambda) = {bound:.6g}",
                max_abs_h=float(np.abs(h).max()),
            )
    if _shift_rule(estimand) == "inverse_propensity":
        return 1.0 + (gamma - 1.0) * np.exp(h)
    return np.exp(-h) * gamma


def shifted_estimate(
    dataset: Dataset,
    gamma: np.ndarray,
    h_values: np.ndarray,
    estimand: Estimand,
    lambda_sens: float | None = None,
) -> float:
    """Hajek estimate under shifted weights on the relevant group."""
    treated = dataset.z == 1
    shifted = shift_weights(gamma, h_values, estimand, lambda_sens)
    if estimand is Estimand.MEAN_TREATED:
        return hajek_mean(dataset.y[treated], shifted)
    if estimand is Estimand.MEAN_CONTROL_OF_TREATED:
        return hajek_mean(dataset.y[~treated], shifted)
    if estimand is Estimand.ATT:
        return float(dataset.y[treated].mean()) - hajek_mean(
            dataset.y[~treated], shifted
        )
    raise DomainError("ATE has no single-group shifted estimate")


def _max_fractional(
    y: np.ndarray,
    coef: np.ndarray,
    base: np.ndarray,
    lam: float,
    max_iter: int = 200,
) -> tuple[float, np.ndarray, int]:
    """Maximize sum((base_i + r_i coef_i) y_i) / sum(base_i + r_i coef_i).

    r ranges over the box [1/lam, lam]^n. Ties (zero contribution) break
    toward 1/lam for determinism. Returns (value, argmax r, iterations).
    """
    inv = 1.0 / lam
    # the denominator must stay positive over the whole box, otherwise the
    # ratio is unbounded and vertex optimality fails
    worst = base + np.minimum(coef * inv, coef * lam)
    if worst.sum() <= 0.0:
        raise ZeroWeightSumError(
            "shifted weight sum can reach zero inside the box; the "
            "fractional program is unbounded for this instance"
        )

    r = np.full(y.shape, inv)
    t = float((base + r * coef) @ y) / float((base + r * coef).sum())
    for iteration in range(1, max_iter + 1):
        gain = coef * (y - t)
        r_new = np.where(gain > 0.0, lam, inv)
        w = base + r_new * coef
        t_new = float(w @ y) / float(w.sum())
        if t_new <= t:
            return t, r_new, iteration
        t, r = t_new, r_new
    raise NoConvergenceError(
        f"fractional-program iterations did not settle in {max_iter} steps"
    )


def _extrema_ratio(
    y: np.ndarray, gamma: np.ndarray, lam: float, rule: str
) -> ExtremaResult:
    if rule == "inverse_propensity":
        coef, base = gamma - 1.0, np.ones_like(gamma)
    else:  # odds rule: weights s_i * gamma_i with s_i = 1/r_i in the same box
        coef, base = gamma, np.zeros_like(gamma)

    if lam == 1.0:
        w = base + coef
        value = hajek_mean(y, w)
        ones = np.ones_like(y)
        return ExtremaResult(value, value, ones, ones, 0)

    hi, arg_hi, it_hi = _max_fractional(y, coef, base, lam)
    lo_neg, arg_lo, it_lo = _max_fractional(-y, coef, base, lam)
    lo = -lo_neg
    if rule == "odds":
        # decision variables are r_i = 1/s_i
        arg_hi, arg_lo = 1.0 / arg_hi, 1.0 / arg_lo
    return ExtremaResult(
        min_est=lo,
        max_est=hi,
        argmin_r=arg_lo,
        argmax_r=arg_hi,
        iterations=it_hi + it_lo,
    )


def extrema(dataset: Dataset, gamma: np.ndarray, spec: ShiftSpec) -> ExtremaResult:
    """Exact global extrema of the shifted estimate over the box."""
    treated = dataset.z == 1
    rule = _shift_rule(spec.estimand)
    y = dataset.y[treated] if spec.estimand is Estimand.MEAN_TREATED \
        else dataset.y[~treated]
    result = _extrema_ratio(y, np.asarray(gamma, float), spec.lambda_sens, rule)
    if spec.estimand is Estimand.ATT:
        mu11 = float(dataset.y[treated].mean())
        return ExtremaResult(
            min_est=mu11 - result.max_est,
            max_est=mu11 - result.min_est,
            argmin_r=result.argmax_r,
            argmax_r=result.argmin_r,
            iterations=result.iterations,
            degenerate=result.degenerate,
        )
    return result


def extrema_from_fit(dataset: Dataset, fit: WeightFit, spec: ShiftSpec) -> ExtremaResult:
    """Convenience wrapper checking the fit matches the estimand's group."""
    expected_control = spec.estimand in (
        Estimand.MEAN_CONTROL_OF_TREATED, Estimand.ATT
    )
    if expected_control != (fit.target_group is not TargetGroup.TREATED_TO_FULL):
        raise DomainError(
            f"fit target group {fit.target_group} does not match estimand "
            f"{spec.estimand}"
        )
    return extrema(dataset, fit.gamma, spec)


def combine_ate(interval_mu1: Interval, interval_mu0: Interval) -> Interval:
    """Difference interval [L1 - U0, U1 - L0] for the two-mean contrast."""
    return Interval(
        interval_mu1.lo - interval_mu0.hi,
        interval_mu1.hi - interval_mu0.lo,
    )
