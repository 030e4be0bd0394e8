"""Balancing-weights solvers and point estimates.

Two solvers share one convention: features are the intercept plus the
standardized covariates, the reweighted group's features are averaged
with normalizer N, and the fitted weights make that average match a
target mean vector. The intercept feature pins the sum of weights to N,
so the weights sit on the inverse-propensity (or treatment-odds) scale
that the sensitivity model expects.

* stable balancing weights: minimum sum of squared weights subject to an
  L-infinity imbalance tolerance, solved through its Lagrangian dual by
  accelerated proximal gradient with a soft-threshold step.
* entropy balancing: exact balance, solved by damped Newton on the
  exponential-tilting dual.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Estimand
from .errors import (
    DomainError,
    InfeasibleError,
    NoConvergenceError,
    ZeroWeightSumError,
)


class TargetGroup(enum.Enum):
    """Which group is reweighted toward which target distribution."""

    TREATED_TO_FULL = "treated_to_full"      # mean of Y(1)
    CONTROL_TO_FULL = "control_to_full"      # mean of Y(0)
    CONTROL_TO_TREATED = "control_to_treated"  # mean of Y(0) among treated


class Method(enum.Enum):
    SBW_DUAL = "sbw_dual"
    ENTROPY = "entropy"


@dataclass(frozen=True)
class BalanceSpec:
    """Feature transform description, imbalance tolerance, and direction."""

    tol: float = 0.05
    target_group: TargetGroup = TargetGroup.TREATED_TO_FULL
    transform: str = "intercept + standardized covariates"
    beta_cap: float = 1e6

    def __post_init__(self):
        if self.tol < 0.0:
            raise DomainError("tol must be >= 0")


@dataclass(frozen=True)
class WeightFit:
    """Fitted weights over the reweighted group plus dual diagnostics.

    ``gamma`` follows the dataset's row order restricted to the group;
    ``imbalance`` is the signed per-feature gap between the weighted
    group mean and the target mean (intercept first).
    """

    gamma: np.ndarray
    beta: np.ndarray
    imbalance: np.ndarray
    objective: float
    method: Method
    iterations: int
    target_group: TargetGroup

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": self.gamma.tolist(),
                "beta": self.beta.tolist(),
                "imbalance": self.imbalance.tolist(),
                "objective": self.objective,
                "iterations": self.iterations,
                "method": self.method.value,
                "target_group": self.target_group.value,
            }
        )


def design(dataset: Dataset, target_group: TargetGroup):
    """Feature matrix of the reweighted group, target mean, normalizer.

    Returns (phi_group, group_mask, target, N) where balance is measured
    as phi_group' gamma / N - target.
    """
    phi = np.column_stack([np.ones(dataset.n), dataset.x])
    treated = dataset.z == 1
    if target_group is TargetGroup.TREATED_TO_FULL:
        group = treated
        target = phi.mean(axis=0)
        norm = dataset.n
    elif target_group is TargetGroup.CONTROL_TO_FULL:
        group = ~treated
        target = phi.mean(axis=0)
        norm = dataset.n
    elif target_group is TargetGroup.CONTROL_TO_TREATED:
        group = ~treated
        target = phi[treated].mean(axis=0)
        norm = dataset.n1
    else:  # pragma: no cover
        raise DomainError(f"unknown target group {target_group}")
    return phi[group], group, target, norm


def _soft_threshold(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _sbw_imbalance(phi_g: np.ndarray, beta: np.ndarray, target: np.ndarray,
                   norm: float) -> tuple[np.ndarray, np.ndarray]:
    gamma = np.maximum(phi_g @ beta, 0.0)
    return gamma, phi_g.T @ gamma / norm - target


def solve_sbw_dual(
    dataset: Dataset,
    spec: BalanceSpec,
    max_iter: int = 50_000,
    subgrad_tol: float = 1e-8,
) -> WeightFit:
    """Minimize the dual of the stable-balancing-weights problem.

    The smooth part is mean(0.5 * [beta . phi]_+^2 over the group) / scale
    minus beta . target, whose gradient is exactly the signed imbalance of
    the recovered weights [beta . phi]_+; the L1 term with coefficient
    ``tol`` is handled by soft-thresholding. Accelerated proximal gradient
    with a fixed 1/L step and adaptive restart; converged when the
    minimum-norm subgradient is below ``subgrad_tol``.
    """
    phi_g, group, target, norm = design(dataset, spec.target_group)
    k = phi_g.shape[1]
    lam = spec.tol

    # exact Lipschitz bound for the smooth gradient
    hess_cap = phi_g.T @ phi_g / norm
    lip = max(float(np.linalg.eigvalsh(hess_cap)[-1]), 1e-12)
    step = 1.0 / lip

    def smooth_value(beta):
        active = np.maximum(phi_g @ beta, 0.0)
        return 0.5 * float(active @ active) / norm - float(beta @ target)

    beta = np.zeros(k)
    beta_prev = beta.copy()
    momentum = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        lookahead = beta + ((momentum - 1.0) / momentum) * (beta - beta_prev)
        gamma_la, grad_la = _sbw_imbalance(phi_g, lookahead, target, norm)
        candidate = _soft_threshold(lookahead - step * grad_la, step * lam)

        # adaptive restart: fall back to a plain proximal step on ascent
        if smooth_value(candidate) + lam * np.abs(candidate).sum() > \
                smooth_value(beta) + lam * np.abs(beta).sum():
            _, grad = _sbw_imbalance(phi_g, beta, target, norm)
            candidate = _soft_threshold(beta - step * grad, step * lam)
            momentum = 1.0

        beta_prev, beta = beta, candidate
        momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))

        gamma, imbalance = _sbw_imbalance(phi_g, beta, target, norm)
        sub = np.where(
            beta != 0.0,
            imbalance + lam * np.sign(beta),
            np.sign(imbalance) * np.maximum(np.abs(imbalance) - lam, 0.0),
        )
        if float(np.linalg.norm(sub)) <= subgrad_tol:
            converged = True
            break

    if not converged:
        raise NoConvergenceError(
            "dual solver did not reach stationarity in "
            f"{max_iter} iterations (subgradient norm {np.linalg.norm(sub):.3e})",
            subgrad_norm=float(np.linalg.norm(sub)),
        )
    if np.abs(beta).max() > spec.beta_cap:
        warnings.warn(
            "dual coefficients exceed the cap; the balance tolerance is "
            "near-infeasible for this sample",
            RuntimeWarning,
        )

    objective = smooth_value(beta) + lam * float(np.abs(beta).sum())
    return WeightFit(
        gamma=gamma,
        beta=beta,
        imbalance=imbalance,
        objective=objective,
        method=Method.SBW_DUAL,
        iterations=iterations,
        target_group=spec.target_group,
    )


def solve_entropy(
    dataset: Dataset,
    spec: BalanceSpec,
    max_iter: int = 200,
    grad_tol: float = 1e-11,
) -> WeightFit:
    """Entropy balancing with exact balance via the exponential tilt dual.

    Weights are gamma_i = N * softmax(theta . x_i) over the group, so the
    intercept constraint holds by construction; Newton iterations solve
    the remaining moment conditions. Raises INFEASIBLE when the target
    lies outside the group's convex hull.
    """
    phi_g, group, target, norm = design(dataset, spec.target_group)
    feats = phi_g[:, 1:]  # intercept handled by the softmax normalization
    t_feats = target[1:]

    lo, hi = feats.min(axis=0), feats.max(axis=0)
    outside = (t_feats < lo) | (t_feats > hi)
    if np.any(outside):
        j = int(np.flatnonzero(outside)[0])
        raise InfeasibleError(
            f"target mean for feature '{dataset.names[j]}' lies outside the "
            "group's observed range",
            feature=dataset.names[j],
        )

    theta = np.zeros(feats.shape[1])
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = feats @ theta
        eta -= eta.max()
        p = np.exp(eta)
        p /= p.sum()
        moment = feats.T @ p
        grad = moment - t_feats
        if np.abs(grad).max() <= grad_tol:
            break
        centered = feats - moment
        hess = (centered * p[:, None]).T @ centered
        try:
            direction = -np.linalg.solve(
                hess + 1e-12 * np.eye(hess.shape[0]), grad
            )
        except np.linalg.LinAlgError as exc:
            raise InfeasibleError(f"singular tilt Hessian: {exc}") from exc

        # backtracking on the convex dual logsumexp(theta.x) - theta.t
        def dual(th):
            return float(
                np.log(np.exp(feats @ th - (feats @ th).max()).sum())
                + (feats @ th).max() - th @ t_feats
            )

        base = dual(theta)
        size = 1.0
        while size > 1e-12 and dual(theta + size * direction) > base + \
                1e-4 * size * float(grad @ direction):
            size *= 0.5
        if size <= 1e-12:
            break  # floating-point stall; accept or reject on the residual
        theta = theta + size * direction
    # a stall just above the Newton tolerance is fine as long as the
    # balance residual meets the exact-balance contract
    if np.abs(grad).max() > 1e-8:
        raise InfeasibleError(
            "tilt Newton iterations did not converge; the balance target "
            f"is likely infeasible (residual {np.abs(grad).max():.3e})"
        )

    eta = feats @ theta
    eta -= eta.max()
    p = np.exp(eta)
    p /= p.sum()
    gamma = norm * p
    imbalance = phi_g.T @ gamma / norm - target
    beta = np.concatenate([[0.0], theta])
    objective = float(gamma @ np.log(np.maximum(gamma, 1e-300)))
    return WeightFit(
        gamma=gamma,
        beta=beta,
        imbalance=imbalance,
        objective=objective,
        method=Method.ENTROPY,
        iterations=iterations,
        target_group=spec.target_group,
    )


def hajek_mean(values: np.ndarray, weights: np.ndarray) -> float:
    """Sum-normalized weighted mean; errors on zero total weight."""
    total = float(weights.sum())
    if total == 0.0:
        raise ZeroWeightSumError("weights sum to zero")
    return float(weights @ values) / total


def point_estimate(
    dataset: Dataset,
    fit: WeightFit,
    estimand: Estimand,
    form: str = "hajek",
) -> float:
    """Weighted point estimate for the given estimand.

    The Hajek (sum-normalized) form is the default reported value and is
    what the sensitivity machinery perturbs; ``form="raw"`` returns the
    unnormalized group average for MEAN_TREATED / MEAN_CONTROL_OF_TREATED.
    """
    treated = dataset.z == 1
    group = treated if fit.target_group is TargetGroup.TREATED_TO_FULL \
        else ~treated
    y_group = dataset.y[group]
    if form == "raw":
        return float(fit.gamma @ y_group) / len(y_group)
    if form != "hajek":
        raise DomainError(f"unknown estimate form {form!r}")

    if estimand in (Estimand.MEAN_TREATED, Estimand.MEAN_CONTROL_OF_TREATED):
        return hajek_mean(y_group, fit.gamma)
    if estimand is Estimand.ATT:
        if fit.target_group is not TargetGroup.CONTROL_TO_TREATED:
            raise DomainError("ATT requires a control-to-treated fit")
        return float(dataset.y[treated].mean()) - hajek_mean(y_group, fit.gamma)
    raise DomainError(
        "ATE needs two fits; combine the two mean estimates instead"
    )
