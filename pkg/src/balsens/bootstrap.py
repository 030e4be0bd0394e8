"""Percentile-bootstrap engine, sensitivity intervals, and the Λ* search.

The procedure: draw B bootstrap samples of size n without conditioning
on treatment assignment, re-solve the balancing weights on each sample,
compute the extrema of the shifted estimate at the chosen Λ, and take
percentiles of the per-replicate minima and maxima.

Weight fits do not depend on Λ, so the engine caches one fit per
replicate and evaluates any number of Λ values against the same fits.
With a fixed seed the per-replicate extrema are nested in Λ, which makes
the confidence intervals nested and the Λ* bisection predicate monotone.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    Estimand,
    Interval,
    SensConfig,
    flip_treatment,
    standardize,
    validate,
)
from .errors import (
    DegenerateResamplingError,
    DomainError,
    EmptyInputError,
    NoConvergenceError,
    NotBracketedError,
    SolverError,
)
from .balancer import (
    BalanceSpec,
    Method,
    TargetGroup,
    design,
    solve_entropy,
    solve_sbw_dual,
)
from .sensitivity import _extrema_ratio, _shift_rule, combine_ate


@dataclass(frozen=True)
class BootstrapPlan:
    """Resampling law: B replicates, root seed, degenerate-draw cap."""

    b_reps: int = 1000
    seed: int = 0
    quantile_rule: str = "nearest-rank-ceiling"
    max_redraws: int = 100

    def __post_init__(self):
        if self.b_reps < 2:
            raise DomainError("b_reps must be >= 2")
        if self.quantile_rule != "nearest-rank-ceiling":
            raise DomainError("only the nearest-rank-ceiling rule is supported")


@dataclass(frozen=True)
class SensitivityResult:
    lambda_sens: float
    estimate_range: Interval
    ci: Interval
    b_used: int
    dropped: int = 0
    redraws: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_sens,
            "estimate_range": [self.estimate_range.lo, self.estimate_range.hi],
            "ci": [self.ci.lo, self.ci.hi],
            "b_reps": self.b_used,
            "dropped": self.dropped,
            "redraws": self.redraws,
        }


@dataclass(frozen=True)
class LambdaStar:
    value: float
    not_significant: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.value,
            "not_significant": self.not_significant,
        }


def resample(
    dataset: Dataset, rng: np.random.Generator, max_redraws: int = 100
) -> tuple[Dataset, int]:
    """One bootstrap sample of size n, redrawn while a group is empty."""
    n = dataset.n
    for redraws in range(max_redraws + 1):
        idx = rng.integers(0, n, size=n)
        n1 = int(dataset.z[idx].sum())
        if 0 < n1 < n:
            return dataset.take(idx), redraws
    raise DegenerateResamplingError(
        f"no resample with both groups nonempty after {max_redraws} redraws"
    )


def percentile_ci(values: np.ndarray, alpha: float) -> Interval:
    """[Q_{a/2}, Q_{1-a/2}] with Q_p = sorted value at rank ceil(p*B)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInputError("no values to take percentiles of")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must be in (0, 1)")
    ordered = np.sort(values)
    b = ordered.size

    def rank(p: float) -> int:
        return min(max(math.ceil(p * b), 1), b)

    return Interval(
        float(ordered[rank(alpha / 2.0) - 1]),
        float(ordered[rank(1.0 - alpha / 2.0) - 1]),
    )


@dataclass(frozen=True)
class _Side:
    """One reweighted-group analysis: μ1-style, μ0-style, or control-of-treated."""

    flip: bool
    target_group: TargetGroup
    estimand: Estimand  # per-group estimand driving the shift rule


def _sides(estimand: Estimand) -> tuple[_Side, ...]:
    if estimand is Estimand.MEAN_TREATED:
        return (_Side(False, TargetGroup.TREATED_TO_FULL, Estimand.MEAN_TREATED),)
    if estimand is Estimand.MEAN_CONTROL_OF_TREATED:
        return (_Side(False, TargetGroup.CONTROL_TO_TREATED,
                      Estimand.MEAN_CONTROL_OF_TREATED),)
    if estimand is Estimand.ATT:
        return (_Side(False, TargetGroup.CONTROL_TO_TREATED, Estimand.ATT),)
    # ATE: treated-side mean and (by label flip) control-side mean
    return (
        _Side(False, TargetGroup.TREATED_TO_FULL, Estimand.MEAN_TREATED),
        _Side(True, TargetGroup.TREATED_TO_FULL, Estimand.MEAN_TREATED),
    )


@dataclass(frozen=True)
class SideFit:
    """The pieces of one fit that extrema evaluation needs."""

    y_group: np.ndarray
    gamma: np.ndarray
    rule: str
    treated_mean: float  # only used for ATT

    def extrema(self, lam: float, att: bool) -> Interval:
        res = _extrema_ratio(self.y_group, self.gamma, lam, self.rule)
        if att:
            return Interval(self.treated_mean - res.max_est,
                            self.treated_mean - res.min_est)
        return res.interval()


def fit_side(
    dataset: Dataset,
    side: _Side,
    tol: float,
    method: Method,
) -> SideFit:
    """Standardize, solve the balancing weights, and keep the extrema inputs."""
    ds = flip_treatment(dataset) if side.flip else dataset
    ds_std, _ = standardize(ds)
    spec = BalanceSpec(tol=tol, target_group=side.target_group)
    solver = solve_sbw_dual if method is Method.SBW_DUAL else solve_entropy
    fit = solver(ds_std, spec)
    _, group, _, _ = design(ds_std, side.target_group)
    treated_mean = float(ds.y[ds.z == 1].mean())
    return SideFit(
        y_group=ds.y[group],
        gamma=fit.gamma,
        rule=_shift_rule(side.estimand),
        treated_mean=treated_mean,
    )


def _fit_replicate(args):
    dataset, sides, tol, method, seed_seq, max_redraws = args
    rng = np.random.default_rng(seed_seq)
    sample, redraws = resample(dataset, rng, max_redraws)
    try:
        fits = tuple(fit_side(sample, s, tol, method) for s in sides)
    except SolverError:
        return None, redraws
    return fits, redraws


class BootstrapEngine:
    """Per-replicate weight fits for one (dataset, estimand, seed) triple.

    Building the engine does all the solver work; ``interval_at`` is then
    cheap for any Λ, and repeated calls share the same randomness.
    """

    def __init__(
        self,
        dataset: Dataset,
        tol: float,
        plan: BootstrapPlan,
        estimand: Estimand,
        method: Method = Method.SBW_DUAL,
        workers: int = 1,
    ):
        self.dataset = validate(dataset)
        self.estimand = estimand
        self.plan = plan
        self.sides = _sides(estimand)
        self.original_fits = tuple(
            fit_side(self.dataset, s, tol, method) for s in self.sides
        )

        children = np.random.SeedSequence(plan.seed).spawn(plan.b_reps)
        tasks = [
            (self.dataset, self.sides, tol, method, child, plan.max_redraws)
            for child in children
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_fit_replicate, tasks, chunksize=16))
        else:
            outcomes = [_fit_replicate(t) for t in tasks]

        self.replicates = [fits for fits, _ in outcomes if fits is not None]
        self.dropped = sum(1 for fits, _ in outcomes if fits is None)
        self.redraws = sum(r for _, r in outcomes)
        if self.dropped > 0.01 * plan.b_reps:
            raise NoConvergenceError(
                f"{self.dropped} of {plan.b_reps} bootstrap replicates failed "
                "to solve"
            )

    def _att(self) -> bool:
        return self.estimand is Estimand.ATT

    def _range_at(self, fits, lam: float) -> Interval:
        if self.estimand is Estimand.ATE:
            return combine_ate(
                fits[0].extrema(lam, False), fits[1].extrema(lam, False)
            )
        return fits[0].extrema(lam, self._att())

    def interval_at(self, lam: float, alpha: float) -> SensitivityResult:
        """Point-estimate range and percentile CI at one Λ value."""
        estimate_range = self._range_at(self.original_fits, lam)
        if self.estimand is Estimand.ATE:
            # split alpha evenly between the two means
            half = alpha / 2.0
            lo1 = []
            hi1 = []
            lo0 = []
            hi0 = []
            for fits in self.replicates:
                i1 = fits[0].extrema(lam, False)
                i0 = fits[1].extrema(lam, False)
                lo1.append(i1.lo)
                hi1.append(i1.hi)
                lo0.append(i0.lo)
                hi0.append(i0.hi)
            ci = combine_ate(
                Interval(percentile_ci(lo1, half).lo, percentile_ci(hi1, half).hi),
                Interval(percentile_ci(lo0, half).lo, percentile_ci(hi0, half).hi),
            )
        else:
            att = self._att()
            bounds = np.array(
                [[iv.lo, iv.hi] for iv in
                 (fits[0].extrema(lam, att) for fits in self.replicates)]
            )
            ci = Interval(
                percentile_ci(bounds[:, 0], alpha).lo,
                percentile_ci(bounds[:, 1], alpha).hi,
            )
        return SensitivityResult(
            lambda_sens=lam,
            estimate_range=estimate_range,
            ci=ci,
            b_used=len(self.replicates),
            dropped=self.dropped,
            redraws=self.redraws,
        )


def sensitivity_interval(
    dataset: Dataset,
    spec: BalanceSpec,
    sens: SensConfig,
    plan: BootstrapPlan,
    estimand: Estimand,
    method: Method = Method.SBW_DUAL,
    workers: int = 1,
) -> SensitivityResult:
    """Full Procedure run at sens.lambda_sens.

    The reweighting direction is derived from the estimand; ``spec``
    contributes the imbalance tolerance.
    """
    engine = BootstrapEngine(dataset, spec.tol, plan, estimand, method, workers)
    return engine.interval_at(sens.lambda_sens, sens.alpha)


def lambda_star(
    dataset: Dataset,
    spec: BalanceSpec,
    sens: SensConfig,
    plan: BootstrapPlan,
    estimand: Estimand,
    target: float = 0.0,
    lambda_max: float = 50.0,
    lambda_tol: float = 0.01,
    method: Method = Method.SBW_DUAL,
    workers: int = 1,
    engine: BootstrapEngine | None = None,
) -> LambdaStar:
    """Smallest Λ whose confidence interval contains the target.

    Uses one shared bootstrap (same seed for every Λ), so the containment
    predicate is monotone and plain bisection applies. With sens.iota > 0
    the predicate is containment of either -iota or +iota (equivalence
    mode); otherwise it is containment of ``target``.
    """
    if engine is None:
        engine = BootstrapEngine(dataset, spec.tol, plan, estimand, method, workers)
    targets = (-sens.iota, sens.iota) if sens.iota > 0 else (target,)

    def hit(lam: float) -> bool:
        ci = engine.interval_at(lam, sens.alpha).ci
        return any(ci.contains(t) for t in targets)

    if hit(1.0):
        return LambdaStar(1.0, not_significant=True)
    if not hit(lambda_max):
        raise NotBracketedError(
            f"confidence interval still excludes the target at "
            f"lambda_max={lambda_max}",
            lambda_max=lambda_max,
        )
    lo, hi = 1.0, lambda_max
    while hi - lo > lambda_tol:
        mid = 0.5 * (lo + hi)
        if hit(mid):
            hi = mid
        else:
            lo = mid
    return LambdaStar(hi)
