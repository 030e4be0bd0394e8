"""Simulation harness: data generation, coverage experiments, and the
full-data vs. sample-splitting bootstrap comparison.

The generating process: two standard-normal covariates, a clamped linear
treatment probability 0.5 + 0.07 X1 + 0.07 X2 + noise, and outcome
0.2 Z + 0.5 X1 + 0.5 X2 + noise. The true control mean is 0 and the
true effect is 0.2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, Estimand, SensConfig, flip_treatment, standardize, validate
from .errors import OddNError, SolverError
from .balancer import BalanceSpec, Method, TargetGroup, solve_entropy, solve_sbw_dual
from .bootstrap import BootstrapEngine, BootstrapPlan, percentile_ci, resample


@dataclass(frozen=True)
class DGPSpec:
    n: int = 10_000
    treat_intercept: float = 0.5
    treat_slopes: tuple[float, float] = (0.07, 0.07)
    treat_noise_sd: float = 0.03
    effect: float = 0.2
    outcome_slopes: tuple[float, float] = (0.5, 0.5)
    outcome_noise_sd: float = 0.2
    prob_clamp: tuple[float, float] = (0.01, 0.99)
    seed: int = 0

    @property
    def true_mu0(self) -> float:
        return 0.0


@dataclass(frozen=True)
class SimRecord:
    sim_id: int
    estimate: float
    ci_lo: float
    ci_hi: float
    covered: bool


@dataclass(frozen=True)
class SimReport:
    reps: int
    coverage: float
    mean_width: float
    records: tuple[SimRecord, ...] = ()
    split_vs_full: dict = field(default_factory=dict)
    failures: int = 0


def generate(spec: DGPSpec, rng: np.random.Generator) -> Dataset:
    """Draw one dataset from the generating process."""
    x = rng.standard_normal((spec.n, 2))
    prob = (
        spec.treat_intercept
        + x @ np.asarray(spec.treat_slopes)
        + spec.treat_noise_sd * rng.standard_normal(spec.n)
    )
    prob = np.clip(prob, *spec.prob_clamp)
    z = (rng.uniform(size=spec.n) < prob).astype(np.int64)
    y = (
        spec.effect * z
        + x @ np.asarray(spec.outcome_slopes)
        + spec.outcome_noise_sd * rng.standard_normal(spec.n)
    )
    return validate(Dataset(y=y, z=z, x=x, names=("x1", "x2")))


def coverage_experiment(
    spec: DGPSpec,
    n_sims: int,
    plan: BootstrapPlan,
    sens: SensConfig,
    method: Method = Method.ENTROPY,
    tol: float = 0.0,
    workers: int = 1,
) -> SimReport:
    """Fraction of simulations whose interval covers the true control mean.

    Each simulation draws a fresh dataset, builds the percentile-bootstrap
    interval for the control potential-outcome mean at sens.lambda_sens,
    and checks coverage of the truth (0).
    """
    roots = np.random.SeedSequence(spec.seed).spawn(n_sims)
    records = []
    failures = 0
    for sim_id in range(n_sims):
        data = generate(spec, np.random.default_rng(roots[sim_id]))
        # the control-side mean reuses the treated-side machinery on
        # flipped labels
        flipped = flip_treatment(data)
        sim_plan = BootstrapPlan(
            b_reps=plan.b_reps,
            seed=plan.seed + sim_id,
            max_redraws=plan.max_redraws,
        )
        try:
            engine = BootstrapEngine(
                flipped, tol, sim_plan, Estimand.MEAN_TREATED, method, workers
            )
            result = engine.interval_at(sens.lambda_sens, sens.alpha)
        except SolverError:
            failures += 1
            continue
        estimate = result.estimate_range.lo  # degenerate at lambda = 1
        records.append(
            SimRecord(
                sim_id=sim_id,
                estimate=estimate,
                ci_lo=result.ci.lo,
                ci_hi=result.ci.hi,
                covered=result.ci.contains(spec.true_mu0),
            )
        )
    if not records:
        raise SolverError("every simulation replicate failed")
    coverage = float(np.mean([r.covered for r in records]))
    width = float(np.mean([r.ci_hi - r.ci_lo for r in records]))
    return SimReport(
        reps=len(records),
        coverage=coverage,
        mean_width=width,
        records=tuple(records),
        failures=failures,
    )


def _solve_mu0_weight_function(data: Dataset, method: Method, tol: float):
    """Fit control-reweighting on one sample; return a reusable weight rule.

    The returned closure evaluates the fitted weight function on any
    dataset by reapplying the training sample's standardization and dual
    coefficients, then returns the Hajek estimate of the control mean.
    """
    flipped = flip_treatment(data)
    ds_std, scaling = standardize(flipped)
    spec = BalanceSpec(tol=tol, target_group=TargetGroup.TREATED_TO_FULL)
    solver = solve_sbw_dual if method is Method.SBW_DUAL else solve_entropy
    fit = solver(ds_std, spec)

    def evaluate(other: Dataset) -> tuple[float, int]:
        controls = other.z == 0
        x_std = (other.x[controls] - scaling.mean) / scaling.sd
        x_std[:, scaling.constant] = 0.0
        if method is Method.SBW_DUAL:
            raw = np.maximum(
                np.column_stack([np.ones(x_std.shape[0]), x_std]) @ fit.beta, 0.0
            )
        else:
            expo = x_std @ fit.beta[1:]
            raw = np.exp(expo - expo.max())
        total = raw.sum()
        if total <= 0:
            raise SolverError("evaluated weight function vanished")
        return float(raw @ other.y[controls]) / total, int(controls.sum())

    return evaluate


def split_compare(
    spec: DGPSpec,
    plan: BootstrapPlan,
    method: Method = Method.ENTROPY,
    tol: float = 0.0,
) -> SimReport:
    """Bootstrap distribution of the control-mean estimate, full vs. split.

    The split procedure halves the data, bootstraps each half, estimates
    the weight function on one half's bootstrap sample and evaluates it on
    the other, then averages the two estimates with weights proportional
    to the evaluation samples' control counts.
    """
    if spec.n % 2 != 0:
        raise OddNError("sample splitting needs an even n")
    root = np.random.SeedSequence(spec.seed)
    data_seed, full_seed, split_seed = root.spawn(3)
    data = generate(spec, np.random.default_rng(data_seed))

    full_estimates = []
    for child in full_seed.spawn(plan.b_reps):
        rng = np.random.default_rng(child)
        sample, _ = resample(data, rng, plan.max_redraws)
        evaluate = _solve_mu0_weight_function(sample, method, tol)
        full_estimates.append(evaluate(sample)[0])

    half = spec.n // 2
    first = data.take(np.arange(half))
    second = data.take(np.arange(half, spec.n))
    split_estimates = []
    for child in split_seed.spawn(plan.b_reps):
        rng = np.random.default_rng(child)
        boot1, _ = resample(first, rng, plan.max_redraws)
        boot2, _ = resample(second, rng, plan.max_redraws)
        est_a, count_a = _solve_mu0_weight_function(boot1, method, tol)(boot2)
        est_b, count_b = _solve_mu0_weight_function(boot2, method, tol)(boot1)
        split_estimates.append(
            (count_a * est_a + count_b * est_b) / (count_a + count_b)
        )

    full = np.asarray(full_estimates)
    split = np.asarray(split_estimates)
    deciles = np.arange(0.1, 1.0, 0.1)
    summary = {
        "full_mean": float(full.mean()),
        "full_sd": float(full.std(ddof=1)),
        "full_deciles": np.quantile(full, deciles).tolist(),
        "split_mean": float(split.mean()),
        "split_sd": float(split.std(ddof=1)),
        "split_deciles": np.quantile(split, deciles).tolist(),
        "full_estimates": full.tolist(),
        "split_estimates": split.tolist(),
    }
    ci = percentile_ci(full, 0.05)
    return SimReport(
        reps=plan.b_reps,
        coverage=float(ci.contains(spec.true_mu0)),
        mean_width=ci.width,
        split_vs_full=summary,
    )
