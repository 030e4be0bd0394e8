import numpy as np
import pytest

from balsens import (
    AmplificationResult,
    BalanceSpec,
    Dataset,
    Estimand,
    TargetGroup,
    Verdict,
    amplify,
    classify,
    contour,
    decompose,
    error_bounds,
    oracle_weights,
    solve_entropy,
    validate,
)
from balsens.amplification import Benchmark, _hull_polygon
from balsens.balancer import hajek_mean
from balsens.errors import DomainError, InfeasibleError, NoBenchmarksError


def test_oracle_weights_two_unit_example():
    fit = oracle_weights(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 0.75)
    np.testing.assert_allclose(
        fit.oracle_gamma / fit.oracle_gamma.sum(), [0.25, 0.75], atol=1e-10
    )
    assert fit.achieved_target == pytest.approx(0.75, abs=1e-10)


def test_oracle_weights_zero_tilt_identity(rng):
    y = rng.normal(size=10)
    g = rng.uniform(0.5, 3.0, size=10)
    fit = oracle_weights(y, g, hajek_mean(y, g))
    assert fit.tilt == 0.0
    np.testing.assert_array_equal(fit.oracle_gamma, g)


def test_oracle_weights_preserves_total_mass(rng):
    y = rng.normal(size=12)
    g = rng.uniform(0.5, 3.0, size=12)
    target = float(np.quantile(y, 0.7))
    fit = oracle_weights(y, g, target)
    assert fit.oracle_gamma.sum() == pytest.approx(g.sum(), rel=1e-12)
    assert hajek_mean(y, fit.oracle_gamma) == pytest.approx(target, abs=1e-9)


def test_oracle_weights_infeasible_target(rng):
    y = rng.normal(size=8)
    g = np.ones(8)
    with pytest.raises(InfeasibleError):
        oracle_weights(y, g, y.max() + 1.0)
    with pytest.raises(DomainError):
        oracle_weights(y, np.zeros(8), float(y.mean()))


def test_oracle_weights_kl_optimal(rng):
    # among all 2-parameter tilts g * exp(t1 y + t2 y^2) hitting the same
    # target, the fitted 1-parameter tilt must have the smallest KL
    # divergence from the base weights (it is the claimed minimizer)
    from scipy import optimize

    y = rng.normal(size=15)
    g = rng.uniform(0.5, 2.0, size=15)
    target = float(np.quantile(y, 0.65))
    fit = oracle_weights(y, g, target)

    def kl(w):
        p = w / w.sum()
        q = g / g.sum()
        return float(p @ np.log(p / q))

    fitted_kl = kl(fit.oracle_gamma)
    for t2 in np.linspace(-0.4, 0.4, 9):
        if t2 == 0.0:
            continue

        def gap(t1, t2=t2):
            w = g * np.exp(t1 * y + t2 * y ** 2)
            return hajek_mean(y, w) - target

        try:
            t1 = optimize.brentq(gap, -20.0, 20.0)
        except ValueError:
            continue
        alt = g * np.exp(t1 * y + t2 * y ** 2)
        assert fitted_kl <= kl(alt) + 1e-10


def test_error_bounds_two_unit_example():
    # extrema [1/3, 2/3] around point estimate 1/2 -> bounds [-1/6, +1/6]
    d = validate(Dataset(y=[0.0, 1.0, 5.0], z=[1, 1, 0],
                         x=[[0.0], [1.0], [0.5]], names=("a",)))
    bounds = error_bounds(d, np.array([2.0, 2.0]), 2.0, Estimand.MEAN_TREATED)
    assert bounds.lo == pytest.approx(-1.0 / 6.0, abs=1e-12)
    assert bounds.hi == pytest.approx(1.0 / 6.0, abs=1e-12)


def identity_instance(rng, b_u=0.8, b_w=1.3, n=60):
    """Dataset where Y is exactly linear in the projection/residual split.

    Column u is constant within each arm (so it equals its own treatment
    projection); column w has equal arm means (so its projection is a
    constant and its residual carries all the variation).
    """
    z = np.array([1] * (n // 2) + [0] * (n // 2))
    u = np.where(z == 1, 1.0, -1.0)
    w_half = rng.standard_normal(n // 2)
    w_half = w_half - w_half.mean()
    w = np.concatenate([w_half, rng.permutation(w_half)])
    y = b_u * u + b_w * w
    d = validate(Dataset(y=y, z=z, x=np.column_stack([u, w]),
                         names=("u", "w")))
    return d, u, w


def test_amplification_identity(rng):
    b_u, b_w = 0.8, 1.3
    d, u, w = identity_instance(rng, b_u, b_w)
    # balance exactly on w only, leaving u unbalanced
    d_w = validate(Dataset(y=d.y, z=d.z, x=w.reshape(-1, 1), names=("w",)))
    fit = solve_entropy(d_w, BalanceSpec(tol=0.0))
    treated = d.z == 1

    mu_hat = hajek_mean(d.y[treated], fit.gamma)
    mu_oracle = float(d.y.mean())  # weights balancing Y(1) exactly hit this
    delta_u = float(u.mean()) - hajek_mean(u[treated], fit.gamma)
    assert abs((mu_oracle - mu_hat) - b_u * delta_u) <= 1e-8

    # the same delta_u shows up as the u benchmark's signed imbalance;
    # u is constant within arms, so use the marginal outcome fit to avoid
    # the (intended) rank-deficiency error of the joint regression
    dec = decompose(d, fit.gamma, Estimand.MEAN_TREATED,
                    joint_outcome_fit=False)
    bench_u = dec.benchmarks[0]
    assert bench_u.delta_post_signed == pytest.approx(-delta_u, abs=1e-9)
    np.testing.assert_allclose(dec.w[:, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(dec.u[:, 0], u, atol=1e-12)


def test_decompose_benchmarks_linear_outcome(rng):
    n = 200
    x = rng.standard_normal((n, 2))
    z = (rng.uniform(size=n) < 0.5).astype(int)
    z[0], z[1] = 1, 0
    y = 2.0 * x[:, 0] - 1.0 * x[:, 1]
    d = validate(Dataset(y=y, z=z, x=x, names=("a", "b")))
    dec = decompose(d, np.ones(int(z.sum())), Estimand.MEAN_TREATED)
    assert dec.benchmarks[0].beta_hat == pytest.approx(2.0, abs=1e-8)
    assert dec.benchmarks[1].beta_hat == pytest.approx(-1.0, abs=1e-8)
    # uniform weights: delta_post equals delta_pre
    for b in dec.benchmarks:
        assert b.delta_post == pytest.approx(b.delta_pre, abs=1e-12)
    np.testing.assert_allclose(dec.u + dec.w, x, atol=1e-12)


def test_decompose_marginal_fit(rng):
    n = 150
    x = rng.standard_normal((n, 2))
    z = (rng.uniform(size=n) < 0.5).astype(int)
    z[0], z[1] = 1, 0
    y = x[:, 0] + rng.normal(size=n) * 0.1
    d = validate(Dataset(y=y, z=z, x=x, names=("a", "b")))
    dec = decompose(d, np.ones(int(z.sum())), Estimand.MEAN_TREATED,
                    joint_outcome_fit=False)
    assert dec.benchmarks[0].beta_hat == pytest.approx(1.0, abs=0.1)


def test_contour_product_identity():
    res = contour(3.0, grid=100, delta_range=(0.01, 10.0))
    products = res.curve[:, 0] * res.curve[:, 1]
    np.testing.assert_allclose(products, 3.0, atol=1e-10)


def test_contour_known_pairs_on_curve():
    # (1.5, 2) and (1, 3) both satisfy delta * beta = 3
    res = contour(3.0, grid=2, delta_range=(1.0, 1.5))
    np.testing.assert_allclose(res.curve, [[1.0, 3.0], [1.5, 2.0]], atol=1e-12)


def test_contour_zero_error_flag():
    res = contour(0.0)
    assert res.no_confounding_needed and res.curve.size == 0


def test_contour_validation():
    with pytest.raises(DomainError):
        contour(-1.0)
    with pytest.raises(DomainError):
        contour(1.0, delta_range=(2.0, 1.0))


def bench(name, pre, post, beta):
    return Benchmark(name=name, delta_pre=pre, delta_post=post, beta_hat=beta,
                     delta_pre_signed=pre, delta_post_signed=post)


def make_result(e, benchmarks, lo=None, hi=None):
    c = contour(e, grid=200, benchmarks=benchmarks,
                delta_range=(lo, hi) if lo else None)
    return AmplificationResult(
        error_bound=e, curve=c.curve, benchmarks=benchmarks, hull=c.hull,
        lambda_sens=2.0,
    )


def test_classify_sensitive():
    # strong benchmarks, tiny error bound: the curve cuts through the hull
    marks = (bench("a", 2.0, 1.5, 3.0), bench("b", 1.0, 0.8, 2.0))
    assert classify(make_result(0.1, marks)) is Verdict.SENSITIVE


def test_classify_robust():
    # error bound above the worst-case rectangle corner
    marks = (bench("a", 0.5, 0.3, 1.0), bench("b", 0.2, 0.1, 0.5))
    assert classify(make_result(10.0, marks)) is Verdict.ROBUST


def test_classify_ambiguous():
    # bound clears the post-weighting hull but not the pre-weighting corner
    marks = (bench("a", 1.0, 0.1, 1.0),)
    result = make_result(0.5, marks, lo=0.05, hi=2.0)
    assert classify(result) is Verdict.AMBIGUOUS


def test_classify_errors():
    marks = (bench("a", 1.0, 0.5, 1.0),)
    empty_curve = AmplificationResult(
        error_bound=0.0, curve=np.empty((0, 2)), benchmarks=marks,
        hull=np.empty((0, 2)), lambda_sens=1.0, no_confounding_needed=True,
    )
    with pytest.raises(NoBenchmarksError):
        classify(empty_curve)


def test_hull_degenerate_collinear():
    # identical points collapse the hull to a segment with no area
    marks = (bench("a", 0.0, 0.0, 0.0), bench("b", 0.0, 0.0, 0.0))
    assert _hull_polygon(marks).shape[0] == 0


def test_amplify_end_to_end(rng):
    from conftest import make_dataset
    from balsens import solve_sbw_dual, standardize

    d = make_dataset(rng, n=80, d=2, effect=1.0)
    d_std, scaling = standardize(d)
    fit = solve_sbw_dual(d_std, BalanceSpec(tol=0.1))
    result = amplify(d_std, fit.gamma, 1.5, Estimand.MEAN_TREATED,
                     flagged=scaling.constant)
    assert result.error_bound > 0
    assert result.curve.shape[1] == 2
    assert classify(result) in set(Verdict)
