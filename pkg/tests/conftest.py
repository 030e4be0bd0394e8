"""Shared fixtures and independent oracles used across the test suite."""

import numpy as np
import pytest

from balsens import Dataset, validate


def make_dataset(rng, n=24, d=2, effect=1.0):
    """Random dataset with mild confounding; always has both groups."""
    x = rng.standard_normal((n, d))
    logits = 0.5 * x[:, 0]
    p = 1.0 / (1.0 + np.exp(-logits))
    z = (rng.uniform(size=n) < p).astype(int)
    # force both groups nonempty
    z[0], z[1] = 1, 0
    y = effect * z + x @ np.linspace(0.5, 1.0, d) + rng.standard_normal(n)
    return validate(Dataset(y=y, z=z, x=x, names=tuple(f"x{j}" for j in range(d))))


def enumerate_extrema(y, gamma, lam, rule):
    """Brute-force extrema over all 2^n vertices of the confounding box.

    Independent of the Dinkelbach implementation: evaluates the Hajek
    ratio at every vertex r in {1/lam, lam}^n and takes min/max.
    """
    y = np.asarray(y, float)
    gamma = np.asarray(gamma, float)
    n = y.size
    if rule == "inverse_propensity":
        coef, base = gamma - 1.0, np.ones_like(gamma)
    elif rule == "odds":
        coef, base = gamma, np.zeros_like(gamma)
    else:
        raise ValueError(rule)
    # all 2^n vertex assignments as a (2^n, n) matrix
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    r = np.where(bits == 1, lam, 1.0 / lam)
    w = base + r * coef
    denom = w.sum(axis=1)
    if np.any(denom <= 0):
        raise ValueError("non-positive denominator at some vertex")
    vals = w @ y / denom
    return float(vals.min()), float(vals.max())


def box_denominator_ok(gamma, lam, rule):
    """Whether the shifted weight sum stays positive over the whole box."""
    gamma = np.asarray(gamma, float)
    if rule == "inverse_propensity":
        coef, base = gamma - 1.0, np.ones_like(gamma)
    else:
        coef, base = gamma, np.zeros_like(gamma)
    worst = base + np.minimum(coef / lam, coef * lam)
    return worst.sum() > 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
