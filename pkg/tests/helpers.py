"""Helpers shared by the test modules: finite differences, random loss
parameters and a small simulated dataset."""
import numpy as np

from zitboost.config import SimSpec
from zitboost.engine import Dataset
from zitboost.simulate import simulate


def central_diff(f, x, h=1e-3):
    """Five-point centred derivative of a vectorized ``f`` at ``x``."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def rel_err(approx, exact, floor=1e-4):
    return np.abs(approx - exact) / np.maximum(np.abs(exact), floor)


def loss_draws(rng, n, positive):
    """Random (y, log_mu, phi, p, w_prob, gamma) with one target branch."""
    log_mu = rng.uniform(-3.0, 3.0, n)
    phi = np.exp(rng.uniform(np.log(0.2), np.log(5.0), n))
    p = rng.uniform(1.1, 1.9, n)
    if positive:
        y = np.exp(log_mu) * rng.gamma(2.0, 0.5, n) + 1e-3
    else:
        y = np.zeros(n)
    w_prob = rng.uniform(-4.0, 4.0, n)
    gamma = rng.uniform(0.1, 3.0, n)
    return y, log_mu, phi, p, w_prob, gamma


def make_dataset(n=600, seed=7, gamma=1.5, phi=1.0, categorical=True):
    """Zero-inflated Tweedie rows with two informative numeric features,
    one noise feature and (optionally) a categorical feature."""
    features = [
        {"name": "x1", "dist": "uniform", "low": -1, "high": 1},
        {"name": "x2", "dist": "uniform", "low": -1, "high": 1},
        {"name": "x3", "dist": "normal", "mean": 0, "sd": 1},
    ]
    mu = "exp(0.7 * x1 - 0.5 * x2)"
    if categorical:
        features.append({"name": "region", "dist": "categorical", "levels": ["a", "b", "c"]})
        mu = "exp(0.7 * x1 - 0.5 * x2 + 0.4 * (region == 'b'))"
    spec = SimSpec(n=n, seed=seed, mu=mu, features=features, phi=phi, p=1.5, gamma=gamma,
                   exposure={"dist": "uniform", "low": 0.5, "high": 1.0})
    cols, truth = simulate(spec)
    numeric = {k: cols[k] for k in ("x1", "x2", "x3")}
    categorical_cols = {"region": cols["region"]} if categorical else {}
    data = Dataset(numeric=numeric, categorical=categorical_cols, exposure=cols["exposure"],
                   target=cols["y"])
    return data, truth




def brute_force_root_split(X, g, h, lam, min_leaf=1):
    """Best root split by enumerating every feature and every midpoint.

    Sums use ``math.fsum`` over the exact row partition.  Returns
    ``(gain, feature, threshold)``; ``(-inf, -1, nan)`` if no split exists.
    Among equal gains the lowest feature, then the lowest threshold wins.
    """
    import math

    from zitboost.engine import split_gain

    best = (-math.inf, -1, math.nan)
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = lo + 0.5 * (hi - lo)
            thr = lo if thr >= hi else thr
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            gain = split_gain(math.fsum(g[left]), math.fsum(h[left]),
                              math.fsum(g[~left]), math.fsum(h[~left]), lam)
            if gain > best[0]:
                best = (gain, f, thr)
    return best


def micro_instance(rng):
    """At most 8 rows and 3 features, with occasional tied feature values."""
    n = int(rng.integers(2, 9))
    k = int(rng.integers(1, 4))
    X = rng.integers(0, 5, size=(n, k)).astype(float) if rng.random() < 0.5 \
        else rng.normal(size=(n, k))
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 2.0, size=n)
    lam = float(rng.choice([0.0, 0.5, 3.0]))
    return X, g, h, lam
