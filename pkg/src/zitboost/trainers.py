"""Training loops for Tweedie and zero-inflated Tweedie boosted trees.

Three families share one engine:

``tweedie``
    one ensemble for ``log(mu)``;
``zitw_s1``
    two ensembles, one for ``log(mu)`` and one for ``logit(q)``, grown
    alternately;
``zitw_s2``
    one ensemble for ``log(mu)`` with ``q = 1 / (1 + mu**gamma)``.

Between trees the dispersion ``phi`` (and ``gamma`` for ``zitw_s2``) is
refreshed by a one-dimensional golden-section search.  ``phi`` is fitted
by maximum likelihood: the mean unit deviance alone is strictly decreasing
in ``phi`` and has no interior minimum.  ``gamma`` minimizes the mean
unit deviance, which for ``gamma`` coincides with the likelihood.

Every tree step is guarded: if adding the tree would raise the training
loss, its leaves are halved until it does not (or the tree is dropped),
so the logged training loss never increases.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.special import expit

from . import losses
from .engine import (BoostConfig, Dataset, DecisionTree, FeatureBuilder, OrderedTsEncoder,
                     PresortedMatrix, feature_importance, fit_tree, predict_score)
from .metrics import mean_deviance, unit_deviance
from .tweedie import SeriesConvergenceError, log_normalizer, zitw_logpdf

FAMILIES = ("tweedie", "zitw_s1", "zitw_s2")
MODEL_FORMAT = "zitboost-model"
MODEL_VERSION = 1

PHI_BOUNDS = (1e-4, 1e4)
GAMMA_BOUNDS = (0.01, 10.0)
SEARCH_RTOL = 1e-6
#: Maximum number of step halvings before a tree is dropped.
MAX_HALVINGS = 40
#: Tree steps may not push |log(mu)| or |logit(q)| beyond these bounds;
#: without them a leaf holding only zero claims can drive mu to underflow.
LOG_MU_BOUND = math.log(1e8)
LOGIT_Q_BOUND = math.log(1e12)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# --------------------------------------------------------------------------
# One-dimensional search
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchResult:
    """Outcome of a bounded scalar minimization."""

    x: float
    fun: float
    n_evals: int
    at_boundary: bool
    flat: bool


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float,
                   max_iter: int = 200) -> SearchResult:
    """Minimize a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``.

    The bounds themselves are also evaluated, so a monotone objective
    returns the better endpoint and reports ``at_boundary``.  ``flat`` is
    set when every evaluation returned the same value up to rounding.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    seen = []

    def ev(x):
        v = f(x)
        v = math.inf if math.isnan(v) else v
        seen.append((v, x))
        return v

    ev(lo)
    ev(hi)
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = ev(d)
        it += 1
    finite = [v for v, _ in seen if math.isfinite(v)]
    if not finite:
        raise FloatingPointError("objective is not finite anywhere on the search interval")
    best_v, best_x = min(seen, key=lambda t: (t[0], t[1]))
    scale = max(1.0, max(abs(v) for v in finite))
    flat = len(finite) == len(seen) and max(finite) - min(finite) <= 1e-12 * scale
    at_boundary = best_x in (lo, hi) or min(best_x - lo, hi - best_x) <= tol
    return SearchResult(x=best_x, fun=best_v, n_evals=len(seen), at_boundary=at_boundary,
                        flat=flat)


class PhiObjective:
    """Mean negative log-likelihood of a zero-inflated Tweedie fit as a
    function of ``phi``, with ``mu`` and ``q`` held fixed.

    Terms that do not involve ``phi`` are precomputed, so one evaluation
    costs one pass of the normalizing series over the positive rows.
    """

    def __init__(self, y, mu, q, p):
        y = np.asarray(y, dtype=np.float64)
        mu, q = np.broadcast_arrays(np.asarray(mu, dtype=np.float64),
                                    np.asarray(q, dtype=np.float64))
        if mu.shape != y.shape:
            mu = np.broadcast_to(mu, y.shape)
            q = np.broadcast_to(q, y.shape)
        self.n = y.size
        self.p = p
        zero = y == 0
        self.y_pos = np.ascontiguousarray(y[~zero])
        mp = mu[~zero]
        self.b_pos = math.fsum(self.y_pos * mp ** (1.0 - p) / (1.0 - p)
                               - mp ** (2.0 - p) / (2.0 - p))
        with np.errstate(divide="ignore"):
            self.log1mq_pos = math.fsum(np.log1p(-q[~zero]))
            self.logq_zero = np.log(q[zero])
            self.log1mq_zero = np.log1p(-q[zero])
        self.c_zero = mu[zero] ** (2.0 - p) / (2.0 - p)

    def __call__(self, phi: float) -> float:
        total = -self.log1mq_pos - self.b_pos / phi
        if self.c_zero.size:
            total -= np.sum(np.logaddexp(self.logq_zero, self.log1mq_zero - self.c_zero / phi))
        if self.y_pos.size:
            try:
                total -= np.sum(log_normalizer(self.y_pos, phi, self.p))
            except SeriesConvergenceError:
                return math.inf
        return float(total) / self.n


def minimize_phi(y, mu, q, p, bounds=PHI_BOUNDS, rtol=SEARCH_RTOL) -> SearchResult:
    """Maximum-likelihood dispersion with ``mu`` and ``q`` fixed.

    Golden-section search on ``log(phi)``; a width of ``rtol`` in
    ``log(phi)`` is a relative tolerance of ``rtol`` on ``phi``.  The
    returned ``x`` is ``phi`` itself.
    """
    obj = PhiObjective(y, mu, q, p)
    lo, hi = bounds

    def to_phi(t):
        # exp(log(b)) may round past b; keep phi inside the bounds
        return min(max(math.exp(t), lo), hi)

    res = golden_section(lambda t: obj(to_phi(t)), math.log(lo), math.log(hi), rtol)
    return SearchResult(x=to_phi(res.x), fun=res.fun, n_evals=res.n_evals,
                        at_boundary=res.at_boundary, flat=res.flat)


class GammaObjective:
    """Mean unit deviance under ``q = 1 / (1 + mu**gamma)`` as a function
    of ``gamma``, with ``mu`` and ``phi`` fixed."""

    def __init__(self, y, mu, phi, p):
        y = np.asarray(y, dtype=np.float64)
        mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), y.shape)
        self.n = y.size
        zero = y == 0
        self.log_mu_zero = np.log(mu[zero])
        self.log_mu_pos = np.log(mu[~zero])
        self.delta_zero = mu[zero] ** (2.0 - p) / (phi * (2.0 - p))
        # gamma-free part: the q = 0 deviance of the positive rows
        self.base = math.fsum(np.atleast_1d(unit_deviance(y[~zero], mu[~zero], phi, p, 0.0)))

    def __call__(self, gamma: float) -> float:
        t_zero = gamma * self.log_mu_zero
        t_pos = gamma * self.log_mu_pos
        # ln q = -softplus(t), ln(1 - q) = -softplus(-t)
        zero_part = -2.0 * np.logaddexp(-np.logaddexp(0.0, t_zero),
                                        -np.logaddexp(0.0, -t_zero) - self.delta_zero)
        pos_part = 2.0 * np.logaddexp(0.0, -t_pos)
        return float(np.sum(zero_part) + np.sum(pos_part) + self.base) / self.n


def minimize_gamma(y, mu, phi, p, bounds=GAMMA_BOUNDS, rtol=SEARCH_RTOL) -> SearchResult:
    """Golden-section minimization of the mean deviance over ``gamma``."""
    obj = GammaObjective(y, mu, phi, p)
    return golden_section(obj, bounds[0], bounds[1], rtol * bounds[1])


# --------------------------------------------------------------------------
# Model container
# --------------------------------------------------------------------------

@dataclass
class Prediction:
    mu: np.ndarray
    q: np.ndarray
    expected: np.ndarray


@dataclass
class BoostedModel:
    """A trained ensemble with its distributional parameters.

    ``metadata`` is free-form JSON-compatible information supplied by the
    caller (e.g. the column schema used by the command-line tools).
    """

    family: str
    mean_trees: List[DecisionTree]
    phi: float
    p: float
    config: BoostConfig
    features: FeatureBuilder
    prob_trees: Optional[List[DecisionTree]] = None
    gamma_infl: Optional[float] = None
    base_score: float = 0.0
    log: List[Dict[str, float]] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if (self.family == "zitw_s1") != (self.prob_trees is not None):
            raise ValueError("only zitw_s1 models carry probability trees")
        if (self.family == "zitw_s2") != (self.gamma_infl is not None):
            raise ValueError("only zitw_s2 models carry gamma")

    # -- prediction -------------------------------------------------------

    def design_matrix(self, dataset: Dataset) -> np.ndarray:
        return self.features.transform(dataset)

    def predict_matrix(self, X, exposure) -> Prediction:
        lr = self.config.learning_rate
        log_mu = (np.log(np.asarray(exposure, dtype=np.float64)) + self.base_score
                  + predict_score(self.mean_trees, lr, X))
        mu = np.exp(log_mu)
        if self.family == "tweedie":
            q = np.zeros_like(mu)
        elif self.family == "zitw_s1":
            q = expit(predict_score(self.prob_trees, lr, X))
        else:
            q = losses.implied_q(log_mu, self.gamma_infl)
        return Prediction(mu=mu, q=q, expected=(1.0 - q) * mu)

    def predict(self, dataset: Dataset) -> Prediction:
        return self.predict_matrix(self.design_matrix(dataset), dataset.exposure)

    def loglik(self, dataset: Dataset) -> np.ndarray:
        """Per-row log-likelihood, including the normalizing term."""
        if dataset.target is None:
            raise ValueError("log-likelihood needs a target")
        pr = self.predict(dataset)
        return zitw_logpdf(dataset.target, pr.mu, self.phi, self.p, pr.q)

    def deviance(self, dataset: Dataset) -> float:
        pr = self.predict(dataset)
        return mean_deviance(dataset.target, pr.mu, self.phi, self.p, pr.q)

    def importance(self, by_column: bool = True) -> Dict[str, float]:
        trees = list(self.mean_trees) + list(self.prob_trees or [])
        group = self.features.source_columns if by_column else None
        return feature_importance(trees, self.features.feature_names, group)

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "family": self.family,
            "p": self.p,
            "phi": self.phi,
            "gamma_infl": self.gamma_infl,
            "base_score": self.base_score,
            "config": self.config.to_dict(),
            "features": {
                "numeric": self.features.numeric_names,
                "categorical": self.features.categorical_names,
                "encoder": self.features.encoder.to_dict(),
            },
            "mean_trees": [t.to_dict() for t in self.mean_trees],
            "prob_trees": None if self.prob_trees is None
            else [t.to_dict() for t in self.prob_trees],
            "log": self.log,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d) -> "BoostedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a zitboost model document")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        feats = d["features"]
        builder = FeatureBuilder(feats["numeric"], feats["categorical"],
                                 OrderedTsEncoder.from_dict(feats["encoder"]))
        return cls(
            family=d["family"],
            mean_trees=[DecisionTree.from_dict(t) for t in d["mean_trees"]],
            prob_trees=None if d["prob_trees"] is None
            else [DecisionTree.from_dict(t) for t in d["prob_trees"]],
            phi=float(d["phi"]),
            p=float(d["p"]),
            gamma_infl=None if d["gamma_infl"] is None else float(d["gamma_infl"]),
            base_score=float(d["base_score"]),
            config=BoostConfig(**d["config"]),
            features=builder,
            log=list(d["log"]),
            metadata=dict(d["metadata"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "BoostedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

@dataclass
class _State:
    """Mutable training state shared by the three loops."""

    y: np.ndarray
    log_e: np.ndarray
    w_mean: np.ndarray
    w_prob: Optional[np.ndarray]
    phi: float
    p: float
    gamma: Optional[float]

    def score_state(self, w_mean=None, w_prob=None):
        return losses.ScoreState(
            w_mean=self.w_mean if w_mean is None else w_mean,
            exposure=np.exp(self.log_e),
            w_prob=self.w_prob if w_prob is None else w_prob,
        )

    @property
    def log_mu(self):
        return self.log_e + self.w_mean

    def q(self, family):
        if family == "tweedie":
            return np.zeros_like(self.y)
        if family == "zitw_s1":
            return expit(self.w_prob)
        return losses.implied_q(self.log_mu, self.gamma)


def _loss(family, st: _State, w_mean=None, w_prob=None, full=False):
    s = st.score_state(w_mean, w_prob)
    if family == "tweedie":
        v = losses.tweedie_loss(st.y, s, st.phi, st.p, full=full)
    elif family == "zitw_s1":
        v = losses.s1_loss(st.y, s, st.phi, st.p, full=full)
    else:
        v = losses.s2_loss(st.y, s, st.phi, st.p, st.gamma, full=full)
    return math.fsum(v) / st.y.size


def _bounded_loss(family, st: _State, score, bound, **kw):
    if np.max(np.abs(score)) > bound:
        return math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss(family, st, **kw)


def _full_nll(family, st: _State) -> float:
    q = st.q(family)
    return -math.fsum(zitw_logpdf(st.y, np.exp(st.log_mu), st.phi, st.p, q)) / st.y.size


def _scaled(tree: DecisionTree, scale: float) -> DecisionTree:
    return DecisionTree(tree.feature, tree.threshold, tree.left, tree.right,
                        tree.value * scale, tree.gain, tree.n_samples, tree.max_depth)


def _guarded_step(tree: DecisionTree, leaves, lr, before: float, after_fn):
    """Halve the tree's leaf values until the loss does not increase.

    ``after_fn`` maps a score increment to the training loss.  Returns the
    accepted tree, its score increment, the loss after the step and the
    number of halvings; a tree that never helps becomes all-zero.
    """
    scale = 1.0
    for halvings in range(MAX_HALVINGS + 1):
        cand = tree if scale == 1.0 else _scaled(tree, scale)
        step = lr * cand.value[leaves]
        after = after_fn(step)
        if after <= before:
            return cand, step, after, halvings
        scale *= 0.5
    cand = _scaled(tree, 0.0)
    return cand, np.zeros(leaves.shape), before, MAX_HALVINGS + 1


def _check_finite(family, iteration, value):
    if not math.isfinite(value):
        raise FloatingPointError(f"{family}: non-finite training loss at iteration {iteration}")


def _update_phi(family, st: _State):
    res = minimize_phi(st.y, np.exp(st.log_mu), st.q(family), st.p)
    current = PhiObjective(st.y, np.exp(st.log_mu), st.q(family), st.p)(st.phi)
    if res.fun <= current:
        st.phi = res.x
    return res


def _update_gamma(st: _State):
    res = minimize_gamma(st.y, np.exp(st.log_mu), st.phi, st.p)
    current = GammaObjective(st.y, np.exp(st.log_mu), st.phi, st.p)(st.gamma)
    if res.fun <= current:
        st.gamma = res.x
    return res


def initial_score(dataset: Dataset, how: str) -> float:
    """Starting value of the mean score.

    ``"mean"`` uses ``log(sum(y) / sum(E))``, the constant claim rate, and
    falls back to 0 when there are no claims; ``"zero"`` starts at 0.
    """
    if how == "zero":
        return 0.0
    total = math.fsum(dataset.target)
    if total == 0.0:
        return 0.0
    return math.log(total / math.fsum(dataset.exposure))


def _train(family: str, dataset: Dataset, config: BoostConfig, p: float, seed: int,
           valid: Optional[Dataset], gamma_fixed: Optional[float],
           gamma_init: float) -> BoostedModel:
    if dataset.target is None:
        raise ValueError("training data needs a target")
    if not 1.0 < p < 2.0:
        raise ValueError("p must lie in (1, 2)")
    if dataset.n_rows == 0:
        raise ValueError("cannot train on an empty dataset")
    builder = FeatureBuilder(sorted(dataset.numeric), sorted(dataset.categorical),
                             OrderedTsEncoder(seed=seed))
    X = builder.fit_transform(dataset)
    data = PresortedMatrix(X)
    n = dataset.n_rows
    st = _State(
        y=dataset.target, log_e=np.log(dataset.exposure), w_mean=np.zeros(n),
        w_prob=np.zeros(n) if family == "zitw_s1" else None, phi=1.0, p=p,
        gamma=(gamma_fixed if gamma_fixed is not None else gamma_init)
        if family == "zitw_s2" else None,
    )
    base_score = initial_score(dataset, config.init_score)
    st.w_mean = np.full(n, base_score)
    lr = config.learning_rate
    n_rounds = config.n_trees // 2 if family == "zitw_s1" else config.n_trees
    if n_rounds < 1:
        raise ValueError("the tree budget leaves no boosting rounds")
    mean_trees: List[DecisionTree] = []
    prob_trees: Optional[List[DecisionTree]] = [] if family == "zitw_s1" else None
    log: List[Dict[str, float]] = []

    if valid is not None:
        X_valid = builder.transform(valid)
    best = (math.inf, 0, st.phi, st.gamma)
    stale = 0

    def record(it, extra):
        q = st.q(family)
        row = {"iteration": it, "nll": _full_nll(family, st),
               "deviance": mean_deviance(st.y, np.exp(st.log_mu), st.phi, st.p, q),
               "phi": st.phi}
        if st.gamma is not None:
            row["gamma"] = st.gamma
        row.update(extra)
        if valid is not None:
            model = _assemble(family, mean_trees, prob_trees, st, config, builder, log,
                              base_score)
            pr = model.predict_matrix(X_valid, valid.exposure)
            row["valid_deviance"] = mean_deviance(valid.target, pr.mu, st.phi, st.p, pr.q)
        log.append(row)
        return row

    record(0, {"mean_halvings": 0})
    for it in range(1, n_rounds + 1):
        extra = {}
        # -- mean ensemble --------------------------------------------------
        s = st.score_state()
        if family == "tweedie":
            g, h = losses.tweedie_grad_hess(st.y, s, st.phi, st.p)
        elif family == "zitw_s1":
            g, h = losses.s1_grad_hess_mean(st.y, s, st.phi, st.p)
        else:
            g, h = losses.s2_grad_hess(st.y, s, st.phi, st.p, st.gamma)
        tree = fit_tree(g, h, data, config)
        before = _loss(family, st)
        _check_finite(family, it, before)
        tree, step, after, k = _guarded_step(
            tree, tree.apply(X), lr, before,
            lambda d: _bounded_loss(family, st, st.log_e + st.w_mean + d, LOG_MU_BOUND,
                                    w_mean=st.w_mean + d))
        _check_finite(family, it, after)
        st.w_mean = st.w_mean + step
        mean_trees.append(tree)
        extra["mean_halvings"] = k
        # -- inflation ensemble (scenario 1) --------------------------------
        if family == "zitw_s1":
            g, h = losses.s1_grad_hess_prob(st.y, st.score_state(), st.phi, st.p)
            tree = fit_tree(g, h, data, config)
            tree, step, after, k = _guarded_step(
                tree, tree.apply(X), lr, after,
                lambda d: _bounded_loss(family, st, st.w_prob + d, LOGIT_Q_BOUND,
                                        w_prob=st.w_prob + d))
            st.w_prob = st.w_prob + step
            prob_trees.append(tree)
            extra["prob_halvings"] = k
        # -- distribution parameters ----------------------------------------
        if it % config.param_update_every == 0:
            res = _update_phi(family, st)
            extra["phi_at_boundary"] = int(res.at_boundary)
            if family == "zitw_s2" and gamma_fixed is None:
                res = _update_gamma(st)
                extra["gamma_at_boundary"] = int(res.at_boundary)
        row = record(it, extra)
        _check_finite(family, it, row["nll"])
        if valid is not None and config.early_stopping_rounds is not None:
            if row["valid_deviance"] < best[0]:
                best = (row["valid_deviance"], it, st.phi, st.gamma)
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stopping_rounds:
                    break

    if valid is not None and config.early_stopping_rounds is not None and best[1] > 0:
        keep = best[1]
        del mean_trees[keep:]
        if prob_trees is not None:
            del prob_trees[keep:]
        st.phi, st.gamma = best[2], best[3]
        del log[keep + 1:]
    return _assemble(family, mean_trees, prob_trees, st, config, builder, log, base_score)


def _assemble(family, mean_trees, prob_trees, st, config, builder, log, base_score):
    return BoostedModel(
        family=family, mean_trees=list(mean_trees),
        prob_trees=None if prob_trees is None else list(prob_trees),
        phi=st.phi, p=st.p, gamma_infl=st.gamma, base_score=base_score, config=config,
        features=builder, log=log,
    )


def train_twbt(dataset: Dataset, config: BoostConfig, p: float = 1.5, seed: int = 0,
               valid: Optional[Dataset] = None) -> BoostedModel:
    """Tweedie boosted trees with ``phi`` refreshed between trees."""
    return _train("tweedie", dataset, config, p, seed, valid, None, 1.0)


def train_zitwbt1(dataset: Dataset, config: BoostConfig, p: float = 1.5, seed: int = 0,
                  valid: Optional[Dataset] = None) -> BoostedModel:
    """Zero-inflated Tweedie with separate mean and inflation ensembles.

    The budget ``config.n_trees`` is shared: ``n_trees // 2`` rounds each
    grow one mean tree and then one inflation tree, the latter using the
    mean score already advanced by the round's mean tree.
    """
    return _train("zitw_s1", dataset, config, p, seed, valid, None, 1.0)


def train_zitwbt2(dataset: Dataset, config: BoostConfig, p: float = 1.5, seed: int = 0,
                  valid: Optional[Dataset] = None, gamma_fixed: Optional[float] = None,
                  gamma_init: float = 1.0) -> BoostedModel:
    """Zero-inflated Tweedie with ``q = 1 / (1 + mu**gamma)``.

    ``gamma`` starts at ``gamma_init`` and is re-estimated after every
    ``phi`` update unless ``gamma_fixed`` pins it.
    """
    if gamma_fixed is not None and not gamma_fixed > 0:
        raise ValueError("gamma_fixed must be positive")
    return _train("zitw_s2", dataset, config, p, seed, valid, gamma_fixed, gamma_init)


TRAINERS = {"tweedie": train_twbt, "zitw_s1": train_zitwbt1, "zitw_s2": train_zitwbt2}


def train(family: str, dataset: Dataset, config: BoostConfig, p: float = 1.5, seed: int = 0,
          valid: Optional[Dataset] = None) -> BoostedModel:
    """Dispatch to the trainer for ``family``."""
    if family not in TRAINERS:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return TRAINERS[family](dataset, config, p=p, seed=seed, valid=valid)


def predict(model: BoostedModel, dataset: Dataset) -> Prediction:
    """``(mu, q, expected)`` for every row of ``dataset``."""
    return model.predict(dataset)
