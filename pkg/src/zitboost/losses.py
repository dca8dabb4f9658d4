"""Negative log-likelihood losses with gradients and Hessians in the scores.

Three objective families are covered:

* plain Tweedie, one score ``w_mean`` with ``mu = E exp(w_mean)``;
* zero-inflated Tweedie, scenario 1: an extra score ``w_prob`` with
  ``q = sigmoid(w_prob)``;
* zero-inflated Tweedie, scenario 2: one score, ``q = 1 / (1 + mu**gamma)``.

All functions are vectorized over numpy arrays.  Powers of ``mu`` are taken
as ``exp(k * log(mu))`` and mixture terms are rewritten through sigmoid and
softplus identities, so the expressions stay finite for ``mu`` spanning
many decades and ``q`` close to 0 or 1.  The rewritten forms are
algebraically identical to the usual ratio expressions, e.g. for the
scenario 1 zero branch ``alpha / (q + alpha) == sigmoid(-(w_prob + delta))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .tweedie import log_normalizer


@dataclass
class ScoreState:
    """Boosting scores for one or many rows.

    ``w_mean`` is on the log scale (before the ``log(exposure)`` offset),
    ``w_prob`` on the logit scale and only present for scenario 1.
    """

    w_mean: np.ndarray
    exposure: np.ndarray = 1.0
    w_prob: Optional[np.ndarray] = None

    def log_mu(self):
        return np.log(np.asarray(self.exposure, dtype=np.float64)) + np.asarray(
            self.w_mean, dtype=np.float64)

    def mu(self):
        return np.exp(self.log_mu())


@dataclass
class S1Intermediates:
    """alpha = (1-q) exp(-delta), beta = mu^(2-p)/phi, delta = beta/(2-p)."""

    alpha_aux: np.ndarray
    beta_aux: np.ndarray
    delta_aux: np.ndarray


@dataclass
class S2Intermediates:
    zeta: np.ndarray
    eta: np.ndarray
    kappa: np.ndarray
    gamma_infl: float


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sig_prime(x):
    return expit(x) * expit(-x)


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite value in {name}")


def _prepare(y, state):
    y = np.asarray(y, dtype=np.float64)
    log_mu = state.log_mu()
    y, log_mu = np.broadcast_arrays(y, log_mu)
    _finite("scores", log_mu)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("y must be finite and non-negative")
    return y, log_mu


def _tweedie_terms(y, log_mu, phi, p):
    """(-y mu^(1-p) / phi, beta = mu^(2-p) / phi)."""
    return -y * np.exp((1.0 - p) * log_mu) / phi, np.exp((2.0 - p) * log_mu) / phi


def _neg_exponent(y, log_mu, phi, p):
    return (-y * np.exp((1.0 - p) * log_mu) / (1.0 - p)
            + np.exp((2.0 - p) * log_mu) / (2.0 - p)) / phi


def _minus_log_a(y, phi, p, full):
    out = np.zeros(y.shape)
    if full:
        pos = y > 0
        if np.any(pos):
            out[pos] = -log_normalizer(y[pos], phi, p)
    return out


def s1_intermediates(state: ScoreState, phi: float, p: float) -> S1Intermediates:
    log_mu = state.log_mu()
    beta = np.exp((2.0 - p) * log_mu) / phi
    delta = beta / (2.0 - p)
    q = expit(np.asarray(state.w_prob, dtype=np.float64))
    return S1Intermediates(alpha_aux=(1.0 - q) * np.exp(-delta), beta_aux=beta,
                           delta_aux=delta)


def s2_intermediates(state: ScoreState, phi: float, p: float,
                     gamma_infl: float) -> S2Intermediates:
    log_mu = state.log_mu()
    beta = np.exp((2.0 - p) * log_mu) / phi
    delta = beta / (2.0 - p)
    return S2Intermediates(
        zeta=np.exp(gamma_infl * log_mu - delta),
        eta=gamma_infl - beta,
        kappa=gamma_infl * expit(gamma_infl * log_mu),
        gamma_infl=gamma_infl,
    )


# --------------------------------------------------------------------------
# Tweedie
# --------------------------------------------------------------------------

def tweedie_loss(y, state: ScoreState, phi: float, p: float, full: bool = True):
    """-ln f_Tw(y | mu, phi, p); ``full=False`` drops the -ln a(y) constant."""
    y, log_mu = _prepare(y, state)
    return _neg_exponent(y, log_mu, phi, p) + _minus_log_a(y, phi, p, full)


def tweedie_grad_hess(y, state: ScoreState, phi: float, p: float):
    y, log_mu = _prepare(y, state)
    ty, beta = _tweedie_terms(y, log_mu, phi, p)
    return ty + beta, (1.0 - p) * ty + (2.0 - p) * beta


# --------------------------------------------------------------------------
# Scenario 1: independent inflation score
# --------------------------------------------------------------------------

def _require_prob(state):
    if state.w_prob is None:
        raise ValueError("scenario 1 needs state.w_prob")
    w = np.asarray(state.w_prob, dtype=np.float64)
    _finite("w_prob", w)
    return w


def s1_loss(y, state: ScoreState, phi: float, p: float, full: bool = True):
    y, log_mu = _prepare(y, state)
    w = np.broadcast_to(_require_prob(state), y.shape)
    delta = np.exp((2.0 - p) * log_mu) / (phi * (2.0 - p))
    # ln q = -softplus(-w), ln(1-q) = -softplus(w)
    zero_branch = -np.logaddexp(-_softplus(-w), -_softplus(w) - delta)
    pos_branch = _softplus(w) + _neg_exponent(y, log_mu, phi, p)
    out = np.where(y == 0, zero_branch, pos_branch)
    return out + _minus_log_a(y, phi, p, full)


def s1_grad_hess_mean(y, state: ScoreState, phi: float, p: float):
    """Gradient and Hessian in ``w_mean``; the Hessian is not floored."""
    y, log_mu = _prepare(y, state)
    w = np.broadcast_to(_require_prob(state), y.shape)
    ty, beta = _tweedie_terms(y, log_mu, phi, p)
    delta = beta / (2.0 - p)
    r = expit(-(w + delta))  # alpha / (q + alpha)
    g = np.where(y == 0, beta * r, ty + beta)
    h = np.where(y == 0, beta * (r * (2.0 - p - beta) + r * r * beta),
                 (1.0 - p) * ty + (2.0 - p) * beta)
    _finite("s1 mean gradient (y=0 branch)", g[y == 0], h[y == 0])
    _finite("s1 mean gradient (y>0 branch)", g[y > 0], h[y > 0])
    return g, h


def s1_grad_hess_prob(y, state: ScoreState, phi: float, p: float):
    """Gradient and Hessian in ``w_prob``.

    ``state.w_mean`` must already hold the mean score advanced by the
    current iteration's mean tree.
    """
    y, log_mu = _prepare(y, state)
    w = np.broadcast_to(_require_prob(state), y.shape)
    delta = np.exp((2.0 - p) * log_mu) / (phi * (2.0 - p))
    g = np.where(y == 0, expit(w) - expit(w + delta), expit(w))
    h = np.where(y == 0, _sig_prime(w) - _sig_prime(w + delta), _sig_prime(w))
    _finite("s1 prob gradient", g, h)
    return g, h


# --------------------------------------------------------------------------
# Scenario 2: q = 1 / (1 + mu**gamma)
# --------------------------------------------------------------------------

def implied_q(log_mu, gamma_infl):
    """q = 1 / (1 + mu^gamma) computed from ``log(mu)``."""
    return expit(-gamma_infl * np.asarray(log_mu, dtype=np.float64))


def s2_loss(y, state: ScoreState, phi: float, p: float, gamma_infl: float,
            full: bool = True):
    y, log_mu = _prepare(y, state)
    glm = gamma_infl * log_mu
    delta = np.exp((2.0 - p) * log_mu) / (phi * (2.0 - p))
    zero_branch = -_softplus(glm - delta) + _softplus(glm)
    pos_branch = _softplus(-glm) + _neg_exponent(y, log_mu, phi, p)
    out = np.where(y == 0, zero_branch, pos_branch)
    return out + _minus_log_a(y, phi, p, full)


def s2_grad_hess(y, state: ScoreState, phi: float, p: float, gamma_infl: float):
    y, log_mu = _prepare(y, state)
    glm = gamma_infl * log_mu
    ty, beta = _tweedie_terms(y, log_mu, phi, p)
    delta = beta / (2.0 - p)
    eta = gamma_infl - beta
    s = expit(glm - delta)  # zeta / (1 + zeta)
    kappa = gamma_infl * expit(glm)
    kappa2_mu_neg_gamma = gamma_infl * gamma_infl * _sig_prime(glm)
    g = np.where(y == 0, -eta * s + kappa, -gamma_infl * expit(-glm) + ty + beta)
    h = np.where(y == 0,
                 ((2.0 - p) * beta - eta * eta) * s + s * s * eta * eta
                 + kappa2_mu_neg_gamma,
                 kappa2_mu_neg_gamma + (1.0 - p) * ty + (2.0 - p) * beta)
    _finite("s2 gradient (y=0 branch)", g[y == 0], h[y == 0])
    _finite("s2 gradient (y>0 branch)", g[y > 0], h[y > 0])
    return g, h
