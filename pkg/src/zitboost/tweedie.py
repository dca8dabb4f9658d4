"""Tweedie and zero-inflated Tweedie distributions for 1 < p < 2.

For this power range the Tweedie law is a compound Poisson-gamma sum with
a point mass at zero.  Densities are evaluated in log space; the positive
part needs the normalizing function a(y, phi, p), which has no closed form
and is summed as an index series around its dominant term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

#: Stop summing series terms once they fall below this fraction of the
#: largest term seen.
SERIES_REL_TOL = 1e-17
#: Hard cap on the number of series terms per observation.
SERIES_MAX_TERMS = 20_000


class SeriesConvergenceError(ArithmeticError):
    """The normalizing series did not converge within the term budget."""


@dataclass(frozen=True)
class TweedieParams:
    """Mean ``mu``, dispersion ``phi`` and power ``p`` of a Tweedie law."""

    mu: float
    phi: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be positive and finite, got {self.mu!r}")
        if not (math.isfinite(self.phi) and self.phi > 0):
            raise ValueError(f"phi must be positive and finite, got {self.phi!r}")
        if not 1.0 < self.p < 2.0:
            raise ValueError(f"p must lie in (1, 2), got {self.p!r}")

    @property
    def zero_rate(self) -> float:
        """Poisson rate of the claim count, mu^(2-p) / (phi (2-p))."""
        return self.mu ** (2.0 - self.p) / (self.phi * (2.0 - self.p))


@dataclass(frozen=True)
class ZitwParams:
    """Tweedie base law mixed with an extra point mass ``q`` at zero."""

    base: TweedieParams
    q: float

    def __post_init__(self):
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"q must lie in [0, 1), got {self.q!r}")

    @property
    def mean(self) -> float:
        return (1.0 - self.q) * self.base.mu


@dataclass(frozen=True)
class CpgParams:
    """Compound Poisson-gamma parameters: claim rate and gamma severity."""

    lam: float
    gamma_shape: float
    gamma_scale: float

    def __post_init__(self):
        for name in ("lam", "gamma_shape", "gamma_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def mean(self) -> float:
        return self.lam * self.gamma_shape * self.gamma_scale

    @property
    def variance(self) -> float:
        return self.lam * self.gamma_shape * (self.gamma_shape + 1.0) * self.gamma_scale ** 2


def cpg_from_tweedie(params: TweedieParams) -> CpgParams:
    """Map Tw(mu, phi, p) onto its compound Poisson-gamma representation."""
    mu, phi, p = params.mu, params.phi, params.p
    return CpgParams(
        lam=mu ** (2.0 - p) / (phi * (2.0 - p)),
        gamma_shape=(2.0 - p) / (p - 1.0),
        gamma_scale=phi * (p - 1.0) * mu ** (p - 1.0),
    )


def log_normalizer(y, phi, p):
    """ln a(y, phi, p) for strictly positive ``y`` (array or scalar).

    Raises
    ------
    SeriesConvergenceError
        If some observation needs more than ``SERIES_MAX_TERMS`` terms.
    """
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("log_normalizer needs finite, strictly positive y")
    out, failed = kernels.log_a_series(
        np.ascontiguousarray(y), float(phi), float(p),
        math.log(SERIES_REL_TOL), SERIES_MAX_TERMS,
    )
    if failed >= 0:
        yf = float(y[failed])
        jmode = max(1.0, round(yf ** (2.0 - p) / (phi * (2.0 - p))))
        raise SeriesConvergenceError(
            f"series for y={yf!r}, phi={phi!r}, p={p!r} did not converge within "
            f"{SERIES_MAX_TERMS} terms around index {jmode:.0f}"
        )
    return float(out[0]) if scalar else out


def _exponent(y, mu, phi, p):
    return (y * mu ** (1.0 - p) / (1.0 - p) - mu ** (2.0 - p) / (2.0 - p)) / phi


def tweedie_logpdf(y, mu, phi, p):
    """Vectorized ln f_Tw(y | mu, phi, p) with ``y >= 0``."""
    y, mu = np.broadcast_arrays(np.asarray(y, dtype=np.float64),
                                np.asarray(mu, dtype=np.float64))
    _check_y(y)
    out = np.asarray(_exponent(y, mu, phi, p), dtype=np.float64).copy()
    pos = y > 0
    if np.any(pos):
        out[pos] += log_normalizer(y[pos], phi, p)
    return out


def zitw_logpdf(y, mu, phi, p, q):
    """Vectorized ln f_ZITw(y | mu, phi, p, q).

    The zero branch is evaluated as a log-sum-exp of the two mixture
    components so that ``q`` near 0 or 1 does not underflow.
    """
    y, mu, q = np.broadcast_arrays(np.asarray(y, dtype=np.float64),
                                   np.asarray(mu, dtype=np.float64),
                                   np.asarray(q, dtype=np.float64))
    _check_y(y)
    out = np.empty(y.shape)
    zero = y == 0
    if np.any(zero):
        log_p0 = -mu[zero] ** (2.0 - p) / (phi * (2.0 - p))
        qz = q[zero]
        with np.errstate(divide="ignore"):
            out[zero] = np.logaddexp(np.log(qz), np.log1p(-qz) + log_p0)
    pos = ~zero
    if np.any(pos):
        with np.errstate(divide="ignore"):
            out[pos] = np.log1p(-q[pos]) + tweedie_logpdf(y[pos], mu[pos], phi, p)
    return out


def _check_y(y):
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if np.any(y < 0):
        raise ValueError("y must be non-negative")


def tweedie_log_density(y: float, params: TweedieParams) -> float:
    """ln f_Tw(y) for a single observation."""
    if not math.isfinite(y) or y < 0:
        raise ValueError(f"y must be finite and non-negative, got {y!r}")
    if y == 0:
        return -params.zero_rate
    return float(tweedie_logpdf(y, params.mu, params.phi, params.p)[()])


def zitw_log_density(y: float, params: ZitwParams) -> float:
    """ln f_ZITw(y) for a single observation."""
    if not math.isfinite(y) or y < 0:
        raise ValueError(f"y must be finite and non-negative, got {y!r}")
    b = params.base
    return float(zitw_logpdf(y, b.mu, b.phi, b.p, params.q)[()])


def sample_zitw(mu, phi, p, q, exposure, rng):
    """Draw zero-inflated compound Poisson-gamma claims, one per row.

    ``mu`` is the mean per unit exposure.  Exposure scales the Poisson
    claim rate only; severities are unaffected.
    """
    mu, q, exposure = np.broadcast_arrays(np.asarray(mu, dtype=np.float64),
                                          np.asarray(q, dtype=np.float64),
                                          np.asarray(exposure, dtype=np.float64))
    if np.any(exposure <= 0):
        raise ValueError("exposure must be positive")
    lam = mu ** (2.0 - p) / (phi * (2.0 - p)) * exposure
    shape = (2.0 - p) / (p - 1.0)
    scale = phi * (p - 1.0) * mu ** (p - 1.0)
    structural = rng.random(mu.shape) < q
    counts = np.asarray(rng.poisson(lam, size=mu.shape))
    counts[structural] = 0
    out = np.zeros(mu.shape)
    hit = counts > 0
    out[hit] = rng.gamma(shape * counts[hit], scale[hit])
    return out


def sample_aggregate_claim(params: ZitwParams, exposure: float, rng_seed: int) -> float:
    """One aggregate claim drawn with a fresh generator seeded by ``rng_seed``."""
    if not exposure > 0:
        raise ValueError(f"exposure must be positive, got {exposure!r}")
    rng = np.random.default_rng(rng_seed)
    b = params.base
    return float(sample_zitw(b.mu, b.phi, b.p, params.q, exposure, rng)[()])
