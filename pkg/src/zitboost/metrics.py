"""Evaluation and comparison metrics for claim models.

Point metrics (MAD, zero-inflated mean deviance, rank Gini) score one
model; the Vuong statistic and the ordered-Lorenz Gini compare pairs, and
``minmax_select`` turns a matrix of pairwise Gini values into a choice.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm, rankdata

#: Relative tolerance under which two prediction ratios count as tied.
RATIO_TIE_RTOL = 1e-12


class UndefinedMetricError(ValueError):
    """The metric has no value for this input (e.g. zero variance)."""


def _as_float(x):
    return float(x) if np.ndim(x) == 0 else x


def unit_deviance(y, mu, phi, p, q=0.0):
    """Zero-inflated Tweedie unit deviance.

    For ``y = 0`` the deviance is ``-2 ln(q + (1 - q) exp(-mu^(2-p) / (phi (2-p))))``.
    For ``y > 0`` it is twice the scaled Tweedie deviance term plus
    ``-2 ln(1 - q)``.  The result is ``inf`` when ``q = 1`` and ``y > 0``.

    Parameters
    ----------
    y : array_like
        Non-negative observations.
    mu : array_like
        Predicted Tweedie means, strictly positive.
    phi : float
        Dispersion.
    p : float
        Power parameter in (1, 2).
    q : array_like, optional
        Inflation probabilities in [0, 1].
    """
    y, mu, q = np.broadcast_arrays(np.asarray(y, dtype=np.float64),
                                   np.asarray(mu, dtype=np.float64),
                                   np.asarray(q, dtype=np.float64))
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("y must be finite and non-negative")
    if np.any(~(mu > 0)):
        raise ValueError("mu must be strictly positive")
    if np.any((q < 0) | (q > 1)):
        raise ValueError("q must lie in [0, 1]")
    if not phi > 0:
        raise ValueError("phi must be positive")
    out = np.empty(y.shape)
    zero = y == 0
    with np.errstate(divide="ignore"):
        if np.any(zero):
            mz, qz = mu[zero], q[zero]
            delta = mz ** (2.0 - p) / (phi * (2.0 - p))
            out[zero] = -2.0 * np.logaddexp(np.log(qz), np.log1p(-qz) - delta)
        pos = ~zero
        if np.any(pos):
            yp, mp, qp = y[pos], mu[pos], q[pos]
            sat = yp ** (2.0 - p) / (1.0 - p) - yp ** (2.0 - p) / (2.0 - p)
            fit = yp * mp ** (1.0 - p) / (1.0 - p) - mp ** (2.0 - p) / (2.0 - p)
            out[pos] = 2.0 * ((sat - fit) / phi - np.log1p(-qp))
    return _as_float(out)


def mean_deviance(y, mu, phi, p, q=0.0) -> float:
    """Average unit deviance; may be ``inf`` but never NaN."""
    d = np.atleast_1d(unit_deviance(y, mu, phi, p, q))
    if d.size == 0:
        raise ValueError("mean deviance of an empty sample")
    return float(np.mean(d))


def mad(y, y_hat) -> float:
    """Mean absolute deviation ``mean(|y - y_hat|)``."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError("y and y_hat must have the same shape")
    if y.size == 0:
        raise ValueError("MAD of an empty sample")
    return float(np.mean(np.abs(y - y_hat)))


@dataclass(frozen=True)
class VuongResult:
    """Vuong statistic and two-sided normal p-value.

    ``status`` is ``"ok"`` or ``"undefined"``; in the latter case both
    numbers are ``None``.
    """

    statistic: Optional[float]
    p_value: Optional[float]
    status: str = "ok"

    @property
    def defined(self) -> bool:
        return self.status == "ok"


def vuong_test(loglik_1, loglik_2) -> VuongResult:
    """Compare two models through their per-row log-likelihoods.

    ``m_i = loglik_1[i] - loglik_2[i]`` and
    ``V = sqrt(n) mean(m) / sd(m)`` with the population (1/n) standard
    deviation.  Positive values favour the first model.
    """
    a = np.asarray(loglik_1, dtype=np.float64)
    b = np.asarray(loglik_2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("log-likelihood arrays must be 1-D and aligned")
    n = a.size
    if n < 2:
        raise ValueError("the Vuong test needs at least two observations")
    m = a - b
    if not np.all(np.isfinite(m)):
        return VuongResult(None, None, "undefined")
    mbar = np.mean(m)
    sd = math.sqrt(np.mean((m - mbar) ** 2))
    if sd == 0.0:
        return VuongResult(None, None, "undefined")
    v = math.sqrt(n) * float(mbar) / sd
    return VuongResult(v, float(2.0 * norm.sf(abs(v))), "ok")


def gini_a(y, y_hat) -> float:
    """Rank Gini of predictions against outcomes, ties at average rank.

    Raises
    ------
    UndefinedMetricError
        If there are no claims, or all outcomes are equal.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ValueError("y and y_hat must be aligned 1-D arrays")
    n = y.size
    if n < 2:
        raise UndefinedMetricError("Gini index needs at least two rows")
    total = math.fsum(y)
    if total == 0.0:
        raise UndefinedMetricError("Gini index undefined without claims")
    centre = (n + 1) / 2.0
    num = math.fsum(y * rankdata(y_hat)) / total - centre
    den = math.fsum(y * rankdata(y)) / total - centre
    if den == 0.0:
        raise UndefinedMetricError("Gini index undefined when all outcomes are equal")
    return num / den


def _group_ties(sorted_ratio):
    """Start index of every run of (relatively) equal sorted ratios."""
    r = sorted_ratio
    gap = np.abs(np.diff(r)) > RATIO_TIE_RTOL * np.maximum(np.abs(r[1:]), np.abs(r[:-1]))
    return np.flatnonzero(np.r_[True, gap])


def ordered_lorenz(y, y_hat_base, y_hat_competing):
    """Points of the ordered Lorenz curve, including (0, 0) and (1, 1).

    Rows are sorted by ``competing / base``.  Rows with tied ratios enter
    the curve together, as they do in the indicator form ``I[R_i <= s]``.
    """
    y = np.asarray(y, dtype=np.float64)
    base = np.asarray(y_hat_base, dtype=np.float64)
    comp = np.asarray(y_hat_competing, dtype=np.float64)
    if not (y.shape == base.shape == comp.shape) or y.ndim != 1:
        raise ValueError("inputs must be aligned 1-D arrays")
    if y.size == 0:
        raise ValueError("empty input")
    if np.any(~(base > 0)) or not np.all(np.isfinite(base)):
        raise ValueError("base predictions must be strictly positive and finite")
    if np.any(comp < 0) or not np.all(np.isfinite(comp)):
        raise ValueError("competing predictions must be finite and non-negative")
    ratio = comp / base
    order = np.argsort(ratio, kind="stable")
    starts = _group_ties(ratio[order])
    cb = np.add.reduceat(base[order], starts)
    cy = np.add.reduceat(y[order], starts)
    tb, ty = math.fsum(base), math.fsum(y)
    if ty == 0.0:
        raise UndefinedMetricError("ordered Lorenz curve undefined without claims")
    x = np.r_[0.0, np.cumsum(cb) / tb]
    v = np.r_[0.0, np.cumsum(cy) / ty]
    x[-1] = v[-1] = 1.0
    return x, v


def gini_b(y, y_hat_base, y_hat_competing) -> float:
    """Ordered-Lorenz Gini of a competing model against a base model.

    Twice the area between the diagonal and the curve (trapezoid rule),
    positive when the curve lies below the diagonal.
    """
    x, v = ordered_lorenz(y, y_hat_base, y_hat_competing)
    area = math.fsum(0.5 * np.diff(x) * (v[1:] + v[:-1]))
    return 1.0 - 2.0 * area


def minmax_select(gini_b_matrix, labels: Optional[Sequence[str]] = None):
    """Base model whose largest Gini against any competitor is smallest.

    ``gini_b_matrix[i][j]`` has model ``i`` as base and ``j`` as competitor;
    the diagonal is ignored.  Ties go to the earlier label.
    """
    g = np.asarray(gini_b_matrix, dtype=np.float64)
    k = g.shape[0]
    if g.shape != (k, k) or k < 2:
        raise ValueError("need a square matrix over at least two models")
    labels = list(labels) if labels is not None else list(range(k))
    if len(labels) != k:
        raise ValueError("one label per model is required")
    off = ~np.eye(k, dtype=bool)
    if not np.all(np.isfinite(g[off])):
        raise ValueError("off-diagonal entries must be finite")
    row_max = np.where(off, g, -np.inf).max(axis=1)
    return labels[int(np.argmin(row_max))]


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

@dataclass
class ModelScores:
    """Per-row outputs of one model on an evaluation set."""

    label: str
    loglik: np.ndarray
    y_hat: np.ndarray
    deviance: float


@dataclass
class MetricsReport:
    labels: List[str]
    mad: Dict[str, float]
    mean_deviance: Dict[str, float]
    gini_a: Dict[str, Optional[float]]
    vuong: List[List[Optional[VuongResult]]] = field(default_factory=list)
    gini_b: List[List[Optional[float]]] = field(default_factory=list)
    minmax_choice: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "mad": dict(self.mad),
            "mean_deviance": {k: _json_num(v) for k, v in self.mean_deviance.items()},
            "gini_a": dict(self.gini_a),
            "vuong": [[None if r is None else asdict(r) for r in row] for row in self.vuong],
            "gini_b": [list(row) for row in self.gini_b],
            "minmax_choice": self.minmax_choice,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            labels=list(d["labels"]),
            mad=dict(d["mad"]),
            mean_deviance={k: _from_json_num(v) for k, v in d["mean_deviance"].items()},
            gini_a=dict(d["gini_a"]),
            vuong=[[None if r is None else VuongResult(**r) for r in row] for row in d["vuong"]],
            gini_b=[list(row) for row in d["gini_b"]],
            minmax_choice=d["minmax_choice"],
            notes=list(d.get("notes", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = ["model\tMAD\tdeviance\tgini_a"]
        for lab in self.labels:
            ga = self.gini_a[lab]
            lines.append(f"{lab}\t{self.mad[lab]:.6g}\t{self.mean_deviance[lab]:.6g}\t"
                         + ("undefined" if ga is None else f"{ga:.6g}"))
        if self.vuong:
            lines += ["", "Vuong statistic (p-value); row = first model"]
            lines.append("\t" + "\t".join(self.labels))
            for lab, row in zip(self.labels, self.vuong):
                cells = []
                for r in row:
                    if r is None or not r.defined:
                        cells.append("-")
                    else:
                        cells.append(f"{r.statistic:.4f} ({r.p_value:.4g})")
                lines.append(lab + "\t" + "\t".join(cells))
        if self.gini_b:
            lines += ["", "Gini_b; row = base model, column = competing model"]
            lines.append("\t" + "\t".join(self.labels))
            for lab, row in zip(self.labels, self.gini_b):
                lines.append(lab + "\t" + "\t".join("-" if v is None else f"{v:.4f}" for v in row))
        if self.minmax_choice is not None:
            lines += ["", f"min-max choice: {self.minmax_choice}"]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _json_num(v):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _from_json_num(v):
    return float(v)


def build_report(y, models: Sequence[ModelScores], pairwise: bool = True) -> MetricsReport:
    """Assemble point metrics and, for two or more models, the pairwise
    matrices and the min-max choice."""
    y = np.asarray(y, dtype=np.float64)
    labels = [m.label for m in models]
    if len(set(labels)) != len(labels):
        raise ValueError("model labels must be unique")
    report = MetricsReport(labels=labels, mad={}, mean_deviance={}, gini_a={})
    for m in models:
        report.mad[m.label] = mad(y, m.y_hat)
        report.mean_deviance[m.label] = float(m.deviance)
        try:
            report.gini_a[m.label] = gini_a(y, m.y_hat)
        except UndefinedMetricError as exc:
            report.gini_a[m.label] = None
            report.notes.append(f"gini_a undefined for {m.label}: {exc}")
    if pairwise and len(models) >= 2:
        k = len(models)
        report.vuong = [[None if i == j else vuong_test(models[i].loglik, models[j].loglik)
                         for j in range(k)] for i in range(k)]
        report.gini_b = [[None if i == j else gini_b(y, models[i].y_hat, models[j].y_hat)
                          for j in range(k)] for i in range(k)]
        mat = np.array([[0.0 if v is None else v for v in row] for row in report.gini_b])
        report.minmax_choice = minmax_select(mat, labels)
        row_max = np.where(~np.eye(k, dtype=bool), mat, -np.inf).max(axis=1)
        tied = [labels[i] for i in range(k) if row_max[i] == row_max.min()]
        if len(tied) > 1:
            report.notes.append("min-max tie between " + ", ".join(tied)
                                + f"; chose {report.minmax_choice} by label order")
    return report
