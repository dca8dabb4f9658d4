"""Log-ratio transforms for compositional feature blocks.

A composition is a group of ``J`` non-negative parts that sum to a fixed
closure constant (shares of driving per weekday, say).  The transforms map
rows of such a block to unconstrained coordinates:

* ``alr``: log ratios against one reference part (``J - 1`` columns);
* ``clr``: log ratios against the geometric mean (``J`` columns, zero sum);
* ``ilr``: ``clr`` rotated by an orthonormal contrast matrix (``J - 1``);
* ``clr_ppca``: ``clr`` followed by probabilistic PCA scores (``k``).

Exact zeros must be replaced first; see :func:`zero_replace`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

TREATMENTS = ("none", "alr", "clr", "ilr", "clr_ppca")


def _rows(x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    return (x[None, :] if single else x), single


def _out(x, single):
    return x[0] if single else x


def _require_positive(x):
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("composition parts must be strictly positive; replace zeros first")


def closure(x, total: float = 1.0):
    """Rescale each row to sum to ``total``."""
    x, single = _rows(x)
    s = x.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        raise ValueError("cannot close a row without positive parts")
    return _out(total * x / s, single)


def zero_replace(x, epsilon: float = 1e-6, total: float = 1.0):
    """Multiplicative zero replacement.

    Zeros become ``epsilon * total`` and the non-zero parts are scaled down
    so that every row sums to ``total`` again.  Rows without zeros are only
    re-closed.

    Raises
    ------
    ValueError
        On negative parts, an all-zero row, or an ``epsilon`` too large for
        the number of zeros in a row.
    """
    x, single = _rows(x)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("composition parts must be finite and non-negative")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    s = x.sum(axis=1, keepdims=True)
    empty = np.flatnonzero(s[:, 0] == 0)
    if empty.size:
        raise ValueError(f"composition row {empty[0]} has no positive part")
    x = total * x / s
    zeros = x == 0
    n_zero = zeros.sum(axis=1, keepdims=True)
    fill = epsilon * total
    if np.any(n_zero * fill >= total):
        raise ValueError("epsilon too large for the number of zero parts")
    out = np.where(zeros, fill, x * (1.0 - n_zero * fill / total))
    return _out(out, single)


def clr(x):
    """Centered log-ratio: ``log(x_j) - mean_j log(x_j)``."""
    x, single = _rows(x)
    _require_positive(x)
    lx = np.log(x)
    return _out(lx - lx.mean(axis=1, keepdims=True), single)


def alr(x, reference: int = -1):
    """Additive log-ratio against part ``reference`` (default: the last)."""
    x, single = _rows(x)
    _require_positive(x)
    J = x.shape[1]
    d = reference % J if -J <= reference < J else None
    if d is None:
        raise IndexError(f"reference part {reference} out of range for J={J}")
    keep = [j for j in range(J) if j != d]
    return _out(np.log(x[:, keep]) - np.log(x[:, [d]]), single)


def alr_inverse(z, reference: int = -1, total: float = 1.0):
    """Map ``alr`` coordinates back to a closed composition."""
    z, single = _rows(z)
    J = z.shape[1] + 1
    d = reference % J
    full = np.insert(z, d, 0.0, axis=1)
    full = full - full.max(axis=1, keepdims=True)
    e = np.exp(full)
    return _out(total * e / e.sum(axis=1, keepdims=True), single)


def build_helmert_contrast(J: int) -> np.ndarray:
    """Normalized Helmert contrast matrix of shape ``(J - 1, J)``.

    Row ``i`` (1-based) has ``1/sqrt(i(i+1))`` in its first ``i`` entries,
    ``-i/sqrt(i(i+1))`` in entry ``i + 1`` and zeros after, so the rows are
    orthonormal and each sums to zero.
    """
    if J < 2:
        raise ValueError("a composition needs at least two parts")
    R = np.zeros((J - 1, J))
    for i in range(1, J):
        norm = np.sqrt(i * (i + 1.0))
        R[i - 1, :i] = 1.0 / norm
        R[i - 1, i] = -i / norm
    return R


def check_contrast(R, tol: float = 1e-12):
    """Raise unless ``R R^T = I`` and every row of ``R`` sums to zero."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[1] != R.shape[0] + 1:
        raise ValueError("contrast matrix must have shape (J-1, J)")
    if np.max(np.abs(R @ R.T - np.eye(R.shape[0]))) > tol:
        raise ValueError("contrast matrix rows are not orthonormal")
    if np.max(np.abs(R.sum(axis=1))) > tol:
        raise ValueError("contrast matrix rows must sum to zero")


def ilr(x, contrast: Optional[np.ndarray] = None):
    """Isometric log-ratio ``R @ clr(x)``; Helmert contrast by default."""
    x, single = _rows(x)
    R = build_helmert_contrast(x.shape[1]) if contrast is None else np.asarray(contrast)
    check_contrast(R)
    if R.shape[1] != x.shape[1]:
        raise ValueError("contrast matrix does not match the number of parts")
    return _out(clr(x) @ R.T, single)


@dataclass
class PPCA:
    """Closed-form maximum-likelihood probabilistic PCA.

    Attributes
    ----------
    mean : (J,) array
    loadings : (J, k) array
        ``W = U_k (Lambda_k - sigma2 I)^(1/2)``.
    noise_variance : float
        Mean of the discarded covariance eigenvalues.
    eigenvalues : (J,) array
        Sample covariance spectrum, descending.
    """

    mean: np.ndarray
    loadings: np.ndarray
    noise_variance: float
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def transform(self, x) -> np.ndarray:
        """Posterior latent means ``M^-1 W^T (x - mean)``."""
        x = np.asarray(x, dtype=np.float64)
        W = self.loadings
        M = W.T @ W + self.noise_variance * np.eye(W.shape[1])
        return np.linalg.solve(M, W.T @ (x - self.mean).T).T

    def to_dict(self):
        return {"mean": self.mean.tolist(), "loadings": self.loadings.tolist(),
                "noise_variance": self.noise_variance,
                "eigenvalues": self.eigenvalues.tolist()}

    @classmethod
    def from_dict(cls, d):
        J = len(d["mean"])
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   loadings=np.asarray(d["loadings"], dtype=np.float64).reshape(J, -1),
                   noise_variance=float(d["noise_variance"]),
                   eigenvalues=np.asarray(d["eigenvalues"], dtype=np.float64))


def ppca_fit(clr_matrix, k: int) -> PPCA:
    """Fit PPCA to CLR coordinates.

    ``k`` must not exceed ``J - 1`` because CLR rows live in a
    ``(J - 1)``-dimensional subspace.
    """
    x = np.asarray(clr_matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, J) matrix")
    n, J = x.shape
    if k < 1 or k > J - 1:
        raise ValueError(f"k must lie in [1, {J - 1}] for J={J}")
    if n <= k:
        raise ValueError("need more rows than components")
    mean = x.mean(axis=0)
    cov = (x - mean).T @ (x - mean) / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evals = np.maximum(evals, 0.0)
    # the last eigenvalue is structurally zero (zero-sum rows), so the noise
    # estimate averages the discarded eigenvalues of the (J-1)-dim subspace
    discarded = evals[k:J - 1]
    sigma2 = float(discarded.mean()) if discarded.size else 0.0
    U = evecs[:, :k]
    # fix the sign of each axis so fits are reproducible
    U = U * np.where(U[np.argmax(np.abs(U), axis=0), np.arange(k)] < 0, -1.0, 1.0)
    W = U * np.sqrt(np.maximum(evals[:k] - sigma2, 0.0))
    return PPCA(mean=mean, loadings=W, noise_variance=sigma2, eigenvalues=evals)


# --------------------------------------------------------------------------
# Blocks over a column table
# --------------------------------------------------------------------------

@dataclass
class CompositionBlock:
    """A named group of columns forming a composition, and its treatment.

    ``reference`` is the ALR reference part (index into ``columns``);
    ``n_components`` is the PPCA dimension (default ``J - 2``).
    """

    name: str
    columns: List[str]
    treatment: str = "none"
    closure: float = 1.0
    epsilon: float = 1e-6
    reference: int = -1
    n_components: Optional[int] = None
    ppca: Optional[PPCA] = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.columns) < 2:
            raise ValueError(f"block {self.name!r} needs at least two columns")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"block {self.name!r} lists a column twice")
        if self.treatment not in TREATMENTS:
            raise ValueError(f"unknown treatment {self.treatment!r}; expected one of {TREATMENTS}")
        if not self.closure > 0:
            raise ValueError("closure constant must be positive")
        J = len(self.columns)
        if self.treatment == "clr_ppca":
            k = self.n_components if self.n_components is not None else max(J - 2, 1)
            if not 1 <= k <= J - 1:
                raise ValueError(f"n_components must lie in [1, {J - 1}]")
            self.n_components = k

    @property
    def output_names(self) -> List[str]:
        J = len(self.columns)
        if self.treatment == "none":
            return list(self.columns)
        if self.treatment == "alr":
            d = self.reference % J
            return [f"{self.name}_alr_{c}" for j, c in enumerate(self.columns) if j != d]
        if self.treatment == "clr":
            return [f"{self.name}_clr_{c}" for c in self.columns]
        if self.treatment == "ilr":
            return [f"{self.name}_ilr{i + 1}" for i in range(J - 1)]
        return [f"{self.name}_pc{i + 1}" for i in range(self.n_components)]

    def _parts(self, table: Dict[str, np.ndarray]) -> np.ndarray:
        missing = [c for c in self.columns if c not in table]
        if missing:
            raise KeyError(f"block {self.name!r}: missing columns {missing}")
        x = np.column_stack([np.asarray(table[c], dtype=np.float64) for c in self.columns])
        return zero_replace(x, self.epsilon, self.closure)

    def fit(self, table: Dict[str, np.ndarray]) -> "CompositionBlock":
        if self.treatment == "clr_ppca":
            self.ppca = ppca_fit(clr(self._parts(table)), self.n_components)
        return self

    def transform(self, table: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Derived columns for this block (``none`` returns the inputs)."""
        if self.treatment == "none":
            return {c: np.asarray(table[c]) for c in self.columns}
        x = self._parts(table)
        if self.treatment == "alr":
            z = alr(x, self.reference)
        elif self.treatment == "clr":
            z = clr(x)
        elif self.treatment == "ilr":
            z = ilr(x)
        else:
            if self.ppca is None:
                raise RuntimeError(f"block {self.name!r} must be fitted before transform")
            z = self.ppca.transform(clr(x))
        z = np.atleast_2d(z)
        return {name: z[:, i] for i, name in enumerate(self.output_names)}

    def to_dict(self):
        return {"name": self.name, "columns": list(self.columns), "treatment": self.treatment,
                "closure": self.closure, "epsilon": self.epsilon, "reference": self.reference,
                "n_components": self.n_components,
                "ppca": None if self.ppca is None else self.ppca.to_dict()}

    @classmethod
    def from_dict(cls, d):
        block = cls(name=d["name"], columns=list(d["columns"]),
                    treatment=d.get("treatment", "none"), closure=d.get("closure", 1.0),
                    epsilon=d.get("epsilon", 1e-6), reference=d.get("reference", -1),
                    n_components=d.get("n_components"))
        if d.get("ppca") is not None:
            block.ppca = PPCA.from_dict(d["ppca"])
        return block


def apply_blocks(table: Dict[str, np.ndarray], blocks: Sequence[CompositionBlock],
                 order: Optional[Sequence[str]] = None) -> Dict[str, np.ndarray]:
    """Replace every block's columns by its derived columns.

    Columns outside all blocks pass through untouched (the same array
    objects).  The derived columns take the position of the block's first
    member in ``order`` (default: the table's key order).
    """
    order = list(order) if order is not None else list(table)
    owner = {}
    for b in blocks:
        for c in b.columns:
            if c in owner:
                raise ValueError(f"column {c!r} belongs to two blocks")
            owner[c] = b
    out: Dict[str, np.ndarray] = {}
    done = set()
    for name in order:
        b = owner.get(name)
        if b is None:
            out[name] = table[name]
        elif b.name not in done:
            derived = b.transform(table)
            clash = set(derived) & (set(order) - set(b.columns))
            if clash:
                raise ValueError(f"derived column names clash with existing columns: {sorted(clash)}")
            out.update(derived)
            done.add(b.name)
    for b in blocks:
        if b.name not in done:
            raise KeyError(f"block {b.name!r}: none of its columns are present")
    return out
