"""Hold-out split, cross-validated grid search and final refit.

Splits are stratified on zero versus positive targets.  Each (grid cell,
fold) pair is an independent training run, so the runs can be spread over
a thread pool; results are gathered and ordered before anything is
reported, which keeps the output independent of the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .engine import BoostConfig, Dataset
from .metrics import mad, mean_deviance
from .trainers import BoostedModel, train


def stratified_split(target, fraction: float, seed: int):
    """Row indices ``(train, test)``; ``test`` holds ``fraction`` of the
    zero rows and of the positive rows (rounded), both sorted."""
    y = np.asarray(target)
    rng = np.random.default_rng(seed)
    test = []
    for mask in (y == 0, y > 0):
        rows = np.flatnonzero(mask)
        rows = rows[rng.permutation(rows.size)]
        test.append(rows[:int(round(fraction * rows.size))])
    test = np.sort(np.concatenate(test))
    train_rows = np.setdiff1d(np.arange(y.size), test)
    return train_rows, test


def stratified_folds(target, k: int, seed: int) -> List[np.ndarray]:
    """``k`` disjoint sorted index arrays covering all rows; zero and
    positive rows are dealt round-robin after a seeded shuffle."""
    y = np.asarray(target)
    if y.size < k:
        raise ValueError(f"cannot make {k} folds from {y.size} rows")
    rng = np.random.default_rng(seed)
    folds: List[List[int]] = [[] for _ in range(k)]
    offset = 0
    for mask in (y == 0, y > 0):
        rows = np.flatnonzero(mask)
        rows = rows[rng.permutation(rows.size)]
        for i, r in enumerate(rows):
            folds[(i + offset) % k].append(int(r))
        offset += rows.size
    return [np.sort(np.asarray(f, dtype=np.intp)) for f in folds]


@dataclass
class CvRow:
    cell: Dict[str, object]
    fold_deviance: List[float]
    fold_mad: List[float]

    @property
    def mean_deviance(self) -> float:
        return float(np.mean(self.fold_deviance))

    @property
    def mean_mad(self) -> float:
        return float(np.mean(self.fold_mad))

    def record(self) -> Dict[str, object]:
        out = {k: self.cell[k] for k in sorted(self.cell)}
        out["mean_deviance"] = self.mean_deviance
        out["mean_mad"] = self.mean_mad
        for i, (d, m) in enumerate(zip(self.fold_deviance, self.fold_mad)):
            out[f"fold{i + 1}_deviance"] = d
            out[f"fold{i + 1}_mad"] = m
        return out


def holdout_scores(model: BoostedModel, data: Dataset):
    pr = model.predict(data)
    return (mean_deviance(data.target, pr.mu, model.phi, model.p, pr.q),
            mad(data.target, pr.expected))


def cross_validate(family: str, data: Dataset, base: Dict[str, object],
                   cells: Sequence[Dict[str, object]], p: float, k: int, seed: int,
                   threads: int = 1) -> List[CvRow]:
    """Score every grid cell by k-fold cross-validation."""
    folds = stratified_folds(data.target, k, seed)
    jobs = [(c, f) for c in range(len(cells)) for f in range(k)]

    def run(job):
        c, f = job
        cfg = BoostConfig(**{**base, **cells[c]})
        held = folds[f]
        fit_rows = np.sort(np.concatenate([folds[j] for j in range(k) if j != f]))
        model = train(family, data.subset(fit_rows), cfg, p=p, seed=seed)
        return holdout_scores(model, data.subset(held))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rows = []
    for c, cell in enumerate(cells):
        res = results[c * k:(c + 1) * k]
        rows.append(CvRow(cell=dict(cell), fold_deviance=[r[0] for r in res],
                          fold_mad=[r[1] for r in res]))
    return rows


def select_cell(rows: Sequence[CvRow], by: str = "deviance") -> int:
    """Index of the best row; ties go to the earliest row.  Non-finite
    scores never win over finite ones."""
    key = [r.mean_deviance if by == "deviance" else r.mean_mad for r in rows]
    key = [k if math.isfinite(k) else math.inf for k in key]
    return int(np.argmin(key))


@dataclass
class ProtocolResult:
    model: BoostedModel
    cv_rows: List[CvRow]
    winner: int
    train_rows: np.ndarray
    test_rows: np.ndarray


def run_protocol(family: str, data: Dataset, base: Dict[str, object],
                 cells: Sequence[Dict[str, object]], p: float, k: int, seed: int,
                 test_fraction: float = 0.2, select_by: str = "deviance", threads: int = 1,
                 split: Optional[tuple] = None) -> ProtocolResult:
    """Split, cross-validate the grid on the training part, refit the winner."""
    train_rows, test_rows = split if split is not None else \
        stratified_split(data.target, test_fraction, seed)
    train_data = data.subset(train_rows)
    rows = cross_validate(family, train_data, base, cells, p, k, seed, threads)
    winner = select_cell(rows, select_by)
    cfg = BoostConfig(**{**base, **cells[winner]})
    model = train(family, train_data, cfg, p=p, seed=seed)
    return ProtocolResult(model=model, cv_rows=rows, winner=winner, train_rows=train_rows,
                          test_rows=test_rows)
