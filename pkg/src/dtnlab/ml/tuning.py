"""Hyperparameter grid search over stratified cross-validation."""

from __future__ import annotations

import itertools
import random
import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import eval_metrics


def stratified_folds(
    labels, n_folds: int, rng: random.Random
) -> list[list[int]]:
    """Disjoint folds, each holding roughly its share of every class."""
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    labels = list(labels)
    for value in sorted(set(labels)):
        members = [i for i, y in enumerate(labels) if y == value]
        rng.shuffle(members)
        for pos, idx in enumerate(members):
            folds[pos % n_folds].append(idx)
    return [sorted(fold) for fold in folds]


def grid_points(param_grid: dict[str, list]) -> list[dict]:
    """Cartesian product, ordered lexicographically by sorted key then value."""
    keys = sorted(param_grid)
    points = [
        dict(zip(keys, combo))
        for combo in itertools.product(*(param_grid[k] for k in keys))
    ]
    return sorted(points, key=lambda p: tuple(repr(p[k]) for k in keys))


@dataclass
class CvCell:
    params: dict
    mean_f1: float
    mean_auc: float
    fold_f1: list[float]


@dataclass
class GridSearchResult:
    best_params: dict
    best_model: object
    table: list[CvCell]


def cross_val_scores(factory, params, X, y, folds) -> tuple[list[float], list[float]]:
    """Per-fold F1 and AUC for one parameter point."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    f1s, aucs = [], []
    for held in folds:
        held_set = set(held)
        train = [i for i in range(len(y)) if i not in held_set]
        if len(set(y[train].tolist())) < 2:
            warnings.warn("training fold holds a single class; scoring it 0")
            f1s.append(0.0)
            aucs.append(0.0)
            continue
        model = factory(**params)
        model.fit(X[train], y[train])
        probs = model.predict_proba(X[held])
        scores = eval_metrics(y[held], probs)
        if scores["auc"] is None:
            warnings.warn("validation fold holds a single class; AUC scored 0")
        f1s.append(scores["f1"])
        aucs.append(scores["auc"] if scores["auc"] is not None else 0.0)
    return f1s, aucs


def grid_search_cv(
    factory,
    param_grid: dict[str, list],
    X,
    y,
    n_folds: int = 5,
    seed: int = 0,
) -> GridSearchResult:
    """Pick the point with best mean F1; ties fall to mean AUC, then to the
    lexicographically first parameter combination.  The winning point is
    refit on all the data.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    folds = stratified_folds(y.tolist(), n_folds, random.Random(f"{seed}:cv"))
    table: list[CvCell] = []
    for params in grid_points(param_grid):
        f1s, aucs = cross_val_scores(factory, params, X, y, folds)
        table.append(
            CvCell(
                params=params,
                mean_f1=float(np.mean(f1s)),
                mean_auc=float(np.mean(aucs)),
                fold_f1=f1s,
            )
        )
    best = max(
        enumerate(table),
        key=lambda pair: (pair[1].mean_f1, pair[1].mean_auc, -pair[0]),
    )[1]
    model = factory(**best.params)
    model.fit(X, y)
    return GridSearchResult(best_params=best.params, best_model=model, table=table)
