"""Cross-validation protocols and the metrics they report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import LabeledSet
from .models import ModelSpec, fit, predict


class GroupTooSmall(ValueError):
    pass


@dataclass
class Metrics:
    n: int
    rmse_px: Optional[float] = None
    accuracy: Optional[float] = None
    labels: tuple[str, ...] = ()
    confusion: Optional[np.ndarray] = None  # rows: truth, columns: predicted
    per_user: dict[int, float] = field(default_factory=dict)
    fold_scores: list[float] = field(default_factory=list)


def _point_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    return np.sum((np.asarray(pred, dtype=float) - truth) ** 2, axis=1)


def loocv_predict(data: LabeledSet, spec: ModelSpec) -> np.ndarray:
    n = len(data)
    if n < 2:
        raise ValueError("leave-one-out needs at least 2 rows")
    out = []
    everything = np.arange(n)
    for i in range(n):
        model = fit(spec, data.subset(np.delete(everything, i)))
        out.append(predict(model, data.X[i]))
    return np.asarray(out) if data.task == "regression" else np.asarray(out, dtype=object)


def loocv_rmse(data: LabeledSet, spec: ModelSpec) -> Metrics:
    """Fit on all rows but one, predict it, repeat for every row."""
    if data.task != "regression":
        raise ValueError("loocv_rmse needs regression data")
    pred = loocv_predict(data, spec)
    sq = _point_errors(pred, data.y)
    per_user = {int(g): float(np.sqrt(sq[data.groups == g].mean())) for g in np.unique(data.groups)}
    return Metrics(len(data), rmse_px=float(np.sqrt(sq.mean())), per_user=per_user)


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_predict(data: LabeledSet, spec: ModelSpec, k: int = 10, seed: int = 0) -> tuple[np.ndarray, list[np.ndarray]]:
    n = len(data)
    if k < 2 or n < k:
        raise ValueError(f"{k}-fold cross-validation needs at least {k} rows, got {n}")
    folds = fold_indices(n, k, seed)
    if data.task == "regression":
        pred = np.zeros_like(data.y, dtype=float)
    else:
        pred = np.empty(n, dtype=object)
    for test in folds:
        train = np.setdiff1d(np.arange(n), test)
        model = fit(spec, data.subset(train))
        pred[test] = predict(model, data.X[test])
    return pred, folds


def _confusion(truth: np.ndarray, pred: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, pred):
        cm[pos[t], pos[p]] += 1
    return cm


def kfold_accuracy(data: LabeledSet, spec: ModelSpec, k: int = 10, seed: int = 0) -> Metrics:
    """Seeded shuffle into k near-equal folds; accuracy is the mean over folds."""
    if data.task != "classification":
        raise ValueError("kfold_accuracy needs classification data")
    pred, folds = kfold_predict(data, spec, k, seed)
    truth = data.y.astype(str)
    pred = pred.astype(str)
    hit = truth == pred
    fold_scores = [float(hit[f].mean()) for f in folds]
    labels = tuple(sorted(set(truth) | set(pred)))
    per_user = {int(g): float(hit[data.groups == g].mean()) for g in np.unique(data.groups)}
    return Metrics(
        len(data),
        accuracy=float(np.mean(fold_scores)),
        labels=labels,
        confusion=_confusion(truth, pred, labels),
        per_user=per_user,
        fold_scores=fold_scores,
    )


def kfold_rmse(data: LabeledSet, spec: ModelSpec, k: int = 10, seed: int = 0) -> Metrics:
    if data.task != "regression":
        raise ValueError("kfold_rmse needs regression data")
    pred, folds = kfold_predict(data, spec, k, seed)
    sq = _point_errors(pred, data.y)
    per_user = {int(g): float(np.sqrt(sq[data.groups == g].mean())) for g in np.unique(data.groups)}
    return Metrics(len(data), rmse_px=float(np.sqrt(sq.mean())), per_user=per_user,
                   fold_scores=[float(np.sqrt(sq[f].mean())) for f in folds])


def per_user_eval(data: LabeledSet, spec: ModelSpec, k: int = 10, seed: int = 0) -> tuple[Metrics, Metrics]:
    """Pooled k-fold versus one model per user (size-weighted average)."""
    users = np.unique(data.groups)
    if len(users) < 2:
        raise GroupTooSmall(f"need at least 2 users, got {len(users)}")
    sizes = {int(u): int(np.sum(data.groups == u)) for u in users}
    small = [u for u, s in sizes.items() if s < k]
    if small:
        raise GroupTooSmall(f"users {small} have fewer than {k} rows")

    run = kfold_accuracy if data.task == "classification" else kfold_rmse
    pooled = run(data, spec, k, seed)
    per = {}
    total = 0.0
    for u in users:
        m = run(data.subset(np.flatnonzero(data.groups == u)), spec, k, seed)
        score = m.accuracy if data.task == "classification" else m.rmse_px
        per[int(u)] = score
        total += score * sizes[int(u)]
    avg = total / len(data)
    if data.task == "classification":
        return pooled, Metrics(len(data), accuracy=avg, per_user=per)
    return pooled, Metrics(len(data), rmse_px=avg, per_user=per)


METRICS_COLUMNS = ("corpus", "model", "task", "cv", "n", "dropped", "rmse_px", "accuracy")


def metrics_csv_row(corpus: str, spec: ModelSpec, cv: str, m: Metrics, dropped: int = 0) -> list[str]:
    fmt = lambda v: "" if v is None else f"{v:.6f}"
    return [corpus, spec.label, spec.task, cv, str(m.n), str(dropped), fmt(m.rmse_px), fmt(m.accuracy)]


def metrics_csv(rows: Sequence[Sequence[str]], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(METRICS_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()
