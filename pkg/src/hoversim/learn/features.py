"""Feature vectors from captured clicks and labelled training sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..attacker import CapturedClick
from ..events import Click, Session


class EmptyCapture(ValueError):
    """The click has no post-click hovers to featurize."""


def featurize(c: CapturedClick, k: int = 4, include_dt: bool = True) -> np.ndarray:
    """``(x1, y1, ..., xk, yk[, dt1..dtk])``, padding by repeating the last hover."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not c.hovers:
        raise EmptyCapture(f"click {c.click_index} of user {c.user_id} has no hovers")
    hs = list(c.hovers[:k])
    hs += [hs[-1]] * (k - len(hs))
    coords = [v for h in hs for v in (h.x, h.y)]
    if include_dt:
        coords += [h.dt_ms for h in hs]
    return np.asarray(coords, dtype=float)


def feature_names(k: int = 4, include_dt: bool = True) -> list[str]:
    names = [f"{a}{i}" for i in range(1, k + 1) for a in ("x", "y")]
    if include_dt:
        names += [f"dt{i}" for i in range(1, k + 1)]
    return names


@dataclass
class LabeledSet:
    X: np.ndarray
    y: np.ndarray  # (n, 2) points, or (n,) key labels
    groups: np.ndarray  # user id per row
    task: str  # "regression" | "classification"
    keys: Optional[list[tuple[int, int]]] = None  # (user_id, click_index) per row

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.groups = np.asarray(self.groups)
        if self.task == "regression":
            self.y = np.asarray(self.y, dtype=float).reshape(len(self.X), -1)
        elif self.task == "classification":
            self.y = np.asarray(self.y, dtype=object)
        else:
            raise ValueError(f"unknown task {self.task!r}")
        if len(self.X) == 0:
            raise ValueError("labeled set is empty")
        if self.X.ndim != 2 or len(self.y) != len(self.X) or len(self.groups) != len(self.X):
            raise ValueError("rows of X, y and groups disagree")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")

    def __len__(self) -> int:
        return len(self.X)

    def subset(self, idx) -> "LabeledSet":
        idx = np.asarray(idx)
        keys = [self.keys[i] for i in idx] if self.keys is not None else None
        return LabeledSet(self.X[idx], self.y[idx], self.groups[idx], self.task, keys)


def truth_index(sessions: Iterable[Session]) -> dict[tuple[int, int], Click]:
    """Map ``(user_id, click_index)`` to the ground-truth click."""
    out = {}
    for s in sessions:
        for i, c in enumerate(s.truth_clicks):
            out[(s.user_id, i)] = c
    return out


def build_set(
    captures: Sequence[CapturedClick],
    truth: Mapping[tuple[int, int], Click],
    task: str,
    k: int = 4,
    include_dt: bool = True,
    require_label: bool = True,
) -> tuple[LabeledSet, int]:
    """Join captures to truth and featurize; returns the set and the number of dropped clicks.

    Clicks with no hovers are dropped. For classification, clicks without a
    key label are skipped too (they are not keystrokes), and not counted as
    dropped.
    """
    rows, ys, groups, keys = [], [], [], []
    dropped = 0
    for c in captures:
        key = (c.user_id, c.click_index)
        if key not in truth:
            raise KeyError(f"capture {key} has no ground-truth click")
        t = truth[key]
        if task == "classification" and t.key_label is None and require_label:
            continue
        try:
            fv = featurize(c, k, include_dt)
        except EmptyCapture:
            dropped += 1
            continue
        rows.append(fv)
        ys.append((t.x, t.y) if task == "regression" else t.key_label)
        groups.append(c.user_id)
        keys.append(key)
    if not rows:
        raise ValueError("no usable captures to build a labeled set from")
    return LabeledSet(np.vstack(rows), ys, groups, task, keys), dropped
