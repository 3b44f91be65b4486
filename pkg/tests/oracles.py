"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package beyond plain data types.
"""

from __future__ import annotations

import itertools

import numpy as np

from hoversim.dispatch import (
    Add,
    Delivery,
    DeliveryLog,
    DeliveryRecord,
    IllegalCommand,
    Obstruction,
    Owner,
    Remove,
    ViewSpec,
)
from hoversim.events import EventKind


# -- dispatch ------------------------------------------------------------------


def _inside(v: ViewSpec, x, y) -> bool:
    b = v.bounds
    return b.x0 <= x < b.x1 and b.y0 <= y < b.y1


def _refusal(stack, cmd, policy, screen):
    a = cmd.action
    if isinstance(a, Remove):
        return None if a.view_id in stack else "remove"
    v = a.view
    if v.view_id in stack or v.z in {o.z for o in stack.values()}:
        return "clash"
    b = v.bounds
    if b.x1 > b.x0 and b.y1 > b.y0 and not (b.x0 >= 0 and b.y0 >= 0 and b.x1 <= screen.width_px and b.y1 <= screen.height_px):
        return "bounds"
    if v.owner is Owner.ATTACKER:
        if policy.min_view_px and min(b.x1 - b.x0, b.y1 - b.y0) < policy.min_view_px:
            return "small"
        if policy.forbid_watch_outside and v.watch_outside:
            return "watch"
    return None


def _replay(initial, commands, policy, screen, until=None):
    """Stack after every command with t <= until, plus the refused commands."""
    stack = {v.view_id: v for v in initial}
    refused = []
    order = sorted(range(len(commands)), key=lambda i: (commands[i].t_us, i))
    for i in order:
        cmd = commands[i]
        if until is not None and cmd.t_us > until:
            break
        if _refusal(stack, cmd, policy, screen) is not None:
            vid = cmd.action.view.view_id if isinstance(cmd.action, Add) else cmd.action.view_id
            refused.append((cmd.t_us, vid))
            continue
        if isinstance(cmd.action, Add):
            stack[cmd.action.view.view_id] = cmd.action.view
        else:
            del stack[cmd.action.view_id]
    return stack, refused


def _topmost(stack, x, y, hover, policy):
    cands = [
        v for v in stack.values()
        if v.intercepts_events and _inside(v, x, y)
        and not (hover and policy.foreground_only_hover and v.owner is not Owner.FOREGROUND)
    ]
    return max(cands, key=lambda v: v.z) if cands else None


def _obscured(stack, r, x, y) -> bool:
    return any(v.owner is not r.owner and v.z > r.z and _inside(v, x, y) for v in stack.values())


def reference_dispatch(session, commands, policy, initial) -> DeliveryLog:
    """Rebuilds the window stack from scratch for every single event."""
    screen = session.screen
    log = DeliveryLog()
    events = session.events

    def down_outcome(j):
        ev = events[j]
        stack, _ = _replay(initial, commands, policy, screen, until=ev.t_us)
        r = _topmost(stack, ev.x, ev.y, False, policy)
        if r is None:
            return None, Delivery.DROPPED, None
        if r.owner is Owner.ATTACKER:
            return r.view_id, Delivery.FULL, "overlay"
        if policy.filter_touches_when_obscured and _obscured(stack, r, ev.x, ev.y):
            return r.view_id, Delivery.BLOCKED, "obscured"
        return r.view_id, Delivery.FULL, None

    for i, ev in enumerate(events):
        stack, _ = _replay(initial, commands, policy, screen, until=ev.t_us)
        if ev.kind.is_hover:
            r = _topmost(stack, ev.x, ev.y, True, policy)
            log.records.append(
                DeliveryRecord(ev.t_us, i, ev.kind, r.view_id if r else None, Delivery.FULL if r else Delivery.DROPPED)
            )
            continue
        if ev.kind is EventKind.TOUCH_DOWN:
            vid, how, cause = down_outcome(i)
            if cause is not None:
                log.obstruction_events.append(Obstruction(ev.t_us, i, vid, cause))
        else:
            # the stream's owner is decided by the latest down with no up in between
            j = i - 1
            while j >= 0 and not events[j].kind.is_touch:
                j -= 1
            if j >= 0 and events[j].kind is EventKind.TOUCH_DOWN:
                vid, how, _ = down_outcome(j)
            else:
                vid, how = None, Delivery.DROPPED
        log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, vid, how))
        for vid2 in sorted(stack):
            w = stack[vid2]
            if w.watch_outside and w.intercepts_events and vid2 != vid:
                log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, vid2, Delivery.OUTSIDE))

    _, refused = _replay(initial, commands, policy, screen)
    log.rejected = [IllegalCommand(t, v, "") for t, v in refused]
    return log


# -- CRC -----------------------------------------------------------------------


def crc16_ccitt_bitwise(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE computed one bit at a time."""
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


# -- learners ------------------------------------------------------------------


def naive_loocv_rmse(X, Y, fit_predict) -> float:
    """Double loop: drop row i, fit on the rest, predict row i."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    total = 0.0
    for i in range(len(X)):
        keep = [j for j in range(len(X)) if j != i]
        p = fit_predict(X[keep], Y[keep], X[i : i + 1])[0]
        total += float(np.sum((p - Y[i]) ** 2))
    return float(np.sqrt(total / len(X)))


def lstsq_fit_predict(Xtr, Ytr, Xte):
    A = np.hstack([Xtr, np.ones((len(Xtr), 1))])
    W, *_ = np.linalg.lstsq(A, Ytr, rcond=None)
    return np.hstack([Xte, np.ones((len(Xte), 1))]) @ W


def best_root_split_gini(X, y):
    """Exhaustive Gini search over every feature and midpoint (lowest feature, then threshold, win ties)."""
    X = np.asarray(X, float)
    y = list(y)
    labels = sorted(set(y))

    def impurity_weighted(idx):
        n = len(idx)
        counts = [sum(1 for i in idx if y[i] == lab) for lab in labels]
        return n - sum(c * c for c in counts) / n  # n * gini

    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            L = [i for i in range(len(y)) if X[i, f] <= thr]
            R = [i for i in range(len(y)) if X[i, f] > thr]
            cost = impurity_weighted(L) + impurity_weighted(R)
            if best is None or cost < best[0] - 1e-12:
                best = (cost, f, thr)
    return best


def edit_distance_oracle(a: str, b: str) -> int:
    """Plain recursion with memo, the textbook definition."""
    import functools

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def all_subsets(items):
    return itertools.chain.from_iterable(itertools.combinations(items, r) for r in range(len(items) + 1))
