"""Corpus builders and random instance generators shared by the tests."""

from __future__ import annotations

import numpy as np

from hoversim.attacker import run_attack
from hoversim.dispatch import Add, DispatchPolicy, Owner, Remove, StackCommand, ViewSpec, foreground_view
from hoversim.events import EventKind, InputEvent, Rect, ScreenSpec, Session
from hoversim.learn import truth_index
from hoversim.synth import SAMPLE_TEXT, synth_mixed, synth_session

SCREEN = ScreenSpec()


def user_text(user_id: int, n: int) -> str:
    start = (user_id * 37) % len(SAMPLE_TEXT)
    return (SAMPLE_TEXT * 2)[start : start + n].strip()


def attacked_corpus(method, make_use_case, users=range(20), seed0=100, profile=None):
    """Sessions, flat capture list, audits and the truth index for a corpus."""
    sessions, captures, audits = [], [], []
    for u in users:
        prof = profile(u) if profile else None
        s = synth_session(SCREEN, method, make_use_case(u), profile=prof, seed=seed0 + u, user_id=u)
        caps, audit, _ = run_attack(s)
        sessions.append(s)
        captures.extend(caps)
        audits.append(audit)
    return sessions, captures, audits, truth_index(sessions)


def mixed_corpus(method, plan_for_user, users=range(10), seed0=500):
    out = []
    for u in users:
        s, flags = synth_mixed(SCREEN, method, plan_for_user(u), seed=seed0 + u, user_id=u)
        out.append((s, flags))
    return out


# -- random dispatch instances -------------------------------------------------

_SMALL = ScreenSpec(100, 100)


def random_dispatch_instance(rng: np.random.Generator, max_events=20, max_views=3, max_commands=6):
    """A small session, a command list over <= max_views attacker/foreground views, a policy."""
    n_events = int(rng.integers(1, max_events + 1))
    times = np.sort(rng.choice(np.arange(0, 200), size=n_events, replace=False))
    events = []
    down = False
    for t in times.tolist():
        x, y = float(rng.integers(-5, 105)), float(rng.integers(-5, 105))
        roll = rng.random()
        if down:
            kind = EventKind.TOUCH_UP if roll < 0.6 else EventKind.HOVER_MOVE
        elif roll < 0.3:
            kind = EventKind.TOUCH_DOWN
        else:
            kind = [EventKind.HOVER_ENTER, EventKind.HOVER_MOVE, EventKind.HOVER_EXIT][int(rng.integers(3))]
        if kind is EventKind.TOUCH_DOWN:
            down = True
        elif kind is EventKind.TOUCH_UP:
            down = False
        events.append(InputEvent(kind, t, x, y))
    session = Session(_SMALL, "stylus", 0, tuple(events))

    n_views = int(rng.integers(1, max_views + 1))
    views = []
    for vid in range(1, n_views + 1):
        x0, y0 = int(rng.integers(0, 90)), int(rng.integers(0, 90))
        w, h = int(rng.integers(0, 60)), int(rng.integers(0, 60))
        if rng.random() < 0.15:
            x1, y1 = x0 + 200, y0 + h  # runs off screen
        else:
            x1, y1 = min(x0 + w, 100), min(y0 + h, 100)
        views.append(
            ViewSpec(
                vid,
                int(rng.integers(1, 6)),  # small z range makes clashes likely
                Rect(x0, y0, x1, y1),
                intercepts_events=bool(rng.random() < 0.7),
                watch_outside=bool(rng.random() < 0.4),
                owner=Owner.ATTACKER if rng.random() < 0.7 else Owner.FOREGROUND,
            )
        )
    commands = []
    for _ in range(int(rng.integers(0, max_commands + 1))):
        v = views[int(rng.integers(len(views)))]
        t = int(times[int(rng.integers(len(times)))]) if rng.random() < 0.4 else int(rng.integers(0, 200))
        action = Add(v) if rng.random() < 0.6 else Remove(v.view_id)
        commands.append(StackCommand(t, action))
    policy = DispatchPolicy(
        foreground_only_hover=bool(rng.random() < 0.3),
        filter_touches_when_obscured=bool(rng.random() < 0.5),
        min_view_px=int(rng.choice([0, 0, 5])),
        forbid_watch_outside=bool(rng.random() < 0.2),
    )
    return session, commands, policy, [foreground_view(_SMALL)]


def comparable(log):
    """Delivery log with refusal reasons stripped (the oracle does not phrase them)."""
    return (
        [(r.t_us, r.event_index, r.kind, r.view_id, r.delivery) for r in log.records],
        [(o.t_us, o.event_index, o.view_id, o.cause) for o in log.obstruction_events],
        [(c.t_us, c.view_id) for c in log.rejected],
    )
