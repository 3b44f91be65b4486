"""Window stack and event dispatch.

Events and stack commands are replayed in time order; every event gets at
most one ``FULL`` receiver. Touch streams bind at ``down`` and keep their
receiver until ``up``. Watch-outside views get timestamp-only notices.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .events import EventKind, Rect, ScreenSpec, Session


class Owner(str, enum.Enum):
    FOREGROUND = "foreground"
    ATTACKER = "attacker"


class Delivery(str, enum.Enum):
    FULL = "full"
    OUTSIDE = "outside"
    BLOCKED = "blocked"
    DROPPED = "dropped"  # no view could take the event


@dataclass(frozen=True)
class ViewSpec:
    view_id: int
    z: int
    bounds: Rect
    intercepts_events: bool = True
    watch_outside: bool = False
    owner: Owner = Owner.FOREGROUND


@dataclass(frozen=True)
class Add:
    view: ViewSpec


@dataclass(frozen=True)
class Remove:
    view_id: int


@dataclass(frozen=True)
class StackCommand:
    t_us: int
    action: Union[Add, Remove]


@dataclass(frozen=True)
class DispatchPolicy:
    foreground_only_hover: bool = False
    filter_touches_when_obscured: bool = False
    min_view_px: int = 0
    forbid_watch_outside: bool = False

    def __post_init__(self) -> None:
        if self.min_view_px < 0:
            raise ValueError("min_view_px must be >= 0")


POLICY_NAMES = {
    "foreground-only-hover": "foreground_only_hover",
    "filter-touches": "filter_touches_when_obscured",
    "forbid-watch-outside": "forbid_watch_outside",
}


def parse_policy(names: str) -> DispatchPolicy:
    """``"foreground-only-hover,min-view-px=2"`` style flag list -> policy."""
    kwargs: dict = {}
    for item in filter(None, (s.strip() for s in names.split(","))):
        if item in ("none", "default"):
            continue
        if item.startswith("min-view-px"):
            _, _, value = item.partition("=")
            kwargs["min_view_px"] = int(value) if value else 1
        elif item in POLICY_NAMES:
            kwargs[POLICY_NAMES[item]] = True
        else:
            raise ValueError(f"unknown policy {item!r}")
    return DispatchPolicy(**kwargs)


@dataclass(frozen=True)
class DeliveryRecord:
    # no coordinates on purpose: outside notices must not leak positions
    t_us: int
    event_index: int
    kind: EventKind
    view_id: Optional[int]
    delivery: Delivery


@dataclass(frozen=True)
class Obstruction:
    t_us: int
    event_index: int
    view_id: Optional[int]
    cause: str  # "overlay" (touch consumed by an attacker view) or "obscured"


@dataclass(frozen=True)
class IllegalCommand:
    t_us: int
    view_id: int
    reason: str


class IllegalCommandError(RuntimeError):
    def __init__(self, record: IllegalCommand):
        super().__init__(f"t={record.t_us}us view {record.view_id}: {record.reason}")
        self.record = record


@dataclass
class DeliveryLog:
    records: list[DeliveryRecord] = field(default_factory=list)
    obstruction_events: list[Obstruction] = field(default_factory=list)
    rejected: list[IllegalCommand] = field(default_factory=list)

    def full_receiver(self, event_index: int) -> Optional[int]:
        for r in self.records:
            if r.event_index == event_index and r.delivery is Delivery.FULL:
                return r.view_id
        return None

    def to_jsonl(self) -> bytes:
        lines = []
        for r in self.records:
            lines.append({"t_us": r.t_us, "event": r.event_index, "kind": r.kind.value,
                          "view": r.view_id, "delivery": r.delivery.value})
        for o in self.obstruction_events:
            lines.append({"obstruction": {"t_us": o.t_us, "event": o.event_index, "view": o.view_id, "cause": o.cause}})
        for c in self.rejected:
            lines.append({"illegal": {"t_us": c.t_us, "view": c.view_id, "reason": c.reason}})
        return b"".join(json.dumps(x, separators=(",", ":")).encode() + b"\n" for x in lines)


def foreground_view(screen: ScreenSpec, view_id: int = 0) -> ViewSpec:
    return ViewSpec(view_id, 0, screen.rect, True, False, Owner.FOREGROUND)


def check_command(
    stack: dict[int, ViewSpec], cmd: StackCommand, policy: DispatchPolicy, screen: ScreenSpec
) -> Optional[str]:
    """Reason the command is refused, or None when it may be applied."""
    act = cmd.action
    if isinstance(act, Remove):
        return None if act.view_id in stack else "remove of a view that is not on screen"
    v = act.view
    if v.view_id in stack:
        return "view id already on screen"
    if any(o.z == v.z for o in stack.values()):
        return f"z={v.z} already taken"
    if not v.bounds.empty and not v.bounds.within(screen.rect):
        return "bounds leave the screen"
    if v.owner is not Owner.FOREGROUND:
        if policy.min_view_px > 0 and (v.bounds.width < policy.min_view_px or v.bounds.height < policy.min_view_px):
            return f"view smaller than {policy.min_view_px}px"
        if policy.forbid_watch_outside and v.watch_outside:
            return "watch-outside flag forbidden"
    return None


def select_receiver(
    views: Sequence[ViewSpec], x: float, y: float, hover: bool, policy: DispatchPolicy
) -> Optional[ViewSpec]:
    best = None
    for v in views:
        if not v.intercepts_events or not v.bounds.contains(x, y):
            continue
        if hover and policy.foreground_only_hover and v.owner is not Owner.FOREGROUND:
            continue
        if best is None or v.z > best.z:
            best = v
    return best


def coverage_check(views: Sequence[ViewSpec], x: float, y: float, receiver: Optional[ViewSpec] = None) -> bool:
    """True when a view of another owner is drawn above *receiver* at (x, y).

    Visibility is what obscures, so non-intercepting views count here even
    though dispatch ignores them. Without a receiver, anything not owned by
    the foreground that contains the point counts.
    """
    owner = receiver.owner if receiver is not None else Owner.FOREGROUND
    floor = receiver.z if receiver is not None else None
    for v in views:
        if v.owner is owner or not v.bounds.contains(x, y):
            continue
        if floor is None or v.z > floor:
            return True
    return False


def dispatch(
    session: Session,
    commands: Sequence[StackCommand],
    policy: DispatchPolicy = DispatchPolicy(),
    initial: Optional[Sequence[ViewSpec]] = None,
    strict: bool = False,
) -> DeliveryLog:
    """Route every event of *session* through the evolving window stack.

    Commands at the same timestamp as an event take effect before it.
    Refused commands are skipped and listed in ``log.rejected``; with
    ``strict`` the first one raises ``IllegalCommandError`` instead.
    """
    screen = session.screen
    if initial is None:
        initial = [foreground_view(screen)]
    stack: dict[int, ViewSpec] = {v.view_id: v for v in initial}
    views = list(stack.values())
    cmds = sorted(commands, key=lambda c: c.t_us)
    log = DeliveryLog()
    ci = 0

    def apply(cmd: StackCommand) -> None:
        nonlocal views
        reason = check_command(stack, cmd, policy, screen)
        if reason is not None:
            vid = cmd.action.view.view_id if isinstance(cmd.action, Add) else cmd.action.view_id
            rec = IllegalCommand(cmd.t_us, vid, reason)
            if strict:
                raise IllegalCommandError(rec)
            log.rejected.append(rec)
            return
        if isinstance(cmd.action, Add):
            stack[cmd.action.view.view_id] = cmd.action.view
        else:
            del stack[cmd.action.view_id]
        views = list(stack.values())

    bound: Optional[tuple[Optional[int], Delivery]] = None  # open touch stream
    for i, ev in enumerate(session.events):
        while ci < len(cmds) and cmds[ci].t_us <= ev.t_us:
            apply(cmds[ci])
            ci += 1

        if ev.kind.is_hover:
            r = select_receiver(views, ev.x, ev.y, True, policy)
            if r is None:
                log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, None, Delivery.DROPPED))
            else:
                log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, r.view_id, Delivery.FULL))
            continue

        if ev.kind is EventKind.TOUCH_DOWN:
            r = select_receiver(views, ev.x, ev.y, False, policy)
            if r is None:
                bound = (None, Delivery.DROPPED)
            elif r.owner is Owner.ATTACKER:
                bound = (r.view_id, Delivery.FULL)
                log.obstruction_events.append(Obstruction(ev.t_us, i, r.view_id, "overlay"))
            elif policy.filter_touches_when_obscured and coverage_check(views, ev.x, ev.y, r):
                bound = (r.view_id, Delivery.BLOCKED)
                log.obstruction_events.append(Obstruction(ev.t_us, i, r.view_id, "obscured"))
            else:
                bound = (r.view_id, Delivery.FULL)
            stream = bound
        else:  # up
            stream = bound if bound is not None else (None, Delivery.DROPPED)
            bound = None

        log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, stream[0], stream[1]))
        for w in sorted(views, key=lambda v: v.view_id):
            if w.watch_outside and w.intercepts_events and w.view_id != stream[0]:
                log.records.append(DeliveryRecord(ev.t_us, i, ev.kind, w.view_id, Delivery.OUTSIDE))

    for cmd in cmds[ci:]:
        apply(cmd)
    return log
