"""Overlay attack controller and the 40-byte capture record."""

from __future__ import annotations

import binascii
import enum
import math
import struct
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .dispatch import (
    Add,
    Delivery,
    DeliveryLog,
    DispatchPolicy,
    Owner,
    Remove,
    StackCommand,
    ViewSpec,
    dispatch,
)
from .events import EventKind, InputMethod, Rect, ScreenSpec, Session

LISTENER_ID = 1001
OVERLAY_ID = 1002
PASSIVE_OVERLAY_ID = 1003
_LISTENER_Z = 100
_OVERLAY_Z = 101
_PASSIVE_Z = 102


class Anchor(str, enum.Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class AttackerConfig:
    activation_ms: float = 70.0
    max_hovers: int = 4
    reaction_latency_us: int = 1000
    window_anchor: Anchor = Anchor.UP
    # "remove" takes the overlay off screen between clicks; "passive" leaves
    # it up with input disabled, which is still visible to touch filtering
    deactivate: str = "remove"

    def __post_init__(self) -> None:
        if not self.activation_ms > 0:
            raise ValueError("activation_ms must be positive")
        if self.max_hovers < 1:
            raise ValueError("max_hovers must be >= 1")
        if self.reaction_latency_us < 0:
            raise ValueError("reaction_latency_us must be >= 0")
        if self.deactivate not in ("remove", "passive"):
            raise ValueError(f"unknown deactivate mode {self.deactivate!r}")
        object.__setattr__(self, "window_anchor", Anchor(self.window_anchor))


@dataclass(frozen=True)
class Hover:
    dt_us: int  # since the click's down
    x: float
    y: float

    @property
    def dt_ms(self) -> float:
        return self.dt_us / 1000.0


@dataclass(frozen=True)
class CapturedClick:
    user_id: int
    click_index: int
    t_down_us: int
    dt_up_us: int
    hovers: tuple[Hover, ...] = ()
    method: InputMethod = InputMethod.STYLUS

    def __post_init__(self) -> None:
        object.__setattr__(self, "hovers", tuple(self.hovers))
        object.__setattr__(self, "method", InputMethod(self.method))

    @property
    def t_down_ms(self) -> int:
        return self.t_down_us // 1000

    @property
    def dt_up_ms(self) -> int:
        return _half_up(self.dt_up_us / 1000.0)

    @property
    def t_up_us(self) -> int:
        return self.t_down_us + self.dt_up_us

    def quantized(self) -> "CapturedClick":
        """The record as it survives the 40-byte encoding."""
        return CapturedClick(
            self.user_id,
            self.click_index,
            self.t_down_ms * 1000,
            self.dt_up_ms * 1000,
            tuple(Hover(_half_up(h.dt_us / 1000.0) * 1000, float(_half_up(h.x)), float(_half_up(h.y))) for h in self.hovers),
            self.method,
        )


@dataclass(frozen=True)
class StealthAudit:
    obstructed_clicks: int = 0
    touches_to_overlay: int = 0
    illegal_commands: int = 0

    @property
    def clean(self) -> bool:
        return self.obstructed_clicks == 0 and self.touches_to_overlay == 0 and self.illegal_commands == 0


def listener_view() -> ViewSpec:
    return ViewSpec(LISTENER_ID, _LISTENER_Z, Rect(0, 0, 0, 0), True, True, Owner.ATTACKER)


def overlay_view(screen: ScreenSpec, active: bool = True) -> ViewSpec:
    if active:
        return ViewSpec(OVERLAY_ID, _OVERLAY_Z, screen.rect, True, False, Owner.ATTACKER)
    return ViewSpec(PASSIVE_OVERLAY_ID, _PASSIVE_Z, screen.rect, False, False, Owner.ATTACKER)


def plan_commands(
    notices: Sequence[tuple[int, EventKind]], cfg: AttackerConfig, screen: ScreenSpec
) -> list[StackCommand]:
    """Overlay add/remove schedule reacting to the Listener's outside notices."""
    cmds = [StackCommand(0, Add(listener_view()))]
    active = overlay_view(screen, True)
    passive = overlay_view(screen, False)
    act_us = int(round(cfg.activation_ms * 1000))
    live = False
    parked = False  # passive copy on screen
    pending: Optional[int] = None
    added_at = 0

    def deactivate(t: int) -> None:
        nonlocal live, parked
        cmds.append(StackCommand(t, Remove(OVERLAY_ID)))
        if cfg.deactivate == "passive":
            cmds.append(StackCommand(t, Add(passive)))
            parked = True
        live = False

    for t, kind in notices:
        if pending is not None and pending <= t:
            deactivate(pending)
            pending = None
        if kind is EventKind.TOUCH_DOWN:
            pending = None
            if not live:
                added_at = t + cfg.reaction_latency_us
                if parked:
                    cmds.append(StackCommand(added_at, Remove(PASSIVE_OVERLAY_ID)))
                    parked = False
                cmds.append(StackCommand(added_at, Add(active)))
                live = True
            if cfg.window_anchor is Anchor.DOWN:
                pending = max(t + act_us, added_at + 1)
        elif kind is EventKind.TOUCH_UP and cfg.window_anchor is Anchor.UP and live:
            pending = max(t + act_us, added_at + 1)
    if pending is not None:
        deactivate(pending)
    return cmds


def _listener_notices(log: DeliveryLog) -> list[tuple[int, EventKind]]:
    return [
        (r.t_us, r.kind)
        for r in log.records
        if r.view_id == LISTENER_ID and r.delivery is Delivery.OUTSIDE and r.kind.is_touch
    ]


def run_attack(
    session: Session, cfg: AttackerConfig = AttackerConfig(), policy: DispatchPolicy = DispatchPolicy()
) -> tuple[list[CapturedClick], StealthAudit, DeliveryLog]:
    """Closed-loop attack on one session.

    The overlay schedule depends on the Listener's notices, and those are
    read back from dispatch, so dispatch is re-run until the schedule is a
    fixed point (normally on the second pass).
    """
    commands = plan_commands([], cfg, session.screen)
    for _ in range(8):
        log = dispatch(session, commands, policy)
        nxt = plan_commands(_listener_notices(log), cfg, session.screen)
        if nxt == commands:
            break
        commands = nxt
    else:
        raise RuntimeError("overlay schedule did not converge")

    captures = _assemble(session, log, cfg)
    attacker_views = {LISTENER_ID, OVERLAY_ID, PASSIVE_OVERLAY_ID}
    touches = sum(
        1
        for r in log.records
        if r.kind is EventKind.TOUCH_DOWN and r.delivery is Delivery.FULL and r.view_id in attacker_views
    )
    audit = StealthAudit(len(log.obstruction_events), touches, len(log.rejected))
    return captures, audit, log


def _assemble(session: Session, log: DeliveryLog, cfg: AttackerConfig) -> list[CapturedClick]:
    notices = _listener_notices(log)
    downs = [t for t, k in notices if k is EventKind.TOUCH_DOWN]
    ups = [t for t, k in notices if k is EventKind.TOUCH_UP]
    hovers = [
        (r.t_us, r.event_index)
        for r in log.records
        if r.view_id == OVERLAY_ID and r.delivery is Delivery.FULL and r.kind is EventKind.HOVER_MOVE
    ]
    out = []
    hi = ui = 0
    for k, t_down in enumerate(downs):
        t_next = downs[k + 1] if k + 1 < len(downs) else math.inf
        while ui < len(ups) and ups[ui] <= t_down:
            ui += 1
        dt_up = ups[ui] - t_down if ui < len(ups) and ups[ui] < t_next else 0
        while hi < len(hovers) and hovers[hi][0] < t_down:
            hi += 1
        got = []
        while hi < len(hovers) and hovers[hi][0] < t_next:
            if len(got) < cfg.max_hovers:
                ev = session.events[hovers[hi][1]]
                got.append(Hover(ev.t_us - t_down, ev.x, ev.y))
            hi += 1
        out.append(CapturedClick(session.user_id, k, t_down, dt_up, tuple(got), session.method))
    return out


# -- 40-byte wire format -------------------------------------------------------

RECORD_SIZE = 40
SLOTS = 4
_HEAD = struct.Struct("<HHIH")
_SLOT = struct.Struct("<HHH")
_TAIL = struct.Struct("<BBH")
_CRC = struct.Struct("<H")
_EMPTY_DT = 0xFFFF
_METHOD_CODE = {InputMethod.STYLUS: 0, InputMethod.FINGER: 1}
_CODE_METHOD = {v: k for k, v in _METHOD_CODE.items()}


class CaptureDecodeError(ValueError):
    pass


def _half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def crc16_ccitt(data: bytes) -> int:
    return binascii.crc_hqx(data, 0xFFFF)


def _u16(v: int, what: str) -> int:
    if not 0 <= v <= 0xFFFF:
        raise ValueError(f"{what}={v} does not fit in 16 bits")
    return v


def encode_captured(c: CapturedClick) -> bytes:
    if len(c.hovers) > SLOTS:
        raise ValueError(f"at most {SLOTS} hovers fit in a record, got {len(c.hovers)}")
    q = c.quantized()
    if not 0 <= q.t_down_ms <= 0xFFFFFFFF:
        raise ValueError(f"t_down_ms={q.t_down_ms} does not fit in 32 bits")
    parts = [_HEAD.pack(_u16(c.user_id, "user_id"), _u16(c.click_index, "click_index"), q.t_down_ms,
                        _u16(q.dt_up_ms, "dt_up_ms"))]
    for j in range(SLOTS):
        if j < len(q.hovers):
            h = q.hovers[j]
            dt = _u16(h.dt_us // 1000, "hover dt")
            if dt == _EMPTY_DT:
                raise ValueError("hover dt collides with the empty-slot marker")
            parts.append(_SLOT.pack(dt, _u16(int(h.x), "x"), _u16(int(h.y), "y")))
        else:
            parts.append(_SLOT.pack(_EMPTY_DT, 0, 0))
    parts.append(_TAIL.pack(len(q.hovers), _METHOD_CODE[c.method], 0))
    body = b"".join(parts)
    return body + _CRC.pack(crc16_ccitt(body))


def decode_captured(b: bytes) -> CapturedClick:
    if len(b) != RECORD_SIZE:
        raise CaptureDecodeError(f"record must be {RECORD_SIZE} bytes, got {len(b)}")
    body = bytes(b[:-2])
    (crc,) = _CRC.unpack_from(b, RECORD_SIZE - 2)
    if crc16_ccitt(body) != crc:
        raise CaptureDecodeError("CRC mismatch")
    user_id, idx, t_down_ms, dt_up_ms = _HEAD.unpack_from(body, 0)
    n, method, reserved = _TAIL.unpack_from(body, _HEAD.size + SLOTS * _SLOT.size)
    if n > SLOTS or method not in _CODE_METHOD or reserved != 0:
        raise CaptureDecodeError("malformed record trailer")
    hovers = []
    for j in range(n):
        dt, x, y = _SLOT.unpack_from(body, _HEAD.size + j * _SLOT.size)
        hovers.append(Hover(dt * 1000, float(x), float(y)))
    return CapturedClick(user_id, idx, t_down_ms * 1000, dt_up_ms * 1000, tuple(hovers), _CODE_METHOD[method])


def encode_stream(captures: Sequence[CapturedClick]) -> bytes:
    return b"".join(encode_captured(c) for c in captures)


def iter_records(data: bytes) -> Iterator[CapturedClick]:
    if len(data) % RECORD_SIZE:
        raise CaptureDecodeError(f"stream length {len(data)} is not a multiple of {RECORD_SIZE}")
    for off in range(0, len(data), RECORD_SIZE):
        try:
            yield decode_captured(data[off : off + RECORD_SIZE])
        except CaptureDecodeError as e:
            raise CaptureDecodeError(f"record at byte {off}: {e}") from None


def decode_stream(data: bytes) -> list[CapturedClick]:
    return list(iter_records(data))
