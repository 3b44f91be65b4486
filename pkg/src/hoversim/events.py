"""Screen, input-event and session types plus the JSON Lines session format."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

FORMAT_VERSION = 1


class InputMethod(str, enum.Enum):
    STYLUS = "stylus"
    FINGER = "finger"


class EventKind(str, enum.Enum):
    HOVER_ENTER = "hover_enter"
    HOVER_MOVE = "hover"
    HOVER_EXIT = "hover_exit"
    TOUCH_DOWN = "down"
    TOUCH_UP = "up"

    @property
    def is_hover(self) -> bool:
        return self in (EventKind.HOVER_ENTER, EventKind.HOVER_MOVE, EventKind.HOVER_EXIT)

    @property
    def is_touch(self) -> bool:
        return self in (EventKind.TOUCH_DOWN, EventKind.TOUCH_UP)


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def empty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def intersects(self, other: "Rect") -> bool:
        if self.empty or other.empty:
            return False
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1

    def within(self, other: "Rect") -> bool:
        return (
            other.x0 <= self.x0 and self.x1 <= other.x1 and other.y0 <= self.y0 and self.y1 <= other.y1
        )


@dataclass(frozen=True)
class ScreenSpec:
    width_px: int = 720
    height_px: int = 1280
    hover_range_mm: float = 20.0

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(f"screen dimensions must be positive, got {self.width_px}x{self.height_px}")
        if not self.hover_range_mm > 0:
            raise ValueError(f"hover_range_mm must be positive, got {self.hover_range_mm}")
        object.__setattr__(self, "hover_range_mm", float(self.hover_range_mm))

    @property
    def rect(self) -> Rect:
        return Rect(0, 0, self.width_px, self.height_px)

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x < self.width_px and 0 <= y < self.height_px


@dataclass(frozen=True)
class InputEvent:
    kind: EventKind
    t_us: int
    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class Click:
    t_down_us: int
    t_up_us: int
    x: float
    y: float
    key_label: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class Session:
    screen: ScreenSpec
    method: InputMethod
    user_id: int
    events: tuple[InputEvent, ...] = ()
    truth_clicks: tuple[Click, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", InputMethod(self.method))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "truth_clicks", tuple(self.truth_clicks))


@dataclass(frozen=True)
class Violation:
    """One broken session invariant.

    ``index`` points into ``events`` when ``target == "event"`` and into
    ``truth_clicks`` when ``target == "click"``.
    """

    invariant: str
    index: int
    target: str = "event"
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        return f"{self.invariant}@{self.index}"


def validate_session(s: Session) -> list[Violation]:
    out: list[Violation] = []
    screen = s.screen
    prev_t: Optional[int] = None
    open_down: Optional[int] = None
    pairs: list[tuple[int, int]] = []

    for i, ev in enumerate(s.events):
        if ev.t_us < 0:
            out.append(Violation("TimeViolation", i, detail=f"negative timestamp {ev.t_us}"))
        if prev_t is not None and ev.t_us <= prev_t:
            out.append(Violation("OrderViolation", i, detail=f"t={ev.t_us} not after {prev_t}"))
        prev_t = ev.t_us
        if not screen.contains(ev.x, ev.y):
            out.append(Violation("BoundsViolation", i, detail=f"({ev.x}, {ev.y}) off screen"))

        if ev.kind is EventKind.TOUCH_DOWN:
            if i == 0 or s.events[i - 1].kind is not EventKind.HOVER_EXIT:
                out.append(Violation("HoverExitViolation", i, detail="down not preceded by hover_exit"))
            if open_down is not None:
                out.append(Violation("AlternationViolation", i, detail="down while a stream is open"))
            open_down = i
        elif ev.kind is EventKind.TOUCH_UP:
            if open_down is None:
                out.append(Violation("AlternationViolation", i, detail="up without a preceding down"))
            else:
                pairs.append((s.events[open_down].t_us, ev.t_us))
                open_down = None
    if open_down is not None:
        out.append(Violation("AlternationViolation", open_down, detail="down never released"))

    pair_hits: dict[tuple[int, int], int] = {}
    for j, c in enumerate(s.truth_clicks):
        if c.t_up_us <= c.t_down_us:
            out.append(Violation("ClickDurationViolation", j, "click"))
        if not screen.contains(c.x, c.y):
            out.append(Violation("ClickBoundsViolation", j, "click"))
        key = (c.t_down_us, c.t_up_us)
        if key not in pairs:
            out.append(Violation("ClickMatchViolation", j, "click", "no down/up pair with these timestamps"))
        elif key in pair_hits:
            out.append(Violation("ClickMatchViolation", j, "click", f"pair already matched by click {pair_hits[key]}"))
        else:
            pair_hits[key] = j
    return out


# -- JSON Lines format --------------------------------------------------------


class SessionParseError(ValueError):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"byte {offset}: {reason}")
        self.offset = offset
        self.reason = reason


def _dump(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8") + b"\n"


def serialize_session(s: Session) -> bytes:
    header = {
        "version": FORMAT_VERSION,
        "width_px": s.screen.width_px,
        "height_px": s.screen.height_px,
        "hover_range_mm": s.screen.hover_range_mm,
        "method": s.method.value,
        "user_id": s.user_id,
        "seed": s.seed,
    }
    chunks = [_dump(header)]
    chunks.extend(_dump({"t_us": e.t_us, "kind": e.kind.value, "x": e.x, "y": e.y}) for e in s.events)
    chunks.extend(
        _dump({"click": {"t_down_us": c.t_down_us, "t_up_us": c.t_up_us, "x": c.x, "y": c.y, "key": c.key_label}})
        for c in s.truth_clicks
    )
    return b"".join(chunks)


def _lines(data: bytes) -> Iterable[tuple[int, bytes]]:
    pos = 0
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0:
            raise SessionParseError(len(data), "truncated: last line has no terminating newline")
        yield pos, data[pos:end]
        pos = end + 1


def _int(obj: dict, key: str, offset: int) -> int:
    v = obj.get(key)
    if type(v) is not int:
        raise SessionParseError(offset, f"field {key!r} must be an integer")
    return v


def _num(obj: dict, key: str, offset: int) -> float:
    v = obj.get(key)
    if type(v) not in (int, float):
        raise SessionParseError(offset, f"field {key!r} must be a number")
    return float(v)


def parse_session(data: bytes) -> Session:
    header = None
    events: list[InputEvent] = []
    clicks: list[Click] = []
    for offset, raw in _lines(data):
        if not raw.strip():
            continue
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SessionParseError(offset + e.start, "invalid UTF-8") from None
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise SessionParseError(offset + len(text[: e.pos].encode("utf-8")), e.msg) from None
        if not isinstance(obj, dict):
            raise SessionParseError(offset, "expected a JSON object")

        if header is None:
            if obj.get("version") != FORMAT_VERSION:
                raise SessionParseError(offset, f"unsupported version {obj.get('version')!r}")
            method = obj.get("method")
            if method not in ("stylus", "finger"):
                raise SessionParseError(offset, f"unknown method {method!r}")
            try:
                screen = ScreenSpec(
                    _int(obj, "width_px", offset), _int(obj, "height_px", offset), _num(obj, "hover_range_mm", offset)
                )
            except ValueError as e:
                if isinstance(e, SessionParseError):
                    raise
                raise SessionParseError(offset, str(e)) from None
            header = (screen, InputMethod(method), _int(obj, "user_id", offset), _int(obj, "seed", offset))
        elif "click" in obj:
            c = obj["click"]
            if not isinstance(c, dict):
                raise SessionParseError(offset, "click must be an object")
            key = c.get("key")
            if key is not None and not isinstance(key, str):
                raise SessionParseError(offset, "click key must be a string or null")
            clicks.append(
                Click(_int(c, "t_down_us", offset), _int(c, "t_up_us", offset), _num(c, "x", offset), _num(c, "y", offset), key)
            )
        else:
            kind = obj.get("kind")
            try:
                kind = EventKind(kind)
            except ValueError:
                raise SessionParseError(offset, f"unknown event kind {kind!r}") from None
            events.append(InputEvent(kind, _int(obj, "t_us", offset), _num(obj, "x", offset), _num(obj, "y", offset)))

    if header is None:
        raise SessionParseError(0, "missing header line")
    events.sort(key=lambda e: e.t_us)
    clicks.sort(key=lambda c: c.t_down_us)
    screen, method, user_id, seed = header
    return Session(screen, method, user_id, tuple(events), tuple(clicks), seed)


def read_session(path) -> Session:
    with open(path, "rb") as fh:
        return parse_session(fh.read())


def write_session(path, s: Session) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_session(s))
