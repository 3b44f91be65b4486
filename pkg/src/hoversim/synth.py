"""Synthetic ground-truth sessions: keyboard geometry, pointing kinematics, hover sampling."""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .events import Click, EventKind, InputEvent, InputMethod, Rect, ScreenSpec, Session

ROWS: tuple[tuple[str, ...], ...] = (
    tuple("qwertyuiop"),
    tuple("asdfghjkl"),
    tuple("zxcvbnm"),
    (",", "space", "."),
)
# width of each key in key units; only the space bar is wider than one unit
_UNITS = {"space": 6}

CHAR_TO_LABEL = {" ": "space"}
LABEL_TO_CHAR = {"space": " "}

BALL_MARGIN_PX = 20.0
TYPING_AIM_SIGMA_PX = 10.0
CLICK_DURATION_SIGMA_LOG = 0.3

# Plain English prose used for the typing use case; only lowercase letters,
# spaces, commas and periods so every character maps onto the layout.
SAMPLE_TEXT = (
    "the morning was cold and the streets were quiet. a few people walked past the old station, "
    "carrying bags and talking softly about the weather. near the corner a small shop had opened "
    "early, and the smell of fresh bread drifted out into the road. she stopped for a moment, "
    "checked her phone, and then kept walking toward the bridge. the river below was grey and "
    "slow, and the light on the water made everything look calm. by the time she reached the "
    "office the sun had come out, the sky was clear, and the city was finally waking up. "
    "inside, the desks were still empty, so she made a cup of tea, opened the window, and sat "
    "down to read the notes from the meeting the day before. there was a lot of work to do, "
    "but the quiet hour before everyone arrived was always the best part of the day."
)


# -- keyboard geometry ---------------------------------------------------------


@dataclass(frozen=True)
class KeyboardLayout:
    region: Rect
    keys: tuple[tuple[str, Rect], ...]
    rows: tuple[tuple[str, ...], ...] = ROWS

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.keys)

    def rect(self, label: str) -> Rect:
        for lab, r in self.keys:
            if lab == label:
                return r
        raise KeyError(label)

    def centers(self) -> np.ndarray:
        return np.array([r.center for _, r in self.keys], dtype=float)


def make_layout(screen: ScreenSpec) -> KeyboardLayout:
    if screen.width_px < 360 or screen.height_px < 640:
        raise ValueError(f"screen {screen.width_px}x{screen.height_px} is smaller than the 360x640 minimum")
    w = screen.width_px
    region_h = (2 * screen.height_px) // 5
    top = screen.height_px - region_h
    row_h = region_h // len(ROWS)

    keys: list[tuple[str, Rect]] = []
    for r, row in enumerate(ROWS):
        y0 = top + r * row_h
        y1 = screen.height_px if r == len(ROWS) - 1 else y0 + row_h
        units = [_UNITS.get(label, 1) for label in row]
        unit_w = w // sum(units)
        x = 0
        for j, (label, u) in enumerate(zip(row, units)):
            x1 = w if j == len(row) - 1 else x + u * unit_w
            keys.append((label, Rect(x, y0, x1, y1)))
            x = x1
    return KeyboardLayout(Rect(0, top, w, screen.height_px), tuple(keys))


def key_at(layout: KeyboardLayout, x: float, y: float) -> Optional[str]:
    if not layout.region.contains(x, y):
        return None
    for label, r in layout.keys:
        if r.contains(x, y):
            return label
    return None


def nearest_key(layout: KeyboardLayout, x: float, y: float) -> str:
    centers = layout.centers()
    d2 = (centers[:, 0] - x) ** 2 + (centers[:, 1] - y) ** 2
    return layout.keys[int(np.argmin(d2))][0]


def text_to_labels(text: str, layout: KeyboardLayout) -> list[str]:
    allowed = set(layout.labels)
    labels = []
    for i, ch in enumerate(text):
        label = CHAR_TO_LABEL.get(ch, ch)
        if label not in allowed:
            raise ValueError(f"character {ch!r} at position {i} has no key on the layout")
        labels.append(label)
    return labels


# -- profiles ------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryProfile:
    sample_mean_ms: float = 19.0
    sample_jitter_ms: float = 4.0
    path_noise_px: float = 3.0
    offset_bias_px: tuple[float, float] = (0.0, 0.0)
    direction_gain_px: float = 0.0
    click_duration_median_ms: float = 60.0
    interclick_median_ms: float = 400.0
    interclick_sigma_log: float = 0.45
    # hover reporting resumes this long after lift-off
    lift_delay_ms: float = 2.0
    # floor on the up -> next down hover time; nobody re-targets faster
    min_hover_gap_ms: float = 100.0

    def __post_init__(self) -> None:
        if not self.sample_mean_ms > 0:
            raise ValueError("sample_mean_ms must be positive")
        for name in ("sample_jitter_ms", "path_noise_px", "interclick_sigma_log", "lift_delay_ms", "min_hover_gap_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.click_duration_median_ms <= 0 or self.interclick_median_ms <= 0:
            raise ValueError("medians must be positive")
        bias = tuple(float(v) for v in self.offset_bias_px)
        if len(bias) != 2:
            raise ValueError("offset_bias_px must have two components")
        object.__setattr__(self, "offset_bias_px", bias)


USER_BIAS_SIGMA_PX = 30.0


def user_bias(user_id: int) -> tuple[float, float]:
    """Per-user fingertip/centroid displacement, fixed for a given user id."""
    rng = np.random.default_rng([0x6F76, int(user_id)])
    bx, by = rng.normal(0.0, USER_BIAS_SIGMA_PX, size=2)
    return (float(bx), float(by))


def default_profile(method: InputMethod, user_id: int = 0) -> TrajectoryProfile:
    method = InputMethod(method)
    if method is InputMethod.STYLUS:
        return TrajectoryProfile(path_noise_px=3.0, direction_gain_px=0.0, offset_bias_px=(0.0, 0.0))
    return TrajectoryProfile(path_noise_px=40.0, direction_gain_px=60.0, offset_bias_px=user_bias(user_id))


def profile_from_config(text: str, base: TrajectoryProfile) -> TrajectoryProfile:
    """Apply flat ``key = value`` overrides (TrajectoryProfile field names) to *base*.

    Unknown keys are ignored so one file can also carry corpus settings.
    """
    values = read_flat_config(text)
    names = {f.name: f for f in dataclasses.fields(TrajectoryProfile)}
    changes = {}
    for key, raw in values.items():
        if key not in names:
            continue
        if key == "offset_bias_px":
            parts = [p for p in raw.replace("(", " ").replace(")", " ").replace(",", " ").split()]
            changes[key] = tuple(float(p) for p in parts)
        else:
            changes[key] = float(raw)
    return dataclasses.replace(base, **changes)


def read_flat_config(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case
    cp.read_string("[top]\n" + text)
    out = {}
    for key, value in cp.items("top"):
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key] = value
    return out


# -- use cases -----------------------------------------------------------------


@dataclass(frozen=True)
class BallGame:
    n_clicks: int

    def __post_init__(self) -> None:
        if self.n_clicks <= 0:
            raise ValueError("n_clicks must be positive")


@dataclass(frozen=True)
class Typing:
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("text must be non-empty")


UseCase = Union[BallGame, Typing]


@dataclass(frozen=True)
class _Target:
    x: float
    y: float
    label: Optional[str]
    min_gap_ms: float = 0.0  # down->down lower bound relative to the previous click
    typing: bool = False


def _ball_targets(screen: ScreenSpec, n: int, rng: np.random.Generator) -> list[_Target]:
    xs = rng.uniform(BALL_MARGIN_PX, screen.width_px - BALL_MARGIN_PX, size=n)
    ys = rng.uniform(BALL_MARGIN_PX, screen.height_px - BALL_MARGIN_PX, size=n)
    return [_Target(float(x), float(y), None) for x, y in zip(xs, ys)]


def _clamp_into(v: float, lo: float, hi: float) -> float:
    # half-open [lo, hi)
    return min(max(v, lo), math.nextafter(hi, lo))


def _typing_targets(layout: KeyboardLayout, text: str, rng: np.random.Generator) -> list[_Target]:
    labels = text_to_labels(text, layout)
    out = []
    for label in labels:
        r = layout.rect(label)
        cx, cy = r.center
        dx, dy = rng.normal(0.0, TYPING_AIM_SIGMA_PX, size=2)
        out.append(_Target(_clamp_into(cx + dx, r.x0, r.x1), _clamp_into(cy + dy, r.y0, r.y1), label, typing=True))
    return out


# -- rendering -----------------------------------------------------------------


def min_jerk(tau: np.ndarray) -> np.ndarray:
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


class _Renderer:
    def __init__(self, screen: ScreenSpec, profile: TrajectoryProfile, rng: np.random.Generator):
        self.screen = screen
        self.p = profile
        self.rng = rng
        self.events: list[InputEvent] = []
        self.last_pos: tuple[float, float] = (0.0, 0.0)

    def _clip(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = np.clip(xs, 0.0, math.nextafter(self.screen.width_px, 0))
        ys = np.clip(ys, 0.0, math.nextafter(self.screen.height_px, 0))
        return xs, ys

    def segment(self, a: tuple[float, float], b: tuple[float, float], t0_us: int, t1_us: int) -> None:
        """Hover samples while moving from *a* (at t0) toward *b* (reached at t1)."""
        p, rng = self.p, self.rng
        dur_ms = (t1_us - t0_us) / 1000.0
        n_max = int(dur_ms / max(p.sample_mean_ms, 1e-9)) + 2
        lift = rng.uniform(0.5, 1.5) * p.lift_delay_ms
        jitter = rng.normal(0.0, p.sample_jitter_ms / math.sqrt(2.0), size=n_max)
        t_ms = lift + np.arange(n_max) * p.sample_mean_ms + jitter
        t_us = np.rint(t0_us + t_ms * 1000.0).astype(np.int64)
        for j in range(len(t_us)):
            lo = t0_us + 1 if j == 0 else t_us[j - 1] + 5000
            t_us[j] = max(t_us[j], lo)
        # leave room for the hover_exit that precedes the next touch
        t_us = t_us[t_us < t1_us - 1000]

        ax, ay = a
        bx, by = b
        dx, dy = bx - ax, by - ay
        dist = math.hypot(dx, dy)
        ux, uy = (dx / dist, dy / dist) if dist > 1e-9 else (0.0, 0.0)
        off_x = p.offset_bias_px[0] + p.direction_gain_px * ux
        off_y = p.offset_bias_px[1] + p.direction_gain_px * uy

        s = min_jerk((t_us - t0_us) / max(t1_us - t0_us, 1))
        noise = rng.normal(0.0, p.path_noise_px, size=(len(t_us), 2))
        xs, ys = self._clip(ax + s * dx + off_x + noise[:, 0], ay + s * dy + off_y + noise[:, 1])
        for t, x, y in zip(t_us.tolist(), xs.tolist(), ys.tolist()):
            self.events.append(InputEvent(EventKind.HOVER_MOVE, t, x, y))
        if len(t_us):
            self.last_pos = (xs[-1], ys[-1])

    def emit(self, kind: EventKind, t_us: int, x: float, y: float) -> None:
        self.events.append(InputEvent(kind, t_us, x, y))


def _render(
    screen: ScreenSpec,
    method: InputMethod,
    user_id: int,
    seed: int,
    targets: Sequence[_Target],
    profile: TrajectoryProfile,
    rng: np.random.Generator,
) -> tuple[Session, list[bool]]:
    p = profile
    ren = _Renderer(screen, p, rng)
    lognormal = lambda median, sigma: float(rng.lognormal(math.log(median), sigma))

    start = (
        float(rng.uniform(BALL_MARGIN_PX, screen.width_px - BALL_MARGIN_PX)),
        float(rng.uniform(BALL_MARGIN_PX, screen.height_px - BALL_MARGIN_PX)),
    )
    ren.emit(EventKind.HOVER_ENTER, 0, *start)
    ren.last_pos = start

    clicks: list[Click] = []
    pos = start
    seg_start_us = 0
    prev_down_us: Optional[int] = None
    for tgt in targets:
        duration_us = max(int(round(lognormal(p.click_duration_median_ms, CLICK_DURATION_SIGMA_LOG) * 1000)), 1000)
        interval_ms = lognormal(p.interclick_median_ms, p.interclick_sigma_log)
        if prev_down_us is None:
            down_us = seg_start_us + int(round(max(interval_ms, p.min_hover_gap_ms) * 1000))
        else:
            interval_ms = max(interval_ms, tgt.min_gap_ms)
            down_us = max(
                prev_down_us + int(round(interval_ms * 1000)),
                seg_start_us + int(round(p.min_hover_gap_ms * 1000)),
            )
        point = (tgt.x, tgt.y)
        ren.segment(pos, point, seg_start_us, down_us)
        ren.emit(EventKind.HOVER_EXIT, down_us - 1, *ren.last_pos)
        ren.emit(EventKind.TOUCH_DOWN, down_us, *point)
        up_us = down_us + duration_us
        ren.emit(EventKind.TOUCH_UP, up_us, *point)
        clicks.append(Click(down_us, up_us, tgt.x, tgt.y, tgt.label))
        ren.last_pos = point
        pos, seg_start_us, prev_down_us = point, up_us, down_us

    # drift away and leave the hover band
    exit_pt = (
        float(rng.uniform(BALL_MARGIN_PX, screen.width_px - BALL_MARGIN_PX)),
        float(rng.uniform(BALL_MARGIN_PX, screen.height_px - BALL_MARGIN_PX)),
    )
    end_us = seg_start_us + int(round(max(lognormal(p.interclick_median_ms, p.interclick_sigma_log), p.min_hover_gap_ms) * 1000))
    ren.segment(pos, exit_pt, seg_start_us, end_us)
    ren.emit(EventKind.HOVER_EXIT, end_us, *ren.last_pos)

    session = Session(screen, method, user_id, tuple(ren.events), tuple(clicks), seed)
    return session, [t.typing for t in targets]


def _resolve_profile(method: InputMethod, profile: Optional[TrajectoryProfile], user_id: int) -> TrajectoryProfile:
    return profile if profile is not None else default_profile(method, user_id)


def synth_session(
    screen: ScreenSpec,
    method: InputMethod,
    use_case: UseCase,
    profile: Optional[TrajectoryProfile] = None,
    seed: int = 0,
    user_id: int = 0,
) -> Session:
    """Generate one ground-truth session; identical arguments give identical sessions."""
    method = InputMethod(method)
    profile = _resolve_profile(method, profile, user_id)
    rng = np.random.default_rng(seed)
    if isinstance(use_case, BallGame):
        targets = _ball_targets(screen, use_case.n_clicks, rng)
    elif isinstance(use_case, Typing):
        targets = _typing_targets(make_layout(screen), use_case.text, rng)
    else:
        raise TypeError(f"unknown use case {use_case!r}")
    session, _ = _render(screen, method, user_id, seed, targets, profile, rng)
    return session


KEYBOARD_LOAD_MS = (500.0, 900.0)


def synth_mixed(
    screen: ScreenSpec,
    method: InputMethod,
    plan: Sequence[UseCase],
    profile: Optional[TrajectoryProfile] = None,
    seed: int = 0,
    user_id: int = 0,
) -> tuple[Session, list[bool]]:
    """Interleave typing and generic clicking in one session.

    Each typing block is preceded by a click on a text box in the upper part
    of the screen, and the first key follows it only after the keyboard has
    loaded.  Returns the session and a per-click flag marking typing clicks.
    """
    method = InputMethod(method)
    profile = _resolve_profile(method, profile, user_id)
    rng = np.random.default_rng(seed)
    layout = make_layout(screen)
    targets: list[_Target] = []
    for uc in plan:
        if isinstance(uc, BallGame):
            targets.extend(_ball_targets(screen, uc.n_clicks, rng))
        elif isinstance(uc, Typing):
            box_y = rng.uniform(BALL_MARGIN_PX, layout.region.y0 / 2)
            box_x = rng.uniform(BALL_MARGIN_PX, screen.width_px - BALL_MARGIN_PX)
            targets.append(_Target(float(box_x), float(box_y), None))
            keys = _typing_targets(layout, uc.text, rng)
            delay = float(rng.uniform(*KEYBOARD_LOAD_MS))
            keys[0] = dataclasses.replace(keys[0], min_gap_ms=delay)
            targets.extend(keys)
        else:
            raise TypeError(f"unknown use case {uc!r}")
    return _render(screen, method, user_id, seed, targets, profile, rng)


def typing_intervals(session: Session, typing_flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Maximal runs of typing clicks as ``(first t_down_us, last t_up_us)``."""
    out: list[tuple[int, int]] = []
    run_start: Optional[int] = None
    for i, (c, flag) in enumerate(zip(session.truth_clicks, typing_flags)):
        if flag and run_start is None:
            run_start = i
        if run_start is not None and (not flag or i == len(typing_flags) - 1):
            last = i if flag else i - 1
            out.append((session.truth_clicks[run_start].t_down_us, session.truth_clicks[last].t_up_us))
            run_start = None
    return out
