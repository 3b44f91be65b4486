"""What an attacker does with captures: spot typing, time clicks, read text."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

from .attacker import CapturedClick
from .events import Rect
from .synth import LABEL_TO_CHAR, KeyboardLayout


@dataclass(frozen=True)
class HeuristicConfig:
    keyboard_region: Rect
    min_seq_len: int = 4
    first_key_delay_ms: int = 500
    refined: bool = False

    def __post_init__(self) -> None:
        if self.min_seq_len < 1:
            raise ValueError("min_seq_len must be >= 1")
        if self.first_key_delay_ms < 0:
            raise ValueError("first_key_delay_ms must be >= 0")

    @classmethod
    def for_layout(cls, layout: KeyboardLayout, refined: bool = False, **kw) -> "HeuristicConfig":
        return cls(layout.region, refined=refined, **kw)


# A segment is a half-open range [start, stop) of capture indices.
Segment = tuple[int, int]


def _on_keyboard(c: CapturedClick, region: Rect) -> bool:
    return bool(c.hovers) and region.contains(c.hovers[0].x, c.hovers[0].y)


def detect_keyboard(captures: Sequence[CapturedClick], cfg: HeuristicConfig) -> list[Segment]:
    """Runs of clicks whose first post-click hover lands on the keyboard.

    The refined mode keeps a run only if it is at least ``min_seq_len`` long
    and its first click comes ``first_key_delay_ms`` or more after the click
    before it (the keyboard needs time to appear).  A run that opens the
    capture list has no predecessor and passes the delay test.
    """
    runs: list[Segment] = []
    start: Optional[int] = None
    for i, c in enumerate(captures):
        inside = _on_keyboard(c, cfg.keyboard_region)
        if inside and start is None:
            start = i
        elif not inside and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(captures)))
    if not cfg.refined:
        return runs

    kept = []
    for a, b in runs:
        if b - a < cfg.min_seq_len:
            continue
        if a > 0:
            gap_us = captures[a].t_down_us - captures[a - 1].t_down_us
            if gap_us < cfg.first_key_delay_ms * 1000:
                continue
        kept.append((a, b))
    return kept


@dataclass(frozen=True)
class DetectionReport:
    segments: tuple[Segment, ...]
    n_typing: int
    n_other: int
    false_positives: int
    false_negatives: int

    @property
    def false_positive_rate(self) -> float:
        return self.false_positives / self.n_other if self.n_other else 0.0

    @property
    def false_negative_rate(self) -> float:
        return self.false_negatives / self.n_typing if self.n_typing else 0.0


def typing_mask(captures: Sequence[CapturedClick], truth_intervals: Sequence[tuple[int, int]]) -> list[bool]:
    """Whether each capture's TouchDown falls in a ground-truth typing interval.

    Compared at millisecond resolution so decoded records (whose times are
    floored to the ms) classify the same way as exact ones.
    """
    spans = [(lo // 1000, hi // 1000) for lo, hi in truth_intervals]
    return [any(lo <= c.t_down_ms <= hi for lo, hi in spans) for c in captures]


def score_detection(
    segments: Sequence[Segment],
    truth_intervals: Sequence[tuple[int, int]],
    captures: Sequence[CapturedClick],
) -> DetectionReport:
    """Click-level false positive and false negative counts."""
    typing = typing_mask(captures, truth_intervals)
    flagged = [False] * len(captures)
    for a, b in segments:
        for i in range(a, b):
            flagged[i] = True
    fp = sum(1 for t, f in zip(typing, flagged) if f and not t)
    fn = sum(1 for t, f in zip(typing, flagged) if t and not f)
    n_typing = sum(typing)
    return DetectionReport(tuple(segments), n_typing, len(captures) - n_typing, fp, fn)


@dataclass(frozen=True)
class BiometricRecord:
    click_index: int
    click_duration_ms: float
    # to the next click; None on the last one
    inter_click_ms: Optional[float] = None
    hover_gap_ms: Optional[float] = None


def biometrics(captures: Sequence[CapturedClick]) -> list[BiometricRecord]:
    """Click duration, down-to-down interval and up-to-down hover time."""
    if not captures:
        raise ValueError("biometrics needs at least one click")
    out = []
    for i, c in enumerate(captures):
        duration = c.dt_up_us / 1000.0
        if i + 1 < len(captures):
            nxt = captures[i + 1]
            if nxt.t_down_us < c.t_up_us:
                raise ValueError(f"captures {i} and {i + 1} are not time-ordered")
            out.append(
                BiometricRecord(
                    c.click_index,
                    duration,
                    (nxt.t_down_us - c.t_down_us) / 1000.0,
                    (nxt.t_down_us - c.t_up_us) / 1000.0,
                )
            )
        else:
            out.append(BiometricRecord(c.click_index, duration))
    return out


def reconstruct_text(keys: Sequence[str]) -> str:
    """Join predicted key labels; no correction of any kind."""
    return "".join(LABEL_TO_CHAR.get(k, k) for k in keys)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# -- CSV -----------------------------------------------------------------------

DETECTION_COLUMNS = ("mode", "n_clicks", "n_typing", "n_segments", "false_positives", "false_negatives", "fp_rate", "fn_rate")
SEGMENT_COLUMNS = ("user_id", "mode", "segment", "first_click", "last_click", "t_start_ms", "t_end_ms")
BIOMETRIC_COLUMNS = ("user_id", "click_index", "click_duration_ms", "inter_click_ms", "hover_gap_ms")


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.3f}"


def _csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def detection_csv(reports: Sequence[tuple[str, DetectionReport]]) -> str:
    rows = [
        [mode, str(r.n_typing + r.n_other), str(r.n_typing), str(len(r.segments)), str(r.false_positives),
         str(r.false_negatives), f"{r.false_positive_rate:.6f}", f"{r.false_negative_rate:.6f}"]
        for mode, r in reports
    ]
    return _csv(DETECTION_COLUMNS, rows)


def segments_csv(rows_in: Sequence[tuple[int, str, Sequence[Segment], Sequence[CapturedClick]]]) -> str:
    """One row per segment; input is ``(user_id, mode, segments, captures)`` groups."""
    rows = []
    for uid, mode, segs, captures in rows_in:
        for n, (a, b) in enumerate(segs):
            first, last = captures[a], captures[b - 1]
            rows.append([str(uid), mode, str(n), str(first.click_index), str(last.click_index),
                         str(first.t_down_ms), str(last.t_down_ms + last.dt_up_ms)])
    return _csv(SEGMENT_COLUMNS, rows)


def biometrics_csv(records: Sequence[tuple[int, BiometricRecord]]) -> str:
    rows = [
        [str(uid), str(r.click_index), _fmt(r.click_duration_ms), _fmt(r.inter_click_ms), _fmt(r.hover_gap_ms)]
        for uid, r in records
    ]
    return _csv(BIOMETRIC_COLUMNS, rows)
