import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoversim.events import EventKind, ScreenSpec, serialize_session, validate_session
from hoversim.synth import (
    SAMPLE_TEXT,
    BallGame,
    TrajectoryProfile,
    Typing,
    default_profile,
    key_at,
    make_layout,
    min_jerk,
    nearest_key,
    profile_from_config,
    synth_mixed,
    synth_session,
    text_to_labels,
    typing_intervals,
    user_bias,
)

SCREEN = ScreenSpec()
LAYOUT = make_layout(SCREEN)


class TestLayout:
    def test_hand_computed_geometry(self):
        # region: bottom 2/5 of 1280 = 512px from y=768; four rows of 128px
        assert (LAYOUT.region.y0, LAYOUT.region.y1) == (768, 1280)
        q = LAYOUT.rect("q")
        assert (q.x0, q.x1, q.y0, q.y1) == (0, 72, 768, 896)
        # row 2: 9 keys, 720 // 9 = 80
        assert (LAYOUT.rect("a").x0, LAYOUT.rect("a").x1) == (0, 80)
        assert (LAYOUT.rect("l").x0, LAYOUT.rect("l").x1) == (640, 720)
        # row 3: 7 keys, 720 // 7 = 102, remainder 6 on 'm'
        assert (LAYOUT.rect("m").x0, LAYOUT.rect("m").x1) == (612, 720)
        # row 4: 8 units of 90px, space is 6 of them
        assert [(LAYOUT.rect(k).x0, LAYOUT.rect(k).x1) for k in (",", "space", ".")] == [(0, 90), (90, 630), (630, 720)]
        assert LAYOUT.rect("space").y1 == 1280

    def test_every_pixel_of_the_region_has_exactly_one_key(self):
        xs, ys = np.meshgrid(np.arange(720) + 0.5, np.arange(768, 1280) + 0.5)
        hits = np.zeros(xs.shape, dtype=int)
        for _, r in LAYOUT.keys:
            hits += (xs >= r.x0) & (xs < r.x1) & (ys >= r.y0) & (ys < r.y1)
        assert np.all(hits == 1)

    def test_keys_lie_in_region_and_region_in_screen(self):
        assert LAYOUT.region.within(SCREEN.rect)
        assert all(r.within(LAYOUT.region) for _, r in LAYOUT.keys)

    def test_deterministic(self):
        assert make_layout(SCREEN) == make_layout(ScreenSpec())

    def test_too_small_screen(self):
        with pytest.raises(ValueError):
            make_layout(ScreenSpec(300, 640))

    def test_key_at(self):
        assert key_at(LAYOUT, *LAYOUT.rect("a").center) == "a"
        assert key_at(LAYOUT, 100, 100) is None
        assert key_at(LAYOUT, 72, 800) == "w"  # shared q/w edge belongs to w
        assert key_at(LAYOUT, 71.999, 800) == "q"

    def test_nearest_key(self):
        assert nearest_key(LAYOUT, 5, 700) == "q"
        assert nearest_key(LAYOUT, 360, 1279) == "space"

    def test_text_to_labels(self):
        assert text_to_labels("a b.", LAYOUT) == ["a", "space", "b", "."]
        with pytest.raises(ValueError):
            text_to_labels("Hi", LAYOUT)


class TestProfiles:
    def test_defaults(self):
        s = default_profile("stylus")
        f = default_profile("finger", user_id=5)
        assert (s.path_noise_px, s.direction_gain_px, s.offset_bias_px) == (3.0, 0.0, (0.0, 0.0))
        assert (f.path_noise_px, f.direction_gain_px) == (40.0, 60.0)
        for p in (s, f):
            assert (p.sample_mean_ms, p.sample_jitter_ms, p.interclick_median_ms) == (19.0, 4.0, 400.0)
            assert (p.interclick_sigma_log, p.click_duration_median_ms) == (0.45, 60.0)

    def test_user_bias_is_per_user_and_stable(self):
        assert default_profile("finger", 7).offset_bias_px == default_profile("finger", 7).offset_bias_px
        assert user_bias(1) != user_bias(2)

    def test_user_bias_spread(self):
        b = np.array([user_bias(u) for u in range(2000)])
        assert abs(b.mean()) < 3 and 27 < b.std() < 33

    def test_invalid(self):
        with pytest.raises(ValueError):
            TrajectoryProfile(sample_mean_ms=0)
        with pytest.raises(ValueError):
            TrajectoryProfile(path_noise_px=-1)

    def test_config_overrides(self):
        text = "# finger tweaks\npath_noise_px = 12\noffset_bias_px = (3, -4)\nusers = 9\n"
        p = profile_from_config(text, default_profile("stylus"))
        assert p.path_noise_px == 12.0 and p.offset_bias_px == (3.0, -4.0)
        assert p.sample_mean_ms == 19.0


class TestSessions:
    def test_same_seed_same_bytes(self):
        a = synth_session(SCREEN, "finger", BallGame(20), seed=7, user_id=1)
        b = synth_session(SCREEN, "finger", BallGame(20), seed=7, user_id=1)
        assert serialize_session(a) == serialize_session(b)
        c = synth_session(SCREEN, "finger", BallGame(20), seed=8, user_id=1)
        assert serialize_session(a) != serialize_session(c)

    def test_typing_hello(self):
        s = synth_session(SCREEN, "stylus", Typing("hello"), seed=1)
        assert [c.key_label for c in s.truth_clicks] == list("hello")

    def test_typing_labels_match_key_under_click(self):
        s = synth_session(SCREEN, "finger", Typing(SAMPLE_TEXT[:300]), seed=2)
        assert all(key_at(LAYOUT, c.x, c.y) == c.key_label for c in s.truth_clicks)

    def test_ball_points_respect_margin(self):
        s = synth_session(SCREEN, "stylus", BallGame(300), seed=3)
        pts = np.array([(c.x, c.y) for c in s.truth_clicks])
        assert pts.min() >= 20 and pts[:, 0].max() <= 700 and pts[:, 1].max() <= 1260

    def test_bad_text(self):
        with pytest.raises(ValueError):
            synth_session(SCREEN, "stylus", Typing("ÿ"), seed=1)
        with pytest.raises(ValueError):
            Typing("")
        with pytest.raises(ValueError):
            BallGame(0)

    def test_finger_interclick_gaps(self):
        s = synth_session(SCREEN, "finger", BallGame(500), seed=11, user_id=3)
        downs = np.array([c.t_down_us for c in s.truth_clicks])
        assert np.mean(np.diff(downs) > 180_000) >= 0.93

    def test_hover_cadence(self):
        s = synth_session(SCREEN, "stylus", BallGame(200), seed=5)
        gaps = []
        prev = None
        for e in s.events:
            if e.kind is EventKind.HOVER_MOVE:
                if prev is not None:
                    gaps.append(e.t_us - prev)
                prev = e.t_us
            elif e.kind.is_touch:
                prev = None
        gaps = np.array(gaps) / 1000.0
        assert len(gaps) >= 1000
        assert abs(gaps.mean() - 19.0) <= 2.0
        assert gaps.min() >= 5.0

    def test_stylus_hovers_track_the_path(self):
        # the first hover after each click sits within a few px of the click
        s = synth_session(SCREEN, "stylus", BallGame(100), seed=6)
        ev = s.events
        errs = []
        for i, e in enumerate(ev):
            if e.kind is EventKind.TOUCH_UP and i + 1 < len(ev) and ev[i + 1].kind is EventKind.HOVER_MOVE:
                errs.append(np.hypot(ev[i + 1].x - e.x, ev[i + 1].y - e.y))
        assert np.sqrt(np.mean(np.square(errs))) < 8

    def test_click_duration_median(self):
        s = synth_session(SCREEN, "stylus", BallGame(2000), seed=12)
        d = np.array([c.t_up_us - c.t_down_us for c in s.truth_clicks]) / 1000.0
        assert 55 < np.median(d) < 65

    def test_profile_override_changes_noise(self):
        quiet = dataclasses.replace(default_profile("finger", 1), path_noise_px=0.0, direction_gain_px=0.0,
                                    offset_bias_px=(0.0, 0.0))
        s = synth_session(SCREEN, "finger", BallGame(50), profile=quiet, seed=1, user_id=1)
        ev = s.events
        # with no noise the first post-click hover is on the segment leaving the click
        for i, e in enumerate(ev[:-1]):
            if e.kind is EventKind.TOUCH_UP and ev[i + 1].kind is EventKind.HOVER_MOVE:
                assert np.hypot(ev[i + 1].x - e.x, ev[i + 1].y - e.y) < 5


class TestMixed:
    def test_typing_flags_and_intervals(self):
        s, flags = synth_mixed(SCREEN, "stylus", [BallGame(3), Typing("abcd"), BallGame(2), Typing("xyz.")], seed=1)
        assert flags == [False] * 3 + [False] + [True] * 4 + [False] * 2 + [False] + [True] * 4
        assert validate_session(s) == []
        iv = typing_intervals(s, flags)
        assert iv == [(s.truth_clicks[4].t_down_us, s.truth_clicks[7].t_up_us),
                      (s.truth_clicks[11].t_down_us, s.truth_clicks[14].t_up_us)]

    def test_first_key_waits_for_keyboard(self):
        s, flags = synth_mixed(SCREEN, "stylus", [BallGame(2), Typing("abcd")], seed=4)
        first = flags.index(True)
        gap = s.truth_clicks[first].t_down_us - s.truth_clicks[first - 1].t_down_us
        assert gap >= 500_000
        # the click before typing is a text box above the keyboard
        assert s.truth_clicks[first - 1].y < LAYOUT.region.y0


def test_min_jerk_endpoints_and_monotone():
    tau = np.linspace(0, 1, 101)
    s = min_jerk(tau)
    assert s[0] == 0 and s[-1] == 1 and np.all(np.diff(s) >= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["stylus", "finger"]), st.integers(1, 15))
def test_property_generated_sessions_validate(seed, method, n):
    s = synth_session(SCREEN, method, BallGame(n), seed=seed, user_id=seed % 50)
    assert validate_session(s) == []
    assert len(s.truth_clicks) == n
