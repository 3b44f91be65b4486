import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import SCREEN, mixed_corpus
from oracles import edit_distance_oracle
from hoversim.analysis import (
    BIOMETRIC_COLUMNS,
    DETECTION_COLUMNS,
    SEGMENT_COLUMNS,
    BiometricRecord,
    HeuristicConfig,
    biometrics,
    biometrics_csv,
    detect_keyboard,
    detection_csv,
    edit_distance,
    reconstruct_text,
    score_detection,
    segments_csv,
)
from hoversim.attacker import CapturedClick, Hover, run_attack
from hoversim.synth import BallGame, Typing, make_layout, nearest_key, typing_intervals

LAYOUT = make_layout(SCREEN)
SIMPLE = HeuristicConfig.for_layout(LAYOUT)
REFINED = HeuristicConfig.for_layout(LAYOUT, refined=True)


def cap(i, t_down_ms, y, dt_up_ms=60):
    hovers = () if y is None else (Hover(dt_up_ms * 1000 + 5000, 100, y),)
    return CapturedClick(0, i, t_down_ms * 1000, dt_up_ms * 1000, hovers)


def stream(ys, step_ms=400):
    return [cap(i, 1000 + i * step_ms, y) for i, y in enumerate(ys)]


KB, TOP = 1000.0, 300.0


class TestDetect:
    def test_nothing_on_the_keyboard(self):
        caps = stream([TOP] * 10)
        assert detect_keyboard(caps, SIMPLE) == [] and detect_keyboard(caps, REFINED) == []

    def test_simple_runs(self):
        caps = stream([TOP, KB, KB, TOP, KB, None, KB])
        assert detect_keyboard(caps, SIMPLE) == [(1, 3), (4, 5), (6, 7)]

    def test_refined_drops_short_runs(self):
        caps = stream([TOP, KB, KB, KB, TOP], step_ms=600)
        assert detect_keyboard(caps, SIMPLE) == [(1, 4)]
        assert detect_keyboard(caps, REFINED) == []

    def test_refined_needs_a_pause_before_the_first_key(self):
        fast = stream([TOP] + [KB] * 5, step_ms=400)
        assert detect_keyboard(fast, REFINED) == []
        slow = [cap(0, 0, TOP)] + [cap(i, 600 + i * 300, KB) for i in range(1, 6)]
        assert detect_keyboard(slow, REFINED) == [(1, 6)]

    def test_run_at_the_start_passes_the_delay(self):
        assert detect_keyboard(stream([KB] * 4), REFINED) == [(0, 4)]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HeuristicConfig(LAYOUT.region, min_seq_len=0)
        with pytest.raises(ValueError):
            HeuristicConfig(LAYOUT.region, first_key_delay_ms=-1)


class TestScore:
    def test_perfect_segments(self):
        caps = stream([TOP, KB, KB, TOP])
        truth = [(caps[1].t_down_us, caps[2].t_up_us)]
        r = score_detection([(1, 3)], truth, caps)
        assert (r.false_positives, r.false_negatives, r.n_typing, r.n_other) == (0, 0, 2, 2)

    def test_flag_everything(self):
        caps = stream([TOP, KB, KB, TOP])
        truth = [(caps[1].t_down_us, caps[2].t_up_us)]
        r = score_detection([(0, 4)], truth, caps)
        assert r.false_positive_rate == 1.0 and r.false_negative_rate == 0.0

    def test_flag_nothing(self):
        caps = stream([KB, KB])
        r = score_detection([], [(0, 10**9)], caps)
        assert r.false_negatives == 2 and r.false_negative_rate == 1.0 and r.false_positive_rate == 0.0


class TestBiometrics:
    def test_two_clicks(self):
        caps = [CapturedClick(0, 0, 0, 50_000), CapturedClick(0, 1, 300_000, 60_000)]
        assert biometrics(caps) == [BiometricRecord(0, 50.0, 300.0, 250.0), BiometricRecord(1, 60.0)]

    def test_single_click(self):
        assert biometrics([CapturedClick(0, 0, 10, 42_000)]) == [BiometricRecord(0, 42.0)]

    def test_errors(self):
        with pytest.raises(ValueError):
            biometrics([])
        with pytest.raises(ValueError):
            biometrics([CapturedClick(0, 0, 100_000, 50_000), CapturedClick(0, 1, 120_000, 50_000)])

    def test_recovered_timing_matches_truth(self):
        (s, _), = mixed_corpus("finger", lambda u: [BallGame(40)], users=[3])
        caps, _, _ = run_attack(s)
        truth = s.truth_clicks
        exact = biometrics(caps)
        for r, a, b in zip(exact, truth, truth[1:]):
            assert r.click_duration_ms == (a.t_up_us - a.t_down_us) / 1000
            assert r.inter_click_ms == (b.t_down_us - a.t_down_us) / 1000
            assert r.hover_gap_ms == (b.t_down_us - a.t_up_us) / 1000
        # decoded records keep whole milliseconds; corpus statistics stay within 1ms
        coarse = biometrics([c.quantized() for c in caps])
        for field in ("click_duration_ms", "inter_click_ms", "hover_gap_ms"):
            a = np.mean([getattr(r, field) for r in exact[:-1]])
            b = np.mean([getattr(r, field) for r in coarse[:-1]])
            assert abs(a - b) <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_property_values_are_consistent(self, seed):
        (s, _), = mixed_corpus("finger", lambda u: [BallGame(6)], users=[seed % 7], seed0=seed)
        caps, _, _ = run_attack(s)
        for recs in (biometrics(caps), biometrics([c.quantized() for c in caps])):
            for r in recs[:-1]:
                assert min(r.click_duration_ms, r.inter_click_ms, r.hover_gap_ms) >= 0
                assert r.hover_gap_ms <= r.inter_click_ms
                assert r.hover_gap_ms + r.click_duration_ms <= r.inter_click_ms + 1.0


class TestText:
    def test_reconstruct(self):
        assert reconstruct_text(["h", "i", "space", "y", "o", "u", "."]) == "hi you."
        assert reconstruct_text([]) == ""

    def test_stylus_typing_reads_back(self):
        text = "the quick brown fox jumps over the lazy dog."
        (s, flags), = mixed_corpus("stylus", lambda u: [Typing(text)], users=[2])
        caps, _, _ = run_attack(s)
        typed = [c for c, f in zip(caps, flags) if f]
        keys = [nearest_key(LAYOUT, c.hovers[0].x, c.hovers[0].y) for c in typed]
        assert edit_distance(reconstruct_text(keys), text) <= 0.05 * len(text)

    def test_edit_distance_examples(self):
        assert edit_distance("kitten", "sitting") == 3
        assert edit_distance("", "abc") == 3
        assert edit_distance("same", "same") == 0


class TestCsv:
    def test_headers_and_endings(self):
        caps = stream([TOP, KB, KB])
        rep = score_detection([(1, 3)], [(caps[1].t_down_us, caps[2].t_up_us)], caps)
        for text, cols in [
            (detection_csv([("simple", rep)]), DETECTION_COLUMNS),
            (segments_csv([(0, "simple", [(1, 3)], caps)]), SEGMENT_COLUMNS),
            (biometrics_csv([(0, r) for r in biometrics(caps)]), BIOMETRIC_COLUMNS),
        ]:
            assert text.splitlines()[0] == ",".join(cols)
            assert text.endswith("\n") and "\r" not in text

    def test_rows(self):
        caps = stream([TOP, KB, KB])
        rep = score_detection([(1, 3)], [(caps[1].t_down_us, caps[2].t_up_us)], caps)
        assert detection_csv([("simple", rep)]).splitlines()[1] == "simple,3,2,1,0,0,0.000000,0.000000"
        assert segments_csv([(4, "refined", [(1, 3)], caps)]).splitlines()[1] == "4,refined,0,1,2,1400,1860"
        assert biometrics_csv([(0, r) for r in biometrics(caps)]).splitlines()[-1] == "0,2,60.000,,"


def test_mixed_workload_detection_end_to_end():
    plan = lambda u: [BallGame(10), Typing("hello there"), BallGame(5)]
    for s, flags in mixed_corpus("stylus", plan, users=range(3)):
        caps, _, _ = run_attack(s)
        truth = typing_intervals(s, flags)
        simple = score_detection(detect_keyboard(caps, SIMPLE), truth, caps)
        refined = score_detection(detect_keyboard(caps, REFINED), truth, caps)
        assert simple.false_negatives == 0 and refined.false_negatives == 0
        assert refined.false_positives <= simple.false_positives


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([TOP, KB, None]), st.integers(100, 900)), max_size=40),
       st.integers(1, 6), st.integers(0, 900))
def test_property_refined_is_a_subset_of_simple(items, min_len, delay):
    t, caps = 0, []
    for i, (y, step) in enumerate(items):
        t += step
        caps.append(cap(i, t, y))
    simple = detect_keyboard(caps, SIMPLE)
    refined = detect_keyboard(caps, HeuristicConfig(LAYOUT.region, min_len, delay, refined=True))
    assert set(refined) <= set(simple)
    covered = [i for a, b in simple for i in range(a, b)]
    assert len(covered) == len(set(covered))
    assert all(caps[i].hovers and caps[i].hovers[0].y >= LAYOUT.region.y0 for i in covered)


@settings(max_examples=200, deadline=None)
@given(st.text("abc ", max_size=12), st.text("abc ", max_size=12))
def test_property_edit_distance_matches_oracle(a, b):
    assert edit_distance(a, b) == edit_distance_oracle(a, b) == edit_distance(b, a)


def test_no_hover_capture_breaks_detection_runs():
    caps = stream([KB, KB, None, KB, KB])
    assert detect_keyboard(caps, SIMPLE) == [(0, 2), (3, 5)]
    assert np.all([c.hovers == () for c in caps[2:3]])
