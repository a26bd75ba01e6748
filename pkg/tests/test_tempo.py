"""
Unit tests for `tempo.py`: the comb-filter estimator, the LCS median estimator and the
rule that picks between them.

### Test Cases:

- Comb filter on synthetic click tracks across the searched bpm range, with and without
  timing jitter, and its half-period lock when half-beats are struck as hard as 1-beats.
- LCS estimator on the printed Joining B sample (median gap 1.53 s) and its error when
  fewer than two 1-beats are matched.
- Selection between the two estimates, including the half/double-period warning.
- Properties: amplitude invariance of the comb filter, translation invariance and median
  robustness of the LCS estimator.
"""
import os
import tempfile
import unittest
import warnings

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from src.audio import AudioSignal
from src.bols import get_bol
from src.config import DEFAULT_DICTIONARY_PATH, PipelineConfig
from src.signatures import BolEvent, SignalSignature, extend_signature, find_entry, load_dictionary
from src.tempo import (
    HalfDoublePeriodWarning,
    TempoEstimate,
    band_pass,
    comb_tempo,
    impulse_train,
    lcs_tempo,
    select_tempo,
    tempo_error,
    write_comb_energy_csv,
)
from src.utils.error_handling import TempoEstimationError
from src.utils.io_utils import read_csv

DICTIONARY = load_dictionary(DEFAULT_DICTIONARY_PATH)

JOINING_B_SAMPLE = [
    (1.04, 1.39, "dhit"), (1.97, 2.32, "dhit"), (2.90, 3.26, "tei"),
    (4.58, 4.91, "dhit"), (5.38, 5.73, "dhit"), (6.19, 6.53, "tei"),
    (7.72, 8.04, "dhit"), (8.46, 8.79, "dhit"), (9.23, 9.56, "tei"),
    (10.62, 10.95, "dhit"), (11.37, 11.70, "dhit"), (12.11, 12.46, "tei"),
]


def click_onsets(period, duration, jitter=0.0, seed=0, start=0.25):
    rng = np.random.default_rng(seed)
    onsets = []
    onset = start
    while onset + 0.05 < duration:
        offset = rng.uniform(-jitter, jitter) * period if jitter else 0.0
        onsets.append(onset + offset)
        onset += period
    return onsets


def click_track(onsets, duration=15.0, sample_rate=16000, amplitude=0.5):
    """Short 1500 Hz Hann-windowed tone bursts at the given onsets."""
    n = int(round(0.02 * sample_rate))
    t = np.arange(n) / sample_rate
    click = amplitude * np.hanning(n) * np.sin(2.0 * np.pi * 1500.0 * t)
    samples = np.zeros(int(duration * sample_rate))
    for onset in onsets:
        start = int(round(onset * sample_rate))
        samples[start:start + n] += click
    return AudioSignal(samples, sample_rate)


def signature_from(rows, energy=1.0):
    return SignalSignature(tuple(BolEvent(get_bol(label), s, e, energy) for s, e, label in rows))


class TestCombTempo(unittest.TestCase):
    """
    Test case for the comb-filter estimator.
    """

    def test_bpm_grid_recovered_exactly(self):
        """
        Click tracks at integer tempi across the searched range are recovered exactly.
        """
        for bpm in (35, 40, 45, 60, 72, 75):
            with self.subTest(bpm=bpm):
                sig = click_track(click_onsets(60.0 / bpm, 15.0))
                estimate = comb_tempo(sig)
                self.assertEqual(estimate.bpm, bpm)
                self.assertAlmostEqual(estimate.period, 60.0 / bpm)
                self.assertEqual(estimate.method, "comb")

    def test_jittered_clicks_within_one_bpm(self):
        """
        Clicks displaced by up to 3% of the period still give the tempo within 1 bpm.
        """
        sig = click_track(click_onsets(1.0, 30.0, jitter=0.03, seed=7), duration=30.0)
        self.assertLessEqual(abs(comb_tempo(sig).bpm - 60), 1)

    def test_equal_half_beats_lock_to_half_period(self):
        """
        When half-beats are struck as hard as 1-beats the estimator returns half the period.
        """
        period = 60.0 / 36
        beats = click_onsets(period, 15.0)
        halves = [t + period / 2 for t in beats if t + period / 2 + 0.05 < 15.0]
        estimate = comb_tempo(click_track(sorted(beats + halves)))
        self.assertEqual(estimate.bpm, 72)
        self.assertAlmostEqual(estimate.period, period / 2, places=6)

    def test_energy_table_covers_search_range(self):
        """
        The returned table holds one energy per candidate bpm, and the winner has the largest.
        """
        estimate = comb_tempo(click_track(click_onsets(1.5, 15.0)))
        self.assertEqual(sorted(estimate.band_energies), list(range(33, 76)))
        self.assertEqual(max(estimate.band_energies, key=estimate.band_energies.get), estimate.bpm)

    def test_short_signal_is_rejected(self):
        """
        A signal shorter than the slowest impulse train cannot be scored.
        """
        with self.assertRaises(TempoEstimationError) as ctx:
            comb_tempo(click_track(click_onsets(1.0, 1.0), duration=1.0))
        self.assertEqual(ctx.exception.method, "comb")
        self.assertIn("too short", str(ctx.exception))

    def test_silence_has_no_periodicity(self):
        """
        Digital silence produces no comb energy at all.
        """
        with self.assertRaises(TempoEstimationError) as ctx:
            comb_tempo(AudioSignal(np.zeros(16000 * 10), 16000))
        self.assertIn("no periodicity", str(ctx.exception))

    @settings(max_examples=5, deadline=None)
    @given(st.floats(min_value=0.05, max_value=1.9))
    def test_amplitude_scaling_keeps_bpm(self, factor):
        """
        Scaling the signal by a positive constant does not move the winning tempo.
        """
        sig = click_track(click_onsets(60.0 / 45, 12.0), duration=12.0)
        self.assertEqual(comb_tempo(sig.scaled(factor / 2)).bpm, comb_tempo(sig).bpm)


class TestFilters(unittest.TestCase):
    """
    Test case for the band-splitting and impulse-train helpers.
    """

    def test_impulse_train_spacing(self):
        """
        Impulses sit exactly one period apart at the envelope rate.
        """
        train = impulse_train(60, 200, 3)
        self.assertEqual(len(train), 401)
        self.assertEqual(list(np.flatnonzero(train)), [0, 200, 400])

    def test_band_above_nyquist_is_empty(self):
        """
        A band starting above Nyquist passes nothing.
        """
        samples = np.random.default_rng(0).standard_normal(1000)
        self.assertFalse(np.any(band_pass(samples, 8000, 5000.0, 9000.0)))

    def test_full_band_is_identity(self):
        """
        A band spanning 0 Hz to Nyquist returns the signal unchanged.
        """
        samples = np.random.default_rng(1).standard_normal(1000)
        np.testing.assert_array_equal(band_pass(samples, 8000, 0.0, 4000.0), samples)


class TestLcsTempo(unittest.TestCase):
    """
    Test case for the LCS median estimator.
    """

    def setUp(self):
        self.joining_b = find_entry(DICTIONARY, "Joining B")
        self.sarika = find_entry(DICTIONARY, "Sarika")

    def test_printed_joining_b_sample(self):
        """
        The printed Joining B sample gives gaps 1.86 ... 1.49 s and a median of 1.53 s.
        """
        estimate = lcs_tempo(signature_from(JOINING_B_SAMPLE), self.joining_b)
        expected = [1.86, 1.68, 1.61, 1.53, 1.51, 1.39, 1.49]
        self.assertEqual(len(estimate.per_gap_estimates), len(expected))
        for got, want in zip(estimate.per_gap_estimates, expected):
            self.assertAlmostEqual(got, want, places=6)
        self.assertAlmostEqual(estimate.period, 1.53, delta=0.005)
        self.assertEqual(estimate.method, "lcs")
        self.assertLessEqual(tempo_error(estimate, 1.52), 0.015)

    def test_two_matched_beats_give_their_gap(self):
        """
        With exactly two matched 1-beats the period is their single gap.
        """
        estimate = lcs_tempo(signature_from(JOINING_B_SAMPLE[:3]), self.joining_b)
        self.assertEqual(len(estimate.per_gap_estimates), 1)
        self.assertAlmostEqual(estimate.period, 1.86, places=6)

    def test_single_matched_beat_is_too_short(self):
        """
        A match holding only one 1-beat cannot yield a period.
        """
        with self.assertRaises(TempoEstimationError) as ctx:
            lcs_tempo(signature_from([(2.90, 3.26, "tei")]), self.joining_b)
        self.assertEqual(ctx.exception.method, "lcs")
        self.assertIn("LCS too short", str(ctx.exception))

    def test_stick_and_unrecognised_events_are_ignored(self):
        """
        Stick-beats and unrecognised slices do not break the string alignment.
        """
        rows = list(JOINING_B_SAMPLE)
        events = [BolEvent(get_bol(label), s, e, 1.0) for s, e, label in rows]
        events.insert(3, BolEvent(get_bol("stick"), 3.5, 3.7, 0.2))
        events.insert(7, BolEvent(None, 6.7, 6.8, 0.1))
        estimate = lcs_tempo(SignalSignature(tuple(events)), self.joining_b)
        self.assertAlmostEqual(estimate.period, 1.53, delta=0.005)

    def test_jittered_gaps_around_period(self):
        """
        Gaps jittered by up to 5% around 1.20 s give a median within 0.06 s of it.
        """
        rng = np.random.default_rng(3)
        starts = np.cumsum(np.concatenate(([1.0], 1.2 * (1 + rng.uniform(-0.05, 0.05, size=7)))))
        codes = extend_signature(self.sarika, len(starts))
        events = [BolEvent(get_bol(code), float(s), float(s) + 0.3, 1.0) for s, code in zip(starts, codes)]
        estimate = lcs_tempo(SignalSignature(tuple(events)), self.sarika)
        self.assertLessEqual(abs(estimate.period - 1.2), 0.06)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1000.0))
    def test_translation_invariance(self, shift):
        """
        Shifting every event by the same amount leaves the period unchanged.
        """
        shifted = [(s + shift, e + shift, label) for s, e, label in JOINING_B_SAMPLE]
        base = lcs_tempo(signature_from(JOINING_B_SAMPLE), self.joining_b).period
        self.assertAlmostEqual(lcs_tempo(signature_from(shifted), self.joining_b).period, base, places=6)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.8, max_value=1.8), min_size=3, max_size=7),
        st.integers(min_value=0, max_value=6),
    )
    def test_median_resists_one_corrupted_gap(self, gaps, index):
        """
        Tripling one gap keeps the period within the range of the untouched gaps.
        """
        index %= len(gaps)
        corrupted = list(gaps)
        corrupted[index] *= 3
        starts = np.cumsum([1.0] + corrupted)
        codes = extend_signature(self.sarika, len(starts))
        events = [BolEvent(get_bol(code), float(s), float(s) + 0.3, 1.0) for s, code in zip(starts, codes)]
        period = lcs_tempo(SignalSignature(tuple(events)), self.sarika).period
        untouched = [g for i, g in enumerate(gaps) if i != index]
        self.assertGreaterEqual(period, min(untouched) - 1e-9)
        self.assertLessEqual(period, max(untouched) + 1e-9)


class TestSelectTempo(unittest.TestCase):
    """
    Test case for choosing between the comb and LCS estimates.
    """

    def setUp(self):
        self.comb = TempoEstimate(period=1.5, method="comb", bpm=40)
        self.lcs = TempoEstimate(period=1.52, method="lcs", per_gap_estimates=(1.5, 1.52, 1.54))

    def test_lcs_preferred(self):
        """
        The LCS estimate wins when it exists.
        """
        self.assertEqual(select_tempo(self.comb, self.lcs), self.lcs)

    def test_comb_fallback(self):
        """
        The comb estimate is used when the LCS estimator failed.
        """
        failure = TempoEstimationError("lcs", "LCS too short")
        self.assertEqual(select_tempo(self.comb, failure), self.comb)

    def test_both_failed(self):
        """
        With neither estimate available the selection fails.
        """
        with self.assertRaises(TempoEstimationError):
            select_tempo(TempoEstimationError("comb", "no periodicity"), TempoEstimationError("lcs", "LCS too short"))

    def test_divergent_estimates_warn(self):
        """
        Periods more than a factor of two apart keep the LCS estimate and warn.
        """
        comb = TempoEstimate(period=0.72, method="comb", bpm=83)
        lcs = TempoEstimate(period=1.53, method="lcs", per_gap_estimates=(1.53,))
        with self.assertWarns(HalfDoublePeriodWarning):
            chosen = select_tempo(comb, lcs)
        self.assertEqual(chosen.period, 1.53)
        self.assertEqual(len(chosen.warnings), 1)

    def test_close_estimates_do_not_warn(self):
        """
        Agreeing estimates pass without a warning.
        """
        with warnings.catch_warnings():
            warnings.simplefilter("error", HalfDoublePeriodWarning)
            chosen = select_tempo(self.comb, self.lcs, PipelineConfig())
        self.assertEqual(chosen.warnings, ())


class TestCombEnergyCsv(unittest.TestCase):
    """
    Test case for the per-bpm energy table.
    """

    def test_one_row_per_bpm(self):
        """
        The CSV lists every candidate bpm with its period.
        """
        estimate = TempoEstimate(period=1.5, method="comb", bpm=40, band_energies={40: 2.0, 33: 1.0, 75: 0.5})
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "take.comb.csv")
            write_comb_energy_csv(path, estimate)
            rows = read_csv(path)
        self.assertEqual([row["bpm"] for row in rows], ["33", "40", "75"])
        self.assertEqual(rows[1]["period_s"], "1.5000")
        self.assertEqual(float(rows[1]["energy"]), 2.0)


if __name__ == "__main__":
    unittest.main()
