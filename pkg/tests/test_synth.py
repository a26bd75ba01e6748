"""
Unit tests for `synth.py`.

### Test Cases:

- Event layout and ground truth of a two-bar Natta rendering.
- Onsets sit on the tempo grid without jitter, and within the jitter bound with it.
- Half-beat bursts are quieter than 1-beat bursts.
- Same spec and seed give the same samples and the same files.
- Invalid recipes and crowded bursts raise SynthesisError.
"""
import os
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from src.beatmark import read_annotation_csv, read_detected_beats
from src.bols import STICK_CODE
from src.config import DEFAULT_DICTIONARY_PATH, SAMPLE_RATE
from src.signatures import BeatType, find_entry, load_dictionary
from src.synth import BEAT_OFFSET, SynthSpec, default_timbres, event_times, synthesize, write_synthesis
from src.utils.error_handling import SynthesisError

DICTIONARY = load_dictionary(DEFAULT_DICTIONARY_PATH)
NATTA = find_entry(DICTIONARY, "Natta")
JOINING_A = find_entry(DICTIONARY, "Joining A")


class TestSynthesize(unittest.TestCase):
    """
    Test case for rendering a pattern and its ground truth.
    """

    @classmethod
    def setUpClass(cls):
        cls.spec = SynthSpec(NATTA, 1.39, bars=2)
        cls.sig, cls.annotations, cls.beats = synthesize(cls.spec, seed=3)

    def test_event_and_beat_counts(self):
        """
        Two bars of Natta hold 28 events and 16 struck 1-beats.
        """
        self.assertEqual(len(self.annotations), 28)
        self.assertEqual(len(self.beats), 16)
        self.assertEqual(sum(1 for a in self.annotations if a.event is BeatType.HALF), 12)

    def test_duration(self):
        """
        The signal spans the lead-in, one period per beat and the tail.
        """
        expected = 0.5 + 16 * 1.39 + 0.5
        self.assertAlmostEqual(self.sig.duration, expected, delta=1.0 / SAMPLE_RATE)
        self.assertEqual(self.sig.sample_rate, SAMPLE_RATE)

    def test_onsets_on_grid(self):
        """
        Without jitter every onset is a multiple of T/n after its beat, to one sample.
        """
        grid = []
        for k, group in enumerate(list(NATTA.beats) * 2):
            grid.extend(0.5 + k * 1.39 + j * 1.39 / len(group) for j in range(len(group)))
        starts = [a.tau_s for a in self.annotations]
        np.testing.assert_allclose(starts, grid, atol=1.0 / SAMPLE_RATE)

    def test_annotation_matches_pattern(self):
        """
        Annotated bols and beat types follow the pattern tokens in order.
        """
        tokens = list(NATTA.tokens) * 2
        self.assertEqual([a.bol for a in self.annotations], [t.bol for t in tokens])
        self.assertEqual([a.event for a in self.annotations], [t.beat_type for t in tokens])
        self.assertEqual([a.event_id for a in self.annotations], list(range(1, 29)))

    def test_beats_follow_struck_onsets(self):
        """
        True beat times are the 1-beat onsets plus a fixed offset.
        """
        full = [a.tau_s + BEAT_OFFSET for a in self.annotations if a.event is BeatType.FULL]
        np.testing.assert_allclose(self.beats.timestamps, full)

    def test_silence_between_bursts(self):
        """
        Everything outside the bursts is digital silence.
        """
        mask = np.ones(len(self.sig.samples), dtype=bool)
        for a in self.annotations:
            mask[int(round(a.tau_s * SAMPLE_RATE)) : int(round(a.tau_e * SAMPLE_RATE))] = False
        self.assertTrue(np.all(self.sig.samples[mask] == 0.0))
        self.assertLessEqual(np.max(np.abs(self.sig.samples)), 0.95 + 1e-12)

    def test_half_beats_quieter_than_full_beats(self):
        """
        Bursts off the beat carry clearly less energy than struck 1-beats.
        """

        def mean_energy(beat_type):
            energies = []
            for a in self.annotations:
                if a.event is beat_type:
                    burst = self.sig.samples[int(round(a.tau_s * SAMPLE_RATE)) : int(round(a.tau_e * SAMPLE_RATE))]
                    energies.append(np.mean(burst**2))
            return np.mean(energies)

        self.assertGreater(mean_energy(BeatType.FULL), 2.0 * mean_energy(BeatType.HALF))

    def test_stick_beats_have_no_bol(self):
        """
        Stick tokens are annotated as stick-beats without a bol and count as true beats.
        """
        _, annotations, beats = synthesize(SynthSpec(JOINING_A, 1.2), seed=0)
        sticks = [a for a in annotations if a.event is BeatType.STICK]
        self.assertEqual(len(sticks), 2)
        self.assertTrue(all(a.bol is None for a in sticks))
        self.assertEqual(len(beats), 8)


class TestDeterminism(unittest.TestCase):
    """
    Test case for reproducible renderings.
    """

    def test_same_seed_same_samples(self):
        """
        Identical spec and seed give identical samples; another seed does not.
        """
        spec = SynthSpec(JOINING_A, 1.3, jitter=0.03)
        first, _, _ = synthesize(spec, seed=11)
        second, _, _ = synthesize(spec, seed=11)
        other, _, _ = synthesize(spec, seed=12)
        np.testing.assert_array_equal(first.samples, second.samples)
        self.assertFalse(np.array_equal(first.samples, other.samples))

    def test_same_seed_same_files(self):
        """
        Writing the same rendering twice produces byte-identical files.
        """
        spec = SynthSpec(JOINING_A, 1.3)
        with tempfile.TemporaryDirectory() as tmp:
            paths = [
                write_synthesis(os.path.join(tmp, name), "joining_a", *synthesize(spec, seed=5))
                for name in ("one", "two")
            ]
            for key in ("wav", "annotation", "beats"):
                with open(paths[0][key], "rb") as a, open(paths[1][key], "rb") as b:
                    self.assertEqual(a.read(), b.read(), key)
            self.assertEqual(len(read_annotation_csv(paths[0]["annotation"])), 8)
            self.assertEqual(len(read_detected_beats(paths[0]["beats"])), 8)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(min_value=1.0, max_value=1.8),
        st.floats(min_value=0.0, max_value=0.05),
        st.integers(min_value=0, max_value=10_000),
    )
    def test_jitter_bound(self, period, jitter, seed):
        """
        Each onset moves at most jitter * T from its grid position.
        """
        spec = SynthSpec(JOINING_A, period, jitter=jitter)
        onsets = [t for t, _ in event_times(spec, np.random.default_rng(seed))]
        grid = [0.5 + k * period for k in range(8)]
        for onset, expected in zip(onsets, grid):
            self.assertLessEqual(abs(onset - expected), jitter * period + 1e-12)


class TestSynthErrors(unittest.TestCase):
    """
    Test case for rejected recipes.
    """

    def test_out_of_range_recipe(self):
        """
        Period, bars and jitter outside their ranges are rejected.
        """
        for kwargs in ({"period": 0.5}, {"period": 1.3, "bars": 0}, {"period": 1.3, "jitter": 0.1}):
            with self.subTest(**kwargs):
                with self.assertRaises(SynthesisError):
                    SynthSpec(NATTA, **kwargs)

    def test_crowded_bursts(self):
        """
        Bursts that would run into the next half-beat are rejected.
        """
        with self.assertRaises(SynthesisError):
            synthesize(SynthSpec(NATTA, 1.39, burst_duration=0.6))

    def test_missing_timbre(self):
        """
        A vocal bol without a timbre cannot be rendered.
        """
        with self.assertRaises(SynthesisError):
            synthesize(SynthSpec(NATTA, 1.39, timbres={}))


class TestTimbres(unittest.TestCase):
    """
    Test case for the default bol timbres.
    """

    def test_distinct_spectra(self):
        """
        The 31 vocal bols get 31 different non-empty partial sets; the stick has none.
        """
        timbres = default_timbres()
        self.assertEqual(sorted(timbres), list(range(1, 32)))
        self.assertNotIn(STICK_CODE, timbres)
        self.assertEqual(len({tuple(sorted(p)) for p in timbres.values()}), 31)
        self.assertTrue(all(0 < f < 700 for p in timbres.values() for f in p))


if __name__ == "__main__":
    unittest.main()
