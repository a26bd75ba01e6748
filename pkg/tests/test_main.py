"""
Unit tests for the command-line entry point in `main.py`.

### Test Cases:

- `synth` writes a recording with its annotation and beats.
- `mark-beats` and `evaluate` chain on the synthesised files and score 100%.
- Failing stages map to their exit codes: load, classify, synth and train.
"""
import json
import os
import tempfile
import unittest

from src.beatmark import read_annotation_csv
from src.main import EXIT_CODES, main
from src.signatures import BolEvent, SignalSignature, write_signature_csv


class TestMain(unittest.TestCase):
    """
    Test case for `main` run against a synthesised Joining B recording.
    """

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = cls.tmp.name
        status = main(["synth", "--pattern", "Joining B", "--period", "1.5", "--stem", "jb", "--out-dir", cls.out])
        cls.synth_status = status
        cls.wav = os.path.join(cls.out, "jb.wav")
        cls.annotation = os.path.join(cls.out, "jb.annotation.csv")
        cls.signature = os.path.join(cls.out, "jb.truth.csv")
        rows = read_annotation_csv(cls.annotation)
        write_signature_csv(cls.signature, SignalSignature(tuple(BolEvent(r.bol, r.tau_s, r.tau_e, 1.0) for r in rows)))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_synth_writes_files(self):
        """
        Synthesis succeeds and leaves the audio and both truth files.
        """
        self.assertEqual(self.synth_status, 0)
        for suffix in ("wav", "annotation.csv", "beats.txt"):
            self.assertTrue(os.path.isfile(os.path.join(self.out, f"jb.{suffix}")), suffix)

    def test_mark_beats_then_evaluate(self):
        """
        Marking from the true signature and scoring it against the annotation gives 100%.
        """
        run_dir = os.path.join(self.out, "marked")
        self.assertEqual(main(["mark-beats", self.wav, "--signature", self.signature, "--out-dir", run_dir]), 0)
        marked = os.path.join(run_dir, "jb.marked.csv")
        self.assertTrue(os.path.isfile(marked))
        self.assertEqual(main(["evaluate", "--marked", marked, "--annotation", self.annotation, "--out-dir", run_dir]), 0)
        with open(os.path.join(run_dir, "jb.marked.evaluation.json"), encoding="utf-8") as handle:
            scores = json.load(handle)
        self.assertEqual(scores["full_match"], 100.0)
        self.assertIn("config_hash", scores)

    def test_corrupt_wav_exit_code(self):
        """
        An unreadable recording exits with the load code.
        """
        bad = os.path.join(self.out, "bad.wav")
        with open(bad, "wb") as handle:
            handle.write(b"\x00" * 64)
        self.assertEqual(main(["run", bad, "--signature", self.signature, "--out-dir", self.out]), EXIT_CODES["load"])

    def test_missing_model_exit_code(self):
        """
        Classifying without a model exits with the classify code.
        """
        self.assertEqual(main(["classify", self.wav, "--out-dir", self.out]), EXIT_CODES["classify"])

    def test_bad_synth_requests(self):
        """
        An unknown pattern or an out-of-range period exits with the synth code.
        """
        self.assertEqual(main(["synth", "--pattern", "Nope", "--period", "1.5", "--out-dir", self.out]), EXIT_CODES["synth"])
        self.assertEqual(main(["synth", "--pattern", "Natta", "--period", "0.5", "--out-dir", self.out]), EXIT_CODES["synth"])

    def test_training_without_annotations(self):
        """
        Training on a recording without its annotation file exits with the train code.
        """
        with tempfile.TemporaryDirectory() as lonely:
            wav = os.path.join(lonely, "take.wav")
            with open(wav, "wb") as handle:
                handle.write(b"")
            self.assertEqual(main(["train-gmm", wav, "--out-dir", lonely]), EXIT_CODES["train"])


if __name__ == "__main__":
    unittest.main()
