"""
This module contains unit tests for the `error_handling.py` file in the src/utils directory.
The tests ensure that custom exceptions and the stage error handler behave as expected.

### Test Cases:
- **Custom Exceptions**: `AudioReadError`, `SliceTooShortError`, `DictionaryFormatError`,
  `TempoEstimationError`, `FileSaveError` and `PipelineStageError` keep their attributes
  and render as "ClassName: message".
- **Error Handling Functions**: `handle_stage_error` logs the failure and raises a
  `PipelineStageError` chained to the original error.
- **Logging Verification**: Raised exceptions logged through loguru keep their class name.
"""

import unittest
from io import StringIO
from unittest.mock import patch

from src.utils.error_handling import (
    AudioReadError,
    BeatMarkingError,
    DictionaryFormatError,
    FileSaveError,
    PipelineStageError,
    SliceTooShortError,
    SollukattuError,
    TempoEstimationError,
    handle_stage_error,
    logger,
)


class TestErrorHandling(unittest.TestCase):
    """
    Test case for `error_handling.py`.
    Includes tests for the exception hierarchy and the stage error handler.
    """

    def setUp(self):
        """
        Route loguru records into a buffer for the duration of each test.
        """
        self.log_stream = StringIO()
        self.sink_id = logger.add(self.log_stream, format="{level} - {message}")

    def tearDown(self):
        logger.remove(self.sink_id)

    def test_audio_read_error(self):
        """
        Test the `AudioReadError` exception.

        Ensures the file path is kept and the message names it.
        """
        error = AudioReadError("take.wav", "zero-length audio")
        self.assertEqual(error.file_path, "take.wav")
        self.assertEqual(str(error), "AudioReadError: Error reading audio file take.wav: zero-length audio")

    def test_slice_too_short_error(self):
        """
        Test the `SliceTooShortError` exception.
        """
        error = SliceTooShortError(500, 1102)
        self.assertEqual((error.n_samples, error.frame_length), (500, 1102))
        self.assertIn("500 samples", str(error))

    def test_dictionary_format_error(self):
        """
        Test the `DictionaryFormatError` exception.

        Ensures the location of the bad record is reported as file:line.
        """
        error = DictionaryFormatError("dict.txt", 7, "bad record")
        self.assertEqual(error.line_number, 7)
        self.assertEqual(str(error), "DictionaryFormatError: dict.txt:7: bad record")

    def test_tempo_estimation_error(self):
        """
        Test the `TempoEstimationError` exception.
        """
        error = TempoEstimationError("lcs", "LCS too short")
        self.assertEqual(error.method, "lcs")
        self.assertEqual(error.message, "[lcs] LCS too short")

    def test_file_save_error(self):
        """
        Test the `FileSaveError` exception.
        """
        with self.assertRaises(FileSaveError, msg="Error saving data to file out.json: Save error"):
            raise FileSaveError("out.json", "Save error")

    def test_hierarchy(self):
        """
        Every pipeline error is a SollukattuError.
        """
        for error in (AudioReadError("a", "b"), BeatMarkingError("x"), PipelineStageError("load", "x")):
            self.assertIsInstance(error, SollukattuError)

    def test_pipeline_stage_error_copies_partial(self):
        """
        Test the `PipelineStageError` exception.

        The partial outputs are copied so later changes to the caller's dict do not leak in.
        """
        partial = {"n_slices": 4}
        error = PipelineStageError("segment", "boom", partial)
        partial["n_slices"] = 5
        self.assertEqual(error.partial, {"n_slices": 4})
        self.assertEqual(str(error), "PipelineStageError: stage 'segment' failed: boom")

    def test_handle_stage_error(self):
        """
        Test the `handle_stage_error` function.

        Logs the failure and raises a `PipelineStageError` chained to the original.
        """
        original = TempoEstimationError("comb", "no periodicity")
        with patch("src.utils.error_handling.logger.error") as mock_logger:
            with self.assertRaises(PipelineStageError) as ctx:
                handle_stage_error("tempo", original, {"n_slices": 12})
            mock_logger.assert_called_with(
                "Pipeline stage 'tempo' failed: TempoEstimationError: [comb] no periodicity"
            )
        self.assertEqual(ctx.exception.stage, "tempo")
        self.assertEqual(ctx.exception.partial, {"n_slices": 12})
        self.assertIs(ctx.exception.__cause__, original)

    def test_log_error_on_audio_read(self):
        """
        Test logging when an `AudioReadError` is raised.

        Ensures the logged line carries the exception class name.
        """
        try:
            raise AudioReadError("take.wav", "unsupported encoding IMA_ADPCM")
        except AudioReadError as e:
            logger.error(e)

        log_output = self.log_stream.getvalue().strip()
        self.assertIn("ERROR - AudioReadError: Error reading audio file take.wav: unsupported encoding IMA_ADPCM", log_output)


if __name__ == "__main__":
    unittest.main()
