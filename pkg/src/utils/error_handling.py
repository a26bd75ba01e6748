from typing import Any, Dict, Optional

from loguru import logger


class SollukattuError(Exception):
    """
    Base class for every error raised by the analysis pipeline.

    Attributes:
        message (str): A description of the error.
    """

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)

    def __str__(self):
        return f"{type(self).__name__}: {self.message}"


class AudioReadError(SollukattuError):
    """
    Raised when a WAV file cannot be decoded into an AudioSignal.

    Covers unreadable files, unsupported (non-PCM) encodings and zero-length audio.

    Attributes:
        file_path (str): The path of the offending file.
        message (str): A description of the failure.
    """

    def __init__(self, file_path: str, message: str) -> None:
        self.file_path = file_path
        super().__init__(f"Error reading audio file {file_path}: {message}")


class SliceTooShortError(SollukattuError):
    """
    Raised when a slice holds fewer samples than one MFCC analysis frame.

    Attributes:
        n_samples (int): Samples in the slice.
        frame_length (int): Samples required for one analysis frame.
    """

    def __init__(self, n_samples: int, frame_length: int) -> None:
        self.n_samples = n_samples
        self.frame_length = frame_length
        super().__init__(f"slice too short ({n_samples} samples < frame of {frame_length})")


class DictionaryFormatError(SollukattuError):
    """
    Raised when a Sollukattu dictionary file contains a malformed record.

    Attributes:
        file_path (str): The dictionary file.
        line_number (int): 1-based line of the bad record.
    """

    def __init__(self, file_path: str, line_number: int, message: str) -> None:
        self.file_path = file_path
        self.line_number = line_number
        super().__init__(f"{file_path}:{line_number}: {message}")


class ModelFormatError(SollukattuError):
    """Raised when a saved GMM model file cannot be parsed."""

    def __init__(self, file_path: str, message: str) -> None:
        self.file_path = file_path
        super().__init__(f"Invalid model file {file_path}: {message}")


class RecognitionError(SollukattuError):
    """Raised when a signal signature cannot be matched against the dictionary."""


class TempoEstimationError(SollukattuError):
    """
    Raised when a tempo estimator cannot produce a period.

    Attributes:
        method (str): The estimator that failed ("comb" or "lcs").
    """

    def __init__(self, method: str, message: str) -> None:
        self.method = method
        super().__init__(f"[{method}] {message}")


class BeatMarkingError(SollukattuError):
    """Raised when beat marking receives unusable input."""


class SynthesisError(SollukattuError):
    """Raised when a synthetic rendering request cannot be honoured."""


class FileSaveError(SollukattuError):
    """
    Custom exception raised when there is an error saving data to a file.

    Attributes:
        file_path (str): The path of the file where the data could not be saved.
        message (str): A description of the error encountered while saving data.
    """

    def __init__(self, file_path: str, message: str) -> None:
        self.file_path = file_path
        super().__init__(f"Error saving data to file {file_path}: {message}")


class PipelineStageError(SollukattuError):
    """
    Raised by the pipeline when one of its stages fails.

    Attributes:
        stage (str): Name of the failing stage (e.g. "segment", "tempo").
        partial (Dict[str, Any]): Outputs of the stages that completed before the failure.
    """

    def __init__(self, stage: str, message: str, partial: Optional[Dict[str, Any]] = None) -> None:
        self.stage = stage
        self.partial = dict(partial or {})
        super().__init__(f"stage '{stage}' failed: {message}")


def handle_stage_error(stage: str, error: Exception, partial: Optional[Dict[str, Any]] = None) -> None:
    """
    Logs a stage failure and re-raises it as a PipelineStageError.

    Args:
        stage (str): The pipeline stage where the error occurred.
        error (Exception): The original exception.
        partial (Optional[Dict[str, Any]]): Outputs of the completed stages.

    Raises:
        PipelineStageError: Always, chained to ``error``.
    """
    logger.error(f"Pipeline stage '{stage}' failed: {error}")
    raise PipelineStageError(stage, str(error), partial) from error
