"""
Audio primitives shared by every analysis stage: WAV ingestion, framing, frame energy
and the spectral centroid.
"""
import io
from dataclasses import dataclass, field
from typing import List

import numpy as np
import soundfile as sf
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.error_handling import AudioReadError, FileSaveError
from src.utils.io_utils import _atomic_write

SUPPORTED_SUBTYPES = frozenset({"PCM_U8", "PCM_S8", "PCM_16", "PCM_24", "PCM_32", "FLOAT", "DOUBLE"})


@dataclass(frozen=True)
class AudioSignal:
    """
    A mono signal normalised to [-1, +1].

    Attributes:
        samples (np.ndarray): float64 amplitudes.
        sample_rate (int): Samples per second.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioSignal samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and (np.max(np.abs(samples)) > 1.0 or not np.all(np.isfinite(samples))):
            raise ValueError("AudioSignal samples must be finite and within [-1, +1]")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def segment(self, start_sample: int, stop_sample: int) -> "AudioSignal":
        """Sub-signal over samples [start_sample, stop_sample)."""
        return AudioSignal(self.samples[start_sample:stop_sample], self.sample_rate)

    def scaled(self, factor: float) -> "AudioSignal":
        return AudioSignal(np.clip(self.samples * factor, -1.0, 1.0), self.sample_rate)


@dataclass(frozen=True)
class Frame:
    samples: np.ndarray = field(repr=False)
    start_time: float
    win_len: float
    index: int


def load_wav(path: str) -> AudioSignal:
    """
    Reads a PCM (or float) WAV file into a mono AudioSignal.

    Stereo and multi-channel files are averaged to mono. Integer data is scaled by the
    format's full-scale value so 16-bit input keeps its exact quantisation steps.

    Args:
        path (str): Path to the WAV file.

    Returns:
        AudioSignal: Normalised mono samples at the header's sample rate.

    Raises:
        AudioReadError: Unreadable file, unsupported encoding, or zero-length audio.
    """
    try:
        info = sf.info(path)
    except Exception as e:
        logger.error(f"Unreadable audio file {path}: {e}")
        raise AudioReadError(path, f"unreadable file ({e})") from e
    if info.format != "WAV" and info.format != "WAVEX":
        raise AudioReadError(path, f"not a WAV container ({info.format})")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioReadError(path, f"unsupported encoding {info.subtype}")
    if info.frames == 0:
        raise AudioReadError(path, "zero-length audio")
    try:
        data, sample_rate = sf.read(path, dtype="float64", always_2d=True)
    except Exception as e:
        raise AudioReadError(path, f"decode failed ({e})") from e
    mono = data.mean(axis=1)
    logger.debug(f"Loaded {path}: {len(mono)} samples at {sample_rate} Hz, {info.channels} channel(s)")
    return AudioSignal(np.clip(mono, -1.0, 1.0), int(sample_rate))


def write_wav(path: str, sig: AudioSignal) -> None:
    """
    Writes a signal as 16-bit PCM, atomically (temporary file, then rename).

    Samples are quantised as round(x * 32768) clipped to the int16 range, the inverse
    of the reader's scaling, so 16-bit content survives a read/write cycle unchanged.

    Raises:
        FileSaveError: If the file cannot be written.
    """
    pcm = np.clip(np.round(sig.samples * 32768.0), -32768, 32767).astype(np.int16)
    buffer = io.BytesIO()
    try:
        sf.write(buffer, pcm, sig.sample_rate, subtype="PCM_16", format="WAV")
    except Exception as e:
        logger.error(f"Failed to encode {path}: {e}")
        raise FileSaveError(path, str(e)) from e
    _atomic_write(path, buffer.getvalue())


def frame_geometry(n_samples: int, sample_rate: int, win: float, step: float):
    """
    Frame length, hop and frame count in samples.

    Returns:
        Tuple[int, int, int]: (N, hop, count) with count = 0 when the signal is shorter
        than one frame.
    """
    if not 0 < step <= win:
        raise ValueError(f"Require 0 < step <= win, got step={step}, win={win}")
    frame_len = int(round(win * sample_rate))
    hop = int(round(step * sample_rate))
    if frame_len < 1 or hop < 1:
        raise ValueError("win and step must each cover at least one sample")
    count = 0 if n_samples < frame_len else (n_samples - frame_len) // hop + 1
    return frame_len, hop, count


def frame_array(samples: np.ndarray, sample_rate: int, win: float, step: float) -> np.ndarray:
    """Frames of a raw sample array as rows of a (count, N) read-only view."""
    frame_len, hop, count = frame_geometry(len(samples), sample_rate, win, step)
    if count == 0:
        return np.empty((0, frame_len))
    return sliding_window_view(samples, frame_len)[: (count - 1) * hop + 1 : hop]


def frame_matrix(sig: AudioSignal, win: float, step: float) -> np.ndarray:
    return frame_array(sig.samples, sig.sample_rate, win, step)


def frame_signal(sig: AudioSignal, win: float, step: float) -> List[Frame]:
    """
    Splits a signal into overlapping frames; the trailing partial frame is dropped.

    Args:
        sig (AudioSignal): Input signal.
        win (float): Frame length in seconds.
        step (float): Hop in seconds, 0 < step <= win.

    Returns:
        List[Frame]: Frame i starts at i * step. Empty when win exceeds the duration.
    """
    hop = int(round(step * sig.sample_rate))
    rows = frame_matrix(sig, win, step)
    return [
        Frame(samples=row, start_time=i * hop / sig.sample_rate, win_len=win, index=i)
        for i, row in enumerate(rows)
    ]


def frame_energy(frame: Frame) -> float:
    """Mean squared amplitude (1/N) * sum(x^2)."""
    return float(np.mean(np.square(frame.samples)))


def spectral_centroid(frame: Frame) -> float:
    return float(spectral_centroids(np.asarray(frame.samples)[np.newaxis, :])[0])


def spectral_centroids(frames: np.ndarray) -> np.ndarray:
    """
    Magnitude-weighted mean of the bin weights over all N DFT bins of each row.

    Bins are numbered 1..N and weighted by (number + 1), with no zero padding and no
    one-sided folding. A row with no spectral mass gets 0.

    Args:
        frames (np.ndarray): (count, N) frame matrix.

    Returns:
        np.ndarray: One centroid per row, in bin units.
    """
    magnitudes = np.abs(np.fft.fft(frames, axis=1))
    weights = np.arange(frames.shape[1]) + 2.0
    mass = magnitudes.sum(axis=1)
    weighted = magnitudes @ weights
    out = np.zeros(frames.shape[0])
    nonzero = mass > 0
    out[nonzero] = weighted[nonzero] / mass[nonzero]
    return out


def frame_energies(frames: np.ndarray) -> np.ndarray:
    return np.mean(np.square(frames), axis=1)
