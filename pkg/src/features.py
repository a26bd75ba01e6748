"""
39-dimensional MFCC + delta + delta-delta frame features for a slice.

Per frame: pre-emphasis, Hamming window, power spectrum, triangular mel filterbank,
floored log, orthonormal DCT-II keeping c0..c12. Deltas come from a regression over
+/-2 frames with replicated edges; delta-deltas apply the same regression to the deltas.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.fft import dct

from src.audio import AudioSignal, frame_array
from src.config import PipelineConfig
from src.segmenter import NonSilentSlice
from src.utils.error_handling import SliceTooShortError

FEATURE_DIM = 39


@dataclass(frozen=True)
class FeatureSequence:
    """
    Frame-wise feature vectors of one slice.

    Attributes:
        vectors (np.ndarray): (frames, 39) matrix; columns are 13 MFCC, 13 delta and
            13 delta-delta coefficients.
        slice_ref (Optional[NonSilentSlice]): The originating slice, if known.
    """

    vectors: np.ndarray = field(repr=False)
    slice_ref: Optional[NonSilentSlice] = None

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_centres(sample_rate: int, n_filters: int = 26) -> np.ndarray:
    """Centre frequencies (Hz) of the filterbank's triangles, lowest first."""
    points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_filters + 2)
    return mel_to_hz(points[1:-1])


def fft_size(frame_length: int) -> int:
    nfft = 1
    while nfft < frame_length:
        nfft *= 2
    return nfft


def mel_filterbank(sample_rate: int, nfft: int, n_filters: int = 26) -> np.ndarray:
    """
    Triangular filters on the HTK mel scale from 0 Hz to sample_rate / 2.

    Returns:
        np.ndarray: (n_filters, nfft // 2 + 1) weights over rfft bins.
    """
    points = np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_filters + 2)
    bins = np.floor((nfft + 1) * mel_to_hz(points) / sample_rate).astype(int)
    bank = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        left, centre, right = bins[j], bins[j + 1], bins[j + 2]
        rise = max(centre - left, 1)
        fall = max(right - centre, 1)
        for i in range(left, centre):
            bank[j, i] = (i - left) / rise
        for i in range(centre, min(right, nfft // 2 + 1)):
            bank[j, i] = (right - i) / fall
    return bank


def deltas(coefficients: np.ndarray, window: int = 2) -> np.ndarray:
    """
    Regression deltas d_t = sum_n n * (c[t+n] - c[t-n]) / (2 * sum_n n^2).

    Edge frames are replicated, so a constant sequence has zero deltas.
    """
    n_frames = coefficients.shape[0]
    padded = np.pad(coefficients, ((window, window), (0, 0)), mode="edge")
    denominator = 2.0 * sum(n * n for n in range(1, window + 1))
    out = np.zeros_like(coefficients, dtype=np.float64)
    for n in range(1, window + 1):
        out += n * (padded[window + n : window + n + n_frames] - padded[window - n : window - n + n_frames])
    return out / denominator


def cepstra(sig: AudioSignal, cfg: Optional[PipelineConfig] = None) -> np.ndarray:
    """
    Static cepstral coefficients c0..c(n_cepstra-1), one row per analysis frame.

    Raises:
        SliceTooShortError: If the signal is shorter than one analysis frame.
    """
    cfg = cfg or PipelineConfig()
    frame_length = int(round(cfg.mfcc_frame * sig.sample_rate))
    if len(sig.samples) < frame_length:
        raise SliceTooShortError(len(sig.samples), frame_length)

    samples = sig.samples
    emphasised = np.append(samples[0], samples[1:] - cfg.pre_emphasis * samples[:-1])
    frames = frame_array(emphasised, sig.sample_rate, cfg.mfcc_frame, cfg.mfcc_hop)
    frames = frames * np.hamming(frame_length)

    nfft = fft_size(frame_length)
    power = np.square(np.abs(np.fft.rfft(frames, nfft))) / nfft
    energies = power @ mel_filterbank(sig.sample_rate, nfft, cfg.n_mel_filters).T
    log_energies = np.log(np.maximum(energies, cfg.log_floor))
    return dct(log_energies, type=2, axis=1, norm="ortho")[:, : cfg.n_cepstra]


def mfcc(sig: AudioSignal, cfg: Optional[PipelineConfig] = None, slice_ref: Optional[NonSilentSlice] = None) -> FeatureSequence:
    """
    Full feature stream of a slice: cepstra, deltas and delta-deltas side by side.

    Args:
        sig (AudioSignal): Slice audio.
        cfg (Optional[PipelineConfig]): MFCC parameters.
        slice_ref (Optional[NonSilentSlice]): Slice the audio was cut from.

    Returns:
        FeatureSequence: (frames, 39) vectors, all finite.

    Raises:
        SliceTooShortError: If the slice is shorter than one analysis frame.
    """
    cfg = cfg or PipelineConfig()
    static = cepstra(sig, cfg)
    first = deltas(static, cfg.delta_window)
    second = deltas(first, cfg.delta_window)
    return FeatureSequence(np.hstack([static, first, second]), slice_ref)


def slice_features(sig: AudioSignal, slices: List[NonSilentSlice], cfg: Optional[PipelineConfig] = None) -> List[FeatureSequence]:
    """Features for every slice of ``sig``; raises on the first slice that is too short."""
    cfg = cfg or PipelineConfig()
    return [mfcc(s.audio(sig), cfg, s) for s in slices]
