"""
Silence detection and non-silent slice extraction.

Each frame is scored by its energy and its spectral centroid. A per-file threshold is
placed between the first two modes of each feature's histogram, and a frame failing
either threshold is silent. Maximal runs of non-silent frames become slices.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from src.audio import AudioSignal, frame_energies, frame_geometry, frame_matrix, spectral_centroids
from src.config import PipelineConfig


@dataclass(frozen=True)
class NonSilentSlice:
    """
    A non-silent region [start_sample, stop_sample) of its parent signal.

    Times are in seconds: ``start_time`` = start_sample / rate and
    ``end_time`` = stop_sample / rate.
    """

    start_sample: int
    stop_sample: int
    sample_rate: int

    @property
    def start_time(self) -> float:
        return self.start_sample / self.sample_rate

    @property
    def end_time(self) -> float:
        return self.stop_sample / self.sample_rate

    @property
    def duration(self) -> float:
        return (self.stop_sample - self.start_sample) / self.sample_rate

    def audio(self, sig: AudioSignal) -> AudioSignal:
        return sig.segment(self.start_sample, self.stop_sample)


def histogram_threshold(
    values: Sequence[float],
    weight: float = 0.0,
    bins: int = 100,
    smoothing: int = 3,
) -> float:
    """
    Threshold T = (W * M1 + M2) / (W + 1) from the first two histogram maxima.

    M1 and M2 are the bin centres of the two lowest-positioned local maxima of the
    smoothed histogram. When fewer than two maxima exist (or all values are equal) the
    midpoint between the minimum and maximum value is returned instead.

    Args:
        values (Sequence[float]): Feature values, one per frame.
        weight (float): W >= 0. W = 0 puts the threshold on M2.
        bins (int): Number of equal-width bins over [min, max].
        smoothing (int): Moving-average width in bins.

    Returns:
        float: The threshold.

    Raises:
        ValueError: If ``values`` is empty or ``weight`` is negative.

    Example:
        >>> histogram_threshold([0.0] * 50 + [1.0] * 50)
        0.995
    """
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise ValueError("histogram_threshold needs at least one value")
    if weight < 0:
        raise ValueError(f"weight must be non-negative, got {weight}")
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return lo
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    centres = (edges[:-1] + edges[1:]) / 2.0
    smoothed = uniform_filter1d(counts.astype(np.float64), size=smoothing, mode="nearest")
    # Pad below zero so maxima on the first or last bin are found.
    peaks, _ = find_peaks(np.concatenate(([-1.0], smoothed, [-1.0])))
    peaks = peaks - 1
    if len(peaks) < 2:
        logger.debug("Fewer than two histogram maxima; using the min/max midpoint")
        return (lo + hi) / 2.0
    first, second = centres[peaks[0]], centres[peaks[1]]
    return float((weight * first + second) / (weight + 1.0))


def _feature_passes(values: np.ndarray, active: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    top = float(values.max()) if values.size else 0.0
    if top <= 0.0 or not np.any(active):
        return np.zeros(values.shape, dtype=bool)
    # Contrast is measured among frames that carry signal; zero frames are silent anyway.
    if (top - float(values[active].min())) / top < cfg.flat_feature_tolerance:
        return np.ones(values.shape, dtype=bool)
    threshold = histogram_threshold(values, cfg.weight, cfg.histogram_bins, cfg.histogram_smoothing)
    return values >= threshold


def silent_frame_mask(sig: AudioSignal, cfg: Optional[PipelineConfig] = None) -> np.ndarray:
    """
    Boolean mask over frames: True where the frame is silent.

    A frame is silent when its energy is below the energy threshold or its centroid is
    below the centroid threshold. Zero-energy frames are always silent.
    """
    cfg = cfg or PipelineConfig()
    frames = frame_matrix(sig, cfg.win, cfg.step)
    if frames.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    energies = frame_energies(frames)
    centroids = spectral_centroids(frames)
    active = energies > 0
    voiced = _feature_passes(energies, active, cfg) & _feature_passes(centroids, active, cfg) & active
    return ~voiced


def segment_by_silence(
    sig: AudioSignal,
    win: Optional[float] = None,
    step: Optional[float] = None,
    weight: Optional[float] = None,
    cfg: Optional[PipelineConfig] = None,
) -> List[NonSilentSlice]:
    """
    Finds the non-silent slices of a signal.

    Maximal runs of non-silent frames become slices spanning from the first frame's
    start to the last frame's end. Each slice end is clipped to just before the next
    slice start, so the output is strictly ordered and pairwise disjoint. Slices shorter
    than ``cfg.min_slice`` are dropped both before and after clipping.

    Args:
        sig (AudioSignal): Input signal.
        win (Optional[float]): Frame length override in seconds.
        step (Optional[float]): Hop override in seconds.
        weight (Optional[float]): Threshold weight W override.
        cfg (Optional[PipelineConfig]): Configuration; defaults apply when omitted.

    Returns:
        List[NonSilentSlice]: Ordered slices; empty for a fully silent signal.
    """
    cfg = cfg or PipelineConfig()
    overrides = {k: v for k, v in (("win", win), ("step", step), ("weight", weight)) if v is not None}
    if overrides:
        cfg = cfg.replace(**overrides)

    n_samples = len(sig.samples)
    frame_len, hop, _ = frame_geometry(n_samples, sig.sample_rate, cfg.win, cfg.step)
    silent = silent_frame_mask(sig, cfg)
    if silent.size == 0:
        logger.warning("Signal shorter than one silence-detection frame; no slices")
        return []

    # Run boundaries of the non-silent frames.
    padded = np.concatenate(([False], ~silent, [False])).astype(np.int8)
    changes = np.diff(padded)
    run_starts = np.flatnonzero(changes == 1)
    run_ends = np.flatnonzero(changes == -1) - 1

    min_samples = cfg.min_slice * sig.sample_rate
    spans = []
    for first, last in zip(run_starts, run_ends):
        start = int(first * hop)
        stop = min(int(last * hop + frame_len), n_samples)
        if stop - start < min_samples:
            logger.debug(f"Dropping short run at {start / sig.sample_rate:.3f}s")
            continue
        spans.append([start, stop])

    for current, following in zip(spans, spans[1:]):
        current[1] = min(current[1], following[0] - 1)

    # Clipping can shorten a slice below the minimum again.
    slices = []
    for start, stop in spans:
        if stop - start < min_samples:
            logger.debug(f"Dropping slice at {start / sig.sample_rate:.3f}s shortened by its successor")
            continue
        slices.append(NonSilentSlice(start, stop, sig.sample_rate))
    logger.info(f"Segmented {sig.duration:.2f}s of audio into {len(slices)} slice(s)")
    return slices
