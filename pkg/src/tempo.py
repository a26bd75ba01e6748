"""
Tempo-period estimation.

Two independent estimators are provided. The comb-filter estimator works on the audio
alone: band-split, rectify, smooth, differentiate and score candidate tempi by the energy
left after convolving with impulse trains. The LCS estimator works on the recognised
bols: it aligns the signal signature with the recognised pattern and takes the median
gap between matched 1-beats.
"""
import warnings
from dataclasses import dataclass, field, replace
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.signal import butter, fftconvolve, resample_poly, sosfiltfilt

from src.audio import AudioSignal
from src.config import PipelineConfig
from src.signatures import BeatType, SignalSignature, SollukattuSignature, longest_common_substring
from src.utils.error_handling import TempoEstimationError
from src.utils.file_utils import run_concurrently
from src.utils.io_utils import write_csv


class HalfDoublePeriodWarning(UserWarning):
    """The comb and LCS periods disagree by more than the configured factor."""


@dataclass(frozen=True)
class TempoEstimate:
    """
    Attributes:
        period (float): Tempo period T in seconds.
        method (str): "comb" or "lcs".
        bpm (Optional[int]): Winning tempo of the comb filter.
        per_gap_estimates (Tuple[float, ...]): 1-beat gaps the LCS median is taken over.
        band_energies (Dict[int, float]): Comb energy per candidate bpm.
        warnings (Tuple[str, ...]): Diagnostics attached by ``select_tempo``.
    """

    period: float
    method: str
    bpm: Optional[int] = None
    per_gap_estimates: Tuple[float, ...] = ()
    band_energies: Dict[int, float] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()


def band_pass(samples: np.ndarray, sample_rate: int, low: float, high: float) -> np.ndarray:
    nyquist = sample_rate / 2.0
    if low >= nyquist:
        return np.zeros_like(samples)
    if low <= 0 and high >= nyquist:
        return samples.copy()
    if low <= 0:
        sos = butter(4, high, btype="lowpass", fs=sample_rate, output="sos")
    elif high >= nyquist:
        sos = butter(4, low, btype="highpass", fs=sample_rate, output="sos")
    else:
        sos = butter(4, [low, high], btype="bandpass", fs=sample_rate, output="sos")
    return sosfiltfilt(sos, samples)


def onset_envelope(samples: np.ndarray, sample_rate: int, cfg: PipelineConfig) -> np.ndarray:
    """
    Half-wave rectified derivative of the smoothed amplitude envelope of one band.

    The full-wave rectified band is decimated to ``cfg.envelope_rate`` Hz, convolved with
    the decaying half of a Hanning window, differentiated and half-wave rectified.
    """
    rate = int(cfg.envelope_rate)
    common = gcd(rate, int(sample_rate))
    envelope = resample_poly(np.abs(samples), rate // common, int(sample_rate) // common)
    half_len = max(int(round(cfg.half_window * rate)), 1)
    half_window = np.hanning(2 * half_len)[half_len:]
    smoothed = fftconvolve(envelope, half_window)[: len(envelope)]
    return np.maximum(np.diff(smoothed, prepend=smoothed[0]), 0.0)


def impulse_train(bpm: int, rate: int, periods: int) -> np.ndarray:
    """``periods`` unit impulses spaced 60 / bpm seconds apart at ``rate`` Hz."""
    spacing = 60.0 * rate / bpm
    train = np.zeros(int(round((periods - 1) * spacing)) + 1)
    train[[int(round(k * spacing)) for k in range(periods)]] = 1.0
    return train


def comb_energies(onsets: Sequence[np.ndarray], cfg: PipelineConfig) -> Dict[int, float]:
    """
    Energy of every candidate tempo summed over bands.

    Each band's onset signal is convolved with the candidate's impulse train over the
    fully overlapping region and the squared output is summed.
    """
    energies: Dict[int, float] = {}
    for bpm in range(cfg.bpm_min, cfg.bpm_max + 1):
        train = impulse_train(bpm, cfg.envelope_rate, cfg.comb_periods)
        energies[bpm] = float(sum(np.sum(np.square(fftconvolve(onset, train, mode="valid"))) for onset in onsets))
    return energies


def comb_tempo(sig: AudioSignal, cfg: Optional[PipelineConfig] = None) -> TempoEstimate:
    """
    Comb-filter tempo estimate of a recording.

    Args:
        sig (AudioSignal): The recording.
        cfg (Optional[PipelineConfig]): Bands, envelope rate, window and bpm range.

    Returns:
        TempoEstimate: bpm in [bpm_min, bpm_max], period 60 / bpm and the energy table.

    Raises:
        TempoEstimationError: Signal shorter than the longest impulse train, or no
            periodic energy at all.
    """
    cfg = cfg or PipelineConfig()
    longest = impulse_train(cfg.bpm_min, cfg.envelope_rate, cfg.comb_periods)
    n_envelope = int(np.ceil(len(sig.samples) * cfg.envelope_rate / sig.sample_rate))
    if n_envelope < len(longest):
        raise TempoEstimationError(
            "comb",
            f"signal too short: {sig.duration:.2f}s < {len(longest) / cfg.envelope_rate:.2f}s needed for {cfg.bpm_min} bpm",
        )

    def band_onsets(band: Tuple[float, float]) -> np.ndarray:
        filtered = band_pass(sig.samples, sig.sample_rate, band[0], band[1])
        return onset_envelope(filtered, sig.sample_rate, cfg)

    onsets = [onset for _, onset in run_concurrently(band_onsets, list(cfg.tempo_bands), cfg.max_workers)]
    if min(len(onset) for onset in onsets) < len(longest):
        raise TempoEstimationError("comb", "signal too short for the slowest impulse train")

    energies = comb_energies(onsets, cfg)
    values = np.array(list(energies.values()))
    if not np.any(values > 0) or np.ptp(values) <= 1e-12 * np.max(values):
        raise TempoEstimationError("comb", "no periodicity")

    bpm = max(energies, key=lambda b: (energies[b], -b))
    logger.info(f"Comb filter tempo: {bpm} bpm (period {60.0 / bpm:.3f}s)")
    return TempoEstimate(period=60.0 / bpm, method="comb", bpm=bpm, band_energies=energies)


def lcs_tempo(signature: SignalSignature, entry: SollukattuSignature) -> TempoEstimate:
    """
    Median gap between consecutive 1-beats of the longest common substring.

    The signature's string view is aligned with the pattern's bol string. Every maximal
    match that does not reuse signature positions contributes the gaps between its
    consecutive matched 1-beats, timed by slice start.

    Args:
        signature (SignalSignature): Classified slices of the recording.
        entry (SollukattuSignature): The recognised pattern.

    Returns:
        TempoEstimate: period = median of the gaps.

    Raises:
        TempoEstimationError: If fewer than two 1-beats are matched ("LCS too short").
    """
    view = signature.view_events
    codes = [event.bol.code for event in view]
    beat_types = entry.bol_beat_types
    result = longest_common_substring(codes, entry.bols)

    used: set = set()
    gaps: List[float] = []
    for start_a, start_b in result.matches:
        span = set(range(start_a, start_a + result.length))
        if span & used:
            continue
        used |= span
        beat_times = [
            view[start_a + k].tau_s for k in range(result.length) if beat_types[start_b + k] is BeatType.FULL
        ]
        gaps.extend(later - earlier for earlier, later in zip(beat_times, beat_times[1:]))

    if not gaps:
        raise TempoEstimationError("lcs", f"LCS too short: {result.length} bol(s) matched with fewer than two 1-beats")
    period = float(np.median(gaps))
    logger.info(f"LCS tempo: period {period:.3f}s from {len(gaps)} gap(s)")
    return TempoEstimate(period=period, method="lcs", per_gap_estimates=tuple(gaps))


def select_tempo(
    comb: Union[TempoEstimate, Exception],
    lcs: Union[TempoEstimate, Exception],
    cfg: Optional[PipelineConfig] = None,
) -> TempoEstimate:
    """
    Chooses the LCS estimate when it exists and falls back to the comb estimate.

    When both exist and their periods differ by more than
    ``cfg.tempo_divergence_ratio``, a HalfDoublePeriodWarning is issued and recorded on
    the returned estimate.

    Raises:
        TempoEstimationError: If neither estimator produced a period.
    """
    cfg = cfg or PipelineConfig()
    if isinstance(lcs, TempoEstimate):
        if isinstance(comb, TempoEstimate):
            ratio = max(comb.period, lcs.period) / min(comb.period, lcs.period)
            if ratio > cfg.tempo_divergence_ratio:
                message = f"comb period {comb.period:.3f}s and LCS period {lcs.period:.3f}s differ by {ratio:.2f}x"
                logger.warning(f"Possible half/double tempo period: {message}")
                warnings.warn(message, HalfDoublePeriodWarning, stacklevel=2)
                return replace(lcs, warnings=lcs.warnings + (message,))
        return lcs
    if isinstance(comb, TempoEstimate):
        logger.warning(f"LCS tempo unavailable ({lcs}); using the comb filter estimate")
        return comb
    raise TempoEstimationError("select", f"both estimators failed: comb: {comb}; lcs: {lcs}")


def tempo_error(estimate: TempoEstimate, annotated_period: float) -> float:
    """Absolute error in seconds against an annotated period."""
    return abs(estimate.period - annotated_period)


def write_comb_energy_csv(path: str, estimate: TempoEstimate) -> None:
    """Per-bpm comb energies, for plotting."""
    write_csv(path, ["bpm", "period_s", "energy"], [[b, f"{60.0 / b:.4f}", repr(e)] for b, e in sorted(estimate.band_energies.items())])
