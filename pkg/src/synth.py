"""
Synthetic Sollukattu renderer with exact ground truth.

Every pattern token becomes one burst: band-passed noise standing in for the stick
strike plus, for vocal bols, a short harmonic "vowel" whose partials sit on a
class-specific subset of the lowest mel band centres. Half-beats are struck softly but
voiced at full level. Everything outside the bursts is digital silence.
"""
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.signal import butter, sosfilt

from src.audio import AudioSignal, write_wav
from src.beatmark import AnnotationRecord, DetectedBeats, write_annotation_csv, write_detected_beats
from src.bols import BOL_CLASSES, STICK_CODE
from src.config import N_MEL_FILTERS, SAMPLE_RATE
from src.features import mel_band_centres
from src.signatures import BeatType, PatternToken, SollukattuSignature
from src.utils.error_handling import SynthesisError

STRIKE_LEVEL = {BeatType.FULL: 0.2, BeatType.STICK: 0.2, BeatType.HALF: 0.08, BeatType.QUARTER: 0.08}
"""RMS of the strike noise by beat type; half- and quarter-beats are struck softly."""

VOWEL_LEVEL = {BeatType.FULL: 0.25, BeatType.HALF: 0.15, BeatType.QUARTER: 0.15}
"""RMS of a vowel burst before its envelope; bols off the beat are spoken softly."""

MIN_GAP = 0.15
"""Silence (seconds) required between the end of one burst and the start of the next."""

BEAT_OFFSET = 0.01
"""A detected 1-beat lies this far (seconds) after its burst onset."""


def default_timbres(sample_rate: int = SAMPLE_RATE, n_filters: int = N_MEL_FILTERS) -> Dict[int, Tuple[float, ...]]:
    """
    Partial frequencies for each vocal bol class.

    The 31 non-empty subsets of the five lowest mel band centres are handed out to the
    vocal codes 1..31 in order of subset size, so no two classes share a spectrum.
    """
    centres = [float(f) for f in mel_band_centres(sample_rate, n_filters)[:5]]
    subsets = [subset for size in range(1, 6) for subset in combinations(centres, size)]
    vocal_codes = sorted(code for code in BOL_CLASSES if code != STICK_CODE)
    return {code: subset for code, subset in zip(vocal_codes, subsets)}


@dataclass(frozen=True)
class SynthSpec:
    """
    Rendering recipe.

    Attributes:
        pattern (SollukattuSignature): Pattern to render.
        period (float): Tempo period T in seconds, within [0.8, 1.8].
        bars (int): Number of times the whole pattern is played.
        jitter (float): Onset noise as a fraction of T, uniform in [-jitter, +jitter].
        timbres (Optional[Dict[int, Tuple[float, ...]]]): Partials per bol code; the
            defaults of ``default_timbres`` when None.
        strike_band (Tuple[float, float]): Strike noise band in Hz.
        sample_rate (int): Output rate.
        burst_duration (float): Length of every burst in seconds.
        lead_in (float): Silence before the first beat.
        tail (float): Silence after the last beat slot.
    """

    pattern: SollukattuSignature
    period: float
    bars: int = 1
    jitter: float = 0.0
    timbres: Optional[Dict[int, Tuple[float, ...]]] = field(default=None, compare=False)
    strike_band: Tuple[float, float] = (900.0, 2600.0)
    sample_rate: int = SAMPLE_RATE
    burst_duration: float = 0.22
    lead_in: float = 0.5
    tail: float = 0.5

    def __post_init__(self) -> None:
        if not 0.8 <= self.period <= 1.8:
            raise SynthesisError(f"period {self.period}s outside [0.8, 1.8]")
        if self.bars < 1:
            raise SynthesisError(f"bars must be >= 1, got {self.bars}")
        if not 0.0 <= self.jitter < 0.1:
            raise SynthesisError(f"jitter must be in [0, 0.1), got {self.jitter}")
        low, high = self.strike_band
        if not 0 < low < high < self.sample_rate / 2:
            raise SynthesisError(f"strike band {self.strike_band} must lie inside (0, {self.sample_rate / 2})")


def _envelope(n: int, sample_rate: int, decay: float) -> np.ndarray:
    t = np.arange(n) / sample_rate
    attack = np.minimum(t / 0.005, 1.0)
    fade = np.minimum((n - 1 - np.arange(n)) / (0.01 * sample_rate), 1.0)
    return attack * np.exp(-t / decay) * np.clip(fade, 0.0, 1.0)


def _strike(n: int, spec: SynthSpec, level: float, rng: np.random.Generator) -> np.ndarray:
    sos = butter(4, list(spec.strike_band), btype="bandpass", fs=spec.sample_rate, output="sos")
    noise = sosfilt(sos, rng.standard_normal(n))
    noise /= np.sqrt(np.mean(np.square(noise)))
    return level * noise * _envelope(n, spec.sample_rate, 0.05)


def _vowel(n: int, spec: SynthSpec, partials: Tuple[float, ...], level: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / spec.sample_rate
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(partials))
    tone = sum(np.sin(2.0 * np.pi * f * t + phase) for f, phase in zip(partials, phases))
    tone = tone / np.sqrt(np.mean(np.square(tone)))
    return level * tone * _envelope(n, spec.sample_rate, 0.1)


def event_times(spec: SynthSpec, rng: np.random.Generator) -> List[Tuple[float, PatternToken]]:
    """
    Onset and pattern token of every rendered event, in time order.

    The n tokens of a beat group are spread j * T / n after the beat, so a 1-beat
    followed by a half-beat puts the half-beat at T / 2.
    """
    groups = list(spec.pattern.beats) * spec.bars
    onsets = []
    for k, group in enumerate(groups):
        beat = spec.lead_in + k * spec.period
        for j, token in enumerate(group):
            offset = rng.uniform(-spec.jitter, spec.jitter) * spec.period if spec.jitter > 0 else 0.0
            onsets.append((beat + j * spec.period / len(group) + offset, token))
    onsets.sort(key=lambda item: item[0])
    return onsets


def synthesize(spec: SynthSpec, seed: int = 0) -> Tuple[AudioSignal, List[AnnotationRecord], DetectedBeats]:
    """
    Renders a pattern and returns its audio, annotation and true 1-beat times.

    Args:
        spec (SynthSpec): What to render.
        seed (int): Seed for jitter, noise and vowel phases; the same spec and seed give
            the same samples.

    Returns:
        Tuple[AudioSignal, List[AnnotationRecord], DetectedBeats]: The mix, one
        annotation row per event (stick-beats without a bol) and the onsets of all
        1-beats and stick-beats shifted by ``BEAT_OFFSET``.

    Raises:
        SynthesisError: If two bursts would overlap or crowd each other.
    """
    rng = np.random.default_rng(seed)
    timbres = spec.timbres if spec.timbres is not None else default_timbres(spec.sample_rate)
    events = event_times(spec, rng)
    if events[0][0] < 0:
        raise SynthesisError("first onset falls before the start of the signal")
    for (earlier, _), (later, _) in zip(events, events[1:]):
        if later - earlier < spec.burst_duration + MIN_GAP:
            raise SynthesisError(
                f"bursts at {earlier:.3f}s and {later:.3f}s overlap; period {spec.period}s is too short for "
                f"{spec.burst_duration}s bursts"
            )

    n_beats = len(spec.pattern.beats) * spec.bars
    total = int(round((spec.lead_in + n_beats * spec.period + spec.tail) * spec.sample_rate))
    mix = np.zeros(total)
    burst = int(round(spec.burst_duration * spec.sample_rate))
    annotations: List[AnnotationRecord] = []
    beats: List[float] = []
    for event_id, (onset, token) in enumerate(events, start=1):
        start = int(round(onset * spec.sample_rate))
        rendered = _strike(burst, spec, STRIKE_LEVEL[token.beat_type], rng)
        if not token.bol.is_stick:
            if token.bol.code not in timbres:
                raise SynthesisError(f"no timbre for bol '{token.bol.label}'")
            rendered = rendered + _vowel(burst, spec, timbres[token.bol.code], VOWEL_LEVEL[token.beat_type], rng)
        mix[start : start + burst] += rendered[: total - start]
        annotations.append(
            AnnotationRecord(
                event_id=event_id,
                bol=None if token.bol.is_stick else token.bol,
                tau_s=start / spec.sample_rate,
                tau_e=(start + burst) / spec.sample_rate,
                event=token.beat_type,
            )
        )
        if token.beat_type in (BeatType.FULL, BeatType.STICK):
            beats.append(start / spec.sample_rate + BEAT_OFFSET)

    peak = float(np.max(np.abs(mix)))
    if peak > 0.95:
        mix *= 0.95 / peak
    logger.info(
        f"Synthesised '{spec.pattern.name}' x{spec.bars} at T={spec.period:.3f}s: {len(annotations)} event(s), "
        f"{total / spec.sample_rate:.2f}s"
    )
    return AudioSignal(mix, spec.sample_rate), annotations, DetectedBeats(tuple(beats))


def write_synthesis(
    out_dir: str,
    stem: str,
    sig: AudioSignal,
    annotations: List[AnnotationRecord],
    beats: DetectedBeats,
) -> Dict[str, str]:
    """
    Writes ``<stem>.wav``, ``<stem>.annotation.csv`` and ``<stem>.beats.txt``.

    Returns:
        Dict[str, str]: Paths keyed by "wav", "annotation" and "beats".
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "wav": os.path.join(out_dir, f"{stem}.wav"),
        "annotation": os.path.join(out_dir, f"{stem}.annotation.csv"),
        "beats": os.path.join(out_dir, f"{stem}.beats.txt"),
    }
    write_wav(paths["wav"], sig)
    write_annotation_csv(paths["annotation"], annotations)
    write_detected_beats(paths["beats"], beats)
    return paths
