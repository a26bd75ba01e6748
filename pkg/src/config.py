import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Tuple

import yaml

# Define the base directory for the project
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
"""
BASE_DIR is the repository root, resolved from this file so commands behave the same
from any working directory.

Example:
>>> BASE_DIR
'/home/user/sollukattu'
"""

DATA_DIR = os.path.join(BASE_DIR, 'data')
"""
DATA_DIR holds the shipped reference data (the Sollukattu dictionary).

Example:
>>> DATA_DIR
'/home/user/sollukattu/data'
"""

DEFAULT_DICTIONARY_PATH = os.path.join(DATA_DIR, 'sollukattu_dictionary.txt')
"""
DEFAULT_DICTIONARY_PATH is the dictionary used when `--dict` is not given.

Notes:
- The file format is described at the top of the file itself.
"""

DEFAULT_CONFIG_PATH = os.path.join(BASE_DIR, 'config', 'default.yaml')
"""
DEFAULT_CONFIG_PATH points at the YAML file listing every tunable with its source.
"""

OUTPUT_DIR = os.path.join(BASE_DIR, 'output')
"""
OUTPUT_DIR is where CLI commands write artifacts when `--out-dir` is not given.

Notes:
- The directory is created on first write, not at import.
"""

SAMPLE_RATE = 44100
"""
SAMPLE_RATE is the recording rate of the reference corpus (r = 44100 samples/s).
Other rates are accepted on input; the synthesizer renders at this rate.
"""

SILENCE_WIN = 0.090
"""
SILENCE_WIN is the silence-detection frame length in seconds.

Example:
>>> round(SILENCE_WIN * SAMPLE_RATE)
3969
"""

SILENCE_STEP = 0.010
"""
SILENCE_STEP is the hop between silence-detection frames in seconds.
"""

THRESHOLD_WEIGHT = 0.0
"""
THRESHOLD_WEIGHT is W in T = (W*M1 + M2)/(W + 1). With W = 0 the threshold sits on the
second histogram maximum; larger W starts to remove weak half-beats.
"""

HISTOGRAM_BINS = 100
"""
HISTOGRAM_BINS is the number of equal-width bins over [min, max] of a frame feature.
"""

HISTOGRAM_SMOOTHING = 3
"""
HISTOGRAM_SMOOTHING is the width (in bins) of the moving average applied before maxima
are searched.
"""

MIN_SLICE = 0.05
"""
MIN_SLICE is the shortest non-silent run (seconds) kept as a slice. Bols span 100 ms or
more, so shorter runs are clicks.
"""

FLAT_FEATURE_TOLERANCE = 0.05
"""
FLAT_FEATURE_TOLERANCE is the relative spread (max - min) / max, taken over frames with
non-zero energy, below which a frame feature carries no silence information and is not
thresholded.

Example:
>>> centroids = [1985.2, 1986.0, 1979.9]  # voiced frames, N = 3969
>>> (max(centroids) - min(centroids)) / max(centroids) < FLAT_FEATURE_TOLERANCE
True
"""

MFCC_FRAME = 0.025
"""
MFCC_FRAME is the MFCC analysis frame length in seconds.
"""

MFCC_HOP = 0.010
"""
MFCC_HOP is the MFCC analysis hop in seconds.
"""

PRE_EMPHASIS = 0.97
"""
PRE_EMPHASIS is the first-order pre-emphasis coefficient y[n] = x[n] - a*x[n-1].
"""

N_MEL_FILTERS = 26
"""
N_MEL_FILTERS is the size of the triangular mel filterbank spanning 0 to sample_rate/2.
"""

N_CEPSTRA = 13
"""
N_CEPSTRA is the number of cepstral coefficients kept, c0 included.

Example:
>>> 3 * N_CEPSTRA
39
"""

DELTA_WINDOW = 2
"""
DELTA_WINDOW is the half-width of the delta regression window, in frames.
"""

LOG_FLOOR = 1e-10
"""
LOG_FLOOR clamps filterbank energies before the logarithm.
"""

GMM_COMPONENTS = 15
"""
GMM_COMPONENTS is M, the number of diagonal Gaussians per bol class.
"""

GMM_SEED = 0
"""
GMM_SEED is the base seed for k-means++ initialisation; class c uses GMM_SEED + c.
"""

EM_TOLERANCE = 1e-6
"""
EM_TOLERANCE stops EM when the relative log-likelihood improvement falls below it.
"""

EM_MAX_ITER = 200
"""
EM_MAX_ITER caps the number of EM iterations per class.
"""

VAR_FLOOR_RATIO = 1e-4
"""
VAR_FLOOR_RATIO sets the variance floor to this fraction of the per-dimension data
variance of the class.
"""

BPM_MIN = 33
"""
BPM_MIN is the slowest tempo searched by the comb filter (period about 1.8 s).
"""

BPM_MAX = 75
"""
BPM_MAX is the fastest tempo searched by the comb filter (period 0.8 s).
"""

TEMPO_BANDS: Tuple[Tuple[float, float], ...] = ((0.0, 900.0), (900.0, 2600.0), (2600.0, 22100.0))
"""
TEMPO_BANDS are the vocal, beating and harmonic bands in Hz. An upper edge at or above
Nyquist turns the band into a high-pass.
"""

ENVELOPE_RATE = 200
"""
ENVELOPE_RATE is the rate (Hz) the rectified band signals are decimated to.
"""

HALF_WINDOW = 0.4
"""
HALF_WINDOW is the length in seconds of the decaying half-Hanning smoothing window.
"""

COMB_PERIODS = 3
"""
COMB_PERIODS is the number of periods covered by each candidate impulse train.
"""

WIDE_LOW = 0.25
"""
WIDE_LOW is subtracted from T for the lower edge of wide(T) = [T - 0.25, T + 0.4].
"""

WIDE_HIGH = 0.4
"""
WIDE_HIGH is added to T for the upper edge of wide(T).
"""

LONG_GAP_OFFSET = 0.25
"""
LONG_GAP_OFFSET defines long_gap(T) = 2T - 0.25.
"""

FORCED_STICK_DURATION = 0.5
"""
FORCED_STICK_DURATION is the length in seconds of a stick-beat inserted in a long gap.
"""

TEMPO_DIVERGENCE_RATIO = 2.0
"""
TEMPO_DIVERGENCE_RATIO: comb and LCS periods further apart than this factor trigger a
half/double-period warning.
"""

MAX_WORKERS = 4
"""
MAX_WORKERS bounds every thread pool (per-file runs, per-class training).
"""


@dataclass(frozen=True)
class PipelineConfig:
    """
    Every tunable of the pipeline in one serialisable object.

    Defaults come from the module constants above. Instances are validated on
    construction, so a config that exists is a config that is usable.
    """

    win: float = SILENCE_WIN
    step: float = SILENCE_STEP
    weight: float = THRESHOLD_WEIGHT
    histogram_bins: int = HISTOGRAM_BINS
    histogram_smoothing: int = HISTOGRAM_SMOOTHING
    min_slice: float = MIN_SLICE
    flat_feature_tolerance: float = FLAT_FEATURE_TOLERANCE
    mfcc_frame: float = MFCC_FRAME
    mfcc_hop: float = MFCC_HOP
    pre_emphasis: float = PRE_EMPHASIS
    n_mel_filters: int = N_MEL_FILTERS
    n_cepstra: int = N_CEPSTRA
    delta_window: int = DELTA_WINDOW
    log_floor: float = LOG_FLOOR
    n_components: int = GMM_COMPONENTS
    seed: int = GMM_SEED
    em_tolerance: float = EM_TOLERANCE
    em_max_iter: int = EM_MAX_ITER
    var_floor_ratio: float = VAR_FLOOR_RATIO
    bpm_min: int = BPM_MIN
    bpm_max: int = BPM_MAX
    tempo_bands: Tuple[Tuple[float, float], ...] = TEMPO_BANDS
    envelope_rate: int = ENVELOPE_RATE
    half_window: float = HALF_WINDOW
    comb_periods: int = COMB_PERIODS
    wide_low: float = WIDE_LOW
    wide_high: float = WIDE_HIGH
    long_gap_offset: float = LONG_GAP_OFFSET
    forced_stick_duration: float = FORCED_STICK_DURATION
    tempo_divergence_ratio: float = TEMPO_DIVERGENCE_RATIO
    max_workers: int = MAX_WORKERS

    def __post_init__(self) -> None:
        object.__setattr__(self, "tempo_bands", tuple(tuple(float(e) for e in band) for band in self.tempo_bands))
        self.validate()

    def validate(self) -> None:
        """
        Checks every field against its documented range.

        Raises:
            ValueError: Naming the first offending field.
        """
        checks = [
            ("win", 0 < self.win),
            ("step", 0 < self.step <= self.win),
            ("weight", self.weight >= 0),
            ("histogram_bins", self.histogram_bins >= 3),
            ("histogram_smoothing", self.histogram_smoothing >= 1),
            ("min_slice", self.min_slice >= 0),
            ("flat_feature_tolerance", 0 <= self.flat_feature_tolerance < 1),
            ("mfcc_frame", 0 < self.mfcc_frame),
            ("mfcc_hop", 0 < self.mfcc_hop <= self.mfcc_frame),
            ("pre_emphasis", 0 <= self.pre_emphasis < 1),
            ("n_mel_filters", self.n_mel_filters >= self.n_cepstra),
            ("n_cepstra", self.n_cepstra >= 1),
            ("delta_window", self.delta_window >= 1),
            ("log_floor", self.log_floor > 0),
            ("n_components", self.n_components >= 1),
            ("em_tolerance", self.em_tolerance > 0),
            ("em_max_iter", self.em_max_iter >= 1),
            ("var_floor_ratio", self.var_floor_ratio > 0),
            ("bpm_min", 0 < self.bpm_min < self.bpm_max),
            ("tempo_bands", len(self.tempo_bands) >= 1 and all(0 <= lo < hi for lo, hi in self.tempo_bands)),
            ("envelope_rate", self.envelope_rate > 2 * self.bpm_max / 60),
            ("half_window", self.half_window > 0),
            ("comb_periods", self.comb_periods >= 2),
            ("wide_low", self.wide_low >= 0),
            ("wide_high", self.wide_high >= 0),
            ("long_gap_offset", self.long_gap_offset >= 0),
            ("forced_stick_duration", self.forced_stick_duration > 0),
            ("tempo_divergence_ratio", self.tempo_divergence_ratio > 1),
            ("max_workers", self.max_workers >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"Invalid configuration value for '{name}': {getattr(self, name)!r}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["tempo_bands"] = [list(band) for band in self.tempo_bands]
        return data

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON form; embedded in every report.

        Example:
            >>> len(PipelineConfig().config_hash())
            64
        """
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def replace(self, **changes: Any) -> "PipelineConfig":
        data = self.to_dict()
        data.update(changes)
        return PipelineConfig(**data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"Unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_yaml(cls, path: str) -> "PipelineConfig":
        """
        Loads a configuration file; missing keys keep their defaults.

        Args:
            path (str): YAML file with a flat mapping of field names to values.

        Returns:
            PipelineConfig: The validated configuration.

        Raises:
            ValueError: On unknown keys, a non-mapping document or out-of-range values.
        """
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
        if not isinstance(data, dict):
            raise ValueError(f"Configuration file {path} must contain a mapping")
        return cls.from_dict(data)

    def to_yaml(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(self.to_dict(), handle, sort_keys=True)
