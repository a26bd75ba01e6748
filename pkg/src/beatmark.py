"""
Beat marking and its evaluation.

``mark_beats`` walks the signal signature left to right, measuring every event's start
against the last marked 1-beat. Events one tempo period away become 1-beats (or
stick-beats when quiet and struck), closer events become half-beats, and long silences
receive forced stick-beats on the tempo grid. ``evaluate`` scores marked beats against
annotated ones.
"""
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks
from sklearn.cluster import KMeans

from src.audio import AudioSignal
from src.bols import STICK, BolClass, bol_code, bol_label, parse_bol
from src.config import PipelineConfig
from src.signatures import BeatType, BolEvent, EnergyClass
from src.tempo import band_pass, onset_envelope
from src.utils.error_handling import BeatMarkingError
from src.utils.io_utils import read_csv, write_csv, write_text

ANNOTATION_HEADER = ["event_id", "bol_label", "bol_code", "tau_s", "tau_e", "beat_type"]

STRIKE_BAND = (900.0, 2600.0)
"""Band the onset picker listens to; instrumental strikes dominate it."""


@dataclass(frozen=True)
class MarkedBeat:
    """
    One row of a beat-marked annotation.

    A stick-beat never carries a bol (``bol`` is None). An undefined beat keeps the bol
    of its slice when there is one.
    """

    bol: Optional[BolClass]
    tau_s: float
    tau_e: float
    event: BeatType

    def __post_init__(self) -> None:
        if self.tau_e < self.tau_s:
            raise ValueError(f"Marked beat ends before it starts: [{self.tau_s}, {self.tau_e}]")
        if self.event is BeatType.STICK and self.bol is not None:
            raise ValueError("A stick-beat carries no bol")


@dataclass(frozen=True)
class AnnotationRecord:
    """Ground-truth row: same fields as MarkedBeat plus its id in the annotation file."""

    event_id: int
    bol: Optional[BolClass]
    tau_s: float
    tau_e: float
    event: BeatType

    def __post_init__(self) -> None:
        if self.tau_e < self.tau_s:
            raise ValueError(f"Annotation {self.event_id} ends before it starts")
        if self.event is BeatType.STICK and self.bol is not None:
            raise ValueError(f"Annotation {self.event_id}: a stick-beat carries no bol")


BeatRow = Union[MarkedBeat, AnnotationRecord]


@dataclass(frozen=True)
class DetectedBeats:
    """Timestamps (seconds) of 1-beats found by an onset detector; strictly increasing."""

    timestamps: tuple = ()

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.timestamps)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("Detected beat timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", times)

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class EvaluationResult:
    """
    Match counts and percentages of marked beats against annotations.

    Attributes:
        time_match (float): 100 * u / |AB|, annotations overlapped by a marked beat.
        bol_match (float): 100 * v / |AB|, time matches with the same bol.
        event_match (float): 100 * w / |AB|, time matches with the same beat type.
        full_match (float): 100 * (time, bol and event matched) / |AB|.
    """

    time_match: float
    bol_match: float
    event_match: float
    full_match: float
    u: int
    v: int
    w: int
    full: int
    n_annotated: int
    n_marked: int

    def to_dict(self) -> dict:
        return {
            "time_match": self.time_match,
            "bol_match": self.bol_match,
            "event_match": self.event_match,
            "full_match": self.full_match,
            "u": self.u,
            "v": self.v,
            "w": self.w,
            "full": self.full,
            "n_annotated": self.n_annotated,
            "n_marked": self.n_marked,
        }


def energy_classes(events: Sequence[BolEvent]) -> List[BolEvent]:
    """
    Labels every event high or low energy by two-cluster k-means on the raw energies.

    The clusters start at the minimum and maximum energy, so the result is deterministic.
    When every energy is equal there is no quiet class and all events are high.

    Args:
        events (Sequence[BolEvent]): Events with ``raw_energy`` filled in.

    Returns:
        List[BolEvent]: Copies of the events with ``energy_class`` set.

    Example:
        Energies 1.0, 1.1, 0.1, 0.12 give high, high, low, low.
    """
    if not events:
        return []
    energies = np.array([e.raw_energy for e in events], dtype=np.float64)
    if len(events) < 2 or np.ptp(energies) == 0.0:
        return [replace(e, energy_class=EnergyClass.HIGH) for e in events]

    column = energies.reshape(-1, 1)
    init = np.array([[energies.min()], [energies.max()]])
    kmeans = KMeans(n_clusters=2, init=init, n_init=1).fit(column)
    centres = kmeans.cluster_centers_.ravel()
    high_label = int(np.argmax(centres))
    labels = kmeans.labels_
    return [
        replace(e, energy_class=EnergyClass.HIGH if label == high_label else EnergyClass.LOW)
        for e, label in zip(events, labels)
    ]


def overlap_beats(db: Union[DetectedBeats, Sequence[float]], events: Sequence[BolEvent]) -> List[bool]:
    """
    For every event, whether some detected beat lies within [tau_s, tau_e].

    A single merge over both ordered sequences.
    """
    times = db.timestamps if isinstance(db, DetectedBeats) else tuple(db)
    overlapped = [False] * len(events)
    p = q = 0
    while p < len(times) and q < len(events):
        if times[p] < events[q].tau_s:
            p += 1
        elif times[p] <= events[q].tau_e:
            overlapped[q] = True
            q += 1
        else:
            q += 1
    return overlapped


def mark_beats(
    db: Union[DetectedBeats, Sequence[float]],
    events: Sequence[BolEvent],
    period: float,
    cfg: Optional[PipelineConfig] = None,
) -> List[MarkedBeat]:
    """
    Marks 1-beats, half-beats and stick-beats on a signal signature.

    The first event is the downbeat. For each later event the gap g between its start
    and the last marked 1-beat decides the branch:

    - T - wide_low <= g <= T + wide_high: high energy gives a 1-beat, low energy with a
      detected beat inside gives a stick-beat (no bol), anything else an undefined beat.
      Only 1-beats and stick-beats become the new last 1-beat.
    - g < T - wide_low: a half-beat; the last 1-beat is unchanged.
    - g > 2T - long_gap_offset: a forced stick-beat is inserted one period after the
      last 1-beat, which moves forward by T; the event is examined again.
    - otherwise: an undefined beat that resynchronises the last 1-beat to the event.

    Events without an energy class are classified first with ``energy_classes``.

    Args:
        db (Union[DetectedBeats, Sequence[float]]): Detected 1-beat times.
        events (Sequence[BolEvent]): Signal signature events in time order.
        period (float): Tempo period T in seconds.
        cfg (Optional[PipelineConfig]): Branch offsets and forced stick duration.

    Returns:
        List[MarkedBeat]: Marked beats in time order.

    Raises:
        BeatMarkingError: Empty signature or a period too short for the wide window.
    """
    cfg = cfg or PipelineConfig()
    if not events:
        raise BeatMarkingError("cannot mark beats on an empty signal signature")
    if period <= cfg.wide_low + cfg.wide_high:
        raise BeatMarkingError(f"tempo period {period:.3f}s is too short; need T > {cfg.wide_low + cfg.wide_high:.2f}s")
    if any(e.energy_class is None for e in events):
        events = energy_classes(events)

    overlapped = overlap_beats(db, events)
    wide_lo = period - cfg.wide_low
    wide_hi = period + cfg.wide_high
    long_gap = 2 * period - cfg.long_gap_offset

    first = events[0]
    marked = [MarkedBeat(None if _is_stick(first.bol) else first.bol, first.tau_s, first.tau_e,
                         BeatType.STICK if _is_stick(first.bol) else BeatType.FULL)]
    last_beat = first.tau_s
    i = 1
    while i < len(events):
        event = events[i]
        gap = event.tau_s - last_beat
        if wide_lo <= gap <= wide_hi:
            if _is_stick(event.bol):
                marked.append(MarkedBeat(None, event.tau_s, event.tau_e, BeatType.STICK))
            elif event.energy_class is EnergyClass.HIGH:
                marked.append(MarkedBeat(event.bol, event.tau_s, event.tau_e, BeatType.FULL))
            elif overlapped[i]:
                marked.append(MarkedBeat(None, event.tau_s, event.tau_e, BeatType.STICK))
            else:
                marked.append(MarkedBeat(event.bol, event.tau_s, event.tau_e, BeatType.UNDEFINED))
                i += 1
                continue
            last_beat = event.tau_s
            i += 1
        elif gap < wide_lo:
            if _is_stick(event.bol):
                # A half-beat is always vocalised.
                marked.append(MarkedBeat(None, event.tau_s, event.tau_e, BeatType.UNDEFINED))
            else:
                marked.append(MarkedBeat(event.bol, event.tau_s, event.tau_e, BeatType.HALF))
            i += 1
        elif gap > long_gap:
            start = last_beat + period
            marked.append(MarkedBeat(None, start, start + cfg.forced_stick_duration, BeatType.STICK))
            logger.debug(f"Forced stick-beat at {start:.3f}s")
            last_beat = start
        else:
            logger.debug(f"Event at {event.tau_s:.3f}s is {gap:.3f}s after the last 1-beat; marked undefined")
            marked.append(MarkedBeat(event.bol, event.tau_s, event.tau_e, BeatType.UNDEFINED))
            last_beat = event.tau_s
            i += 1

    # A forced stick-beat can start before an undefined beat that did not move last_beat.
    marked.sort(key=lambda m: m.tau_s)
    counts = {beat_type.value: sum(1 for m in marked if m.event is beat_type) for beat_type in BeatType}
    logger.info(f"Marked {len(marked)} beat(s): {counts}")
    return marked


def _is_stick(bol: Optional[BolClass]) -> bool:
    return bol is not None and bol.is_stick


def _sort_key(row: BeatRow):
    return (row.tau_s, row.tau_e, row.event.value, bol_code(row.bol))


def evaluate(marked: Sequence[BeatRow], annotated: Sequence[BeatRow]) -> EvaluationResult:
    """
    Compares marked beats with annotations.

    Both lists are sorted by time; each annotation takes the first still unused marked
    beat whose closed interval overlaps its own. Bol and event matches count only
    among those time matches. Percentages are over the number of annotations.

    Raises:
        ValueError: If there are no annotations.
    """
    if not annotated:
        raise ValueError("evaluate needs at least one annotated beat")
    marked_sorted = sorted(marked, key=_sort_key)
    used = [False] * len(marked_sorted)
    u = v = w = full = 0
    for row in sorted(annotated, key=_sort_key):
        for k, candidate in enumerate(marked_sorted):
            if used[k] or candidate.tau_s > row.tau_e or candidate.tau_e < row.tau_s:
                continue
            used[k] = True
            u += 1
            same_bol = bol_code(candidate.bol) == bol_code(row.bol)
            same_event = candidate.event is row.event
            v += same_bol
            w += same_event
            full += same_bol and same_event
            break

    n = len(annotated)
    result = EvaluationResult(
        time_match=100.0 * u / n,
        bol_match=100.0 * v / n,
        event_match=100.0 * w / n,
        full_match=100.0 * full / n,
        u=u,
        v=v,
        w=w,
        full=full,
        n_annotated=n,
        n_marked=len(marked),
    )
    logger.info(
        f"Evaluation over {n} annotated beat(s): time {result.time_match:.2f}%, "
        f"bol {result.bol_match:.2f}%, event {result.event_match:.2f}%"
    )
    return result


def detect_onsets(sig: AudioSignal, cfg: Optional[PipelineConfig] = None) -> DetectedBeats:
    """
    Rough 1-beat detector for runs without a detected-beats file.

    Peaks of the strike band's onset envelope are kept when they exceed both 1.5 times
    the local average over one slowest period and half the global maximum. Peaks are at
    least half the fastest tempo period apart.
    """
    cfg = cfg or PipelineConfig()
    band = band_pass(sig.samples, sig.sample_rate, *STRIKE_BAND)
    onset = onset_envelope(band, sig.sample_rate, cfg)
    if onset.size == 0 or np.max(onset) <= 0:
        logger.warning("No onsets found; detected beats are empty")
        return DetectedBeats(())
    rate = cfg.envelope_rate
    local = uniform_filter1d(onset, size=max(int(round(60.0 / cfg.bpm_min * rate)), 1), mode="nearest")
    threshold = np.maximum(1.5 * local, 0.5 * np.max(onset))
    distance = max(int(0.5 * 60.0 / cfg.bpm_max * rate), 1)
    peaks, _ = find_peaks(onset, height=threshold, distance=distance)
    logger.info(f"Onset detector found {len(peaks)} beat(s)")
    return DetectedBeats(tuple(peaks / rate))


def read_detected_beats(path: str) -> DetectedBeats:
    """
    Reads one timestamp per line; blank lines and ``#`` comments are skipped.

    Raises:
        ValueError: On a non-numeric line or timestamps that do not increase.
    """
    times = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                times.append(float(line.split(",")[0]))
            except ValueError as e:
                raise ValueError(f"{path}:{line_number}: not a timestamp: {line!r}") from e
    return DetectedBeats(tuple(times))


def write_detected_beats(path: str, db: DetectedBeats) -> None:
    """One timestamp per line, readable by ``read_detected_beats``."""
    write_text(path, "# detected 1-beat times (s)\n" + "".join(f"{t:.6f}\n" for t in db.timestamps))


def _row_bol(bol: Optional[BolClass], event: BeatType):
    shown = STICK if event is BeatType.STICK else bol
    return bol_label(shown), bol_code(shown)


def write_annotation_csv(path: str, rows: Sequence[BeatRow]) -> None:
    """Marked beats or annotations in the annotation table layout, times to the millisecond."""
    table = []
    for index, row in enumerate(rows, start=1):
        label, code = _row_bol(row.bol, row.event)
        event_id = row.event_id if isinstance(row, AnnotationRecord) else index
        table.append([event_id, label, code, f"{row.tau_s:.3f}", f"{row.tau_e:.3f}", row.event.value])
    write_csv(path, ANNOTATION_HEADER, table)


def read_annotation_csv(path: str) -> List[AnnotationRecord]:
    """
    Reads an annotation table.

    Raises:
        ValueError: On an unknown bol or beat type, or a missing column.
    """
    records = []
    for row in read_csv(path):
        try:
            event = BeatType.parse(row["beat_type"])
            bol = None if event is BeatType.STICK else parse_bol(row["bol_label"], row.get("bol_code") or None)
            records.append(
                AnnotationRecord(
                    event_id=int(row["event_id"]),
                    bol=bol,
                    tau_s=float(row["tau_s"]),
                    tau_e=float(row["tau_e"]),
                    event=event,
                )
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"{path}: malformed annotation row {row}: {e}") from e
    return records


def as_marked_beats(rows: Sequence[BeatRow]) -> List[MarkedBeat]:
    return [MarkedBeat(r.bol, r.tau_s, r.tau_e, r.event) for r in rows]
