"""
Signal signatures, the Sollukattu dictionary and the string algorithms used to match them.

A signal signature is the ordered list of classified slices of one recording. Its string
view keeps only the recognised vocal bols. A Sollukattu signature is the canonical bol
string of one pattern (stick-beats skipped) plus the beat type of every position.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.audio import AudioSignal
from src.bols import BolClass, bol_code, bol_label, get_bol, parse_bol
from src.config import PipelineConfig
from src.features import FeatureSequence, mfcc
from src.gmm import GmmModel, classify
from src.segmenter import NonSilentSlice
from src.utils.error_handling import DictionaryFormatError, RecognitionError, SliceTooShortError
from src.utils.io_utils import read_csv, write_csv


class BeatType(Enum):
    FULL = "B"
    HALF = "HB"
    QUARTER = "QB"
    STICK = "STICK"
    UNDEFINED = "UNDEF"

    @classmethod
    def parse(cls, text: str) -> "BeatType":
        token = text.strip().upper()
        if token in ("⊥", "FN"):
            return cls.STICK
        if token == "⊤":
            return cls.UNDEFINED
        return cls(token)


class EnergyClass(Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class BolEvent:
    """
    One classified slice.

    Attributes:
        bol (Optional[BolClass]): Recognised class; None when recognition failed.
        tau_s (float): Slice start in seconds.
        tau_e (float): Slice end in seconds.
        raw_energy (float): Mean squared amplitude of the slice.
        energy_class (Optional[EnergyClass]): Filled in by beat marking.
        score (Optional[float]): Classifier log-likelihood, if any.
    """

    bol: Optional[BolClass]
    tau_s: float
    tau_e: float
    raw_energy: float = 0.0
    energy_class: Optional[EnergyClass] = None
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.tau_s < self.tau_e:
            raise ValueError(f"BolEvent needs tau_s < tau_e, got [{self.tau_s}, {self.tau_e}]")

    @property
    def in_string_view(self) -> bool:
        return self.bol is not None and not self.bol.is_stick


@dataclass(frozen=True)
class SignalSignature:
    events: Tuple[BolEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        starts = [e.tau_s for e in self.events]
        if any(b < a for a, b in zip(starts, starts[1:])):
            raise ValueError("SignalSignature events must be ordered by start time")

    @property
    def view_events(self) -> List[BolEvent]:
        """Events that take part in string matching (no sticks, no failures)."""
        return [e for e in self.events if e.in_string_view]

    @property
    def codes(self) -> List[int]:
        return [e.bol.code for e in self.view_events]

    def __len__(self) -> int:
        return len(self.codes)


@dataclass(frozen=True)
class PatternToken:
    bol: BolClass
    beat_type: BeatType


@dataclass(frozen=True)
class SollukattuSignature:
    """
    Dictionary entry for one Sollukattu.

    Attributes:
        name (str): Pattern name, e.g. "Natta".
        beats (Tuple[Tuple[PatternToken, ...], ...]): One group per beat of the full
            pattern (lam * p beats), stick-beats included.
        lam (int): Beats per bar (8 for Adi, 6 for Roopakam).
        recurrence (int): 6 or 8.
        p (int): Bars per pattern.
    """

    name: str
    beats: Tuple[Tuple[PatternToken, ...], ...]
    lam: int = 8
    recurrence: int = 8
    p: int = 1

    @property
    def tokens(self) -> List[PatternToken]:
        return [token for group in self.beats for token in group]

    @property
    def bols(self) -> List[int]:
        """The matching string: bol codes with stick-beats skipped."""
        return [t.bol.code for t in self.tokens if not t.bol.is_stick]

    @property
    def beat_types(self) -> List[BeatType]:
        """Beat type of every position of the full pattern, sticks included."""
        return [t.beat_type for t in self.tokens]

    @property
    def bol_beat_types(self) -> List[BeatType]:
        """Beat types aligned with ``bols``."""
        return [t.beat_type for t in self.tokens if not t.bol.is_stick]

    @property
    def stick_count(self) -> int:
        return sum(1 for t in self.tokens if t.bol.is_stick)


@dataclass(frozen=True)
class RecognitionResult:
    """
    Outcome of dictionary matching.

    Attributes:
        name (str): Best entry (lexicographically first among ties).
        distance (int): Its edit distance to the signal signature.
        table (List[Tuple[str, int]]): Every entry with its distance, best first.
        ties (Tuple[str, ...]): All entries sharing the best distance.
    """

    name: str
    distance: int
    table: List[Tuple[str, int]] = field(default_factory=list)
    ties: Tuple[str, ...] = ()


@dataclass(frozen=True)
class LcsResult:
    length: int
    matches: List[Tuple[int, int]] = field(default_factory=list)
    """Start index in ``a`` and in ``b`` of every common substring of maximal length."""


def _parse_beat_group(text: str) -> Tuple[PatternToken, ...]:
    tokens = []
    for position, raw in enumerate(text.split()):
        label, _, tag = raw.partition(":")
        bol = get_bol(label)
        if tag:
            beat_type = BeatType.parse(tag)
        elif bol.is_stick:
            beat_type = BeatType.STICK
        else:
            beat_type = BeatType.FULL if position == 0 else BeatType.HALF
        if bol.is_stick != (beat_type is BeatType.STICK):
            raise ValueError(f"token '{raw}': stick-beats and only stick-beats carry the STICK type")
        tokens.append(PatternToken(bol, beat_type))
    if not tokens:
        raise ValueError("empty beat group []")
    return tuple(tokens)


def parse_dictionary(text: str, source: str = "<string>") -> List[SollukattuSignature]:
    """
    Parses dictionary records of the form ``Name | lam | recurrence | p | [..] [..] ...``.

    Each bracket group is one beat. Tokens are bol labels with an optional ``:TYPE``
    (B, HB, QB, STICK). An untagged first token is a 1-beat and later untagged tokens
    are half-beats; ``stick`` marks a stick-beat. ``#`` starts a comment.

    Raises:
        DictionaryFormatError: On any malformed record or a duplicated name.
    """
    entries: List[SollukattuSignature] = []
    seen = set()
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [part.strip() for part in line.split("|")]
        if len(parts) != 5:
            raise DictionaryFormatError(source, line_number, "expected 'name | lam | recurrence | p | pattern'")
        name, lam_text, recurrence_text, p_text, pattern = parts
        try:
            lam, recurrence, p = int(lam_text), int(recurrence_text), int(p_text)
        except ValueError as e:
            raise DictionaryFormatError(source, line_number, f"non-integer header field ({e})") from e
        if lam not in (6, 8) or recurrence not in (6, 8) or p < 1:
            raise DictionaryFormatError(source, line_number, "lam and recurrence must be 6 or 8, p >= 1")
        if not name or name in seen:
            raise DictionaryFormatError(source, line_number, f"missing or duplicate name '{name}'")
        groups_text = pattern.replace("]", "[").split("[")
        if pattern.count("[") != pattern.count("]") or any(chunk.strip() for chunk in groups_text[0::2]):
            raise DictionaryFormatError(source, line_number, "pattern must be a sequence of [..] groups")
        try:
            beats = tuple(_parse_beat_group(group) for group in groups_text[1::2])
        except (KeyError, ValueError) as e:
            raise DictionaryFormatError(source, line_number, str(e)) from e
        if len(beats) != lam * p:
            raise DictionaryFormatError(source, line_number, f"{len(beats)} beat groups, expected lam * p = {lam * p}")
        entry = SollukattuSignature(name, beats, lam, recurrence, p)
        if not entry.bols:
            raise DictionaryFormatError(source, line_number, "pattern has no vocal bols")
        entries.append(entry)
        seen.add(name)
    return entries


def load_dictionary(path: str) -> List[SollukattuSignature]:
    with open(path, "r", encoding="utf-8") as handle:
        entries = parse_dictionary(handle.read(), source=path)
    logger.info(f"Loaded {len(entries)} Sollukattu signature(s) from {path}")
    return entries


def find_entry(dictionary: Iterable[SollukattuSignature], name: str) -> SollukattuSignature:
    for entry in dictionary:
        if entry.name.lower() == name.lower():
            return entry
    raise KeyError(f"No Sollukattu named '{name}' in the dictionary")


Classifier = Callable[[FeatureSequence, NonSilentSlice], Tuple[Optional[BolClass], Optional[float]]]


def build_signal_signature(
    sig: AudioSignal,
    slices: Sequence[NonSilentSlice],
    model: Optional[GmmModel] = None,
    cfg: Optional[PipelineConfig] = None,
    classifier: Optional[Classifier] = None,
) -> SignalSignature:
    """
    Classifies every slice and collects the results as a signal signature.

    Slices too short for one MFCC frame become unrecognised events (bol None). They stay
    in ``events`` but, like stick-beats, are left out of the string view.

    Args:
        sig (AudioSignal): The recording the slices were cut from.
        slices (Sequence[NonSilentSlice]): Output of the segmenter.
        model (GmmModel): Trained classifier, used when ``classifier`` is None.
        cfg (Optional[PipelineConfig]): MFCC parameters.
        classifier (Optional[Classifier]): Replacement scoring function.

    Returns:
        SignalSignature: One event per slice, in time order.
    """
    cfg = cfg or PipelineConfig()
    return classify_slices(sig, slices, extract_slice_features(sig, slices, cfg), model, classifier)


def extract_slice_features(
    sig: AudioSignal,
    slices: Sequence[NonSilentSlice],
    cfg: Optional[PipelineConfig] = None,
) -> List[Optional[FeatureSequence]]:
    """Feature stream per slice; None for a slice shorter than one MFCC frame."""
    cfg = cfg or PipelineConfig()
    out: List[Optional[FeatureSequence]] = []
    for piece in slices:
        try:
            out.append(mfcc(piece.audio(sig), cfg, piece))
        except SliceTooShortError as e:
            logger.warning(f"Slice at {piece.start_time:.3f}s left unrecognised: {e.message}")
            out.append(None)
    return out


def classify_slices(
    sig: AudioSignal,
    slices: Sequence[NonSilentSlice],
    features: Sequence[Optional[FeatureSequence]],
    model: Optional[GmmModel] = None,
    classifier: Optional[Classifier] = None,
) -> SignalSignature:
    """Turns slices and their features into signature events, classifying each slice."""
    if classifier is None:
        if model is None:
            raise ValueError("classify_slices needs a model or a classifier")
        classifier = lambda feats, _slice: classify(model, feats)  # noqa: E731
    if len(features) != len(slices):
        raise ValueError(f"{len(features)} feature stream(s) for {len(slices)} slice(s)")

    events = []
    for piece, feats in zip(slices, features):
        audio = piece.audio(sig)
        energy = float(np.mean(np.square(audio.samples))) if len(audio.samples) else 0.0
        bol, score = (None, None) if feats is None else classifier(feats, piece)
        events.append(BolEvent(bol, piece.start_time, piece.end_time, energy, None, score))
    signature = SignalSignature(tuple(events))
    logger.info(f"Signal signature: {len(signature.events)} event(s), {len(signature)} recognised bol(s)")
    return signature


def extend_signature(entry: Union[SollukattuSignature, Sequence[int]], k: int) -> List[int]:
    """
    Repeats the pattern's bol string ceil(k / K) times and truncates it to length k.

    Example:
        >>> extend_signature([1, 2, 3], 7)
        [1, 2, 3, 1, 2, 3, 1]
    """
    codes = list(entry.bols if isinstance(entry, SollukattuSignature) else entry)
    if not codes:
        raise ValueError("cannot extend an empty signature")
    if k < 1:
        raise ValueError(f"target length must be >= 1, got {k}")
    return (codes * math.ceil(k / len(codes)))[:k]


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """
    Unit-cost insert/delete/replace edit distance between two code strings.

    Examples:
        levenshtein([], [1, 2]) == 2
        levenshtein([1, 2, 3], [1, 3]) == 1
    """
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)

    # Only the previous row of the (len(a)+1) x (len(b)+1) table is needed.
    previous = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        current = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
        previous = current
    return previous[-1]


def longest_common_substring(a: Sequence[int], b: Sequence[int]) -> LcsResult:
    """
    Longest common substring through the longest-common-suffix table.

    suffix[i][j] is the length of the longest common suffix of a[:i] and b[:j]; the
    answer is its maximum, and every cell reaching it yields one match.

    Returns:
        LcsResult: Maximal length and the (start in a, start in b) of every match, in
        row-major order. Length 0 comes with no matches.
    """
    suffix = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    best = 0
    ends: List[Tuple[int, int]] = []
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] != b[j - 1]:
                continue
            suffix[i][j] = suffix[i - 1][j - 1] + 1
            if suffix[i][j] > best:
                best = suffix[i][j]
                ends = [(i, j)]
            elif suffix[i][j] == best:
                ends.append((i, j))
    if best == 0:
        return LcsResult(0, [])
    return LcsResult(best, [(i - best, j - best) for i, j in ends])


def recognize_sollukattu(
    signature: Union[SignalSignature, Sequence[int]],
    dictionary: Sequence[SollukattuSignature],
) -> RecognitionResult:
    """
    Finds the dictionary entry closest to a signal signature.

    Every entry is extended to the length of the signature's string view and compared
    by edit distance. Entries sharing the best distance are all reported.

    Args:
        signature (Union[SignalSignature, Sequence[int]]): Signal signature or its codes.
        dictionary (Sequence[SollukattuSignature]): Candidate patterns.

    Returns:
        RecognitionResult: Best name, its distance, the full table and the tie set.

    Raises:
        RecognitionError: If the signature has no recognised bols or the dictionary is empty.
    """
    codes = signature.codes if isinstance(signature, SignalSignature) else list(signature)
    if not codes:
        raise RecognitionError("no recognized bols")
    if not dictionary:
        raise RecognitionError("empty Sollukattu dictionary")

    table = sorted(
        ((entry.name, levenshtein(codes, extend_signature(entry, len(codes)))) for entry in dictionary),
        key=lambda row: (row[1], row[0]),
    )
    best_distance = table[0][1]
    ties = tuple(name for name, distance in table if distance == best_distance)
    if len(ties) > 1:
        logger.warning(f"Sollukattu recognition tie at distance {best_distance}: {', '.join(ties)}")
    logger.info(f"Recognised '{table[0][0]}' at distance {best_distance}")
    return RecognitionResult(table[0][0], best_distance, table, ties)


def disambiguate_by_sticks(
    result: RecognitionResult,
    dictionary: Sequence[SollukattuSignature],
    detected_sticks: int,
    bars: int = 1,
) -> str:
    """
    Breaks a recognition tie using the number of stick-beats heard.

    Patterns that differ only in stick-beats share a bol string; the tied entry whose
    per-pattern stick count times ``bars`` is closest to ``detected_sticks`` wins, with
    names breaking remaining ties.
    """
    tied = [find_entry(dictionary, name) for name in result.ties] or [find_entry(dictionary, result.name)]
    best = min(tied, key=lambda entry: (abs(entry.stick_count * bars - detected_sticks), entry.name))
    return best.name


SIGNATURE_HEADER = ["event_id", "bol_label", "bol_code", "tau_s", "tau_e", "raw_energy", "score"]


def write_signature_csv(path: str, signature: SignalSignature) -> None:
    """Signal signature as CSV with full-precision floats, so a reload is exact."""
    rows = [
        [i + 1, bol_label(e.bol), bol_code(e.bol), repr(e.tau_s), repr(e.tau_e), repr(e.raw_energy),
         "" if e.score is None else repr(e.score)]
        for i, e in enumerate(signature.events)
    ]
    write_csv(path, SIGNATURE_HEADER, rows)


def read_signature_csv(path: str) -> SignalSignature:
    events = []
    for row in read_csv(path):
        events.append(
            BolEvent(
                bol=parse_bol(row["bol_label"], row["bol_code"]),
                tau_s=float(row["tau_s"]),
                tau_e=float(row["tau_e"]),
                raw_energy=float(row["raw_energy"]),
                score=float(row["score"]) if row.get("score") else None,
            )
        )
    return SignalSignature(tuple(events))


def write_distance_table_csv(path: str, result: RecognitionResult) -> None:
    write_csv(path, ["rank", "sollukattu", "distance"], [[i + 1, name, d] for i, (name, d) in enumerate(result.table)])

