"""
End-to-end orchestration: WAV in, beat-marked annotation and report out.

``run_pipeline`` executes load -> segment -> features -> classify -> recognize -> tempo
-> mark-beats for one recording and writes every intermediate table next to a JSON
report. A failing stage surfaces as a PipelineStageError naming the stage and carrying
what the earlier stages produced.
"""
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

from loguru import logger

from src.audio import AudioSignal, load_wav
from src.beatmark import (
    AnnotationRecord,
    DetectedBeats,
    MarkedBeat,
    detect_onsets,
    mark_beats,
    read_annotation_csv,
    read_detected_beats,
    write_annotation_csv,
)
from src.bols import STICK
from src.config import PipelineConfig
from src.features import FeatureSequence, mfcc
from src.gmm import GmmModel
from src.segmenter import NonSilentSlice, segment_by_silence
from src.signatures import (
    BeatType,
    RecognitionResult,
    SignalSignature,
    SollukattuSignature,
    classify_slices,
    disambiguate_by_sticks,
    extract_slice_features,
    find_entry,
    read_signature_csv,
    recognize_sollukattu,
    write_distance_table_csv,
    write_signature_csv,
)
from src.tempo import TempoEstimate, comb_tempo, lcs_tempo, select_tempo, write_comb_energy_csv
from src.utils.error_handling import PipelineStageError, SliceTooShortError, SollukattuError, handle_stage_error
from src.utils.file_utils import get_wav_files, run_concurrently
from src.utils.io_utils import save_output, write_csv

R = TypeVar("R")

STAGES = ("load", "segment", "features", "classify", "recognize", "tempo", "mark-beats")


@dataclass
class PipelineResult:
    """
    Everything one pipeline run produced.

    ``comb`` and ``lcs`` hold either an estimate or the error that estimator raised.
    """

    wav_path: str
    signature: SignalSignature
    recognition: RecognitionResult
    comb: Union[TempoEstimate, Exception]
    lcs: Union[TempoEstimate, Exception]
    tempo: TempoEstimate
    marked: List[MarkedBeat]
    db_source: str
    slices: List[NonSilentSlice] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_report(self, cfg: PipelineConfig) -> Dict[str, Any]:
        return {
            "wav": self.wav_path,
            "config_hash": cfg.config_hash(),
            "config": cfg.to_dict(),
            "n_slices": len(self.signature.events),
            "n_recognised_bols": len(self.signature),
            "recognition": {
                "name": self.recognition.name,
                "distance": self.recognition.distance,
                "ties": list(self.recognition.ties),
                "table": [{"name": name, "distance": d} for name, d in self.recognition.table],
            },
            "tempo": {
                "comb": _estimate_summary(self.comb),
                "lcs": _estimate_summary(self.lcs),
                "selected": _estimate_summary(self.tempo),
            },
            "beats": {
                "source": self.db_source,
                "n_marked": len(self.marked),
                "counts": {t: sum(1 for m in self.marked if m.event.value == t) for t in sorted({m.event.value for m in self.marked})},
            },
            "artifacts": dict(self.artifacts),
        }


def _estimate_summary(estimate: Union[TempoEstimate, Exception]) -> Dict[str, Any]:
    if isinstance(estimate, Exception):
        return {"error": str(estimate)}
    return {
        "method": estimate.method,
        "period": estimate.period,
        "bpm": estimate.bpm,
        "per_gap_estimates": list(estimate.per_gap_estimates),
        "warnings": list(estimate.warnings),
    }


def run_stage(stage: str, func: Callable[[], R], partial: Optional[Dict[str, Any]] = None) -> R:
    """
    Runs one stage, converting any library error into a stage-tagged PipelineStageError.
    """
    try:
        return func()
    except PipelineStageError:
        raise
    except (SollukattuError, ValueError, OSError, KeyError) as e:
        handle_stage_error(stage, e, partial)
        raise


def write_segments_csv(path: str, slices: Sequence[NonSilentSlice]) -> None:
    write_csv(path, ["index", "tau_s", "tau_e"], [[i + 1, f"{s.start_time:.3f}", f"{s.end_time:.3f}"] for i, s in enumerate(slices)])


def load_beats(db_path: Optional[str], sig: AudioSignal, cfg: PipelineConfig) -> Tuple[DetectedBeats, str]:
    """
    Detected 1-beats from ``db_path`` or, when it is missing, from the onset detector.

    Returns:
        Tuple[DetectedBeats, str]: The beats and "file" or "onset-detector".
    """
    if db_path and os.path.isfile(db_path):
        return read_detected_beats(db_path), "file"
    if db_path:
        logger.warning(f"Detected beats file {db_path} not found; falling back to the onset detector")
    else:
        logger.warning("No detected beats file given; falling back to the onset detector")
    return detect_onsets(sig, cfg), "onset-detector"


def run_pipeline(
    wav_path: str,
    dictionary: Sequence[SollukattuSignature],
    model: Optional[GmmModel],
    db_path: Optional[str] = None,
    cfg: Optional[PipelineConfig] = None,
    out_dir: Optional[str] = None,
    signature_path: Optional[str] = None,
) -> PipelineResult:
    """
    Annotates one recording with its Sollukattu, tempo period and marked beats.

    Args:
        wav_path (str): The recording.
        dictionary (Sequence[SollukattuSignature]): Known patterns.
        model (Optional[GmmModel]): Bol classifier; unused when ``signature_path`` is given.
        db_path (Optional[str]): Detected 1-beat times; the onset detector stands in when
            the file is absent.
        cfg (Optional[PipelineConfig]): Pipeline configuration.
        out_dir (Optional[str]): Where artifacts go; nothing is written when None.
        signature_path (Optional[str]): A saved signature CSV. Segmentation, features
            and classification are skipped and the run continues from it.

    Returns:
        PipelineResult: All stage outputs plus the paths of the written artifacts.

    Raises:
        PipelineStageError: Naming the failing stage, with earlier outputs in ``partial``.
    """
    cfg = cfg or PipelineConfig()
    stem = Path(wav_path).stem
    artifacts: Dict[str, str] = {}
    partial: Dict[str, Any] = {"wav": wav_path, "artifacts": artifacts}

    def artifact(kind: str, suffix: str) -> Optional[str]:
        if out_dir is None:
            return None
        path = os.path.join(out_dir, f"{stem}.{suffix}")
        artifacts[kind] = path
        return path

    sig = run_stage("load", lambda: load_wav(wav_path), partial)

    slices: List[NonSilentSlice] = []
    if signature_path is None:
        if model is None:
            raise PipelineStageError("classify", "no bol model given", partial)
        slices = run_stage("segment", lambda: segment_by_silence(sig, cfg=cfg), partial)
        partial["n_slices"] = len(slices)
        if out_dir is not None:
            write_segments_csv(artifact("segments", "segments.csv"), slices)
        features = run_stage("features", lambda: extract_slice_features(sig, slices, cfg), partial)
        signature = run_stage("classify", lambda: classify_slices(sig, slices, features, model), partial)
        if out_dir is not None:
            write_signature_csv(artifact("signature", "signature.csv"), signature)
    else:
        signature = run_stage("classify", lambda: read_signature_csv(signature_path), partial)
    partial["signature"] = [(e.bol.label if e.bol else None, e.tau_s, e.tau_e) for e in signature.events]

    recognition = run_stage("recognize", lambda: recognize_sollukattu(signature, dictionary), partial)
    if len(recognition.ties) > 1:
        recognition = replace(recognition, name=_break_tie(recognition, signature, dictionary))
    entry = find_entry(dictionary, recognition.name)
    partial["recognition"] = {"name": recognition.name, "distance": recognition.distance}
    if out_dir is not None:
        write_distance_table_csv(artifact("distances", "distances.csv"), recognition)

    comb, lcs = _estimate_both(sig, signature, entry, cfg)
    partial["tempo"] = {"comb": _estimate_summary(comb), "lcs": _estimate_summary(lcs)}
    tempo = run_stage("tempo", lambda: select_tempo(comb, lcs, cfg), partial)
    if out_dir is not None and isinstance(comb, TempoEstimate):
        write_comb_energy_csv(artifact("comb", "comb.csv"), comb)

    db, db_source = run_stage("mark-beats", lambda: load_beats(db_path, sig, cfg), partial)
    marked = run_stage("mark-beats", lambda: mark_beats(db, signature.events, tempo.period, cfg), partial)
    if out_dir is not None:
        write_annotation_csv(artifact("marked", "marked.csv"), marked)

    result = PipelineResult(
        wav_path=wav_path,
        signature=signature,
        recognition=recognition,
        comb=comb,
        lcs=lcs,
        tempo=tempo,
        marked=marked,
        db_source=db_source,
        slices=slices,
        artifacts=artifacts,
    )
    if out_dir is not None:
        report_path = artifact("report", "report.json")
        save_output(result.to_report(cfg), report_path)
    logger.info(f"{stem}: '{recognition.name}' at T={tempo.period:.3f}s ({tempo.method}), {len(marked)} marked beat(s)")
    return result


def _break_tie(recognition: RecognitionResult, signature: SignalSignature, dictionary: Sequence[SollukattuSignature]) -> str:
    sticks = sum(1 for e in signature.events if e.bol is not None and e.bol.is_stick)
    bars = max(1, round(len(signature) / len(find_entry(dictionary, recognition.name).bols)))
    name = disambiguate_by_sticks(recognition, dictionary, sticks, bars)
    logger.info(f"Tie between {', '.join(recognition.ties)} resolved to '{name}' by {sticks} stick-beat(s)")
    return name


def _estimate_both(
    sig: AudioSignal,
    signature: SignalSignature,
    entry: SollukattuSignature,
    cfg: PipelineConfig,
) -> Tuple[Union[TempoEstimate, Exception], Union[TempoEstimate, Exception]]:
    try:
        comb: Union[TempoEstimate, Exception] = comb_tempo(sig, cfg)
    except SollukattuError as e:
        logger.warning(f"Comb filter tempo failed: {e}")
        comb = e
    try:
        lcs: Union[TempoEstimate, Exception] = lcs_tempo(signature, entry)
    except SollukattuError as e:
        logger.warning(f"LCS tempo failed: {e}")
        lcs = e
    return comb, lcs


def beats_file_for(wav_path: str) -> str:
    """The detected-beats file expected next to a recording: ``<stem>.beats.txt``."""
    return str(Path(wav_path).with_suffix("")) + ".beats.txt"


def annotation_file_for(wav_path: str) -> str:
    return str(Path(wav_path).with_suffix("")) + ".annotation.csv"


def process_directory(
    directory: str,
    dictionary: Sequence[SollukattuSignature],
    model: GmmModel,
    cfg: Optional[PipelineConfig] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, Union[PipelineResult, PipelineStageError]]:
    """
    Runs the pipeline on every WAV file under ``directory``, a bounded pool of files at a time.

    Each recording uses the ``<stem>.beats.txt`` next to it when present. One file
    failing does not stop the others.

    Returns:
        Dict[str, Union[PipelineResult, PipelineStageError]]: Outcome per WAV path, in
        sorted path order.
    """
    cfg = cfg or PipelineConfig()
    wav_files = get_wav_files(directory)
    if not wav_files:
        logger.warning(f"No WAV files found to process in directory: {directory}")
        return {}

    def process(wav_path: str) -> Union[PipelineResult, PipelineStageError]:
        try:
            return run_pipeline(wav_path, dictionary, model, beats_file_for(wav_path), cfg, out_dir)
        except PipelineStageError as e:
            return e

    outcomes = dict(run_concurrently(process, wav_files, max_workers=cfg.max_workers))
    failed = [path for path, outcome in outcomes.items() if isinstance(outcome, PipelineStageError)]
    logger.info(f"Processed {len(wav_files)} file(s); {len(failed)} failed")
    return outcomes


def collect_training_features(
    pairs: Sequence[Tuple[str, str]],
    cfg: Optional[PipelineConfig] = None,
) -> Dict[int, List[FeatureSequence]]:
    """
    Segments annotated recordings and computes the features of every labelled slice.

    Stick-beat rows train the stick class; see ``annotated_slice_features``.

    Args:
        pairs (Sequence[Tuple[str, str]]): (WAV path, annotation CSV path) pairs.
        cfg (Optional[PipelineConfig]): MFCC parameters.

    Returns:
        Dict[int, List[FeatureSequence]]: Feature streams per bol code.
    """
    cfg = cfg or PipelineConfig()
    per_class: Dict[int, List[FeatureSequence]] = {}
    for wav_path, annotation_path in pairs:
        sig = load_wav(wav_path)
        for sequence, code in annotated_slice_features(sig, read_annotation_csv(annotation_path), cfg):
            per_class.setdefault(code, []).append(sequence)
    logger.info(f"Collected training features for {len(per_class)} class(es) from {len(pairs)} recording(s)")
    return per_class


def label_slices(
    slices: Sequence[NonSilentSlice],
    annotations: Sequence[AnnotationRecord],
) -> List[Tuple[NonSilentSlice, int]]:
    """
    Pairs every slice with the bol code of the annotated event it overlaps longest.

    Stick-beat rows label the stick class. Slices that overlap no event carrying a bol
    or a stick are left out.
    """
    labelled = []
    for piece in slices:
        best_code, best_overlap = None, 0.0
        for row in annotations:
            bol = STICK if row.event is BeatType.STICK else row.bol
            overlap = min(piece.end_time, row.tau_e) - max(piece.start_time, row.tau_s)
            if bol is not None and overlap > best_overlap:
                best_code, best_overlap = bol.code, overlap
        if best_code is not None:
            labelled.append((piece, best_code))
    return labelled


def annotated_slice_features(
    sig: AudioSignal,
    annotations: Sequence[AnnotationRecord],
    cfg: Optional[PipelineConfig] = None,
) -> List[Tuple[FeatureSequence, int]]:
    """
    Feature stream and bol code of every segmenter slice that an annotation labels.

    The recording is segmented exactly as for classification, so the training streams
    carry the same silence margins around each event as the streams being classified.
    Slices shorter than one MFCC frame are skipped.
    """
    cfg = cfg or PipelineConfig()
    slices = segment_by_silence(sig, cfg=cfg)
    out = []
    for piece, code in label_slices(slices, annotations):
        try:
            out.append((mfcc(piece.audio(sig), cfg, piece), code))
        except SliceTooShortError:
            logger.debug(f"Slice at {piece.start_time:.3f}s too short for features; skipped")
    return out
