"""
Command-line entry point: ``python -m src.main <command> ...``.

Each command runs one stage of the analysis (or the whole pipeline) and writes its
tables under ``--out-dir``. The exit status is 0 on success and a stage-specific code
otherwise.
"""
import argparse
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from loguru import logger

from src.audio import load_wav
from src.beatmark import evaluate, read_annotation_csv
from src.config import DEFAULT_CONFIG_PATH, DEFAULT_DICTIONARY_PATH, OUTPUT_DIR, PipelineConfig
from src.gmm import em_train, load_model, pool_frames, save_model
from src.logger import get_logger
from src.processor import (
    annotation_file_for,
    beats_file_for,
    collect_training_features,
    process_directory,
    run_pipeline,
    run_stage,
    write_segments_csv,
)
from src.segmenter import segment_by_silence
from src.signatures import (
    build_signal_signature,
    extract_slice_features,
    find_entry,
    load_dictionary,
    read_signature_csv,
    recognize_sollukattu,
    write_distance_table_csv,
    write_signature_csv,
)
from src.synth import SynthSpec, synthesize, write_synthesis
from src.tempo import comb_tempo, lcs_tempo, select_tempo, write_comb_energy_csv
from src.utils.error_handling import (
    DictionaryFormatError,
    FileSaveError,
    ModelFormatError,
    PipelineStageError,
    TempoEstimationError,
)
from src.utils.file_utils import get_wav_files
from src.utils.io_utils import save_matrices, save_output

EXIT_CODES: Dict[str, int] = {
    "load": 10,
    "segment": 11,
    "features": 12,
    "classify": 13,
    "recognize": 14,
    "tempo": 15,
    "mark-beats": 16,
    "evaluate": 17,
    "synth": 18,
    "train": 19,
    "io": 20,
}
"""
Process exit status per failing stage.

Example:
>>> EXIT_CODES["tempo"]
15
"""


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """The configuration from ``--config`` (or the default file) with ``--seed`` applied."""
    path = args.config or (DEFAULT_CONFIG_PATH if os.path.isfile(DEFAULT_CONFIG_PATH) else None)
    cfg = PipelineConfig.from_yaml(path) if path else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _out(args: argparse.Namespace, stem: str, suffix: str) -> str:
    return os.path.join(args.out_dir, f"{stem}.{suffix}")


def _require_model(args: argparse.Namespace):
    if not args.model:
        raise PipelineStageError("classify", "--model is required for this command")
    return run_stage("classify", lambda: load_model(args.model))


def _signature_for(args: argparse.Namespace, cfg: PipelineConfig):
    """The signal signature from ``--signature`` or by classifying the WAV."""
    if args.signature:
        return run_stage("classify", lambda: read_signature_csv(args.signature))
    model = _require_model(args)
    sig = run_stage("load", lambda: load_wav(args.wav))
    slices = run_stage("segment", lambda: segment_by_silence(sig, cfg=cfg))
    return run_stage("classify", lambda: build_signal_signature(sig, slices, model, cfg))


def cmd_synth(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    dictionary = load_dictionary(args.dict)
    entry = run_stage("synth", lambda: find_entry(dictionary, args.pattern))
    spec = run_stage("synth", lambda: SynthSpec(entry, args.period, bars=args.bars, jitter=args.jitter))
    sig, annotations, beats = run_stage("synth", lambda: synthesize(spec, seed=cfg.seed))
    stem = args.stem or f"{entry.name.lower().replace(' ', '_')}_{args.period:.2f}_s{cfg.seed}"
    paths = write_synthesis(args.out_dir, stem, sig, annotations, beats)
    print(f"{paths['wav']}: {len(annotations)} event(s), {sig.duration:.2f}s")
    return 0


def cmd_segment(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    sig = run_stage("load", lambda: load_wav(args.wav))
    slices = run_stage("segment", lambda: segment_by_silence(sig, cfg=cfg))
    path = _out(args, Path(args.wav).stem, "segments.csv")
    write_segments_csv(path, slices)
    print(f"{len(slices)} slice(s) -> {path}")
    return 0


def cmd_features(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    sig = run_stage("load", lambda: load_wav(args.wav))
    slices = run_stage("segment", lambda: segment_by_silence(sig, cfg=cfg))
    features = run_stage("features", lambda: extract_slice_features(sig, slices, cfg))
    matrices = {f"slice_{i + 1:04d}": f.vectors for i, f in enumerate(features) if f is not None}
    path = _out(args, Path(args.wav).stem, "features.npz")
    save_matrices(path, matrices)
    print(f"{len(matrices)} feature matrix(es) -> {path}")
    return 0


def _training_pairs(inputs: Sequence[str]) -> List[Tuple[str, str]]:
    wavs: List[str] = []
    for item in inputs:
        wavs.extend(get_wav_files(item) if os.path.isdir(item) else [item])
    pairs = [(wav, annotation_file_for(wav)) for wav in wavs]
    missing = [a for _, a in pairs if not os.path.isfile(a)]
    if missing:
        raise PipelineStageError("train", f"missing annotation file(s): {', '.join(missing)}")
    return pairs


def cmd_train(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    pairs = _training_pairs(args.inputs)
    sequences = run_stage("train", lambda: collect_training_features(pairs, cfg))
    model = run_stage("train", lambda: em_train(pool_frames(sequences), args.components, cfg.seed, cfg))
    path = args.model or os.path.join(args.out_dir, "model.json")
    save_model(model, path)
    print(f"Trained {len(model.codes)} class(es) from {len(pairs)} recording(s) -> {path}")
    return 0


def cmd_classify(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    signature = _signature_for(args, cfg)
    path = _out(args, Path(args.wav).stem, "signature.csv")
    write_signature_csv(path, signature)
    print(" ".join(e.bol.label if e.bol else "undef" for e in signature.events))
    return 0


def cmd_recognize(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    dictionary = load_dictionary(args.dict)
    signature = _signature_for(args, cfg)
    result = run_stage("recognize", lambda: recognize_sollukattu(signature, dictionary))
    write_distance_table_csv(_out(args, Path(args.wav).stem, "distances.csv"), result)
    for name, distance in result.table:
        print(f"{distance:4d}  {name}")
    print(f"Recognised: {result.name} (distance {result.distance})")
    return 0


def cmd_tempo(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    sig = run_stage("load", lambda: load_wav(args.wav))
    try:
        comb = comb_tempo(sig, cfg)
        print(f"comb: {comb.bpm} bpm, period {comb.period:.3f}s")
        write_comb_energy_csv(_out(args, Path(args.wav).stem, "comb.csv"), comb)
    except TempoEstimationError as e:
        comb = e
        print(f"comb: failed ({e.message})")
    lcs: object = TempoEstimationError("lcs", "no signature or model given")
    if args.signature or args.model:
        dictionary = load_dictionary(args.dict)
        signature = _signature_for(args, cfg)
        result = run_stage("recognize", lambda: recognize_sollukattu(signature, dictionary))
        try:
            lcs = lcs_tempo(signature, find_entry(dictionary, result.name))
            print(f"lcs: period {lcs.period:.3f}s from {len(lcs.per_gap_estimates)} gap(s)")
        except TempoEstimationError as e:
            lcs = e
            print(f"lcs: failed ({e.message})")
    selected = run_stage("tempo", lambda: select_tempo(comb, lcs, cfg))
    print(f"selected: {selected.period:.3f}s ({selected.method})")
    return 0


def cmd_mark_beats(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    dictionary = load_dictionary(args.dict)
    model = None if args.signature else _require_model(args)
    db = args.db or beats_file_for(args.wav)
    result = run_pipeline(args.wav, dictionary, model, db, cfg, args.out_dir, args.signature)
    print(f"{len(result.marked)} marked beat(s) -> {result.artifacts.get('marked')}")
    return 0


def cmd_evaluate(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    marked = run_stage("evaluate", lambda: read_annotation_csv(args.marked))
    annotated = run_stage("evaluate", lambda: read_annotation_csv(args.annotation))
    result = run_stage("evaluate", lambda: evaluate(marked, annotated))
    save_output({"config_hash": cfg.config_hash(), **result.to_dict()}, _out(args, Path(args.marked).stem, "evaluation.json"))
    print(
        f"time {result.time_match:.2f}%  bol {result.bol_match:.2f}%  event {result.event_match:.2f}%  "
        f"full {result.full_match:.2f}% ({result.full}/{result.n_annotated})"
    )
    return 0


def cmd_run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    dictionary = load_dictionary(args.dict)
    if os.path.isdir(args.input):
        model = _require_model(args)
        outcomes = process_directory(args.input, dictionary, model, cfg, args.out_dir)
        failures = [o for o in outcomes.values() if isinstance(o, PipelineStageError)]
        for path, outcome in outcomes.items():
            status = f"failed ({outcome})" if isinstance(outcome, PipelineStageError) else outcome.recognition.name
            print(f"{path}: {status}")
        return EXIT_CODES.get(failures[0].stage, 1) if failures else 0
    model = None if args.signature else _require_model(args)
    db = args.db or beats_file_for(args.input)
    result = run_pipeline(args.input, dictionary, model, db, cfg, args.out_dir, args.signature)
    print(f"{result.recognition.name}: T={result.tempo.period:.3f}s ({result.tempo.method}), {len(result.marked)} beat(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="Seed for training and synthesis")
    common.add_argument("--dict", default=DEFAULT_DICTIONARY_PATH, help="Sollukattu dictionary file")
    common.add_argument("--model", help="Bol model JSON (input, or output for train-gmm)")
    common.add_argument("--db", help="Detected 1-beat times, one per line")
    common.add_argument("--out-dir", default=OUTPUT_DIR, help="Directory for written artifacts")
    common.add_argument("--log-level", default="INFO", help="Logging level")

    parser = argparse.ArgumentParser(prog="sollukattu", description="Sollukattu audio analysis")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="Render a synthetic pattern")
    synth.add_argument("--pattern", required=True)
    synth.add_argument("--period", type=float, required=True)
    synth.add_argument("--bars", type=int, default=1)
    synth.add_argument("--jitter", type=float, default=0.0)
    synth.add_argument("--stem", help="Output file stem")
    synth.set_defaults(func=cmd_synth)

    for name, func, help_text in (
        ("segment", cmd_segment, "Write the non-silent slices of a recording"),
        ("features", cmd_features, "Write the MFCC features of every slice"),
        ("classify", cmd_classify, "Write the signal signature"),
        ("recognize", cmd_recognize, "Match the signal signature against the dictionary"),
        ("tempo", cmd_tempo, "Estimate the tempo period"),
        ("mark-beats", cmd_mark_beats, "Mark the beats of a recording"),
    ):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("wav")
        sub.add_argument("--signature", help="Saved signature CSV to continue from")
        sub.set_defaults(func=func)

    train = commands.add_parser("train-gmm", parents=[common], help="Train bol models from annotated recordings")
    train.add_argument("inputs", nargs="+", help="WAV files or directories with <stem>.annotation.csv alongside")
    train.add_argument("--components", type=int, help="Mixture components per class")
    train.set_defaults(func=cmd_train)

    evaluation = commands.add_parser("evaluate", parents=[common], help="Score marked beats against annotations")
    evaluation.add_argument("--marked", required=True)
    evaluation.add_argument("--annotation", required=True)
    evaluation.set_defaults(func=cmd_evaluate)

    run = commands.add_parser("run", parents=[common], help="Run the whole pipeline on a file or directory")
    run.add_argument("input")
    run.add_argument("--signature", help="Saved signature CSV to continue from")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parses arguments, runs the command and maps failures to exit codes.

    Returns:
        int: 0 on success, ``EXIT_CODES[stage]`` when a stage fails, ``EXIT_CODES["io"]``
        for unreadable inputs or unwritable outputs.
    """
    args = build_parser().parse_args(argv)
    get_logger(args.log_level)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except PipelineStageError as e:
        logger.error(str(e))
        return EXIT_CODES.get(e.stage, 1)
    except (FileSaveError, DictionaryFormatError, ModelFormatError, OSError, ValueError) as e:
        logger.error(str(e))
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
