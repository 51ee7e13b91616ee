"""Command-line pipeline: dataset prep, features, training, transcription.

Results go to stdout as one JSON object per invocation; progress and
warnings go to stderr.  Exit codes: 0 on success, 1 for domain errors
(bad data, failed parses), 2 for usage errors and missing input files.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import htparse
from .align import AlignmentMap, BeatGrid, refine_alignment
from .core import ChordSymbol, KeySignature, Meter, PitchClass, MODES
from .errors import FormatError, InputError, MelscribeError
from .evaluate import load_transcript, note_f1, octave_invariant_f1, save_transcript
from .features import (
    beatwise_resample,
    load_features,
    load_resampled,
    load_wav,
    logmel,
    save_features,
    save_resampled,
)
from .labeler import (
    DESK_CONFIG,
    FULL_CONFIG,
    LabelerConfig,
    TrainExample,
    TrainSettings,
    decode,
    decode_chords,
    densify_chords,
    densify_melody,
    forward_windowed,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .leadsheet import assemble, emit_lilypond, emit_midi


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _info(text: str) -> None:
    print(text, file=sys.stderr)


def _parse_meter(text: str) -> Meter:
    try:
        beats, unit = text.split("/")
        return Meter(int(beats), int(unit))
    except ValueError as exc:
        raise InputError(f"meter {text!r} must look like 4/4") from exc


def _parse_key(text: str) -> KeySignature | None:
    if text == "auto":
        return None
    try:
        tonic, mode = text.split(":")
        tonic_pc = int(tonic)
    except ValueError as exc:
        raise InputError(
            f"key {text!r} must be 'auto' or '<tonic-pc>:<mode>' like 0:major"
        ) from exc
    if mode not in MODES:
        raise InputError(f"mode {mode!r} not one of {MODES}")
    return KeySignature(PitchClass(tonic_pc), mode)


def _load_chord_changes(path) -> list[tuple[int, ChordSymbol]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or set(obj) != {"changes"}:
        raise FormatError(f'{path}: expected an object with exactly "changes"')
    changes = []
    for i, entry in enumerate(obj["changes"]):
        if not isinstance(entry, dict) or set(entry) != {"tick", "root", "quality"}:
            raise FormatError(f"{path}: change {i} needs tick, root, quality")
        changes.append(
            (int(entry["tick"]), ChordSymbol(PitchClass(entry["root"]), entry["quality"]))
        )
    return changes


def _save_chord_changes(path, changes: list[tuple[int, ChordSymbol]]) -> None:
    obj = {
        "changes": [
            {"tick": t, "root": c.root.pc, "quality": c.quality} for t, c in changes
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_dataset_convert(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.json")))
        elif p.exists():
            paths.append(p)
        else:
            raise FileNotFoundError(item)
    artists: dict[str, str] = {}
    converted = 0
    rejected = 0
    for path in paths:
        doc = path.read_text(encoding="utf-8")
        try:
            segment = htparse.parse_segment(doc)
        except htparse.ParseError as exc:
            _info(f"skipped {path.name}: {exc}")
            rejected += 1
            continue
        _, artist = htparse.parse_functional(doc)
        if artist is not None:
            artists[segment.id] = artist
        htparse.save_segment(out_dir / f"{segment.id}.segment.json", segment)
        converted += 1
    with open(out_dir / "artists.json", "w", encoding="utf-8") as fh:
        json.dump(artists, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"converted": converted, "rejected": rejected, "out": str(out_dir)})
    return 0 if converted or not rejected else 1


def cmd_dataset_split(args) -> int:
    seg_paths = sorted(Path(args.dir).glob("*.segment.json"))
    if not seg_paths:
        raise FileNotFoundError(f"no *.segment.json files under {args.dir}")
    with open(args.artists, "r", encoding="utf-8") as fh:
        artists = json.load(fh)
    segments = [htparse.load_segment(p) for p in seg_paths]
    try:
        assignment = htparse.stratified_split([s.id for s in segments], artists, args.seed)
    except KeyError as exc:
        _info(f"error: no artist recorded for segment {exc}")
        return 1
    for path, segment in zip(seg_paths, segments):
        htparse.save_segment(path, htparse.with_split(segment, assignment[segment.id]))
    counts = Counter(assignment.values())
    _emit({split: counts.get(split, 0) for split in ("train", "valid", "test")})
    return 0


def cmd_align_refine(args) -> int:
    with open(args.grid, "r", encoding="utf-8") as fh:
        try:
            grid_obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.grid}: invalid JSON: {exc}") from exc
    grid = BeatGrid.from_json_dict(grid_obj)
    amap = refine_alignment(grid, args.start, args.beats)
    amap.save(args.out)
    _emit(
        {
            "beats": amap.num_beats,
            "start_s": float(amap.beat_to_time_s[0]),
            "end_s": float(amap.beat_to_time_s[-1]),
            "out": str(args.out),
        }
    )
    return 0


def _mel_one(job: tuple[str, str]) -> tuple[str, int]:
    audio_path, out_path = job
    samples, rate = load_wav(audio_path)
    feats = logmel(samples, rate)
    save_features(out_path, feats)
    return out_path, feats.n_frames


def cmd_features_mel(args) -> int:
    for path in args.audio:
        if not Path(path).exists():
            raise FileNotFoundError(path)
    if args.out is not None:
        if len(args.audio) != 1:
            raise InputError("--out takes exactly one input; use --out-dir for batches")
        jobs = [(args.audio[0], args.out)]
    else:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(p, str(out_dir / (Path(p).stem + ".ssft"))) for p in args.audio]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_mel_one, jobs))
    else:
        results = [_mel_one(job) for job in jobs]
    _emit({"files": [{"out": out, "frames": n} for out, n in results]})
    return 0


def cmd_features_resample(args) -> int:
    feats = load_features(args.features)
    amap = AlignmentMap.load(args.alignment)
    resampled = beatwise_resample(feats, amap)
    save_resampled(args.out, resampled)
    _emit({"ticks": resampled.num_ticks, "dim": resampled.dim, "out": str(args.out)})
    return 0


def _labeler_config(name: str, vocab: str, seed: int) -> LabelerConfig:
    base = {"desk": DESK_CONFIG, "full": FULL_CONFIG}[name]
    return LabelerConfig.from_dict({**base.to_dict(), "vocab": vocab, "seed": seed})


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    seg_paths = sorted(data_dir.glob("*.segment.json"))
    if not seg_paths:
        raise FileNotFoundError(f"no *.segment.json files under {data_dir}")
    cfg = _labeler_config(args.config, args.vocab, args.seed)
    examples = []
    for seg_path in seg_paths:
        segment = htparse.load_segment(seg_path)
        if segment.split is None:
            raise InputError(f"{segment.id}: segment has no split; run dataset split")
        stem = data_dir / segment.id
        amap = AlignmentMap.load(f"{stem}.alignment.json")
        resampled = load_resampled(f"{stem}.features.ssft")
        if args.vocab == "melody":
            labels = densify_melody(segment.melody, amap.num_beats)
        else:
            labels = densify_chords(segment.chords, amap.num_beats)
        examples.append(
            TrainExample(segment.id, resampled.frames, labels, amap, segment.split)
        )
    settings = TrainSettings(
        batch_size=args.batch_size,
        lr=args.lr,
        max_steps=args.steps,
        eval_every=args.eval_every,
        patience=args.patience,
        seed=args.seed,
    )
    result = train(cfg, examples, settings, log=_info)
    save_checkpoint(args.out, cfg, result.params, result.tau, result.best_step)
    _emit(
        {
            "best_step": result.best_step,
            "steps_run": result.steps_run,
            "tau": result.tau,
            "valid_f1": result.valid_f1,
            "out": str(args.out),
        }
    )
    return 0


def cmd_transcribe(args) -> int:
    cfg, params, tau, _step = load_checkpoint(args.checkpoint)
    amap = AlignmentMap.load(args.alignment)
    try:
        resampled = load_resampled(args.features)
    except FormatError:
        resampled = beatwise_resample(load_features(args.features), amap)
    if args.tau is not None:
        tau = args.tau
    logits = forward_windowed(cfg, params, resampled.frames)
    if cfg.vocab == "melody":
        melody = decode(logits, tau, amap)
        save_transcript(args.out, melody)
        _emit({"notes": len(melody), "tau": tau, "out": str(args.out)})
    else:
        changes = decode_chords(logits, tau)
        _save_chord_changes(args.out, changes)
        _emit({"chords": len(changes), "tau": tau, "out": str(args.out)})
    return 0


def cmd_evaluate(args) -> int:
    estimate = load_transcript(args.estimate)
    reference = load_transcript(args.reference)
    if args.octave_invariant:
        report = octave_invariant_f1(estimate, reference, args.tolerance)
    else:
        report = note_f1(estimate, reference, args.tolerance)
    _emit(report.to_json_dict())
    return 0


def cmd_leadsheet(args) -> int:
    melody = load_transcript(args.transcript)
    amap = AlignmentMap.load(args.alignment)
    chords = _load_chord_changes(args.chords) if args.chords else []
    sheet = assemble(
        melody, chords, amap, _parse_meter(args.meter), _parse_key(args.key)
    )
    outputs = {}
    if args.lilypond:
        Path(args.lilypond).write_text(emit_lilypond(sheet), encoding="utf-8")
        outputs["lilypond"] = str(args.lilypond)
    if args.midi:
        Path(args.midi).write_bytes(emit_midi(sheet, amap))
        outputs["midi"] = str(args.midi)
    _emit(
        {
            "key": {"tonic": sheet.key.tonic.pc, "mode": sheet.key.mode},
            "tempo_bpm": sheet.tempo_bpm,
            "notes": len(sheet.melody),
            "chords": len(sheet.chords),
            **outputs,
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melscribe",
        description="Beat-synchronous melody transcription to lead sheets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    dataset = sub.add_parser("dataset", help="convert and split annotation data")
    dataset_sub = dataset.add_subparsers(dest="subcommand", required=True)
    convert = dataset_sub.add_parser(
        "convert", help="functional JSON to absolute segment files"
    )
    convert.add_argument("inputs", nargs="+", help="functional JSON files or directories")
    convert.add_argument("--out", required=True, help="output directory")
    convert.set_defaults(func=cmd_dataset_convert)
    split = dataset_sub.add_parser("split", help="assign artist-stratified splits")
    split.add_argument("--dir", required=True, help="directory of *.segment.json")
    split.add_argument("--artists", required=True, help="artists.json from convert")
    split.add_argument("--seed", type=int, default=0)
    split.set_defaults(func=cmd_dataset_split)

    align_cmd = sub.add_parser("align", help="beat alignment")
    align_sub = align_cmd.add_subparsers(dest="subcommand", required=True)
    refine = align_sub.add_parser("refine", help="anchor a segment on a beat grid")
    refine.add_argument("--grid", required=True, help="beat grid JSON")
    refine.add_argument("--start", type=float, required=True, help="rough start (s)")
    refine.add_argument("--beats", type=int, required=True, help="beats in the segment")
    refine.add_argument("--out", required=True, help="alignment JSON to write")
    refine.set_defaults(func=cmd_align_refine)

    feats = sub.add_parser("features", help="acoustic features")
    feats_sub = feats.add_subparsers(dest="subcommand", required=True)
    mel = feats_sub.add_parser("mel", help="log-mel spectrogram to SSFT")
    mel.add_argument("audio", nargs="+", help="input WAV files")
    mel.add_argument("--out", help="output SSFT path (single input)")
    mel.add_argument("--out-dir", help="output directory (batch)")
    mel.add_argument("--jobs", type=int, default=1, help="parallel workers")
    mel.set_defaults(func=cmd_features_mel)
    resample = feats_sub.add_parser("resample", help="pool frames per sixteenth")
    resample.add_argument("--features", required=True, help="fixed-rate SSFT input")
    resample.add_argument("--alignment", required=True, help="alignment JSON")
    resample.add_argument("--out", required=True, help="tick-indexed SSFT output")
    resample.set_defaults(func=cmd_features_resample)

    train_cmd = sub.add_parser("train", help="train an onset labeler")
    train_cmd.add_argument("--data", required=True,
                           help="directory of segment/alignment/features triples")
    train_cmd.add_argument("--out", required=True, help="checkpoint path")
    train_cmd.add_argument("--config", choices=("desk", "full"), default="desk")
    train_cmd.add_argument("--vocab", choices=("melody", "chords"), default="melody")
    train_cmd.add_argument("--steps", type=int, default=15000)
    train_cmd.add_argument("--lr", type=float, default=1e-4)
    train_cmd.add_argument("--batch-size", type=int, default=8)
    train_cmd.add_argument("--eval-every", type=int, default=250)
    train_cmd.add_argument("--patience", type=int, default=10)
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.set_defaults(func=cmd_train)

    transcribe = sub.add_parser("transcribe", help="run a checkpoint on features")
    transcribe.add_argument("--checkpoint", required=True)
    transcribe.add_argument("--features", required=True,
                            help="SSFT features, fixed-rate or tick-indexed")
    transcribe.add_argument("--alignment", required=True, help="alignment JSON")
    transcribe.add_argument("--tau", type=float, help="override the stored threshold")
    transcribe.add_argument("--out", required=True, help="transcript JSON to write")
    transcribe.set_defaults(func=cmd_transcribe)

    evaluate = sub.add_parser("evaluate", help="score a transcript against a reference")
    evaluate.add_argument("--estimate", required=True, help="transcript JSON")
    evaluate.add_argument("--reference", required=True, help="transcript JSON")
    evaluate.add_argument("--octave-invariant", action="store_true")
    evaluate.add_argument("--tolerance", type=float, default=0.05,
                          help="onset tolerance in seconds")
    evaluate.set_defaults(func=cmd_evaluate)

    sheet = sub.add_parser("leadsheet", help="assemble and emit a lead sheet")
    sheet.add_argument("--transcript", required=True, help="transcript JSON")
    sheet.add_argument("--alignment", required=True, help="alignment JSON")
    sheet.add_argument("--chords", help="chord changes JSON")
    sheet.add_argument("--meter", default="4/4")
    sheet.add_argument("--key", default="auto",
                       help="'auto' or '<tonic-pc>:<mode>' like 0:major")
    sheet.add_argument("--lilypond", help="LilyPond output path")
    sheet.add_argument("--midi", help="MIDI output path")
    sheet.set_defaults(func=cmd_leadsheet)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MelscribeError as exc:
        _info(f"error: {exc}")
        return 1
    except FileNotFoundError as exc:
        _info(f"error: missing input: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
