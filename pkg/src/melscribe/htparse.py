"""Functional (scale-degree) annotation parsing and dataset plumbing.

Input is the functional interchange format, one JSON document per
segment::

    {
      "id": "...",                     # unique segment id
      "artist": "...",                 # used for stratified splitting
      "audio_ref": "...",              # opaque pointer to the recording
      "start_s": 12.3, "end_s": 45.6,  # rough segment bounds, seconds
      "meter": {"beats_per_bar": 4, "beat_unit": 4},
      "key": {"tonic_pc": 0, "mode": "major"},
      "key_changes": [],               # optional; non-empty -> rejected
      "meter_changes": [],             # optional; non-empty -> rejected
      "melody": [
        {"scale_degree": 1, "accidental": 0, "rel_octave": 0,
         "onset_beats": {"num": 0, "den": 1},
         "duration_beats": {"num": 1, "den": 1}},
        ...
      ],
      "chords": [
        {"degree": 5, "accidental": 0, "kind": "triad",   # or "seventh"
         "borrowed_mode": null,                           # or "major"/"minor"
         "onset_beats": {...}, "duration_beats": {...}},
        ...
      ]
    }

Onset denominators must divide 4 (sixteenth-note resolution).  Chord
constructs beyond the above (inversions, suspensions, applied chords)
are parsed and rejected explicitly.  Minor keys use the natural minor
scale throughout.

Parsed segments convert to the absolute on-disk format: the same JSON
shape with melody entries {onset_ticks, duration_ticks, midi} and chord
entries {onset_ticks, duration_ticks, root_pc, quality}.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import (
    MIDI_MAX,
    MIDI_MIN,
    MODES,
    SCALE_OFFSETS,
    TICKS_PER_BEAT,
    ChordSpan,
    ChordSymbol,
    KeySignature,
    Melody,
    Meter,
    Pitch,
    PitchClass,
    ScoreNote,
    Segment,
    canonical_octave_shift,
)
from .errors import ParseError, RangeError

SPLITS = ("train", "valid", "test")
SPLIT_RATIOS = (8, 1, 1)

#: Diatonic triad quality per scale degree (1..7).
TRIAD_QUALITY = {
    "major": ("maj", "min", "min", "maj", "maj", "min", "dim"),
    "minor": ("min", "dim", "maj", "min", "min", "maj", "maj"),
}

#: Diatonic seventh-chord quality per scale degree (1..7).
SEVENTH_QUALITY = {
    "major": ("maj7", "min7", "min7", "maj7", "dom7", "min7", "hdim7"),
    "minor": ("min7", "hdim7", "maj7", "min7", "min7", "maj7", "dom7"),
}

_CHORD_REJECT_FIELDS = ("inversion", "suspension", "secondary_degree", "pedal")


@dataclass(frozen=True)
class FunctionalNote:
    """A melody note relative to the key: degree, accidental, octave."""

    scale_degree: int
    accidental: int
    rel_octave: int
    onset_beats: Fraction
    duration_beats: Fraction


@dataclass(frozen=True)
class FunctionalChord:
    """A Roman-numeral chord: degree, accidental, kind, optional borrow."""

    degree: int
    accidental: int
    kind: str
    borrowed_mode: str | None
    onset_beats: Fraction
    duration_beats: Fraction


def degree_to_pitch_midi(
    key: KeySignature, degree: int, accidental: int, rel_octave: int
) -> int:
    """Raw MIDI for a scale degree, before melody-level canonicalization.

    midi = 60 + tonic + offset(mode, degree) + accidental + 12 * rel_octave
    """
    if not 1 <= degree <= 7:
        raise RangeError(f"scale degree {degree} outside 1..7")
    if abs(accidental) > 2:
        raise RangeError(f"accidental {accidental} outside -2..2")
    offset = SCALE_OFFSETS[key.mode][degree - 1]
    return 60 + key.tonic.pc + offset + accidental + 12 * rel_octave


def degree_to_pitch(
    key: KeySignature, degree: int, accidental: int, rel_octave: int
) -> Pitch:
    """Single-note absolute pitch (canonicalization is a melody-level step)."""
    midi = degree_to_pitch_midi(key, degree, accidental, rel_octave)
    if not MIDI_MIN <= midi <= MIDI_MAX:
        raise RangeError(
            f"degree {degree} (accidental {accidental:+d}, octave "
            f"{rel_octave:+d}) in this key maps to midi {midi}, outside "
            f"{MIDI_MIN}..{MIDI_MAX}"
        )
    return Pitch(midi)


def roman_to_chord(
    key: KeySignature,
    degree: int,
    accidental: int = 0,
    kind: str = "triad",
    borrowed_mode: str | None = None,
) -> ChordSymbol:
    """Resolve a Roman-numeral chord to an absolute symbol.

    The root takes the degree's offset in the effective mode plus the
    accidental; the quality comes from the effective mode's diatonic
    table for that degree (the accidental moves the root only).
    """
    if not 1 <= degree <= 7:
        raise RangeError(f"chord degree {degree} outside 1..7")
    if kind not in ("triad", "seventh"):
        raise RangeError(f"chord kind {kind!r} not 'triad' or 'seventh'")
    mode = borrowed_mode if borrowed_mode is not None else key.mode
    if mode not in MODES:
        raise RangeError(f"borrowed mode {mode!r} not one of {MODES}")
    root = (key.tonic.pc + SCALE_OFFSETS[mode][degree - 1] + accidental) % 12
    table = TRIAD_QUALITY if kind == "triad" else SEVENTH_QUALITY
    return ChordSymbol(PitchClass(root), table[mode][degree - 1])


def _expect(obj, key: str, kind, path: str):
    if not isinstance(obj, dict):
        raise ParseError(f"expected an object, got {type(obj).__name__}", path)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", path)
    value = obj[key]
    if kind is int:
        # bool is an int subclass; reject it explicitly.
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"field {key!r} must be an integer", f"{path}.{key}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"field {key!r} must be a number", f"{path}.{key}")
        value = float(value)
    elif not isinstance(value, kind):
        raise ParseError(
            f"field {key!r} must be {kind.__name__}", f"{path}.{key}"
        )
    return value


def _parse_fraction(obj, path: str) -> Fraction:
    num = _expect(obj, "num", int, path)
    den = _expect(obj, "den", int, path)
    extra = set(obj) - {"num", "den"}
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", path)
    if den < 1:
        raise ParseError(f"denominator {den} must be positive", path)
    if TICKS_PER_BEAT % den:
        raise ParseError(
            f"denominator {den} does not divide {TICKS_PER_BEAT} "
            "(finer than sixteenth-note resolution)",
            path,
        )
    return Fraction(num, den)


def _to_ticks(beats: Fraction) -> int:
    ticks = beats * TICKS_PER_BEAT
    assert ticks.denominator == 1
    return int(ticks)


def parse_functional(doc: bytes | str) -> tuple[dict, str | None]:
    """Decode and validate one functional JSON document.

    Returns (validated object graph, artist or None).  All structural
    errors raise ParseError with a JSON path.
    """
    try:
        obj = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", "$") from exc
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object", "$")
    allowed = {
        "id", "artist", "audio_ref", "start_s", "end_s", "meter", "key",
        "key_changes", "meter_changes", "melody", "chords",
    }
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", "$")
    return obj, obj.get("artist")


def parse_segment(doc: bytes | str) -> Segment:
    """Parse a functional JSON document into an absolute Segment.

    Melody degrees become MIDI pitches, then the whole melody is shifted
    by whole octaves so its mean pitch sits closest to 60 (ties toward
    the lower octave).  Key or meter changes reject the segment with a
    counted warning.
    """
    obj, _ = parse_functional(doc)

    seg_id = _expect(obj, "id", str, "$")
    audio_ref = _expect(obj, "audio_ref", str, "$")
    start_s = _expect(obj, "start_s", float, "$")
    end_s = _expect(obj, "end_s", float, "$")

    for field in ("key_changes", "meter_changes"):
        changes = obj.get(field, [])
        if not isinstance(changes, list):
            raise ParseError(f"{field} must be a list", f"$.{field}")
        if changes:
            warnings.warn(f"segment {seg_id!r} rejected: {field} present")
            raise ParseError(
                f"segments with {field.replace('_', ' ')} are not supported",
                f"$.{field}",
            )

    meter_obj = _expect(obj, "meter", dict, "$")
    extra = set(meter_obj) - {"beats_per_bar", "beat_unit"}
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", "$.meter")
    try:
        meter = Meter(
            _expect(meter_obj, "beats_per_bar", int, "$.meter"),
            _expect(meter_obj, "beat_unit", int, "$.meter"),
        )
    except RangeError as exc:
        raise ParseError(str(exc), "$.meter") from exc

    key_obj = _expect(obj, "key", dict, "$")
    extra = set(key_obj) - {"tonic_pc", "mode"}
    if extra:
        raise ParseError(f"unknown fields {sorted(extra)}", "$.key")
    tonic_pc = _expect(key_obj, "tonic_pc", int, "$.key")
    mode = _expect(key_obj, "mode", str, "$.key")
    if not 0 <= tonic_pc <= 11:
        raise ParseError(f"tonic_pc {tonic_pc} outside 0..11", "$.key.tonic_pc")
    if mode not in MODES:
        raise ParseError(f"mode {mode!r} not one of {MODES}", "$.key.mode")
    key = KeySignature(PitchClass(tonic_pc), mode)

    melody_list = _expect(obj, "melody", list, "$")
    raw_notes: list[tuple[int, int, int]] = []
    for i, entry in enumerate(melody_list):
        path = f"$.melody[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("melody entry must be an object", path)
        extra = set(entry) - {
            "scale_degree", "accidental", "rel_octave", "onset_beats",
            "duration_beats",
        }
        if extra:
            raise ParseError(f"unknown fields {sorted(extra)}", path)
        degree = _expect(entry, "scale_degree", int, path)
        accidental = _expect(entry, "accidental", int, path)
        rel_octave = _expect(entry, "rel_octave", int, path)
        onset = _parse_fraction(
            _expect(entry, "onset_beats", dict, path), f"{path}.onset_beats"
        )
        duration = _parse_fraction(
            _expect(entry, "duration_beats", dict, path), f"{path}.duration_beats"
        )
        if onset < 0:
            raise ParseError(f"onset {onset} is negative", f"{path}.onset_beats")
        if duration <= 0:
            raise ParseError(
                f"duration {duration} not positive", f"{path}.duration_beats"
            )
        try:
            midi = degree_to_pitch_midi(key, degree, accidental, rel_octave)
        except RangeError as exc:
            raise ParseError(str(exc), path) from exc
        raw_notes.append((_to_ticks(onset), _to_ticks(duration), midi))

    shift = canonical_octave_shift([m for _, _, m in raw_notes])
    notes = []
    for i, (onset_ticks, duration_ticks, midi) in enumerate(raw_notes):
        midi += 12 * shift
        if not MIDI_MIN <= midi <= MIDI_MAX:
            raise ParseError(
                f"canonicalized pitch {midi} outside {MIDI_MIN}..{MIDI_MAX}",
                f"$.melody[{i}]",
            )
        notes.append(ScoreNote(onset_ticks, duration_ticks, Pitch(midi)))
    try:
        melody = Melody(tuple(notes))
    except Exception as exc:
        raise ParseError(f"melody is not monophonic: {exc}", "$.melody") from exc

    chords_list = _expect(obj, "chords", list, "$")
    spans = []
    for i, entry in enumerate(chords_list):
        path = f"$.chords[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("chord entry must be an object", path)
        for rejected in _CHORD_REJECT_FIELDS:
            if entry.get(rejected) not in (None, 0):
                raise ParseError(
                    f"chord construct {rejected!r} is not supported",
                    f"{path}.{rejected}",
                )
        extra = set(entry) - {
            "degree", "accidental", "kind", "borrowed_mode", "onset_beats",
            "duration_beats", *_CHORD_REJECT_FIELDS,
        }
        if extra:
            raise ParseError(f"unknown fields {sorted(extra)}", path)
        degree = _expect(entry, "degree", int, path)
        accidental = _expect(entry, "accidental", int, path)
        kind = _expect(entry, "kind", str, path)
        borrowed = entry.get("borrowed_mode")
        if borrowed is not None and borrowed not in MODES:
            raise ParseError(
                f"borrowed_mode {borrowed!r} not one of {MODES}",
                f"{path}.borrowed_mode",
            )
        onset = _parse_fraction(
            _expect(entry, "onset_beats", dict, path), f"{path}.onset_beats"
        )
        duration = _parse_fraction(
            _expect(entry, "duration_beats", dict, path), f"{path}.duration_beats"
        )
        if onset < 0:
            raise ParseError(f"onset {onset} is negative", f"{path}.onset_beats")
        if duration <= 0:
            raise ParseError(
                f"duration {duration} not positive", f"{path}.duration_beats"
            )
        try:
            chord = roman_to_chord(key, degree, accidental, kind, borrowed)
        except RangeError as exc:
            raise ParseError(str(exc), path) from exc
        spans.append(ChordSpan(_to_ticks(onset), _to_ticks(duration), chord))

    try:
        return Segment(
            id=seg_id,
            audio_ref=audio_ref,
            split=None,
            user_start_s=start_s,
            user_end_s=end_s,
            meter=meter,
            key=key,
            melody=melody,
            chords=tuple(spans),
        )
    except ParseError:
        raise
    except Exception as exc:
        raise ParseError(str(exc), "$") from exc


def segment_to_json_dict(segment: Segment) -> dict:
    """The absolute interchange form of a segment."""
    return {
        "id": segment.id,
        "audio_ref": segment.audio_ref,
        "split": segment.split,
        "user_start_s": segment.user_start_s,
        "user_end_s": segment.user_end_s,
        "meter": {
            "beats_per_bar": segment.meter.beats_per_bar,
            "beat_unit": segment.meter.beat_unit,
        },
        "key": {"tonic_pc": segment.key.tonic.pc, "mode": segment.key.mode},
        "melody": [
            {
                "onset_ticks": n.onset_ticks,
                "duration_ticks": n.duration_ticks,
                "midi": n.pitch.midi,
            }
            for n in segment.melody
        ],
        "chords": [
            {
                "onset_ticks": c.onset_ticks,
                "duration_ticks": c.duration_ticks,
                "root_pc": c.chord.root.pc,
                "quality": c.chord.quality,
            }
            for c in segment.chords
        ],
    }


def segment_from_json_dict(obj: dict) -> Segment:
    """Load a segment from its absolute interchange form."""
    required = {
        "id", "audio_ref", "split", "user_start_s", "user_end_s", "meter",
        "key", "melody", "chords",
    }
    if not isinstance(obj, dict) or set(obj) != required:
        raise ParseError(
            f"absolute segment must have exactly fields {sorted(required)}", "$"
        )
    split = obj["split"]
    if split is not None and split not in SPLITS:
        raise ParseError(f"split {split!r} invalid", "$.split")
    try:
        meter = Meter(obj["meter"]["beats_per_bar"], obj["meter"]["beat_unit"])
        key = KeySignature(PitchClass(obj["key"]["tonic_pc"]), obj["key"]["mode"])
        melody = Melody(
            tuple(
                ScoreNote(e["onset_ticks"], e["duration_ticks"], Pitch(e["midi"]))
                for e in obj["melody"]
            )
        )
        chords = tuple(
            ChordSpan(
                e["onset_ticks"],
                e["duration_ticks"],
                ChordSymbol(PitchClass(e["root_pc"]), e["quality"]),
            )
            for e in obj["chords"]
        )
        return Segment(
            id=obj["id"],
            audio_ref=obj["audio_ref"],
            split=split,
            user_start_s=float(obj["user_start_s"]),
            user_end_s=float(obj["user_end_s"]),
            meter=meter,
            key=key,
            melody=melody,
            chords=chords,
        )
    except ParseError:
        raise
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed absolute segment: {exc!r}", "$") from exc
    except Exception as exc:
        raise ParseError(str(exc), "$") from exc


def save_segment(path, segment: Segment) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(segment_to_json_dict(segment), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_segment(path) -> Segment:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", "$") from exc
    return segment_from_json_dict(obj)


def with_split(segment: Segment, split: str) -> Segment:
    if split not in SPLITS:
        raise ParseError(f"split {split!r} invalid", "$.split")
    return Segment(
        id=segment.id,
        audio_ref=segment.audio_ref,
        split=split,
        user_start_s=segment.user_start_s,
        user_end_s=segment.user_end_s,
        meter=segment.meter,
        key=segment.key,
        melody=segment.melody,
        chords=segment.chords,
    )


def stratified_split(
    segment_ids: Sequence[str],
    artist_of: Mapping[str, str] | Callable[[str], str],
    seed: int,
    ratios: tuple[int, int, int] = SPLIT_RATIOS,
) -> dict[str, str]:
    """Assign segments to train/valid/test, never splitting an artist.

    Artists are ordered largest-first (the seed shuffles equal-sized
    artists) and each goes to the currently most underfull split,
    measured against the 8:1:1 targets.  Raises KeyError for a segment
    with no artist mapping.
    """
    lookup = artist_of if callable(artist_of) else artist_of.__getitem__
    by_artist: dict[str, list[str]] = {}
    for seg_id in segment_ids:
        artist = lookup(seg_id)
        by_artist.setdefault(artist, []).append(seg_id)

    artists = sorted(by_artist)
    rng = np.random.default_rng(seed)
    rng.shuffle(artists)
    artists.sort(key=lambda a: -len(by_artist[a]))  # stable: ties keep shuffle order

    totals = {s: 0 for s in SPLITS}
    assignment: dict[str, str] = {}
    for artist in artists:
        # Most underfull split relative to its target share; ties take
        # the earlier split in (train, valid, test) order.
        split = min(SPLITS, key=lambda s: (totals[s] / ratios[SPLITS.index(s)]))
        for seg_id in by_artist[artist]:
            assignment[seg_id] = split
        totals[split] += len(by_artist[artist])
    return assignment
