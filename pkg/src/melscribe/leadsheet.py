"""Lead sheets: key estimation, assembly, LilyPond and MIDI emission.

A lead sheet is a score-form melody plus chord changes on the sixteenth
grid, with a key, meter, and tempo.  Emission is deterministic text or
bytes: the same sheet always renders identically.

Melody durations are emitted legato: each note sounds until the next
onset and the final note keeps its stored duration.  Notes are split at
barlines and tied; chord symbols restate instead of tying.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .align import AlignmentMap, align
from .core import (
    CHORD_TONES,
    ChordSpan,
    ChordSymbol,
    KeySignature,
    Melody,
    Meter,
    PitchClass,
    ScoreNote,
    TICKS_PER_BEAT,
)
from .errors import InputError, RangeError, ShapeError
from .labeler.labels import class_to_pitch, densify
from . import smf

# Krumhansl-Kessler tonal hierarchy profiles, C-based.
KS_MAJOR = np.array(
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
)
KS_MINOR = np.array(
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]
)

_LETTERS = ("c", "d", "e", "f", "g", "a", "b")
_LETTER_PCS = (0, 2, 4, 5, 7, 9, 11)

_CHORD_SUFFIX = {
    "maj": "",
    "min": ":m",
    "dim": ":dim",
    "aug": ":aug",
    "dom7": ":7",
    "maj7": ":maj7",
    "min7": ":m7",
    "hdim7": ":m7.5-",
}

CHORD_CHANNEL_BASE_MIDI = 48
MELODY_VELOCITY = 90
CHORD_VELOCITY = 60


def pitch_class_histogram(
    melody: Melody, chords: Sequence[ChordSpan] = ()
) -> np.ndarray:
    """Duration-weighted pitch-class counts; chords weight each tone."""
    hist = np.zeros(12)
    for note in melody:
        if isinstance(note, ScoreNote):
            weight = float(note.duration_ticks)
        else:
            weight = note.offset_s - note.onset_s
        hist[note.pitch.pitch_class] += weight
    for span in chords:
        for pc in span.chord.tone_pcs:
            hist[pc] += float(span.duration_ticks)
    return hist


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    denom = math.sqrt(float((ac * ac).sum()) * float((bc * bc).sum()))
    if denom == 0.0:
        return 0.0
    return float((ac * bc).sum()) / denom


def key_scores(hist: np.ndarray) -> dict[tuple[int, str], float]:
    """Correlation of the histogram with all 24 key profiles.

    The histogram is rotated into the candidate tonic's frame before
    correlating, so transposing the input permutes the scores exactly.
    """
    scores = {}
    for tonic in range(12):
        rel = np.roll(hist, -tonic)
        scores[(tonic, "major")] = _pearson(rel, KS_MAJOR)
        scores[(tonic, "minor")] = _pearson(rel, KS_MINOR)
    return scores


def estimate_key(melody: Melody, chords: Sequence[ChordSpan] = ()) -> KeySignature:
    """Best-correlated key; ties prefer the lower tonic, then major."""
    if len(melody) == 0 and not chords:
        raise InputError("cannot estimate a key from empty input")
    scores = key_scores(pitch_class_histogram(melody, chords))
    best: tuple[int, str] | None = None
    best_score = -math.inf
    for tonic in range(12):
        for mode in ("major", "minor"):
            s = scores[(tonic, mode)]
            if s > best_score:
                best_score = s
                best = (tonic, mode)
    assert best is not None
    return KeySignature(PitchClass(best[0]), best[1])


def key_fifths(key: KeySignature) -> int:
    """Signature as a count of sharps (positive) or flats, in -5..6."""
    rel = key.tonic.pc if key.mode == "major" else (key.tonic.pc + 3) % 12
    fifths = (7 * rel) % 12
    return fifths - 12 if fifths > 6 else fifths


@dataclass(frozen=True)
class LeadSheet:
    key: KeySignature
    meter: Meter
    tempo_bpm: float
    melody: Melody
    chords: tuple[tuple[int, ChordSymbol], ...]
    total_ticks: int
    pickup_ticks: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.tempo_bpm) or self.tempo_bpm <= 0:
            raise RangeError(f"tempo {self.tempo_bpm} must be positive and finite")
        if self.melody.is_score is False:
            raise InputError("lead sheet melody must be in score (tick) form")
        if self.total_ticks < 1:
            raise RangeError(f"total_ticks {self.total_ticks} below 1")
        if not 0 <= self.pickup_ticks < self.meter.ticks_per_bar:
            raise RangeError(
                f"pickup of {self.pickup_ticks} ticks must be shorter than a bar"
            )
        for note in self.melody:
            if note.end_ticks > self.total_ticks:
                raise RangeError(
                    f"note ending at tick {note.end_ticks} exceeds "
                    f"total_ticks {self.total_ticks}"
                )
        object.__setattr__(self, "chords", tuple(self.chords))
        prev = -1
        for tick, chord in self.chords:
            if not isinstance(tick, int) or isinstance(tick, bool):
                raise InputError(f"chord onset {tick!r} must be an integer tick")
            if not isinstance(chord, ChordSymbol):
                raise InputError(f"chord entry {chord!r} is not a ChordSymbol")
            if not 0 <= tick < self.total_ticks:
                raise RangeError(f"chord onset {tick} outside 0..{self.total_ticks - 1}")
            if tick <= prev:
                raise RangeError(f"chord onsets not strictly increasing at tick {tick}")
            prev = tick

    def chord_spans(self) -> list[ChordSpan]:
        spans = []
        for i, (tick, chord) in enumerate(self.chords):
            end = self.chords[i + 1][0] if i + 1 < len(self.chords) else self.total_ticks
            spans.append(ChordSpan(tick, end - tick, chord))
        return spans


def beat_position(amap: AlignmentMap, t: float) -> float:
    """Fractional beat position of a time inside the aligned span."""
    times = amap.beat_to_time_s
    if not times[0] <= t <= times[-1]:
        raise RangeError(
            f"time {t} outside the aligned span {times[0]}..{times[-1]}"
        )
    i = min(bisect_right(times, t) - 1, amap.num_beats - 1)
    return i + (t - times[i]) / (times[i + 1] - times[i])


def assemble(
    melody: Melody,
    chords: Sequence[tuple[int, ChordSymbol]],
    amap: AlignmentMap,
    meter: Meter,
    key: KeySignature | None = None,
) -> LeadSheet:
    """Quantize a transcription onto the alignment's sixteenth grid.

    Performance-form melodies are snapped to the nearest sixteenth with
    the usual collision rules; notes outside the aligned span are
    dropped with a warning.  Score-form melodies pass through.  When no
    key is given, one is estimated from the assembled content.
    """
    total = amap.num_beats * TICKS_PER_BEAT
    span = align(amap, amap.num_beats) - align(amap, 0)
    tempo_bpm = 60.0 * amap.num_beats / span

    if melody.is_score is False:
        pairs = []
        dropped = 0
        for note in melody:
            try:
                beat = beat_position(amap, note.onset_s)
            except RangeError:
                dropped += 1
                continue
            if beat >= amap.num_beats:
                dropped += 1
                continue
            pairs.append((beat, note.pitch))
        if dropped:
            warnings.warn(
                f"dropped {dropped} notes outside the aligned span", stacklevel=2
            )
        events = densify(pairs, amap.num_beats).onset_events()
        notes = []
        for i, (tick, cls) in enumerate(events):
            end = events[i + 1][0] if i + 1 < len(events) else total
            notes.append(ScoreNote(tick, end - tick, class_to_pitch(cls)))
        score_melody = Melody(tuple(notes))
    else:
        for note in melody:
            if note.end_ticks > total:
                raise RangeError(
                    f"note ending at tick {note.end_ticks} exceeds the "
                    f"{amap.num_beats}-beat alignment"
                )
        score_melody = melody

    chord_list = tuple((int(t), c) for t, c in chords)
    if key is None:
        spans = []
        for i, (tick, chord) in enumerate(chord_list):
            end = chord_list[i + 1][0] if i + 1 < len(chord_list) else total
            spans.append(ChordSpan(tick, end - tick, chord))
        key = estimate_key(score_melody, spans)
    return LeadSheet(
        key=key,
        meter=meter,
        tempo_bpm=tempo_bpm,
        melody=score_melody,
        chords=chord_list,
        total_ticks=total,
    )


def _scale_spellings(key: KeySignature) -> dict[int, tuple[int, int]]:
    fifths = key_fifths(key)
    major_letter = (4 * fifths) % 7
    letter = major_letter if key.mode == "major" else (major_letter + 5) % 7
    out: dict[int, tuple[int, int]] = {}
    for k, pc in enumerate(key.scale_pcs):
        li = (letter + k) % 7
        alter = (pc - _LETTER_PCS[li]) % 12
        out[pc] = (li, alter - 12 if alter > 6 else alter)
    return out


def _spell_pc(pc: int, spellings: dict, fifths: int) -> tuple[int, int]:
    if pc in spellings:
        return spellings[pc]
    if pc in _LETTER_PCS:
        return _LETTER_PCS.index(pc), 0
    if fifths >= 0:
        return _LETTER_PCS.index((pc - 1) % 12), 1
    return _LETTER_PCS.index((pc + 1) % 12), -1


def _pc_name(pc: int, spellings: dict, fifths: int) -> str:
    li, alter = _spell_pc(pc, spellings, fifths)
    return _LETTERS[li] + ("is" * alter if alter > 0 else "es" * -alter)


def _note_name(midi: int, spellings: dict, fifths: int) -> str:
    li, alter = _spell_pc(midi % 12, spellings, fifths)
    name = _LETTERS[li] + ("is" * alter if alter > 0 else "es" * -alter)
    octave = (midi - alter) // 12 - 1
    return name + ("'" * (octave - 3) if octave >= 3 else "," * (3 - octave))


def _duration_candidates(unit: int) -> list[tuple[int, str]]:
    whole = 4 * unit
    cands = set()
    n = 1
    while n <= 64:
        if whole % n == 0:
            v = whole // n
            cands.add((v, str(n)))
            if v % 2 == 0:
                cands.add((v * 3 // 2, str(n) + "."))
        n *= 2
    return sorted(cands, key=lambda p: (-p[0], len(p[1])))


def _decompose(ticks: int, cands: list[tuple[int, str]]) -> list[str]:
    tokens = []
    rem = ticks
    while rem > 0:
        for value, token in cands:
            if value <= rem:
                tokens.append(token)
                rem -= value
                break
    return tokens


def _bar_chunks(start: int, length: int, bar_len: int, pickup: int):
    """Split [start, start+length) at barlines (first barline at pickup)."""
    end = start + length
    t = start
    while t < end:
        if pickup and t < pickup:
            boundary = pickup
        else:
            boundary = pickup + ((t - pickup) // bar_len + 1) * bar_len
        nxt = min(end, boundary)
        yield t, nxt - t
        t = nxt


def _effective_notes(sheet: LeadSheet) -> list[tuple[int, int, int]]:
    """(onset, duration, midi) with legato durations, last note as stored."""
    notes = list(sheet.melody)
    out = []
    for i, note in enumerate(notes):
        if i + 1 < len(notes):
            dur = notes[i + 1].onset_ticks - note.onset_ticks
        else:
            dur = note.duration_ticks
        out.append((note.onset_ticks, dur, note.pitch.midi))
    return out


def emit_lilypond(sheet: LeadSheet) -> str:
    """Deterministic LilyPond source for the sheet."""
    fifths = key_fifths(sheet.key)
    spellings = _scale_spellings(sheet.key)
    cands = _duration_candidates(sheet.meter.beat_unit)
    bar_len = sheet.meter.ticks_per_bar
    pickup = sheet.pickup_ticks

    def atoms_for(start: int, length: int, render) -> list[tuple[int, str]]:
        pieces: list[tuple[int, str]] = []
        for c_start, c_len in _bar_chunks(start, length, bar_len, pickup):
            for token in _decompose(c_len, cands):
                pieces.append((c_start, token))
        return [(t, render(tok)) for t, tok in pieces]

    def with_ties(atoms: list[tuple[int, str]]) -> list[tuple[int, str]]:
        return [
            (t, text + "~" if i + 1 < len(atoms) else text)
            for i, (t, text) in enumerate(atoms)
        ]

    melody_atoms: list[tuple[int, str]] = []
    cursor = 0
    for onset, dur, midi in _effective_notes(sheet):
        if onset > cursor:
            melody_atoms += atoms_for(cursor, onset - cursor, lambda tok: "r" + tok)
        name = _note_name(midi, spellings, fifths)
        melody_atoms += with_ties(atoms_for(onset, dur, lambda tok: name + tok))
        cursor = onset + dur
    if cursor < sheet.total_ticks:
        melody_atoms += atoms_for(
            cursor, sheet.total_ticks - cursor, lambda tok: "r" + tok
        )

    def flow(atoms: list[tuple[int, str]]) -> list[str]:
        tokens = []
        for t, text in atoms:
            if t > 0 and (t - pickup) % bar_len == 0 and tokens:
                tokens.append("|")
            tokens.append(text)
        return tokens

    lines = ['\\version "2.24.2"', "\\score {", "  <<"]
    if sheet.chords:
        chord_atoms: list[tuple[int, str]] = []
        cursor = 0
        for span in sheet.chord_spans():
            if span.onset_ticks > cursor:
                chord_atoms += atoms_for(
                    cursor, span.onset_ticks - cursor, lambda tok: "r" + tok
                )
            root = _pc_name(span.chord.root.pc, spellings, fifths)
            suffix = _CHORD_SUFFIX[span.chord.quality]
            chord_atoms += atoms_for(
                span.onset_ticks,
                span.duration_ticks,
                lambda tok, r=root, s=suffix: r + tok + s,
            )
            cursor = span.end_ticks
        lines.append("    \\new ChordNames \\chordmode {")
        lines.append("      \\set chordChanges = ##t")
        lines.append("      " + " ".join(flow(chord_atoms)))
        lines.append("    }")
    tonic_name = _pc_name(sheet.key.tonic.pc, spellings, fifths)
    lines.append("    \\new Staff {")
    lines.append(f"      \\key {tonic_name} \\{sheet.key.mode}")
    lines.append(f"      \\time {sheet.meter.beats_per_bar}/{sheet.meter.beat_unit}")
    lines.append(f"      \\tempo {sheet.meter.beat_unit} = {round(sheet.tempo_bpm)}")
    if pickup:
        lines.append("      \\partial 16*" + str(pickup))
    if melody_atoms:
        lines.append("      " + " ".join(flow(melody_atoms)))
    lines.append("    }")
    lines += ["  >>", "  \\layout { }", "}"]
    return "\n".join(lines) + "\n"


def emit_midi(sheet: LeadSheet, amap: AlignmentMap | None = None) -> bytes:
    """Format-0 MIDI bytes; an alignment supplies the per-beat tempo map."""
    scale = smf.MIDI_TICKS_PER_SIXTEENTH
    messages = [
        smf.time_signature_message(0, sheet.meter.beats_per_bar, sheet.meter.beat_unit),
        smf.key_signature_message(0, key_fifths(sheet.key), sheet.key.mode == "minor"),
    ]
    if amap is None:
        messages.append(smf.tempo_message(0, 60.0 / sheet.tempo_bpm))
    else:
        if amap.num_beats * TICKS_PER_BEAT != sheet.total_ticks:
            raise ShapeError(
                f"alignment covers {amap.num_beats} beats, sheet has "
                f"{sheet.total_ticks} ticks"
            )
        times = amap.beat_to_time_s
        for b in range(amap.num_beats):
            messages.append(
                smf.tempo_message(b * TICKS_PER_BEAT * scale, times[b + 1] - times[b])
            )
    for onset, dur, midi in _effective_notes(sheet):
        messages += smf.note_messages(
            onset * scale, (onset + dur) * scale, 0, midi, MELODY_VELOCITY
        )
    for span in sheet.chord_spans():
        for interval in CHORD_TONES[span.chord.quality]:
            messages += smf.note_messages(
                span.onset_ticks * scale,
                span.end_ticks * scale,
                1,
                CHORD_CHANNEL_BASE_MIDI + span.chord.root.pc + interval,
                CHORD_VELOCITY,
            )
    return smf.single_track_file(messages, sheet.total_ticks * scale)
