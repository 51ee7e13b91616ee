"""Dense per-sixteenth label sequences.

Class 0 always means "no onset here".  The melody vocabulary maps the
88 piano pitches to classes 1..88 (midi - 20); the chord vocabulary
maps (root, quality) to classes 1..96.  Only the melody vocabulary is
octave-shiftable: shifting a melody label by one octave moves its class
index by 12.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import (
    CHORD_QUALITIES,
    MIDI_MIN,
    PITCH_VOCAB_SIZE,
    TICKS_PER_BEAT,
    ChordSpan,
    ChordSymbol,
    Melody,
    Pitch,
    PitchClass,
)
from ..errors import InputError, RangeError


@dataclass(frozen=True)
class LabelVocab:
    name: str
    n_classes: int
    octave_shiftable: bool


MELODY_VOCAB = LabelVocab("melody", 1 + PITCH_VOCAB_SIZE, True)
CHORD_VOCAB = LabelVocab("chords", 1 + 12 * len(CHORD_QUALITIES), False)

_VOCABS = {v.name: v for v in (MELODY_VOCAB, CHORD_VOCAB)}


def vocab_by_name(name: str) -> LabelVocab:
    if name not in _VOCABS:
        raise InputError(f"unknown vocabulary {name!r}")
    return _VOCABS[name]


def pitch_to_class(pitch: Pitch) -> int:
    return pitch.midi - (MIDI_MIN - 1)


def class_to_pitch(index: int) -> Pitch:
    if not 1 <= index <= PITCH_VOCAB_SIZE:
        raise RangeError(f"melody class {index} outside 1..{PITCH_VOCAB_SIZE}")
    return Pitch(index + (MIDI_MIN - 1))


def chord_to_class(chord: ChordSymbol) -> int:
    return 1 + chord.root.pc * len(CHORD_QUALITIES) + CHORD_QUALITIES.index(chord.quality)


def class_to_chord(index: int) -> ChordSymbol:
    if not 1 <= index < CHORD_VOCAB.n_classes:
        raise RangeError(f"chord class {index} outside 1..{CHORD_VOCAB.n_classes - 1}")
    root, quality = divmod(index - 1, len(CHORD_QUALITIES))
    return ChordSymbol(PitchClass(root), CHORD_QUALITIES[quality])


@dataclass(frozen=True, eq=False)
class DenseLabelSequence:
    """One class index per sixteenth note; length is a multiple of 4."""

    classes: np.ndarray
    vocab: LabelVocab = MELODY_VOCAB

    def __post_init__(self) -> None:
        classes = np.asarray(self.classes, dtype=np.int64)
        object.__setattr__(self, "classes", classes)
        if classes.ndim != 1 or len(classes) == 0 or len(classes) % TICKS_PER_BEAT:
            raise InputError(
                f"label length {classes.shape} must be a positive multiple of "
                f"{TICKS_PER_BEAT}"
            )
        if classes.min() < 0 or classes.max() >= self.vocab.n_classes:
            raise RangeError(
                f"label classes outside 0..{self.vocab.n_classes - 1}"
            )

    @property
    def num_ticks(self) -> int:
        return len(self.classes)

    @property
    def num_beats(self) -> int:
        return len(self.classes) // TICKS_PER_BEAT

    def onset_events(self) -> list[tuple[int, int]]:
        """(tick, class) pairs for every onset tick."""
        ticks = np.flatnonzero(self.classes)
        return [(int(t), int(self.classes[t])) for t in ticks]


def densify(
    onsets: Sequence[tuple[float, Pitch]], num_beats: int
) -> DenseLabelSequence:
    """Quantize (onset_beats, pitch) pairs onto the sixteenth grid.

    Ticks are round(4 * onset) with exact halves rounded down.  Onsets
    must lie in [0, num_beats); a rounding result of 4B clamps to the
    final tick.  When two notes land on one tick, the one whose onset is
    nearer the tick center wins (ties keep the earlier note) and each
    dropped note counts toward a single summary warning.
    """
    if num_beats < 1:
        raise InputError(f"num_beats {num_beats} below 1")
    n_ticks = num_beats * TICKS_PER_BEAT
    classes = np.zeros(n_ticks, dtype=np.int64)
    distance = np.full(n_ticks, np.inf)
    collisions = 0
    for onset, pitch in onsets:
        b = float(onset)
        if not (0 <= b < num_beats) or not math.isfinite(b):
            raise RangeError(
                f"onset {onset} outside [0, {num_beats}) beats"
            )
        tick = math.ceil(b * TICKS_PER_BEAT - 0.5)
        if tick >= n_ticks:  # rounding can reach 4B at the very edge
            tick = n_ticks - 1
        d = abs(b * TICKS_PER_BEAT - tick)
        if classes[tick] == 0:
            classes[tick] = pitch_to_class(pitch)
            distance[tick] = d
        else:
            collisions += 1
            if d < distance[tick]:
                classes[tick] = pitch_to_class(pitch)
                distance[tick] = d
    if collisions:
        warnings.warn(
            f"{collisions} note(s) lost to sixteenth-note collisions", stacklevel=2
        )
    return DenseLabelSequence(classes, MELODY_VOCAB)


def densify_melody(melody: Melody, num_beats: int) -> DenseLabelSequence:
    """Dense labels for a score-form melody already on the tick grid."""
    if melody.is_score is False:
        raise InputError("densify_melody expects a score-form melody")
    return densify(
        [(n.onset_ticks / TICKS_PER_BEAT, n.pitch) for n in melody], num_beats
    )


def densify_chords(chords: Sequence[ChordSpan], num_beats: int) -> DenseLabelSequence:
    """Dense chord labels from chord spans (already tick-aligned)."""
    if num_beats < 1:
        raise InputError(f"num_beats {num_beats} below 1")
    n_ticks = num_beats * TICKS_PER_BEAT
    classes = np.zeros(n_ticks, dtype=np.int64)
    for span in chords:
        if span.onset_ticks >= n_ticks:
            raise RangeError(
                f"chord onset tick {span.onset_ticks} outside 0..{n_ticks - 1}"
            )
        classes[span.onset_ticks] = chord_to_class(span.chord)
    return DenseLabelSequence(classes, CHORD_VOCAB)


def one_hot_logits(labels: DenseLabelSequence, scale: float = 40.0) -> np.ndarray:
    """Logits that decode back to exactly these labels at any sane threshold."""
    out = np.zeros((labels.num_ticks, labels.vocab.n_classes), dtype=np.float32)
    out[np.arange(labels.num_ticks), labels.classes] = scale
    return out
