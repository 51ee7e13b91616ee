"""Shared domain types for beat-synchronous melody transcription.

Design notes:

- Every type is a frozen dataclass and every operation returns new
  values; nothing here mutates in place.
- Invariants are enforced at construction time, so a value that exists
  is a valid value.
- Symbolic time is measured in ticks: sixteenth notes of the notated
  beat, four per beat, regardless of meter.  Compound meters are not
  given a special tick rule; ingestion flags them instead.
- Performance time is seconds from the start of the source recording.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import InputError, OrderingError, RangeError

MIDI_MIN = 21
MIDI_MAX = 108
PITCH_VOCAB_SIZE = MIDI_MAX - MIDI_MIN + 1
TICKS_PER_BEAT = 4

MODES = ("major", "minor")

CHORD_QUALITIES = ("maj", "min", "dim", "aug", "dom7", "maj7", "min7", "hdim7")

#: Semitone offsets of each chord quality's tones above the root.
CHORD_TONES = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "dim": (0, 3, 6),
    "aug": (0, 4, 8),
    "dom7": (0, 4, 7, 10),
    "maj7": (0, 4, 7, 11),
    "min7": (0, 3, 7, 10),
    "hdim7": (0, 3, 6, 10),
}

#: Semitone offset of each scale degree (1..7) above the tonic.
SCALE_OFFSETS = {
    "major": (0, 2, 4, 5, 7, 9, 11),
    "minor": (0, 2, 3, 5, 7, 8, 10),
}


@dataclass(frozen=True)
class Pitch:
    """Equal-tempered piano pitch, A0 (21) through C8 (108)."""

    midi: int

    def __post_init__(self) -> None:
        if not isinstance(self.midi, int):
            raise RangeError(f"pitch must be an integer MIDI number, got {self.midi!r}")
        if not MIDI_MIN <= self.midi <= MIDI_MAX:
            raise RangeError(
                f"pitch {self.midi} outside playable range {MIDI_MIN}..{MIDI_MAX}"
            )

    @property
    def pitch_class(self) -> int:
        return self.midi % 12

    @property
    def frequency_hz(self) -> float:
        return 440.0 * 2.0 ** ((self.midi - 69) / 12)


@dataclass(frozen=True)
class PitchClass:
    """Pitch class 0..11, C = 0."""

    pc: int

    def __post_init__(self) -> None:
        if not isinstance(self.pc, int) or not 0 <= self.pc <= 11:
            raise RangeError(f"pitch class {self.pc!r} outside 0..11")


@dataclass(frozen=True)
class ScoreNote:
    """A note in symbolic (tick) time."""

    onset_ticks: int
    duration_ticks: int
    pitch: Pitch

    def __post_init__(self) -> None:
        if self.onset_ticks < 0:
            raise RangeError(f"note onset {self.onset_ticks} is negative")
        if self.duration_ticks < 1:
            raise RangeError(f"note duration {self.duration_ticks} is below one tick")

    @property
    def end_ticks(self) -> int:
        return self.onset_ticks + self.duration_ticks


@dataclass(frozen=True)
class PerfNote:
    """A note in performance (seconds) time."""

    onset_s: float
    offset_s: float
    pitch: Pitch

    def __post_init__(self) -> None:
        if not math.isfinite(self.onset_s) or not math.isfinite(self.offset_s):
            raise RangeError("note times must be finite")
        if self.offset_s <= self.onset_s:
            raise OrderingError(
                f"note offset {self.offset_s} not after onset {self.onset_s}"
            )


@dataclass(frozen=True)
class Melody:
    """A monophonic note sequence, either all ScoreNote or all PerfNote.

    Score form additionally forbids overlap: each note must end no later
    than the next begins.  Perf form requires strictly increasing onsets.
    """

    notes: tuple

    def __post_init__(self) -> None:
        notes = tuple(self.notes)
        object.__setattr__(self, "notes", notes)
        if not notes:
            return
        kinds = {type(n) for n in notes}
        if kinds == {ScoreNote}:
            for i in range(len(notes) - 1):
                if notes[i].onset_ticks >= notes[i + 1].onset_ticks:
                    raise OrderingError(
                        f"melody onsets not strictly increasing at note {i + 1}"
                    )
                if notes[i].end_ticks > notes[i + 1].onset_ticks:
                    raise OrderingError(
                        f"note {i} (ends tick {notes[i].end_ticks}) overlaps "
                        f"note {i + 1} (onset tick {notes[i + 1].onset_ticks})"
                    )
        elif kinds == {PerfNote}:
            for i in range(len(notes) - 1):
                if notes[i].onset_s >= notes[i + 1].onset_s:
                    raise OrderingError(
                        f"melody onsets not strictly increasing at note {i + 1}"
                    )
        else:
            raise InputError("melody must be homogeneously score or perf notes")

    def __len__(self) -> int:
        return len(self.notes)

    def __iter__(self) -> Iterator:
        return iter(self.notes)

    @property
    def is_score(self) -> bool | None:
        """True for score form, False for perf form, None when empty."""
        if not self.notes:
            return None
        return isinstance(self.notes[0], ScoreNote)

    @property
    def pitches(self) -> tuple[Pitch, ...]:
        return tuple(n.pitch for n in self.notes)


@dataclass(frozen=True)
class ChordSymbol:
    """A root pitch class plus one of eight qualities."""

    root: PitchClass
    quality: str

    def __post_init__(self) -> None:
        if self.quality not in CHORD_QUALITIES:
            raise InputError(
                f"chord quality {self.quality!r} not one of {CHORD_QUALITIES}"
            )

    @property
    def tone_pcs(self) -> tuple[int, ...]:
        return tuple((self.root.pc + t) % 12 for t in CHORD_TONES[self.quality])


@dataclass(frozen=True)
class ChordSpan:
    """A chord with its symbolic onset and duration."""

    onset_ticks: int
    duration_ticks: int
    chord: ChordSymbol

    def __post_init__(self) -> None:
        if self.onset_ticks < 0:
            raise RangeError(f"chord onset {self.onset_ticks} is negative")
        if self.duration_ticks < 1:
            raise RangeError(f"chord duration {self.duration_ticks} is below one tick")

    @property
    def end_ticks(self) -> int:
        return self.onset_ticks + self.duration_ticks


@dataclass(frozen=True)
class KeySignature:
    tonic: PitchClass
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"mode {self.mode!r} not one of {MODES}")

    @property
    def scale_pcs(self) -> tuple[int, ...]:
        return tuple((self.tonic.pc + o) % 12 for o in SCALE_OFFSETS[self.mode])


@dataclass(frozen=True)
class Meter:
    beats_per_bar: int
    beat_unit: int

    def __post_init__(self) -> None:
        if self.beats_per_bar < 1:
            raise RangeError(f"beats_per_bar {self.beats_per_bar} below 1")
        if self.beat_unit not in (1, 2, 4, 8, 16):
            raise RangeError(f"beat_unit {self.beat_unit} not a power of two up to 16")
        if self.beats_per_bar % 3 == 0 and self.beats_per_bar > 3:
            warnings.warn(
                f"meter {self.beats_per_bar}/{self.beat_unit} looks compound; "
                "ticks remain sixteenths of the notated beat",
                stacklevel=2,
            )

    @property
    def ticks_per_bar(self) -> int:
        return self.beats_per_bar * TICKS_PER_BEAT


@dataclass(frozen=True)
class Segment:
    """An annotated slice of a recording, in tick time.

    ``split`` is None until a dataset split assigns one of
    "train" / "valid" / "test".  The beat count is derived from the
    annotation content: the smallest whole-beat span covering every
    melody and chord tick.
    """

    id: str
    audio_ref: str
    split: str | None
    user_start_s: float
    user_end_s: float
    meter: Meter
    key: KeySignature
    melody: Melody
    chords: tuple[ChordSpan, ...]

    def __post_init__(self) -> None:
        if self.split not in (None, "train", "valid", "test"):
            raise InputError(f"split {self.split!r} invalid")
        if not (math.isfinite(self.user_start_s) and math.isfinite(self.user_end_s)):
            raise RangeError("segment boundaries must be finite")
        if self.user_end_s <= self.user_start_s:
            raise OrderingError(
                f"segment end {self.user_end_s} not after start {self.user_start_s}"
            )
        if self.melody.is_score is False:
            raise InputError("segment melody must be in score (tick) form")
        object.__setattr__(self, "chords", tuple(self.chords))
        for i in range(len(self.chords) - 1):
            if self.chords[i].onset_ticks >= self.chords[i + 1].onset_ticks:
                raise OrderingError(f"chord onsets not strictly increasing at {i + 1}")

    @property
    def num_beats(self) -> int:
        last = 0
        for note in self.melody:
            last = max(last, note.end_ticks)
        for span in self.chords:
            last = max(last, span.end_ticks)
        return max(1, -(-last // TICKS_PER_BEAT))

    @property
    def num_ticks(self) -> int:
        return self.num_beats * TICKS_PER_BEAT


def octave_shift(melody: Melody, sigma: int) -> Melody:
    """Shift every pitch by ``sigma`` octaves, leaving times untouched.

    Raises RangeError naming the first note the shift would push outside
    the pitch range.
    """
    shifted = []
    for i, note in enumerate(melody):
        midi = note.pitch.midi + 12 * sigma
        if not MIDI_MIN <= midi <= MIDI_MAX:
            raise RangeError(
                f"octave shift {sigma:+d} moves note {i} "
                f"(midi {note.pitch.midi}) to {midi}, outside "
                f"{MIDI_MIN}..{MIDI_MAX}"
            )
        if isinstance(note, ScoreNote):
            shifted.append(
                ScoreNote(note.onset_ticks, note.duration_ticks, Pitch(midi))
            )
        else:
            shifted.append(PerfNote(note.onset_s, note.offset_s, Pitch(midi)))
    return Melody(tuple(shifted))


def legato_offsets(
    onsets: Sequence[tuple[float, Pitch]], segment_end_s: float
) -> list[PerfNote]:
    """Turn (onset, pitch) detections into notes via the legato rule.

    Each note sounds until the next onset; the final note sounds until
    ``segment_end_s``.  Onsets must be strictly increasing and end
    before ``segment_end_s``.
    """
    notes = []
    for i, (onset, pitch) in enumerate(onsets):
        if i + 1 < len(onsets):
            offset = onsets[i + 1][0]
            if offset <= onset:
                raise OrderingError(
                    f"onsets not strictly increasing at index {i + 1}"
                )
        else:
            offset = segment_end_s
            if offset <= onset:
                raise OrderingError(
                    f"final onset {onset} is not before segment end {segment_end_s}"
                )
        notes.append(PerfNote(float(onset), float(offset), pitch))
    return notes


def canonical_octave_shift(midis: Sequence[int]) -> int:
    """Whole-octave shift placing the mean MIDI pitch closest to 60.

    Ties between two equally close octaves break toward the lower one.
    Exact (Fraction) arithmetic keeps the tie-break deterministic.
    """
    if not midis:
        return 0
    mean = Fraction(sum(midis), len(midis))
    # ceil((60 - mean)/12 - 1/2), exactly.
    return math.ceil((Fraction(60) - mean) / 12 - Fraction(1, 2))
