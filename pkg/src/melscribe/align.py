"""Beat-grid refinement and beat-to-time interpolation.

A detected beat grid (times plus downbeat flags, typically from an
external beat tracker) is refined against a segment's rough start time
into an alignment map: times for beats 0..B, with entry B extrapolated
so the final beat has a duration.  Fractional beat positions interpolate
linearly between entries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    FormatError,
    InputError,
    InsufficientBeatsError,
    OrderingError,
    RangeError,
)


@dataclass(frozen=True, eq=False)
class BeatGrid:
    """Detected beat times (seconds) with downbeat flags."""

    beat_times_s: np.ndarray
    downbeat_flags: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.beat_times_s, dtype=np.float64)
        flags = np.asarray(self.downbeat_flags, dtype=bool)
        object.__setattr__(self, "beat_times_s", times)
        object.__setattr__(self, "downbeat_flags", flags)
        if times.ndim != 1 or flags.shape != times.shape:
            raise InputError("beat times and downbeat flags must be 1-D and equal length")
        if len(times) == 0:
            raise InputError("beat grid is empty")
        if not np.all(np.isfinite(times)):
            raise InputError("beat times must be finite")
        if np.any(np.diff(times) <= 0):
            raise OrderingError("beat times must be strictly increasing")
        if not flags.any():
            raise InputError("beat grid has no downbeats")

    def to_json_dict(self) -> dict:
        return {
            "beats_s": [float(t) for t in self.beat_times_s],
            "downbeats": [int(i) for i in np.flatnonzero(self.downbeat_flags)],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "BeatGrid":
        if not isinstance(obj, dict) or set(obj) != {"beats_s", "downbeats"}:
            raise FormatError('beat grid JSON must have exactly "beats_s" and "downbeats"')
        times = np.asarray(obj["beats_s"], dtype=np.float64)
        flags = np.zeros(len(times), dtype=bool)
        for i in obj["downbeats"]:
            if not isinstance(i, int) or not 0 <= i < len(times):
                raise FormatError(f"downbeat index {i!r} outside the beat list")
            flags[i] = True
        return cls(times, flags)


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    """Times (seconds) for whole beats 0..B of a segment."""

    beat_to_time_s: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.beat_to_time_s, dtype=np.float64)
        object.__setattr__(self, "beat_to_time_s", times)
        if times.ndim != 1 or len(times) < 2:
            raise InputError("alignment map needs entries for at least beats 0 and 1")
        if not np.all(np.isfinite(times)):
            raise InputError("alignment times must be finite")
        if np.any(np.diff(times) <= 0):
            raise OrderingError("alignment times must be strictly increasing")

    @property
    def num_beats(self) -> int:
        return len(self.beat_to_time_s) - 1

    def to_json_dict(self) -> dict:
        return {"beat_to_time_s": [float(t) for t in self.beat_to_time_s]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "AlignmentMap":
        if not isinstance(obj, dict) or set(obj) != {"beat_to_time_s"}:
            raise FormatError('alignment JSON must have exactly "beat_to_time_s"')
        return cls(np.asarray(obj["beat_to_time_s"], dtype=np.float64))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AlignmentMap":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"alignment JSON malformed: {exc}") from exc
        return cls.from_json_dict(obj)


def refine_alignment(grid: BeatGrid, user_start_s: float, num_beats: int) -> AlignmentMap:
    """Anchor a segment of ``num_beats`` beats onto a detected grid.

    Beat 0 is the detected downbeat nearest ``user_start_s`` (ties break
    toward the earlier downbeat); beats 1..B-1 are the following
    detected beats; entry B extends the map by the last inter-beat
    interval so the final beat has a duration.
    """
    if num_beats < 1:
        raise InputError(f"num_beats {num_beats} below 1")
    times = grid.beat_times_s
    down_idx = np.flatnonzero(grid.downbeat_flags)
    dist = np.abs(times[down_idx] - float(user_start_s))
    start = int(down_idx[int(np.argmin(dist))])

    remaining = len(times) - start - 1
    if remaining < num_beats - 1:
        raise InsufficientBeatsError(
            f"need {num_beats - 1} beats after the downbeat at "
            f"{times[start]:.3f}s, grid has {remaining}",
            available=remaining,
        )
    mapped = times[start : start + num_beats].astype(np.float64).copy()
    if num_beats >= 2:
        tail = mapped[-1] + (mapped[-1] - mapped[-2])
    elif remaining >= 1:
        tail = times[start + 1]
    else:
        raise InsufficientBeatsError(
            "a one-beat segment needs one detected beat after its downbeat "
            "to bound the beat's duration",
            available=0,
        )
    return AlignmentMap(np.concatenate([mapped, [tail]]))


def align(amap: AlignmentMap, beat_position: float | Fraction) -> float:
    """Time of a (possibly fractional) beat position in [0, B]."""
    b = float(beat_position)
    if not math.isfinite(b) or b < 0 or b > amap.num_beats:
        raise RangeError(
            f"beat position {beat_position} outside [0, {amap.num_beats}]"
        )
    times = amap.beat_to_time_s
    i = int(b)
    if i == amap.num_beats:
        return float(times[i])
    frac = b - i
    return float(times[i] + frac * (times[i + 1] - times[i]))


def constant_tempo_grid(
    bpm: float, first_downbeat_s: float, count: int, beats_per_bar: int = 4
) -> BeatGrid:
    """A synthetic grid of ``count`` beats at fixed tempo, downbeats every bar."""
    if bpm <= 0 or not math.isfinite(bpm):
        raise InputError(f"bpm {bpm} must be positive and finite")
    if count < 1:
        raise InputError(f"count {count} below 1")
    if beats_per_bar < 1:
        raise InputError(f"beats_per_bar {beats_per_bar} below 1")
    period = 60.0 / float(bpm)
    times = first_downbeat_s + period * np.arange(count, dtype=np.float64)
    flags = np.arange(count) % beats_per_bar == 0
    return BeatGrid(times, flags)
