"""Pitch, interval, chord and key arithmetic in twelve-tone equal temperament.

Everything downstream works with key-relative semitone offsets. Minor keys are
resolved to their relative major before any offset is computed, so a minor
key never gets its own degree table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "PitchClass",
    "Note",
    "Mode",
    "Key",
    "Quality",
    "Chord",
    "DIATONIC_OFFSETS",
    "degree_offset",
    "is_diatonic",
    "diatonic_degree",
    "interval_semitones",
    "chord_spelling",
]

_LETTERS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_SHARP_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
_PITCH_RE = re.compile(r"^([A-G])([#b]?)$")
_NOTE_RE = re.compile(r"^([A-G][#b]?)(\d+)$")

MIN_OCTAVE = 0
MAX_OCTAVE = 9

DIATONIC_OFFSETS = (0, 2, 4, 5, 7, 9, 11)
_DEGREE_OF_OFFSET = {off: i + 1 for i, off in enumerate(DIATONIC_OFFSETS)}


@dataclass(frozen=True, order=True)
class PitchClass:
    """One of the twelve pitch classes, ``index`` semitones above C."""

    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or not 0 <= self.index <= 11:
            raise ValueError(f"pitch class index must be in 0..11, got {self.index!r}")

    @classmethod
    def parse(cls, token: str) -> PitchClass:
        m = _PITCH_RE.match(token)
        if m is None:
            raise ValueError(f"unknown pitch token {token!r}")
        letter, accidental = m.groups()
        shift = {"": 0, "#": 1, "b": -1}[accidental]
        return cls((_LETTERS[letter] + shift) % 12)

    @property
    def name(self) -> str:
        return _SHARP_NAMES[self.index]

    def transpose(self, semitones: int) -> PitchClass:
        return PitchClass((self.index + semitones) % 12)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Note:
    """A pitch in scientific notation (C4 is middle C)."""

    pitch: PitchClass
    octave: int

    def __post_init__(self):
        if not MIN_OCTAVE <= self.octave <= MAX_OCTAVE:
            raise ValueError(
                f"octave {self.octave} outside supported range {MIN_OCTAVE}..{MAX_OCTAVE}"
            )

    @classmethod
    def parse(cls, token: str) -> Note:
        m = _NOTE_RE.match(token)
        if m is None:
            raise ValueError(f"unknown note token {token!r}")
        pitch_tok, octave_tok = m.groups()
        return cls(PitchClass.parse(pitch_tok), int(octave_tok))

    @classmethod
    def from_semitone(cls, value: int) -> Note:
        octave, index = divmod(value, 12)
        return cls(PitchClass(index), octave)

    @property
    def semitone(self) -> int:
        return 12 * self.octave + self.pitch.index

    def transpose(self, semitones: int) -> Note:
        return Note.from_semitone(self.semitone + semitones)

    def __lt__(self, other: Note) -> bool:
        return self.semitone < other.semitone

    def __str__(self) -> str:
        return f"{self.pitch.name}{self.octave}"


class Mode(str, Enum):
    MAJOR = "major"
    MINOR = "minor"


@dataclass(frozen=True)
class Key:
    tonic: PitchClass
    mode: Mode = Mode.MAJOR

    @property
    def effective_tonic(self) -> PitchClass:
        """Tonic of the major key sharing this key's pitch set."""
        if self.mode is Mode.MINOR:
            return self.tonic.transpose(3)
        return self.tonic

    def relative_major(self) -> Key:
        return Key(self.effective_tonic, Mode.MAJOR)

    def transpose(self, semitones: int) -> Key:
        return Key(self.tonic.transpose(semitones), self.mode)

    def __str__(self) -> str:
        return f"{self.tonic.name} {self.mode.value}"


class Quality(str, Enum):
    MAJOR = "major"
    MINOR = "minor"
    DIMINISHED = "diminished"
    AUGMENTED = "augmented"


_TEMPLATES = {
    Quality.MAJOR: (0, 4, 7),
    Quality.MINOR: (0, 3, 7),
    Quality.DIMINISHED: (0, 3, 6),
    Quality.AUGMENTED: (0, 4, 8),
}

# quality suffixes, longest first so "maj7" is not read as "m" + "aj7"
_QUALITY_SUFFIX = (("dim", Quality.DIMINISHED), ("aug", Quality.AUGMENTED), ("m", Quality.MINOR))
_EXTENSIONS = ("maj7", "13", "11", "9", "7", "6")
_CHORD_SUFFIX = {Quality.MAJOR: "", Quality.MINOR: "m", Quality.DIMINISHED: "dim", Quality.AUGMENTED: "aug"}


@dataclass(frozen=True)
class Chord:
    """A triad; seventh and extended chords are reduced to their triad on parsing."""

    root: PitchClass
    quality: Quality = Quality.MAJOR

    @classmethod
    def parse(cls, token: str) -> Chord:
        m = re.match(r"^([A-G][#b]?)(.*)$", token)
        if m is None:
            raise ValueError(f"unknown chord token {token!r}")
        root = PitchClass.parse(m.group(1))
        rest = m.group(2)
        quality = Quality.MAJOR
        if not rest.startswith("maj"):
            for suffix, q in _QUALITY_SUFFIX:
                if rest.startswith(suffix):
                    quality, rest = q, rest[len(suffix):]
                    break
        if rest and rest not in _EXTENSIONS:
            raise ValueError(f"unknown chord token {token!r}")
        return cls(root, quality)

    def transpose(self, semitones: int) -> Chord:
        return Chord(self.root.transpose(semitones), self.quality)

    def __str__(self) -> str:
        return self.root.name + _CHORD_SUFFIX[self.quality]


def degree_offset(pitch: PitchClass | Note, key: Key) -> int:
    """Semitones from the key's (relative-major) tonic up to ``pitch``, mod 12."""
    if isinstance(pitch, Note):
        pitch = pitch.pitch
    return (pitch.index - key.effective_tonic.index) % 12


def is_diatonic(offset: int) -> bool:
    return offset % 12 in _DEGREE_OF_OFFSET


def diatonic_degree(offset: int) -> int | None:
    """Scale degree 1..7 of a diatonic offset, ``None`` otherwise."""
    return _DEGREE_OF_OFFSET.get(offset % 12)


def interval_semitones(a: Note, b: Note) -> int:
    return b.semitone - a.semitone


def chord_spelling(chord: Chord) -> list[PitchClass]:
    return [chord.root.transpose(step) for step in _TEMPLATES[chord.quality]]
