"""Corpus model and the JSON song-encoding format.

A corpus document looks like::

    {"songs": [
      {"id": "s1", "title": "...", "author": "LENNON",
       "segments": [
         {"key": {"tonic": "C", "mode": "major"},
          "chords": ["C", "G7", "Am"],
          "phrases": [["E4", "D4", "C4"], ["G4", "A4"]]}
       ]}
    ]}

Each segment carries its own key, so a modulation is encoded by starting a new
segment. Chord extensions (6, 7, maj7, 9, 11, 13) are accepted and dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .music import Chord, Key, Mode, Note, PitchClass

__all__ = [
    "Author",
    "Phrase",
    "Segment",
    "Song",
    "Corpus",
    "Diagnostic",
    "CorpusError",
    "parse_corpus",
    "load_corpus",
    "serialize_corpus",
    "validate_corpus",
]


class Author(str, Enum):
    LENNON = "LENNON"
    MCCARTNEY = "MCCARTNEY"
    DISPUTED = "DISPUTED"
    COLLABORATIVE = "COLLABORATIVE"

    @property
    def label(self) -> int | None:
        """Binary response: 0 for Lennon, 1 for McCartney, None otherwise."""
        return {Author.LENNON: 0, Author.MCCARTNEY: 1}.get(self)


@dataclass(frozen=True)
class Phrase:
    notes: tuple[Note, ...]

    def __post_init__(self):
        if not self.notes:
            raise ValueError("a phrase needs at least one note")

    def transpose(self, semitones: int) -> Phrase:
        return Phrase(tuple(n.transpose(semitones) for n in self.notes))


@dataclass(frozen=True)
class Segment:
    key: Key
    chords: tuple[Chord, ...] = ()
    phrases: tuple[Phrase, ...] = ()

    def __post_init__(self):
        if not self.chords and not self.phrases:
            raise ValueError("a segment needs chords or phrases")

    def transpose(self, semitones: int) -> Segment:
        return Segment(
            self.key.transpose(semitones),
            tuple(c.transpose(semitones) for c in self.chords),
            tuple(p.transpose(semitones) for p in self.phrases),
        )


@dataclass(frozen=True)
class Song:
    id: str
    title: str
    author: Author
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError(f"song {self.id!r} has no segments")

    @property
    def label(self) -> int | None:
        return self.author.label

    def transpose(self, semitones: int) -> Song:
        return Song(self.id, self.title, self.author, tuple(s.transpose(semitones) for s in self.segments))


@dataclass(frozen=True)
class Corpus:
    songs: tuple[Song, ...] = ()

    def __post_init__(self):
        seen = set()
        for song in self.songs:
            if song.id in seen:
                raise ValueError(f"duplicate song id {song.id!r}")
            seen.add(song.id)

    def __len__(self) -> int:
        return len(self.songs)

    def __iter__(self):
        return iter(self.songs)

    def get(self, song_id: str) -> Song:
        for song in self.songs:
            if song.id == song_id:
                return song
        raise KeyError(song_id)

    @property
    def labeled(self) -> list[Song]:
        return [s for s in self.songs if s.label is not None]


class CorpusError(ValueError):
    """Raised when a corpus document cannot be parsed.

    ``location`` is a JSON-path-like pointer (``songs[2].segments[0].chords[3]``)
    or ``line:col`` for syntax errors.
    """

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "warning" or "error"
    message: str
    location: str = ""

    def to_dict(self) -> dict:
        return {"level": self.level, "message": self.message, "location": self.location}


def _expect(obj, typ, where: str):
    if not isinstance(obj, typ):
        raise CorpusError(f"expected {typ.__name__}, got {type(obj).__name__}", where)
    return obj


def _field(obj: dict, name: str, typ, where: str):
    if name not in obj:
        raise CorpusError(f"missing field {name!r}", where)
    return _expect(obj[name], typ, f"{where}.{name}")


def _token(parse, tok, where: str):
    if not isinstance(tok, str):
        raise CorpusError(f"expected a string token, got {tok!r}", where)
    try:
        return parse(tok)
    except ValueError as exc:
        raise CorpusError(str(exc), where) from None


def _parse_segment(raw, where: str) -> Segment:
    _expect(raw, dict, where)
    key_raw = _field(raw, "key", dict, where)
    tonic = _token(PitchClass.parse, key_raw.get("tonic"), f"{where}.key.tonic")
    try:
        mode = Mode(key_raw.get("mode"))
    except ValueError:
        raise CorpusError(f"unknown mode {key_raw.get('mode')!r}", f"{where}.key.mode") from None
    chords = tuple(
        _token(Chord.parse, tok, f"{where}.chords[{i}]")
        for i, tok in enumerate(_field(raw, "chords", list, where))
    )
    phrases = []
    for p, phrase_raw in enumerate(_field(raw, "phrases", list, where)):
        pwhere = f"{where}.phrases[{p}]"
        _expect(phrase_raw, list, pwhere)
        if not phrase_raw:
            raise CorpusError("empty phrase", pwhere)
        phrases.append(Phrase(tuple(_token(Note.parse, tok, f"{pwhere}[{k}]") for k, tok in enumerate(phrase_raw))))
    if not chords and not phrases:
        raise CorpusError("empty segment (no chords and no phrases)", where)
    return Segment(Key(tonic, mode), chords, tuple(phrases))


def parse_corpus(document: bytes | str) -> Corpus:
    """Parse a UTF-8 JSON corpus document into a validated :class:`Corpus`."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"document is not UTF-8: {exc}") from None
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"syntax error: {exc.msg}", f"{exc.lineno}:{exc.colno}") from None

    _expect(raw, dict, "$")
    songs = []
    seen: set[str] = set()
    for s, song_raw in enumerate(_field(raw, "songs", list, "$")):
        where = f"songs[{s}]"
        _expect(song_raw, dict, where)
        song_id = _field(song_raw, "id", str, where)
        if song_id in seen:
            raise CorpusError(f"duplicate song id {song_id!r}", f"{where}.id")
        seen.add(song_id)
        title = _field(song_raw, "title", str, where)
        try:
            author = Author(song_raw.get("author"))
        except ValueError:
            raise CorpusError(f"unknown author {song_raw.get('author')!r}", f"{where}.author") from None
        segs_raw = _field(song_raw, "segments", list, where)
        if not segs_raw:
            raise CorpusError("song has no segments", f"{where}.segments")
        segments = tuple(_parse_segment(seg, f"{where}.segments[{g}]") for g, seg in enumerate(segs_raw))
        songs.append(Song(song_id, title, author, segments))
    return Corpus(tuple(songs))


def load_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        return parse_corpus(fh.read())


def _song_to_dict(song: Song) -> dict:
    return {
        "id": song.id,
        "title": song.title,
        "author": song.author.value,
        "segments": [
            {
                "key": {"tonic": seg.key.tonic.name, "mode": seg.key.mode.value},
                "chords": [str(c) for c in seg.chords],
                "phrases": [[str(n) for n in p.notes] for p in seg.phrases],
            }
            for seg in song.segments
        ],
    }


def serialize_corpus(corpus: Corpus | Iterable[Song]) -> str:
    songs = corpus.songs if isinstance(corpus, Corpus) else tuple(corpus)
    return json.dumps({"songs": [_song_to_dict(s) for s in songs]}, indent=1) + "\n"


def validate_corpus(corpus: Corpus) -> list[Diagnostic]:
    """Collect warnings and errors without raising. An empty list means clean."""
    diags = []
    for s, song in enumerate(corpus.songs):
        if song.label is None:
            diags.append(Diagnostic("warning", f"no known author ({song.author.value}); used for prediction only",
                                    f"songs[{s}]"))
        for g, seg in enumerate(song.segments):
            where = f"songs[{s}].segments[{g}]"
            if len(seg.chords) == 1:
                diags.append(Diagnostic("warning", "segment has a single chord, so no chord transitions", where))
            for p, phrase in enumerate(seg.phrases):
                if len(phrase.notes) < 2:
                    diags.append(
                        Diagnostic(
                            "warning",
                            "phrase yields no internal transitions beyond start/end",
                            f"{where}.phrases[{p}]",
                        )
                    )
    labels = {song.label for song in corpus.labeled}
    if labels != {0, 1}:
        diags.append(Diagnostic("error", "fitting requires both classes (LENNON and MCCARTNEY songs)"))
    return diags
