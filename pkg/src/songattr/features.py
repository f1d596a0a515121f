"""Binary musical features: chords, melodic notes, chord transitions,
melodic note transitions and 4-note contours.

Every classifier maps its input onto a code from a fixed, ordered catalog
(:func:`feature_catalog`). A song becomes the set of codes it contains, and a
corpus becomes a 0/1 matrix with one column per catalog code.

Rule precedence is first-match, in the order documented in
``docs/feature_catalog.md`` (regenerate with :func:`catalog_markdown`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, permutations, product

import numpy as np

from .corpus import Corpus, Song
from .music import (
    Chord,
    Key,
    Note,
    Quality,
    diatonic_degree,
    degree_offset,
    is_diatonic,
)

__all__ = [
    "Family",
    "FeatureId",
    "FeatureMatrix",
    "feature_catalog",
    "catalog_markdown",
    "classify_chord",
    "classify_note",
    "classify_chord_transition",
    "classify_note_transition",
    "classify_contour",
    "extract_features",
    "build_matrix",
    "prevalence_filter",
    "BOUNDARY",
]


class Family(str, Enum):
    CHORD = "CHORD"
    NOTE = "NOTE"
    CHORD_TRANSITION = "CHORD_TRANSITION"
    NOTE_TRANSITION = "NOTE_TRANSITION"
    CONTOUR = "CONTOUR"


@dataclass(frozen=True, order=True)
class FeatureId:
    family: Family
    code: str

    def __str__(self) -> str:
        return self.code


# ---------------------------------------------------------------- naming

_ROMAN = ("I", "ii", "iii", "IV", "V", "vi", "vii")
_CHORD_QUALITY = (Quality.MAJOR, Quality.MINOR, Quality.MINOR, Quality.MAJOR,
                  Quality.MAJOR, Quality.MINOR, Quality.MINOR)
NONDIA_MAJ = "NONDIATONIC_MAJ"
NONDIA_MIN = "NONDIATONIC_MIN"
_CHORD_CATS = _ROMAN + (NONDIA_MAJ, NONDIA_MIN)
_PRIMARY = ("I", "IV", "V")

# offset -> degree label, flats for the chromatic pitches (#4 is the tritone)
_OFFSET_NAME = ("1", "b2", "2", "b3", "3", "4", "#4", "5", "b6", "6", "b7", "7")
_B3, _B7 = 3, 10
_PENTATONIC_SET = (0, 2, 3, 4, 5, 7, 9, 10, 11)  # diatonic plus b3 and b7


def _f(family: Family, code: str) -> FeatureId:
    return FeatureId(family, code)


def _chord_code(cat: str) -> FeatureId:
    return _f(Family.CHORD, f"CHORD:{cat}")


def _note_code(offset: int) -> FeatureId:
    return _f(Family.NOTE, f"NOTE:{_OFFSET_NAME[offset]}")


def _ct(code: str) -> FeatureId:
    return _f(Family.CHORD_TRANSITION, f"CT:{code}")


def _nt(code: str) -> FeatureId:
    return _f(Family.NOTE_TRANSITION, f"NT:{code}")


def _pent_code(a: int, b: int) -> FeatureId:
    # nominal direction of the nearest motion from a to b; the category itself
    # is the ordered pitch-class pair and ignores octave
    up = (b - a) % 12
    direction = "UP" if up <= 6 else "DOWN"
    return _nt(f"{direction}_{_OFFSET_NAME[a]}_TO_{_OFFSET_NAME[b]}")


def _pent_pairs() -> list[tuple[int, int]]:
    """Ordered pitch-class pairs handled by the blues-pitch rule.

    Both pitches lie in the diatonic set plus b3/b7, at least one is b3 or b7,
    the pitches differ, and they are not a semitone apart (semitone moves
    between a diatonic and a non-diatonic pitch have their own categories).
    """
    pairs = []
    for a, b in permutations(_PENTATONIC_SET, 2):
        if _B3 not in (a, b) and _B7 not in (a, b):
            continue
        if min((a - b) % 12, (b - a) % 12) == 1:
            continue
        pairs.append((a, b))
    return pairs


_PENT_PAIRS = frozenset(_pent_pairs())
_MAX_STEPS = 5


def _build_catalog() -> tuple[FeatureId, ...]:
    out: list[FeatureId] = []
    out += [_chord_code(c) for c in _CHORD_CATS]
    out += [_note_code(o) for o in range(12)]

    # chord transitions
    out += [_ct(f"{a}->{b}") for a, b in permutations(_PRIMARY, 2)]
    for a, b in combinations(_ROMAN, 2):
        if a in _PRIMARY and b in _PRIMARY:
            continue
        out.append(_ct(f"{a}<>{b}"))
    out += [_ct(c) for c in ("I<>NONDIA", "V<>NONDIA", "NONDIA->OTHER", "OTHER->NONDIA", "NONDIA->NONDIA")]

    # note transitions, in rule order
    out += [_nt(f"START_{d}") for d in range(1, 8)] + [_nt("START_NONDIA")]
    out += [_nt(f"END_{d}") for d in range(1, 8)] + [_nt("END_NONDIA")]
    out += [_nt(f"TONIC_{d}") for d in range(1, 8)]
    out += [_pent_code(a, b) for a, b in _pent_pairs()]
    out += [_nt(f"REPEAT_{d}") for d in range(2, 8)]
    out += [_nt("4_TO_5"), _nt("5_TO_4")]
    out += [_nt(f"UP{k}_DIATONIC") for k in range(1, _MAX_STEPS + 1)]
    out += [_nt(f"DOWN{k}_DIATONIC") for k in range(1, _MAX_STEPS + 1)]
    out += [_nt(c) for c in (
        "UP_HALFSTEP_DIA_TO_NONDIA",
        "DOWN_HALFSTEP_DIA_TO_NONDIA",
        "UP_HALFSTEP_NONDIA_TO_DIA",
        "DOWN_HALFSTEP_NONDIA_TO_DIA",
        "REPEAT_NONDIA",
        "UP_NONDIA",
        "DOWN_NONDIA",
    )]

    out += [_f(Family.CONTOUR, "CONTOUR:" + "".join(t)) for t in product("UDS", repeat=3)]
    return tuple(out)


_CATALOG = _build_catalog()
_CATALOG_INDEX = {f.code: i for i, f in enumerate(_CATALOG)}
_BY_CODE = {f.code: f for f in _CATALOG}


def feature_catalog(family: Family | None = None) -> tuple[FeatureId, ...]:
    """The canonical, ordered feature enumeration (optionally one family)."""
    if family is None:
        return _CATALOG
    return tuple(f for f in _CATALOG if f.family is family)


def feature_by_code(code: str) -> FeatureId:
    return _BY_CODE[code]


_RULES_DOC = {
    Family.CHORD: [
        "Diatonic root with the matching quality (I, IV, V major; ii, iii, vi, vii minor) -> its roman numeral.",
        "Any other major chord, and every augmented chord -> NONDIATONIC_MAJ.",
        "Any other minor chord, and every diminished chord -> NONDIATONIC_MIN.",
    ],
    Family.NOTE: ["Semitone offset above the (relative-major) tonic; octave ignored."],
    Family.CHORD_TRANSITION: [
        "Identical consecutive chords are collapsed first and give no transition.",
        "1. Ordered pair of distinct categories among I, IV, V.",
        "2. Unordered pair of distinct diatonic categories, not both in {I, IV, V}.",
        "3. I with any non-diatonic chord, either direction.",
        "4. V with any non-diatonic chord, either direction.",
        "5. Non-diatonic -> other diatonic (ii, iii, IV, vi, vii).",
        "6. Other diatonic (ii, iii, IV, vi, vii) -> non-diatonic.",
        "7. Non-diatonic -> non-diatonic.",
    ],
    Family.NOTE_TRANSITION: [
        "Pitch classes are offsets above the (relative-major) tonic; direction and step size use absolute pitch.",
        "1. Phrase start on diatonic degree d.",
        "2. Phrase start on a non-diatonic pitch.",
        "3. Phrase end on diatonic degree d.",
        "4. Phrase end on a non-diatonic pitch.",
        "5. Both diatonic, at least one the tonic: unordered pair {1, d}.",
        "6. Both in diatonic+{b3, b7}, at least one b3/b7, distinct and not a semitone apart: ordered pitch-class pair (octave ignored; UP/DOWN in the code is the nominal nearest motion).",
        "7. Same diatonic non-tonic pitch class repeated: per degree.",
        "8. Degree 4 -> 5 and 5 -> 4.",
        "9. Both diatonic non-tonic, up k diatonic steps, k = 1..5 (5 also covers larger leaps).",
        "10. Same, downward.",
        "11. Semitone up, diatonic -> non-diatonic.",
        "12. Semitone down, diatonic -> non-diatonic.",
        "13. Semitone up, non-diatonic -> diatonic.",
        "14. Semitone down, non-diatonic -> diatonic.",
        "15. Same non-diatonic pitch class repeated (b3 and b7 included).",
        "16. Any remaining upward move involving a non-diatonic pitch.",
        "17. Any remaining downward move involving a non-diatonic pitch.",
    ],
    Family.CONTOUR: ["Up/Down/Same for each of the three steps of a 4-note window; Same means identical absolute pitch."],
}


def catalog_markdown() -> str:
    """Render the catalog as the markdown tables shipped in ``docs/``."""
    lines = ["# Feature catalog", "", "Generated by `songattr.features.catalog_markdown()`; do not edit.", ""]
    for fam in Family:
        feats = feature_catalog(fam)
        lines += [f"## {fam.value} ({len(feats)})", ""]
        lines += [f"- {r}" for r in _RULES_DOC[fam]]
        lines += ["", "| # | code |", "|---|------|"]
        lines += [f"| {i} | `{f.code}` |" for i, f in enumerate(feats, 1)]
        lines.append("")
    lines.append(f"Total: {len(_CATALOG)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- classifiers


def _chord_category(chord: Chord, key: Key) -> str:
    off = degree_offset(chord.root, key)
    deg = diatonic_degree(off)
    if deg is not None and chord.quality is _CHORD_QUALITY[deg - 1]:
        return _ROMAN[deg - 1]
    if chord.quality in (Quality.MAJOR, Quality.AUGMENTED):
        return NONDIA_MAJ
    return NONDIA_MIN


def classify_chord(chord: Chord, key: Key) -> FeatureId:
    return _chord_code(_chord_category(chord, key))


def classify_note(note: Note, key: Key) -> FeatureId:
    return _note_code(degree_offset(note, key))


def classify_chord_transition(prev: Chord, nxt: Chord, key: Key) -> FeatureId | None:
    if prev == nxt:
        return None
    a, b = _chord_category(prev, key), _chord_category(nxt, key)
    a_dia, b_dia = a in _ROMAN, b in _ROMAN
    if a in _PRIMARY and b in _PRIMARY:
        return _ct(f"{a}->{b}")
    if a_dia and b_dia:
        lo, hi = sorted((a, b), key=_ROMAN.index)
        return _ct(f"{lo}<>{hi}")
    if "I" in (a, b):
        return _ct("I<>NONDIA")
    if "V" in (a, b):
        return _ct("V<>NONDIA")
    if b_dia:
        return _ct("NONDIA->OTHER")
    if a_dia:
        return _ct("OTHER->NONDIA")
    return _ct("NONDIA->NONDIA")


class _Boundary:
    def __repr__(self):
        return "BOUNDARY"


BOUNDARY = _Boundary()


def _diatonic_position(note: Note, key: Key) -> int:
    """Absolute diatonic step count above a fixed reference; diatonic notes only."""
    rel = note.semitone - key.effective_tonic.index
    octave, off = divmod(rel, 12)
    return 7 * octave + diatonic_degree(off) - 1


def classify_note_transition(prev, nxt, key: Key) -> FeatureId:
    """Classify a consecutive pair from a phrase padded with :data:`BOUNDARY` at both ends."""
    if prev is BOUNDARY and nxt is BOUNDARY:
        raise ValueError("a note transition needs at least one note")
    if prev is BOUNDARY:
        deg = diatonic_degree(degree_offset(nxt, key))
        return _nt(f"START_{deg}" if deg else "START_NONDIA")
    if nxt is BOUNDARY:
        deg = diatonic_degree(degree_offset(prev, key))
        return _nt(f"END_{deg}" if deg else "END_NONDIA")

    a, b = degree_offset(prev, key), degree_offset(nxt, key)
    da, db = diatonic_degree(a), diatonic_degree(b)
    step = nxt.semitone - prev.semitone

    if da and db:
        if da == 1 or db == 1:
            return _nt(f"TONIC_{max(da, db)}")
        if da == db:
            return _nt(f"REPEAT_{da}")
        if (da, db) == (4, 5):
            return _nt("4_TO_5")
        if (da, db) == (5, 4):
            return _nt("5_TO_4")
        k = min(abs(_diatonic_position(nxt, key) - _diatonic_position(prev, key)), _MAX_STEPS)
        return _nt(f"{'UP' if step > 0 else 'DOWN'}{k}_DIATONIC")

    if (a, b) in _PENT_PAIRS:
        return _pent_code(a, b)
    if step == 1 or step == -1:
        direction = "UP" if step > 0 else "DOWN"
        kind = "DIA_TO_NONDIA" if da else "NONDIA_TO_DIA"
        return _nt(f"{direction}_HALFSTEP_{kind}")
    if a == b:
        return _nt("REPEAT_NONDIA")
    return _nt("UP_NONDIA" if step > 0 else "DOWN_NONDIA")


def _direction(a: Note, b: Note) -> str:
    d = b.semitone - a.semitone
    return "U" if d > 0 else "D" if d < 0 else "S"


def classify_contour(window) -> FeatureId:
    if len(window) != 4:
        raise ValueError("a contour window has exactly 4 notes")
    code = "".join(_direction(window[i], window[i + 1]) for i in range(3))
    return _f(Family.CONTOUR, f"CONTOUR:{code}")


# ---------------------------------------------------------------- songs and matrices


def extract_features(song: Song) -> frozenset[FeatureId]:
    """Set of catalog features present anywhere in ``song``."""
    present: set[FeatureId] = set()
    for seg in song.segments:
        key = seg.key
        for c in seg.chords:
            present.add(classify_chord(c, key))
        for prev, nxt in zip(seg.chords, seg.chords[1:]):
            ct = classify_chord_transition(prev, nxt, key)
            if ct is not None:
                present.add(ct)
        for phrase in seg.phrases:
            notes = phrase.notes
            for n in notes:
                present.add(classify_note(n, key))
            padded = (BOUNDARY, *notes, BOUNDARY)
            for prev, nxt in zip(padded, padded[1:]):
                present.add(classify_note_transition(prev, nxt, key))
            for i in range(len(notes) - 3):
                present.add(classify_contour(notes[i:i + 4]))
    return frozenset(present)


@dataclass(frozen=True)
class FeatureMatrix:
    """Songs x features 0/1 matrix.

    ``labels`` holds 0/1 for songs of known authorship and -1 otherwise.
    """

    song_ids: tuple[str, ...]
    features: tuple[FeatureId, ...]
    cells: np.ndarray
    labels: np.ndarray
    dropped: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        if self.cells.shape != (len(self.song_ids), len(self.features)):
            raise ValueError("cells shape does not match song and feature lists")
        if self.labels.shape != (len(self.song_ids),):
            raise ValueError("labels length does not match song list")

    @property
    def codes(self) -> list[str]:
        return [f.code for f in self.features]

    @property
    def labeled_rows(self) -> np.ndarray:
        return np.flatnonzero(self.labels >= 0)

    def degenerate_columns(self) -> np.ndarray:
        """Columns with a single value over the labeled rows."""
        rows = self.cells[self.labeled_rows]
        if rows.shape[0] == 0:
            return np.ones(self.cells.shape[1], dtype=bool)
        return rows.min(axis=0) == rows.max(axis=0)

    def observed_counts(self) -> dict[Family, int]:
        """Non-empty catalog categories per family over all rows."""
        used = self.cells.any(axis=0)
        out = {fam: 0 for fam in Family}
        for f, u in zip(self.features, used):
            out[f.family] += int(u)
        return out

    def select_rows(self, rows) -> FeatureMatrix:
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(
            tuple(self.song_ids[i] for i in rows), self.features, self.cells[rows], self.labels[rows], self.dropped
        )

    def drop_features(self, codes) -> FeatureMatrix:
        codes = set(codes)
        keep = [j for j, f in enumerate(self.features) if f.code not in codes]
        return FeatureMatrix(
            self.song_ids, tuple(self.features[j] for j in keep), self.cells[:, keep], self.labels, self.dropped
        )

    def row_of(self, song_id: str) -> int:
        return self.song_ids.index(song_id)

    def to_csv(self) -> str:
        lines = ["song_id," + ",".join(self.codes)]
        for sid, row in zip(self.song_ids, self.cells):
            lines.append(sid + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def vector_for(present, features) -> np.ndarray:
    codes = {f.code if isinstance(f, FeatureId) else f for f in present}
    return np.array([1 if f.code in codes else 0 for f in features], dtype=np.int8)


def build_matrix(corpus: Corpus | list[Song]) -> FeatureMatrix:
    songs = corpus.songs if isinstance(corpus, Corpus) else tuple(corpus)
    if not songs:
        raise ValueError("cannot build a feature matrix from an empty corpus")
    cells = np.zeros((len(songs), len(_CATALOG)), dtype=np.int8)
    for i, song in enumerate(songs):
        for f in extract_features(song):
            cells[i, _CATALOG_INDEX[f.code]] = 1
    labels = np.array([-1 if s.label is None else s.label for s in songs], dtype=np.int8)
    return FeatureMatrix(tuple(s.id for s in songs), _CATALOG, cells, labels)


def prevalence_filter(m: FeatureMatrix, min_count: int = 5, max_count: int = 66) -> FeatureMatrix:
    """Drop features present in ``<= min_count`` or ``>= max_count`` labeled songs."""
    if not 0 <= min_count < max_count:
        raise ValueError(f"need 0 <= min_count < max_count, got {min_count}, {max_count}")
    sums = m.cells[m.labeled_rows].sum(axis=0)
    keep = (sums > min_count) & (sums < max_count)
    if not keep.any():
        raise ValueError("prevalence filter dropped every feature")
    dropped = tuple((f.code, int(s)) for f, s, k in zip(m.features, sums, keep) if not k)
    idx = np.flatnonzero(keep)
    return FeatureMatrix(
        m.song_ids, tuple(m.features[j] for j in idx), m.cells[:, idx], m.labels, m.dropped + dropped
    )
