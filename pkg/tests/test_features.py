import json
from dataclasses import replace
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from songattr.corpus import Author, Phrase, Segment, Song, load_corpus
from songattr.features import (
    BOUNDARY,
    Family,
    build_matrix,
    catalog_markdown,
    classify_chord,
    classify_chord_transition,
    classify_contour,
    classify_note,
    classify_note_transition,
    extract_features,
    feature_catalog,
    prevalence_filter,
)
from songattr.music import Chord, Key, Mode, Note, PitchClass, Quality

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).parent / "fixtures"
C_MAJOR = Key(PitchClass(0), Mode.MAJOR)


def n(tok):
    return Note.parse(tok)


def ch(tok):
    return Chord.parse(tok)


def codes(feats):
    return {f.code for f in feats}


def make_song(chords=(), phrases=(), key=C_MAJOR, sid="x", author=Author.LENNON):
    seg = Segment(key, tuple(ch(c) for c in chords), tuple(Phrase(tuple(n(t) for t in p)) for p in phrases))
    return Song(sid, sid, author, (seg,))


class TestCatalog:
    def test_family_sizes(self):
        sizes = {fam: len(feature_catalog(fam)) for fam in Family}
        assert sizes == {
            Family.CHORD: 9,
            Family.NOTE: 12,
            Family.CHORD_TRANSITION: 29,
            Family.NOTE_TRANSITION: 70,
            Family.CONTOUR: 27,
        }
        assert len(feature_catalog()) == 147

    def test_codes_unique(self):
        all_codes = [f.code for f in feature_catalog()]
        assert len(set(all_codes)) == len(all_codes)

    def test_docs_match_generated(self):
        assert (ROOT / "docs" / "feature_catalog.md").read_text() == catalog_markdown()


class TestClassifiers:
    @pytest.mark.parametrize("tok,code", [("G", "CHORD:V"), ("Bm", "CHORD:vii"), ("Bdim", "CHORD:NONDIATONIC_MIN"),
                                          ("Caug", "CHORD:NONDIATONIC_MAJ"), ("D", "CHORD:NONDIATONIC_MAJ"),
                                          ("Em", "CHORD:iii")])
    def test_chord(self, tok, code):
        assert classify_chord(ch(tok), C_MAJOR).code == code

    def test_note_octave_ignored(self):
        assert classify_note(n("E4"), C_MAJOR) == classify_note(n("E5"), C_MAJOR)
        assert classify_note(n("Eb4"), C_MAJOR).code == "NOTE:b3"
        assert classify_note(n("C4"), Key(PitchClass(9), Mode.MINOR)).code == "NOTE:1"

    def test_chord_transitions(self):
        assert classify_chord_transition(ch("G"), ch("C"), C_MAJOR).code == "CT:V->I"
        a = classify_chord_transition(ch("Dm"), ch("F"), C_MAJOR)
        b = classify_chord_transition(ch("F"), ch("Dm"), C_MAJOR)
        assert a == b and a.code == "CT:ii<>IV"
        assert classify_chord_transition(ch("C"), ch("C"), C_MAJOR) is None

    @pytest.mark.parametrize(
        "prev,nxt,code",
        [("F4", "G4", "NT:4_TO_5"), ("A4", "G4", "NT:DOWN1_DIATONIC"), ("C#4", "D4", "NT:UP_HALFSTEP_NONDIA_TO_DIA"),
         (None, "G4", "NT:START_5"), ("Eb4", "C4", "NT:DOWN_b3_TO_1"), ("G4", None, "NT:END_5"),
         ("C4", "E5", "NT:TONIC_3"), ("A4", "A5", "NT:REPEAT_6"), ("Eb4", "Eb5", "NT:REPEAT_NONDIA"),
         ("D4", "B4", "NT:UP5_DIATONIC"), ("D4", "E5", "NT:UP5_DIATONIC"), ("D4", "D6", "NT:REPEAT_2"),
         ("F#4", "Ab4", "NT:UP_NONDIA"), ("C#4", None, "NT:END_NONDIA")],
    )
    def test_note_transitions(self, prev, nxt, code):
        p = BOUNDARY if prev is None else n(prev)
        q = BOUNDARY if nxt is None else n(nxt)
        assert classify_note_transition(p, q, C_MAJOR).code == code

    def test_both_boundaries_rejected(self):
        with pytest.raises(ValueError):
            classify_note_transition(BOUNDARY, BOUNDARY, C_MAJOR)

    @pytest.mark.parametrize("w,code", [("C4 E4 G4 E4", "UUD"), ("G4 F4 E4 E4", "DDS"), ("C4 C4 C4 C4", "SSS"),
                                        ("C4 C5 C4 C4", "UDS")])
    def test_contour(self, w, code):
        assert classify_contour([n(t) for t in w.split()]).code == "CONTOUR:" + code


# ------------------------------------------------------------ totality oracle
# An independent restatement of the ordered note-transition rules as predicates
# on (offset a, offset b, signed semitone step). For every pair of notes over
# three octaves, at least one rule must match and the classifier must return a
# code from the first matching rule's family of codes.

DIA = {0: 1, 2: 2, 4: 3, 5: 4, 7: 5, 9: 6, 11: 7}
BLUE = {3, 10}
S9 = set(DIA) | BLUE


def _rules():
    def both_dia(a, b, s):
        return a in DIA and b in DIA

    return [
        ("TONIC_", lambda a, b, s: both_dia(a, b, s) and 0 in (a, b)),
        ("BLUE", lambda a, b, s: a in S9 and b in S9 and (a in BLUE or b in BLUE) and a != b
         and min((a - b) % 12, (b - a) % 12) != 1),
        ("REPEAT_", lambda a, b, s: both_dia(a, b, s) and a == b),
        ("4_TO_5", lambda a, b, s: (a, b) == (5, 7)),
        ("5_TO_4", lambda a, b, s: (a, b) == (7, 5)),
        ("UP", lambda a, b, s: both_dia(a, b, s) and s > 0),
        ("DOWN", lambda a, b, s: both_dia(a, b, s) and s < 0),
        ("UP_HALFSTEP_DIA_TO_NONDIA", lambda a, b, s: s == 1 and a in DIA and b not in DIA),
        ("DOWN_HALFSTEP_DIA_TO_NONDIA", lambda a, b, s: s == -1 and a in DIA and b not in DIA),
        ("UP_HALFSTEP_NONDIA_TO_DIA", lambda a, b, s: s == 1 and a not in DIA and b in DIA),
        ("DOWN_HALFSTEP_NONDIA_TO_DIA", lambda a, b, s: s == -1 and a not in DIA and b in DIA),
        ("REPEAT_NONDIA", lambda a, b, s: a == b and a not in DIA),
        ("UP_NONDIA", lambda a, b, s: s > 0),
        ("DOWN_NONDIA", lambda a, b, s: s < 0),
    ]


def _expected_code(a, b, s, rel_a, rel_b):
    for name, pred in _rules():
        if not pred(a, b, s):
            continue
        if name == "TONIC_":
            return f"NT:TONIC_{max(DIA[a], DIA[b])}"
        if name == "BLUE":
            return "BLUE"
        if name == "REPEAT_":
            return f"NT:REPEAT_{DIA[a]}"
        if name in ("UP", "DOWN"):
            # diatonic step distance by walking the scale
            lo, hi = sorted((rel_a, rel_b))
            steps = sum(1 for v in range(lo + 1, hi + 1) if v % 12 in DIA)
            return f"NT:{name}{min(steps, 5)}_DIATONIC"
        return "NT:" + name
    return None


@pytest.mark.parametrize("tonic", [0, 5, 9])
def test_note_transition_totality(tonic):
    key = Key(PitchClass(tonic), Mode.MAJOR)
    catalog = codes(feature_catalog(Family.NOTE_TRANSITION))
    base = 12 * 3 + tonic
    span = range(base, base + 36)
    for u, v in product(span, span):
        a, b = (u - tonic) % 12, (v - tonic) % 12
        got = classify_note_transition(Note.from_semitone(u), Note.from_semitone(v), key).code
        assert got in catalog
        want = _expected_code(a, b, v - u, u - tonic, v - tonic)
        assert want is not None
        if want == "BLUE":
            names = ("1", "b2", "2", "b3", "3", "4", "#4", "5", "b6", "6", "b7", "7")
            assert got.endswith(f"_{names[a]}_TO_{names[b]}")
        else:
            assert got == want, (u, v)
    for u in span:
        note = Note.from_semitone(u)
        assert classify_note_transition(BOUNDARY, note, key).code in catalog
        assert classify_note_transition(note, BOUNDARY, key).code in catalog


def test_chord_classifiers_total():
    chords = [Chord(PitchClass(r), q) for r in range(12) for q in Quality]
    cat = codes(feature_catalog(Family.CHORD))
    ct = codes(feature_catalog(Family.CHORD_TRANSITION))
    assert {classify_chord(c, C_MAJOR).code for c in chords} == cat
    seen = set()
    for a, b in product(chords, chords):
        got = classify_chord_transition(a, b, C_MAJOR)
        if a == b:
            assert got is None
        else:
            seen.add(got.code)
    assert seen == ct


def test_contour_total():
    got = {classify_contour([Note.from_semitone(60 + d) for d in w]).code
           for w in product(range(-3, 4), repeat=4)}
    assert got == codes(feature_catalog(Family.CONTOUR))


# ------------------------------------------------------------ songs


class TestExtract:
    def test_one_note_phrase(self):
        assert codes(extract_features(make_song(phrases=[["C4"]]))) == {"NT:START_1", "NT:END_1", "NOTE:1"}

    def test_repeated_chord_collapse(self):
        assert codes(extract_features(make_song(chords=["C", "C", "G"]))) == {"CHORD:I", "CHORD:V", "CT:I->V"}

    def test_chords_only(self):
        assert codes(extract_features(make_song(chords=["C"]))) == {"CHORD:I"}

    def test_short_phrase_has_no_contour(self):
        feats = extract_features(make_song(phrases=[["C4", "D4", "E4"]]))
        assert not any(f.family is Family.CONTOUR for f in feats)

    def test_no_cross_boundary_transitions(self):
        # two phrases [C4] [G4]: no C->G transition, two start/end pairs
        got = codes(extract_features(make_song(phrases=[["C4"], ["G4"]])))
        assert got == {"NOTE:1", "NOTE:5", "NT:START_1", "NT:END_1", "NT:START_5", "NT:END_5"}
        # segments in C then G major: the chord pair across segments is not a transition
        segs = (Segment(C_MAJOR, (ch("C"),), ()), Segment(Key(PitchClass(7)), (ch("C"),), ()))
        got = codes(extract_features(Song("x", "x", Author.LENNON, segs)))
        assert got == {"CHORD:I", "CHORD:IV"}

    def test_traced_oracle(self):
        corpus = load_corpus(FIXTURES / "traced_songs.json")
        expected = json.loads((FIXTURES / "traced_expected.json").read_text())
        assert [s.id for s in corpus] == list(expected)
        for song in corpus:
            assert sorted(codes(extract_features(song))) == expected[song.id], song.id

    def test_matrix_is_union_of_traced(self):
        corpus = load_corpus(FIXTURES / "traced_songs.json")
        expected = json.loads((FIXTURES / "traced_expected.json").read_text())
        m = build_matrix(corpus)
        assert m.song_ids == tuple(expected)
        assert list(m.features) == list(feature_catalog())
        for i, sid in enumerate(m.song_ids):
            row = {c for c, v in zip(m.codes, m.cells[i]) if v}
            assert row == set(expected[sid])
        assert list(m.labels) == [s.label for s in corpus]


notes_mid = st.integers(36, 71).map(Note.from_semitone)
segments = st.builds(
    Segment,
    st.builds(Key, st.integers(0, 11).map(PitchClass), st.sampled_from(list(Mode))),
    st.lists(st.builds(Chord, st.integers(0, 11).map(PitchClass), st.sampled_from(list(Quality))),
             max_size=6).map(tuple),
    st.lists(st.lists(notes_mid, min_size=1, max_size=7).map(lambda v: Phrase(tuple(v))),
             min_size=1, max_size=3).map(tuple),
)
songs = st.builds(Song, st.just("s"), st.just("s"), st.just(Author.LENNON), st.lists(segments, min_size=1,
                                                                                      max_size=3).map(tuple))


@settings(max_examples=150, deadline=None)
@given(songs, st.integers(-24, 24))
def test_transposition_invariance(song, k):
    assert extract_features(song.transpose(k)) == extract_features(song)


@settings(max_examples=150, deadline=None)
@given(songs, st.data())
def test_repetition_invariance(song, data):
    base = extract_features(song)
    i = data.draw(st.integers(0, len(song.segments) - 1))
    seg = song.segments[i]

    # a phrase repeated verbatim
    j = data.draw(st.integers(0, len(seg.phrases) - 1))
    dup_phrase = replace(seg, phrases=seg.phrases[:j + 1] + seg.phrases[j:])
    # a chord run doubled in place
    if seg.chords:
        lo = data.draw(st.integers(0, len(seg.chords) - 1))
        hi = data.draw(st.integers(lo + 1, len(seg.chords)))
        doubled = tuple(c for c in seg.chords[lo:hi] for _ in range(2))
        dup_chords = replace(seg, chords=seg.chords[:lo] + doubled + seg.chords[hi:])
    else:
        dup_chords = seg

    for new in (dup_phrase, dup_chords):
        segs = song.segments[:i] + (new,) + song.segments[i + 1:]
        assert extract_features(replace(song, segments=segs)) == base
    # a whole segment repeated
    segs = song.segments[:i + 1] + song.segments[i:]
    assert extract_features(replace(song, segments=segs)) == base


class TestMatrix:
    def test_shared_column(self):
        m = build_matrix([make_song(chords=["G"], sid="a"), make_song(chords=["G", "C"], sid="b")])
        j = m.codes.index("CHORD:V")
        assert list(m.cells[:, j]) == [1, 1]
        assert list(m.cells[:, m.codes.index("NOTE:b3")]) == [0, 0]

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            build_matrix([])

    def _column_sums(self, sums, n=70):
        cells = np.zeros((n, len(sums)), dtype=np.int8)
        for j, s in enumerate(sums):
            cells[:s, j] = 1
        songs = [make_song(chords=["C"], sid=f"s{i}", author=Author.LENNON if i % 2 else Author.MCCARTNEY)
                 for i in range(n)]
        m = build_matrix(songs)
        return replace(m, features=m.features[:len(sums)], cells=cells)

    def test_prevalence_boundaries(self):
        m = self._column_sums([5, 6, 65, 66, 0, 70])
        kept = prevalence_filter(m, 5, 66)
        assert kept.codes == m.codes[1:3]
        assert dict(kept.dropped) == {m.codes[0]: 5, m.codes[3]: 66, m.codes[4]: 0, m.codes[5]: 70}

    def test_prevalence_uses_labeled_rows_only(self):
        m = self._column_sums([6, 7])
        labels = m.labels.copy()
        labels[:1] = -1
        m = replace(m, labels=labels)
        assert prevalence_filter(m, 5, 66).codes == m.codes[1:]

    def test_prevalence_errors(self):
        m = self._column_sums([1, 2])
        with pytest.raises(ValueError, match="every feature"):
            prevalence_filter(m, 5, 66)
        with pytest.raises(ValueError):
            prevalence_filter(m, 6, 6)

    def test_degenerate_columns(self):
        m = self._column_sums([0, 3, 70])
        assert list(m.degenerate_columns()) == [True, False, True]
