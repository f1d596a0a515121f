"""Synthetic corpora for benchmarks and tests.

:func:`planted_matrix` builds a feature matrix directly: a handful of features
whose presence rate differs between the two authors, buried among noise
features with a shared rate. :func:`synthetic_corpus` builds actual song
encodings with author-dependent habits, for end-to-end CLI runs.
"""

from __future__ import annotations

import numpy as np

from .corpus import Author, Corpus, Phrase, Segment, Song
from .features import Family, FeatureId, FeatureMatrix
from .music import Chord, Key, Mode, Note, PitchClass, Quality

__all__ = ["planted_matrix", "synthetic_corpus"]


def planted_matrix(
    seed: int,
    n_songs: int = 70,
    n_class1: int = 31,
    n_signal: int = 6,
    n_noise: int = 80,
    rate_high: float = 0.7,
    rate_low: float = 0.2,
    noise_range: tuple[float, float] = (0.15, 0.85),
    permute_labels: bool = False,
) -> FeatureMatrix:
    """Matrix with ``n_signal`` author-discriminating columns first, then noise.

    Signal columns alternate direction: even ones are common in class 1
    (``rate_high`` vs ``rate_low``), odd ones in class 0.
    """
    rng = np.random.default_rng(seed)
    y = np.r_[np.zeros(n_songs - n_class1, dtype=np.int8), np.ones(n_class1, dtype=np.int8)]
    cells = np.empty((n_songs, n_signal + n_noise), dtype=np.int8)
    for j in range(n_signal):
        hi_cls = 1 if j % 2 == 0 else 0
        rate = np.where(y == hi_cls, rate_high, rate_low)
        cells[:, j] = rng.random(n_songs) < rate
    noise_rates = rng.uniform(*noise_range, size=n_noise)
    cells[:, n_signal:] = rng.random((n_songs, n_noise)) < noise_rates
    if permute_labels:
        y = rng.permutation(y)
    features = tuple(FeatureId(Family.CHORD, f"SIGNAL:{j}") for j in range(n_signal)) + tuple(
        FeatureId(Family.NOTE, f"NOISE:{j}") for j in range(n_noise)
    )
    ids = tuple(f"song{i:03d}" for i in range(n_songs))
    return FeatureMatrix(ids, features, cells, y)


_MAJOR_DEGREES = (0, 2, 4, 5, 7, 9, 11)


def _phrase(rng, key: Key, length: int, chromatic: float, blues: float) -> Phrase:
    tonic = key.effective_tonic.index
    base = 12 * 4 + tonic
    pos = int(rng.integers(0, 7))
    notes = []
    for _ in range(length):
        pos = int(np.clip(pos + rng.choice([-2, -1, -1, 0, 1, 1, 2, 3]), -3, 10))
        octave, step = divmod(pos, 7)
        value = base + 12 * octave + _MAJOR_DEGREES[step]
        u = rng.random()
        if u < blues and step in (2, 6):
            value -= 1  # flatten the 3rd or the 7th
        elif u < blues + chromatic:
            value += int(rng.choice([-1, 1]))
        notes.append(Note.from_semitone(value))
    return Phrase(tuple(notes))


def _song(rng, song_id: str, author: Author, style: float) -> Song:
    """``style`` in [0, 1] shifts habits toward the class-1 author."""
    tonic = PitchClass(int(rng.integers(0, 12)))
    mode = Mode.MINOR if rng.random() < 0.2 else Mode.MAJOR
    key = Key(tonic, mode)
    t = key.effective_tonic
    pool = [
        (0, Quality.MAJOR), (5, Quality.MAJOR), (7, Quality.MAJOR), (9, Quality.MINOR),
        (2, Quality.MINOR), (4, Quality.MINOR),
    ]
    weights = np.array([4, 3, 4, 2 + 2 * (1 - style), 1 + 3 * style, 1.0])
    if rng.random() < 0.3 + 0.4 * style:
        pool.append((int(rng.choice([2, 10, 3, 8])), Quality.MAJOR))
        weights = np.append(weights, 1.5)
    weights = weights / weights.sum()
    n_chords = int(rng.integers(4, 12))
    picks = rng.choice(len(pool), size=n_chords, p=weights)
    chords = tuple(Chord(t.transpose(pool[k][0]), pool[k][1]) for k in picks)
    phrases = tuple(
        _phrase(rng, key, int(rng.integers(2, 9)), chromatic=0.03 + 0.12 * style, blues=0.02 + 0.1 * style)
        for _ in range(int(rng.integers(2, 6)))
    )
    return Song(song_id, f"Synthetic {song_id}", author, (Segment(key, chords, phrases),))


def synthetic_corpus(seed: int, n_lennon: int = 39, n_mccartney: int = 31, n_disputed: int = 3) -> Corpus:
    """A corpus of generated songs; McCartney-labeled songs lean toward ii, non-diatonic
    chords, chromatic and blue notes."""
    rng = np.random.default_rng(seed)
    songs = []
    for i in range(n_lennon):
        songs.append(_song(rng, f"lennon{i:02d}", Author.LENNON, float(rng.uniform(0.0, 0.4))))
    for i in range(n_mccartney):
        songs.append(_song(rng, f"mccartney{i:02d}", Author.MCCARTNEY, float(rng.uniform(0.6, 1.0))))
    for i in range(n_disputed):
        songs.append(_song(rng, f"disputed{i + 1}", Author.DISPUTED, float(rng.uniform(0.0, 1.0))))
    return Corpus(tuple(songs))
