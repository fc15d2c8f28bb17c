"""MPAA certificate and parental-guide side data for movies.

The sidecar is a local CSV::

    movie_id,mpaa,pg_sex,pg_violence,pg_profanity,pg_alcohol,pg_frightening
    1,G,0,1,0,0,1

When preparing it from IMDB parental-guide pages, severities map as
none=0, mild=1, moderate=2, severe=3.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .ingest import GENRES, MovieRecord

log = logging.getLogger(__name__)

MPAA = ("G", "PG", "PG-13", "R", "NC-17", "UNRATED")
PARENTAL = ("sex", "violence", "profanity", "alcohol", "frightening")
ENRICHMENT_HEADER = ("movie_id", "mpaa") + tuple(f"pg_{p}" for p in PARENTAL)
SEVERITY = {"none": 0, "mild": 1, "moderate": 2, "severe": 3}
MAX_SEVERITY = 3.0

# Used only by the synthetic generator.
SYNTH_MPAA_PROBS = (0.06, 0.16, 0.22, 0.38, 0.02, 0.16)

N_FEATURES = len(GENRES) + len(MPAA) + len(PARENTAL)


def mpaa_vector(category: str) -> tuple[int, ...]:
    try:
        slot = MPAA.index(category)
    except ValueError:
        raise ValidationError(f"unknown MPAA category {category!r}; expected one of {MPAA}") from None
    return tuple(int(i == slot) for i in range(len(MPAA)))


def _check_parental(movie_id, parental) -> tuple[float, ...]:
    if len(parental) != len(PARENTAL):
        raise ValidationError(f"movie {movie_id}: parental vector needs {len(PARENTAL)} entries")
    values = tuple(float(p) for p in parental)
    for name, p in zip(PARENTAL, values):
        if not (math.isfinite(p) and 0.0 <= p <= MAX_SEVERITY):
            raise ValidationError(f"movie {movie_id}: {name} score {p} outside [0,3]")
    return values


@dataclass(frozen=True)
class MovieEnrichment:
    movie_id: int
    mpaa: tuple[int, ...]
    parental: tuple[float, ...]

    def __post_init__(self):
        if len(self.mpaa) != len(MPAA) or sorted(self.mpaa) != [0] * (len(MPAA) - 1) + [1]:
            raise ValidationError(f"movie {self.movie_id}: exactly one MPAA flag must be set")
        object.__setattr__(self, "parental", _check_parental(self.movie_id, self.parental))

    @property
    def mpaa_category(self) -> str:
        return MPAA[self.mpaa.index(1)]


@dataclass(frozen=True)
class MovieMeta:
    """Everything the feature builders need to know about one movie."""

    movie_id: int
    genres: tuple[int, ...]
    mpaa: tuple[int, ...]
    parental: tuple[float, ...]

    def vector(self) -> np.ndarray:
        """The 29 per-movie attributes that user features average over."""
        return np.array(self.genres + self.mpaa + self.parental, dtype=np.float64)


def _default(movie_id: int) -> MovieEnrichment:
    return MovieEnrichment(movie_id, mpaa_vector("UNRATED"), (0.0,) * len(PARENTAL))


def load_enrichment(path: str | Path) -> dict[int, MovieEnrichment]:
    """Read and validate an enrichment sidecar CSV."""
    path = Path(path)
    out: dict[int, MovieEnrichment] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ENRICHMENT_HEADER:
            raise ParseError(f"expected header {','.join(ENRICHMENT_HEADER)}", 1, str(path))
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            try:
                if len(row) != len(ENRICHMENT_HEADER):
                    raise ValidationError(f"expected {len(ENRICHMENT_HEADER)} fields, got {len(row)}")
                movie_id = int(row[0])
                if movie_id <= 0:
                    raise ValidationError(f"movie id must be positive, got {movie_id}")
                if movie_id in out:
                    raise ValidationError(f"duplicate movie_id {movie_id}")
                out[movie_id] = MovieEnrichment(
                    movie_id, mpaa_vector(row[1].strip().upper()), tuple(float(v) for v in row[2:])
                )
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    return out


def write_enrichment(enrich: Mapping[int, MovieEnrichment], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ENRICHMENT_HEADER)
        for movie_id in sorted(enrich):
            e = enrich[movie_id]
            w.writerow([movie_id, e.mpaa_category, *(_fmt(p) for p in e.parental)])


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def merge_meta(
    movies: Sequence[MovieRecord], enrich: Mapping[int, MovieEnrichment]
) -> tuple[list[MovieMeta], float]:
    """Join genres with enrichment; uncovered movies become unrated with zero scores.

    Returns the merged list (same order as ``movies``) and the fraction of
    movies that had an enrichment row.
    """
    metas = []
    covered = 0
    for m in movies:
        e = enrich.get(m.movie_id)
        if e is None:
            e = _default(m.movie_id)
        else:
            covered += 1
        metas.append(MovieMeta(m.movie_id, m.genres, e.mpaa, e.parental))
    coverage = covered / len(movies) if movies else 1.0
    log.info("enrichment coverage %.3f (%d/%d movies)", coverage, covered, len(movies))
    return metas, coverage


def synth_enrichment(movies: Iterable[MovieRecord], seed: int) -> dict[int, MovieEnrichment]:
    """Deterministic fake enrichment for tests and offline runs.

    Each movie draws from its own generator keyed on ``(seed, movie_id)``, so
    a movie's row does not depend on which other movies are present.
    """
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    out = {}
    for m in movies:
        rng = np.random.default_rng([seed, m.movie_id])
        slot = int(rng.choice(len(MPAA), p=SYNTH_MPAA_PROBS))
        parental = tuple(float(v) for v in rng.integers(0, 4, size=len(PARENTAL)))
        out[m.movie_id] = MovieEnrichment(m.movie_id, mpaa_vector(MPAA[slot]), parental)
    return out
