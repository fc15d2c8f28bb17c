"""Parsing and validation of MovieLens-1M ``::``-delimited files.

Ratings are held column-wise in numpy arrays (one million rows of Python
objects would be needlessly slow); users and movies are small tuples of
frozen records.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

GENRES = (
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
)
_GENRE_SLOT = {name: i for i, name in enumerate(GENRES)}

AGE_CODES = (1, 18, 25, 35, 45, 50, 56)
AGE3_LABELS = ("young", "adult", "old")
_AGE3 = {1: "young", 18: "young", 25: "young", 35: "adult", 45: "adult", 50: "old", 56: "old"}
GENDERS = ("F", "M")

DELIM = "::"


def reduce_age(age7: int) -> str:
    """Collapse a MovieLens age code into the young/adult/old bands."""
    try:
        return _AGE3[age7]
    except (KeyError, TypeError):
        raise ValidationError(f"unknown age code {age7!r}; expected one of {AGE_CODES}") from None


@dataclass(frozen=True)
class RatingEvent:
    user_id: int
    movie_id: int
    rating: int
    timestamp: int


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    gender: str
    age_code: int
    occupation: int = 0
    zip: str = ""

    def __post_init__(self):
        if self.user_id <= 0:
            raise ValidationError(f"user id must be positive, got {self.user_id}")
        if self.gender not in GENDERS:
            raise ValidationError(f"unknown gender {self.gender!r}; expected M or F")
        if self.age_code not in _AGE3:
            raise ValidationError(f"unknown age code {self.age_code!r}; expected one of {AGE_CODES}")

    @property
    def age3(self) -> str:
        return _AGE3[self.age_code]


@dataclass(frozen=True)
class MovieRecord:
    movie_id: int
    title: str
    genres: tuple[int, ...]

    def __post_init__(self):
        if self.movie_id <= 0:
            raise ValidationError(f"movie id must be positive, got {self.movie_id}")
        if len(self.genres) != len(GENRES) or any(g not in (0, 1) for g in self.genres):
            raise ValidationError(f"movie {self.movie_id}: genres must be an 18-slot 0/1 vector")
        if not any(self.genres):
            raise ValidationError(f"movie {self.movie_id}: at least one genre is required")

    @property
    def genre_names(self) -> list[str]:
        return [name for name, flag in zip(GENRES, self.genres) if flag]


def genre_vector(names: Iterable[str]) -> tuple[int, ...]:
    """Map genre names onto the fixed 18-slot binary vector."""
    flags = [0] * len(GENRES)
    for name in names:
        try:
            flags[_GENRE_SLOT[name]] = 1
        except KeyError:
            raise ValidationError(f"unknown genre {name!r}") from None
    return tuple(flags)


class RatingTable:
    """Column-oriented table of rating events, in input order."""

    __slots__ = ("user_ids", "movie_ids", "ratings", "timestamps")

    def __init__(self, user_ids, movie_ids, ratings, timestamps):
        cols = [np.asarray(c, dtype=np.int64) for c in (user_ids, movie_ids, ratings, timestamps)]
        n = len(cols[0])
        if any(c.ndim != 1 or len(c) != n for c in cols):
            raise ValidationError("rating columns must be 1-d and of equal length")
        for c in cols:
            c.setflags(write=False)
        self.user_ids, self.movie_ids, self.ratings, self.timestamps = cols
        if n and (self.ratings.min() < 1 or self.ratings.max() > 5):
            bad = int(np.flatnonzero((self.ratings < 1) | (self.ratings > 5))[0])
            raise ValidationError(f"rating {int(self.ratings[bad])} at row {bad + 1} outside [1,5]")

    @classmethod
    def from_events(cls, events: Iterable[RatingEvent]) -> RatingTable:
        rows = [(e.user_id, e.movie_id, e.rating, e.timestamp) for e in events]
        if not rows:
            return cls([], [], [], [])
        return cls(*zip(*rows))

    def __len__(self) -> int:
        return len(self.user_ids)

    def __getitem__(self, i: int) -> RatingEvent:
        return RatingEvent(
            int(self.user_ids[i]), int(self.movie_ids[i]), int(self.ratings[i]), int(self.timestamps[i])
        )

    def __iter__(self) -> Iterator[RatingEvent]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatingTable):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name)) for name in self.__slots__
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"RatingTable(n={len(self)})"

    def take(self, index) -> RatingTable:
        return RatingTable(
            self.user_ids[index], self.movie_ids[index], self.ratings[index], self.timestamps[index]
        )


def read_text(path: str | Path) -> str:
    """Decode a file as UTF-8, falling back to Latin-1 (ML-1M titles are Latin-1)."""
    raw = Path(path).read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def _collect(path, n_fields: int, build, rejects: list | None) -> list:
    """Apply ``build`` to the fields of each non-blank line.

    Bad lines raise, or are appended to ``rejects`` as (lineno, line, message)
    when a list is supplied.
    """
    out = []
    for lineno, line in enumerate(read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split(DELIM)
        try:
            if len(parts) != n_fields:
                raise ValidationError(f"expected {n_fields} '::'-separated fields, got {len(parts)}")
            out.append(build(parts))
        except ValueError as exc:
            if rejects is None:
                raise ParseError(str(exc), lineno, str(path)) from None
            rejects.append((lineno, line, str(exc)))
    return out


def _positive_int(token: str, what: str) -> int:
    value = int(token)
    if value <= 0:
        raise ValidationError(f"{what} must be positive, got {value}")
    return value


def parse_ratings(path: str | Path, rejects: list | None = None) -> RatingTable:
    """Parse ``UserID::MovieID::Rating::Timestamp`` lines.

    By default the first bad line raises :class:`ParseError` carrying its line
    number. Passing a list as ``rejects`` switches to lenient mode: bad lines
    are appended as ``(lineno, line, message)`` and skipped.
    """

    def build(parts):
        u = _positive_int(parts[0], "user id")
        m = _positive_int(parts[1], "movie id")
        r = int(parts[2])
        if not 1 <= r <= 5:
            raise ValidationError(f"rating {r} outside [1,5]")
        return u, m, r, int(parts[3])

    rows = _collect(path, 4, build, rejects)
    if not rows:
        return RatingTable([], [], [], [])
    return RatingTable(*zip(*rows))


def parse_users(path: str | Path, rejects: list | None = None) -> list[UserRecord]:
    """Parse ``UserID::Gender::Age::Occupation::Zip-code`` lines."""

    def build(parts):
        return UserRecord(
            _positive_int(parts[0], "user id"), parts[1], int(parts[2]), int(parts[3]), parts[4]
        )

    return _collect(path, 5, build, rejects)


def parse_movies(path: str | Path, rejects: list | None = None) -> list[MovieRecord]:
    """Parse ``MovieID::Title::Genre1|Genre2|...`` lines."""

    def build(parts):
        names = [g for g in parts[2].split("|") if g]
        if not names:
            raise ValidationError("movie has no genres")
        return MovieRecord(_positive_int(parts[0], "movie id"), parts[1], genre_vector(names))

    return _collect(path, 3, build, rejects)


@dataclass(frozen=True)
class Dataset:
    users: tuple[UserRecord, ...]
    movies: tuple[MovieRecord, ...]
    ratings: RatingTable

    __hash__ = None

    @cached_property
    def user_ids(self) -> np.ndarray:
        """Sorted user ids; position in this array is the user's dense index."""
        return np.array(sorted(u.user_id for u in self.users), dtype=np.int64)

    @cached_property
    def user_by_id(self) -> dict[int, UserRecord]:
        return {u.user_id: u for u in self.users}

    @cached_property
    def movie_by_id(self) -> dict[int, MovieRecord]:
        return {m.movie_id: m for m in self.movies}

    @cached_property
    def rating_user_index(self) -> np.ndarray:
        """Dense user index of every rating row."""
        return np.searchsorted(self.user_ids, self.ratings.user_ids)

    @cached_property
    def ratings_per_user(self) -> np.ndarray:
        return np.bincount(self.rating_user_index, minlength=len(self.user_ids))

    def summary(self) -> dict[str, int]:
        return {
            "users": len(self.users),
            "movies": len(self.movies),
            "ratings": len(self.ratings),
            "rated_movies": int(len(np.unique(self.ratings.movie_ids))),
            "users_without_ratings": int(np.sum(self.ratings_per_user == 0)),
        }


def _duplicates(ids: Sequence[int]) -> list[int]:
    values, counts = np.unique(np.asarray(ids, dtype=np.int64), return_counts=True)
    return values[counts > 1].tolist()


def assemble_dataset(
    users: Sequence[UserRecord],
    movies: Sequence[MovieRecord],
    ratings: RatingTable | Sequence[RatingEvent],
) -> Dataset:
    """Cross-validate the three tables and bundle them into a :class:`Dataset`."""
    if not isinstance(ratings, RatingTable):
        ratings = RatingTable.from_events(ratings)
    if len(ratings) == 0:
        raise ValidationError("no ratings")
    if dup := _duplicates([u.user_id for u in users]):
        raise ValidationError(f"duplicate user ids: {dup[:10]}")
    if dup := _duplicates([m.movie_id for m in movies]):
        raise ValidationError(f"duplicate movie ids: {dup[:10]}")

    known_users = np.array([u.user_id for u in users], dtype=np.int64)
    known_movies = np.array([m.movie_id for m in movies], dtype=np.int64)
    missing_u = np.unique(ratings.user_ids[~np.isin(ratings.user_ids, known_users)])
    if len(missing_u):
        raise ValidationError(f"ratings reference unknown users: {missing_u[:10].tolist()}")
    missing_m = np.unique(ratings.movie_ids[~np.isin(ratings.movie_ids, known_movies)])
    if len(missing_m):
        raise ValidationError(f"ratings reference unknown movies: {missing_m[:10].tolist()}")

    pair_key = ratings.user_ids * (int(ratings.movie_ids.max()) + 1) + ratings.movie_ids
    if len(np.unique(pair_key)) != len(ratings):
        keys, counts = np.unique(pair_key, return_counts=True)
        k = int(keys[counts > 1][0])
        m_stride = int(ratings.movie_ids.max()) + 1
        raise ValidationError(f"duplicate rating for (user {k // m_stride}, movie {k % m_stride})")

    ds = Dataset(tuple(users), tuple(movies), ratings)
    s = ds.summary()
    log.info("dataset: %d users, %d movies, %d ratings", s["users"], s["movies"], s["ratings"])
    if s["users_without_ratings"]:
        log.warning("%d users have no ratings", s["users_without_ratings"])
    return ds


def load_movielens(directory: str | Path) -> Dataset:
    """Parse ``ratings.dat``, ``users.dat`` and ``movies.dat`` from one directory."""
    d = Path(directory)
    return assemble_dataset(
        parse_users(d / "users.dat"), parse_movies(d / "movies.dat"), parse_ratings(d / "ratings.dat")
    )


# Canonical CSV dump. Headers are part of the external interface.
USERS_HEADER = ("user_id", "gender", "age", "occupation", "zip")
MOVIES_HEADER = ("movie_id", "title", "genres")
RATINGS_HEADER = ("user_id", "movie_id", "rating", "timestamp")


def dump_canonical(dataset: Dataset, directory: str | Path) -> None:
    """Write ``users.csv``, ``movies.csv`` and ``ratings.csv`` (UTF-8, with header rows)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "users.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(USERS_HEADER)
        w.writerows((u.user_id, u.gender, u.age_code, u.occupation, u.zip) for u in dataset.users)
    with open(d / "movies.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MOVIES_HEADER)
        w.writerows((m.movie_id, m.title, "|".join(m.genre_names)) for m in dataset.movies)
    r = dataset.ratings
    with open(d / "ratings.csv", "w", newline="", encoding="utf-8") as f:
        f.write(",".join(RATINGS_HEADER) + "\n")
        f.writelines(
            f"{u},{m},{v},{t}\n"
            for u, m, v, t in zip(
                r.user_ids.tolist(), r.movie_ids.tolist(), r.ratings.tolist(), r.timestamps.tolist()
            )
        )


def _read_csv(path: Path, header: tuple[str, ...]) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != header:
        raise ParseError(f"expected header {','.join(header)}", 1, str(path))
    return rows[1:]


def load_canonical(directory: str | Path) -> Dataset:
    """Inverse of :func:`dump_canonical`."""
    d = Path(directory)
    users = [
        UserRecord(int(a), g, int(b), int(c), z) for a, g, b, c, z in _read_csv(d / "users.csv", USERS_HEADER)
    ]
    movies = [
        MovieRecord(int(i), title, genre_vector(g.split("|")))
        for i, title, g in _read_csv(d / "movies.csv", MOVIES_HEADER)
    ]
    rows = _read_csv(d / "ratings.csv", RATINGS_HEADER)
    cols = np.array(rows, dtype=np.int64).reshape(-1, 4).T if rows else [[], [], [], []]
    return assemble_dataset(users, movies, RatingTable(*cols))
