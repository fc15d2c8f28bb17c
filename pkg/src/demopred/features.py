"""Per-user feature vectors: averages of movie attributes over a rating subset.

Three subsets are supported:

* ``all``     every movie the user rated,
* ``popular`` only rated movies inside the popular set,
* ``liked``   only movies rated at or above the user's own mean rating.

Each vector has 29 values: 18 genre fractions, 6 MPAA fractions and 5
mean parental-guide scores. The user's demographics travel alongside as
labels and never enter the values.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .enrichment import MPAA, N_FEATURES, PARENTAL, MovieMeta
from .errors import ParseError, ValidationError
from .ingest import AGE3_LABELS, AGE_CODES, GENDERS, GENRES, Dataset, reduce_age
from .popularity import PopularityIndex

log = logging.getLogger(__name__)

STRATEGIES = ("all", "popular", "liked")
TARGETS = ("gender", "age7", "age3")
TARGET_CLASSES = {"gender": GENDERS, "age7": AGE_CODES, "age3": AGE3_LABELS}


def _slug(name: str) -> str:
    return name.lower().replace("'", "").replace("-", "_")


FEATURE_NAMES = (
    tuple(f"genre_{_slug(g)}" for g in GENRES)
    + tuple(f"mpaa_{_slug(m)}" for m in MPAA)
    + tuple(f"pg_{p}" for p in PARENTAL)
)
FEATURE_GROUPS = {
    "genre": slice(0, len(GENRES)),
    "mpaa": slice(len(GENRES), len(GENRES) + len(MPAA)),
    "parental": slice(len(GENRES) + len(MPAA), N_FEATURES),
}


def feature_columns(groups: Iterable[str]) -> list[int]:
    """Column indices for a subset of {"genre", "mpaa", "parental"}, in slot order."""
    groups = set(groups)
    if unknown := groups - FEATURE_GROUPS.keys():
        raise ValidationError(f"unknown feature groups {sorted(unknown)}")
    if not groups:
        raise ValidationError("at least one feature group is required")
    cols = []
    for name, sl in FEATURE_GROUPS.items():
        if name in groups:
            cols.extend(range(sl.start, sl.stop))
    return cols


@dataclass(frozen=True)
class LabelSet:
    gender: str
    age7: int
    age3: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"unknown gender {self.gender!r}")
        if reduce_age(self.age7) != self.age3:
            raise ValidationError(f"age3 {self.age3!r} does not match age code {self.age7}")

    def get(self, target: str):
        if target not in TARGETS:
            raise ValidationError(f"target must be one of {TARGETS}, got {target!r}")
        return getattr(self, target)


@dataclass(frozen=True)
class FeatureVector:
    user_id: int
    strategy: str
    values: tuple[float, ...]
    support_count: int
    labels: LabelSet


@dataclass(frozen=True)
class FeatureSet:
    """Vectors of one strategy in ascending user order, plus users left out."""

    strategy: str
    vectors: tuple[FeatureVector, ...]
    dropped: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.vectors)

    def __iter__(self) -> Iterator[FeatureVector]:
        return iter(self.vectors)

    def __getitem__(self, i):
        return self.vectors[i]

    @property
    def user_ids(self) -> list[int]:
        return [v.user_id for v in self.vectors]

    def matrix(self, columns: Sequence[int] | None = None) -> np.ndarray:
        X = np.array([v.values for v in self.vectors], dtype=np.float64).reshape(-1, N_FEATURES)
        return X if columns is None else X[:, list(columns)]

    def labels(self, target: str) -> list:
        return [v.labels.get(target) for v in self.vectors]

    def total_support(self) -> int:
        return sum(v.support_count for v in self.vectors)


def _attribute_matrix(dataset: Dataset, meta: Iterable[MovieMeta]) -> tuple[np.ndarray, np.ndarray]:
    """Row of each rating's movie in a (movies x 29) attribute table, plus the table."""
    metas = list(meta)
    ids = np.array([m.movie_id for m in metas], dtype=np.int64)
    table = np.array([m.vector() for m in metas], dtype=np.float64).reshape(-1, N_FEATURES)
    order = np.argsort(ids)
    ids, table = ids[order], table[order]
    rated = dataset.ratings.movie_ids
    if len(ids) == 0:
        raise ValidationError("no movie metadata supplied")
    rows = np.searchsorted(ids, rated).clip(max=len(ids) - 1)
    missing = ids[rows] != rated
    if np.any(missing):
        absent = np.unique(rated[missing])
        raise ValidationError(f"no movie metadata for rated movies {absent[:10].tolist()}")
    return rows, table


def _labels(dataset: Dataset, user_id: int) -> LabelSet:
    u = dataset.user_by_id[user_id]
    return LabelSet(u.gender, u.age_code, u.age3)


def _average(dataset: Dataset, meta, mask: np.ndarray, strategy: str) -> FeatureSet:
    rows, table = _attribute_matrix(dataset, meta)
    n_users = len(dataset.user_ids)
    users = dataset.rating_user_index[mask]
    rows = rows[mask]
    support = np.bincount(users, minlength=n_users)
    sums = np.empty((n_users, N_FEATURES))
    for j in range(N_FEATURES):
        sums[:, j] = np.bincount(users, weights=table[rows, j], minlength=n_users)

    vectors, dropped = [], []
    for idx, user_id in enumerate(dataset.user_ids.tolist()):
        n = int(support[idx])
        if n == 0:
            dropped.append(user_id)
            continue
        values = tuple((sums[idx] / n).tolist())
        vectors.append(FeatureVector(user_id, strategy, values, n, _labels(dataset, user_id)))
    if dropped:
        log.warning("%s: %d users have no qualifying ratings and were dropped", strategy, len(dropped))
    return FeatureSet(strategy, tuple(vectors), tuple(dropped))


def build_all_items(dataset: Dataset, meta: Iterable[MovieMeta]) -> FeatureSet:
    return _average(dataset, meta, np.ones(len(dataset.ratings), dtype=bool), "all")


def build_alpha_popular(dataset: Dataset, meta: Iterable[MovieMeta], index: PopularityIndex) -> FeatureSet:
    """Average over popular movies only; users with none of them are dropped."""
    return _average(dataset, meta, index.is_popular(dataset.ratings.movie_ids), "popular")


def liked_mask(dataset: Dataset) -> np.ndarray:
    """Ratings at or above the rater's own mean (compared exactly, in integers)."""
    users = dataset.rating_user_index
    r = dataset.ratings.ratings
    n = np.bincount(users, minlength=len(dataset.user_ids))
    total = np.bincount(users, weights=r, minlength=len(dataset.user_ids)).astype(np.int64)
    # r >= total/n  <=>  r*n >= total
    return r * n[users] >= total[users]


def build_liked(dataset: Dataset, meta: Iterable[MovieMeta]) -> FeatureSet:
    return _average(dataset, meta, liked_mask(dataset), "liked")


def build_features(
    dataset: Dataset, meta: Iterable[MovieMeta], strategy: str, index: PopularityIndex | None = None
) -> FeatureSet:
    if strategy == "all":
        return build_all_items(dataset, meta)
    if strategy == "popular":
        if index is None:
            raise ValidationError("the popular strategy needs a popularity index")
        return build_alpha_popular(dataset, meta, index)
    if strategy == "liked":
        return build_liked(dataset, meta)
    raise ValidationError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")


FEATURE_HEADER = ("user_id", "strategy", *FEATURE_NAMES, "support_count", "gender", "age7", "age3")


def export_features(vectors: Iterable[FeatureVector], path: str | Path) -> None:
    """Write vectors as CSV, sorted by user id then strategy."""
    rank = {s: i for i, s in enumerate(STRATEGIES)}
    rows = sorted(vectors, key=lambda v: (v.user_id, rank.get(v.strategy, len(rank))))
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for v in rows:
            lab = v.labels
            w.writerow(
                [v.user_id, v.strategy, *map(repr, v.values), v.support_count, lab.gender, lab.age7, lab.age3]
            )


def import_features(path: str | Path) -> FeatureSet:
    """Read a file written by :func:`export_features` (all rows must share one strategy)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != FEATURE_HEADER:
            raise ParseError("not a feature file (header mismatch)", 1, str(path))
        vectors = []
        for lineno, row in enumerate(reader, 2):
            try:
                if len(row) != len(FEATURE_HEADER):
                    raise ValidationError(f"expected {len(FEATURE_HEADER)} fields, got {len(row)}")
                values = tuple(float(x) for x in row[2 : 2 + N_FEATURES])
                tail = row[2 + N_FEATURES :]
                vectors.append(
                    FeatureVector(
                        int(row[0]), row[1], values, int(tail[0]), LabelSet(tail[1], int(tail[2]), tail[3])
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    strategies = {v.strategy for v in vectors}
    if len(strategies) > 1:
        raise ValidationError(f"feature file mixes strategies {sorted(strategies)}")
    strategy = strategies.pop() if strategies else "all"
    return FeatureSet(strategy, tuple(vectors))
