"""Movie popularity ranking and the long-tail analyses built on it."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .ingest import Dataset

log = logging.getLogger(__name__)

POPULARITY_METRICS = ("count", "mean_score")


@dataclass(frozen=True)
class PopularityIndex:
    ranked_movie_ids: tuple[int, ...]
    counts: dict[int, int]
    alpha: float
    popular_set: frozenset[int]
    metric: str = "count"

    __hash__ = None

    def is_popular(self, movie_ids: np.ndarray) -> np.ndarray:
        pop = np.fromiter(self.popular_set, dtype=np.int64, count=len(self.popular_set))
        return np.isin(movie_ids, pop)

    def ratings_coverage(self) -> float:
        """Share of all ratings that land on popular movies."""
        total = sum(self.counts.values())
        return sum(self.counts[m] for m in self.popular_set) / total if total else 0.0

    def summary(self) -> dict:
        return {
            "metric": self.metric,
            "alpha": self.alpha,
            "rated_movies": len(self.ranked_movie_ids),
            "popular_movies": len(self.popular_set),
            "popular_ratings": sum(self.counts[m] for m in self.popular_set),
            "total_ratings": sum(self.counts.values()),
            "ratings_coverage": self.ratings_coverage(),
            "min_popular_count": min((self.counts[m] for m in self.popular_set), default=0),
        }


def _movie_stats(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ids, inverse, counts = np.unique(dataset.ratings.movie_ids, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=dataset.ratings.ratings, minlength=len(ids))
    return ids, counts, sums / counts


def _rank(dataset: Dataset, metric: str) -> tuple[np.ndarray, np.ndarray]:
    """Rated movie ids in descending popularity (ties: ascending id), with counts."""
    if metric not in POPULARITY_METRICS:
        raise ValidationError(f"popularity metric must be one of {POPULARITY_METRICS}, got {metric!r}")
    if len(dataset.ratings) == 0:
        raise ValidationError("no ratings")
    ids, counts, means = _movie_stats(dataset)
    score = counts if metric == "count" else means
    # ids are already ascending, so a stable sort on -score breaks ties by id.
    order = np.argsort(-score, kind="stable")
    return ids[order], counts[order]


def _index(ids, counts, n_popular, alpha, metric) -> PopularityIndex:
    return PopularityIndex(
        ranked_movie_ids=tuple(ids.tolist()),
        counts=dict(zip(ids.tolist(), counts.tolist())),
        alpha=alpha,
        popular_set=frozenset(ids[:n_popular].tolist()),
        metric=metric,
    )


def popular_size(alpha: float, n_rated: int) -> int:
    """ceil(alpha * n_rated), immune to float noise such as 0.07 * 100."""
    return math.ceil(round(alpha * n_rated, 9))


def build_index(dataset: Dataset, alpha: float, metric: str = "count") -> PopularityIndex:
    """Take the top ``alpha`` fraction of rated movies as the popular set."""
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha <= 1.0):
        raise ValidationError(f"alpha must be in (0, 1], got {alpha}")
    ids, counts = _rank(dataset, metric)
    index = _index(ids, counts, popular_size(alpha, len(ids)), float(alpha), metric)
    log.info(
        "popular set: %d of %d rated movies, %.4f of ratings",
        len(index.popular_set), len(ids), index.ratings_coverage(),
    )
    return index


def build_index_by_threshold(dataset: Dataset, min_count: int) -> PopularityIndex:
    """Popular = rated at least ``min_count`` times; ``alpha`` records the resulting fraction."""
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")
    ids, counts = _rank(dataset, "count")
    n = int(np.sum(counts >= min_count))
    if n == 0:
        log.warning("no movie is rated %d or more times; popular set is empty", min_count)
    return _index(ids, counts, n, n / len(ids), "count")


def frequency_histogram(dataset: Dataset) -> list[tuple[int, int]]:
    """(rank, count) pairs with counts in descending order, ranks from 1."""
    counts = np.sort(np.unique(dataset.ratings.movie_ids, return_counts=True)[1])[::-1]
    return [(rank, int(c)) for rank, c in enumerate(counts.tolist(), 1)]


def chronological_positions(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Order ratings per user by time and give each its 1-based position.

    Timestamp ties keep input order. Returns (row order, position of each
    row in that order).
    """
    r = dataset.ratings
    order = np.lexsort((np.arange(len(r)), r.timestamps, r.user_ids))
    users = r.user_ids[order]
    starts = np.r_[0, np.flatnonzero(users[1:] != users[:-1]) + 1]
    run_lengths = np.diff(np.r_[starts, len(users)])
    first = np.repeat(starts, run_lengths)
    return order, np.arange(len(users)) - first + 1


def popular_portion_by_rating_order(dataset: Dataset, index: PopularityIndex) -> list[tuple[int, float]]:
    """For each position k, the share of users whose k-th rating is a popular movie.

    Only users with at least k ratings enter the k-th denominator.
    """
    if len(dataset.ratings) == 0:
        return []
    order, position = chronological_positions(dataset)
    popular = index.is_popular(dataset.ratings.movie_ids[order])
    having_k = np.bincount(position)
    hits = np.bincount(position, weights=popular.astype(np.float64), minlength=len(having_k))
    return [(k, float(hits[k] / having_k[k])) for k in range(1, len(having_k))]


def write_curve(rows: Iterable[tuple], header: tuple[str, str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows((a, repr(b) if isinstance(b, float) else b) for a, b in rows)
