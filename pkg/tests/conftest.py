from __future__ import annotations
import sys

import pytest

from demopred.enrichment import MovieEnrichment, merge_meta, mpaa_vector, synth_enrichment
from demopred.ingest import MovieRecord, RatingEvent, UserRecord, assemble_dataset, genre_vector
from demopred.synthetic import make_dataset, write_movielens

# Hand dataset shared by the feature, popularity and liked-set oracles.
HAND_MOVIES = {
    1: (("Action", "Comedy"), "R", (3, 2, 1, 0, 0)),
    2: (("Drama",), "PG", (0, 1, 0, 0, 1)),
    3: (("Action",), "PG-13", (1, 1, 1, 1, 1)),
    4: (("Comedy", "Romance"), "G", (0, 0, 0, 0, 0)),
}
HAND_USERS = ((1, "M", 25), (2, "F", 56), (3, "M", 1))
HAND_RATINGS = (
    (1, 1, 5, 100),
    (1, 2, 3, 101),
    (1, 3, 4, 102),
    (2, 2, 2, 200),
    (2, 4, 4, 201),
    (3, 1, 2, 300),
    (3, 4, 2, 301),
)


def hand_parts():
    users = [UserRecord(u, g, a) for u, g, a in HAND_USERS]
    movies = [MovieRecord(m, f"Movie {m}", genre_vector(g)) for m, (g, _, _) in HAND_MOVIES.items()]
    enrich = {m: MovieEnrichment(m, mpaa_vector(c), p) for m, (_, c, p) in HAND_MOVIES.items()}
    ratings = [RatingEvent(*r) for r in HAND_RATINGS]
    return users, movies, ratings, enrich


@pytest.fixture
def hand():
    users, movies, ratings, enrich = hand_parts()
    dataset = assemble_dataset(users, movies, ratings)
    meta, _ = merge_meta(dataset.movies, enrich)
    return dataset, meta


@pytest.fixture(scope="session")
def synth():
    dataset = make_dataset(n_users=300, n_movies=200, seed=0)
    meta, _ = merge_meta(dataset.movies, synth_enrichment(dataset.movies, 0))
    return dataset, meta


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory, synth):
    d = tmp_path_factory.mktemp("ml")
    write_movielens(synth[0], d)
    return d


def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
