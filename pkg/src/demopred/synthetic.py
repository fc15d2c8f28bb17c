"""Small ML-1M-shaped datasets for tests and demos.

Movie popularity follows a Zipf law, so a few movies collect most ratings.
Genre preferences depend on gender and age band, so genre averages carry a
learnable demographic signal. Each user rates popular movies earlier on
average, so the popular share of a user's k-th rating falls as k grows.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import (
    AGE_CODES,
    DELIM,
    GENRES,
    Dataset,
    MovieRecord,
    RatingEvent,
    RatingTable,
    UserRecord,
    assemble_dataset,
)

# ML-1M marginal proportions, rounded
AGE_PROBS = (0.04, 0.18, 0.35, 0.20, 0.09, 0.08, 0.06)
MALE_SHARE = 0.72

_GENDER_TASTE = {
    "F": {"Romance": 1.2, "Drama": 0.8, "Musical": 0.9, "Children's": 0.6},
    "M": {"Action": 1.0, "Sci-Fi": 1.0, "War": 0.8, "Thriller": 0.6, "Western": 0.6},
}
_AGE3_TASTE = {
    "young": {"Animation": 0.8, "Comedy": 0.6, "Horror": 0.8},
    "adult": {"Crime": 0.5, "Thriller": 0.4},
    "old": {"Film-Noir": 1.0, "War": 0.6, "Documentary": 0.8, "Western": 0.6},
}


def make_dataset(
    n_users: int = 300,
    n_movies: int = 200,
    *,
    mean_ratings: int = 40,
    min_ratings: int = 20,
    zipf: float = 1.1,
    seed: int = 0,
) -> Dataset:
    if n_users < 1 or n_movies < min_ratings or min_ratings < 1:
        raise ValueError("need n_users >= 1 and n_movies >= min_ratings >= 1")
    rng = np.random.default_rng(seed)
    g_index = {g: i for i, g in enumerate(GENRES)}

    movies = []
    genre_mat = np.zeros((n_movies, len(GENRES)))
    for j in range(n_movies):
        k = int(rng.integers(1, 4))
        genre_mat[j, rng.choice(len(GENRES), size=k, replace=False)] = 1.0
        movies.append(MovieRecord(j + 1, f"Movie {j + 1} ({1950 + j % 50})", tuple(int(x) for x in genre_mat[j])))
    rank = rng.permutation(n_movies)
    base = 1.0 / (rank + 1.0) ** zipf

    users, events = [], []
    t = 956_703_932
    for u in range(1, n_users + 1):
        gender = "M" if rng.random() < MALE_SHARE else "F"
        age = int(rng.choice(AGE_CODES, p=AGE_PROBS))
        user = UserRecord(u, gender, age, int(rng.integers(0, 21)), f"{rng.integers(10000, 99999)}")
        users.append(user)
        taste = np.zeros(len(GENRES))
        for table in (_GENDER_TASTE[gender], _AGE3_TASTE[user.age3]):
            for name, w in table.items():
                taste[g_index[name]] += w
        affinity = np.exp(genre_mat @ taste / np.maximum(genre_mat.sum(axis=1), 1))
        p = base * affinity
        p /= p.sum()
        n = int(np.clip(min_ratings + rng.geometric(1.0 / max(mean_ratings - min_ratings, 1)), min_ratings, n_movies))
        chosen = rng.choice(n_movies, size=n, replace=False, p=p)
        # weighted sampling without replacement already favours popular movies
        # early; an extra sort on a noisy popularity key sharpens that drift
        key = -np.log(base[chosen]) + rng.normal(0.0, 2.0, size=n)
        chosen = chosen[np.argsort(key, kind="stable")]
        bias = rng.normal(0.0, 0.5)
        for j in chosen:
            score = 3.6 + bias + 0.6 * float(genre_mat[j] @ taste) / max(genre_mat[j].sum(), 1) + rng.normal(0, 0.9)
            t += int(rng.integers(1, 600))
            events.append(RatingEvent(u, int(j) + 1, int(np.clip(round(score), 1, 5)), t))
    return assemble_dataset(users, movies, RatingTable.from_events(events))


def write_movielens(dataset: Dataset, directory: str | Path) -> dict[str, Path]:
    """Write ``users.dat``, ``movies.dat`` and ``ratings.dat`` in the ML-1M layout."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"users": d / "users.dat", "movies": d / "movies.dat", "ratings": d / "ratings.dat"}
    paths["users"].write_text(
        "".join(
            DELIM.join((str(u.user_id), u.gender, str(u.age_code), str(u.occupation), u.zip)) + "\n"
            for u in dataset.users
        ),
        encoding="latin-1",
    )
    paths["movies"].write_text(
        "".join(f"{m.movie_id}{DELIM}{m.title}{DELIM}{'|'.join(m.genre_names)}\n" for m in dataset.movies),
        encoding="latin-1",
    )
    r = dataset.ratings
    paths["ratings"].write_text(
        "".join(
            DELIM.join(map(str, row)) + "\n"
            for row in zip(r.user_ids.tolist(), r.movie_ids.tolist(), r.ratings.tolist(), r.timestamps.tolist())
        ),
        encoding="latin-1",
    )
    return paths
