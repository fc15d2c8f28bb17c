
import pytest

from demopred.errors import ValidationError
from demopred.experiments import (
    CellResult,
    ExperimentConfig,
    ResultGrid,
    load_config,
    reduce_age,
    render_tables,
    run_grid,
    write_outputs,
)
from demopred.ingest import MovieRecord, RatingEvent, UserRecord, genre_vector
from demopred.synthetic import make_dataset, write_movielens

FAST = {"rf": {"n_trees": 10}, "mlp": {"epochs": 10}, "xgb": {"n_rounds": 10}}


def config(d, **kw):
    base = dict(
        ratings=str(d / "ratings.dat"),
        users=str(d / "users.dat"),
        movies=str(d / "movies.dat"),
        seeds=(42, 43),
        hyperparams=FAST,
        output_dir=str(d / "out"),
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("grid")
    write_movielens(make_dataset(n_users=120, n_movies=80, seed=3), d)
    return d


@pytest.fixture(scope="module")
def grid(small_dir):
    return run_grid(config(small_dir), resume=False)


def test_one_cell_per_request(grid):
    assert len(grid.cells) == 3 * 5 * 3
    assert all(c.ok for c in grid.cells.values())
    assert all(len(c.runs) == 2 for c in grid.cells.values())


def test_common_split_across_strategies(grid):
    for target in ("gender", "age3"):
        sizes = {(c.runs[0]["n_train"], c.runs[0]["n_test"]) for k, c in grid.cells.items() if k[2] == target and k[0] != "popular"}
        assert len(sizes) == 1


def test_metadata_conservation(grid):
    a = grid.analysis
    total = a["dataset"]["ratings"]
    assert a["strategies"]["all"]["support"] == total
    assert a["strategies"]["popular"]["support"] + a["unpopular_ratings"] == total
    assert a["strategies"]["liked"]["support"] == a["liked_ratings"]
    assert grid.cell("all", "knn", "gender").meta["support"] == total


def test_json_round_trip(grid):
    again = ResultGrid.from_json(grid.to_json())
    assert again.to_json() == grid.to_json()


def test_tables_shape_and_agreement(grid):
    tables = render_tables(grid, "accuracy")
    assert set(tables) == {"gender", "age7", "age3"}
    text, csv_text = tables["gender"]
    rows = csv_text.strip().splitlines()
    assert rows[0] == "strategy,ratings,KNN,NaiveBayes,RandomForest,MLP,GradientBoost"
    assert [r.split(",")[0] for r in rows[1:]] == ["all", "popular", "liked"]
    text_rows = text.strip().splitlines()[2:]
    for t, c in zip(text_rows, rows[1:]):
        shown = t.split()[-5:]
        assert shown == [f"{float(v):.2f}" for v in c.split(",")[2:]]


def test_failed_cell_renders_dash(grid):
    cells = dict(grid.cells)
    cells[("popular", "rf", "gender")] = CellResult("popular", "rf", "gender", error="boom")
    text, csv_text = render_tables(ResultGrid(grid.config, cells, grid.analysis))["gender"]
    assert "—" in text and "—" in csv_text.splitlines()[2]
    del cells[("liked", "nb", "gender")]
    text, _ = render_tables(ResultGrid(grid.config, cells, grid.analysis))["gender"]
    assert text.count("—") == 2


def test_outputs_written(grid, tmp_path):
    names = {p.name for p in write_outputs(grid, tmp_path)}
    assert {"grid.json", "fig1_histogram.csv", "fig2_portion.csv", "table_accuracy_gender.csv"} <= names
    assert "wall" not in (tmp_path / "grid.json").read_text()
    assert (tmp_path / "fig2_portion.csv").read_text().startswith("k,portion\n1,")


def test_threads_and_resume_do_not_change_output(small_dir, grid, tmp_path):
    cfg = config(small_dir, output_dir=str(tmp_path / "a"))
    threaded = run_grid(cfg, threads=3, resume=False)
    assert threaded.to_json() == grid.to_json()
    lines = (tmp_path / "a" / "grid.checkpoint.jsonl").read_text().splitlines()
    # drop half the finished runs and truncate the last, as after a crash
    kept = lines[: len(lines) // 2] + [lines[len(lines) // 2][:20]]
    (tmp_path / "a" / "grid.checkpoint.jsonl").write_text("\n".join(kept) + "\n")
    assert run_grid(cfg, resume=True).to_json() == grid.to_json()


def test_tiny_dataset_records_cell_errors(tmp_path, caplog):
    users = [UserRecord(1, "M", 25), UserRecord(2, "F", 35), UserRecord(3, "M", 56)]
    movies = [MovieRecord(i, "m", genre_vector(["Drama"])) for i in (1, 2)]
    from demopred.ingest import assemble_dataset

    ds = assemble_dataset(users, movies, [RatingEvent(u, 1 + u % 2, 3, u) for u in (1, 2, 3)])
    write_movielens(ds, tmp_path)
    grid = run_grid(config(tmp_path, seeds=(1,)), resume=False)
    assert len(grid.cells) == 45
    failed = [c for c in grid.cells.values() if not c.ok]
    assert failed and all(c.error for c in failed)
    assert all(not c.ok for k, c in grid.cells.items() if k[2] == "age7")
    assert "all placed in train" in caplog.text
    write_outputs(grid, tmp_path / "out")
    assert "—" in (tmp_path / "out" / "table_accuracy_gender.csv").read_text()


def test_config_file_and_env_overrides(tmp_path, small_dir):
    p = tmp_path / "cfg.toml"
    p.write_text(
        'ratings = "r.dat"\nusers = "u.dat"\nmovies = "m.dat"\nalpha = 0.1\nseeds = [1]\n'
        'targets = ["gender"]\n[hyperparams.knn]\nk = 5\n'
    )
    cfg = load_config(p, env={"DEMOPRED_RATINGS": str(small_dir / "ratings.dat")})
    assert cfg.ratings == str(small_dir / "ratings.dat")
    assert cfg.users == str(tmp_path / "u.dat")
    assert cfg.alpha == 0.1 and cfg.seeds == (1,) and cfg.spec("knn", 1).hyperparams == {"k": 5}


@pytest.mark.parametrize(
    "text, message",
    [
        ('ratings="r"\nusers="u"\nmovies="m"\nalpha=1.5\n', "alpha"),
        ('ratings="r"\nusers="u"\nmovies="m"\ncolour=1\n', "unknown config keys"),
        ('ratings="r"\nusers="u"\n', "movies"),
        ('ratings="r"\nusers="u"\nmovies="m"\nstrategies=["recent"]\n', "strategies"),
        ('ratings="r"\nusers="u"\nmovies="m"\n[hyperparams.knn]\nk=0\n', "k must be"),
        ("ratings = [", "ratings"),
    ],
)
def test_config_validation(tmp_path, text, message):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    with pytest.raises(ValidationError, match=message):
        load_config(p, env={})


def test_missing_input_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        run_grid(config(tmp_path))


def test_reduce_age_reexported():
    assert reduce_age(35) == "adult"


def test_fingerprint_ignores_output_dir(small_dir, tmp_path):
    assert config(small_dir).fingerprint() == config(small_dir, output_dir=str(tmp_path)).fingerprint()
    assert config(small_dir).fingerprint() != config(small_dir, alpha=0.1).fingerprint()
