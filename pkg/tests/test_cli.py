import argparse
import json
import subprocess
import sys


from demopred.cli import build_parser, main

FAST_TOML = """
ratings = "{d}/ratings.dat"
users = "{d}/users.dat"
movies = "{d}/movies.dat"
seeds = [42]
targets = ["gender"]
classifiers = ["knn", "nb"]
"""


def data_flags(d):
    return ["--ratings", str(d / "ratings.dat"), "--users", str(d / "users.dat"), "--movies", str(d / "movies.dat")]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ingest_json(capsys, synth_dir, tmp_path):
    code, out, _ = run(capsys, "ingest", *data_flags(synth_dir), "--json", "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["users"] == 300
    assert (tmp_path / "ratings.csv").exists()


def test_missing_file_is_io_error(capsys, synth_dir, tmp_path):
    flags = data_flags(synth_dir)
    flags[1] = str(tmp_path / "missing.dat")
    code, out, err = run(capsys, "ingest", *flags)
    assert code == 2 and out == "" and "missing.dat" in err


def test_alpha_out_of_range(capsys, synth_dir):
    code, _, err = run(capsys, "features", "--strategy", "popular", "--alpha", "1.5", *data_flags(synth_dir))
    assert code == 1 and "alpha must be in (0, 1]" in err


def test_json_error_document(capsys, synth_dir):
    code, out, err = run(capsys, "features", "--alpha", "0", "--json", *data_flags(synth_dir))
    doc = json.loads(err)
    assert code == 1 and out == "" and doc["error"]["exit_code"] == 1


def test_unknown_flag_rejected(capsys):
    code, _, err = run(capsys, "report", "--grid", "x.json", "--bogus")
    assert code == 1 and "--bogus" in err


def test_malformed_data_is_validation_error(capsys, tmp_path, synth_dir):
    bad = tmp_path / "ratings.dat"
    bad.write_text("1::1::9::0\n")
    flags = data_flags(synth_dir)
    flags[1] = str(bad)
    code, _, err = run(capsys, "ingest", *flags)
    assert code == 1 and ":1:" in err


def test_pipeline_and_byte_identical_reruns(capsys, synth_dir, tmp_path):
    outputs = []
    for attempt in ("a", "b"):
        out = tmp_path / attempt
        assert run(capsys, "enrich", "--movies", str(synth_dir / "movies.dat"), "--seed", "3", "--out", str(out))[0] == 0
        enrichment = str(out / "enrichment.csv")
        assert run(capsys, "popularity", *data_flags(synth_dir), "--out", str(out))[0] == 0
        code, text, _ = run(
            capsys, "features", *data_flags(synth_dir), "--enrichment", enrichment, "--strategy", "popular", "--out", str(out)
        )
        assert code == 0 and "dropped_users" in text
        feats = str(out / "features_popular.csv")
        code, _, _ = run(
            capsys, "train", "--features", feats, "--classifier", "xgb", "--param", "n_rounds=5",
            "--target", "age3", "--seed", "1", "--out", str(out),
        )
        assert code == 0
        code, report, _ = run(
            capsys, "evaluate", "--features", feats, "--model", str(out / "model.json"),
            "--target", "age3", "--seed", "1", "--json", "--out", str(out),
        )
        assert code == 0 and 0 <= json.loads(report)["accuracy"] <= 1
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert {"enrichment.csv", "fig1_histogram.csv", "fig2_portion.csv", "popular.csv", "model.json", "report.json"} <= set(outputs[0])


def test_train_rejects_bad_param(capsys, synth_dir, tmp_path):
    run(capsys, "features", *data_flags(synth_dir), "--out", str(tmp_path))
    code, _, err = run(capsys, "train", "--features", str(tmp_path / "features_all.csv"), "--classifier", "knn", "--param", "k=0")
    assert code == 1 and "k must be" in err


def test_grid_and_report(capsys, synth_dir, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(FAST_TOML.format(d=synth_dir.as_posix()))
    for name, threads in (("one", "1"), ("two", "2")):
        code, out, err = run(capsys, "grid", "--config", str(cfg), "--out", str(tmp_path / name), "--threads", threads)
        assert code == 0 and "All items" in out
        assert "INFO" in err and "INFO" not in out
    assert (tmp_path / "one" / "grid.json").read_bytes() == (tmp_path / "two" / "grid.json").read_bytes()
    assert (tmp_path / "one" / "table_accuracy_gender.csv").exists()
    code, out, _ = run(capsys, "report", "--grid", str(tmp_path / "one" / "grid.json"), "--metric", "weighted_f1")
    assert code == 0 and out.startswith("weighted_f1 (mean) - target gender")


def test_grid_bad_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('ratings = "r"\nusers = "u"\nmovies = "m"\nsplit_ratio = 2\n')
    assert run(capsys, "grid", "--config", str(cfg))[0] == 1
    assert run(capsys, "grid", "--config", str(tmp_path / "nope.toml"))[0] == 2


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def test_help_lists_every_flag(capsys):
    parser = build_parser()
    commands = _subparsers(parser)
    assert set(commands) == {"ingest", "enrich", "popularity", "features", "train", "evaluate", "grid", "report"}
    for name, sub in commands.items():
        code, out, _ = run(capsys, name, "--help")
        assert code == 0
        for action in sub._actions:
            for flag in action.option_strings:
                assert flag in out, (name, flag)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "demopred", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("demopred ")
