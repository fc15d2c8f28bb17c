"""``demopred`` command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error.
Requested data goes to stdout; logs and errors go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from . import classifiers as clf
from .enrichment import load_enrichment, merge_meta, synth_enrichment, write_enrichment
from .errors import DemopredError, ValidationError
from .evaluation import evaluate, split
from .experiments import TABLE_METRICS, ResultGrid, load_config, render_tables, run_grid, write_outputs
from .features import STRATEGIES, TARGET_CLASSES, TARGETS, build_features, export_features, import_features
from .ingest import assemble_dataset, dump_canonical, parse_movies, parse_ratings, parse_users
from .popularity import (
    POPULARITY_METRICS,
    build_index,
    build_index_by_threshold,
    frequency_histogram,
    popular_portion_by_rating_order,
    write_curve,
)

log = logging.getLogger("demopred")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so usage errors share the exit-code contract."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must be in (0, 1], got {value}")
    return value


def _ratio(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"split ratio must be in (0, 1), got {value}")
    return value


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive(text: str) -> int:
    value = _non_negative(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _param(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout (and errors on stderr)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratings", required=True, metavar="PATH", help="ratings.dat (UserID::MovieID::Rating::Timestamp)")
    p.add_argument("--users", required=True, metavar="PATH", help="users.dat (UserID::Gender::Age::Occupation::Zip)")
    p.add_argument("--movies", required=True, metavar="PATH", help="movies.dat (MovieID::Title::Genres)")


def _add_enrichment(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--enrichment", metavar="PATH", help="MPAA/parental-guide CSV; without it a synthetic sidecar is generated"
    )
    p.add_argument("--seed", type=_non_negative, default=0, help="seed for the synthetic sidecar (default 0)")


def _add_popularity(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=_alpha, default=0.05, help="fraction of rated movies deemed popular (default 0.05)")
    p.add_argument(
        "--popularity-metric", choices=POPULARITY_METRICS, default="count", help="movie ranking key (default count)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="demopred", description="Predict user gender and age from movie-rating histories.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="parse and validate ML-1M files")
    _add_dataset(p)
    p.add_argument("--out", metavar="DIR", help="write canonical users/movies/ratings CSVs here")
    _add_common(p)

    p = sub.add_parser("enrich", help="merge or synthesize the MPAA/parental sidecar")
    p.add_argument("--movies", required=True, metavar="PATH", help="movies.dat")
    _add_enrichment(p)
    p.add_argument("--out", metavar="DIR", help="write enrichment.csv here")
    _add_common(p)

    p = sub.add_parser("popularity", help="popular set and long-tail curves")
    _add_dataset(p)
    _add_popularity(p)
    p.add_argument(
        "--min-count", type=_positive, metavar="N", help="popular = rated at least N times (overrides --alpha)"
    )
    p.add_argument("--out", metavar="DIR", help="write fig1_histogram.csv, fig2_portion.csv, popular.csv")
    _add_common(p)

    p = sub.add_parser("features", help="build per-user feature vectors")
    _add_dataset(p)
    _add_enrichment(p)
    _add_popularity(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="all", help="rating subset to average (default all)")
    p.add_argument("--out", metavar="DIR", help="write features_<strategy>.csv here")
    _add_common(p)

    for name, text in (("train", "train a classifier on the train split"), ("evaluate", "score a model")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--features", required=True, metavar="PATH", help="feature CSV from the features command")
        p.add_argument("--target", choices=TARGETS, default="gender", help="label to predict (default gender)")
        p.add_argument("--split-ratio", type=_ratio, default=0.8, help="train fraction of the split (default 0.8)")
        p.add_argument("--seed", type=_non_negative, default=42, help="split and model seed (default 42)")
        if name == "train":
            p.add_argument("--classifier", choices=clf.KINDS, default="mlp", help="classifier family (default mlp)")
            p.add_argument(
                "--param", type=_param, action="append", default=[], metavar="KEY=VALUE", help="hyperparameter"
            )
            p.add_argument("--threads", type=_positive, default=1, help="worker threads (default 1)")
            p.add_argument("--out", metavar="DIR", help="write model.json here")
        else:
            p.add_argument("--model", required=True, metavar="PATH", help="model.json from the train command")
            p.add_argument("--subset", choices=("test", "all"), default="test", help="rows to score (default test)")
            p.add_argument("--out", metavar="DIR", help="write report.json here")
        _add_common(p)

    p = sub.add_parser("grid", help="run the strategy x classifier x target grid")
    p.add_argument("--config", required=True, metavar="PATH", help="TOML experiment config")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=_non_negative, action="append", metavar="N", help="split seed; repeat for several")
    p.add_argument("--threads", type=_positive, default=1, help="cells run concurrently (default 1)")
    p.add_argument("--no-resume", action="store_true", help="ignore finished cells from an earlier run")
    _add_common(p)

    p = sub.add_parser("report", help="render tables from grid.json")
    p.add_argument("--grid", required=True, metavar="PATH", help="grid.json")
    p.add_argument("--metric", choices=TABLE_METRICS, default="accuracy", help="metric shown (default accuracy)")
    p.add_argument(
        "--statistic", choices=("mean", "headline"), default="mean", help="mean over seeds or first seed only"
    )
    p.add_argument("--out", metavar="DIR", help="write table_<metric>_<target>.csv here")
    _add_common(p)
    return parser


def _emit(args, data: dict, text: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(data, sort_keys=True, indent=1) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


def _load_dataset(args):
    return assemble_dataset(parse_users(args.users), parse_movies(args.movies), parse_ratings(args.ratings))


def _enrichment(args, movies):
    if args.enrichment:
        return load_enrichment(args.enrichment)
    log.info("no --enrichment given; synthesizing with seed %d", args.seed)
    return synth_enrichment(movies, args.seed)


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> None:
    dataset = _load_dataset(args)
    summary = dataset.summary()
    if out := _out_dir(args):
        dump_canonical(dataset, out)
    _emit(args, summary, "\n".join(f"{k}: {v}" for k, v in summary.items()))


def cmd_enrich(args) -> None:
    movies = parse_movies(args.movies)
    enrich = _enrichment(args, movies)
    _, coverage = merge_meta(movies, enrich)
    if out := _out_dir(args):
        write_enrichment(enrich, out / "enrichment.csv")
    data = {"movies": len(movies), "enriched": len(enrich), "coverage": coverage}
    _emit(args, data, "\n".join(f"{k}: {v}" for k, v in data.items()))


def cmd_popularity(args) -> None:
    dataset = _load_dataset(args)
    if args.min_count is not None:
        index = build_index_by_threshold(dataset, args.min_count)
    else:
        index = build_index(dataset, args.alpha, args.popularity_metric)
    portion = popular_portion_by_rating_order(dataset, index)
    if out := _out_dir(args):
        write_curve(frequency_histogram(dataset), ("rank", "count"), out / "fig1_histogram.csv")
        write_curve(portion, ("k", "portion"), out / "fig2_portion.csv")
        (out / "popular.csv").write_text(
            "movie_id\n" + "".join(f"{m}\n" for m in sorted(index.popular_set)), encoding="utf-8"
        )
    data = {**index.summary(), "first_rating_popular_portion": portion[0][1] if portion else None}
    _emit(args, data, "\n".join(f"{k}: {v}" for k, v in data.items()))


def cmd_features(args) -> None:
    dataset = _load_dataset(args)
    meta, coverage = merge_meta(dataset.movies, _enrichment(args, dataset.movies))
    index = build_index(dataset, args.alpha, args.popularity_metric) if args.strategy == "popular" else None
    fs = build_features(dataset, meta, args.strategy, index)
    if out := _out_dir(args):
        export_features(fs, out / f"features_{args.strategy}.csv")
    data = {
        "strategy": fs.strategy,
        "users": len(fs),
        "dropped_users": len(fs.dropped),
        "support": fs.total_support(),
        "enrichment_coverage": coverage,
    }
    _emit(args, data, "\n".join(f"{k}: {v}" for k, v in data.items()))


def cmd_train(args) -> None:
    fs = import_features(args.features)
    train_set, test_set = split(list(fs), args.target, args.split_ratio, args.seed)
    spec = clf.ClassifierSpec(args.classifier, dict(args.param), args.seed)
    model = clf.train(spec, train_set, args.target, threads=args.threads)
    if out := _out_dir(args):
        clf.save_model(model, out / "model.json")
    data = {
        "classifier": spec.kind,
        "hyperparams": spec.hyperparams,
        "target": args.target,
        "classes": list(model.class_labels),
        "n_train": len(train_set),
        "n_test": len(test_set),
    }
    _emit(args, data, "\n".join(f"{k}: {v}" for k, v in data.items()))


def cmd_evaluate(args) -> None:
    fs = import_features(args.features)
    model = clf.load_model(args.model)
    if args.subset == "all":
        rows = list(fs)
    else:
        _, rows = split(list(fs), args.target, args.split_ratio, args.seed)
    if not rows:
        raise ValidationError("nothing to evaluate: the selected subset is empty")
    actual = [v.labels.get(args.target) for v in rows]
    unknown = set(actual) - set(TARGET_CLASSES[args.target])
    if unknown or not set(model.class_labels) <= set(TARGET_CLASSES[args.target]):
        raise ValidationError(f"model classes {model.class_labels} do not fit target {args.target!r}")
    predicted = clf.predict_batch(model, rows)
    labels = [c for c in TARGET_CLASSES[args.target] if c in set(actual) | set(model.class_labels)]
    report = evaluate(actual, predicted, labels)
    if out := _out_dir(args):
        (out / "report.json").write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
    lines = [f"n: {len(rows)}", f"accuracy: {report.accuracy:.4f}"]
    lines += [f"weighted_{m}: {getattr(report, 'weighted_' + m):.4f}" for m in ("precision", "recall", "f1")]
    _emit(args, report.to_dict(), "\n".join(lines))


def cmd_grid(args) -> None:
    overrides = {"output_dir": args.out, "seeds": args.seed}
    config = load_config(args.config, **overrides)
    grid = run_grid(config, threads=args.threads, resume=not args.no_resume, progress=log.info)
    write_outputs(grid, config.output_dir)
    failed = sorted("/".join(k) for k, c in grid.cells.items() if not c.ok)
    data = {"output_dir": config.output_dir, "cells": len(grid.cells), "failed_cells": failed}
    text = "\n\n".join(t for t, _ in render_tables(grid, "accuracy").values())
    _emit(args, data, text + (f"\nfailed cells: {', '.join(failed)}" if failed else ""))


def cmd_report(args) -> None:
    grid = ResultGrid.from_json(Path(args.grid).read_text(encoding="utf-8"))
    tables = render_tables(grid, args.metric, args.statistic)
    if out := _out_dir(args):
        for target, (_, csv_text) in tables.items():
            (out / f"table_{args.metric}_{target}.csv").write_text(csv_text, encoding="utf-8")
    data = {target: csv_text for target, (_, csv_text) in tables.items()}
    _emit(args, data, "\n\n".join(t for t, _ in tables.values()))


COMMANDS = {
    "ingest": cmd_ingest,
    "enrich": cmd_enrich,
    "popularity": cmd_popularity,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "grid": cmd_grid,
    "report": cmd_report,
}


def _fail(code: int, exc: BaseException, as_json: bool) -> int:
    message = str(exc) or type(exc).__name__
    if as_json:
        doc = {"error": {"type": type(exc).__name__, "message": message, "exit_code": code}}
        sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"demopred: error: {message}\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_VALIDATION, exc, as_json)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        COMMANDS[args.command](args)
    except OSError as exc:
        return _fail(EXIT_IO, exc, args.json)
    except (DemopredError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, exc, args.json)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
