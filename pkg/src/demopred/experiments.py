"""Run the strategy x classifier x target grid and render its result tables."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import classifiers as clf
from .enrichment import load_enrichment, merge_meta, synth_enrichment
from .errors import DemopredError, ValidationError
from .evaluation import EvalReport, majority_baseline, metrics, stratified_indices, confusion, summarize
from .features import (
    FEATURE_GROUPS,
    STRATEGIES,
    TARGET_CLASSES,
    TARGETS,
    FeatureSet,
    build_features,
    feature_columns,
    liked_mask,
)
from .ingest import AGE3_LABELS, Dataset, assemble_dataset, parse_movies, parse_ratings, parse_users, reduce_age
from .popularity import (
    POPULARITY_METRICS,
    PopularityIndex,
    build_index,
    frequency_histogram,
    popular_portion_by_rating_order,
    write_curve,
)

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "ResultGrid",
    "load_config",
    "run_grid",
    "render_tables",
    "write_outputs",
    "reduce_age",
    "AGE3_LABELS",
]

GRID_SCHEMA = "demopred-grid/1"
TABLE_METRICS = ("accuracy", "weighted_precision", "weighted_f1")
STRATEGY_TITLES = {"all": "All items", "popular": "Popular items", "liked": "Liked items"}
ENV_PREFIX = "DEMOPRED_"
PATH_KEYS = ("ratings", "users", "movies", "enrichment", "output_dir")
MISSING = "—"


@dataclass
class ExperimentConfig:
    ratings: str
    users: str
    movies: str
    enrichment: str | None = None
    synth_seed: int = 0
    alpha: float = 0.05
    popularity_metric: str = "count"
    split_ratio: float = 0.8
    seeds: tuple[int, ...] = (42, 43, 44, 45, 46)
    classifiers: tuple[str, ...] = clf.KINDS
    hyperparams: dict[str, dict[str, Any]] = field(default_factory=dict)
    targets: tuple[str, ...] = TARGETS
    strategies: tuple[str, ...] = STRATEGIES
    feature_groups: tuple[str, ...] = tuple(FEATURE_GROUPS)
    output_dir: str = "results"

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        self.classifiers = tuple(self.classifiers)
        self.targets = tuple(self.targets)
        self.strategies = tuple(self.strategies)
        self.feature_groups = tuple(self.feature_groups)
        self.validate()

    def validate(self) -> None:
        if not (isinstance(self.alpha, (int, float)) and 0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.popularity_metric not in POPULARITY_METRICS:
            raise ValidationError(f"popularity_metric must be one of {POPULARITY_METRICS}")
        if not (isinstance(self.split_ratio, (int, float)) and 0.0 < self.split_ratio < 1.0):
            raise ValidationError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if not self.seeds or any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ValidationError("seeds must be a non-empty list of non-negative integers")
        for name, allowed, chosen in (
            ("classifiers", clf.KINDS, self.classifiers),
            ("targets", TARGETS, self.targets),
            ("strategies", STRATEGIES, self.strategies),
            ("feature_groups", tuple(FEATURE_GROUPS), self.feature_groups),
        ):
            if not chosen or set(chosen) - set(allowed) or len(set(chosen)) != len(chosen):
                raise ValidationError(f"{name} must be a non-empty subset of {allowed}, got {list(chosen)}")
        if unknown := set(self.hyperparams) - set(clf.KINDS):
            raise ValidationError(f"hyperparams for unknown classifiers {sorted(unknown)}")
        for kind, hp in self.hyperparams.items():
            clf.ClassifierSpec(kind, dict(hp))

    def check_paths(self) -> None:
        for key in ("ratings", "users", "movies", "enrichment"):
            value = getattr(self, key)
            if value is not None and not Path(value).is_file():
                raise FileNotFoundError(f"{key} file not found: {value}")

    def spec(self, kind: str, seed: int) -> clf.ClassifierSpec:
        return clf.ClassifierSpec(kind, dict(self.hyperparams.get(kind, {})), seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("seeds", "classifiers", "targets", "strategies", "feature_groups"):
            d[key] = list(d[key])
        return d

    def fingerprint(self) -> str:
        """Hash of everything that affects results (the output location does not)."""
        d = self.to_dict()
        d.pop("output_dir")
        d["hyperparams"] = {k: self.spec(k, 0).hyperparams for k in self.classifiers}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _read_config_file(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def load_config(path: str | Path, env: dict[str, str] | None = None, **overrides) -> ExperimentConfig:
    """Read a TOML (or .json) config; ``DEMOPRED_<KEY>`` variables override path keys.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path).resolve()
    raw = _read_config_file(path)
    env = os.environ if env is None else env
    for key in PATH_KEYS:
        if (value := env.get(ENV_PREFIX + key.upper())) is not None:
            raw[key] = value
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = set(ExperimentConfig.__dataclass_fields__)
    if unknown := set(raw) - known:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    for key in ("ratings", "users", "movies"):
        if key not in raw:
            raise ValidationError(f"config is missing required key {key!r}")
    for key in PATH_KEYS:
        if raw.get(key) is not None:
            p = Path(raw[key]).expanduser()
            raw[key] = str(p if p.is_absolute() else (path.parent / p))
    return ExperimentConfig(**raw)


@dataclass
class CellResult:
    strategy: str
    classifier: str
    target: str
    runs: list[dict] = field(default_factory=list)
    error: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None and bool(self.runs)

    def reports(self) -> list[EvalReport]:
        return [EvalReport.from_dict(r["report"]) for r in self.runs]

    def headline(self) -> EvalReport:
        return EvalReport.from_dict(self.runs[0]["report"])

    def summary(self) -> dict:
        return summarize(self.reports()) if self.ok else {}

    def value(self, metric: str, statistic: str = "mean") -> float | None:
        if not self.ok:
            return None
        if statistic == "headline":
            return getattr(self.headline(), metric)
        return self.summary()[metric]["mean"]

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy,
            "classifier": self.classifier,
            "target": self.target,
            "error": self.error,
            "meta": self.meta,
            "runs": self.runs,
        }
        if self.ok:
            d["summary"] = self.summary()
        return d


@dataclass
class ResultGrid:
    config: dict
    cells: dict[tuple[str, str, str], CellResult]
    analysis: dict = field(default_factory=dict)

    def cell(self, strategy: str, classifier: str, target: str) -> CellResult | None:
        return self.cells.get((strategy, classifier, target))

    def to_json(self) -> str:
        doc = {
            "schema": GRID_SCHEMA,
            "config": self.config,
            "analysis": self.analysis,
            "cells": [self.cells[k].to_dict() for k in sorted(self.cells, key=_cell_order)],
        }
        return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ResultGrid:
        doc = json.loads(text)
        if doc.get("schema") != GRID_SCHEMA:
            raise ValidationError(f"unsupported grid schema {doc.get('schema')!r}")
        cells = {}
        for c in doc["cells"]:
            cell = CellResult(c["strategy"], c["classifier"], c["target"], c["runs"], c["error"], c["meta"])
            cells[(cell.strategy, cell.classifier, cell.target)] = cell
        return cls(doc["config"], cells, doc.get("analysis", {}))


def _cell_order(key: tuple[str, str, str]):
    s, c, t = key
    return (
        TARGETS.index(t) if t in TARGETS else len(TARGETS),
        STRATEGIES.index(s) if s in STRATEGIES else len(STRATEGIES),
        clf.KINDS.index(c) if c in clf.KINDS else len(clf.KINDS),
    )


def load_inputs(config: ExperimentConfig) -> tuple[Dataset, list, float]:
    config.check_paths()
    dataset = assemble_dataset(
        parse_users(config.users), parse_movies(config.movies), parse_ratings(config.ratings)
    )
    if config.enrichment is not None:
        enrich = load_enrichment(config.enrichment)
    else:
        log.info("no enrichment file; using synthetic enrichment (seed %d)", config.synth_seed)
        enrich = synth_enrichment(dataset.movies, config.synth_seed)
    meta, coverage = merge_meta(dataset.movies, enrich)
    return dataset, meta, coverage


def _analysis(dataset: Dataset, index: PopularityIndex, coverage: float, features: dict[str, FeatureSet]) -> dict:
    total = len(dataset.ratings)
    popular_ratings = int(index.is_popular(dataset.ratings.movie_ids).sum())
    liked = int(liked_mask(dataset).sum())
    portion = popular_portion_by_rating_order(dataset, index)
    return {
        "dataset": dataset.summary(),
        "enrichment_coverage": coverage,
        "popularity": index.summary(),
        "popular_ratings": popular_ratings,
        "unpopular_ratings": total - popular_ratings,
        "liked_ratings": liked,
        "liked_ratio": liked / total,
        "first_rating_popular_portion": portion[0][1] if portion else None,
        "strategies": {
            s: {"users": len(fs), "support": fs.total_support(), "dropped_users": len(fs.dropped)}
            for s, fs in features.items()
        },
    }


class _Checkpoint:
    """Append-only JSON-lines record of finished runs, keyed by config fingerprint."""

    def __init__(self, path: Path, fingerprint: str, resume: bool):
        self.path = path
        self.lock = threading.Lock()
        self.done: dict[tuple, dict] = {}
        if resume and path.exists():
            lines = path.read_text(encoding="utf-8").splitlines()
            if lines and json.loads(lines[0]).get("fingerprint") == fingerprint:
                for line in lines[1:]:
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        break  # torn final line from an interrupted run
                    self.done[tuple(rec["key"])] = rec["run"]
                log.info("resuming: %d finished runs found in %s", len(self.done), path)
                return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"fingerprint": fingerprint}) + "\n", encoding="utf-8")

    def add(self, key: tuple, run: dict) -> None:
        with self.lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"key": list(key), "run": run}, sort_keys=True) + "\n")


def _run_one(config, features, columns, target, seed, train_users, test_users, strategy, kind) -> dict:
    fs = features[strategy]
    train = [v for v in fs if v.user_id in train_users]
    test = [v for v in fs if v.user_id in test_users]
    if not test:
        raise ValidationError("test split is empty (classes too small to stratify)")
    model = clf.train(config.spec(kind, seed), train, target, columns=columns)
    X_test = np.array([v.values for v in test], dtype=np.float64)[:, columns]
    predicted = model.predict(X_test)
    actual = [v.labels.get(target) for v in test]
    labels = [c for c in TARGET_CLASSES[target] if c in set(actual) | set(model.class_labels)]
    report = metrics(confusion(actual, predicted, labels))
    return {
        "seed": seed,
        "n_train": len(train),
        "n_test": len(test),
        "majority_baseline": majority_baseline([v.labels.get(target) for v in train], actual),
        "report": report.to_dict(),
    }


def run_grid(
    config: ExperimentConfig,
    *,
    threads: int = 1,
    resume: bool = True,
    progress: Callable[[str], None] | None = None,
) -> ResultGrid:
    """Compute every requested cell; failures are recorded per cell, never raised.

    All cells of one (target, seed) train and test on the same user split,
    taken over users with at least one rating. Users a strategy drops are
    simply absent from that strategy's train and test sets.
    """
    t0 = time.perf_counter()
    dataset, meta, coverage = load_inputs(config)
    index = build_index(dataset, config.alpha, config.popularity_metric)
    columns = feature_columns(config.feature_groups)

    features: dict[str, FeatureSet] = {"all": build_features(dataset, meta, "all")}
    strategy_errors: dict[str, str] = {}
    for s in config.strategies:
        if s not in features:
            try:
                features[s] = build_features(dataset, meta, s, index)
            except DemopredError as exc:
                strategy_errors[s] = str(exc)
    population = features["all"]

    out_dir = Path(config.output_dir)
    checkpoint = _Checkpoint(out_dir / "grid.checkpoint.jsonl", config.fingerprint(), resume)

    jobs = []
    splits = {}
    for target in config.targets:
        labels = population.labels(target)
        for seed in config.seeds:
            tr, te = stratified_indices(labels, config.split_ratio, seed, target)
            users = np.array(population.user_ids)
            splits[(target, seed)] = (set(users[tr].tolist()), set(users[te].tolist()))
            for s in config.strategies:
                if s in strategy_errors:
                    continue
                for kind in config.classifiers:
                    jobs.append((target, seed, s, kind))

    timings: dict[str, float] = {}

    def execute(job):
        key = tuple(str(x) for x in job)
        if key in checkpoint.done:
            return job, checkpoint.done[key], None
        target, seed, s, kind = job
        start = time.perf_counter()
        try:
            run = _run_one(config, features, columns, target, seed, *splits[(target, seed)], s, kind)
        except DemopredError as exc:
            return job, None, f"{type(exc).__name__}: {exc}"
        timings["/".join(key)] = time.perf_counter() - start
        checkpoint.add(key, run)
        if progress:
            progress(f"{target} seed={seed} {s}/{kind}: accuracy {run['report']['accuracy']:.3f}")
        return job, run, None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(execute, jobs))
    else:
        results = [execute(j) for j in jobs]

    cells: dict[tuple[str, str, str], CellResult] = {}
    for s in config.strategies:
        for kind in config.classifiers:
            for target in config.targets:
                cell = CellResult(s, kind, target)
                if s in strategy_errors:
                    cell.error = strategy_errors[s]
                else:
                    fs = features[s]
                    cell.meta = {
                        "users": len(fs),
                        "support": fs.total_support(),
                        "dropped_users": len(fs.dropped),
                    }
                cells[(s, kind, target)] = cell
    for (target, seed, s, kind), run, error in results:
        cell = cells[(s, kind, target)]
        if error is not None:
            if cell.error is None:
                cell.error = f"seed {seed}: {error}"
        else:
            cell.runs.append(run)
    for cell in cells.values():
        cell.runs.sort(key=lambda r: config.seeds.index(r["seed"]))
        if cell.error:
            log.warning("cell %s/%s/%s failed: %s", cell.strategy, cell.classifier, cell.target, cell.error)

    cfg = config.to_dict()
    cfg.pop("output_dir")
    grid = ResultGrid(cfg, cells, _analysis(dataset, index, coverage, features))
    grid.timings = {"total_seconds": time.perf_counter() - t0, "runs": timings}
    grid.dataset, grid.index = dataset, index
    return grid


def render_tables(grid: ResultGrid, metric: str = "accuracy", statistic: str = "mean") -> dict[str, tuple[str, str]]:
    """Per target: (text table rounded to 2 decimals, CSV at full precision).

    Rows are strategies and columns classifiers. Missing or failed cells
    show a dash.
    """
    if metric not in TABLE_METRICS + ("weighted_recall",):
        raise ValidationError(f"metric must be one of {TABLE_METRICS}, got {metric!r}")
    strategies = [s for s in STRATEGIES if any(k[0] == s for k in grid.cells)]
    kinds = [c for c in clf.KINDS if any(k[1] == c for k in grid.cells)]
    targets = [t for t in TARGETS if any(k[2] == t for k in grid.cells)]
    supports = grid.analysis.get("strategies", {})
    out = {}
    for target in targets:
        header = ["strategy", "ratings", *(clf.KIND_NAMES[k] for k in kinds)]
        text_rows, csv_rows = [], []
        for s in strategies:
            support = supports.get(s, {}).get("support", "")
            values = []
            for k in kinds:
                cell = grid.cell(s, k, target)
                values.append(None if cell is None else cell.value(metric, statistic))
            text_rows.append(
                [STRATEGY_TITLES[s], str(support), *(MISSING if v is None else f"{v:.2f}" for v in values)]
            )
            csv_rows.append([s, str(support), *(MISSING if v is None else repr(v) for v in values)])
        widths = [max(len(r[i]) for r in [header, *text_rows]) for i in range(len(header))]
        title = f"{metric} ({statistic}) - target {target}"
        lines = [title, "  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in text_rows]
        csv_text = "\n".join(",".join(r) for r in [header, *csv_rows]) + "\n"
        out[target] = ("\n".join(lines) + "\n", csv_text)
    return out


def write_outputs(grid: ResultGrid, out_dir: str | Path) -> list[Path]:
    """Persist grid.json, the metric tables and the two long-tail curves."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "grid.json"
    path.write_text(grid.to_json(), encoding="utf-8")
    written.append(path)
    for metric in TABLE_METRICS:
        for target, (_, csv_text) in render_tables(grid, metric).items():
            path = out / f"table_{metric}_{target}.csv"
            path.write_text(csv_text, encoding="utf-8")
            written.append(path)
    dataset = getattr(grid, "dataset", None)
    index = getattr(grid, "index", None)
    if dataset is not None and index is not None:
        write_curve(frequency_histogram(dataset), ("rank", "count"), out / "fig1_histogram.csv")
        write_curve(popular_portion_by_rating_order(dataset, index), ("k", "portion"), out / "fig2_portion.csv")
        written += [out / "fig1_histogram.csv", out / "fig2_portion.csv"]
    timings = getattr(grid, "timings", None)
    if timings is not None:
        (out / "timings.json").write_text(json.dumps(timings, sort_keys=True, indent=1), encoding="utf-8")
    return written
