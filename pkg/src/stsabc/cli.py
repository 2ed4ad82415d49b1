"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure (the failing stage is named on
stderr), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .abcopt import AbcConfig, SearchSpace, dumps_artifact, optimize
from .corpus import FORMATS, Dataset, Sentence, lemmatize_dataset, load_dataset, load_lemma_map
from .embedclient import EmbedConfig, EmbeddingClient
from .evaluation import (ReportEntry, finalize, is_undefined, pearson, render_report,
                         stratified_kfold, stratified_split)
from .features import FeatureStore, Resources, build_bank, default_registry, registry_names
from .knowsim import Taxonomy
from .models import MODEL_KINDS, save_model
from .vecspace import CooccurrenceModel, build_hal, load_word_vectors

logger = logging.getLogger("stsabc")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage


@contextmanager
def stage(name, timings=None):
    start = time.perf_counter()
    try:
        yield
    except (StageError, ConfigError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    if timings is not None:
        timings[name] = time.perf_counter() - start


# ---------------------------------------------------------------------------
# configuration


@dataclass
class DatasetConfig:
    name: str
    path: Path
    format: str = "sts-benchmark-tsv"
    lemmas: Path | None = None
    scale_max: float = 5.0


@dataclass
class RunConfig:
    path: Path
    seed: int
    output_dir: Path
    datasets: dict[str, DatasetConfig]
    models: list[str] = field(default_factory=lambda: list(MODEL_KINDS))
    taxonomy: Path | None = None
    word_vectors: Path | None = None
    hal: Path | None = None
    embed: EmbedConfig | None = None
    train_fraction: float = 0.8
    bins: int = 5
    n_sources: int = 50
    iterations: int = 30
    limit: int = 20
    onlookers: int | None = None
    cv_folds: int = 10

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw, path)

    @classmethod
    def from_dict(cls, raw: dict, path: Path) -> "RunConfig":
        base = path.resolve().parent

        def resolve(value, what, must_exist=True):
            if value is None:
                return None
            if not isinstance(value, str):
                raise ConfigError(f"{what} must be a path string")
            p = Path(value)
            p = p if p.is_absolute() else base / p
            if must_exist and not p.exists():
                raise ConfigError(f"{what}: path does not exist: {p}")
            return p

        def integer(table, key, default, minimum=1):
            v = table.get(key, default)
            if v is None:
                return None
            if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
                raise ConfigError(f"{key} must be an integer >= {minimum}")
            return v

        if "seed" not in raw:
            raise ConfigError("config must set an explicit integer 'seed'")
        seed = integer(raw, "seed", None, minimum=0)

        datasets = {}
        for name, d in (raw.get("datasets") or {}).items():
            if not isinstance(d, dict) or "path" not in d:
                raise ConfigError(f"datasets.{name} needs a 'path'")
            fmt = d.get("format", "sts-benchmark-tsv")
            if fmt not in FORMATS:
                raise ConfigError(f"datasets.{name}.format must be one of {', '.join(FORMATS)}")
            datasets[name] = DatasetConfig(name, resolve(d["path"], f"datasets.{name}.path"), fmt,
                                           resolve(d.get("lemmas"), f"datasets.{name}.lemmas"),
                                           float(d.get("scale_max", 5.0)))

        models = raw.get("models", list(MODEL_KINDS))
        bad = [m for m in models if m not in MODEL_KINDS]
        if bad:
            raise ConfigError(f"unknown model kinds {bad}; valid: {', '.join(MODEL_KINDS)}")

        res = raw.get("resources") or {}
        embed = None
        if "embed" in raw:
            e = dict(raw["embed"])
            for key in ("cache_dir", "fixture_path"):
                if e.get(key) is not None:
                    e[key] = str(resolve(e[key], f"embed.{key}", must_exist=key == "fixture_path"))
            try:
                embed = EmbedConfig(**e)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"embed: {exc}") from exc

        split = raw.get("split") or {}
        abc = raw.get("abc") or {}
        frac = float(split.get("train_fraction", 0.8))
        if not 0.0 < frac < 1.0:
            raise ConfigError("split.train_fraction must lie strictly between 0 and 1")
        return cls(
            path=path, seed=seed,
            output_dir=resolve(raw.get("output_dir", "out"), "output_dir", must_exist=False),
            datasets=datasets, models=list(models),
            taxonomy=resolve(res.get("taxonomy"), "resources.taxonomy"),
            word_vectors=resolve(res.get("word_vectors"), "resources.word_vectors"),
            hal=resolve(res.get("hal"), "resources.hal"),
            embed=embed, train_fraction=frac, bins=integer(split, "bins", 5),
            n_sources=integer(abc, "n_sources", 50), iterations=integer(abc, "iterations", 30),
            limit=integer(abc, "limit", 20), onlookers=integer(abc, "onlookers", None),
            cv_folds=integer(abc, "cv_folds", 10, minimum=2),
        )


def _fingerprint(path: Path) -> str:
    h = hashlib.sha1()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def load_resources(cfg: RunConfig | None, threads: int | None = None) -> Resources:
    res = Resources()
    if cfg is None:
        return res
    if cfg.hal is not None:
        res.hal = CooccurrenceModel.load(cfg.hal).to_word_vectors()
        res.fingerprints["hal"] = _fingerprint(cfg.hal)
    if cfg.word_vectors is not None:
        res.word_vectors = load_word_vectors(cfg.word_vectors)
        res.fingerprints["word_vectors"] = _fingerprint(cfg.word_vectors)
    if cfg.taxonomy is not None:
        res.taxonomy = Taxonomy.load(cfg.taxonomy)
        res.fingerprints["taxonomy"] = _fingerprint(cfg.taxonomy)
    if cfg.embed is not None:
        ec = cfg.embed
        if threads is not None and ec.max_parallel > threads:
            ec = replace(ec, max_parallel=threads)
        res.embed_client = EmbeddingClient(ec)
    return res


def load_run_dataset(dc: DatasetConfig, lemmatized: bool) -> Dataset:
    ds = load_dataset(dc.path, dc.format, dc.name, dc.scale_max)
    if lemmatized:
        ds = lemmatize_dataset(ds, load_lemma_map(dc.lemmas))
    return ds


# ---------------------------------------------------------------------------
# commands


def cmd_sim(args) -> int:
    cfg = RunConfig.load(args.config) if args.config else None
    with stage("resources"):
        res = load_resources(cfg, args.threads)
    names = registry_names(default_registry(res))
    if args.algo not in names:
        print(f"unknown algorithm {args.algo!r}; valid ids:", file=sys.stderr)
        for name in sorted(names):
            print(f"  {name}", file=sys.stderr)
        return EXIT_USAGE
    spec, config = names[args.algo]
    with stage("score"):
        v = spec.score(Sentence.from_text(args.a), Sentence.from_text(args.b), config)
    print(f"{float(v):.4f}")
    return EXIT_OK


def cmd_hal_build(args) -> int:
    if args.window < 1:
        raise ConfigError("--window must be >= 1")
    if args.min_count < 1 or args.max_vocab < 1:
        raise ConfigError("--min-count and --max-vocab must be >= 1")
    if not Path(args.corpus).is_file():
        raise ConfigError(f"corpus not found: {args.corpus}")
    with stage("hal-build"):
        model = build_hal(args.corpus, args.window, args.min_count, args.max_vocab)
    with stage("write"):
        model.save(args.out)
    print(f"{len(model.vocab)} words, {model.counts.nnz} nonzero cells -> {args.out}")
    return EXIT_OK


def _dataset_cfg(cfg: RunConfig, name: str | None) -> DatasetConfig:
    if not cfg.datasets:
        raise ConfigError("config defines no datasets")
    if name is None:
        if len(cfg.datasets) > 1:
            raise ConfigError(f"--dataset is required; choose from {', '.join(cfg.datasets)}")
        name = next(iter(cfg.datasets))
    if name not in cfg.datasets:
        raise ConfigError(f"unknown dataset {name!r}; valid: {', '.join(cfg.datasets)}")
    return cfg.datasets[name]


def cmd_featurize(args) -> int:
    cfg = RunConfig.load(args.config)
    dc = _dataset_cfg(cfg, args.dataset)
    if args.lemmatized and dc.lemmas is None:
        raise ConfigError(f"datasets.{dc.name} has no lemma map")
    with stage("load"):
        ds = load_run_dataset(dc, args.lemmatized)
        res = load_resources(cfg, args.threads)
    with stage("featurize"):
        store = FeatureStore(_store_path(cfg))
        bank = build_bank(ds, default_registry(res), args.lemmatized, store)
        bank.matrix().to_csv(args.out)
    print(f"{bank.n_rows} rows x {len(bank.specs)} features -> {args.out}")
    return EXIT_OK


def _store_path(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir / "features.sqlite"


def run_name(dataset: str, model: str, lemmatized: bool) -> str:
    return f"{dataset}-{model}" + ("-lemma" if lemmatized else "")


def single_feature_baselines(bank_train, bank_holdout) -> list[dict]:
    """Holdout Pearson of every spec alone, its configuration chosen on the training rows."""
    out = []
    for j, spec in enumerate(bank_train.specs):
        scores = [pearson(bank_train.blocks[j][:, c], bank_train.gold)
                  for c in range(len(spec.configs))]
        scores = [-np.inf if is_undefined(r) else r for r in scores]
        c = int(np.argmax(scores))
        r = pearson(bank_holdout.blocks[j][:, c], bank_holdout.gold)
        out.append({"id": spec.id, "family": spec.family, "config": spec.configs[c],
                    "pearson": None if is_undefined(r) else r})
    return out


def cmd_optimize(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    dc = _dataset_cfg(cfg, args.dataset)
    if args.model not in MODEL_KINDS:
        raise ConfigError(f"unknown model {args.model!r}; valid: {', '.join(MODEL_KINDS)}")
    if args.lemmatized and dc.lemmas is None:
        raise ConfigError(f"datasets.{dc.name} has no lemma map")
    timings: dict[str, float] = {}

    with stage("load", timings):
        ds = load_run_dataset(dc, args.lemmatized)
        res = load_resources(cfg, args.threads)
        specs = default_registry(res)
    with stage("split", timings):
        gold = np.asarray(ds.gold, dtype=float)
        train, holdout = stratified_split(gold, cfg.train_fraction, cfg.bins, cfg.seed)
    with stage("featurize", timings):
        bank = build_bank(ds, specs, args.lemmatized, FeatureStore(_store_path(cfg)))
        btr, bho = bank.subset(train), bank.subset(holdout)
    with stage("optimize", timings):
        abc = AbcConfig(cfg.n_sources, cfg.iterations, cfg.limit, cfg.seed, cfg.onlookers)
        plan = stratified_kfold(btr.gold, cfg.cv_folds, cfg.bins, cfg.seed)
        result = optimize(abc, SearchSpace.for_model(args.model, btr.n_configs), btr,
                          args.model, plan)
        if not result.decoded.selected:
            raise RuntimeError("no feature subset with a defined fitness was found")
    with stage("finalize", timings):
        sel = list(result.decoded.selected)
        ids = [btr.specs[j].column_id(c) for j, c in sel]
        entry = finalize(args.model, range(len(sel)), result.decoded.hyperparams,
                         btr.columns(sel), btr.gold, bho.columns(sel), bho.gold,
                         cfg.seed, ids, args.model)
        baselines = single_feature_baselines(btr, bho)
    with stage("write", timings):
        name = run_name(dc.name, args.model, args.lemmatized)
        runs = cfg.output_dir / "runs"
        runs.mkdir(parents=True, exist_ok=True)
        live = res.embed_client is not None and res.embed_client.config.mode == "live"
        artifact = {
            "format_version": 1,
            "name": name,
            "dataset": dc.name,
            "lemmatized": bool(args.lemmatized),
            "model": args.model,
            "seed": cfg.seed,
            "deterministic": not live,
            "split": {"train": len(train), "holdout": len(holdout),
                      "train_fraction": cfg.train_fraction, "bins": cfg.bins},
            "cv_folds": cfg.cv_folds,
            "features": [s.id for s in specs],
            "optimization": result.to_artifact(btr),
            "holdout_pearson": None if is_undefined(entry.pearson) else entry.pearson,
            "selected": ids,
            "hyperparams": result.decoded.hyperparams,
            "baselines": baselines,
        }
        (runs / f"{name}.json").write_text(dumps_artifact(artifact), encoding="utf-8")
        save_model(entry.model, runs / f"{name}.model.json")
    timings["total"] = sum(timings.values())
    (runs / f"{name}.timing.json").write_text(
        json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2) + "\n",
        encoding="utf-8")
    print(f"best fitness: {result.best_fitness:.4f}")
    print("holdout pearson: " + ("undefined" if is_undefined(entry.pearson)
                                 else f"{entry.pearson:.4f}"))
    print(f"artifact: {runs / f'{name}.json'}")
    return EXIT_OK


def _is_run_artifact(p: Path) -> bool:
    return not (p.name.endswith(".timing.json") or p.name.endswith(".model.json"))


def collect_entries(runs_dir: Path, with_baselines: bool = False) -> list[ReportEntry]:
    entries, seen = [], set()
    for p in sorted(runs_dir.glob("*.json")):
        if not _is_run_artifact(p):
            continue
        art = json.loads(p.read_text(encoding="utf-8"))
        label = art["dataset"] + (" (lemma)" if art.get("lemmatized") else "")
        timing = p.with_name(p.name[:-len(".json")] + ".timing.json")
        runtime = None
        if timing.is_file():
            runtime = json.loads(timing.read_text(encoding="utf-8")).get("total")
        r = art.get("holdout_pearson")
        entries.append(ReportEntry.from_dict({
            "name": art["model"], "family": "ml", "pearson": r, "selected": art["selected"],
            "hyperparams": art["hyperparams"], "runtime": runtime, "dataset": label}))
        if with_baselines:
            for b in art.get("baselines", []):
                key = (b["id"], label)
                if key in seen:
                    continue
                seen.add(key)
                entries.append(ReportEntry.from_dict({
                    "name": b["id"], "family": b["family"], "pearson": b["pearson"],
                    "selected": [f"{b['id']}-{b['config']}"], "dataset": label}))
    return entries


def cmd_report(args) -> int:
    runs_dir = Path(args.runs_dir)
    if not runs_dir.is_dir():
        raise ConfigError(f"runs directory not found: {runs_dir}")
    with stage("collect"):
        entries = collect_entries(runs_dir, args.with_baselines)
    text = render_report(entries, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_make_synthetic(args) -> int:
    from .synthetic import DEFAULT_SEED, write_synthetic
    seed = DEFAULT_SEED if args.seed is None else args.seed
    with stage("write"):
        print(write_synthetic(args.out, args.n_pairs, seed))
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stsabc", description="Sentence similarity features with "
                "bee-colony model optimization.")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on parallel workers (embedding requests)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sim", help="score one sentence pair")
    s.add_argument("--algo", required=True)
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("hal-build", help="build a HAL co-occurrence model")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--window", type=int, default=10)
    s.add_argument("--min-count", type=int, default=2)
    s.add_argument("--max-vocab", type=int, default=50000)
    s.set_defaults(func=cmd_hal_build)

    s = sub.add_parser("featurize", help="write the feature matrix as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--dataset")
    s.add_argument("--lemmatized", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("optimize", help="bee-colony search, refit and holdout scoring")
    s.add_argument("--config", required=True)
    s.add_argument("--model", required=True, help=", ".join(MODEL_KINDS))
    s.add_argument("--dataset")
    s.add_argument("--lemmatized", action="store_true")
    s.add_argument("--output-dir", help="override output_dir from the config")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("report", help="render run artifacts as a table")
    s.add_argument("--runs-dir", required=True)
    s.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    s.add_argument("--out")
    s.add_argument("--with-baselines", action="store_true",
                   help="add single-algorithm holdout rows")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("make-synthetic", help="write the synthetic smoke dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n-pairs", type=int, default=200)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_make_synthetic)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("stsabc: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"stsabc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"stsabc: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
