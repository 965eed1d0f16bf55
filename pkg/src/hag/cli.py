"""``hag`` command-line entry point.

Exit codes: 0 success, 1 usage, 2 provider failure, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from . import io
from .baselines import GeneratorSpec, Method, run_generator
from .bench import FilterPolicy, build_benchmark, load_corpus, parse_timestamp
from .config import RunConfig
from .errors import ConfigError, DataError, HagError, ProviderError
from .experiment import (
    attach,
    build_embedder,
    build_judge,
    build_provider,
    eval_config,
    export_embeddings,
    inspect,
    load_database,
    load_schema,
    render_report,
    run_experiment,
    toy_corpus_path,
)
from .grounding import instantiate
from .pace import evaluate
from .persona import Population
from .tree import build_tree, load_tree, prune, render_tree, save_tree

EXIT_OK, EXIT_USAGE, EXIT_PROVIDER, EXIT_DATA = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, provider: bool = True) -> None:
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (default: stdout)")
    if provider:
        p.add_argument("--provider", choices=["mock", "http", "replay"])
        p.add_argument("--model")
        p.add_argument("--transcript", help="transcript to replay from")
        p.add_argument("--record", help="append every model exchange to this JSONL file")
        p.add_argument("--max-depth", type=int, dest="max_depth")
        p.add_argument("--max-branches", type=int, dest="max_branches")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hag", description="Topic-adaptive agent populations and their evaluation.")
    parser.add_argument("--offline", action="store_true", help="forbid all network access")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tree = sub.add_parser("tree", help="distribution trees").add_subparsers(dest="action", required=True)
    tb = tree.add_parser("build", help="build a distribution tree for a topic")
    tb.add_argument("--topic", required=True)
    tb.add_argument("--min-path-prob", type=float, dest="min_path_prob")
    tb.add_argument("--show", action="store_true", help="also print the indented tree")
    _common(tb)

    gen = sub.add_parser("generate", help="build (or load) a tree and ground it in a database")
    gen.add_argument("--topic", required=True)
    gen.add_argument("--size", type=int, required=True, dest="N")
    gen.add_argument("--db")
    gen.add_argument("--tree", help="use this tree file instead of building one")
    gen.add_argument("--min-path-prob", type=float, dest="min_path_prob")
    _common(gen)

    base = sub.add_parser("baseline", help="run one of the comparison generators")
    base.add_argument("--method", required=True, help=", ".join(m.slug for m in Method))
    base.add_argument("--topic", required=True)
    base.add_argument("--size", type=int, required=True, dest="N")
    base.add_argument("--db")
    base.add_argument("--embedder", choices=["hash", "http"])
    _common(base)

    bench = sub.add_parser("bench", help="ground-truth benchmarks").add_subparsers(dest="action", required=True)
    bb = bench.add_parser("build", help="infer a ground-truth population from a post corpus")
    bb.add_argument("--corpus", help="JSON-lines corpus (default: bundled toy corpus)")
    bb.add_argument("--theme")
    bb.add_argument("--topic", required=True)
    bb.add_argument("--force", action="store_true", help="skip the minimum-user check")
    bb.add_argument("--min-tokens", type=int, default=15)
    bb.add_argument("--min-texts", type=int, default=1)
    bb.add_argument("--max-texts", type=int)
    bb.add_argument("--since")
    bb.add_argument("--until")
    bb.add_argument("--keep-urls", action="store_true")
    _common(bb)

    ev = sub.add_parser("eval", help="score a generated population against ground truth")
    ev.add_argument("--gen", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--judge", choices=["none", "mock", "http", "replay"])
    ev.add_argument("--k", type=int, dest="K")
    ev.add_argument("--embedder", choices=["hash", "http"])
    ev.add_argument("--show", action="store_true", help="print the metric table instead of JSON")
    _common(ev)

    run = sub.add_parser("run", help="run a topic x method experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--topic", action="append", help="restrict to these topic labels")
    run.add_argument("--method", action="append")
    run.add_argument("--label")
    run.add_argument("--run-dir", help="exact output directory (default: runs/<timestamp>-<label>)")

    ins = sub.add_parser("inspect", help="render a tree, population or report file")
    ins.add_argument("path")

    exp = sub.add_parser("export", help="export raw data").add_subparsers(dest="action", required=True)
    ee = exp.add_parser("embeddings", help="persona embeddings as JSON lines")
    ee.add_argument("--pop", required=True)
    ee.add_argument("--embedder", choices=["hash", "http"])
    ee.add_argument("--out", required=True)
    ee.add_argument("--config")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    config = config.with_env()
    keys = (
        "seed", "provider", "model", "transcript", "record", "max_depth", "max_branches",
        "min_path_prob", "N", "db", "embedder", "judge", "K", "label",
    )
    config = config.override(**{k: getattr(args, k, None) for k in keys})
    if args.offline:
        config = config.override(offline=True)
    return config


def _emit(doc: dict, out: str | None) -> None:
    if out:
        io.write_json(out, doc)
    else:
        sys.stdout.write(io.dumps(doc))


def _cmd_tree(args, config: RunConfig) -> None:
    schema = load_schema(config)
    provider = build_provider(config)
    tree = prune(build_tree(args.topic, schema, provider, workers=config.workers), config.min_path_prob)
    tree = type(tree)(tree.topic, tree.dim_sequence, tree.children, {**tree.meta, "config": config.to_dict(), "seed": config.seed})
    if args.out:
        save_tree(tree, args.out)
    else:
        _emit(tree.to_dict(), None)
    if args.show:
        print(render_tree(tree, schema), file=sys.stderr if not args.out else sys.stdout)


def _cmd_generate(args, config: RunConfig) -> None:
    schema = load_schema(config)
    provider = build_provider(config)
    db = load_database(config, schema)
    if args.tree:
        tree = prune(load_tree(args.tree), config.min_path_prob)
    else:
        tree = prune(build_tree(args.topic, schema, provider, workers=config.workers), config.min_path_prob)
    pop = instantiate(tree, db, config.N, provider, config.seed, schema, workers=config.workers)
    _emit(attach(pop, config=config.to_dict()).to_dict(), args.out)


def _cmd_baseline(args, config: RunConfig) -> None:
    schema = load_schema(config)
    method = Method.parse(args.method)
    provider = build_provider(config) if method in (Method.LLM_GENERATE, Method.HAG_FLAT, Method.HAG) else None
    db = load_database(config, schema) if method is not Method.LLM_GENERATE else None
    embedder = build_embedder(config) if method is Method.TOPIC_RETRIEVAL else None
    options = {"min_path_prob": config.min_path_prob} if method is Method.HAG else {}
    spec = GeneratorSpec(method, args.topic, config.N, config.seed, options)
    pop = run_generator(spec, db, provider, embedder, schema)
    _emit(attach(pop, config=config.to_dict()).to_dict(), args.out)


def _cmd_bench(args, config: RunConfig) -> None:
    schema = load_schema(config)
    provider = build_provider(config)
    policy = FilterPolicy(
        min_tokens=args.min_tokens,
        start=parse_timestamp(args.since) if args.since else None,
        end=parse_timestamp(args.until) if args.until else None,
        min_texts=args.min_texts,
        max_texts=args.max_texts,
        strip_urls=not args.keep_urls,
    )
    corpus = args.corpus or toy_corpus_path()
    pop = build_benchmark(
        load_corpus(corpus), args.topic, provider, policy, args.theme, schema, args.force, config.workers,
        meta={"corpus": Path(corpus).name, "config": config.to_dict(), "seed": config.seed},
    )
    _emit(pop.to_dict(), args.out)


def _cmd_eval(args, config: RunConfig) -> None:
    schema = load_schema(config)
    gen, gt = Population.load(args.gen), Population.load(args.gt)
    judge = None if config.offline else build_judge(config)
    report = evaluate(gen, gt, eval_config(config), schema, judge, build_embedder(config))
    report.config = {**report.config, "run": config.to_dict(), "seed": config.seed}
    if args.out:
        report.save(args.out)
    if args.show:
        print(render_report(report))
    elif not args.out:
        _emit(report.to_dict(), None)


def _cmd_run(args, config: RunConfig) -> None:
    topics = list(config.topics)
    if args.topic:
        topics = [t for t in topics if t.label in args.topic]
        missing = set(args.topic) - {t.label for t in topics}
        if missing:
            raise ValueError(f"unknown topic labels: {sorted(missing)}")
    run_dir = run_experiment(config, topics, args.method, args.run_dir)
    print(inspect(run_dir / "summary.json"))
    print(f"\nwrote {run_dir}")


def _cmd_inspect(args, config: RunConfig) -> None:
    print(inspect(args.path))


def _cmd_export(args, config: RunConfig) -> None:
    count = export_embeddings(Population.load(args.pop), build_embedder(config), args.out)
    print(f"wrote {count} vectors to {args.out}")


COMMANDS = {
    "tree": _cmd_tree,
    "generate": _cmd_generate,
    "baseline": _cmd_baseline,
    "bench": _cmd_bench,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "inspect": _cmd_inspect,
    "export": _cmd_export,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.offline:
        os.environ["HAG_OFFLINE"] = "1"
    try:
        config = _config(args)
        COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"hag: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"hag: provider failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except DataError as exc:
        print(f"hag: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, HagError) as exc:
        print(f"hag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
