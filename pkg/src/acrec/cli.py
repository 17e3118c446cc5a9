"""Operator entry points.

Subcommands: ingest, embed, extract, train, eval, serve, recommend.
Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
A JSON config file can supply any flag's long name; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation
from .domain import ACDescription, DomainError, Split
from .embed import (
    CacheMissError,
    CachingEmbedder,
    EmbedError,
    EmbeddingProviderConfig,
    FileCacheEmbedder,
    make_provider,
)
from .ingest import IngestError, write_jsonl
from .model import AcRecModel, FcnConfig, FcnModel, ModelConfig
from .pipeline import build_bank, corpus_texts, load_prepared, run_ingest
from .train import (
    TrainConfig,
    build_train_samples,
    config_digest,
    evaluate_split,
    fit,
    load_checkpoint,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class CliUsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise CliUsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="acrec", description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", type=Path, help="JSON file of flag defaults")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="prepare a corpus directory from raw files")
    p.add_argument("--books", required=True, type=Path)
    p.add_argument("--interactions", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--per-band", type=int, default=None)
    p.add_argument("--band-width", type=int, default=50)
    p.add_argument("--min-books", type=int, default=20)
    p.add_argument("--max-books", type=int, default=500)
    p.add_argument("--ac-mode", choices=["verbatim", "lexicon"], default="verbatim")

    p = sub.add_parser("embed", help="populate the embedding cache for a corpus")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--provider", choices=["remote", "hash", "file_cache"], default="hash")
    p.add_argument("--out", required=True, type=Path, help="cache directory")
    p.add_argument("--endpoint")
    p.add_argument("--model-id", default="hash-3gram-v1")
    p.add_argument("--dim", type=int, default=768)

    p = sub.add_parser("extract", help="run statement extraction over useful-step reviews")
    p.add_argument("--reviews", required=True, type=Path, help="corpus dir (uses its splits)")
    p.add_argument("--mode", choices=["remote", "fixture", "lexicon"], default="lexicon")
    p.add_argument("--out", required=True, type=Path, help="statement store path")
    p.add_argument("--endpoint")
    p.add_argument("--llm-model", help="model name for --mode remote")
    p.add_argument("--fixtures", type=Path, help="fixture store for --mode fixture")
    p.add_argument("--update-corpus", action="store_true",
                   help="rewrite the corpus ac_texts.jsonl from extracted statements")

    p = sub.add_parser("train", help="fit a scorer on a prepared corpus")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--model", choices=["acrec", "fcn"], default="acrec")
    p.add_argument("--use-cosine", action="store_true")
    p.add_argument("--fcn-hidden-layers", type=int, default=3, help="hidden layers for --model fcn")
    p.add_argument("--out", required=True, type=Path, help="checkpoint directory")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--k-negatives", type=int, default=10)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--val-protocol", choices=["val101", "top1of20"], default="val101")

    p = sub.add_parser("eval", help="run a ranking protocol from a checkpoint")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--cache", required=True, type=Path)
    p.add_argument("--protocol", choices=sorted(evaluation.PROTOCOLS), default="val101")
    p.add_argument("--split", choices=["validation", "test"], default="test")
    p.add_argument("--out", required=True, type=Path, help="report JSON path")

    p = sub.add_parser("serve", help="start the recommendation service")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--cache", type=Path, help="embedding cache (defaults to hash provider)")
    p.add_argument("--statements", type=Path, help="statement store for the selection mode")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("recommend", help="one-shot ranking to stdout")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--cache", type=Path)
    p.add_argument("--user", required=True)
    p.add_argument("--ac", required=True, help="free-text AC description")
    p.add_argument("-k", type=int, default=10)
    return parser


def _apply_config_file(parser: Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot read config file {args.config}: {exc}") from exc
        known = {k.replace("-", "_"): v for k, v in defaults.items()}
        explicit = _explicit_flags(argv)
        for key, value in known.items():
            if hasattr(args, key) and key not in explicit:
                setattr(args, key, value)
    return args


def _explicit_flags(argv: list[str]) -> set[str]:
    out = set()
    for tok in argv:
        if tok.startswith("--"):
            out.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return out


def _provider_for(cache_dir: Path | None, seed: int, dim: int = 768):
    if cache_dir is not None:
        return FileCacheEmbedder(cache_dir)
    from .embed import HashEmbedder

    return HashEmbedder(dim=dim, seed=seed)


def _load_samples(prepared, bank, split: Split, m: int):
    return build_train_samples(bank, prepared.histories, prepared.steps_for(split), m)


def cmd_ingest(args) -> int:
    prepared = run_ingest(
        args.books,
        args.interactions,
        out_dir=args.out,
        per_band=args.per_band,
        band_width=args.band_width,
        min_books=args.min_books,
        max_books=args.max_books,
        seed=args.seed,
        ac_mode=args.ac_mode,
    )
    print(
        f"ingested {prepared.stats['n_users']} users, {prepared.stats['n_books']} books, "
        f"{prepared.stats['n_useful']} useful steps -> {args.out}"
    )
    for warning in prepared.stats.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def cmd_embed(args) -> int:
    prepared = load_prepared(args.corpus)
    texts = corpus_texts(prepared)
    config = EmbeddingProviderConfig(
        provider_kind=args.provider,
        model_id=args.model_id,
        dim=args.dim,
        endpoint=args.endpoint,
        cache_dir=str(args.out) if args.provider == "file_cache" else None,
        seed=args.seed,
    )
    inner = make_provider(config)
    if args.provider == "file_cache":
        # verify the cache covers the corpus; there is nothing to populate
        for t in texts:
            inner.embed_text(t)
        print(f"cache at {args.out} covers all {len(texts)} corpus texts")
        return EXIT_OK
    provider = CachingEmbedder(inner, args.out)
    provider.embed_batch(texts)
    print(f"cached {len(provider.cache)} vectors for {len(texts)} texts -> {args.out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    from .taxonomy import (
        ExtractionPipeline,
        FixtureLlmClient,
        HttpLlmClient,
        LexiconExtractor,
        StatementRepository,
        save_statements,
    )
    from .taxonomy.statements import StatementError

    prepared = load_prepared(args.reviews)
    if args.mode == "lexicon":
        extractor = LexiconExtractor()
    elif args.mode == "fixture":
        if not args.fixtures:
            raise CliUsageError("--mode fixture requires --fixtures")
        extractor = ExtractionPipeline(FixtureLlmClient.from_file(args.fixtures))
    else:
        if not args.endpoint or not args.llm_model:
            raise CliUsageError("--mode remote requires --endpoint and --llm-model")
        extractor = ExtractionPipeline(HttpLlmClient(args.endpoint, args.llm_model))

    repo = StatementRepository()
    ac_texts = {}
    n_skipped = 0
    for step in prepared.steps:
        result = extractor.extract(step.review)
        if result.skipped:
            n_skipped += 1
            continue
        for s in result.statements:
            try:
                repo.add(s)
            except StatementError:
                pass  # identical reviews produce identical ids; keep the first
        rendered = " ".join(s.text for s in sorted(result.statements, key=lambda s: s.id))
        ac_texts[(step.user, step.step_index)] = rendered if rendered.strip() else step.review
    save_statements(args.out, repo)
    print(f"extracted {len(repo)} statements from {len(prepared.steps)} reviews "
          f"({n_skipped} skipped) -> {args.out}")
    if args.update_corpus:
        write_jsonl(
            Path(args.reviews) / "ac_texts.jsonl",
            (
                {"user_id": u, "step_index": ix, "text": text}
                for (u, ix), text in sorted(ac_texts.items())
            ),
            meta={"config_digest": config_digest({"mode": args.mode})},
        )
        print(f"updated {args.reviews}/ac_texts.jsonl")
    return EXIT_OK


def _build_scorer(args, d_raw: int):
    if args.model == "acrec":
        return AcRecModel(
            ModelConfig(d_raw=d_raw, m=args.window, use_cosine=args.use_cosine), seed=args.seed
        )
    return FcnModel(FcnConfig(d_raw=d_raw, n_hidden=args.fcn_hidden_layers), seed=args.seed)


def cmd_train(args) -> int:
    prepared = load_prepared(args.corpus)
    provider = FileCacheEmbedder(args.cache)
    bank = build_bank(prepared, provider)
    scorer = _build_scorer(args, provider.config.dim)
    m = args.window if args.model == "acrec" else 1
    train_samples = _load_samples(prepared, bank, Split.TRAIN, m)
    val_samples = _load_samples(prepared, bank, Split.VALIDATION, m)
    tc = TrainConfig(
        lr=args.lr,
        k_negatives=args.k_negatives,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        checkpoint_dir=str(args.out),
        log_path=str(Path(args.out) / "train_log.jsonl"),
        val_protocol=args.val_protocol,
    )
    result = fit(scorer, train_samples, val_samples, bank, prepared.histories, tc)
    print(
        f"best epoch {result.best_epoch} val HR@10 {result.best_val_hr10:.1f} "
        f"-> {args.out}/best"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    prepared = load_prepared(args.corpus)
    provider = FileCacheEmbedder(args.cache)
    bank = build_bank(prepared, provider)
    scorer, manifest = load_checkpoint(args.ckpt)
    m = getattr(scorer.config, "m", 1)
    split = Split.VALIDATION if args.split == "validation" else Split.TEST
    samples = _load_samples(prepared, bank, split, m)
    report = evaluate_split(scorer, samples, bank, prepared.histories, args.protocol, args.seed)
    evaluation.write_report(
        args.out, report, args.protocol, manifest.get("config_digest", ""), args.seed
    )
    hr10 = report.hr.get(10, 0.0)
    print(f"{args.protocol} on {args.split}: HR@10={hr10:.1f} n={report.n_queries} -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    state = build_service_state(args)
    from .service import create_app

    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_service_state(args):
    from .service import LoadedModel, ServiceState
    from .taxonomy import StatementRepository, load_statements

    prepared = load_prepared(args.corpus)
    scorer, manifest = load_checkpoint(args.ckpt)
    provider = _provider_for(args.cache, args.seed, dim=scorer.config.d_raw)
    bank = build_bank(prepared, provider)
    repo = StatementRepository()
    if getattr(args, "statements", None):
        repo = load_statements(args.statements)
    state = ServiceState(prepared=prepared, bank=bank, provider=provider, repository=repo)
    state.swap_model(LoadedModel.build(scorer, manifest.get("config_digest", ""), bank))
    return state


def cmd_recommend(args) -> int:
    prepared = load_prepared(args.corpus)
    scorer, manifest = load_checkpoint(args.ckpt)
    provider = _provider_for(args.cache, args.seed, dim=scorer.config.d_raw)
    bank = build_bank(prepared, provider)
    if args.user not in prepared.histories:
        raise IngestError(f"unknown user {args.user!r}")
    ac = ACDescription.from_text(args.ac)
    ac_raw = bank.scale_query(provider.embed_text(ac.rendered).values)

    from .service import LoadedModel, ServiceState

    state = ServiceState(prepared=prepared, bank=bank, provider=provider)
    state.swap_model(LoadedModel.build(scorer, manifest.get("config_digest", ""), bank))
    feats = state.user_features(args.user, ac_raw)
    consumed = prepared.histories[args.user].book_ids
    pool = [b for b in bank.scorable_ids if b not in consumed]
    from .features import candidate_features

    cand = candidate_features(bank, pool, ac_raw, state.model.use_cosine)
    scores = scorer.score_sample(feats, cand, training=False).data
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i]))[: args.k]
    for rank, i in enumerate(order, start=1):
        print(f"{rank:3d}  {scores[i]:+.4f}  {pool[i]}  {prepared.books[pool[i]].title}")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "recommend": cmd_recommend,
}


def main(argv: list[str] | None = None) -> int:
    from .evaluation import EvalError
    from .features import FeatureError
    from .numerics import CheckpointError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        return _COMMANDS[args.command](args)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, DomainError, EmbedError, CacheMissError, EvalError,
            FeatureError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - runtime catch-all maps to exit 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
