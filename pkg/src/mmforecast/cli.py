"""Command-line surface: reproducible pipeline runs over the library modules.

Subcommands: ingest, keywords, dedup (train/apply), embed-fallback, features,
train, predict, backtest, report. MMF_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import run_backtest, report_json_bytes
from .config import (
    ConfigError,
    PipelineConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    save_resolved_config,
)
from .dedup import (
    DedupTrainConfig,
    filter_duplicates,
    load_pair_classifier,
    read_labeled_pairs,
    save_pair_classifier,
    train_pair_classifier,
)
from .embedding import (
    AggregationMode,
    hash_embed_corpus,
    read_embedding_file,
    write_embedding_file,
)
from .evaluation import export_loss_curves, loss_curves_csv
from .features import (
    AlignmentConfig,
    align_news,
    build_rows,
    read_feature_file,
    split_by_date,
    write_feature_file,
)
from .marketdata import RETURN_FIELDS, compute_returns, describe, load_candles
from .models import (
    LstmModel,
    TrainConfig,
    fit_baseline,
    load_model,
    save_model,
    train_lstm,
)
from .newscorpus import (
    augment_keywords,
    load_keyword_supplement,
    load_news,
    load_registry,
    match_articles,
    tfidf_keywords,
)
from .text import tokenize

log = logging.getLogger(__name__)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("MMF_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmf",
        description="Multimodal asset-price forecasting: candles fused with news embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarize input data")
    p.add_argument("--candles", required=True, help="directory of <TICKER>.csv files")
    p.add_argument("--news", help="news corpus JSONL")
    p.add_argument("--registry", help="company registry CSV")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("keywords", help="emit per-company TF-IDF keyword sets")
    p.add_argument("--registry", required=True)
    p.add_argument("--supplement", help="ticker,keyword pairs to union in")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(handler=_cmd_keywords)

    p = sub.add_parser("dedup", help="train or apply the duplicate filter")
    dedup_sub = p.add_subparsers(dest="dedup_command", required=True)

    pt = dedup_sub.add_parser("train", help="train the pair classifier")
    pt.add_argument("--pairs", required=True, help="labeled pairs CSV (id_a,id_b,label)")
    pt.add_argument("--corpus", required=True, help="news corpus JSONL")
    _add_dedup_embedding_flags(pt)
    pt.add_argument("--epochs", type=int, default=60)
    pt.add_argument("--batch-size", type=int, default=32)
    pt.add_argument("--learning-rate", type=float, default=1e-3)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--threshold", type=float, default=0.5)
    pt.add_argument("--out", required=True, help="classifier file path")
    pt.set_defaults(handler=_cmd_dedup_train)

    pa = dedup_sub.add_parser("apply", help="one-shot filter a corpus")
    pa.add_argument("--classifier", required=True)
    pa.add_argument("--corpus", required=True)
    _add_dedup_embedding_flags(pa)
    pa.add_argument("--window-days", type=int, default=3)
    pa.add_argument("--out", required=True, help="retained ids file (one per line)")
    pa.set_defaults(handler=_cmd_dedup_apply)

    p = sub.add_parser("embed-fallback", help="hash-embed a corpus into an EMB1 file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument(
        "--field",
        default="title_body",
        choices=("title", "body", "title_body"),
        help="article text used for the embedding",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_embed_fallback)

    p = sub.add_parser("features", help="build and serialize feature rows")
    p.add_argument("--config", required=True, help="pipeline config TOML")
    p.add_argument("--ticker", action="append", dest="tickers", help="restrict tickers")
    p.add_argument("--modality", choices=("single", "dual"))
    p.add_argument("--agg", choices=("sum", "mean"))
    p.add_argument("--out", required=True, help="FTR1 dataset path")
    p.set_defaults(handler=_cmd_features, seed=None, jobs=None, model=None,
                   train_end=None, test_start=None)

    p = sub.add_parser("train", help="train one model on a feature dataset")
    p.add_argument("--features", required=True, help="FTR1 dataset path")
    p.add_argument("--model", required=True, choices=("lstm", "ols", "knn", "dt", "rf", "gbt"))
    p.add_argument("--train-end", help="use rows on/before this date (default: all rows)")
    p.add_argument("--test-start", help="held-out rows for the LSTM loss curve")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", default=[],
                   help="baseline parameter as name=value (repeatable)")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--curves-out", help="loss curve CSV (LSTM only)")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", help="predict returns for a feature dataset")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="model file path")
    p.add_argument("--out", help="predictions CSV (default stdout)")
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("backtest", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--modality", choices=("single", "dual"))
    p.add_argument("--agg", choices=("sum", "mean"))
    p.add_argument("--model", choices=("lstm", "ols", "knn", "dt", "rf", "gbt"))
    p.add_argument("--train-end")
    p.add_argument("--test-start")
    p.add_argument("--ticker", action="append", dest="tickers")
    p.add_argument("--out", help="output directory override")
    p.set_defaults(handler=_cmd_backtest)

    p = sub.add_parser("report", help="re-render a JSON report")
    p.add_argument("--json", required=True, dest="json_path")
    p.add_argument("--out-text", help="write the text table here (default stdout)")
    p.add_argument("--out-curves", help="write the loss-curve CSV here")
    p.set_defaults(handler=_cmd_report)
    return parser


def _add_dedup_embedding_flags(parser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--embeddings", help="EMB1 file with article vectors")
    group.add_argument("--dim", type=int, help="hash-embed bodies at this dim instead")


def _dedup_provider(args, corpus):
    if args.embeddings:
        return read_embedding_file(args.embeddings)
    return hash_embed_corpus(corpus, dim=args.dim, text_field="body")


def _cmd_ingest(args) -> int:
    candles_dir = Path(args.candles)
    files = sorted(candles_dir.glob("*.csv"))
    if not files:
        raise ConfigError(f"no candle files in {candles_dir}")
    print(f"candles: {len(files)} tickers in {candles_dir}")
    for path in files:
        series = load_candles(path)
        stats = describe(series.field_values("close"))
        returns = compute_returns(series) if len(series) > 1 else None
        line = (
            f"  {series.ticker:<8} {len(series):>5} bars "
            f"{series.dates[0]}..{series.dates[-1]} close mean={stats.mean:.4f} std={stats.std:.4f}"
        )
        if returns is not None:
            line += f" ret mean={float(np.mean(returns.values)):.6f}"
        print(line)
    if args.news:
        corpus = load_news(args.news)
        sources: dict[str, int] = {}
        for article in corpus:
            sources[article.source] = sources.get(article.source, 0) + 1
        print(f"news: {len(corpus)} articles, {len(sources)} sources")
        counts = [(a.source, len(tokenize(a.body, min_len=1))) for a in corpus]
        from .newscorpus import length_stats

        for source, stats in length_stats(counts).items():
            print(
                f"  {source:<24} count={sources[source]:>6} body tokens "
                f"mean={stats.mean:.1f} std={stats.std:.1f} min={stats.min:.0f} max={stats.max:.0f}"
            )
    if args.registry:
        registry = load_registry(args.registry)
        print(f"registry: {len(registry)} companies")
    return 0


def _cmd_keywords(args) -> int:
    registry = load_registry(args.registry)
    keyword_sets = tfidf_keywords(registry, k=args.k)
    if args.supplement:
        with open(args.supplement, "rb") as fh:
            supplement = load_keyword_supplement(fh)
        keyword_sets = [
            augment_keywords(ks, supplement.get(ks.ticker, [])) for ks in keyword_sets
        ]
    payload = {ks.ticker: list(ks.keywords) for ks in keyword_sets}
    text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_dedup_train(args) -> int:
    corpus = load_news(args.corpus)
    with open(args.pairs, "rb") as fh:
        pairs = read_labeled_pairs(fh)
    provider = _dedup_provider(args, corpus)
    config = DedupTrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        threshold=args.threshold,
    )
    classifier, losses = train_pair_classifier(pairs, provider, config)
    save_pair_classifier(args.out, classifier)
    print(f"trained on {len(pairs)} pairs; final loss {losses[-1]:.6f}; wrote {args.out}")
    return 0


def _cmd_dedup_apply(args) -> int:
    corpus = load_news(args.corpus)
    classifier = load_pair_classifier(args.classifier)
    provider = _dedup_provider(args, corpus)
    items = sorted(
        ((a.article_id, a.published_at) for a in corpus), key=lambda x: (x[1], x[0])
    )
    retained = filter_duplicates(items, provider, classifier, window_days=args.window_days)
    Path(args.out).write_text("\n".join(retained) + "\n", encoding="utf-8")
    print(f"retained {len(retained)} of {len(corpus)} articles; wrote {args.out}")
    return 0


def _cmd_embed_fallback(args) -> int:
    corpus = load_news(args.corpus)
    provider = hash_embed_corpus(corpus, dim=args.dim, text_field=args.field)
    write_embedding_file(args.out, provider.records())
    print(f"embedded {len(provider)} articles at dim {args.dim}; wrote {args.out}")
    return 0


def _cmd_features(args) -> int:
    config = apply_overrides(load_config(args.config), args)
    from .backtest import _load_shared, _ticker_rows  # single pipeline implementation

    shared = _load_shared(config)
    rows = []
    for ticker in config.resolve_tickers():
        series = load_candles(Path(config.candles_dir) / f"{ticker}.csv")
        rows.extend(_ticker_rows(config, shared, series))
    write_feature_file(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_train(args) -> int:
    rows = read_feature_file(args.features)
    if args.train_end:
        test_start = args.test_start or args.train_end
        train_rows, test_rows = split_by_date(
            rows, date.fromisoformat(args.train_end), date.fromisoformat(test_start)
        )
        eval_rows = test_rows if args.test_start else None
    else:
        train_rows, eval_rows = rows, None

    if args.model == "lstm":
        config = TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            hidden_dim=args.hidden_dim,
            seed=args.seed,
        )
        model, curves = train_lstm(train_rows, config, eval_rows=eval_rows)
        if args.curves_out:
            lines = ["epoch,model,split,mse"]
            for split_name, values in (("train", curves.train), ("test", curves.test)):
                for epoch, value in enumerate(values, start=1):
                    lines.append(f"{epoch},lstm,{split_name},{value!r}")
            Path(args.curves_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        params = dict(_parse_params(args.param))
        if args.model == "rf":
            params.setdefault("seed", args.seed)
        model = fit_baseline(args.model, train_rows, **params)
    save_model(args.out, model)
    print(f"trained {args.model} on {len(train_rows)} rows; wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    rows = read_feature_file(args.features)
    model = load_model(args.model)
    x = np.stack([r.feature_vector() for r in rows])
    predictions = np.asarray(model.predict(x), dtype=np.float64).ravel()
    lines = ["ticker,date,y_true,y_pred"]
    for row, prediction in zip(rows, predictions):
        lines.append(f"{row.ticker},{row.target_date.isoformat()},{row.y!r},{prediction!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_backtest(args) -> int:
    config = apply_overrides(load_config(args.config), args)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_backtest(config)
    (out_dir / "report.json").write_bytes(report_json_bytes(report))
    (out_dir / "report.txt").write_text(report.render_text(), encoding="utf-8")
    export_loss_curves(report, out_dir / "loss_curves.csv")
    save_resolved_config(config, out_dir / "resolved.toml")
    sys.stdout.write(report.render_text())
    if report.failures and not report.per_ticker:
        print("error: every ticker failed", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    raw = json.loads(Path(args.json_path).read_text(encoding="utf-8"))
    from .evaluation import BacktestReport, MetricSet
    from .models import LossCurves

    report = BacktestReport(config=raw.get("config", {}))
    for ticker, metrics in raw.get("per_ticker", {}).items():
        report.per_ticker[ticker] = MetricSet(
            accuracy=metrics["accuracy"],
            mape=metrics["mape"],
            mae=metrics["mae"],
            r2=float("nan") if metrics["r2"] is None else metrics["r2"],
        )
    if raw.get("averaged"):
        avg = raw["averaged"]
        report.averaged = MetricSet(
            accuracy=avg["accuracy"],
            mape=avg["mape"],
            mae=avg["mae"],
            r2=float("nan") if avg["r2"] is None else avg["r2"],
        )
    for ticker, curves in raw.get("loss_curves", {}).items():
        report.curves[ticker] = LossCurves(train=curves["train"], test=curves["test"])
    report.failures = dict(raw.get("failures", {}))

    text = report.render_text()
    if args.out_text:
        Path(args.out_text).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.out_curves:
        Path(args.out_curves).write_text(loss_curves_csv(report), encoding="utf-8")
    return 0


def _parse_params(items: list[str]) -> dict:
    params = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--param expects name=value, got {item!r}")
        name, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        params[name.strip()] = value
    return params


if __name__ == "__main__":
    sys.exit(main())
