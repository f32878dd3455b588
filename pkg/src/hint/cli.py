"""Command line front end: ``hint {preprocess,train,predict,interpret,evaluate}``.

Exit status is 0 on success, 1 on usage errors (bad flags, missing or
invalid config) and 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, config_to_dict, load_config
from .corpus import Corpus, EmbeddingTable, TfidfStats, Vocabulary, load_documents, write_jsonl
from .errors import ConfigError, HintError

log = logging.getLogger("hint")

METRICS = ("accuracy", "prf", "npmi", "uci", "cv", "completeness", "removal", "rationale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_help()}\n{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hint", description="Train and explain the topic-aware hierarchical text classifier.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, config_required=False, checkpoint=False, input_=False):
        sp.add_argument("--config", required=config_required, help="TOML run configuration")
        if checkpoint:
            sp.add_argument("--checkpoint", required=True)
        if input_:
            sp.add_argument("--input", required=True, help="JSONL documents {id, text, label}")
        sp.add_argument("--output", help="output path")
        sp.add_argument("--seed", type=int, help="override train.seed")

    common(sub.add_parser("preprocess", help="build vocabulary, TFIDF and embedding artifacts"), True)
    common(sub.add_parser("train", help="train a model; writes a checkpoint and a JSONL log"), True)
    common(sub.add_parser("predict", help="label documents; writes predictions JSONL"), checkpoint=True, input_=True)
    sp = sub.add_parser("interpret", help="write one explanation report per document")
    common(sp, checkpoint=True, input_=True)
    sp.add_argument("--format", choices=("json", "html"))
    sp.add_argument("--top-n", type=int)
    sp = sub.add_parser("evaluate", help="compute metrics; writes a metrics JSON report")
    common(sp, checkpoint=True, input_=True)
    sp.add_argument("--metric", help=f"comma-separated subset of {','.join(METRICS)}")
    sp.add_argument("--bins", help="comma-separated rationale percentages, e.g. 1,5,10,20,50")
    sp.add_argument("--ks", help="comma-separated removal sizes")
    sp.add_argument("--strategy", default="context", choices=("context", "topic", "unique_topic"))
    sp.add_argument("--rationales", help="gold rationale JSONL for the 'rationale' metric")
    return p


def _int_list(text, flag):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}") from None


def resolve_config(args) -> RunConfig:
    """Load the config (or defaults), apply flag overrides and validate."""
    if args.config:
        try:
            cfg = load_config(args.config, check_paths=True)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.train.seed = args.seed
    if getattr(args, "format", None):
        cfg.interpret.format = args.format
    if getattr(args, "top_n", None) is not None:
        cfg.interpret.top_n = args.top_n
    if getattr(args, "bins", None):
        cfg.evaluate.bins = _int_list(args.bins, "--bins")
    if getattr(args, "ks", None):
        cfg.evaluate.ks = _int_list(args.ks, "--ks")
    if getattr(args, "metric", None):
        cfg.evaluate.metrics = [m.strip() for m in args.metric.split(",") if m.strip()]
    unknown = [m for m in cfg.evaluate.metrics if m not in METRICS]
    if unknown:
        raise UsageError(f"unknown metric(s): {', '.join(unknown)}")
    if args.command == "evaluate" and "rationale" in cfg.evaluate.metrics and not args.rationales:
        raise UsageError("the rationale metric needs --rationales")
    if args.command in ("preprocess", "train") and cfg.data.train is None:
        raise UsageError("config is missing data.train")
    try:
        cfg.validate(check_paths=True)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    for name in ("checkpoint", "input", "rationales"):
        path = getattr(args, name, None)
        if path and not os.path.exists(path):
            raise UsageError(f"--{name}: no such file {path!r}")
    return cfg


# ---------------------------------------------------------------- artifacts

def _cache_key(cfg: RunConfig) -> str:
    h = hashlib.sha256()
    for name in ("train", "embeddings"):
        path = getattr(cfg.data, name)
        if path:
            h.update(Path(path).read_bytes())
        h.update(b"\0")
    h.update(json.dumps(config_to_dict(cfg.preprocess), sort_keys=True).encode())
    h.update(str(cfg.train.seed).encode())
    return h.hexdigest()[:16]


def save_artifacts(directory: Path, corpus: Corpus, key: str):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "vocab.json").write_text(json.dumps(corpus.vocab.to_dict()) + "\n")
    (directory / "tfidf.json").write_text(json.dumps(corpus.tfidf.to_dict()) + "\n")
    np.save(directory / "embeddings.npy", corpus.embeddings.matrix)
    (directory / "meta.json").write_text(json.dumps({"key": key, "matched": corpus.embeddings.matched}) + "\n")


def load_artifacts(directory: Path, key: str) -> Corpus | None:
    meta = directory / "meta.json"
    if not meta.exists():
        return None
    info = json.loads(meta.read_text())
    if info.get("key") != key:
        return None
    vocab = Vocabulary.from_dict(json.loads((directory / "vocab.json").read_text()))
    tfidf = TfidfStats.from_dict(json.loads((directory / "tfidf.json").read_text()))
    emb = EmbeddingTable(np.load(directory / "embeddings.npy"), info.get("matched", 0))
    return Corpus(vocab, tfidf, emb)


def _cache_dir(key: str) -> Path | None:
    root = os.environ.get("HINT_CACHE_DIR")
    return Path(root) / key if root else None


def build_corpus(cfg: RunConfig):
    train_docs = load_documents(cfg.data.train, cfg.preprocess)
    key = _cache_key(cfg)
    cache = _cache_dir(key)
    corpus = load_artifacts(cache, key) if cache else None
    if corpus is None:
        corpus = Corpus.build(train_docs, cfg.preprocess, cfg.data.embeddings, seed=cfg.train.seed)
        if cache:
            save_artifacts(cache, corpus, key)
    else:
        log.info("using cached artifacts in %s", cache)
    train_docs = corpus.prepare(train_docs, cfg.preprocess, split="train")
    return corpus, train_docs, key


# ---------------------------------------------------------------- commands

def cmd_preprocess(args, cfg):
    corpus, _, key = build_corpus(cfg)
    out = Path(args.output) if args.output else (_cache_dir(key) or Path("hint_artifacts"))
    save_artifacts(out, corpus, key)
    print(f"wrote artifacts for {len(corpus.vocab)} tokens to {out}")


def cmd_train(args, cfg):
    from .trainer import save_checkpoint, train

    out = Path(args.output or "model.bin")
    corpus, train_docs, _ = build_corpus(cfg)
    val_docs = corpus.prepare(load_documents(cfg.data.val, cfg.preprocess), cfg.preprocess, "val") if cfg.data.val else None
    log_path = out.with_name(out.name + ".log.jsonl")
    result = train(train_docs, corpus, cfg.model, cfg.train, val_docs, log_path=log_path)
    save_checkpoint(out, result.model, corpus, cfg.train, cfg.preprocess)
    print(f"wrote {out} (best epoch {result.best_epoch}) and {log_path}")


def _load(args):
    from .trainer import load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    pc = ckpt.preprocess_config
    docs = load_documents(args.input, pc)
    docs = ckpt.corpus.prepare(docs, pc, split="test")
    return ckpt, docs


def cmd_predict(args, cfg):
    from .trainer import predict_many

    ckpt, docs = _load(args)
    probs = predict_many(ckpt.model, docs, ckpt.corpus)
    rows = [{"id": d.id, "label": int(p.argmax()), "probs": [float(x) for x in p]} for d, p in zip(docs, probs)]
    out = args.output or "predictions.jsonl"
    write_jsonl(out, rows)
    print(f"wrote {len(rows)} predictions to {out}")


def _safe_name(doc_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", doc_id) or "doc"


def cmd_interpret(args, cfg):
    from .interpret import document_interpretation, render_report

    ckpt, docs = _load(args)
    out = Path(args.output or "reports")
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.interpret.format
    for doc in docs:
        report = document_interpretation(ckpt.model, doc, ckpt.corpus, top_n=cfg.interpret.top_n)
        (out / f"{_safe_name(doc.id)}.{fmt}").write_bytes(render_report(report, fmt))
    print(f"wrote {len(docs)} {fmt} reports to {out}")


def cmd_evaluate(args, cfg):
    from . import evalkit
    from .interpret import model_topic_word_table
    from .trainer import predict_many

    ckpt, docs = _load(args)
    model, corpus = ckpt.model, ckpt.corpus
    metrics = cfg.evaluate.metrics
    report = evalkit.MetricsReport()
    golds = [d.label for d in docs]
    if "accuracy" in metrics or "prf" in metrics:
        preds = predict_many(model, docs, corpus).argmax(-1)
        report.accuracy = evalkit.accuracy(preds, golds)
        if "prf" in metrics:
            report.per_class = evalkit.per_class_prf(preds, golds, model.config.num_classes)
    coherence = [m for m in metrics if m in ("npmi", "uci", "cv")]
    if coherence:
        reference = load_documents(cfg.data.train, ckpt.preprocess_config) if cfg.data.train else docs
        table = model_topic_word_table(model, cfg.interpret.top_n)
        topics = [table.top_tokens(corpus.vocab, k) for k in range(len(table.words))]
        for m in coherence:
            window = cfg.evaluate.uci_window if m == "uci" else cfg.evaluate.npmi_window
            report.coherence[m] = evalkit.topic_coherence(topics, reference, m, window).to_dict()
    if "completeness" in metrics:
        report.faithfulness = evalkit.aggregate_faithfulness(model, docs, corpus, cfg.evaluate.bins)
    if "removal" in metrics:
        lists = evalkit.removal_lists(model, docs, corpus, args.strategy, [0] + list(cfg.evaluate.ks))
        report.removal = {"strategy": args.strategy, **evalkit.word_removal_curve(model, docs, corpus, lists)}
    if "rationale" in metrics:
        gold = evalkit.read_rationales(args.rationales)
        rows = []
        for doc in docs:
            if doc.id not in gold:
                continue
            g = gold[doc.id]
            g.check_bounds(doc)
            pred = evalkit.predicted_rationale(model, doc, corpus, len(g.indices))
            rows.append(evalkit.rationale_agreement(pred, g))
        p, r, f = (float(np.mean(col)) for col in zip(*rows)) if rows else (0.0, 0.0, 0.0)
        report.rationale = {"precision": p, "recall": r, "f1": f, "documents": len(rows)}
    out = Path(args.output or "metrics.json")
    out.write_text(report.to_json())
    print(f"wrote {out}")


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "predict": cmd_predict,
    "interpret": cmd_interpret,
    "evaluate": cmd_evaluate,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (HintError, OSError, ValueError) as exc:
        print(f"hint {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
