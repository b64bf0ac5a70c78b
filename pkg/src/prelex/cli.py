"""Command-line surface: prepare, train, eval, lexicon tools, grad-check.

Exit codes: 0 success, 1 usage error, 2 data/IO error, 3 numeric failure.
Progress and summaries go to stderr; machine-readable output goes only to
the files named by flags, so re-running a command with identical flags and
seed reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .checkpoint import (
    check_fingerprint, load_checkpoint, restore_model, save_checkpoint,
)
from .corpus import DataError, load_dataset
from .embeddings import embedding_rng, load_embeddings, random_embeddings
from .gradsuite import run_suite
from .lexicon import (
    DEFAULT_GRID, load_hand_lexicon, parse_grid, precision_curve, rank_lexicon,
    read_ranked_tsv, similarity_curve, write_curve_csv, write_ranked_tsv,
)
from .preattention import vocab_attention_table
from .tensor import NumericError
from .training import TrainConfig, evaluate, train

PROG = "prelex"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise UsageError(message)


def _say(msg: str) -> None:
    print(f"{PROG}: {msg}", file=sys.stderr)


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="dataset root directory")
        p.add_argument("--dataset", required=True, choices=("imdb", "subj", "mr"))
        p.add_argument("--embeddings", help="word2vec TEXT file; random init if absent")

    p = sub.add_parser("prepare", help="load a dataset, report stats, write the vocabulary")
    add_data_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="vocabulary file to write (token per line)")

    p = sub.add_parser("train", help="train a variant and write a checkpoint directory")
    add_data_flags(p)
    p.add_argument("--config", help="JSON file of TrainConfig fields")
    p.add_argument("--variant", choices=(
        "text-cnn", "pre-attn-text-cnn", "att-blstm", "pre-attn-att-blstm"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="checkpoint directory to write")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    add_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test", "dev"), default="test")
    p.add_argument("--out", help="JSON report file (summary always goes to stderr)")

    p = sub.add_parser("lexicon-extract",
                       help="rank the vocabulary by attention and write a TSV")
    add_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="ranked lexicon TSV to write")

    p = sub.add_parser("lexicon-compare",
                       help="overlap curve y(p) (or Y(p)) of two ranked lexicons")
    p.add_argument("--a", required=True, dest="lex_a")
    p.add_argument("--b", required=True, dest="lex_b")
    p.add_argument("--grid", default=",".join(str(p) for p in DEFAULT_GRID))
    p.add_argument("--relative", action="store_true",
                   help="write Y(p) = y(p)/(1-p) instead of y(p)")
    p.add_argument("--out", required=True, help="CSV file to write")

    p = sub.add_parser("lexicon-precision",
                       help="precision of top slices against a handcrafted lexicon")
    p.add_argument("--a", required=True, dest="lex_a", help="ranked lexicon TSV")
    p.add_argument("--lexicon", required=True, help="handcrafted lexicon file")
    p.add_argument("--grid", default=",".join(str(p) for p in DEFAULT_GRID))
    p.add_argument("--out", required=True, help="CSV file to write")

    p = sub.add_parser("grad-check", help="run the finite-difference gradient gate")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _load_corpus(args, seed: int, max_len: int | None = None):
    split, vocab = load_dataset(args.dataset, args.data, seed, max_len=max_len)
    _say(f"{args.dataset}: train/test/dev sizes {split.sizes()}, |V|={len(vocab)}")
    return split, vocab


def _build_embeddings(args, vocab, dim: int, seed: int):
    rng = embedding_rng(seed)
    if args.embeddings:
        emb = load_embeddings(args.embeddings, vocab, dim, rng)
        _say(f"embeddings: {args.embeddings}, coverage {emb.coverage:.4f}")
    else:
        emb = random_embeddings(vocab, dim, rng)
        _say(f"embeddings: random init, dim {dim}")
    return emb


def _cmd_prepare(args) -> int:
    split, vocab = _load_corpus(args, args.seed)
    if args.embeddings:
        probe_dim = _peek_embedding_dim(args.embeddings)
        _build_embeddings(args, vocab, probe_dim, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")
    _say(f"wrote vocabulary to {out}")
    return 0


def _peek_embedding_dim(path) -> int:
    with open(path, encoding="utf-8", errors="replace") as fh:
        parts = fh.readline().split()
    if len(parts) != 2:
        raise DataError(f"{path}:1: malformed word2vec header")
    return int(parts[1])


def _build_train_config(args) -> TrainConfig:
    fields: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"missing config file: {path}")
        loaded = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise DataError(f"{path}: config must be a JSON object")
        fields.update(loaded)
    if args.variant:
        fields["variant"] = args.variant
    if args.seed is not None:
        fields["seed"] = args.seed
    if "variant" not in fields:
        raise UsageError("a variant is required (--variant or config file)")
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(fields) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    defaults = TrainConfig.for_variant(fields["variant"]).to_dict()
    defaults.update(fields)
    try:
        return TrainConfig.from_dict(defaults)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cmd_train(args) -> int:
    config = _build_train_config(args)
    split, vocab = _load_corpus(args, config.seed, max_len=config.max_len)
    dim = _peek_embedding_dim(args.embeddings) if args.embeddings else config.embedding_dim
    if args.embeddings and dim != config.embedding_dim:
        _say(f"embedding_dim {config.embedding_dim} -> {dim} to match the file")
        config = TrainConfig.from_dict({**config.to_dict(), "embedding_dim": dim})
    emb = _build_embeddings(args, vocab, dim, config.seed)
    ckpt = train(config, split, emb, vocab_fingerprint=vocab.fingerprint(), log=_say)
    save_checkpoint(ckpt, args.out)
    best = next(r for r in ckpt.history if r.epoch == ckpt.best_epoch)
    _say(f"best epoch {best.epoch} dev_accuracy {best.dev_accuracy:.6f}; "
         f"checkpoint written to {args.out}")
    return 0


def _restore(args):
    ckpt = load_checkpoint(args.checkpoint)
    split, vocab = _load_corpus(args, ckpt.config.seed, max_len=ckpt.config.max_len)
    check_fingerprint(ckpt, vocab)
    emb = _build_embeddings(args, vocab, ckpt.config.embedding_dim, ckpt.config.seed)
    return ckpt, split, vocab, emb


def _cmd_eval(args) -> int:
    ckpt, split, vocab, emb = _restore(args)
    model = restore_model(ckpt, emb)
    examples = getattr(split, args.split)
    report = evaluate(model, examples)
    _say(f"{args.split} accuracy {report.accuracy:.6f} "
         f"({report.correct}/{report.total}), loss {report.loss:.6f}")
    if args.out:
        payload = asdict(report)
        payload["per_class"] = {str(k): v for k, v in report.per_class.items()}
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _say(f"wrote report to {args.out}")
    return 0


def _cmd_lexicon_extract(args) -> int:
    ckpt, _split, vocab, emb = _restore(args)
    if not ckpt.has_pre_attention():
        raise UsageError(
            f"checkpoint variant {ckpt.config.variant!r} has no pre-attention layer"
        )
    model = restore_model(ckpt, emb)
    table = vocab_attention_table(emb, model.pre_attn)
    lex = rank_lexicon(table, vocab, source=ckpt.config.variant)
    write_ranked_tsv(lex, args.out)
    _say(f"wrote {lex.k} ranked tokens to {args.out}")
    return 0


def _cmd_lexicon_compare(args) -> int:
    grid = parse_grid(args.grid)
    lex_a = read_ranked_tsv(args.lex_a)
    lex_b = read_ranked_tsv(args.lex_b)
    points = similarity_curve(lex_a, lex_b, grid, relative=args.relative)
    write_curve_csv(points, args.out)
    metric = "Y(p)" if args.relative else "y(p)"
    _say(f"wrote {metric} over {len(points)} grid points to {args.out}")
    return 0


def _cmd_lexicon_precision(args) -> int:
    grid = parse_grid(args.grid)
    lex = read_ranked_tsv(args.lex_a)
    hand = load_hand_lexicon(args.lexicon)
    points = precision_curve(lex, hand, grid)
    write_curve_csv(points, args.out)
    _say(f"wrote L(p) over {len(points)} grid points to {args.out}")
    return 0


def _cmd_grad_check(args) -> int:
    results = run_suite(instances=args.instances, seed=args.seed)
    failures = 0
    by_name: dict[str, list] = {}
    for r in results:
        by_name.setdefault(r.name, []).append(r)
    for name, rs in by_name.items():
        worst = max(r.report.max_rel_error for r in rs)
        ok = all(r.passed for r in rs)
        failures += sum(not r.passed for r in rs)
        _say(f"{name}: {'pass' if ok else 'FAIL'} "
             f"({len(rs)} instances, worst rel error {worst:.2e})")
    if failures:
        raise NumericError(f"{failures} gradient check(s) failed")
    _say("all gradient checks passed")
    return 0


_COMMANDS = {
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "lexicon-extract": _cmd_lexicon_extract,
    "lexicon-compare": _cmd_lexicon_compare,
    "lexicon-precision": _cmd_lexicon_precision,
    "grad-check": _cmd_grad_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        _say(f"usage error: {exc}")
        return 1
    except ValueError as exc:
        _say(f"usage error: {exc}")
        return 1
    except NumericError as exc:
        _say(f"numeric failure: {exc}")
        return 3
    except (DataError, OSError, RuntimeError) as exc:
        _say(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
