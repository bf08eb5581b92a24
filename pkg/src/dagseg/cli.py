"""Command-line entry points: train, segment, eval, sweep, lattice-dump.

Errors print one line ``error<TAB>kind<TAB>message`` on stderr. Exit codes:
0 ok, 2 config, 3 io, 4 data, 5 numeric.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence, TextIO

from dagseg import model_io
from dagseg.config import TrainConfig, format_config, load_config
from dagseg.corpus import Vocabulary, load_corpus, load_raw_text, load_wordlist
from dagseg.errors import ConfigError, DagsegError, InputError
from dagseg.lattice import build_automaton, build_lattice, dump_lattice
from dagseg.trainer import EpochLog, evaluate_model, train

LOG_HEADER = "epoch\ttrain_loss\tdev_P\tdev_R\tdev_F\tdev_OOV"

# flag name -> config field; None means "not given"
_CONFIG_FLAGS = {
    "variant": str,
    "d_e": int,
    "d_h": int,
    "lr": float,
    "l2": float,
    "eta": float,
    "dropout": float,
    "iv_dropout": float,
    "batch_size": int,
    "epochs": int,
    "seed": int,
    "l_max": int,
    "max_word_len": int,
    "dev_ratio": float,
    "init_range": float,
    "clip_norm": float,
    "embeddings": str,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    for name, kind in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)
    p.add_argument(
        "--plain-decode-train",
        dest="plain_decode_train",
        action="store_const",
        const=True,
        default=None,
        help="use plain Viterbi instead of cost-augmented decoding in the hinge loss",
    )
    p.add_argument(
        "--no-l2-embeddings", dest="l2_embeddings", action="store_const", const=False, default=None
    )
    p.add_argument("--train", required=True, help="segmented training corpus")
    p.add_argument("--dev", help="segmented dev corpus (default: hold out dev-ratio of --train)")


def _config_from_args(args: argparse.Namespace) -> TrainConfig:
    keys = [*_CONFIG_FLAGS, "plain_decode_train", "l2_embeddings"]
    return load_config(args.config, **{k: getattr(args, k) for k in keys})


def _open_out(path: str | None) -> TextIO:
    if path is None or path == "-":
        return sys.stdout
    try:
        return open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    corpus = load_corpus(args.train)
    dev = load_corpus(args.dev) if args.dev else None
    out = _open_out(args.log)
    try:
        out.write("# " + format_config(cfg).strip().replace("\n", " ") + "\n")
        out.write(LOG_HEADER + "\n")

        def on_epoch(entry: EpochLog) -> None:
            out.write(entry.format() + "\n")
            out.flush()

        result = train(corpus, cfg, dev, on_epoch)
        out.write(f"# best_epoch={result.best_epoch} seed={cfg.seed}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    model_io.save(result.model, args.out)
    return 0


def _load_model(args: argparse.Namespace):
    model = model_io.load(args.model)
    if args.extra_vocab:
        model.require_dag("--extra-vocab")
        model = model_io.inject_external_vocab(model, load_wordlist(args.extra_vocab))
    return model


def cmd_segment(args: argparse.Namespace) -> int:
    model = _load_model(args)
    if args.input in (None, "-"):
        try:
            data = sys.stdin.buffer.read()
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"stdin: invalid UTF-8 at byte {exc.start}") from None
        lines = ["".join(line.split()) for line in text.splitlines()]
        lines = [line for line in lines if line]
    else:
        lines = load_raw_text(args.input)
    out = _open_out(args.output)
    try:
        for line in lines:
            out.write(" ".join(model.segment_text(line)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = _load_model(args)
    gold = load_corpus(args.gold)
    metrics = evaluate_model(model, gold)
    print(metrics.format())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _config_from_args(args)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {args.grid!r}") from None
    corpus = load_corpus(args.train)
    dev = load_corpus(args.dev) if args.dev else None
    print("p_iv\tseed\tbest_epoch\tdev_F")
    for p_iv in grid:
        cfg = base.replace(iv_dropout=p_iv)
        result = train(corpus, cfg, dev)
        best = [e for e in result.history if e.epoch == result.best_epoch]
        f = best[0].dev.f_value if best and best[0].dev is not None else float("nan")
        print(f"{p_iv:g}\t{cfg.seed}\t{result.best_epoch}\t{100 * f:.2f}", flush=True)
    return 0


def cmd_lattice_dump(args: argparse.Namespace) -> int:
    if args.model:
        model = _load_model(args)
        vocab = model.vocab
        cap = args.max_word_len if args.max_word_len is not None else model.config.max_word_len
    else:
        if args.vocab is None:
            raise ConfigError("lattice-dump needs --vocab or --model")
        vocab = Vocabulary()
        for word in load_wordlist(args.vocab):
            vocab.add(word)
        cap = args.max_word_len
    chars = tuple("".join(args.sentence.split()))
    lattice = build_lattice(chars, build_automaton(vocab), vocab, cap)
    directions = ["fwd", "bwd"] if args.direction == "both" else [args.direction]
    for d in directions:
        if len(directions) > 1:
            sys.stdout.write(f"# {d}\n")
        sys.stdout.write(dump_lattice(lattice, vocab, d))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--log", help="per-epoch log file (default stdout)")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("segment", cmd_segment, "segment raw text"),
        ("eval", cmd_eval, "score a model on a segmented corpus"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True)
        p.add_argument("--extra-vocab", help="word list injected into the lattice vocabulary")
        if name == "segment":
            p.add_argument("--input", help="raw text, one sentence per line (default stdin)")
            p.add_argument("--output", help="default stdout")
        else:
            p.add_argument("--gold", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="dev F for a grid of IV word dropout rates")
    _add_config_flags(p)
    p.add_argument("--grid", default="0,0.25,0.5,0.75,1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lattice-dump", help="print the word lattice of a sentence")
    p.add_argument("sentence")
    p.add_argument("--vocab", help="word list, one word per line")
    p.add_argument("--model", help="use a trained model's vocabulary instead")
    p.add_argument("--extra-vocab")
    p.add_argument("--direction", choices=["fwd", "bwd", "both"], default="fwd")
    p.add_argument("--max-word-len", type=int)
    p.set_defaults(func=cmd_lattice_dump)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DagsegError as exc:
        print(f"error\t{exc.kind}\t{exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error\tio\t{exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
