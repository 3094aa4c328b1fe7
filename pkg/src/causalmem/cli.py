"""Command-line entry point: ``index``, ``train``, ``eval``, ``infer``.

Results go to stdout as ``key<TAB>value`` lines; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from importlib import resources
from pathlib import Path

from causalmem.dataset import DatasetError, generate_negatives, load_pairs
from causalmem.index import CorpusIndexError, index_corpus, load_index, persist_index
from causalmem.memnet import TYINGS, load_checkpoint, save_checkpoint
from causalmem.pipeline import encode_examples, infer, memory_provider
from causalmem.text import Vocabulary
from causalmem.train import TrainConfig, evaluate, train_loop, write_metrics

log = logging.getLogger("causalmem")

SIDECAR_VOCAB = "vocab.txt"


class CommandError(Exception):
    pass


def _metrics_path(checkpoint: Path) -> Path:
    return checkpoint.with_name(checkpoint.name + ".metrics.tsv")


def cmd_index(args) -> int:
    try:
        text = Path(args.corpus).read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CommandError(f"cannot read corpus {args.corpus}: {exc}") from exc
    index = index_corpus(text.splitlines(), min_count=args.min_count)
    try:
        persist_index(index, args.out)
    except OSError as exc:
        raise CommandError(f"cannot write index to {args.out}: {exc}") from exc
    print(f"N\t{index.doc_count}")
    print(f"V\t{index.vocab.size}")
    print(f"avg_doc_length\t{index.avg_doc_length:.4f}")
    return 0


def cmd_train(args) -> int:
    examples = load_pairs(args.data)
    if not examples:
        raise CommandError(f"no examples in {args.data}")
    index = load_index(args.index)
    config = TrainConfig(
        d=args.dim,
        H=args.hops,
        k=args.k,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        tying=args.tying,
        negative_ratio=args.neg_ratio,
    )
    if all(ex.label == 1 for ex in examples):
        log.info("no negatives in %s; generating %d per positive", args.data, config.negative_ratio)
        examples = examples + generate_negatives(examples, config.negative_ratio, config.seed)
    samples = encode_examples(examples, index)
    log.info("training on %d examples, V=%d, d=%d, H=%d", len(samples), index.vocab.size, config.d, config.H)
    params, history = train_loop(samples, memory_provider(index, config.k), config, index.vocab.size)

    out = Path(args.out)
    metrics = Path(args.metrics) if args.metrics else _metrics_path(out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(params, out)
        index.vocab.save(out.parent / SIDECAR_VOCAB)
        write_metrics(history, metrics)
    except OSError as exc:
        raise CommandError(f"cannot write model output: {exc}") from exc
    last = history[-1]
    print(f"checkpoint\t{out}")
    print(f"metrics\t{metrics}")
    print(f"epochs\t{last.epoch}")
    print(f"final_loss\t{last.mean_loss:.6f}")
    print(f"train_accuracy\t{last.train_accuracy:.4f}")
    return 0


def _load_model(index_dir: str, model_path: str):
    index = load_index(index_dir)
    try:
        params = load_checkpoint(model_path)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    if params.V != index.vocab.size:
        raise CommandError(
            f"vocabulary mismatch: checkpoint has V={params.V}, index {index_dir} has V={index.vocab.size}"
        )
    sidecar = Path(model_path).parent / SIDECAR_VOCAB
    if sidecar.is_file():
        if Vocabulary.load(sidecar) != index.vocab:
            raise CommandError(f"vocabulary mismatch: {sidecar} differs from the index vocabulary")
    return index, params


def cmd_eval(args) -> int:
    examples = load_pairs(args.data)
    if not examples:
        raise CommandError(f"no examples in {args.data}")
    index, params = _load_model(args.index, args.model)
    report = evaluate(params, encode_examples(examples, index), memory_provider(index, args.k), args.threshold)
    print("\n".join(report.lines()))
    return 0


def cmd_infer(args) -> int:
    index, params = _load_model(args.index, args.model)
    try:
        hits, prob = infer(params, index, args.query, args.k)
    except ValueError as exc:
        raise CommandError(f"{exc}\nusage hint: --query \"A <CAUSES> B\"") from exc
    for h in hits:
        print(f"{h.doc_id}\t{h.score:.6f}\t{index.text(h.doc_id)}")
    print(f"p_causes={prob:.6f}")
    return 0


def cmd_toy(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("toy_corpus.txt", "toy_pairs.tsv"):
        with resources.as_file(resources.files("causalmem.data") / name) as src:
            shutil.copyfile(src, out / name)
        print(out / name)
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalmem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an inverted index from a one-sentence-per-line corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", type=_positive_int, default=1)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="train the memory network on a cause-effect TSV")
    p.add_argument("--data", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", help="metrics file (default: <out>.metrics.tsv)")
    p.add_argument("--dim", type=_positive_int, default=20)
    p.add_argument("--hops", type=_positive_int, default=2)
    p.add_argument("--lr", type=_positive_float, default=0.001)
    p.add_argument("--epochs", type=_positive_int, default=100)
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--tying", choices=TYINGS, default="adjacent")
    p.add_argument("--neg-ratio", type=_positive_int, default=3,
                   help="negatives generated per positive when the data has none")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a labelled TSV")
    p.add_argument("--data", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--k", type=_positive_int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help='P(A causes B) for --query "A <CAUSES> B"')
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=_positive_int, default=10)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("toy", help="copy the bundled toy corpus and pairs into a directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (CommandError, CorpusIndexError, DatasetError, ValueError, OSError) as exc:
        print(f"causalmem {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
