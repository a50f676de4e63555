"""Command-line trainer for Boolean networks.

    bbnn train --data-dir DIR --widths 1568,512,160 --epochs 10 --checkpoint m.bbnn --metrics m.csv
    bbnn train --synth --widths 16,8 --epochs 3 --seed 7 --metrics synth.csv
    bbnn eval --data-dir DIR --checkpoint m.bbnn --limit 2000
    bbnn predict --data-dir DIR --checkpoint m.bbnn --limit 10
    bbnn inspect --checkpoint m.bbnn

Exit codes: 0 success, 1 bad arguments, 2 data/checkpoint errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, oracle
from .bitcore import Rng
from .layers import Model
from .training import MODES, PROJECTIONS, RETAIN_POLICIES, Batch, EpochReport, TrainConfig, evaluate, fit

log = logging.getLogger("bbnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
METRIC_FIELDS = ["epoch", "split", "hamming_error_rate", "accuracy", "weight_flips", "bias_flips", "seconds"]

# synthetic runs default to this many samples per split
SYNTH_SAMPLES = 256


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _widths(text: str) -> list[int]:
    try:
        widths = [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad widths {text!r}")
    if len(widths) < 2 or min(widths) < 1:
        raise argparse.ArgumentTypeError("need at least two positive widths")
    return widths


def _add_data(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data-dir", type=Path, help="directory with the four MNIST IDX files")
    src.add_argument("--synth", action="store_true", help="use a random teacher network instead of MNIST")
    p.add_argument("--limit", type=int, help="use only the first N samples (train split for train, eval split otherwise)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bbnn", description="Purely Boolean network training.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model")
    _add_data(t)
    t.add_argument("--widths", "--layers", dest="widths", type=_widths, help="layer widths, input first")
    t.add_argument("--mode", choices=MODES, default="specialized")
    t.add_argument("--projection", choices=PROJECTIONS, default="auto")
    t.add_argument("--exact-limit", type=int, default=20)
    t.add_argument("--retain-one", choices=RETAIN_POLICIES, default=None)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--epochs", type=int, default=1)
    t.add_argument("--no-shuffle", action="store_true")
    t.add_argument("--test-limit", type=int, help="evaluate on the first N test samples each epoch")
    t.add_argument("--thermometer", type=int, help="bits per pixel (default: widths[0] / 784)")
    t.add_argument("--class-block", type=int, help="bits per class (default: widths[-1] / 10)")
    t.add_argument("--density", type=float, help="initial weight density (default 1/n per row)")
    t.add_argument("--init", type=Path, help="start from this checkpoint instead of a random model")
    t.add_argument("--checkpoint", type=Path, help="write the trained model here")
    t.add_argument("--metrics", type=Path, help="write per-epoch metrics CSV here")
    t.add_argument("--no-timing", action="store_true", help="leave the seconds column empty (byte-reproducible CSV)")

    for name, help_ in (("eval", "evaluate a checkpoint"), ("predict", "print predicted classes")):
        e = sub.add_parser(name, help=help_)
        _add_data(e)
        e.add_argument("--checkpoint", type=Path, required=True)
        e.add_argument("--split", choices=("train", "test"), default="test")
        e.add_argument("--synth-train", type=int, default=SYNTH_SAMPLES, help=argparse.SUPPRESS)

    i = sub.add_parser("inspect", help="summarize a checkpoint")
    i.add_argument("--checkpoint", type=Path, required=True)

    v = sub.add_parser("verify", help=argparse.SUPPRESS)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=200)
    return parser


# -- data helpers --------------------------------------------------------------


def _synth_splits(widths, seed: int, n_train: int, n_test: int) -> tuple[Batch, Batch]:
    _, data = dataio.synth_teacher(Rng(seed, 1), widths, n_train + n_test)
    return data.head(n_train), data.take(np.arange(n_train, n_train + n_test))


def _mnist(data_dir: Path, split: str, limit, spec: dataio.EncodingSpec) -> Batch:
    if not data_dir.is_dir():
        raise FileNotFoundError(f"data directory {data_dir} does not exist")
    raw = dataio.load_mnist(data_dir, split).head(limit)
    return dataio.encode_dataset(raw, spec)


def _write_metrics(path: Path, history: list[EpochReport], timing: bool) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for r in history:
        w.writerow([
            r.epoch, r.split, repr(r.hamming_error_rate),
            "" if r.accuracy is None else repr(r.accuracy),
            r.weight_flips, r.bias_flips,
            f"{r.seconds:.3f}" if timing else "",
        ])
    path.write_text(buf.getvalue())


# -- commands ------------------------------------------------------------------


def cmd_train(args) -> int:
    if not args.synth and args.data_dir is None:
        raise UsageError("train needs --data-dir or --synth")
    for name in ("batch_size", "exact_limit"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    if args.epochs < 0:
        raise UsageError("--epochs must be >= 0")
    cfg = TrainConfig(
        mode=args.mode, projection=args.projection, exact_limit=args.exact_limit,
        retain_one_policy=args.retain_one, batch_size=args.batch_size, epochs=args.epochs,
        seed=args.seed, shuffle=not args.no_shuffle,
    )

    init_model = spec = None
    if args.init is not None:
        init_model, spec = dataio.load_checkpoint(args.init)
    widths = args.widths or (init_model.widths if init_model else None)
    if widths is None:
        raise UsageError("--widths is required unless --init is given")
    if init_model is not None and init_model.widths != widths:
        raise UsageError(f"--widths {widths} disagree with --init model {init_model.widths}")

    if args.synth:
        spec = None
        train, test = _synth_splits(widths, args.seed, args.limit or SYNTH_SAMPLES, args.test_limit or SYNTH_SAMPLES)
        decoder = None
    else:
        if spec is None:
            try:
                spec = dataio.EncodingSpec.for_widths(widths[0], widths[-1])
            except ValueError as exc:
                if args.thermometer is None or args.class_block is None:
                    raise UsageError(str(exc))
            if args.thermometer is not None or args.class_block is not None:
                spec = dataio.EncodingSpec(
                    args.thermometer or spec.thermometer_levels, 10, args.class_block or spec.class_block
                )
        if (spec.input_width, spec.output_width) != (widths[0], widths[-1]):
            raise UsageError(
                f"widths {widths[0]}->{widths[-1]} do not match encoding {spec.input_width}->{spec.output_width}"
            )
        train = _mnist(args.data_dir, "train", args.limit, spec)
        test = _mnist(args.data_dir, "test", args.test_limit, spec)
        decoder = dataio.block_decoder(spec)

    model = init_model or Model.init(Rng(args.seed, 2), widths, args.density)

    def progress(r: EpochReport) -> None:
        acc = "" if r.accuracy is None else f" accuracy={r.accuracy:.4f}"
        print(f"epoch={r.epoch} split={r.split} hamming_error_rate={r.hamming_error_rate:.5f}{acc} "
              f"weight_flips={r.weight_flips} bias_flips={r.bias_flips} seconds={r.seconds:.1f}", flush=True)

    model, history = fit(model, train, cfg, progress=progress, test=test, decoder=decoder)
    if args.checkpoint is not None:
        dataio.save_checkpoint(model, spec, args.checkpoint)
    if args.metrics is not None:
        _write_metrics(args.metrics, history, timing=not args.no_timing)
    return EXIT_OK


def _eval_data(args, model: Model, spec):
    if args.synth:
        n_train = args.synth_train
        train, test = _synth_splits(model.widths, args.seed, n_train, args.limit or SYNTH_SAMPLES)
        return (train if args.split == "train" else test), None
    if args.data_dir is None:
        raise UsageError(f"{args.command} needs --data-dir or --synth")
    if spec is None:
        raise dataio.InconsistentDims("checkpoint carries no data encoding; use --synth")
    if (spec.input_width, spec.output_width) != (model.widths[0], model.widths[-1]):
        raise dataio.InconsistentDims("checkpoint encoding does not match its layer widths")
    return _mnist(args.data_dir, args.split, args.limit, spec), dataio.block_decoder(spec)


def cmd_eval(args) -> int:
    model, spec = dataio.load_checkpoint(args.checkpoint)
    data, decoder = _eval_data(args, model, spec)
    if data.inputs.cols != model.widths[0] or data.targets.cols != model.widths[-1]:
        raise dataio.InconsistentDims("data width does not match the model")
    rate, acc = evaluate(model, data, decoder)
    acc_text = "" if acc is None else f" accuracy={acc!r}"
    print(f"samples={len(data)} hamming_error_rate={rate!r}{acc_text}")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .layers import forward_batch

    model, spec = dataio.load_checkpoint(args.checkpoint)
    data, decoder = _eval_data(args, model, spec)
    if decoder is None:
        raise UsageError("predict needs a class encoding (MNIST checkpoint)")
    y, _ = forward_batch(model, data.inputs, keep_trace=False)
    print("index,predicted,label")
    for k, (p, l) in enumerate(zip(decoder(y), data.labels)):
        print(f"{k},{int(p)},{int(l)}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    model, spec = dataio.load_checkpoint(args.checkpoint)
    print(f"version={dataio.CHECKPOINT_VERSION}")
    if spec is None:
        print("encoding=none")
    else:
        print(f"encoding=thermometer:{spec.thermometer_levels} classes:{spec.classes} block:{spec.class_block}")
    print("widths=" + ",".join(map(str, model.widths)))
    for k, layer in enumerate(model.layers):
        density = layer.W.popcount() / max(1, layer.n_in * layer.n_out)
        print(f"layer={k} shape={layer.n_out}x{layer.n_in} weight_density={density:.6f} "
              f"weights_per_neuron={layer.W.popcount() / max(1, layer.n_out):.3f} bias_popcount={layer.B.popcount()}")
    return EXIT_OK


def cmd_verify(args) -> int:
    fails = oracle.verify(Rng(args.seed, 3), args.trials)
    for name, count in fails.items():
        print(f"{name}: {'ok' if count == 0 else f'{count} mismatches'}")
    return EXIT_OK if not any(fails.values()) else EXIT_USAGE


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict, "inspect": cmd_inspect, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bbnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dataio.DataError, OSError) as exc:
        print(f"bbnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"bbnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
