"""Command-line entry points: preprocess, train, eval, predict, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset, metrics
from .grid import GridError, load_grid_file, parse_a1
from .model import (
    CheckpointMismatchError,
    DataError,
    ModelConfig,
    Predictor,
    TrainSettings,
    Vocabs,
    train,
)
from .nn import CheckpointError

_USER_ERRORS = (
    dataset.DatasetError,
    GridError,
    CheckpointError,
    CheckpointMismatchError,
    DataError,
    ValueError,
    OSError,
)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated ratios, got {text!r}")
    return (parts[0], parts[1], parts[2])


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers for --k, got {text!r}")
    if not ks:
        raise ValueError("--k needs at least one value")
    return ks


def _load_config(path: str | None, radius: int, seed: int) -> ModelConfig:
    """Model config for training: file overrides, data radius, CLI seed."""
    overrides: dict = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        overrides.update(doc)
    overrides.setdefault("radius", radius)
    overrides.setdefault("seed", seed)
    return ModelConfig().with_overrides(**overrides)


def _cmd_preprocess(args: argparse.Namespace) -> int:
    report = dataset.preprocess_corpus(
        args.corpus,
        args.out,
        radius=args.radius,
        min_count=args.min_count,
        ratios=_parse_ratios(args.ratios),
        seed=args.seed,
    )
    for name in dataset.SPLIT_NAMES:
        split = report["splits"][name]
        print(
            f"{name}: {split['written']} examples "
            f"({split['unk_gold_dropped']} dropped for out-of-vocabulary gold)"
        )
    vocab = report["vocab"]
    print(f"vocab: input={vocab['input']} sketch={vocab['sketch']} range={vocab['range']}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    data = Path(args.data)
    train_records = dataset.read_records(data / "train.jsonl")
    if not train_records:
        print("error: no training examples in " + str(data / "train.jsonl"), file=sys.stderr)
        return 1
    valid_path = data / "valid.jsonl"
    valid_records = dataset.read_records(valid_path) if valid_path.exists() else None
    vocabs = Vocabs.from_dir(data)
    config = _load_config(args.config, train_records[0].radius, args.seed)
    settings = TrainSettings(
        steps=args.steps,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        clip_norm=args.clip,
        eval_every=args.eval_every,
        seed=args.seed,
        resume=args.resume,
        target_top1=args.target_top1,
    )
    result = train(train_records, valid_records, config, vocabs, args.out, settings)
    for record in result.metrics:
        print(json.dumps(record, sort_keys=True))
    print(f"checkpoint: {result.checkpoint_path}", file=sys.stderr)
    if result.diverged:
        print(
            "error: training diverged; kept the last finite checkpoint",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    data = Path(args.data)
    split_path = data / f"{args.split}.jsonl"
    records = dataset.read_records(split_path) if split_path.exists() else []
    if not records:
        print(f"error: no examples in split {args.split!r}", file=sys.stderr)
        return 1
    predictor = Predictor.from_checkpoint(args.checkpoint)
    report = metrics.evaluate(
        predictor,
        records,
        ks=_parse_ks(args.k),
        beam_size=args.beam,
        blank_headers=args.blank_headers,
    )
    print(report.format_table())
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_doc(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    predictor = Predictor.from_checkpoint(args.checkpoint)
    sheets = load_grid_file(args.grid)
    if args.sheet is None:
        sheet = sheets[0]
    else:
        by_name = {s.name: s for s in sheets}
        if args.sheet not in by_name:
            raise ValueError(
                f"no sheet named {args.sheet!r}; available: {sorted(by_name)}"
            )
        sheet = by_name[args.sheet]
    ref = parse_a1(args.target)
    if ref.end is not None:
        raise ValueError(f"target must be a single cell, got range {args.target!r}")
    suggestions, diagnostics = predictor.predict(
        sheet, ref.start, top_k=args.top_k, beam_size=args.beam
    )
    for s in suggestions:
        print(f"{s.rank}\t{s.log_prob:.6f}\t{s.formula}")
    if not suggestions:
        print(
            "no renderable suggestions "
            f"(dropped {diagnostics.get('dropped_unrenderable', 0)})",
            file=sys.stderr,
        )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from . import service

    checkpoint = service.resolve_checkpoint(args.checkpoint)
    host, port = service.resolve_bind(args.host, args.port)
    server = service.make_server(
        checkpoint,
        host,
        port,
        max_in_flight=args.max_in_flight,
        max_body_bytes=args.max_body_bytes,
    )
    bound = server.server_address
    print(f"serving on http://{bound[0]}:{bound[1]} (checkpoint: {checkpoint})", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sheetsuggest",
        description="Formula suggestions for spreadsheet cells from surrounding context.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for anything randomized")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "preprocess", parents=[common], help="mine grid files into training examples"
    )
    p.add_argument("--corpus", required=True, help="directory of *.grid.json files")
    p.add_argument("--out", required=True, help="output directory for splits and vocabs")
    p.add_argument("--radius", type=int, default=10)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,valid,test file ratios")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="train a model on preprocessed data")
    p.add_argument("--data", required=True, help="preprocess output directory")
    p.add_argument("--out", required=True, help="directory for checkpoints and metrics")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--clip", type=float, default=1.0)
    p.add_argument("--eval-every", type=int, default=200)
    p.add_argument("--resume", default=None, help="resume from this latest.ckpt")
    p.add_argument("--config", default=None, help="JSON file of model config overrides")
    p.add_argument(
        "--target-top1",
        type=float,
        default=None,
        help="stop early once a validation pass reaches this greedy top-1 accuracy",
    )
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", parents=[common], help="exact-match accuracy on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=dataset.SPLIT_NAMES)
    p.add_argument("--beam", type=int, default=None, help="beam size (default: from config)")
    p.add_argument("--k", default="1,5,10", help="comma-separated top-k cutoffs")
    p.add_argument("--blank-headers", action="store_true", help="hide header tokens")
    p.add_argument("--out", default=None, help="also write the report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", parents=[common], help="suggest formulas for one cell")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", required=True, help="a .grid.json file")
    p.add_argument("--target", required=True, help="cell in A1 notation, e.g. D4")
    p.add_argument("--sheet", default=None, help="sheet name (default: first sheet)")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--beam", type=int, default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP suggestion service")
    p.add_argument("--checkpoint", default=None, help="model checkpoint (or env)")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--max-body-bytes", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
