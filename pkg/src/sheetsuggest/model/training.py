"""Minibatch training loop: Adam, clipping, validation, checkpoints, resume."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import nn
from ..context import build_bundles
from ..dataset import ExampleRecord
from ..formula import parse_stream, stream_tokens
from .beam import greedy_decode
from .config import ModelConfig
from .network import CheckpointMismatchError, DataError, Network, Vocabs

MODEL_FILE = "model.ckpt"
LATEST_FILE = "latest.ckpt"
METRICS_FILE = "metrics.jsonl"

_OPT_M = "opt.m/"
_OPT_V = "opt.v/"


@dataclass
class TrainSettings:
    steps: int = 1000
    batch_size: int = 64
    learning_rate: float = 5e-5
    clip_norm: float = 1.0
    eval_every: int = 200
    seed: int = 0
    resume: str | None = None
    # Stop as soon as a validation pass reaches this greedy top-1 accuracy.
    target_top1: float | None = None


@dataclass
class TrainResult:
    checkpoint_path: Path
    latest_path: Path
    metrics: list[dict] = field(default_factory=list)
    diverged: bool = False
    best_valid_loss: float = float("inf")
    steps_run: int = 0


class _Prepared:
    """An example with its bundles and stream pre-tokenized once."""

    def __init__(self, record: ExampleRecord, config: ModelConfig):
        window = record.window()
        self.bundles = build_bundles(window, config.seq_len, config.bundle_width)
        self.tokens = tuple(stream_tokens(parse_stream(record.gold)))
        self.gold = record.gold


def _prepare(records: list[ExampleRecord], config: ModelConfig) -> list[_Prepared]:
    out = []
    for record in records:
        if record.radius != config.radius:
            raise DataError(
                f"record built at radius {record.radius}, config wants {config.radius}"
            )
        out.append(_Prepared(record, config))
    return out


def _mean_valid_loss(net: Network, prepared: list[_Prepared]) -> float:
    total = 0.0
    for ex in prepared:
        states = net.encode(None, ex.bundles)
        loss, _, _ = net.decode_teacher_forced(None, states, ex.tokens)
        total += float(loss.data)
    return total / len(prepared)


def _greedy_top1(net: Network, prepared: list[_Prepared]) -> float:
    hits = 0
    for ex in prepared:
        states = net.encode(None, ex.bundles)
        result = greedy_decode(net, states)
        if result.hypotheses and result.hypotheses[0].tokens == ex.tokens:
            hits += 1
    return hits / len(prepared)


def _save_latest(path: Path, net: Network, store, rng, extras_base: dict) -> None:
    tensors = {name: t.data for name, t in store.params.items()}
    for name in store.params:
        tensors[_OPT_M + name] = store.m[name]
        tensors[_OPT_V + name] = store.v[name]
    extras = dict(extras_base)
    extras["opt_step"] = store.step
    extras["rng_state"] = rng.bit_generator.state
    nn.save_checkpoint(path, tensors, net.config.to_dict(), extras)


def train(
    train_records: list[ExampleRecord],
    valid_records: list[ExampleRecord] | None,
    config: ModelConfig,
    vocabs: Vocabs,
    out_dir: str | Path,
    settings: TrainSettings,
) -> TrainResult:
    """Run the loop; writes best/latest checkpoints and a metrics log.

    A non-finite loss aborts immediately; the best checkpoint written so far
    is left in place and the result is flagged ``diverged``.
    """
    if not train_records:
        raise ValueError("no training examples")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = TrainResult(checkpoint_path=out / MODEL_FILE, latest_path=out / LATEST_FILE)

    net = Network(config, vocabs)
    rng = np.random.default_rng(settings.seed)
    start_step = 0
    if settings.resume:
        tensors, config_doc, extras = nn.load_checkpoint(settings.resume)
        if config_doc != config.to_dict():
            raise CheckpointMismatchError("resume checkpoint was trained with a different config")
        params = {k: v for k, v in tensors.items() if not k.startswith(("opt.m/", "opt.v/"))}
        net = Network(config, vocabs, params=params)
        for name in net.store.params:
            net.store.m[name] = tensors[_OPT_M + name].copy()
            net.store.v[name] = tensors[_OPT_V + name].copy()
        net.store.step = extras["opt_step"]
        rng.bit_generator.state = extras["rng_state"]
        start_step = extras["step"]
        result.best_valid_loss = extras.get("best_valid", float("inf"))

    prepared = _prepare(train_records, config)
    valid_prepared = _prepare(valid_records, config) if valid_records else prepared

    metrics_path = out / METRICS_FILE
    mode = "a" if settings.resume else "w"
    vocab_lists = vocabs.to_lists()
    n = len(prepared)

    with open(metrics_path, mode, encoding="utf-8") as metrics_out:
        for step in range(start_step, settings.steps):
            if settings.batch_size >= n:
                batch = list(range(n))
            else:
                batch = list(rng.permutation(n)[: settings.batch_size])
            net.store.zero_grads()
            train_loss = 0.0
            for idx in batch:
                ex = prepared[idx]
                tape = nn.Tape()
                states = net.encode(tape, ex.bundles, train_rng=rng)
                loss, _, _ = net.decode_teacher_forced(tape, states, ex.tokens, train_rng=rng)
                tape.backward(loss)
                train_loss += float(loss.data)
            train_loss /= len(batch)
            if not np.isfinite(train_loss):
                result.diverged = True
                result.steps_run = step
                metrics_out.write(
                    json.dumps({"step": step, "event": "diverged"}, sort_keys=True) + "\n"
                )
                break
            inv = 1.0 / len(batch)
            for t in net.store.params.values():
                if t.grad is not None:
                    t.grad *= inv
            nn.clip_global_norm(net.store, settings.clip_norm)
            nn.adam_step(net.store, settings.learning_rate)
            result.steps_run = step + 1

            done = step + 1
            if done % settings.eval_every == 0 or done == settings.steps:
                valid_loss = _mean_valid_loss(net, valid_prepared)
                valid_top1 = _greedy_top1(net, valid_prepared)
                record = {
                    "step": done,
                    "train_loss": round(train_loss, 8),
                    "valid_loss": round(valid_loss, 8),
                    "valid_top1": round(valid_top1, 6),
                }
                result.metrics.append(record)
                metrics_out.write(json.dumps(record, sort_keys=True) + "\n")
                metrics_out.flush()
                extras_base = {
                    "step": done,
                    "vocabs": vocab_lists,
                    "best_valid": min(result.best_valid_loss, valid_loss),
                }
                if valid_loss < result.best_valid_loss:
                    result.best_valid_loss = valid_loss
                    nn.save_checkpoint(
                        result.checkpoint_path,
                        {name: t.data for name, t in net.store.params.items()},
                        config.to_dict(),
                        {"step": done, "valid_loss": valid_loss, "vocabs": vocab_lists},
                    )
                _save_latest(result.latest_path, net, net.store, rng, extras_base)
                if settings.target_top1 is not None and valid_top1 >= settings.target_top1:
                    break

    if not result.checkpoint_path.exists():
        nn.save_checkpoint(
            result.checkpoint_path,
            {name: t.data for name, t in net.store.params.items()},
            config.to_dict(),
            {"step": result.steps_run, "valid_loss": None, "vocabs": vocab_lists},
        )
    return result
