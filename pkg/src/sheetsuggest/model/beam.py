"""Grammar-constrained decoding: greedy and synchronized beam search.

A token-level automaton tracks where each hypothesis is inside the stream
grammar — sketch tokens until ``$ENDSKETCH$``, then one offset group per
pending ``RANGE``, then ``EOF`` — and masks every continuation that could
not complete into a well-formed stream.  Scores are log-probabilities under
the model's full stage distribution; masking prunes but never renormalizes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..formula import END_SKETCH, EOF, RANGE_TOK
from ..formula.sketch import GROUP_CLOSE, GROUP_OPEN, GROUP_SEP, parse_offset_token
from .network import RANGE_STAGE, SKETCH_STAGE, EncodedStates, Network
from .. import nn

# Range-stage phases (sketch stage has no sub-phase).
BOUNDARY = "boundary"  # expecting $R$ (pending groups) or EOF (none left)
ROW_1 = "row1"
COL_1 = "col1"
AFTER_FIRST = "after_first"  # expecting $SEP$ or $ENDR$
ROW_2 = "row2"
COL_2 = "col2"
AFTER_SECOND = "after_second"  # expecting $ENDR$


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    log_prob: float
    h: np.ndarray
    c: np.ndarray
    stage: str = SKETCH_STAGE
    phase: str = BOUNDARY
    pending: int = 0
    sketch_emitted: int = 0
    first_row: int = 0
    first_col: int = 0
    finished: bool = False

    def sort_key(self):
        return (-self.log_prob, len(self.tokens), self.tokens)


@dataclass(frozen=True)
class DecodedStream:
    tokens: tuple[str, ...]
    log_prob: float


@dataclass
class BeamResult:
    hypotheses: list[DecodedStream]
    diagnostics: dict


def _start_hypothesis(net: Network) -> Hypothesis:
    h, c = net.initial_state()
    return Hypothesis(tokens=(), log_prob=0.0, h=h.data, c=c.data)


def allowed_tokens(net: Network, hyp: Hypothesis) -> list[str]:
    """Every token the grammar permits this hypothesis to emit next."""
    cfg = net.config
    if hyp.stage == SKETCH_STAGE:
        if hyp.sketch_emitted >= cfg.max_sketch_tokens:
            return [END_SKETCH]
        toks = list(net.vocabs.sketch.tokens)
        if hyp.pending >= cfg.max_range_groups:
            toks.remove(RANGE_TOK)
        return toks
    radius = cfg.radius
    if hyp.phase == BOUNDARY:
        return [GROUP_OPEN] if hyp.pending > 0 else [EOF]
    if hyp.phase == ROW_1:
        return [f"R[{k}]" for k in range(-radius, radius + 1)]
    if hyp.phase == COL_1:
        return [f"C[{k}]" for k in range(-radius, radius + 1)]
    if hyp.phase == AFTER_FIRST:
        return [GROUP_SEP, GROUP_CLOSE]
    if hyp.phase == ROW_2:
        return [f"R[{k}]" for k in range(hyp.first_row, radius + 1)]
    if hyp.phase == COL_2:
        return [f"C[{k}]" for k in range(hyp.first_col, radius + 1)]
    assert hyp.phase == AFTER_SECOND
    return [GROUP_CLOSE]


def _advance(hyp: Hypothesis, token: str, log_prob: float, h: np.ndarray, c: np.ndarray) -> Hypothesis:
    base = replace(
        hyp, tokens=hyp.tokens + (token,), log_prob=hyp.log_prob + log_prob, h=h, c=c
    )
    if hyp.stage == SKETCH_STAGE:
        if token == END_SKETCH:
            return replace(base, stage=RANGE_STAGE, phase=BOUNDARY)
        pending = hyp.pending + (1 if token == RANGE_TOK else 0)
        return replace(base, pending=pending, sketch_emitted=hyp.sketch_emitted + 1)
    if token == EOF:
        return replace(base, finished=True)
    if token == GROUP_OPEN:
        return replace(base, phase=ROW_1)
    if token == GROUP_SEP:
        return replace(base, phase=ROW_2)
    if token == GROUP_CLOSE:
        return replace(base, phase=BOUNDARY, pending=hyp.pending - 1)
    axis, value = parse_offset_token(token)
    if hyp.phase == ROW_1:
        return replace(base, phase=COL_1, first_row=value)
    if hyp.phase == COL_1:
        return replace(base, phase=AFTER_FIRST, first_col=value)
    if hyp.phase == ROW_2:
        return replace(base, phase=COL_2)
    assert hyp.phase == COL_2 and axis == "C"
    return replace(base, phase=AFTER_SECOND)


def _step_log_probs(
    net: Network, states: EncodedStates, hyp: Hypothesis
) -> tuple[np.ndarray, np.ndarray, np.ndarray, str]:
    """Run one decoder step for ``hyp``; returns (h', c', log-probs, space)."""
    prev = net.joint_id(hyp.tokens[-1]) if hyp.tokens else None
    h2, c2, vec = net.step(None, states, nn.Tensor(hyp.h), nn.Tensor(hyp.c), prev)
    logits, space = net.stage_logits(None, vec, hyp.stage)
    row = logits.data[0]
    log_probs = row - (row.max() + np.log(np.exp(row - row.max()).sum()))
    return h2.data, c2.data, log_probs, space


def _extend(net: Network, states: EncodedStates, hyp: Hypothesis) -> list[Hypothesis]:
    h2, c2, log_probs, _ = _step_log_probs(net, states, hyp)
    children = []
    for token in allowed_tokens(net, hyp):
        idx = net.target_id(token, hyp.stage)
        children.append(_advance(hyp, token, float(log_probs[idx]), h2, c2))
    return children


def _max_steps(net: Network) -> int:
    cfg = net.config
    return cfg.max_sketch_tokens + 1 + 5 * cfg.max_range_groups + 1


def beam_decode(
    net: Network,
    states: EncodedStates,
    beam_size: int,
    max_steps: int | None = None,
) -> BeamResult:
    """Synchronized beam search; finished hypotheses leave the beam.

    Results are every finished stream, best first (ties: shorter stream,
    then token order).  Streams are unique because the grammar is
    deterministic — one stream has exactly one derivation.
    """
    if beam_size < 1:
        raise ValueError(f"beam size must be >= 1, got {beam_size}")
    limit = _max_steps(net) if max_steps is None else max_steps
    active = [_start_hypothesis(net)]
    finished: list[Hypothesis] = []
    steps = 0
    for _ in range(limit):
        if not active:
            break
        steps += 1
        candidates: list[Hypothesis] = []
        for hyp in active:
            candidates.extend(_extend(net, states, hyp))
        candidates.sort(key=Hypothesis.sort_key)
        active = []
        for cand in candidates:
            if cand.finished:
                finished.append(cand)
            elif len(active) < beam_size:
                active.append(cand)
    finished.sort(key=Hypothesis.sort_key)
    diagnostics = {
        "steps": steps,
        "finished": len(finished),
        "unfinished": len(active),
    }
    if not finished:
        diagnostics["reason"] = f"no hypothesis finished within {limit} steps"
    return BeamResult(
        hypotheses=[DecodedStream(h.tokens, h.log_prob) for h in finished],
        diagnostics=diagnostics,
    )


def greedy_decode(
    net: Network, states: EncodedStates, max_steps: int | None = None
) -> BeamResult:
    """Follow the single best grammar-legal token until EOF."""
    limit = _max_steps(net) if max_steps is None else max_steps
    hyp = _start_hypothesis(net)
    steps = 0
    for _ in range(limit):
        steps += 1
        h2, c2, log_probs, _ = _step_log_probs(net, states, hyp)
        best: tuple[float, str] | None = None
        for token in allowed_tokens(net, hyp):
            lp = float(log_probs[net.target_id(token, hyp.stage)])
            if best is None or lp > best[0] or (lp == best[0] and token < best[1]):
                best = (lp, token)
        hyp = _advance(hyp, best[1], best[0], h2, c2)
        if hyp.finished:
            return BeamResult(
                hypotheses=[DecodedStream(hyp.tokens, hyp.log_prob)],
                diagnostics={"steps": steps, "finished": 1, "unfinished": 0},
            )
    return BeamResult(
        hypotheses=[],
        diagnostics={
            "steps": steps,
            "finished": 0,
            "unfinished": 1,
            "reason": f"no hypothesis finished within {limit} steps",
        },
    )
