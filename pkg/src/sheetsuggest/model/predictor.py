"""End-to-end inference: sheet + target cell -> ranked rendered formulas."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .. import nn
from ..context import build_bundles, extract_window
from ..formula import FormulaIR, render_formula
from ..formula.sketch import RenderError, StreamFormatError, parse_stream_tokens
from ..grid import CellAddr, Sheet, parse_a1
from .beam import beam_decode
from .config import ModelConfig
from .network import Network, Vocabs


@dataclass(frozen=True)
class Suggestion:
    rank: int
    formula: str
    stream: str
    log_prob: float
    ir: FormulaIR


class Predictor:
    """A loaded network plus the plumbing from sheets to formula text."""

    def __init__(self, network: Network):
        self.network = network

    @property
    def config(self) -> ModelConfig:
        return self.network.config

    @property
    def vocabs(self) -> Vocabs:
        return self.network.vocabs

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "Predictor":
        tensors, config_doc, extras = nn.load_checkpoint(path)
        config = ModelConfig.from_dict(config_doc)
        vocabs = Vocabs.from_lists(extras["vocabs"])
        params = {
            name: arr
            for name, arr in tensors.items()
            if not name.startswith(("opt.m/", "opt.v/"))
        }
        return cls(Network(config, vocabs, params=params))

    def predict(
        self,
        sheet: Sheet,
        target: CellAddr,
        top_k: int = 5,
        beam_size: int | None = None,
    ) -> tuple[list[Suggestion], dict]:
        """Ranked formula suggestions for one cell, plus decode diagnostics.

        Beam outputs that cannot be rendered at the target — offsets landing
        off-sheet, or a sketch that is not a well-formed operator tree — are
        dropped and counted in the diagnostics.
        """
        window = extract_window(sheet, target, self.config.radius)
        return self._predict_window(window, target, top_k, beam_size)

    def predict_record(
        self,
        record,
        top_k: int = 5,
        beam_size: int | None = None,
    ) -> tuple[list[Suggestion], dict]:
        """Like predict(), but from a preprocessed example instead of a sheet."""
        if record.radius != self.config.radius:
            raise ValueError(
                f"record built at radius {record.radius}, "
                f"config wants {self.config.radius}"
            )
        target = parse_a1(record.target).start
        return self._predict_window(record.window(), target, top_k, beam_size)

    def _predict_window(
        self,
        window,
        target: CellAddr,
        top_k: int,
        beam_size: int | None,
    ) -> tuple[list[Suggestion], dict]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        beam = self.config.beam_size if beam_size is None else beam_size
        if top_k > beam:
            raise ValueError(f"top_k {top_k} exceeds beam size {beam}")
        bundles = build_bundles(window, self.config.seq_len, self.config.bundle_width)
        states = self.network.encode(None, bundles)
        result = beam_decode(self.network, states, beam)

        suggestions: list[Suggestion] = []
        dropped = 0
        for hyp in result.hypotheses:
            if len(suggestions) == top_k:
                break
            try:
                ir = parse_stream_tokens(list(hyp.tokens))
                formula = render_formula(ir, target)
            except (RenderError, StreamFormatError):
                dropped += 1
                continue
            suggestions.append(
                Suggestion(
                    rank=len(suggestions) + 1,
                    formula=formula,
                    stream=" ".join(hyp.tokens),
                    log_prob=hyp.log_prob,
                    ir=ir,
                )
            )
        diagnostics = dict(result.diagnostics)
        diagnostics["dropped_unrenderable"] = dropped
        return suggestions, diagnostics
