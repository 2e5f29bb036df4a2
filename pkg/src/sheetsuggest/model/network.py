"""The suggestion network: bundle encoder, dual-attention recurrent decoder.

Context flows in as token bundles (header + grouped rows/columns).  Each side
(row, column) runs its bundles through its own self-attention stack; the
header row's per-token embeddings are averaged across row bundles; two
full-extent convolutions summarize each position's row and column and are
concatenated onto the token embedding.  The decoder is a single LSTM with
additive attention over a header bank and a data bank, switching from the
sketch output head to the range output head after ``$ENDSKETCH$``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .. import nn
from ..context import SEG_DATA, SEG_HEADER, Bundle, BundleSet
from ..dataset import Vocabulary, build_range_vocab
from ..formula import END_SKETCH, EOF, RANGE_TOK
from .config import ModelConfig


class DataError(Exception):
    """An example is inconsistent with the model's vocabularies or shape."""


class CheckpointMismatchError(Exception):
    """Stored parameters do not fit the requested configuration."""


SKETCH_STAGE = "sketch"
RANGE_STAGE = "range"


@dataclass(frozen=True)
class Vocabs:
    """The three token spaces the model is built over."""

    input: Vocabulary
    sketch: Vocabulary
    range: Vocabulary

    @staticmethod
    def from_dir(path) -> "Vocabs":
        from pathlib import Path

        base = Path(path)
        return Vocabs(
            input=Vocabulary.load(base / "input_vocab.jsonl"),
            sketch=Vocabulary.load(base / "sketch_vocab.jsonl"),
            range=Vocabulary.load(base / "range_vocab.jsonl"),
        )

    def to_lists(self) -> dict:
        return {
            "input": list(self.input.tokens),
            "sketch": list(self.sketch.tokens),
            "range": list(self.range.tokens),
        }

    @staticmethod
    def from_lists(doc: dict) -> "Vocabs":
        return Vocabs(
            input=Vocabulary.closed(doc["input"]),
            sketch=Vocabulary.closed(doc["sketch"]),
            range=Vocabulary.closed(doc["range"]),
        )


@dataclass
class EncodedStates:
    """Attention banks the decoder reads: header tokens and data tokens."""

    header_bank: nn.Tensor  # [n_header, bank_width]
    header_mask: np.ndarray  # [n_header] bool
    data_bank: nn.Tensor  # [n_data, bank_width]
    data_mask: np.ndarray  # [n_data] bool


def split_stages(tokens) -> list[tuple[str, str]]:
    """Pair each stream token with its decoding stage.

    The sketch stage covers everything up to and including ``$ENDSKETCH$``;
    the range stage covers the rest, ending at ``EOF``.
    """
    tokens = list(tokens)
    if not tokens:
        raise DataError("empty token stream")
    if tokens[-1] != EOF:
        raise DataError("token stream must end with EOF")
    if END_SKETCH not in tokens:
        raise DataError(f"token stream missing {END_SKETCH}")
    if EOF in tokens[:-1]:
        raise DataError("EOF before end of stream")
    out: list[tuple[str, str]] = []
    stage = SKETCH_STAGE
    for tok in tokens:
        out.append((tok, stage))
        if tok == END_SKETCH:
            stage = RANGE_STAGE
    return out


class Network:
    """Parameters plus the forward graph for encoding and decoding."""

    def __init__(
        self,
        config: ModelConfig,
        vocabs: Vocabs,
        seed: int | None = None,
        params: dict[str, np.ndarray] | None = None,
    ):
        expected_range = list(build_range_vocab(config.radius).tokens)
        if list(vocabs.range.tokens) != expected_range:
            raise CheckpointMismatchError(
                f"range vocabulary does not match radius {config.radius}"
            )
        self.config = config
        self.vocabs = vocabs
        self.store = nn.ParamStore()
        self._rng = np.random.default_rng(config.seed if seed is None else seed)
        self._build_params()
        if params is not None:
            self._load_params(params)

    # -- parameter construction ------------------------------------------

    def _add_linear(self, name: str, fan_in: int, fan_out: int) -> None:
        self.store.add(f"{name}/w", nn.xavier_uniform(self._rng, fan_in, fan_out))
        self.store.add(f"{name}/b", np.zeros(fan_out))

    def _add_layer_norm(self, name: str) -> None:
        self.store.add(f"{name}/gamma", np.ones(self.config.hidden))
        self.store.add(f"{name}/beta", np.zeros(self.config.hidden))

    def _build_params(self) -> None:
        cfg = self.config
        positions = (cfg.bundle_width + 1) * cfg.seq_len
        for side in ("row", "col"):
            self.store.add(
                f"enc/{side}/tok_emb",
                nn.normal_init(self._rng, (len(self.vocabs.input), cfg.hidden)),
            )
            self.store.add(f"enc/{side}/pos_emb", nn.normal_init(self._rng, (positions, cfg.hidden)))
            self.store.add(f"enc/{side}/seg_emb", nn.normal_init(self._rng, (2, cfg.hidden)))
            for i in range(cfg.encoder_layers):
                base = f"enc/{side}/l{i}"
                self._add_layer_norm(f"{base}/ln1")
                for proj in ("wq", "wk", "wv", "wo"):
                    self._add_linear(f"{base}/attn/{proj}", cfg.hidden, cfg.hidden)
                self._add_layer_norm(f"{base}/ln2")
                self._add_linear(f"{base}/ffn/fc1", cfg.hidden, cfg.ff_hidden)
                self._add_linear(f"{base}/ffn/fc2", cfg.ff_hidden, cfg.hidden)
            self._add_layer_norm(f"enc/{side}/ln_out")
            span = 2 * cfg.radius + 2 if side == "row" else 2 * cfg.radius + 1
            self.store.add(
                f"conv/{side}/pos_w",
                nn.xavier_uniform(
                    self._rng,
                    cfg.seq_len * cfg.hidden,
                    cfg.conv_channels,
                    shape=(cfg.seq_len, cfg.hidden, cfg.conv_channels),
                ),
            )
            self.store.add(f"conv/{side}/pos_b", np.zeros(cfg.conv_channels))
            self.store.add(
                f"conv/{side}/span_w",
                nn.xavier_uniform(
                    self._rng,
                    span * cfg.hidden,
                    cfg.conv_channels,
                    shape=(span, cfg.hidden, cfg.conv_channels),
                ),
            )
            self.store.add(f"conv/{side}/span_b", np.zeros(cfg.conv_channels))

        n_sketch = len(self.vocabs.sketch)
        n_range = len(self.vocabs.range)
        self.store.add(
            "dec/tok_emb", nn.normal_init(self._rng, (n_sketch + n_range, cfg.hidden))
        )
        self.store.add("dec/start", nn.normal_init(self._rng, (1, cfg.hidden)))
        self.store.add(
            "dec/lstm/w",
            nn.xavier_uniform(self._rng, cfg.hidden + cfg.decoder_hidden, 4 * cfg.decoder_hidden),
        )
        self.store.add("dec/lstm/b", np.zeros(4 * cfg.decoder_hidden))
        for bank in ("header", "data"):
            self.store.add(
                f"attn/{bank}/wq",
                nn.xavier_uniform(self._rng, cfg.decoder_hidden, cfg.attention_hidden),
            )
            self.store.add(
                f"attn/{bank}/wk",
                nn.xavier_uniform(self._rng, cfg.bank_width, cfg.attention_hidden),
            )
            self.store.add(f"attn/{bank}/b", np.zeros(cfg.attention_hidden))
            self.store.add(
                f"attn/{bank}/v", nn.xavier_uniform(self._rng, cfg.attention_hidden, 1)
            )
        concat_dim = cfg.decoder_hidden + 2 * cfg.bank_width
        heads = ("sketch", "range") if cfg.two_stage else ("joint",)
        sizes = {"sketch": n_sketch, "range": n_range, "joint": n_sketch + n_range}
        for head in heads:
            # Small init keeps the starting distribution near uniform, so the
            # first losses sit at ln|V| instead of inflated by logit noise.
            self.store.add(
                f"head/{head}/w",
                nn.normal_init(self._rng, (concat_dim, sizes[head]), stddev=0.01),
            )
            self.store.add(f"head/{head}/b", np.zeros(sizes[head]))

    def _load_params(self, params: dict[str, np.ndarray]) -> None:
        expected = set(self.store.names())
        got = set(params)
        if expected != got:
            missing = sorted(expected - got)[:3]
            extra = sorted(got - expected)[:3]
            raise CheckpointMismatchError(
                f"parameter names do not match config (missing {missing}, extra {extra})"
            )
        for name, tensor in self.store.params.items():
            arr = np.asarray(params[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise CheckpointMismatchError(
                    f"{name}: stored shape {arr.shape}, config wants {tensor.data.shape}"
                )
            tensor.data = arr.copy()

    def export_params(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.store.params.items()}

    # -- vocabulary plumbing ---------------------------------------------

    def joint_id(self, token: str) -> int:
        sid = self.vocabs.sketch.id_of(token)
        if sid is not None:
            return sid
        rid = self.vocabs.range.id_of(token)
        if rid is not None:
            return len(self.vocabs.sketch) + rid
        raise DataError(f"token {token!r} not in decoder vocabulary")

    def target_id(self, token: str, stage: str) -> int:
        if not self.config.two_stage:
            return self.joint_id(token)
        vocab = self.vocabs.sketch if stage == SKETCH_STAGE else self.vocabs.range
        tid = vocab.id_of(token)
        if tid is None:
            raise DataError(f"gold token {token!r} not in {stage} vocabulary")
        return tid

    # -- encoder -----------------------------------------------------------

    def _seq_ids(self, bundle: Bundle) -> np.ndarray:
        ids = [
            self.vocabs.input.id_or_unk(tok)
            for member in bundle.members
            for tok in member.tokens
        ]
        return np.asarray(ids, dtype=np.int64)

    def _bundle_mask(self, bundle: Bundle) -> np.ndarray:
        return np.asarray(
            [flag for member in bundle.members for flag in member.mask], dtype=bool
        )

    def _run_side(
        self,
        tape: nn.Tape | None,
        side: str,
        bundles: tuple[Bundle, ...],
        train_rng: np.random.Generator | None,
    ) -> tuple[nn.Tensor, np.ndarray]:
        """Self-attention over all of one side's bundles at once -> [K, T, H]."""
        cfg = self.config
        p = self.store
        ids = np.stack([self._seq_ids(b) for b in bundles])
        mask = np.stack([self._bundle_mask(b) for b in bundles])
        segs = np.stack([np.asarray(b.segment_ids, dtype=np.int64) for b in bundles])

        x = nn.embedding_lookup(tape, p[f"enc/{side}/tok_emb"], ids)
        x = nn.add(tape, x, p[f"enc/{side}/pos_emb"])
        x = nn.add(tape, x, nn.embedding_lookup(tape, p[f"enc/{side}/seg_emb"], segs))
        x = self._dropout(tape, x, train_rng)

        k_bundles, t_len = ids.shape
        heads, dh = cfg.heads, cfg.hidden // cfg.heads
        for i in range(cfg.encoder_layers):
            base = f"enc/{side}/l{i}"
            y = nn.layer_norm(tape, x, p[f"{base}/ln1/gamma"], p[f"{base}/ln1/beta"])
            parts = {}
            for proj in ("wq", "wk", "wv"):
                v = nn.add(tape, nn.matmul(tape, y, p[f"{base}/attn/{proj}/w"]), p[f"{base}/attn/{proj}/b"])
                v = nn.reshape(tape, v, (k_bundles, t_len, heads, dh))
                parts[proj] = nn.transpose(tape, v, (0, 2, 1, 3))
            att = nn.scaled_dot_attention(
                tape, parts["wq"], parts["wk"], parts["wv"], mask[:, None, :]
            )
            att = nn.reshape(
                tape, nn.transpose(tape, att, (0, 2, 1, 3)), (k_bundles, t_len, cfg.hidden)
            )
            att = nn.add(tape, nn.matmul(tape, att, p[f"{base}/attn/wo/w"]), p[f"{base}/attn/wo/b"])
            x = nn.add(tape, x, self._dropout(tape, att, train_rng))

            y2 = nn.layer_norm(tape, x, p[f"{base}/ln2/gamma"], p[f"{base}/ln2/beta"])
            ff = nn.add(tape, nn.matmul(tape, y2, p[f"{base}/ffn/fc1/w"]), p[f"{base}/ffn/fc1/b"])
            ff = nn.gelu(tape, ff)
            ff = nn.add(tape, nn.matmul(tape, ff, p[f"{base}/ffn/fc2/w"]), p[f"{base}/ffn/fc2/b"])
            x = nn.add(tape, x, self._dropout(tape, ff, train_rng))

        x = nn.layer_norm(
            tape, x, p["enc/" + side + "/ln_out/gamma"], p["enc/" + side + "/ln_out/beta"]
        )
        return x, mask

    def _dropout(self, tape, x: nn.Tensor, train_rng) -> nn.Tensor:
        if train_rng is None or self.config.dropout <= 0.0:
            return x
        return nn.dropout(tape, x, self.config.dropout, train_rng)

    def _grid_from_side(
        self,
        tape: nn.Tape | None,
        encoded: nn.Tensor,
        bundles: tuple[Bundle, ...],
        include_header: bool,
    ) -> tuple[nn.Tensor, np.ndarray]:
        """Reassemble bundle outputs into a window-ordered grid.

        Row side keeps an averaged header row on top ([2D+2, L, H]); the
        column side drops its header-role member and keeps the 2D+1 data
        columns ([2D+1, L, H]).  PAD positions are zeroed so the later
        full-extent convolutions only see real tokens.
        """
        cfg = self.config
        length = cfg.seq_len
        pieces: list[nn.Tensor] = []
        mask_rows: list[np.ndarray] = []

        if include_header:
            header_slices = [
                nn.slice_t(tape, encoded, (k, slice(0, length)))
                for k in range(len(bundles))
            ]
            avg = nn.scale(tape, reduce(lambda a, b: nn.add(tape, a, b), header_slices), 1.0 / len(bundles))
            pieces.append(nn.reshape(tape, avg, (1, length, cfg.hidden)))
            mask_rows.append(np.asarray(bundles[0].members[0].mask, dtype=bool))

        by_offset: dict[int, tuple[int, int]] = {}
        for k, bundle in enumerate(bundles):
            for j, offset in enumerate(bundle.member_offsets):
                by_offset[offset] = (k, j)
        for offset in range(-cfg.radius, cfg.radius + 1):
            k, j = by_offset[offset]
            lo = (j + 1) * length
            piece = nn.slice_t(tape, encoded, (k, slice(lo, lo + length)))
            pieces.append(nn.reshape(tape, piece, (1, length, cfg.hidden)))
            mask_rows.append(np.asarray(bundles[k].members[j + 1].mask, dtype=bool))

        grid = nn.concat(tape, pieces, axis=0)
        grid_mask = np.stack(mask_rows)
        grid = nn.mul(tape, grid, nn.Tensor(grid_mask[:, :, None].astype(np.float64)))
        return grid, grid_mask

    def _side_embeddings(
        self, tape: nn.Tape | None, side: str, grid: nn.Tensor
    ) -> nn.Tensor:
        """e = [c_pos + c_span ; token embedding] per grid position."""
        if not self.config.use_convolutions:
            return grid
        p = self.store
        c_pos = nn.conv_1xL(tape, grid, p[f"conv/{side}/pos_w"], p[f"conv/{side}/pos_b"])
        c_span = nn.conv_Kx1(tape, grid, p[f"conv/{side}/span_w"], p[f"conv/{side}/span_b"])
        summary = nn.add(tape, c_pos, c_span)
        return nn.concat(tape, [summary, grid], axis=-1)

    def _empty_bank(self) -> tuple[nn.Tensor, np.ndarray]:
        return nn.Tensor(np.zeros((1, self.config.bank_width))), np.zeros(1, dtype=bool)

    def encode(
        self,
        tape: nn.Tape | None,
        bundles: BundleSet,
        train_rng: np.random.Generator | None = None,
    ) -> EncodedStates:
        cfg = self.config
        if (
            bundles.radius != cfg.radius
            or bundles.group != cfg.bundle_width
            or bundles.seq_len != cfg.seq_len
        ):
            raise DataError(
                f"bundles built for (radius={bundles.radius}, group={bundles.group},"
                f" L={bundles.seq_len}) but config wants (radius={cfg.radius},"
                f" group={cfg.bundle_width}, L={cfg.seq_len})"
            )
        if not cfg.use_context:
            zero_h, mask_h = self._empty_bank()
            zero_d, mask_d = self._empty_bank()
            return EncodedStates(zero_h, mask_h, zero_d, mask_d)

        length, width = cfg.seq_len, cfg.bank_width
        data_parts: list[nn.Tensor] = []
        data_masks: list[np.ndarray] = []
        header_bank, header_mask = self._empty_bank()

        if cfg.row_context:
            encoded, _ = self._run_side(tape, "row", bundles.row_bundles, train_rng)
            grid, grid_mask = self._grid_from_side(
                tape, encoded, bundles.row_bundles, include_header=True
            )
            e_row = self._side_embeddings(tape, "row", grid)
            header_bank = nn.reshape(tape, nn.slice_t(tape, e_row, (slice(0, 1),)), (length, width))
            header_mask = grid_mask[0]
            rows = 2 * cfg.radius + 1
            data_parts.append(
                nn.reshape(tape, nn.slice_t(tape, e_row, (slice(1, None),)), (rows * length, width))
            )
            data_masks.append(grid_mask[1:].reshape(-1))

        if cfg.col_context:
            encoded, _ = self._run_side(tape, "col", bundles.col_bundles, train_rng)
            grid, grid_mask = self._grid_from_side(
                tape, encoded, bundles.col_bundles, include_header=False
            )
            e_col = self._side_embeddings(tape, "col", grid)
            cols = 2 * cfg.radius + 1
            data_parts.append(nn.reshape(tape, e_col, (cols * length, width)))
            data_masks.append(grid_mask.reshape(-1))

        if data_parts:
            data_bank = data_parts[0] if len(data_parts) == 1 else nn.concat(tape, data_parts, axis=0)
            data_mask = np.concatenate(data_masks)
        else:
            data_bank, data_mask = self._empty_bank()
        return EncodedStates(header_bank, header_mask, data_bank, data_mask)

    # -- decoder -----------------------------------------------------------

    def initial_state(self) -> tuple[nn.Tensor, nn.Tensor]:
        width = self.config.decoder_hidden
        return nn.Tensor(np.zeros((1, width))), nn.Tensor(np.zeros((1, width)))

    def _attend(
        self,
        tape: nn.Tape | None,
        bank_name: str,
        bank: nn.Tensor,
        mask: np.ndarray,
        query: nn.Tensor,
    ) -> nn.Tensor:
        p = self.store
        keys = nn.matmul(tape, bank, p[f"attn/{bank_name}/wk"])
        q = nn.matmul(tape, query, p[f"attn/{bank_name}/wq"])
        scores = nn.matmul(
            tape,
            nn.tanh(tape, nn.add(tape, nn.add(tape, keys, q), p[f"attn/{bank_name}/b"])),
            p[f"attn/{bank_name}/v"],
        )
        weights = nn.masked_softmax(
            tape, nn.reshape(tape, scores, (1, bank.data.shape[0])), mask[None, :]
        )
        return nn.matmul(tape, weights, bank)

    def step(
        self,
        tape: nn.Tape | None,
        states: EncodedStates,
        h: nn.Tensor,
        c: nn.Tensor,
        prev_joint_id: int | None,
        train_rng: np.random.Generator | None = None,
    ) -> tuple[nn.Tensor, nn.Tensor, nn.Tensor]:
        """One decoder step; returns (h', c', feature vector for the heads)."""
        p = self.store
        if prev_joint_id is None:
            emb = p["dec/start"]
        else:
            emb = nn.embedding_lookup(
                tape, p["dec/tok_emb"], np.asarray([[prev_joint_id]], dtype=np.int64)
            )
            emb = nn.reshape(tape, emb, (1, self.config.hidden))
        h2, c2 = nn.lstm_step(tape, emb, h, c, p["dec/lstm/w"], p["dec/lstm/b"])
        ctx_header = self._attend(tape, "header", states.header_bank, states.header_mask, h2)
        ctx_data = self._attend(tape, "data", states.data_bank, states.data_mask, h2)
        vec = nn.concat(tape, [h2, ctx_header, ctx_data], axis=-1)
        vec = self._dropout(tape, vec, train_rng)
        return h2, c2, vec

    def stage_logits(self, tape: nn.Tape | None, vec: nn.Tensor, stage: str) -> tuple[nn.Tensor, str]:
        """Logits for one step; the space is 'sketch'/'range' or 'joint'."""
        p = self.store
        if self.config.two_stage:
            head = "head/sketch" if stage == SKETCH_STAGE else "head/range"
            space = stage
        else:
            head = "head/joint"
            space = "joint"
        return nn.add(tape, nn.matmul(tape, vec, p[f"{head}/w"]), p[f"{head}/b"]), space

    def decode_teacher_forced(
        self,
        tape: nn.Tape | None,
        states: EncodedStates,
        tokens,
        train_rng: np.random.Generator | None = None,
    ) -> tuple[nn.Tensor, int, int]:
        """Mean cross entropy over the gold stream; returns (loss, #sketch, #range)."""
        pairs = split_stages(tokens)
        logit_rows: dict[str, list[nn.Tensor]] = {}
        targets: dict[str, list[int]] = {}
        h, c = self.initial_state()
        prev: int | None = None
        n_sketch = n_range = 0
        for tok, stage in pairs:
            h, c, vec = self.step(tape, states, h, c, prev, train_rng)
            logits, space = self.stage_logits(tape, vec, stage)
            logit_rows.setdefault(space, []).append(logits)
            targets.setdefault(space, []).append(self.target_id(tok, stage))
            if stage == SKETCH_STAGE:
                n_sketch += 1
            else:
                n_range += 1
            prev = self.joint_id(tok)
        total: nn.Tensor | None = None
        for space, rows in logit_rows.items():
            block = rows[0] if len(rows) == 1 else nn.concat(tape, rows, axis=0)
            part = nn.cross_entropy(
                tape, block, np.asarray(targets[space], dtype=np.int64), reduction="sum"
            )
            total = part if total is None else nn.add(tape, total, part)
        loss = nn.scale(tape, total, 1.0 / len(pairs))
        return loss, n_sketch, n_range
