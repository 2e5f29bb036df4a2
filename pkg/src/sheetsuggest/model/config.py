"""Model hyperparameters and ablation switches."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class ModelConfig:
    """Network shape plus the ablation flags the eval harness toggles.

    Defaults are desk scale: small enough to train on a laptop CPU while
    keeping every structural choice of the full design.  The documented
    large configuration lives in :func:`reference_config`.
    """

    radius: int = 10  # context window half-width D
    bundle_width: int = 3  # data rows per encoder bundle N (odd)
    seq_len: int = 128  # tokens per row/column sequence L
    encoder_layers: int = 2
    heads: int = 4
    hidden: int = 128
    ff_hidden: int = 512
    conv_channels: int = 64
    decoder_hidden: int = 128
    attention_hidden: int = 128
    dropout: float = 0.1
    beam_size: int = 64
    seed: int = 0
    max_positions: int = 512
    max_sketch_tokens: int = 64
    max_range_groups: int = 8
    # ablations
    two_stage: bool = True
    use_context: bool = True
    use_convolutions: bool = True
    row_context: bool = True
    col_context: bool = True

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        if self.bundle_width < 1 or self.bundle_width % 2 == 0:
            raise ValueError(f"bundle width must be odd, got {self.bundle_width}")
        if (2 * self.radius + 1) % self.bundle_width != 0:
            raise ValueError(
                f"window width {2 * self.radius + 1} not divisible by"
                f" bundle width {self.bundle_width}"
            )
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.seq_len * (self.bundle_width + 1) > self.max_positions:
            raise ValueError(
                f"bundle takes {self.seq_len * (self.bundle_width + 1)} positions,"
                f" over the {self.max_positions} limit"
            )
        for field in (
            "seq_len",
            "encoder_layers",
            "heads",
            "hidden",
            "ff_hidden",
            "conv_channels",
            "decoder_hidden",
            "attention_hidden",
            "beam_size",
            "max_sketch_tokens",
            "max_range_groups",
        ):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def bundle_count(self) -> int:
        return (2 * self.radius + 1) // self.bundle_width

    @property
    def bank_width(self) -> int:
        """Final per-token embedding size fed to decoder attention."""
        if self.use_convolutions:
            return self.hidden + self.conv_channels
        return self.hidden

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ModelConfig":
        return ModelConfig(**doc)

    def with_overrides(self, **kwargs) -> "ModelConfig":
        return replace(self, **kwargs)


def reference_config() -> ModelConfig:
    """The documented large configuration (not the default; heavy on CPU)."""
    return ModelConfig(
        radius=10,
        bundle_width=3,
        seq_len=128,
        encoder_layers=8,
        heads=8,
        hidden=512,
        ff_hidden=2048,
        conv_channels=512,
        decoder_hidden=512,
        attention_hidden=512,
        dropout=0.1,
        beam_size=64,
    )


def toy_config(**overrides) -> ModelConfig:
    """A deliberately tiny shape for tests and smoke runs."""
    base = dict(
        radius=2,
        bundle_width=1,
        seq_len=8,
        encoder_layers=1,
        heads=2,
        hidden=16,
        ff_hidden=32,
        conv_channels=8,
        decoder_hidden=16,
        attention_hidden=16,
        dropout=0.0,
        beam_size=8,
        max_sketch_tokens=16,
        max_range_groups=4,
    )
    base.update(overrides)
    return ModelConfig(**base)
