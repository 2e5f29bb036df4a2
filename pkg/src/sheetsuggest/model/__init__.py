from .beam import BeamResult, DecodedStream, Hypothesis, allowed_tokens, beam_decode, greedy_decode
from .config import ModelConfig, reference_config, toy_config
from .network import (
    CheckpointMismatchError,
    DataError,
    EncodedStates,
    Network,
    Vocabs,
    split_stages,
)
from .predictor import Predictor, Suggestion
from .training import TrainResult, TrainSettings, train

__all__ = [
    "BeamResult",
    "CheckpointMismatchError",
    "DataError",
    "DecodedStream",
    "EncodedStates",
    "Hypothesis",
    "ModelConfig",
    "Network",
    "Predictor",
    "Suggestion",
    "TrainResult",
    "TrainSettings",
    "Vocabs",
    "allowed_tokens",
    "beam_decode",
    "greedy_decode",
    "reference_config",
    "split_stages",
    "toy_config",
    "train",
]
