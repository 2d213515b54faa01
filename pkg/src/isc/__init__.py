"""Implicit semantic communication over knowledge graphs at desk scale."""

from .channel import ChannelConfig, per_sweep, recover, transmit
from .embedding import EmbeddingTable, TransEConfig, train_transe
from .gaml import TrainConfig, evaluate_accuracy, train
from .kg import NO_OP, KBError, KnowledgeBase, PathSet, ReasoningPath, load_triples
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "NO_OP", "KBError", "KnowledgeBase", "PathSet", "ReasoningPath", "load_triples",
    "EmbeddingTable", "TransEConfig", "train_transe",
    "TrainConfig", "train", "evaluate_accuracy",
    "ChannelConfig", "per_sweep", "recover", "transmit",
    "SynthConfig", "generate",
]
