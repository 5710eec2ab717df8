"""Hierarchical MMR-attention pointer-generator."""

from .config import HiMapConfig, Instance, Vocab, make_instance
from .estimator import HiMapSummarizer
from .model import (
    DecodeStep,
    EncoderStates,
    attention_step,
    backward,
    decode_step,
    encode,
    forward_loss,
    mmr_scores,
    output_distribution,
    reweight_attention,
)
from .params import CheckpointError, init_params, load_checkpoint, param_shapes, save_checkpoint
from .train import TrainingDiverged, decode_ids, make_copy_task, token_accuracy, train

__all__ = [
    "CheckpointError", "DecodeStep", "EncoderStates", "HiMapConfig", "HiMapSummarizer", "Instance",
    "TrainingDiverged", "Vocab", "attention_step", "backward", "decode_ids", "decode_step", "encode",
    "forward_loss", "init_params", "load_checkpoint", "make_copy_task", "make_instance", "mmr_scores",
    "output_distribution", "param_shapes", "reweight_attention", "save_checkpoint", "token_accuracy", "train",
]
