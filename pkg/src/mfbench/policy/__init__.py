from mfbench.policy.chunk import FeatureChunk, push_feature
from mfbench.policy.config import ModelConfig
from mfbench.policy.model import (
    ActionNormalizer,
    DiffusionBatch,
    Policy,
    diffusion_loss,
    encode_window,
    make_batch,
    sample_actions,
)
from mfbench.policy.network import decode_noise, encode_frames, init_params, modulate
from mfbench.policy.schedule import NoiseSchedule
from mfbench.policy.train import (
    TrainHyper,
    TrainResult,
    WindowDataset,
    pretrain_encoder,
    shift_augment,
    train,
    train_shared_encoder,
    transfer_encoder,
)

__all__ = [
    "ActionNormalizer", "DiffusionBatch", "FeatureChunk", "ModelConfig", "NoiseSchedule",
    "Policy", "TrainHyper", "TrainResult", "WindowDataset", "decode_noise", "diffusion_loss",
    "encode_frames", "encode_window", "init_params", "make_batch", "modulate",
    "pretrain_encoder", "push_feature", "sample_actions", "shift_augment", "train",
    "train_shared_encoder", "transfer_encoder",
]
