from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from mfbench.errors import ConfigError

DECODER_VARIANTS = ("cross_attention_dit", "self_attention_only", "mlp_only")
DECODER_ALIASES = {"dit": "cross_attention_dit", "mlp": "mlp_only", "self": "self_attention_only"}


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int = 32          # d
    decoder_dim: int = 64          # d'
    frames: int = 4                # M (past frames + current)
    action_dim: int = 3            # n
    chunk_len: int = 4             # K
    decoder_layers: int = 2
    heads: int = 4
    diffusion_steps: int = 50
    decoder: str = "cross_attention_dit"
    modulator: bool = True
    regularization: bool = True
    image_size: int = 64
    patch_size: int = 8
    encoder_layers: int = 2
    encoder_heads: int = 2
    num_instructions: int = 7
    mlp_ratio: int = 4

    def __post_init__(self):
        if self.decoder in DECODER_ALIASES:
            object.__setattr__(self, "decoder", DECODER_ALIASES[self.decoder])
        self.validate()

    def validate(self) -> None:
        if self.frames < 1:
            raise ConfigError("frames (M) must be >= 1")
        if self.chunk_len < 1:
            raise ConfigError("chunk_len (K) must be >= 1")
        if self.diffusion_steps < 1:
            raise ConfigError("diffusion_steps must be >= 1")
        if self.decoder_dim % self.heads:
            raise ConfigError(f"decoder_dim {self.decoder_dim} not divisible by heads {self.heads}")
        if self.feature_dim % self.encoder_heads:
            raise ConfigError("feature_dim not divisible by encoder_heads")
        if self.image_size % self.patch_size:
            raise ConfigError("image_size must be a multiple of patch_size")
        if self.decoder not in DECODER_VARIANTS:
            raise ConfigError(f"unknown decoder variant {self.decoder!r}")

    @property
    def past_frames(self) -> int:
        return self.frames - 1

    @property
    def num_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3

    @property
    def modulated_rows(self) -> int:
        """Rows of the conditioning matrix handed to the decoder."""
        if self.frames == 1:
            return 1
        return 2 * self.past_frames if self.modulator else self.frames

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)
