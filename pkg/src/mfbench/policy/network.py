"""Per-frame encoder, feature modulator and action-noise decoder.

Parameter prefixes: ``enc.*`` (single-frame encoder), ``mod.*`` (modulator or
its bypass projections) and ``dec.*`` (denoising decoder).  Every function
here is pure in (inputs, params): no hidden state.
"""

from __future__ import annotations

import numpy as np

from mfbench.errors import DimensionError
from mfbench.nn import layers as L
from mfbench.nn import tensor as T
from mfbench.nn.params import ParamStore
from mfbench.nn.tensor import Tensor
from mfbench.policy.config import ModelConfig
from mfbench.policy.schedule import timestep_features


def init_params(config: ModelConfig, seed: int = 0) -> ParamStore:
    c = config
    store = ParamStore(seed)
    d, dp = c.feature_dim, c.decoder_dim
    # encoder
    L.init_linear(store, "enc.patch", c.patch_dim, d)
    store.uniform("enc.pos", (c.num_patches, d), fan_in=d)
    store.uniform("enc.instr", (c.num_instructions, d), fan_in=d)
    store.uniform("enc.summary", (1, d), fan_in=d)
    for i in range(c.encoder_layers):
        p = f"enc.block{i}"
        L.init_layer_norm(store, f"{p}.ln1", d)
        L.init_attention(store, f"{p}.attn", d)
        L.init_layer_norm(store, f"{p}.ln2", d)
        L.init_mlp(store, f"{p}.mlp", d, c.mlp_ratio * d, d)
    L.init_layer_norm(store, "enc.ln_f", d)
    # modulator / conditioning
    if c.frames == 1:
        L.init_linear(store, "mod.proj", d, dp)
    elif c.modulator:
        L.init_linear(store, "mod.div", d, c.past_frames * d)
        store.uniform("mod.pos", (2 * c.past_frames, d), fan_in=d)
        L.init_mlp(store, "mod.mlp", d, dp, dp)
    else:
        store.uniform("mod.pos", (c.frames, d), fan_in=d)
        L.init_linear(store, "mod.proj", d, dp)
    # decoder
    L.init_linear(store, "dec.act_embed", c.action_dim, dp)
    L.init_linear(store, "dec.time_embed", dp, dp)
    store.uniform("dec.pos", (c.chunk_len + 1, dp), fan_in=dp)
    for i in range(c.decoder_layers):
        p = f"dec.layer{i}"
        if c.decoder == "mlp_only":
            L.init_layer_norm(store, f"{p}.ln2", dp)
            L.init_mlp(store, f"{p}.mlp", dp, c.mlp_ratio * dp, dp)
            continue
        L.init_layer_norm(store, f"{p}.ln1", dp)
        L.init_attention(store, f"{p}.sa", dp)
        L.init_layer_norm(store, f"{p}.ln2", dp)
        L.init_mlp(store, f"{p}.mlp", dp, c.mlp_ratio * dp, dp)
        if c.decoder == "cross_attention_dit":
            L.init_layer_norm(store, f"{p}.ln3", dp)
            L.init_attention(store, f"{p}.ca", dp)
    L.init_layer_norm(store, "dec.ln_f", dp)
    L.init_linear(store, "dec.final", dp, c.action_dim)
    return store


def patchify(images: np.ndarray, patch: int) -> np.ndarray:
    """(N, H, W, 3) uint8 -> (N, patches, patch*patch*3) floats in [-1, 1]."""
    n, h, w, ch = images.shape
    x = images.reshape(n, h // patch, patch, w // patch, patch, ch)
    x = x.transpose(0, 1, 3, 2, 4, 5).reshape(n, (h // patch) * (w // patch), patch * patch * ch)
    return x.astype(np.float64) / 127.5 - 1.0


def encode_frames(images: np.ndarray, instructions, params: ParamStore,
                  config: ModelConfig) -> Tensor:
    """Single-frame encoder over a batch: (N, H, W, 3) -> features (N, d).

    Tokens: patches + positional embedding, one instruction token, one
    summary token last; the summary token's final hidden state is the feature.
    """
    c = config
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    if images.shape[1:] != (c.image_size, c.image_size, 3):
        raise DimensionError(f"encoder expects {c.image_size}x{c.image_size}x3 images, "
                             f"got {images.shape[1:]}")
    n = images.shape[0]
    instr = np.asarray(instructions, dtype=np.int64).reshape(n)
    x = L.linear_forward(Tensor(patchify(images, c.patch_size)), params, "enc.patch")
    x = x + params["enc.pos"]
    tok_l = T.reshape(T.embedding(params["enc.instr"], instr), (n, 1, c.feature_dim))
    tok_s = T.broadcast_to(params["enc.summary"], (n, 1, c.feature_dim))
    x = T.concat([x, tok_l, tok_s], axis=1)
    for i in range(c.encoder_layers):
        p = f"enc.block{i}"
        h = L.layer_norm_forward(x, params, f"{p}.ln1")
        x = x + L.attention_block(h, h, params, f"{p}.attn", c.encoder_heads)
        x = x + L.mlp_forward(L.layer_norm_forward(x, params, f"{p}.ln2"), params, f"{p}.mlp")
    last = x.shape[1]
    summary = T.reshape(T.slice_axis(x, last - 1, last, axis=1), (n, c.feature_dim))
    return L.layer_norm_forward(summary, params, "enc.ln_f")


def modulate(past: Tensor | None, current: Tensor, params: ParamStore,
             config: ModelConfig) -> Tensor:
    """Conditioning rows for the decoder from a feature chunk.

    ``past`` is (B, M-1, d) oldest first, ``current`` is (B, d).  With the
    modulator: the current feature is expanded by a linear layer to
    (M-1) feature vectors, stacked after the past features, offset by a
    per-slot positional embedding and mapped row-wise by an MLP to d'.
    Returns (B, 2(M-1), d'); (B, 1, d') when M == 1; (B, M, d') when the
    modulator is disabled.
    """
    c = config
    b = current.shape[0]
    if current.cols != c.feature_dim:
        raise DimensionError(f"modulator expects features of width {c.feature_dim}")
    if c.frames == 1:
        return T.reshape(L.linear_forward(current, params, "mod.proj"), (b, 1, c.decoder_dim))
    if past is None or past.shape[1] != c.past_frames:
        raise DimensionError(f"modulator expects {c.past_frames} past features")
    if not c.modulator:
        rows = T.concat([past, T.reshape(current, (b, 1, c.feature_dim))], axis=1)
        return L.linear_forward(rows + params["mod.pos"], params, "mod.proj")
    div = T.reshape(L.linear_forward(current, params, "mod.div"),
                    (b, c.past_frames, c.feature_dim))
    rows = T.concat([past, div], axis=1) + params["mod.pos"]
    return L.mlp_forward(rows, params, "mod.mlp")


def decode_noise(zf: Tensor, noised: Tensor, timesteps, params: ParamStore,
                 config: ModelConfig) -> Tensor:
    """Predict the noise in ``noised`` (B, K, n) at integer ``timesteps`` (B,)."""
    c = config
    b = noised.shape[0]
    if noised.shape[1:] != (c.chunk_len, c.action_dim):
        raise DimensionError(f"decoder expects action chunks ({c.chunk_len}, {c.action_dim}), "
                             f"got {noised.shape[1:]}")
    ts = np.asarray(timesteps).reshape(b)
    if np.any(ts < 1) or np.any(ts > c.diffusion_steps):
        raise DimensionError(f"timestep outside [1, {c.diffusion_steps}]")
    dp = c.decoder_dim
    act = L.linear_forward(noised, params, "dec.act_embed")
    temb = L.linear_forward(Tensor(timestep_features(ts, dp)), params, "dec.time_embed")
    temb = T.reshape(temb, (b, 1, dp))
    K = c.chunk_len
    if c.decoder == "mlp_only":
        ctx = T.mean(zf, axis=1)
        x = act + temb + ctx + T.slice_axis(params["dec.pos"], 0, K, axis=0)
        for i in range(c.decoder_layers):
            p = f"dec.layer{i}"
            x = x + L.mlp_forward(L.layer_norm_forward(x, params, f"{p}.ln2"), params, f"{p}.mlp")
    else:
        x = T.concat([act, temb], axis=1) + params["dec.pos"]
        if c.decoder == "self_attention_only":
            x = T.concat([x, zf], axis=1)
        for i in range(c.decoder_layers):
            p = f"dec.layer{i}"
            h = L.layer_norm_forward(x, params, f"{p}.ln1")
            x = x + L.attention_block(h, h, params, f"{p}.sa", c.heads)
            x = x + L.mlp_forward(L.layer_norm_forward(x, params, f"{p}.ln2"), params, f"{p}.mlp")
            if c.decoder == "cross_attention_dit":
                h = L.layer_norm_forward(x, params, f"{p}.ln3")
                x = x + L.attention_block(h, zf, params, f"{p}.ca", c.heads)
        x = T.slice_axis(x, 0, K, axis=1)
    return L.linear_forward(L.layer_norm_forward(x, params, "dec.ln_f"), params, "dec.final")
