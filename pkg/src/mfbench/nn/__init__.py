from mfbench.nn.gradcheck import GradCheckReport, finite_diff_check
from mfbench.nn.layers import attention_block, layer_norm_forward, linear_forward, mlp_forward
from mfbench.nn.optim import adamw_step, clip_grad_norm, linear_decay
from mfbench.nn.params import ParamStore, load_params, save_params
from mfbench.nn.tensor import Tape, Tensor, attention_forward, no_grad

__all__ = [
    "GradCheckReport", "ParamStore", "Tape", "Tensor", "adamw_step", "attention_block",
    "attention_forward", "clip_grad_norm", "finite_diff_check", "layer_norm_forward",
    "linear_decay", "linear_forward", "load_params", "mlp_forward", "no_grad", "save_params",
]
