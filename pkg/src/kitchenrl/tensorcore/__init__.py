from .tensor import (
    ShapeError,
    Tensor,
    add,
    backward,
    concat_cols,
    concat_rows,
    constant,
    exp,
    gather_rows,
    get_default_dtype,
    l2_normalize_rows,
    leaky_relu,
    linear,
    log,
    log_softmax_rows,
    matmul,
    mean_all,
    mul,
    reshape,
    rowwise_dot,
    scale,
    set_default_dtype,
    softmax_rows,
    stop_gradient,
    sub,
    sum_all,
    sum_squares,
    transpose,
)
from .params import (
    ParamGroup,
    adam_step,
    clip_global_norm,
    global_norm,
    load_checkpoint,
    save_checkpoint,
)
from .gradcheck import NondeterministicLossError, finite_diff_check

__all__ = [
    "ShapeError", "Tensor", "add", "backward", "concat_cols", "concat_rows",
    "constant", "exp", "gather_rows", "get_default_dtype", "l2_normalize_rows",
    "leaky_relu", "linear", "log", "log_softmax_rows", "matmul", "mean_all",
    "mul", "reshape", "rowwise_dot", "scale", "set_default_dtype",
    "softmax_rows", "stop_gradient", "sub", "sum_all", "sum_squares",
    "transpose", "ParamGroup", "adam_step", "clip_global_norm", "global_norm",
    "load_checkpoint", "save_checkpoint", "NondeterministicLossError",
    "finite_diff_check",
]
