from .gradcheck import grad_check
from .optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, AdamState, adam_step, clip_grad_norm
from .tensor import (
    LAYER_NORM_EPS,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    dropout,
    exp,
    forward_primitive,
    layer_norm,
    lstm,
    matmul,
    mean,
    mul,
    primitive_names,
    relu,
    reshape,
    scale,
    sigmoid,
    sin,
    slice_,
    softmax,
    square,
    sub,
    sum_,
    tanh,
    transpose,
)
