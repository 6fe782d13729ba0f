from .layers import (
    bilinear_sample,
    bilinear_sample_backward,
    conv2d_backward,
    conv2d_forward,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
    sigmoid,
    sigmoid_backward,
    sigmoid_binary_cross_entropy,
    softmax,
    softmax_cross_entropy,
)
from .params import Parameter, ParamStore, glorot_uniform
from .optim import OptimizerState, adamw_step, step_decay_lr
from .gradcheck import finite_diff_gradcheck, gradcheck_per_parameter, relative_error
