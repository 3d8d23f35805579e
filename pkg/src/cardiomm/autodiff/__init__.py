from .tensor import (AutodiffError, ShapeError, Tensor, as_tensor, concat, crop2d,
                     default_dtype, exp, get_default_dtype, log, no_grad, pad2d,
                     set_default_dtype, softplus, sqrt, stack)
from .functional import (activation, bilinear_matrix, conv2d, global_avg_pool, linear,
                         prelu, relu, resample_bilinear, sigmoid, softmax)
from .params import ParamStore
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "AutodiffError", "ShapeError", "Tensor", "as_tensor", "concat", "crop2d",
    "default_dtype", "exp", "get_default_dtype", "log", "no_grad", "pad2d",
    "set_default_dtype", "softplus", "sqrt", "stack", "activation", "bilinear_matrix",
    "conv2d", "global_avg_pool", "linear", "prelu", "relu", "resample_bilinear",
    "sigmoid", "softmax", "ParamStore", "GradCheckReport", "grad_check",
]
