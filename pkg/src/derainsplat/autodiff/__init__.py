from .tensor import (
    Tensor,
    astensor,
    add,
    sub,
    mul,
    div,
    neg,
    power,
    texp,
    tlog,
    tsqrt,
    tabs,
    tsin,
    tcos,
    clamp,
    sigmoid,
    relu,
    gelu,
    softmax,
    tsum,
    tmean,
    l1,
    l2,
    reshape,
    transpose,
    expand,
    take,
    concat,
    stack,
    matmul,
    layer_norm,
    global_avg_pool,
)
from .conv import pad2d, conv2d, depthwise_conv2d, bilinear_resize
from .spectral import ComplexTensor, fft2, ifft2, scale_spectrum, magnitude
from .gradcheck import grad_check

__all__ = [
    "Tensor", "astensor", "add", "sub", "mul", "div", "neg", "power",
    "texp", "tlog", "tsqrt", "tabs", "tsin", "tcos", "clamp", "sigmoid",
    "relu", "gelu", "softmax", "tsum", "tmean", "l1", "l2", "reshape",
    "transpose", "expand", "take", "concat", "stack", "matmul",
    "layer_norm", "global_avg_pool", "pad2d", "conv2d", "depthwise_conv2d",
    "bilinear_resize", "ComplexTensor", "fft2", "ifft2", "scale_spectrum",
    "magnitude", "grad_check",
]
