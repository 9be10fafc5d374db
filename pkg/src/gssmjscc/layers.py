"""Small learnable layers shared by the backbone blocks and the codec."""

import math

import numpy as np

from .tensor import (Rng, Tensor, broadcast_to, depthwise_conv2d, layer_norm,
                     matmul)


class Linear:
    """Fully connected layer on 2-D token batches [tokens, d_in]."""

    def __init__(self, rng: Rng, d_in, d_out, bias=True):
        lim = 1.0 / math.sqrt(d_in)
        self.w = Tensor(rng.uniform(-lim, lim, (d_in, d_out)),
                        requires_grad=True)
        self.b = Tensor(np.zeros(d_out), requires_grad=True) if bias else None

    def __call__(self, x):
        y = matmul(x, self.w)
        if self.b is not None:
            y = y + broadcast_to(self.b, y.shape)
        return y

    def params(self):
        out = [("w", self.w)]
        if self.b is not None:
            out.append(("b", self.b))
        return out


class LayerNorm:
    """Learnable affine layer norm over the last axis."""

    def __init__(self, d, eps=1e-5):
        self.gamma = Tensor(np.ones(d), requires_grad=True)
        self.beta = Tensor(np.zeros(d), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        return layer_norm(x, self.gamma, self.beta, self.eps)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class DepthwiseConv2d:
    """Per-channel 2-D conv, stride 1, same-size output."""

    def __init__(self, rng: Rng, channels, kernel_size=3):
        lim = 1.0 / kernel_size
        self.kernel = Tensor(
            rng.uniform(-lim, lim, (channels, kernel_size, kernel_size)),
            requires_grad=True)
        self.bias = Tensor(np.zeros(channels), requires_grad=True)
        self.padding = kernel_size // 2

    def __call__(self, x):
        return depthwise_conv2d(x, self.kernel, self.bias, self.padding)

    def params(self):
        return [("kernel", self.kernel), ("bias", self.bias)]


def collect_params(prefix, obj):
    """Flatten an object's params() into (dotted_name, tensor) pairs."""
    return [(f"{prefix}.{name}", t) for name, t in obj.params()]
