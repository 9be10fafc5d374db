"""Gated two-branch backbone block around the dual-direction scan.

Layout conventions: feature maps are [batch, channels, H, W]; token
matrices are [batch*H*W, channels] in row-major spatial order, which is
also the vectorization order the scan schemes act on. Every expanded
channel carries its own SSM parameters per direction, so the per-channel
quantities are stored stacked with a leading channel axis and the scan
runs over all channels at once.
"""

import math

import numpy as np

from .gssm import CsiRestConfig
from .layers import DepthwiseConv2d, LayerNorm, Linear, collect_params
from .ssm import ssm_scan_stacked
from .tensor import (Rng, Tensor, broadcast_to, reshape, silu, softplus,
                     take, texp, transpose, tsum, write_index)


class StackedDirectionParams:
    """Per-channel SSM generators for one direction, channel axis leading."""

    def __init__(self, rng: Rng, channels, state_dim, gen_dim):
        self.state_dim = state_dim
        self.gen_dim = gen_dim
        a = -np.tile(np.arange(1, state_dim + 1, dtype=np.float64),
                     (channels, 1))
        s = np.exp(rng.uniform(math.log(1e-3), math.log(1e-1), (channels,)))
        lim_o = 1.0 / math.sqrt(gen_dim)
        self.a_diag = Tensor(a, requires_grad=True)
        self.gen_in = Tensor(rng.uniform(-1, 1, (channels, gen_dim)),
                             requires_grad=True)
        self.gen_out = Tensor(rng.uniform(-lim_o, lim_o, (channels, gen_dim)),
                              requires_grad=True)
        self.delta_bias = Tensor(np.log(np.expm1(s)), requires_grad=True)
        self.b_proj = Tensor(rng.uniform(-1, 1, (channels, state_dim)),
                             requires_grad=True)
        self.c_proj = Tensor(rng.uniform(-1, 1, (channels, state_dim)),
                             requires_grad=True)

    def params(self):
        return [("a_diag", self.a_diag), ("gen_in", self.gen_in),
                ("gen_out", self.gen_out), ("delta_bias", self.delta_bias),
                ("b_proj", self.b_proj), ("c_proj", self.c_proj)]


def _bc_c(v, shape):
    # [C] -> [T, b, C]
    return broadcast_to(reshape(v, (1, 1, v.shape[0])), shape)


def _bc_cn(v, shape):
    # [C, N] -> [T, b, C, N]
    return broadcast_to(reshape(v, (1, 1) + v.shape), shape)


def _bc_last(t, n):
    # [T, b, C] -> [T, b, C, N]
    return broadcast_to(reshape(t, t.shape + (1,)), t.shape + (n,))


def _direction_scan(dp: StackedDirectionParams, seq, reverse, csi, snr):
    """Scan all channels of one direction; seq is [T, batch, C]."""
    T, bsz, C = seq.shape
    N = dp.state_dim
    full = (T, bsz, C)
    x = take(seq, np.arange(T)[::-1], 0) if reverse else seq
    gain = tsum(dp.gen_in * dp.gen_out, axis=1)
    delta = softplus(x * _bc_c(gain, full) + _bc_c(dp.delta_bias, full))
    a = texp(_bc_last(delta, N) * _bc_cn(dp.a_diag, full + (N,)))
    bx = _bc_last(delta * x * x, N) * _bc_cn(dp.b_proj, full + (N,))
    cc = _bc_last(x, N) * _bc_cn(dp.c_proj, full + (N,))
    h0 = Tensor(np.zeros((bsz, C, N)))
    inject, every = None, 0
    if csi.enabled:
        h0 = write_index(h0, snr, 0)
        inject, every = snr, csi.refresh_interval
    y, _ = ssm_scan_stacked(a, bx, cc, h0, inject, every)
    if reverse:
        y = take(y, np.arange(T)[::-1], 0)
    return y


def dual_scan_stacked(dir1, dir2, seq, csi: CsiRestConfig, snr):
    """Forward plus reversed scan over [T, batch, C] sequences, summed."""
    snr_t = snr if isinstance(snr, Tensor) else Tensor(float(snr))
    if csi.enabled and csi.snr_scale != 1.0:
        snr_t = snr_t * csi.snr_scale
    return _direction_scan(dir1, seq, False, csi, snr_t) + \
        _direction_scan(dir2, seq, True, csi, snr_t)


class VssmCa:
    """One backbone block: norm, gated dual-scan branch, channel MLP."""

    def __init__(self, rng: Rng, d, state_dim, gen_dim, expand=2,
                 conv_kernel=3, mlp_ratio=2):
        ed = expand * d
        self.d = d
        self.ed = ed
        self.norm1 = LayerNorm(d)
        self.in_proj = Linear(rng, d, ed)
        self.conv = DepthwiseConv2d(rng, ed, conv_kernel)
        self.gate_proj = Linear(rng, d, ed)
        self.out_proj = Linear(rng, ed, d)
        # Input residual around the scans, kept as two summed diagonals so
        # either can be zeroed in ablations.
        self.d1 = Tensor(np.ones(ed), requires_grad=True)
        self.d2 = Tensor(np.zeros(ed), requires_grad=True)
        self.dir1 = StackedDirectionParams(rng, ed, state_dim, gen_dim)
        self.dir2 = StackedDirectionParams(rng, ed, state_dim, gen_dim)
        self.norm2 = LayerNorm(d)
        self.mlp_fc1 = Linear(rng, d, mlp_ratio * d)
        self.mlp_fc2 = Linear(rng, mlp_ratio * d, d)

    def __call__(self, x, snr, csi: CsiRestConfig):
        """x: [batch, d, H, W] -> same shape."""
        bsz, d, H, W = x.shape
        T = H * W
        tokens = reshape(transpose(reshape(x, (bsz, d, T)), (0, 2, 1)),
                         (bsz * T, d))
        xn = self.norm1(tokens)

        v = self.in_proj(xn)
        v = transpose(reshape(v, (bsz, H, W, self.ed)), (0, 3, 1, 2))
        v = silu(self.conv(v))
        seq = transpose(reshape(v, (bsz, self.ed, T)), (2, 0, 1))

        u = dual_scan_stacked(self.dir1, self.dir2, seq, csi, snr)
        dd = _bc_c(self.d1 + self.d2, seq.shape)
        branch1 = reshape(transpose(u + dd * seq, (1, 0, 2)),
                          (bsz * T, self.ed))

        branch2 = silu(self.gate_proj(xn))
        res1 = tokens + self.out_proj(branch1 * branch2)
        out = res1 + self.mlp_fc2(silu(self.mlp_fc1(self.norm2(res1))))
        return transpose(reshape(out, (bsz, H, W, d)), (0, 3, 1, 2))

    def params(self):
        out = []
        for name in ("norm1", "in_proj", "conv", "gate_proj", "out_proj"):
            out += collect_params(name, getattr(self, name))
        out += [("d1", self.d1), ("d2", self.d2)]
        out += collect_params("dir1", self.dir1)
        out += collect_params("dir2", self.dir2)
        for name in ("norm2", "mlp_fc1", "mlp_fc2"):
            out += collect_params(name, getattr(self, name))
        return out


def vssm_ca_forward(block: VssmCa, patches: Tensor, snr_db,
                    csi: CsiRestConfig) -> Tensor:
    """Single-item surface: patches [d, H, W] -> [d, H, W]."""
    if patches.ndim != 3:
        raise ValueError("expected [channels, H, W] patches")
    out = block(reshape(patches, (1,) + patches.shape), snr_db, csi)
    return reshape(out, patches.shape)
