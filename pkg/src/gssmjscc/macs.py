"""Analytic multiply-accumulate and parameter accounting.

Convention: one multiply plus its accumulate is 1 MAC. FC layers cost
tokens * d_in * d_out; depthwise convs cost out_elems * k^2; the scan
costs T * (3N + O + 1) per channel per direction (gate, input drive and
output read over the N-dimensional state, plus step-size generation).
Elementwise nonlinearities, normalization statistics and assignments cost
zero, so SNR state injection never shows up in any count.
"""

from dataclasses import dataclass

from .codec import EXPAND, CONV_KERNEL, MLP_RATIO, ModelConfig


@dataclass
class MacCounter:
    """Per-module MAC tallies; additive and config-deterministic."""

    per_module: dict

    @property
    def total(self):
        return sum(self.per_module.values())


def fc_macs(tokens, d_in, d_out):
    return tokens * d_in * d_out


def depthwise_conv_macs(out_elems, kernel):
    return out_elems * kernel * kernel


def scan_macs(seq_len, state_dim, gen_dim):
    """One channel, one direction: gate, drive, read, step-size generation."""
    return seq_len * (3 * state_dim + gen_dim + 1)


def block_macs(width, p, w, state_dim, gen_dim):
    """One backbone block on a p x w grid of width-dim tokens."""
    T = p * w
    ed = EXPAND * width
    macs = fc_macs(T, width, ed)                      # input projection
    macs += depthwise_conv_macs(T * ed, CONV_KERNEL)  # depthwise conv
    macs += 2 * ed * scan_macs(T, state_dim, gen_dim)  # both directions
    macs += T * ed                                    # diagonal input residual
    macs += fc_macs(T, width, ed)                     # gate projection
    macs += T * ed                                    # gating product
    macs += fc_macs(T, ed, width)                     # output projection
    macs += 2 * fc_macs(T, width, MLP_RATIO * width)  # channel MLP
    return macs


def count_macs(cfg: ModelConfig, csi_enabled=None) -> MacCounter:
    """Forward-pass MACs for one image; csi_enabled cannot change anything.

    The flag is accepted (and recorded as an explicit zero-cost row) so the
    zero-overhead claim is checkable by direct comparison.
    """
    shapes = cfg.stage_shapes()
    downs = cfg.stage_downsamples()
    ds = cfg.embed_downsample
    per = {}
    c1, p1, w1 = shapes[0]
    per["embed"] = fc_macs(p1 * w1, 3 * ds * ds, c1)
    for k in range(cfg.stages):
        c, p, w = shapes[k]
        if k >= 1:
            cprev = shapes[k - 1][0]
            src = 4 * cprev if downs[k - 1] else cprev
            per[f"enc.merge{k + 1}"] = fc_macs(p * w, src, c)
        gd = cfg.gen_dim_for(c)
        per[f"enc.s{k + 1}"] = cfg.blocks[k] * \
            block_macs(c, p, w, cfg.state_dim, gd)
    cl, pl, wl = shapes[-1]
    per["compress"] = fc_macs(pl * wl, cl, cfg.signal_channels)
    per["expand"] = fc_macs(pl * wl, cfg.signal_channels, cl)
    for k in range(cfg.stages - 1, -1, -1):
        c, p, w = shapes[k]
        gd = cfg.gen_dim_for(c)
        per[f"dec.s{k + 1}"] = cfg.blocks[k] * \
            block_macs(c, p, w, cfg.state_dim, gd)
        if k >= 1:
            cprev = shapes[k - 1][0]
            dst = 4 * cprev if downs[k - 1] else cprev
            per[f"dec.divide{k + 1}"] = fc_macs(p * w, c, dst)
    per["final"] = fc_macs(p1 * w1, c1, 3 * ds * ds)
    per["csi_rest"] = 0  # assignments only, regardless of the flag
    return MacCounter(per_module=per)


def _linear_params(d_in, d_out, bias=True):
    return d_in * d_out + (d_out if bias else 0)


def _norm_params(d):
    return 2 * d


def _direction_params(channels, state_dim, gen_dim):
    return channels * (3 * state_dim + 2 * gen_dim + 1)


def block_params(width, state_dim, gen_dim):
    ed = EXPAND * width
    n = _norm_params(width) + _linear_params(width, ed)
    n += ed * CONV_KERNEL * CONV_KERNEL + ed            # depthwise conv
    n += _linear_params(width, ed)                      # gate
    n += _linear_params(ed, width)                      # out
    n += 2 * ed                                         # the two diagonals
    n += 2 * _direction_params(ed, state_dim, gen_dim)
    n += _norm_params(width)
    n += _linear_params(width, MLP_RATIO * width)
    n += _linear_params(MLP_RATIO * width, width)
    return n


def count_params(cfg: ModelConfig, csi_enabled=None) -> int:
    """Learnable parameter count; matches the checkpoint blob sizes."""
    shapes = cfg.stage_shapes()
    downs = cfg.stage_downsamples()
    ds = cfg.embed_downsample
    total = _linear_params(3 * ds * ds, cfg.widths[0])
    for k in range(cfg.stages):
        c = cfg.widths[k]
        gd = cfg.gen_dim_for(c)
        if k >= 1:
            cprev = cfg.widths[k - 1]
            src = 4 * cprev if downs[k - 1] else cprev
            total += _norm_params(src) + _linear_params(src, c)
        total += cfg.blocks[k] * block_params(c, cfg.state_dim, gd)
    total += _linear_params(cfg.widths[-1], cfg.signal_channels)
    total += _linear_params(cfg.signal_channels, cfg.widths[-1])
    for k in range(cfg.stages - 1, -1, -1):
        c = cfg.widths[k]
        gd = cfg.gen_dim_for(c)
        total += cfg.blocks[k] * block_params(c, cfg.state_dim, gd)
        if k >= 1:
            cprev = cfg.widths[k - 1]
            dst = 4 * cprev if downs[k - 1] else cprev
            total += _norm_params(c) + _linear_params(c, dst)
    total += _norm_params(cfg.widths[0])
    total += _linear_params(cfg.widths[0], 3 * ds * ds)
    return total
