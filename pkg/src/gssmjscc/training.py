"""Adam optimizer, the training loop, and checkpoint-level evaluation.

One training step: sample a batch and an SNR, encode, push through the
simulated channel, equalize, decode, compute the loss, backpropagate,
apply Adam. The log gets one line per step: `step,loss,snr_db,lr`.
Every random choice flows from per-purpose child streams of one seed, so
equal seeds reproduce the loss curve bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import transmit
from .codec import Codec, eval_clamp
from .metrics import LOSSES, MetricReport
from .tensor import Rng, Tensor


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; training aborted."""


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(named_params, state: AdamState, lr, beta1=0.9, beta2=0.999,
              eps=1e-8):
    """Standard bias-corrected Adam update; missing grads count as zero."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p in named_params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def zero_grads(named_params):
    for _, p in named_params:
        p.grad = None


def sample_snr(rng, snr_db, snr_range):
    if snr_range is None:
        return float(snr_db)
    lo, hi = snr_range
    return float(rng.uniform(lo, hi))


def train(codec: Codec, images, *, steps, lr=1e-4, batch_size=4,
          loss_kind="mse", channel_kind="awgn", snr_db=10.0, snr_range=None,
          seed=0, log=None, start_step=0, block_len=None):
    """Optimize the codec in place; returns the list of log lines.

    images: [n, 3, P, W] float array in [0, 1]. snr_range, when given,
    draws each step's SNR uniformly from [lo, hi] dB (channel-adaptive
    training); otherwise snr_db is used throughout. The injected CSI value
    equals the step's average SNR for both channel kinds.
    """
    if len(images) == 0:
        raise ValueError("training dataset is empty")
    loss_fn = LOSSES[loss_kind]
    params = codec.named_params()
    state = AdamState()
    batch_rng = Rng(seed).child(1)
    snr_rng = Rng(seed).child(2)
    chan_rng = Rng(seed).child(3)
    lines = [] if log is None else log

    for step in range(start_step, steps):
        idx = batch_rng.integers(0, len(images), (batch_size,))
        x = Tensor(images[idx])
        snr = sample_snr(snr_rng, snr_db, snr_range)

        signal = codec.encode(x, snr)
        received, _ = transmit(signal.symbols, channel_kind, snr, chan_rng,
                               block_len)
        recon = codec.decode(received, snr)
        loss = loss_fn(recon, x)
        value = float(loss.data)
        if not np.isfinite(value):
            raise TrainingDivergedError(
                f"non-finite loss {value} at step {step}")
        zero_grads(params)
        loss.backward()
        adam_step(params, state, lr)
        lines.append(f"{step},{value:.10g},{snr:.6g},{lr:g}")
    return lines


def evaluate(codec: Codec, images, *, channel_kind="awgn", snr_db=10.0,
             trials=1, seed=0, inject_snr=None, block_len=None,
             csi_override=None) -> MetricReport:
    """Mean metrics over every image with `trials` channel draws each.

    inject_snr decouples the CSI value fed to the model from the true
    channel SNR (mismatched-CSI ablations). csi_override toggles injection
    entirely without touching the stored config.
    """
    report = MetricReport()
    chan_rng = Rng(seed).child(4)
    csi_cfg = codec.cfg.csi
    if csi_override is not None:
        from .gssm import CsiRestConfig
        csi_cfg = CsiRestConfig(csi_cfg.refresh_interval, csi_override,
                                csi_cfg.snr_scale)
    saved = codec.cfg.csi
    codec.cfg.csi = csi_cfg
    try:
        from .tensor import no_grad
        with no_grad():
            for i in range(len(images)):
                x = Tensor(images[i:i + 1])
                told = inject_snr if inject_snr is not None else snr_db
                for _ in range(trials):
                    signal = codec.encode(x, told)
                    received, _ = transmit(signal.symbols, channel_kind,
                                           snr_db, chan_rng, block_len)
                    recon = codec.decode(received, told)
                    report.add(images[i:i + 1], eval_clamp(recon))
    finally:
        codec.cfg.csi = saved
    return report
