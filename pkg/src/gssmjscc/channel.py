"""Simulated wireless links: AWGN, flat Rayleigh fading, MMSE equalization.

Symbols travel as [batch, k, 2] real pairs. Noise power is calibrated
against unit signal power: sigma^2 = 10^(-snr_db / 10), split evenly over
the real and imaginary components. Fading draws one coefficient per frame
by default ("block_len = whole frame"); the receiver knows it exactly.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import Rng, Tensor, broadcast_to, index, stack

CHANNEL_KINDS = ("awgn", "rayleigh", "none")


def noise_variance(snr_db):
    return 0.0 if np.isinf(snr_db) else float(10.0 ** (-snr_db / 10.0))


@dataclass
class ChannelRealization:
    """One drawn channel: everything the equalizer and reruns need."""

    kind: str
    snr_db: float
    noise: np.ndarray            # [b, k, 2]
    noise_var: float
    h_re: Optional[np.ndarray]   # [b, k] fading, None for awgn/none
    h_im: Optional[np.ndarray]


def draw_realization(kind, snr_db, shape, rng: Rng,
                     block_len=None) -> ChannelRealization:
    """Sample noise (and fading for rayleigh) for a [b, k, 2] signal."""
    if kind not in CHANNEL_KINDS:
        raise ValueError(f"unknown channel kind {kind!r}")
    b, k, _ = shape
    var = noise_variance(snr_db)
    if kind == "none":
        return ChannelRealization(kind, snr_db, np.zeros(shape), 0.0,
                                  None, None)
    noise = rng.normal(shape, std=np.sqrt(var / 2.0)) if var > 0.0 \
        else np.zeros(shape)
    if kind == "awgn":
        return ChannelRealization(kind, snr_db, noise, var, None, None)
    # CN(0, 1) coefficients, constant over blocks (default: the whole frame)
    blocks = 1 if block_len is None else -(-k // block_len)
    hr = rng.normal((b, blocks), std=np.sqrt(0.5))
    hi = rng.normal((b, blocks), std=np.sqrt(0.5))
    reps = k if block_len is None else block_len
    h_re = np.repeat(hr, reps, axis=1)[:, :k]
    h_im = np.repeat(hi, reps, axis=1)[:, :k]
    return ChannelRealization(kind, snr_db, noise, var, h_re, h_im)


def apply_realization(q: Tensor, cr: ChannelRealization) -> Tensor:
    """Deterministically push symbols through a drawn channel."""
    if cr.kind == "none":
        return q
    if cr.kind == "awgn":
        return q + Tensor(cr.noise)
    qr = index(q, 2, 0)
    qi = index(q, 2, 1)
    hr = Tensor(cr.h_re)
    hi = Tensor(cr.h_im)
    rr = hr * qr - hi * qi
    ri = hr * qi + hi * qr
    return stack([rr, ri], axis=2) + Tensor(cr.noise)


def awgn(q: Tensor, snr_db, rng: Rng) -> Tensor:
    """r = q + circularly-symmetric complex Gaussian noise."""
    _warn_if_unnormalized(q)
    return apply_realization(q, draw_realization("awgn", snr_db, q.shape, rng))


def rayleigh(q: Tensor, snr_db, rng: Rng, block_len=None):
    """r = h q + n with h ~ CN(0, 1); returns (r, realization)."""
    _warn_if_unnormalized(q)
    cr = draw_realization("rayleigh", snr_db, q.shape, rng, block_len)
    return apply_realization(q, cr), cr


def mmse_equalize(r: Tensor, h_re, h_im, noise_var) -> Tensor:
    """conj(h) r / (|h|^2 + sigma^2), elementwise over symbols."""
    rr = index(r, 2, 0)
    ri = index(r, 2, 1)
    hr = _as_const(h_re, rr.shape)
    hi = _as_const(h_im, rr.shape)
    denom = hr * hr + hi * hi + noise_var
    er = (hr * rr + hi * ri) / denom
    ei = (hr * ri - hi * rr) / denom
    return stack([er, ei], axis=2)


def transmit(q: Tensor, kind, snr_db, rng: Rng, block_len=None):
    """Channel plus receiver-side equalization; returns (r_hat, realization)."""
    cr = draw_realization(kind, snr_db, q.shape, rng, block_len)
    r = apply_realization(q, cr)
    if kind == "rayleigh":
        r = mmse_equalize(r, cr.h_re, cr.h_im, cr.noise_var)
    return r, cr


def equalize_realization(r: Tensor, cr: ChannelRealization) -> Tensor:
    if cr.kind != "rayleigh":
        return r
    return mmse_equalize(r, cr.h_re, cr.h_im, cr.noise_var)


def _as_const(h, shape):
    h = np.asarray(h, dtype=np.float64)
    if h.shape == shape:
        return Tensor(h)
    return broadcast_to(Tensor(h), shape)


def _warn_if_unnormalized(q):
    power = float(np.mean(np.sum(q.data * q.data, axis=-1)))
    if abs(power - 1.0) > 0.05:
        warnings.warn(
            f"channel input power {power:.3f} is not 1; the realized SNR "
            "will not match snr_db", stacklevel=3)
