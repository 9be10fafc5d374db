"""Reconstruction quality metrics and training losses.

MS-SSIM is built from Tensor ops end to end so 1 - MS-SSIM can serve as a
training loss; PSNR is evaluation-only. dB conversions follow
msssim_db = -10 log10(1 - msssim), with both metrics capped at 100 dB at
their degenerate points.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import (DimensionError, Tensor, avg_pool2, depthwise_conv2d,
                     no_grad, relu, tmean, tpow)

DB_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def mse(x, y):
    """Mean squared error as a float over numpy arrays or Tensors."""
    xd = x.data if isinstance(x, Tensor) else np.asarray(x)
    yd = y.data if isinstance(y, Tensor) else np.asarray(y)
    if xd.shape != yd.shape:
        raise DimensionError("mse: shapes differ")
    return float(np.mean((xd - yd) ** 2))


def loss_mse(x: Tensor, y: Tensor) -> Tensor:
    d = x - y
    return tmean(d * d)


def psnr(x, y, max_val=1.0):
    """10 log10(max^2 / MSE), capped at 100 dB."""
    err = mse(x, y)
    if err <= 0.0:
        return DB_CAP
    return min(DB_CAP, 10.0 * math.log10(max_val * max_val / err))


def _gaussian_window(channels):
    half = (SSIM_WINDOW - 1) / 2.0
    g = np.exp(-((np.arange(SSIM_WINDOW) - half) ** 2) /
               (2.0 * SSIM_SIGMA ** 2))
    w2 = np.outer(g, g)
    w2 /= w2.sum()
    return Tensor(np.tile(w2, (channels, 1, 1)))


def _ssim_cs(x: Tensor, y: Tensor):
    """(mean SSIM, mean contrast-structure) over valid window positions."""
    c = x.shape[-3]
    win = _gaussian_window(c)

    def blur(t):
        return depthwise_conv2d(t, win, None, padding=0)

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x = blur(x)
    mu_y = blur(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    sig_xx = blur(x * x) - mu_xx
    sig_yy = blur(y * y) - mu_yy
    sig_xy = blur(x * y) - mu_xy
    cs_map = (sig_xy * 2.0 + c2) / (sig_xx + sig_yy + c2)
    lum = (mu_xy * 2.0 + c1) / (mu_xx + mu_yy + c1)
    return tmean(lum * cs_map), tmean(cs_map)


def ssim(x: Tensor, y: Tensor) -> Tensor:
    """Single-scale SSIM with an 11x11 Gaussian window."""
    _check_images(x, y, 1)
    return _ssim_cs(x, y)[0]


def feasible_scales(height, width, maximum=5):
    """Largest scale count whose coarsest level still fits the window."""
    m = 0
    side = min(height, width)
    while m < maximum and side >= SSIM_WINDOW:
        m += 1
        if side % 2:
            break
        side //= 2
    return m


def msssim(x: Tensor, y: Tensor, scales=None) -> Tensor:
    """Multi-scale SSIM; scale count auto-reduced for small images.

    The standard five-scale weights are truncated to the feasible count
    and renormalized. Contrast terms are clamped at zero before the
    fractional powers.
    """
    h, w = x.shape[-2], x.shape[-1]
    if scales is None:
        scales = feasible_scales(h, w)
    if scales < 1 or min(h, w) < SSIM_WINDOW * 2 ** (scales - 1):
        raise DimensionError(
            f"image {h}x{w} too small for {max(scales, 1)} SSIM scale(s)")
    _check_images(x, y, scales)
    weights = np.array(MSSSIM_WEIGHTS[:scales])
    weights /= weights.sum()

    result = None
    for j in range(scales):
        lum, cs = _ssim_cs(x, y)
        term = lum if j == scales - 1 else cs
        factor = tpow(relu(term) + 1e-12, weights[j])
        result = factor if result is None else result * factor
        if j < scales - 1:
            x = avg_pool2(x)
            y = avg_pool2(y)
    return result


def msssim_value(x, y, scales=None):
    with no_grad():
        return float(msssim(_as_image_tensor(x), _as_image_tensor(y),
                            scales).data)


def msssim_db(value):
    """-10 log10(1 - msssim), capped at 100 dB near 1."""
    if value >= 1.0 - 1e-10:
        return DB_CAP
    return min(DB_CAP, -10.0 * math.log10(1.0 - value))


def loss_msssim(x: Tensor, y: Tensor) -> Tensor:
    return 1.0 - msssim(x, y) + Tensor(0.0)


LOSSES = {"mse": loss_mse, "msssim": lambda x, y: Tensor(1.0) - msssim(x, y)}


def _check_images(x, y, scales):
    if x.shape != y.shape:
        raise DimensionError("image shapes differ")
    if x.ndim != 4:
        raise DimensionError("expected [batch, channels, H, W] images")


def _as_image_tensor(x):
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    if t.ndim == 3:
        from .tensor import reshape
        t = reshape(t, (1,) + t.shape)
    return t


@dataclass
class MetricReport:
    """Per-transmission metric samples plus their aggregates."""

    psnr_db: list = field(default_factory=list)
    msssim: list = field(default_factory=list)
    mse: list = field(default_factory=list)

    def add(self, reference, reconstruction):
        self.psnr_db.append(psnr(reference, reconstruction))
        self.msssim.append(msssim_value(reference, reconstruction))
        self.mse.append(mse(reference, reconstruction))

    @property
    def mean_psnr_db(self):
        return float(np.mean(self.psnr_db))

    @property
    def mean_msssim(self):
        return float(np.mean(self.msssim))

    @property
    def mean_msssim_db(self):
        return msssim_db(self.mean_msssim)

    @property
    def mean_mse(self):
        return float(np.mean(self.mse))
