"""A8 directionality experiment: corpus sharpness x injection scale."""
import sys
import time

import numpy as np

from gssmjscc.codec import Codec, desk_config
from gssmjscc.gssm import CsiRestConfig
from gssmjscc.tensor import Rng
from gssmjscc.training import evaluate, train


def grid(size):
    c = np.linspace(0.0, 1.0, size)
    return np.meshgrid(c, c, indexing="ij")


def gradient(rng, size):
    yy, xx = grid(size)
    ang = rng.uniform(0, 2 * np.pi)
    t = (np.cos(ang) * xx + np.sin(ang) * yy + 1.0) / 2.0
    c0 = rng.uniform(0.05, 0.95, (3,))
    c1 = rng.uniform(0.05, 0.95, (3,))
    return c0[:, None, None] + (c1 - c0)[:, None, None] * t[None]


def blobs(rng, size):
    yy, xx = grid(size)
    img = np.tile(rng.uniform(0.1, 0.9, (3,))[:, None, None], (1, size, size))
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.1, 0.9, (2,))
        sigma = rng.uniform(0.08, 0.3)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
        img += rng.uniform(-0.6, 0.6, (3,))[:, None, None] * bump[None]
    return img


def checker(rng, size, lo, hi):
    yy, xx = grid(size)
    period = rng.uniform(lo, hi)
    phase = rng.uniform(0, 2 * np.pi, (2,))
    wave = 0.5 + 0.5 * np.sin(2 * np.pi * xx / period + phase[0]) * \
        np.sin(2 * np.pi * yy / period + phase[1])
    c0 = rng.uniform(0.1, 0.9, (3,))
    c1 = rng.uniform(0.1, 0.9, (3,))
    return c0[:, None, None] + (c1 - c0)[:, None, None] * wave[None]


def corpus(rng, count, size, lo, hi, mixed_checker):
    out = np.zeros((count, 3, size, size))
    for i in range(count):
        k = i % 4
        if k == 0:
            img = gradient(rng, size)
        elif k == 1:
            img = blobs(rng, size)
        elif k == 2:
            img = checker(rng, size, lo, hi)
        elif mixed_checker:
            img = 0.55 * gradient(rng, size) + 0.45 * checker(rng, size, lo, hi)
        else:
            img = 0.6 * gradient(rng, size) + 0.4 * blobs(rng, size)
        out[i] = np.clip(img, 0, 1)
    return out


def run(tag, lo, hi, mixed_checker, scale, batch=8, ls=8, trials=40, seed=1,
        count=24):
    t0 = time.time()
    train_imgs = corpus(Rng(5).child(0), count, 32, lo, hi, mixed_checker)
    test_imgs = corpus(Rng(5).child(1), 8, 32, lo, hi, mixed_checker)

    def make(enabled):
        cfg = desk_config(seed=seed, csi_enabled=enabled, snr_scale=scale)
        cfg.csi = CsiRestConfig(ls, enabled, scale)
        return Codec(cfg)

    nocsi = make(False)
    train(nocsi, train_imgs, steps=2000, lr=1e-4, batch_size=batch, seed=seed,
          snr_range=(0.0, 20.0))
    adaptive = make(True)
    train(adaptive, train_imgs, steps=2000, lr=1e-4, batch_size=batch,
          seed=seed, snr_range=(0.0, 20.0))

    msg = [f"{tag} scale={scale}"]
    for snr in (0.0, 20.0):
        mt = evaluate(adaptive, test_imgs, snr_db=snr, trials=trials,
                      seed=81, inject_snr=snr).mean_mse
        ms = evaluate(adaptive, test_imgs, snr_db=snr, trials=trials,
                      seed=81, inject_snr=20.0 - snr).mean_mse
        msg.append(f"swap@{snr:g}: {mt:.6f} vs {ms:.6f} {'OK' if mt <= ms else 'X'}")
    for es in (82, 83):
        for snr in (0.0, 20.0):
            pa = evaluate(adaptive, test_imgs, snr_db=snr, trials=trials,
                          seed=es).mean_psnr_db
            pn = evaluate(nocsi, test_imgs, snr_db=snr, trials=trials,
                          seed=es).mean_psnr_db
            msg.append(f"curve@{snr:g}/s{es}: {pa:.2f} vs {pn:.2f} "
                       f"{'OK' if pa >= pn else 'X'}")
    msg.append(f"{(time.time() - t0) / 60:.1f}m")
    print(" | ".join(msg), flush=True)


if __name__ == "__main__":
    which = sys.argv[1]
    if which == "p1":
        run("smooth+scale.05", 0.25, 0.6, False, 0.05)
    elif which == "p2":
        run("mildsharp+scale.1", 0.15, 0.35, False, 0.1)
    elif which == "s2":
        run("smooth+scale.05+seed2", 0.25, 0.6, False, 0.05, seed=2)
    elif which == "s3":
        run("smooth+scale.05+seed3", 0.25, 0.6, False, 0.05, seed=3)
    elif which == "s4":
        run("smooth+scale.05+seed4", 0.25, 0.6, False, 0.05, seed=4)
    elif which == "n32":
        run("smooth+scale.05+n32", 0.25, 0.6, False, 0.05, count=32)
