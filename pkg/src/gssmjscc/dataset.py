"""Seeded synthetic image corpus: gradients, blobs, soft checkerboards.

Keeps the acceptance training runs self-contained; no downloads. Images
are generated in [0, 1], then quantized through PPM on disk so training
sees exactly what a reader would.
"""

import os

import numpy as np

from .ppm import read_ppm, write_ppm
from .tensor import Rng


def _grid(size):
    c = np.linspace(0.0, 1.0, size)
    return np.meshgrid(c, c, indexing="ij")


def _gradient(rng, size):
    yy, xx = _grid(size)
    ang = rng.uniform(0, 2 * np.pi)
    t = (np.cos(ang) * xx + np.sin(ang) * yy + 1.0) / 2.0
    c0 = rng.uniform(0.05, 0.95, (3,))
    c1 = rng.uniform(0.05, 0.95, (3,))
    return c0[:, None, None] + (c1 - c0)[:, None, None] * t[None]


def _blobs(rng, size):
    yy, xx = _grid(size)
    img = np.tile(rng.uniform(0.1, 0.9, (3,))[:, None, None],
                  (1, size, size))
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.1, 0.9, (2,))
        sigma = rng.uniform(0.08, 0.3)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
        img += rng.uniform(-0.6, 0.6, (3,))[:, None, None] * bump[None]
    return img


def _checker(rng, size):
    yy, xx = _grid(size)
    period = rng.uniform(0.25, 0.6)
    phase = rng.uniform(0, 2 * np.pi, (2,))
    wave = 0.5 + 0.5 * np.sin(2 * np.pi * xx / period + phase[0]) * \
        np.sin(2 * np.pi * yy / period + phase[1])
    c0 = rng.uniform(0.1, 0.9, (3,))
    c1 = rng.uniform(0.1, 0.9, (3,))
    return c0[:, None, None] + (c1 - c0)[:, None, None] * wave[None]


def _mixed(rng, size):
    return 0.6 * _gradient(rng, size) + 0.4 * _blobs(rng, size)


_KINDS = (_gradient, _blobs, _checker, _mixed)


def synth_images(rng: Rng, count, size):
    """[count, 3, size, size] array in [0, 1], kinds cycled."""
    out = np.zeros((count, 3, size, size))
    for i in range(count):
        out[i] = np.clip(_KINDS[i % len(_KINDS)](rng, size), 0.0, 1.0)
    return out


def save_dataset(dirpath, images):
    os.makedirs(dirpath, exist_ok=True)
    for i, img in enumerate(images):
        write_ppm(os.path.join(dirpath, f"{i:04d}.ppm"), img)


def load_dataset(dirpath):
    names = sorted(n for n in os.listdir(dirpath) if n.endswith(".ppm"))
    if not names:
        raise FileNotFoundError(f"no .ppm files in {dirpath}")
    return np.stack([read_ppm(os.path.join(dirpath, n)) for n in names])


def generate_corpus(out_dir, train_count, test_count, size, seed):
    """Write train/ and test/ PPM splits; returns their paths."""
    rng = Rng(seed)
    train = synth_images(rng.child(0), train_count, size)
    test = synth_images(rng.child(1), test_count, size)
    train_dir = os.path.join(out_dir, "train")
    test_dir = os.path.join(out_dir, "test")
    save_dataset(train_dir, train)
    save_dataset(test_dir, test)
    return train_dir, test_dir
