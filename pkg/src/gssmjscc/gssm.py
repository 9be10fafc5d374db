"""Generalized SSM: invertible scan reordering around the selective scan.

A scan scheme is an invertible T x T transformation applied to a sequence
before the recurrence and undone after it. Permutation schemes (identity,
reversal) are stored as index maps and cost nothing; arbitrary invertible
matrices are supported for verification of the general definition.

The dual-direction combination runs one forward and one reversed scan and
sums the recovered outputs; SNR injection into the initial and periodically
refreshed state coordinates rides along as pure assignments.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import Tensor, matmul, no_grad, reshape, take, write_index
from .ssm import SsmDirectionParams, generate_step_params, ssm_scan

_ROUND_TRIP_TOL = 1e-10


class ScanScheme:
    """Invertible sequence reordering; permutation or dense-invertible kind."""

    def __init__(self, kind, perm=None, matrix=None, inverse=None):
        self.kind = kind
        self.perm = perm
        self.inv_perm = None if perm is None else np.argsort(perm)
        self.matrix = matrix
        self.inverse = inverse

    @classmethod
    def identity(cls, length):
        return cls("permutation", perm=np.arange(length))

    @classmethod
    def reversal(cls, length):
        # Dense picture: entry (i, j) is 1 iff i + j = length + 1 (1-based).
        return cls("permutation", perm=np.arange(length)[::-1].copy())

    @classmethod
    def permutation(cls, perm):
        perm = np.asarray(perm, dtype=np.intp)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValueError("not a permutation of 0..T-1")
        return cls("permutation", perm=perm)

    @classmethod
    def general(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        inverse = np.linalg.inv(matrix)
        err = np.max(np.abs(matrix @ inverse - np.eye(matrix.shape[0])))
        if err > _ROUND_TRIP_TOL:
            raise ValueError(
                f"scheme matrix too ill-conditioned: |R R^-1 - I| = {err:.3g}")
        return cls("general", matrix=matrix, inverse=inverse)

    @property
    def length(self):
        return len(self.perm) if self.perm is not None else self.matrix.shape[0]

    def is_identity(self):
        return self.kind == "permutation" and \
            bool(np.all(self.perm == np.arange(len(self.perm))))


def _apply_dense(m, z):
    if z.ndim == 1:
        return reshape(matmul(Tensor(m), reshape(z, (z.shape[0], 1))),
                       (z.shape[0],))
    return matmul(Tensor(m), z)


def scan_exchange(z: Tensor, scheme: ScanScheme, axis=0) -> Tensor:
    """Reorder a sequence into scan order."""
    if z.shape[axis] != scheme.length:
        raise ValueError("scan_exchange: length mismatch")
    if scheme.kind == "permutation":
        return take(z, scheme.perm, axis)
    if axis != 0:
        raise ValueError("general schemes act on axis 0")
    return _apply_dense(scheme.matrix, z)


def scan_recover(y: Tensor, scheme: ScanScheme, axis=0) -> Tensor:
    """Exact inverse of scan_exchange."""
    if y.shape[axis] != scheme.length:
        raise ValueError("scan_recover: length mismatch")
    if scheme.kind == "permutation":
        return take(y, scheme.inv_perm, axis)
    if axis != 0:
        raise ValueError("general schemes act on axis 0")
    return _apply_dense(scheme.inverse, y)


@dataclass
class GssmModule:
    """One scan direction: selective-SSM parameters plus its scheme."""

    params: SsmDirectionParams
    scheme: ScanScheme


@dataclass
class CsiRestConfig:
    """SNR injection into the scan state: initial write plus periodic refresh.

    refresh_interval is the gap l_s between refreshed states; snr_scale
    multiplies the injected dB value (1.0 writes it raw). Disabled means
    the forward pass is bit-identical to a plain dual scan.
    """

    refresh_interval: int = 64
    enabled: bool = True
    snr_scale: float = 1.0

    def __post_init__(self):
        if self.refresh_interval < 1:
            raise ValueError("refresh_interval must be >= 1")


def gssm_apply(m: GssmModule, z: Tensor, h0: Optional[Tensor] = None,
               state_edit=None) -> Tensor:
    """exchange -> generate params in scan order -> scan -> recover."""
    x = scan_exchange(z, m.scheme)
    sp = generate_step_params(m.params, x)
    if h0 is None:
        h0 = Tensor(np.zeros(m.params.state_dim))
    y, _ = ssm_scan(sp, x, h0, state_edit=state_edit)
    return scan_recover(y, m.scheme)


def dual_gssm_csi(m1: GssmModule, m2: GssmModule, z: Tensor,
                  csi: CsiRestConfig, snr_db) -> Tensor:
    """Sum of both recovered directions, with SNR state injection.

    Per direction: the initial state gets snr written into coordinate 0,
    and after the update at every step t with t % refresh_interval == 0
    (1-based) the same value is written again, before the output read.
    snr_db may be a Tensor so its influence is differentiable.
    """
    snr = snr_db if isinstance(snr_db, Tensor) else Tensor(float(snr_db))
    if csi.enabled and csi.snr_scale != 1.0:
        snr = snr * csi.snr_scale

    def one_direction(m):
        x = scan_exchange(z, m.scheme)
        sp = generate_step_params(m.params, x)
        h0 = Tensor(np.zeros(m.params.state_dim))
        edit = None
        if csi.enabled:
            h0 = write_index(h0, snr, 0)

            def edit(h, t):
                if t % csi.refresh_interval == 0:
                    return write_index(h, snr, 0)
                return h

        y, _ = ssm_scan(sp, x, h0, state_edit=edit)
        return scan_recover(y, m.scheme)

    return one_direction(m1) + one_direction(m2)


def receptive_field_map(forward, T, eps=1e-5, z0=None):
    """|du_t/dz_s| for every (t, s), by central differences.

    forward maps Tensor[T] -> Tensor[T]. The probe point z0 defaults to a
    seeded draw bounded away from zero so input-dependent parameters do
    not degenerate.
    """
    if z0 is None:
        gen = np.random.Generator(np.random.PCG64(1234))
        z0 = gen.uniform(0.5, 1.5, T) * np.where(gen.uniform(0, 1, T) < 0.5,
                                                 -1.0, 1.0)
    z0 = np.asarray(z0, dtype=np.float64)
    S = np.zeros((T, T))
    with no_grad():
        for s in range(T):
            zp = z0.copy()
            zp[s] += eps
            up = forward(Tensor(zp)).data
            zm = z0.copy()
            zm[s] -= eps
            um = forward(Tensor(zm)).data
            S[:, s] = np.abs((up - um) / (2.0 * eps))
    return S
