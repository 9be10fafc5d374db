"""Selective state-space operator: parameter generation, recurrence, oracles.

A single scan direction of a single feature channel is governed by six
learnable quantities that turn an input sequence into per-step matrices
(A_t, B_t, C_t) for the recurrence

    h_t = A_t h_{t-1} + B_t x_t,    y_t = C_t h_t .

A_t is diagonal, so everything is stored as length-N vectors. The
brute-force matrix-form and zero-input oracles in this module exist purely
for verification; they share no code with the scan they check.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tensor import (Rng, Tensor, broadcast_to, index, no_grad, reshape,
                     softplus, stack, texp, tsum)

ORACLE_MAX_T = 512


class OracleLimitError(ValueError):
    """Sequence too long for the O(T^2 N) brute-force oracles."""


@dataclass
class SsmDirectionParams:
    """Learnable generators for one scan direction of one channel.

    a_diag     diagonal of the continuous state matrix, strictly negative
               at init so every per-step gate lands in (0, 1)
    gen_in     row factor of the step-size generator          [O]
    gen_out    column factor of the step-size generator       [O]
    delta_bias scalar step-size offset
    b_proj     input-matrix generator                         [N]
    c_proj     output-matrix generator                        [N]
    """

    a_diag: Tensor
    gen_in: Tensor
    gen_out: Tensor
    delta_bias: Tensor
    b_proj: Tensor
    c_proj: Tensor

    @property
    def state_dim(self):
        return self.a_diag.shape[0]


def default_gen_dim(d_model):
    """Default width of the step-size generation space."""
    return max(math.ceil(d_model / 16), 1)


def init_direction_params(rng: Rng, state_dim: int, gen_dim: int,
                          requires_grad=True) -> SsmDirectionParams:
    """Fresh parameters: a_diag = -1..-N, delta log-uniform, rest uniform."""
    a = -np.arange(1, state_dim + 1, dtype=np.float64)
    # softplus(delta_bias) log-uniform in [1e-3, 1e-1]
    s = np.exp(rng.uniform(math.log(1e-3), math.log(1e-1)))
    delta = math.log(math.expm1(s))
    lim_o = 1.0 / math.sqrt(gen_dim)
    p = SsmDirectionParams(
        a_diag=Tensor(a),
        gen_in=Tensor(rng.uniform(-1.0, 1.0, (gen_dim,))),
        gen_out=Tensor(rng.uniform(-lim_o, lim_o, (gen_dim,))),
        delta_bias=Tensor(delta),
        b_proj=Tensor(rng.uniform(-1.0, 1.0, (state_dim,))),
        c_proj=Tensor(rng.uniform(-1.0, 1.0, (state_dim,))),
    )
    for t in (p.a_diag, p.gen_in, p.gen_out, p.delta_bias, p.b_proj, p.c_proj):
        t.requires_grad = requires_grad
    return p


@dataclass
class StepParams:
    """Per-step (A_t, B_t, C_t) for one sequence; A_t stored as its diagonal.

    a: [T, N] gates in (0,1) for negative a_diag and positive step sizes
    b: [T, N] input matrices
    c: [T, N] output matrices
    delta: [T] step sizes
    """

    a: Tensor
    b: Tensor
    c: Tensor
    delta: Tensor

    @property
    def seq_len(self):
        return self.a.shape[0]

    @property
    def state_dim(self):
        return self.a.shape[1]


def generate_step_params(p: SsmDirectionParams, x: Tensor) -> StepParams:
    """Input-dependent discretization of one direction's parameters.

    delta_t = softplus(x_t * sum(gen_in*gen_out) + delta_bias)
    A_t     = exp(delta_t * a_diag)        (elementwise on the diagonal)
    B_t     = delta_t * b_proj * x_t
    C_t     = c_proj * x_t
    """
    T = x.shape[0]
    N = p.state_dim
    gain = tsum(p.gen_in * p.gen_out)
    delta = softplus(x * gain + p.delta_bias)
    delta_col = broadcast_to(reshape(delta, (T, 1)), (T, N))
    x_col = broadcast_to(reshape(x, (T, 1)), (T, N))
    a = texp(delta_col * broadcast_to(p.a_diag, (T, N)))
    b = delta_col * broadcast_to(p.b_proj, (T, N)) * x_col
    c = broadcast_to(p.c_proj, (T, N)) * x_col
    return StepParams(a=a, b=b, c=c, delta=delta)


def ssm_scan(sp: StepParams, x: Tensor, h0: Tensor, state_edit=None):
    """Run the recurrence; returns (y [T], h_T [N]).

    state_edit(h, t), when given, is applied after the state update and
    before the output read, with t the 1-based step index. Editing h0 is
    the caller's job.
    """
    T = sp.seq_len
    if x.shape[0] != T:
        raise ValueError("ssm_scan: sequence length mismatch")
    h = h0
    hs = []
    for t in range(T):
        xt = index(x, 0, t)
        h = index(sp.a, 0, t) * h + index(sp.b, 0, t) * xt
        if state_edit is not None:
            h = state_edit(h, t + 1)
        hs.append(h)
    y = tsum(sp.c * stack(hs, axis=0), axis=-1)
    return y, h


def ssm_scan_stacked(a, bx, c, h0, inject_value=None, inject_every=0):
    """Batched scan over many channels at once.

    a, bx, c: [T, ..., N] with bx already the product B_t * x_t;
    h0: [..., N]. Injection writes inject_value into state coordinate 0
    after the update at steps t with t % inject_every == 0 (1-based);
    the t = 0 write into h0 is the caller's job. Returns (y [T, ...], h_T).
    """
    from .tensor import write_index
    T = a.shape[0]
    h = h0
    hs = []
    for t in range(T):
        h = index(a, 0, t) * h + index(bx, 0, t)
        if inject_every and (t + 1) % inject_every == 0:
            h = write_index(h, inject_value, 0)
        hs.append(h)
    y = tsum(c * stack(hs, axis=0), axis=-1)
    return y, h


# -- brute-force oracles (verification only, plain numpy) ---------------------


def _check_oracle_size(T):
    if T > ORACLE_MAX_T:
        raise OracleLimitError(
            f"oracle limited to T <= {ORACLE_MAX_T}, got {T}")


def ssm_matrix_oracle(sp: StepParams) -> np.ndarray:
    """Dense [T, T] matrix M with M[i,j] = C_i A_i...A_{j+1} B_j for i >= j.

    Entries above the diagonal are exactly zero (causality). Built by
    direct cumulative products, independent of ssm_scan.
    """
    T, N = sp.seq_len, sp.state_dim
    _check_oracle_size(T)
    a = sp.a.data
    b = sp.b.data
    c = sp.c.data
    M = np.zeros((T, T))
    for j in range(T):
        prod = b[j].copy()
        M[j, j] = float(c[j] @ prod)
        for i in range(j + 1, T):
            prod = a[i] * prod
            M[i, j] = float(c[i] @ prod)
    return M


def zero_input_oracle(sp: StepParams) -> np.ndarray:
    """[T, N] rows v_t = C_t * A_t...A_1; y_zero_input = v_t @ h0."""
    T, N = sp.seq_len, sp.state_dim
    _check_oracle_size(T)
    rows = np.zeros((T, N))
    prod = np.ones(N)
    for t in range(T):
        prod = sp.a.data[t] * prod
        rows[t] = sp.c.data[t] * prod
    return rows


def scan_reference(a, b, c, x, h0, inject_value=None, inject_every=0):
    """Unrolled recurrence in plain numpy, with optional state injection.

    Independent reference for scans that use the refresh hook; accepts the
    same 1-based injection schedule as ssm_scan_stacked plus the t = 0
    write into h0 (applied here when inject_every > 0).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    h = np.array(h0, dtype=np.float64).copy()
    if inject_every:
        h[0] = inject_value
    y = np.zeros(x.shape[0])
    for t in range(x.shape[0]):
        h = a[t] * h + b[t] * x[t]
        if inject_every and (t + 1) % inject_every == 0:
            h[0] = inject_value
        y[t] = c[t] @ h
    return y, h


def random_step_params(rng: Rng, T: int, N: int) -> StepParams:
    """Random well-scaled StepParams for oracle property sweeps."""
    with no_grad():
        a = Tensor(np.exp(rng.uniform(-2.0, -0.01, (T, N))))
        b = Tensor(rng.uniform(-1.0, 1.0, (T, N)))
        c = Tensor(rng.uniform(-1.0, 1.0, (T, N)))
        delta = Tensor(rng.uniform(0.01, 1.0, (T,)))
    return StepParams(a=a, b=b, c=c, delta=delta)
