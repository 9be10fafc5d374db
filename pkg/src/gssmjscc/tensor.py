"""Dense float64 tensors with reverse-mode automatic differentiation.

Every array in the package is a Tensor wrapping a numpy float64 ndarray.
Operations record a dynamic graph; backward() walks it in reverse
topological order and accumulates gradients into leaf tensors. The graph
is not consumed: backward() may be called again and gradients keep
accumulating until zero_grad() clears them.

Broadcasting in binary ops is deliberately restricted to equal shapes or
a size-1 operand; use broadcast_to() for anything else so every gradient
rule stays auditable.
"""

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager that suspends graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """A dense float64 array with an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        """A view of the same data outside the graph."""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape manipulation -------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def backward(self):
        """Populate .grad on every requires_grad leaf reachable from a scalar."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss tensor")
        _run_backward(self, np.ones_like(self.data))


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    """Create an op result, recording the graph only when it matters."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


class _GradSlice:
    """Sparse gradient: a dense block destined for one slice of a parent.

    Lets per-step ops in long scans avoid allocating a full-sequence zero
    array each; accumulation densifies once per parent.
    """

    __slots__ = ("axis", "index", "grad", "shape")

    def __init__(self, axis, index, grad, shape):
        self.axis = axis
        self.index = index
        self.grad = grad
        self.shape = shape

    def to_dense(self):
        out = np.zeros(self.shape)
        out[(slice(None),) * self.axis + (self.index,)] = self.grad
        return out


def _run_backward(root, seed):
    # Iterative topological sort; scan chains are far deeper than the
    # interpreter recursion limit.
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    grads = {id(root): seed}
    # Accumulation mutates stored buffers in place, so no two entries may
    # alias one array (ops like add hand the same g to both parents).
    stored = {id(seed)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(g, _GradSlice):
            g = g.to_dense()
        else:
            stored.discard(id(g))
        if node._backward is None:
            # Leaf: accumulate into the persistent gradient field.
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            if acc is None:
                if isinstance(pg, _GradSlice):
                    grads[id(parent)] = pg
                else:
                    if not pg.flags.owndata or id(pg) in stored:
                        pg = pg.copy()
                    grads[id(parent)] = pg
                    stored.add(id(pg))
                continue
            if isinstance(acc, _GradSlice):
                acc = acc.to_dense()
                grads[id(parent)] = acc
                stored.add(id(acc))
            if isinstance(pg, _GradSlice):
                acc[(slice(None),) * pg.axis + (pg.index,)] += pg.grad
            else:
                acc += pg


def _check_binary(a, b, opname):
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise DimensionError(
            f"{opname}: shapes {a.data.shape} and {b.data.shape} are neither "
            "equal nor scalar-with-tensor"
        )


def _reduce_to(g, shape):
    """Sum a gradient down to the shape of a size-1 broadcast operand."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape) if shape else np.asarray(np.sum(g))


# -- elementwise ops ---------------------------------------------------------


def add(a, b):
    _check_binary(a, b, "add")

    def back(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _make(a.data + b.data, (a, b), back)


def sub(a, b):
    _check_binary(a, b, "sub")

    def back(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _make(a.data - b.data, (a, b), back)


def mul(a, b):
    _check_binary(a, b, "mul")

    def back(g):
        return (_reduce_to(g * b.data, a.data.shape),
                _reduce_to(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), back)


def div(a, b):
    _check_binary(a, b, "div")

    def back(g):
        return (_reduce_to(g / b.data, a.data.shape),
                _reduce_to(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(a.data / b.data, (a, b), back)


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def texp(a):
    out_data = np.exp(a.data)
    return _make(out_data, (a,), lambda g: (g * out_data,))


def tlog(a):
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsqrt(a):
    out_data = np.sqrt(a.data)
    return _make(out_data, (a,), lambda g: (g * 0.5 / out_data,))


def tpow(a, exponent):
    """Elementwise power with a fixed real exponent."""
    out_data = a.data ** exponent
    return _make(out_data, (a,),
                 lambda g: (g * exponent * a.data ** (exponent - 1.0),))


def sigmoid(a):
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def silu(a):
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _make(a.data * s, (a,),
                 lambda g: (g * s * (1.0 + a.data * (1.0 - s)),))


def softplus(a):
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _make(np.logaddexp(0.0, a.data), (a,), lambda g: (g * s,))


def relu(a):
    mask = a.data > 0.0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


# -- linear algebra and reductions -------------------------------------------


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul operands must be 2-D")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: inner extents differ, {a.data.shape} x {b.data.shape}")

    def back(g):
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), back)


def tsum(a, axis=None, keepdims=False):
    out_data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape),)

    return _make(out_data, (a,), back)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return tsum(a, axis, keepdims) * (1.0 / n)


# -- shape ops ----------------------------------------------------------------


def reshape(a, shape):
    old = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def broadcast_to(a, shape):
    """Explicit broadcast; gradient sums over the expanded axes."""
    shape = tuple(shape)
    out_data = np.broadcast_to(a.data, shape)
    old = a.data.shape

    def back(g):
        extra = g.ndim - len(old)
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        dup = tuple(i for i, n in enumerate(old) if n == 1 and g.shape[i] != 1)
        if dup:
            g = g.sum(axis=dup, keepdims=True)
        return (g,)

    return _make(out_data, (a,), back)


def take(a, indices, axis):
    """Gather along an axis (permutations and repeats both allowed)."""
    indices = np.asarray(indices, dtype=np.intp)
    n = a.data.shape[axis]
    bijective = len(indices) == n and len(np.unique(indices)) == n

    def back(g):
        out = np.zeros_like(a.data)
        slot = (slice(None),) * axis + (indices,)
        if bijective:
            out[slot] = g
        else:
            np.add.at(out, slot, g)
        return (out,)

    return _make(np.take(a.data, indices, axis=axis), (a,), back)


def index(a, axis, i):
    """Select one slice along an axis, removing the axis."""
    if axis < 0:
        axis += a.data.ndim

    def back(g):
        return (_GradSlice(axis, i, g, a.data.shape),)

    return _make(a.data[(slice(None),) * axis + (i,)], (a,), back)


def stack(tensors, axis=0):
    tensors = tuple(tensors)

    def back(g):
        # None for all-zero slices: pulling one output of a long stack
        # (e.g. one scan step) must not drag zeros through every other step
        out = []
        for i in range(len(tensors)):
            s = g[(slice(None),) * axis + (i,)]
            out.append(s if s.any() else None)
        return tuple(out)

    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def concat(tensors, axis=0):
    tensors = tuple(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tensors, back)


def write_index(x, value, coord):
    """Overwrite x[..., coord] with a scalar value (pure assignment).

    The gradient into the overwritten coordinate is routed to `value`;
    the pre-assignment state receives zero gradient there.
    """
    out_data = x.data.copy()
    out_data[..., coord] = value.data

    def back(g):
        gx = g.copy()
        gx[..., coord] = 0.0
        gv = _reduce_to(np.ascontiguousarray(g[..., coord]), value.data.shape)
        return gx, gv

    return _make(out_data, (x, value), back)


# -- normalization and convolution --------------------------------------------


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if gamma.data.shape != x.data.shape[-1:] or beta.data.shape != x.data.shape[-1:]:
        raise DimensionError("layer_norm affine params must match the last axis")
    d = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gamma.data * xhat + beta.data

    def back(g):
        dxhat = g * gamma.data
        s1 = dxhat.sum(axis=-1, keepdims=True)
        s2 = (dxhat * xhat).sum(axis=-1, keepdims=True)
        dx = inv / d * (d * dxhat - s1 - xhat * s2)
        red = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=red)
        dbeta = g.sum(axis=red)
        return dx, dgamma, dbeta

    return _make(out_data, (x, gamma, beta), back)


def depthwise_conv2d(x, kernel, bias=None, padding=1):
    """Per-channel 2-D correlation, stride 1.

    x: [..., C, H, W]; kernel: [C, kh, kw]; bias: [C] or None.
    Output spatial size is H + 2*padding - kh + 1 (same for W).
    """
    C, kh, kw = kernel.data.shape
    if x.data.shape[-3] != C:
        raise DimensionError("depthwise_conv2d: channel counts differ")
    H, W = x.data.shape[-2:]
    pad = [(0, 0)] * (x.data.ndim - 2) + [(padding, padding), (padding, padding)]
    xp = np.pad(x.data, pad)
    Ho = H + 2 * padding - kh + 1
    Wo = W + 2 * padding - kw + 1
    out_data = np.zeros(x.data.shape[:-2] + (Ho, Wo))
    for i in range(kh):
        for j in range(kw):
            out_data += kernel.data[:, i, j, None, None] * \
                xp[..., i:i + Ho, j:j + Wo]
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    if bias is not None:
        out_data += bias.data[:, None, None]

    def back(g):
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(kernel.data)
        red = tuple(range(g.ndim - 3)) + (g.ndim - 2, g.ndim - 1)
        for i in range(kh):
            for j in range(kw):
                gxp[..., i:i + Ho, j:j + Wo] += \
                    kernel.data[:, i, j, None, None] * g
                gk[:, i, j] = (xp[..., i:i + Ho, j:j + Wo] * g).sum(axis=red)
        gx = gxp[..., padding:padding + H, padding:padding + W]
        if bias is None:
            return gx, gk
        return gx, gk, g.sum(axis=red)

    return _make(out_data, parents, back)


def avg_pool2(x):
    """2x2 average pooling over the trailing two axes (even extents only)."""
    H, W = x.data.shape[-2:]
    if H % 2 or W % 2:
        raise DimensionError("avg_pool2 requires even spatial extents")
    lead = x.data.shape[:-2]
    r = x.data.reshape(lead + (H // 2, 2, W // 2, 2))
    out_data = r.mean(axis=(-3, -1))

    def back(g):
        gg = np.repeat(np.repeat(g, 2, axis=-1), 2, axis=-2)
        return (0.25 * gg.reshape(lead + (H, W)),)

    return _make(out_data, (x,), back)


# -- randomness ----------------------------------------------------------------


class Rng:
    """Seeded random stream; equal seeds give identical draws everywhere."""

    def __init__(self, seed, _sequence=None):
        self.seed = int(seed)
        self._seq = _sequence if _sequence is not None else \
            np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def child(self, key):
        """Deterministic derived stream; distinct keys never collide."""
        return Rng(self.seed,
                   np.random.SeedSequence(self.seed, spawn_key=(int(key),)))

    def uniform(self, low, high, shape=()):
        return self._gen.uniform(low, high, shape)

    def normal(self, shape=(), std=1.0):
        return self._gen.standard_normal(shape) * std

    def integers(self, low, high, shape=()):
        return self._gen.integers(low, high, size=shape)

    def shuffle_indices(self, n):
        return self._gen.permutation(n)


# -- gradient checking ----------------------------------------------------------


def grad_check(f, x, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    f maps a Tensor to a scalar Tensor; x is perturbed coordinate by
    coordinate. Relative error per coordinate is |a - n| / (|a| + |n| + 1e-12).
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError("grad_check eps must lie in [1e-6, 1e-3]")
    x.requires_grad = True
    x.zero_grad()
    f(x).backward()
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    worst = 0.0
    flat = x.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = float(f(x).data)
            flat[i] = keep - eps
            lo = float(f(x).data)
            flat[i] = keep
            numeric = (hi - lo) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12))
    return worst


def grad_check_coords(f, params, coords, eps=1e-5):
    """grad_check over selected (tensor_index, flat_coordinate) pairs.

    f takes no arguments and returns a scalar Tensor built from `params`;
    useful when the full parameter set is too large to sweep.
    """
    for p in params:
        p.requires_grad = True
        p.zero_grad()
    f().backward()

    worst = 0.0
    with no_grad():
        for ti, ci in coords:
            p = params[ti]
            flat = p.data.reshape(-1)
            keep = flat[ci]
            flat[ci] = keep + eps
            hi = float(f().data)
            flat[ci] = keep - eps
            lo = float(f().data)
            flat[ci] = keep
            numeric = (hi - lo) / (2.0 * eps)
            a = 0.0 if p.grad is None else p.grad.reshape(-1)[ci]
            worst = max(worst, abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12))
    return worst


def matmul_oracle(a, b):
    """Naive triple-loop product; the independent reference for matmul."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise DimensionError("oracle: inner extents differ")
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for l in range(k):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc
    return out
