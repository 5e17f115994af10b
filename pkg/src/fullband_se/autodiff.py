"""Reverse-mode automatic differentiation over numpy arrays.

Graph nodes are Tensor objects; each op installs a backward closure when any
input requires gradients. backward() walks the recorded graph once, in
reverse topological order, iteratively (recurrent nets build deep chains).
Training math is float64 throughout.
"""

from __future__ import annotations

import warnings

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_done")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward_fn = _backward_fn
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _lift(other))

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __mul__(self, other):
        return mul(self, _lift(other))


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def check_finite(t: Tensor, what="input"):
    if not np.all(np.isfinite(t.data)):
        raise ValueError(f"non-finite {what}")
    return t


def _node(data, parents, backward_fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward_fn=backward_fn)
    return Tensor(data)


def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor, params=None):
    """Populate .grad on every reachable requires_grad tensor.

    loss must be scalar and attached to a recorded graph; re-running backward
    on the same graph without a fresh forward is rejected. When `params` is
    given, any of them the graph never touched get an explicit zero gradient.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if loss._backward_fn is None and not loss._parents:
        raise ValueError("loss is detached from any recorded graph")
    if loss._done:
        raise RuntimeError("backward already ran on this graph; re-run forward first")
    loss._done = True

    # Iterative post-order: parents land before consumers.
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)

    if params is not None:
        for p in params:
            if p.requires_grad and p.grad is None:
                p.grad = np.zeros_like(p.data)


# ---------------------------------------------------------------------------
# elementwise / reduction primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.data.shape))

    return _node(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), bwd)


def scale(a: Tensor, k: float) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * k)

    return _node(a.data * k, (a,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g * s * (1.0 - s))

    return _node(s, (x,), bwd)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g * (1.0 - t * t))

    return _node(t, (x,), bwd)


def elu(x: Tensor) -> Tensor:
    """x for x >= 0, exp(x) - 1 below."""
    neg = x.data < 0
    out_data = np.where(neg, np.expm1(x.data), x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g * np.where(neg, out_data + 1.0, 1.0))

    return _node(out_data, (x,), bwd)


def log1p(x: Tensor) -> Tensor:
    out_data = np.log1p(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g / (1.0 + x.data))

    return _node(out_data, (x,), bwd)


def absolute(x: Tensor) -> Tensor:
    """|x|; subgradient 0 at 0."""
    sgn = np.sign(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g * sgn)

    return _node(np.abs(x.data), (x,), bwd)


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not x.requires_grad:
            return
        if axis is None:
            x.accumulate(np.broadcast_to(g, x.data.shape).copy())
        else:
            gk = g if keepdims else np.expand_dims(g, axis)
            x.accumulate(np.broadcast_to(gk, x.data.shape).copy())

    return _node(out_data, (x,), bwd)


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    old = x.data.shape

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g.reshape(old))

    return _node(x.data.reshape(shape), (x,), bwd)


def transpose(x: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g.transpose(inverse))

    return _node(x.data.transpose(axes), (x,), bwd)


def concat(parts, axis) -> Tensor:
    parts = list(parts)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            if p.requires_grad:
                p.accumulate(piece)

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bwd)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = tuple(
        slice(start, start + length) if d == axis else slice(None)
        for d in range(x.data.ndim)
    )

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[idx] = g
            x.accumulate(full)

    return _node(x.data[idx].copy(), (x,), bwd)


# ---------------------------------------------------------------------------
# linear / convolutional primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shapes {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    return _node(out_data, (a, b), bwd)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map on the trailing axis: (..., Din) -> (..., Dout)."""
    din, dout = w.data.shape
    if x.data.shape[-1] != din or b.data.shape != (dout,):
        raise ValueError(f"dense shapes x{x.data.shape} w{w.data.shape} b{b.data.shape}")
    x2 = x.data.reshape(-1, din)
    out_data = (x2 @ w.data + b.data).reshape(x.data.shape[:-1] + (dout,))

    def bwd(g):
        g2 = g.reshape(-1, dout)
        if x.requires_grad:
            x.accumulate((g2 @ w.data.T).reshape(x.data.shape))
        if w.requires_grad:
            w.accumulate(x2.T @ g2)
        if b.requires_grad:
            b.accumulate(g2.sum(axis=0))

    return _node(out_data, (x, w, b), bwd)


def _im2col(xp, kt, kf, st, sf, t_out, f_out):
    b, c = xp.shape[:2]
    sb, sc, stt, sff = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(b, c, t_out, f_out, kt, kf),
        strides=(sb, sc, stt * st, sff * sf, stt, sff),
        writeable=False,
    )
    # (B, T', F', C*kt*kf)
    return view.transpose(0, 2, 3, 1, 4, 5).reshape(b, t_out, f_out, c * kt * kf)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride=(1, 2)) -> Tensor:
    """2-D convolution over (time, frequency); causal left padding in time,
    valid (no) padding in frequency.

    x: (B, Cin, T, F), w: (Cout, Cin, kt, kf), b: (Cout,).
    """
    bt, cin, t, f = x.data.shape
    cout, cin_w, kt, kf = w.data.shape
    st, sf = stride
    if cin != cin_w:
        raise ValueError(f"conv2d channels: input {cin}, weight {cin_w}")
    if f < kf:
        raise ValueError(f"conv2d frequency axis {f} shorter than kernel {kf}")
    pad = kt - 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, 0), (0, 0)))
    t_out = (t - 1) // st + 1
    f_out = (f - kf) // sf + 1
    cols = _im2col(xp, kt, kf, st, sf, t_out, f_out)
    wmat = w.data.reshape(cout, -1)
    out_data = (cols.reshape(-1, cols.shape[-1]) @ wmat.T).reshape(
        bt, t_out, f_out, cout).transpose(0, 3, 1, 2) + b.data[None, :, None, None]

    def bwd(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, cout)  # (B*T'*F', Cout)
        if w.requires_grad:
            cols2 = cols.reshape(-1, cols.shape[-1])
            w.accumulate((g2.T @ cols2).reshape(w.data.shape))
        if b.requires_grad:
            b.accumulate(g2.sum(axis=0))
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(bt, t_out, f_out, cin, kt, kf)
            gxp = np.zeros_like(xp)
            for i in range(kt):
                for j in range(kf):
                    gxp[:, :, i : i + st * t_out : st, j : j + sf * f_out : sf] += (
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            x.accumulate(gxp[:, :, pad:, :])

    return _node(out_data, (x, w, b), bwd)


def conv1d_pointwise(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-frame channel mix (kernel 1, stride 1). x: (B, Cin, T), w: (Cout, Cin)."""
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"pointwise conv: input channels {x.data.shape[1]} vs {w.data.shape[1]}")
    out_data = np.einsum("oc,bct->bot", w.data, x.data, optimize=True) + b.data[None, :, None]

    def bwd(g):
        if x.requires_grad:
            x.accumulate(np.einsum("oc,bot->bct", w.data, g, optimize=True))
        if w.requires_grad:
            w.accumulate(np.einsum("bot,bct->oc", g, x.data, optimize=True))
        if b.requires_grad:
            b.accumulate(g.sum(axis=(0, 2)))

    return _node(out_data, (x, w, b), bwd)


def deconv_freq(x: Tensor, w: Tensor, b: Tensor, stride: int) -> Tensor:
    """Transposed convolution along frequency, time kernel 1.

    x: (B, Cin, T, F), w: (Cin, Cout, kf) -> (B, Cout, T, (F-1)*stride + kf).
    """
    bt, cin, t, f = x.data.shape
    cin_w, cout, kf = w.data.shape
    if cin != cin_w:
        raise ValueError(f"deconv channels: input {cin}, weight {cin_w}")
    f_out = (f - 1) * stride + kf
    taps = np.einsum("bitf,iok->botfk", x.data, w.data, optimize=True)
    out_data = np.zeros((bt, cout, t, f_out))
    for j in range(kf):
        out_data[:, :, :, j : j + stride * f : stride] += taps[..., j]
    out_data += b.data[None, :, None, None]

    def bwd(g):
        if b.requires_grad:
            b.accumulate(g.sum(axis=(0, 2, 3)))
        for j in range(kf):
            gslice = g[:, :, :, j : j + stride * f : stride]
            if x.requires_grad:
                x.accumulate(np.einsum("botf,io->bitf", gslice, w.data[:, :, j], optimize=True))
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for j in range(kf):
                gslice = g[:, :, :, j : j + stride * f : stride]
                gw[:, :, j] = np.einsum("bitf,botf->io", x.data, gslice, optimize=True)
            w.accumulate(gw)

    return _node(out_data, (x, w, b), bwd)


# ---------------------------------------------------------------------------
# recurrent step primitives
# ---------------------------------------------------------------------------

def gru_step(x: Tensor, h: Tensor, w_ih: Tensor, w_hh: Tensor, b_ih: Tensor, b_hh: Tensor) -> Tensor:
    """One GRU step. Gate layout [reset | update | candidate].

    x: (B, D), h: (B, H), w_ih: (D, 3H), w_hh: (H, 3H), biases (3H,).
    """
    hdim = h.data.shape[1]
    if w_ih.data.shape != (x.data.shape[1], 3 * hdim) or w_hh.data.shape != (hdim, 3 * hdim):
        raise ValueError("gru_step weight shapes")
    gi = x.data @ w_ih.data + b_ih.data
    gh = h.data @ w_hh.data + b_hh.data
    r = _sigmoid(gi[:, :hdim] + gh[:, :hdim])
    z = _sigmoid(gi[:, hdim : 2 * hdim] + gh[:, hdim : 2 * hdim])
    ghn = gh[:, 2 * hdim :]
    n = np.tanh(gi[:, 2 * hdim :] + r * ghn)
    out_data = (1.0 - z) * n + z * h.data

    def bwd(g):
        dn = g * (1.0 - z)
        dz = g * (h.data - n)
        dn_pre = dn * (1.0 - n * n)
        dr = dn_pre * ghn
        dgi = np.concatenate([dr * r * (1.0 - r), dz * z * (1.0 - z), dn_pre], axis=1)
        dgh = np.concatenate([dgi[:, :hdim], dgi[:, hdim : 2 * hdim], dn_pre * r], axis=1)
        if x.requires_grad:
            x.accumulate(dgi @ w_ih.data.T)
        if h.requires_grad:
            h.accumulate(dgh @ w_hh.data.T + g * z)
        if w_ih.requires_grad:
            w_ih.accumulate(x.data.T @ dgi)
        if w_hh.requires_grad:
            w_hh.accumulate(h.data.T @ dgh)
        if b_ih.requires_grad:
            b_ih.accumulate(dgi.sum(axis=0))
        if b_hh.requires_grad:
            b_hh.accumulate(dgh.sum(axis=0))

    return _node(out_data, (x, h, w_ih, w_hh, b_ih, b_hh), bwd)


def lstm_step(x: Tensor, h: Tensor, c: Tensor, w_ih: Tensor, w_hh: Tensor,
              b_ih: Tensor, b_hh: Tensor) -> Tensor:
    """One LSTM step; returns (B, 2H) = [new hidden | new cell].

    Gate layout [input | forget | cell | output]; x: (B, D), w_ih: (D, 4H).
    """
    hdim = h.data.shape[1]
    if w_ih.data.shape != (x.data.shape[1], 4 * hdim) or w_hh.data.shape != (hdim, 4 * hdim):
        raise ValueError("lstm_step weight shapes")
    gates = x.data @ w_ih.data + b_ih.data + h.data @ w_hh.data + b_hh.data
    i = _sigmoid(gates[:, :hdim])
    f = _sigmoid(gates[:, hdim : 2 * hdim])
    gcell = np.tanh(gates[:, 2 * hdim : 3 * hdim])
    o = _sigmoid(gates[:, 3 * hdim :])
    c_new = f * c.data + i * gcell
    tc = np.tanh(c_new)
    h_new = o * tc
    out_data = np.concatenate([h_new, c_new], axis=1)

    def bwd(g):
        gh = g[:, :hdim]
        gc = g[:, hdim:] + gh * o * (1.0 - tc * tc)
        do = gh * tc * o * (1.0 - o)
        di = gc * gcell * i * (1.0 - i)
        df = gc * c.data * f * (1.0 - f)
        dg = gc * i * (1.0 - gcell * gcell)
        dgates = np.concatenate([di, df, dg, do], axis=1)
        if x.requires_grad:
            x.accumulate(dgates @ w_ih.data.T)
        if h.requires_grad:
            h.accumulate(dgates @ w_hh.data.T)
        if c.requires_grad:
            c.accumulate(gc * f)
        if w_ih.requires_grad:
            w_ih.accumulate(x.data.T @ dgates)
        if w_hh.requires_grad:
            w_hh.accumulate(h.data.T @ dgates)
        if b_ih.requires_grad:
            b_ih.accumulate(dgates.sum(axis=0))
        if b_hh.requires_grad:
            b_hh.accumulate(dgates.sum(axis=0))

    return _node(out_data, (x, h, c, w_ih, w_hh, b_ih, b_hh), bwd)


# ---------------------------------------------------------------------------
# normalization / regularization
# ---------------------------------------------------------------------------

def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
              running_var: np.ndarray, channel_axis: int, train: bool,
              momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Normalize per channel over all remaining axes (batch, time, frequency).

    Training uses batch statistics and updates the running arrays in place;
    inference uses the frozen running statistics.
    """
    caxis = channel_axis % x.data.ndim
    axes = tuple(a for a in range(x.data.ndim) if a != caxis)
    bshape = tuple(-1 if a == caxis else 1 for a in range(x.data.ndim))
    gam = gamma.data.reshape(bshape)
    bet = beta.data.reshape(bshape)

    if train:
        mu = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.reshape(-1)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(-1)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        m = x.data.size // x.data.shape[caxis]

        def bwd(g):
            if gamma.requires_grad:
                gamma.accumulate((g * xhat).sum(axis=axes))
            if beta.requires_grad:
                beta.accumulate(g.sum(axis=axes))
            if x.requires_grad:
                dxhat = g * gam
                s1 = dxhat.sum(axis=axes, keepdims=True)
                s2 = (dxhat * xhat).sum(axis=axes, keepdims=True)
                x.accumulate(inv * (dxhat - s1 / m - xhat * s2 / m))

    else:
        inv = 1.0 / np.sqrt(running_var.reshape(bshape) + eps)
        xhat = (x.data - running_mean.reshape(bshape)) * inv

        def bwd(g):
            if gamma.requires_grad:
                gamma.accumulate((g * xhat).sum(axis=axes))
            if beta.requires_grad:
                beta.accumulate(g.sum(axis=axes))
            if x.requires_grad:
                x.accumulate(g * gam * inv)

    return _node(gam * xhat + bet, (x, gamma, beta), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity in inference mode."""
    if not train or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)

    def bwd(g):
        if x.requires_grad:
            x.accumulate(g * keep)

    return _node(x.data * keep, (x,), bwd)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Standard Adam with bias correction; skips (and reports) non-finite steps."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self) -> bool:
        """Apply one update from the accumulated grads. Returns False if the
        step was skipped because a gradient was non-finite."""
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        for p, g in zip(self.params, grads):
            if g.shape != p.data.shape:
                raise ValueError(f"grad shape {g.shape} vs param {p.data.shape}")
            if not np.all(np.isfinite(g)):
                warnings.warn("non-finite gradient; optimizer step skipped")
                return False
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True
