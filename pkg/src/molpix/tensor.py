"""Dense NHWC tensors with reverse-mode differentiation.

Every op takes and returns :class:`Tensor`. An op output records its parents
and a closure mapping the output gradient to parent gradients; ``backward``
walks the graph in reverse topological order. Arrays keep the dtype they were
created with, so the same code runs in float32 for training and float64 for
finite-difference checks.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import NumericalFault, ShapeMismatch

DEFAULT_DTYPE = np.float32
LOG_CLAMP = 1e-12

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Run ops without recording the graph (inference)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str = "", dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op})"

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not np.isfinite(g).all():
                raise NumericalFault(f"non-finite gradient at {node.op} node {node.name!r}")
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _result(data: np.ndarray, op: str, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericalFault(f"non-finite value produced by {op}")
    out = Tensor(data)
    out.op = op
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# -- shape helpers ---------------------------------------------------------------

def out_size(n: int, k: int, s: int, padding: str) -> int:
    if padding == "valid":
        return (n - k) // s + 1
    if padding == "same":
        return -(-n // s)
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def pad_amounts(n: int, k: int, s: int, padding: str) -> tuple[int, int]:
    """(low, high) zero padding; the odd pixel goes on the high side."""
    if padding == "valid":
        return 0, 0
    total = max((out_size(n, k, s, "same") - 1) * s + k - n, 0)
    return total // 2, total - total // 2


def _pair(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, int) else (int(v[0]), int(v[1]))


def _window_geometry(x: np.ndarray, kh: int, kw: int, sh: int, sw: int, padding: str):
    if x.ndim != 4:
        raise ShapeMismatch(f"expected NHWC input, got shape {x.shape}")
    _, h, w, _ = x.shape
    ho, wo = out_size(h, kh, sh, padding), out_size(w, kw, sw, padding)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"window {kh}x{kw} does not fit input {h}x{w} with {padding} padding")
    return ho, wo, pad_amounts(h, kh, sh, padding), pad_amounts(w, kw, sw, padding)


def _pad(x: np.ndarray, ph, pw, value=0.0) -> np.ndarray:
    if ph == (0, 0) and pw == (0, 0):
        return x
    return np.pad(x, ((0, 0), ph, pw, (0, 0)), constant_values=value)


# -- ops ------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    """Rows of flattened (kh, kw, c) windows, one row per output pixel."""
    n, c = xp.shape[0], xp.shape[3]
    if kh == 1 and kw == 1:
        cols = xp[:, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw, :]
        return np.ascontiguousarray(cols).reshape(n * ho * wo, c)
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (n, h', w', c, kh, kw)
    win = win[:, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, kh * kw * c)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None,
           stride=1, padding: str = "same") -> Tensor:
    """2-D cross-correlation on NHWC input with a (kh, kw, c_in, c_out) kernel."""
    xd, wd = x.data, kernel.data
    if wd.ndim != 4:
        raise ShapeMismatch(f"kernel must be (kh, kw, c_in, c_out), got {wd.shape}")
    kh, kw, cin, cout = wd.shape
    sh, sw = _pair(stride)
    ho, wo, ph, pw = _window_geometry(xd, kh, kw, sh, sw, padding)
    if xd.shape[3] != cin:
        raise ShapeMismatch(f"input has {xd.shape[3]} channels, kernel expects {cin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeMismatch(f"bias shape {bias.shape} != ({cout},)")
    n = xd.shape[0]
    xp = _pad(xd, ph, pw)
    cols = _im2col(xp, kh, kw, sh, sw, ho, wo)
    wmat = wd.reshape(kh * kw * cin, cout)
    out = cols @ wmat
    if bias is not None:
        out += bias.data
    out = out.reshape(n, ho, wo, cout)

    def backward(g):
        g2 = np.ascontiguousarray(g).reshape(n * ho * wo, cout)
        gw = (cols.T @ g2).reshape(wd.shape) if kernel.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = _conv_input_grad(g, wd, xp.shape, (sh, sw), (ho, wo))
            gx = gx[:, ph[0] : ph[0] + xd.shape[1], pw[0] : pw[0] + xd.shape[2], :]
        return gx, gw, gb

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _result(out, "conv2d", parents, backward)


def _conv_input_grad(g: np.ndarray, wd: np.ndarray, xp_shape, stride, out_hw) -> np.ndarray:
    """Gradient w.r.t. the padded input: full correlation of the stride-dilated
    output gradient with the spatially flipped, channel-transposed kernel."""
    kh, kw, cin, cout = wd.shape
    sh, sw = stride
    ho, wo = out_hw
    n, hp, wp, _ = xp_shape
    if kh == 1 and kw == 1 and sh == 1 and sw == 1:
        gx = g.reshape(-1, cout) @ wd.reshape(cin, cout).T
        return gx.reshape(n, ho, wo, cin)
    dh, dw = (ho - 1) * sh + 1, (wo - 1) * sw + 1
    gd = np.zeros((n, dh + 2 * (kh - 1), dw + 2 * (kw - 1), cout), dtype=g.dtype)
    gd[:, kh - 1 : kh - 1 + dh : sh, kw - 1 : kw - 1 + dw : sw, :] = g
    flipped = wd[::-1, ::-1].transpose(0, 1, 3, 2).reshape(kh * kw * cout, cin)
    ch, cw = dh + kh - 1, dw + kw - 1  # rows/cols of xp touched by some window
    covered = (_im2col(gd, kh, kw, 1, 1, ch, cw) @ flipped).reshape(n, ch, cw, cin)
    if (ch, cw) == (hp, wp):
        return covered
    gxp = np.zeros((n, hp, wp, cin), dtype=g.dtype)
    gxp[:, :ch, :cw, :] = covered
    return gxp


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)
    return _result(out, "relu", (x,), lambda g: (g * (out > 0),))


def max_pool(x: Tensor, window=3, stride=2, padding: str = "valid") -> Tensor:
    kh, kw = _pair(window)
    sh, sw = _pair(stride)
    xd = x.data
    ho, wo, ph, pw = _window_geometry(xd, kh, kw, sh, sw, padding)
    xp = _pad(xd, ph, pw, value=-np.inf)
    views = [xp[:, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw, :]
             for i in range(kh) for j in range(kw)]
    out = views[0].copy()
    for v in views[1:]:
        np.maximum(out, v, out=out)

    def backward(g):
        gxp = np.zeros(xp.shape, dtype=xd.dtype)
        pending = np.ones(out.shape, dtype=bool)  # first maximal element takes the gradient
        for idx, v in enumerate(views):
            hit = pending & (v == out)
            pending &= ~hit
            i, j = divmod(idx, kw)
            gxp[:, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw, :] += g * hit
        return (gxp[:, ph[0] : ph[0] + xd.shape[1], pw[0] : pw[0] + xd.shape[2], :],)

    return _result(out, "max_pool", (x,), backward)


def avg_pool(x: Tensor, window=2, stride=2, padding: str = "valid") -> Tensor:
    """Mean pooling; with 'same' padding the zero border is excluded from the count."""
    kh, kw = _pair(window)
    sh, sw = _pair(stride)
    xd = x.data
    ho, wo, ph, pw = _window_geometry(xd, kh, kw, sh, sw, padding)
    xp = _pad(xd, ph, pw)
    ones = _pad(np.ones((1,) + xd.shape[1:3] + (1,), dtype=xd.dtype), ph, pw)
    total = np.zeros((xd.shape[0], ho, wo, xd.shape[3]), dtype=xd.dtype)
    count = np.zeros((1, ho, wo, 1), dtype=xd.dtype)
    for i in range(kh):
        for j in range(kw):
            sl = (slice(None), slice(i, i + sh * (ho - 1) + 1, sh), slice(j, j + sw * (wo - 1) + 1, sw))
            total += xp[sl]
            count += ones[sl]
    out = total / count

    def backward(g):
        gs = g / count
        gxp = np.zeros(xp.shape, dtype=xd.dtype)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw, :] += gs
        return (gxp[:, ph[0] : ph[0] + xd.shape[1], pw[0] : pw[0] + xd.shape[2], :],)

    return _result(out, "avg_pool", (x,), backward)


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    if not xs:
        raise ShapeMismatch("concat_channels needs at least one tensor")
    lead = xs[0].shape[:-1]
    for t in xs[1:]:
        if t.shape[:-1] != lead:
            raise ShapeMismatch(f"cannot concatenate {t.shape} with {xs[0].shape}")
    if len(xs) == 1:
        return xs[0]
    splits = np.cumsum([t.shape[-1] for t in xs])[:-1]
    out = np.concatenate([t.data for t in xs], axis=-1)
    return _result(out, "concat", tuple(xs), lambda g: tuple(np.split(g, splits, axis=-1)))


def residual_add(x: Tensor, fx: Tensor, scale: float = 1.0) -> Tensor:
    """x + scale * fx."""
    if x.shape != fx.shape:
        raise ShapeMismatch(f"residual shapes differ: {x.shape} vs {fx.shape}")
    if scale == 1.0:
        return _result(x.data + fx.data, "residual_add", (x, fx), lambda g: (g, g))
    return _result(x.data + scale * fx.data, "residual_add", (x, fx), lambda g: (g, g * scale))


def global_avg_pool(x: Tensor) -> Tensor:
    if x.data.ndim != 4:
        raise ShapeMismatch(f"expected NHWC input, got shape {x.shape}")
    n, h, w, c = x.shape
    out = x.data.mean(axis=(1, 2))

    def backward(g):
        return (np.broadcast_to(g[:, None, None, :] / (h * w), (n, h, w, c)).astype(x.dtype),)

    return _result(out, "global_avg_pool", (x,), backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"dense: cannot multiply {x.shape} by {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeMismatch(f"dense bias shape {bias.shape} != ({weight.shape[1]},)")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        return (g @ weight.data.T, x.data.T @ g, g.sum(axis=0) if bias is not None else None)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out, "dense", parents, backward)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: Tensor, labels, weights=None) -> Tensor:
    """Mean of -log softmax(logits)[label], optionally sample-weighted."""
    ld = logits.data
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if ld.ndim != 2 or labels.shape[0] != ld.shape[0]:
        raise ShapeMismatch(f"logits {ld.shape} vs labels {labels.shape}")
    n = ld.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).reshape(n)
    w = (w / w.sum()).astype(ld.dtype)
    p = softmax(ld)
    picked = p[np.arange(n), labels]
    loss = np.asarray(-(w * np.log(np.maximum(picked, LOG_CLAMP))).sum(), dtype=ld.dtype)

    def backward(g):
        d = p.copy()
        d[np.arange(n), labels] -= 1
        return (d * (w[:, None] * g),)

    return _result(loss, "softmax_xent", (logits,), backward)


def mse_loss(pred: Tensor, target, weights=None) -> Tensor:
    t = np.asarray(target, dtype=pred.dtype)
    t = np.broadcast_to(t if t.size != pred.data.size else t.reshape(pred.shape), pred.shape)
    diff = pred.data - t
    if weights is None:
        w = np.full(pred.shape, 1.0 / diff.size, dtype=pred.dtype)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(pred.shape[0], *([1] * (pred.data.ndim - 1)))
        w = np.broadcast_to(w / (w.sum() * math.prod(pred.shape[1:])), pred.shape).astype(pred.dtype)
    loss = np.asarray((w * diff * diff).sum(), dtype=pred.dtype)
    return _result(loss, "mse", (pred,), lambda g: (2 * w * diff * g,))
