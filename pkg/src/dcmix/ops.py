"""Differentiable primitives: conv, dense, activations, pooling, losses,
channel blending, and the small elementwise/shape ops the rest of the stack
composes from.

All image tensors are NHWC. Broadcasting is limited to the bias-add inside
conv2d/dense; everything else requires exact shapes.
"""

from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Tensor, check_finite, record, result_dtype


# ---------------------------------------------------------------------------
# elementwise / shape ops

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data + b.data)
    return record("add", (a, b), out, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data - b.data)
    return record("sub", (a, b), out, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data * b.data)
    return record("mul", (a, b), out, lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, k: float) -> Tensor:
    out = Tensor(a.data * k)
    return record("scale", (a,), out, lambda g: (g * k,))


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.sum(), dtype=a.dtype))
    return record("sum_all", (a,), out, lambda g: (np.broadcast_to(g, a.shape),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    return record("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def channel_slice(a: Tensor, index: int) -> Tensor:
    """Select a single channel of an NHWC tensor, keeping the channel axis."""
    if not 0 <= index < a.shape[-1]:
        raise DimensionError(f"channel_slice: index {index} out of range for {a.shape[-1]} channels")
    out = Tensor(np.ascontiguousarray(a.data[..., index : index + 1]))

    def bwd(g):
        ga = np.zeros(a.shape, dtype=g.dtype)
        ga[..., index : index + 1] = g
        return (ga,)

    return record("channel_slice", (a,), out, bwd)


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Concatenate [n,1] column tensors into [n,k]."""
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))

    def bwd(g):
        return tuple(g[:, i : i + 1] for i in range(len(parts)))

    return record("concat_cols", tuple(parts), out, bwd)


# ---------------------------------------------------------------------------
# activations

def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    # subgradient 0 at the kink
    return record("relu", (a,), out, lambda g: (g * (a.data > 0),))


def hardswish(a: Tensor) -> Tensor:
    x = a.data
    out = Tensor(x * np.clip(x + 3.0, 0.0, 6.0) / 6.0)

    def bwd(g):
        d = np.where(x <= -3.0, 0.0, np.where(x >= 3.0, 1.0, (2.0 * x + 3.0) / 6.0))
        return (g * d.astype(x.dtype),)

    return record("hardswish", (a,), out, bwd)


_ACTIVATIONS = {"relu": relu, "hardswish": hardswish}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind {kind!r}; expected one of {sorted(_ACTIVATIONS)}")
    return fn(a)


# ---------------------------------------------------------------------------
# convolution

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """[n,H,W,cin] (already padded) -> [n,oh,ow,kh,kw,cin] patch view."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    # win: [n, H-kh+1, W-kw+1, cin, kh, kw]
    win = win[:, ::stride, ::stride][:, :oh, :ow]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """NHWC cross-correlation: x[n,h,w,cin] * kernel[kh,kw,cin,cout] + bias[cout]."""
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise DimensionError(
            f"conv2d: expected 4-d input and kernel, got input {x.shape}, kernel {kernel.shape}"
        )
    n, h, w, cin = x.shape
    kh, kw, kcin, cout = kernel.shape
    if kcin != cin:
        raise DimensionError(
            f"conv2d: input channels (input axis 3 = {cin}) != kernel input channels (kernel axis 2 = {kcin})"
        )
    if bias.shape != (cout,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} != ({cout},)")
    if stride < 1:
        raise ValueError(f"conv2d: stride must be >= 1, got {stride}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise DimensionError(
            f"conv2d: kernel {kh}x{kw} larger than padded spatial dims "
            f"{h + 2 * padding}x{w + 2 * padding} (axes 1,2)"
        )
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1

    dtype = result_dtype(x, kernel, bias)
    xp = x.data.astype(dtype, copy=False)
    if padding:
        xp = np.pad(xp, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols = _im2col(xp, kh, kw, stride, oh, ow).reshape(n * oh * ow, kh * kw * cin)
    w2 = kernel.data.reshape(kh * kw * cin, cout).astype(dtype, copy=False)
    out_mat = cols @ w2 + bias.data.astype(dtype, copy=False)
    out = Tensor(out_mat.reshape(n, oh, ow, cout))

    def bwd(g):
        g2 = g.reshape(n * oh * ow, cout)
        gk = (cols.T @ g2).reshape(kernel.shape) if kernel.requires_grad else None
        gb = g2.sum(axis=0) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            dcols = (g2 @ w2.T).reshape(n, oh, ow, kh, kw, cin)
            ph, pw = h + 2 * padding, w + 2 * padding
            gxp = np.zeros((n, ph, pw, cin), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :] += dcols[:, :, :, i, j, :]
            gx = gxp[:, padding : padding + h, padding : padding + w, :] if padding else gxp
        return (gx, gk, gb)

    return record("conv2d", (x, kernel, bias), out, bwd)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out = x @ weight + bias for x[n,m], weight[m,k], bias[k]."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise DimensionError(f"dense: expected 2-d input and weight, got {x.shape}, {weight.shape}")
    n, m = x.shape
    wm, k = weight.shape
    if m != wm:
        raise DimensionError(f"dense: inner dims disagree (input axis 1 = {m}, weight axis 0 = {wm})")
    if bias.shape != (k,):
        raise DimensionError(f"dense: bias shape {bias.shape} != ({k},)")
    out = Tensor(x.data @ weight.data + bias.data)

    def bwd(g):
        gx = g @ weight.data.T if x.requires_grad else None
        gw = x.data.T @ g if weight.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return (gx, gw, gb)

    return record("dense", (x, weight, bias), out, bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean of an NHWC tensor -> [n,c]."""
    if x.data.ndim != 4:
        raise DimensionError(f"global_avg_pool: expected 4-d NHWC input, got {x.shape}")
    n, h, w, c = x.shape
    out = Tensor(x.data.mean(axis=(1, 2)))

    def bwd(g):
        return (np.broadcast_to(g[:, None, None, :] / (h * w), x.shape).astype(g.dtype),)

    return record("global_avg_pool", (x,), out, bwd)


# ---------------------------------------------------------------------------
# softmax / loss

def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of [n,k]."""
    p = _softmax(x.data)
    out = Tensor(p)

    def bwd(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - dot),)

    return record("softmax_rows", (x,), out, bwd)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], max-stabilized."""
    if logits.data.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy: expected 2-d logits, got {logits.shape}")
    n, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise DimensionError(f"softmax_cross_entropy: labels shape {labels.shape} != ({n},)")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ValueError(f"label {bad} out of range [0, {k})")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    logp = z - logsumexp
    loss = -logp[np.arange(n), labels].mean()
    out = Tensor(np.asarray(loss, dtype=logits.dtype))

    def bwd(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        return (g * p / n,)

    return record("softmax_cross_entropy", (logits,), out, bwd)


# ---------------------------------------------------------------------------
# channel blending

def channel_blend(x: Tensor, alphas: Tensor) -> Tensor:
    """Weighted channel sum: out[n,h,w,0] = sum_i alphas[i] * x[n,h,w,i]."""
    if x.data.ndim != 4:
        raise DimensionError(f"channel_blend: expected 4-d NHWC input, got {x.shape}")
    c = x.shape[3]
    if alphas.shape != (c,):
        raise DimensionError(
            f"channel_blend: channel count mismatch (input axis 3 = {c}, weights = {alphas.shape})"
        )
    out = Tensor((x.data @ alphas.data)[..., None])

    def bwd(g):
        g0 = g[..., 0]
        gx = g0[..., None] * alphas.data if x.requires_grad else None
        ga = np.einsum("nhw,nhwc->c", g0, x.data) if alphas.requires_grad else None
        return (gx, ga)

    return record("channel_blend", (x, alphas), out, bwd)


def sample_blend(x: Tensor, weights: Tensor) -> Tensor:
    """Per-sample weighted channel sum: out[n,h,w,0] = sum_i weights[n,i] * x[n,h,w,i]."""
    if x.data.ndim != 4:
        raise DimensionError(f"sample_blend: expected 4-d NHWC input, got {x.shape}")
    n, _, _, c = x.shape
    if weights.shape != (n, c):
        raise DimensionError(
            f"sample_blend: weights shape {weights.shape} != ({n}, {c}) (input channels = axis 3)"
        )
    out = Tensor(np.einsum("nhwc,nc->nhw", x.data, weights.data)[..., None])

    def bwd(g):
        g0 = g[..., 0]
        gx = g0[..., None] * weights.data[:, None, None, :] if x.requires_grad else None
        gw = np.einsum("nhw,nhwc->nc", g0, x.data) if weights.requires_grad else None
        return (gx, gw)

    return record("sample_blend", (x, weights), out, bwd)
