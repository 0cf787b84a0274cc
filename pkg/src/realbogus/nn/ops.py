"""Differentiable primitives for the CNN engine.

All operations work on numpy arrays in channels-last layout, float64 by
default (float32 inputs are kept in float32 for throughput). Spatial ops
accept a single image (H, W, C) or a batch (N, H, W, C); dense ops
accept (D,) or (N, D). Convolution is "valid" (no padding), stride 1,
cross-correlation convention. Pooling is 2x2 stride 2 with floor
semantics (trailing odd row/column dropped).
"""

import numpy as np

from realbogus.errors import ConfigurationError, DimensionError


def _as_float(x):
    x = np.asarray(x)
    return x if x.dtype in (np.float32, np.float64) else x.astype(np.float64)


def _batched(x, ndim):
    """Return (array with batch axis, had_batch flag)."""
    x = _as_float(x)
    if x.ndim == ndim - 1:
        return x[np.newaxis], False
    if x.ndim == ndim:
        return x, True
    raise DimensionError(f"expected {ndim - 1}D or {ndim}D input, got shape {x.shape}")


def _debatch(x, had_batch):
    return x if had_batch else x[0]


def conv2d_forward(x, weights, bias):
    """Valid cross-correlation: out[y,x,f] = b[f] + sum_uvc in[y+u,x+v,c] w[u,v,c,f]."""
    x, had_batch = _batched(x, 4)
    weights = _as_float(weights)
    bias = _as_float(bias)
    n, h, w, c = x.shape
    kh, kw, cw, f = weights.shape
    if c != cw:
        raise DimensionError(f"input channels {c} != kernel channels {cw}")
    if kh > h or kw > w:
        raise DimensionError(f"kernel {kh}x{kw} larger than input {h}x{w}")
    if bias.shape != (f,):
        raise DimensionError(f"bias shape {bias.shape} != ({f},)")
    ho, wo = h - kh + 1, w - kw + 1
    out = np.zeros((n, ho, wo, f), dtype=x.dtype)
    # chunk the batch so the kernel-offset loop stays inside the CPU cache
    step = _chunk(ho * wo * (c + f) * x.dtype.itemsize)
    for s in range(0, n, step):
        xs, os_ = x[s:s + step], out[s:s + step]
        flat = os_.reshape(-1, f)
        for u in range(kh):
            for v in range(kw):
                window = np.ascontiguousarray(xs[:, u:u + ho, v:v + wo, :])
                flat += window.reshape(-1, c) @ weights[u, v]
    out += bias
    return _debatch(out, had_batch)


def _chunk(bytes_per_example, budget=4 << 20):
    return max(1, budget // max(1, bytes_per_example))


def conv2d_backward(x, weights, upstream, need_input_grad=True):
    """Gradients of conv2d_forward w.r.t. (input, weights, bias).

    With need_input_grad=False the input gradient is skipped (returned as
    None), which saves the most expensive half of the backward pass for
    the first layer of a network during training.
    """
    x, had_batch = _batched(x, 4)
    upstream, ub = _batched(upstream, 4)
    weights = _as_float(weights)
    n, h, w, c = x.shape
    kh, kw, _, f = weights.shape
    ho, wo = h - kh + 1, w - kw + 1
    if upstream.shape != (n, ho, wo, f):
        raise DimensionError(
            f"upstream shape {upstream.shape} != forward output {(n, ho, wo, f)}")
    grad_x = np.zeros_like(x) if need_input_grad else None
    grad_w = np.zeros((kh, kw, c, f), dtype=np.float64)
    step = _chunk(ho * wo * (2 * c + f) * x.dtype.itemsize)
    for s in range(0, n, step):
        xs = x[s:s + step]
        ns = xs.shape[0]
        up_flat = np.ascontiguousarray(upstream[s:s + step]).reshape(-1, f)
        for u in range(kh):
            for v in range(kw):
                window = np.ascontiguousarray(xs[:, u:u + ho, v:v + wo, :])
                grad_w[u, v] += window.reshape(-1, c).T @ up_flat
                if need_input_grad:
                    grad_x[s:s + step, u:u + ho, v:v + wo, :] += (
                        (up_flat @ weights[u, v].T).reshape(ns, ho, wo, c))
    grad_b = upstream.sum(axis=(0, 1, 2))
    if not need_input_grad:
        return None, grad_w.astype(x.dtype), grad_b
    return _debatch(grad_x, had_batch), grad_w.astype(x.dtype), grad_b


def maxpool_forward(x):
    """2x2 stride-2 max pooling; returns (pooled, argmax indices for backward)."""
    x, had_batch = _batched(x, 4)
    n, h, w, c = x.shape
    if h < 2 or w < 2:
        raise DimensionError(f"input {h}x{w} too small for 2x2 pooling")
    ho, wo = h // 2, w // 2
    # window members in row-major (u, v) order; strict > keeps the first
    # maximum on ties
    out = x[:, :2 * ho:2, :2 * wo:2, :].copy()
    idx = np.zeros((n, ho, wo, c), dtype=np.uint8)
    for k, (u, v) in enumerate(((0, 1), (1, 0), (1, 1)), start=1):
        cand = x[:, u:2 * ho:2, v:2 * wo:2, :]
        better = cand > out
        np.copyto(out, cand, where=better)
        idx[better] = k
    return _debatch(out, had_batch), (x.shape, idx, had_batch)


def maxpool_backward(indices, upstream):
    """Route upstream gradient to the recorded argmax positions."""
    in_shape, idx, had_batch = indices
    upstream, ub = _batched(upstream, 4)
    n, h, w, c = in_shape
    ho, wo = h // 2, w // 2
    if upstream.shape != (n, ho, wo, c):
        raise ConfigurationError(
            f"upstream shape {upstream.shape} does not match pooled shape "
            f"{(n, ho, wo, c)}; stale pooling indices?")
    grad = np.zeros(in_shape, dtype=upstream.dtype)
    for k, (u, v) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        view = grad[:, u:2 * ho:2, v:2 * wo:2, :]
        np.copyto(view, upstream, where=(idx == k))
    return _debatch(grad, had_batch)


def dropout(x, rate, train, rng=None):
    """Inverted dropout. Eval mode is the identity; returns (output, mask)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    x = _as_float(x)
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigurationError("train-mode dropout requires an rng")
    mask = ((rng.random(x.shape) >= rate) / (1.0 - rate)).astype(x.dtype)
    return x * mask, mask


def dropout_backward(mask, upstream):
    upstream = _as_float(upstream)
    return upstream if mask is None else upstream * mask


def dense_forward(x, weights, bias):
    """out = x @ weights + bias for x of shape (D,) or (N, D)."""
    x, had_batch = _batched(x, 2)
    weights = _as_float(weights)
    bias = _as_float(bias)
    if x.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"input width {x.shape[1]} != weight rows {weights.shape[0]}")
    if bias.shape != (weights.shape[1],):
        raise DimensionError(f"bias shape {bias.shape} != ({weights.shape[1]},)")
    return _debatch(x @ weights + bias, had_batch)


def dense_backward(x, weights, upstream):
    x, had_batch = _batched(x, 2)
    upstream, _ = _batched(upstream, 2)
    weights = _as_float(weights)
    if upstream.shape != (x.shape[0], weights.shape[1]):
        raise DimensionError(
            f"upstream shape {upstream.shape} != {(x.shape[0], weights.shape[1])}")
    grad_x = upstream @ weights.T
    grad_w = x.T @ upstream
    grad_b = upstream.sum(axis=0)
    return _debatch(grad_x, had_batch), grad_w, grad_b


def relu(x):
    return np.maximum(_as_float(x), 0.0)


def relu_backward(x, upstream):
    return _as_float(upstream) * (np.asarray(x) > 0)


def softmax(logits):
    """Max-shifted softmax along the last axis."""
    logits = _as_float(logits)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


LOSS_CLAMP = 1e-12


def sparse_categorical_crossentropy(probs, labels):
    """Mean -log p[label]; probs (N, K) or (K,), labels int or (N,).

    Returns (loss, grad w.r.t. logits) with the fused softmax+CE gradient
    probs - onehot, averaged over the batch.
    """
    probs, had_batch = _batched(probs, 2)
    labels = np.atleast_1d(np.asarray(labels))
    n, k = probs.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ConfigurationError(f"labels outside [0, {k})")
    picked = np.clip(probs[np.arange(n), labels], LOSS_CLAMP, None)
    loss = float(-np.log(picked).mean())
    grad_logits = probs.copy()
    grad_logits[np.arange(n), labels] -= 1.0
    grad_logits /= n
    return loss, _debatch(grad_logits, had_batch)


def sgd_step(params, grads, lr):
    """Plain SGD, in place: p <- p - lr * g."""
    if len(params) != len(grads):
        raise DimensionError("params / grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"param shape {p.shape} != grad shape {g.shape}")
        p -= lr * g
    return params
