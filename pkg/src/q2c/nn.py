"""Minimal numpy network layers with hand-written backward passes.

Arrays are batched: images are (B, H, W) for single-channel layers and
(B, C, H, W) for the multi-channel convolution.  All convolutions use stride 1
and no padding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BCE_CLAMP = 1e-7


class ShapeError(ValueError):
    pass


def _windows(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    if kh > x.shape[-2] or kw > x.shape[-1]:
        raise ShapeError(f"filter {kh}x{kw} does not fit input {x.shape[-2:]}")
    return sliding_window_view(x, (kh, kw), axis=(-2, -1))


# --- normalized convolution ---------------------------------------------------

def normalized_conv_forward(x: np.ndarray, w: np.ndarray, bias: float):
    """out = <p / |p|, w> + bias for every patch p; all-zero patches give ``bias``.

    Accepts a single image (H, W) or a batch (..., H, W).  Returns ``(out, cache)``.
    """
    kh, kw = w.shape
    win = _windows(np.asarray(x, dtype=float), kh, kw)
    norms = np.sqrt(np.einsum("...ij,...ij->...", win, win))
    safe = np.where(norms > 0, norms, 1.0)
    dots = np.einsum("...ij,ij->...", win, w)
    out = np.where(norms > 0, dots / safe, 0.0) + bias
    return out, (x, w, win, norms)


def normalized_conv_backward(dout: np.ndarray, cache):
    """Gradients (dx, dw, dbias); d(p/|p|)/dp = (I - p^ p^T) / |p|, zero patches get 0."""
    x, w, win, norms = cache
    kh, kw = w.shape
    nz = norms > 0
    safe = np.where(nz, norms, 1.0)
    unit = win / safe[..., None, None]
    g = np.where(nz, dout, 0.0)
    dw = np.tensordot(g, unit, axes=g.ndim)
    proj = np.einsum("...ij,ij->...", unit, w)
    dpatch = (g / safe)[..., None, None] * (w - proj[..., None, None] * unit)
    dx = np.zeros_like(np.asarray(x, dtype=float))
    ho, wo = dout.shape[-2:]
    for i in range(kh):
        for j in range(kw):
            dx[..., i:i + ho, j:j + wo] += dpatch[..., i, j]
    return dx, dw, float(np.sum(dout))


# --- standard multi-channel convolution ----------------------------------------

def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (B, C, H, W), w (F, C, kh, kw), b (F,) -> (B, F, H-kh+1, W-kw+1)."""
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels, filter expects {w.shape[1]}")
    win = _windows(x, *w.shape[2:])  # (B, C, Ho, Wo, kh, kw)
    out = np.einsum("bchwij,fcij->bfhw", win, w) + b[None, :, None, None]
    return out, (x, w, win)


def conv_backward(dout: np.ndarray, cache):
    x, w, win = cache
    _, _, kh, kw = w.shape
    dw = np.einsum("bfhw,bchwij->fcij", dout, win)
    db = dout.sum(axis=(0, 2, 3))
    dx = np.zeros_like(x)
    ho, wo = dout.shape[-2:]
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + ho, j:j + wo] += np.einsum("bfhw,fc->bchw", dout, w[:, :, i, j])
    return dx, dw, db


# --- pooling, dense, activations -----------------------------------------------

def maxpool_forward(x: np.ndarray, size: int = 2):
    """Non-overlapping max pool over the last two axes; odd remainders are dropped."""
    h2, w2 = x.shape[-2] // size, x.shape[-1] // size
    if h2 == 0 or w2 == 0:
        raise ShapeError(f"input {x.shape[-2:]} smaller than pool {size}")
    crop = x[..., : h2 * size, : w2 * size]
    blocks = crop.reshape(*x.shape[:-2], h2, size, w2, size).swapaxes(-3, -2)
    flat = blocks.reshape(*blocks.shape[:-2], size * size)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, size)


def maxpool_backward(dout: np.ndarray, cache) -> np.ndarray:
    shape, arg, size = cache
    h2, w2 = dout.shape[-2:]
    flat = np.zeros((*dout.shape, size * size))
    np.put_along_axis(flat, arg[..., None], dout[..., None], axis=-1)
    blocks = flat.reshape(*dout.shape, size, size).swapaxes(-3, -2)
    dx = np.zeros(shape)
    dx[..., : h2 * size, : w2 * size] = blocks.reshape(*dout.shape[:-2], h2 * size, w2 * size)
    return dx


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """y = x W^T + b with x (B, D), W (O, D)."""
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"dense layer expects {w.shape[1]} inputs, got {x.shape[-1]}")
    return x @ w.T + b, (x, w)


def dense_backward(dout: np.ndarray, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, x):
    return dout * (x > 0)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


# --- loss ----------------------------------------------------------------------

def bce_loss(p, y):
    """Elementwise binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(p, BCE_CLAMP, 1 - BCE_CLAMP)
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))


def bce_grad(p, y):
    """dL/dp at the clamped prediction."""
    p = np.clip(p, BCE_CLAMP, 1 - BCE_CLAMP)
    return (p - y) / (p * (1 - p))


# --- Adam ----------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], **hyper) -> AdamState:
        return cls({k: np.zeros_like(p, dtype=float) for k, p in params.items()},
                   {k: np.zeros_like(p, dtype=float) for k, p in params.items()}, **hyper)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """One bias-corrected Adam update. Returns new ``(params, state)``; inputs are not mutated."""
    t = state.t + 1
    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != np.shape(p):
            raise ShapeError(f"gradient for {k} has shape {g.shape}, parameter {np.shape(p)}")
        m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
        v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        m_hat = m[k] / (1 - state.beta1**t)
        v_hat = v[k] / (1 - state.beta2**t)
        new_params[k] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new_params, new_state
