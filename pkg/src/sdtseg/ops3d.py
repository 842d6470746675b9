"""Dense 3D layer primitives with explicit forward and backward passes.

Tensors are channel-first float64 arrays shaped (C, D, H, W). Convolutions
are 3x3x3 stride-1 with same padding (im2col + matmul); pooling and the
transposed convolution use kernel 2 stride 2, so spatial dims halve and
double exactly. Each forward returns the cache its backward needs.
"""

from __future__ import annotations

import numpy as np

_OFFSETS = [(dz, dy, dx) for dz in range(3) for dy in range(3) for dx in range(3)]


def _im2col(x: np.ndarray) -> np.ndarray:
    """(C, D, H, W) -> (C*27, D*H*W) patch matrix for a same-padded 3x3x3 conv."""
    c, d, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))
    views = [xp[:, dz:dz + d, dy:dy + h, dx:dx + w] for dz, dy, dx in _OFFSETS]
    return np.stack(views, axis=1).reshape(c * 27, d * h * w)


def conv3x3_forward(x, weight, bias):
    """weight (O, C, 3, 3, 3), bias (O,). Returns (out, cache)."""
    o = weight.shape[0]
    cols = _im2col(x)
    out = weight.reshape(o, -1) @ cols + bias[:, None]
    return out.reshape(o, *x.shape[1:]), (cols, x.shape, weight)


def conv3x3_backward(dout, cache):
    cols, x_shape, weight = cache
    o = dout.shape[0]
    dflat = dout.reshape(o, -1)
    dw = (dflat @ cols.T).reshape(weight.shape)
    db = dflat.sum(axis=1)
    # grad wrt input: same-pad conv with spatially flipped, channel-swapped kernels
    w_flip = weight[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4)
    dcols = _im2col(dout)
    dx = (np.ascontiguousarray(w_flip).reshape(weight.shape[1], -1) @ dcols)
    return dx.reshape(weight.shape[1], *x_shape[1:]), dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), (x > 0.0)


def relu_backward(dout, cache):
    return dout * cache


def maxpool2_forward(x):
    """2x2x2 max pooling, stride 2; ties go to the first position (deterministic)."""
    c, d, h, w = x.shape
    r = x.reshape(c, d // 2, 2, h // 2, 2, w // 2, 2)
    r = r.transpose(0, 1, 3, 5, 2, 4, 6).reshape(c, d // 2, h // 2, w // 2, 8)
    idx = r.argmax(axis=-1)
    out = np.take_along_axis(r, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(dout, cache):
    idx, x_shape = cache
    c, d, h, w = x_shape
    scattered = np.zeros((c, d // 2, h // 2, w // 2, 8))
    np.put_along_axis(scattered, idx[..., None], dout[..., None], axis=-1)
    scattered = scattered.reshape(c, d // 2, h // 2, w // 2, 2, 2, 2)
    return scattered.transpose(0, 1, 4, 2, 5, 3, 6).reshape(c, d, h, w)


def convtranspose2_forward(x, weight, bias):
    """weight (C, O, 2, 2, 2), bias (O,). Doubles every spatial dim."""
    c, d, h, w = x.shape
    o = weight.shape[1]
    out = np.einsum("cdhw,coijk->odihjwk", x, weight, optimize=True)
    out = out.reshape(o, 2 * d, 2 * h, 2 * w) + bias[:, None, None, None]
    return out, (x, weight)


def convtranspose2_backward(dout, cache):
    x, weight = cache
    c, d, h, w = x.shape
    o = weight.shape[1]
    d6 = dout.reshape(o, d, 2, h, 2, w, 2).transpose(0, 1, 3, 5, 2, 4, 6)
    dx = np.einsum("odhwijk,coijk->cdhw", d6, weight, optimize=True)
    dw = np.einsum("cdhw,odhwijk->coijk", x, d6, optimize=True)
    db = dout.sum(axis=(1, 2, 3))
    return dx, dw, db


def conv1x1_forward(x, weight, bias):
    """weight (O, C), bias (O,): per-voxel linear map across channels."""
    out = np.einsum("oc,cdhw->odhw", weight, x) + bias[:, None, None, None]
    return out, x


def conv1x1_backward(dout, cache, weight):
    x = cache
    dw = np.einsum("odhw,cdhw->oc", dout, x)
    db = dout.sum(axis=(1, 2, 3))
    dx = np.einsum("oc,odhw->cdhw", weight, dout)
    return dx, dw, db
