"""STAPLE: EM fusion of binary segmentations from multiple raters.

Estimates a per-voxel posterior probability of the true label together
with each rater's sensitivity p and specificity q. Products over raters
run in log space, and p, q are clamped into [1e-7, 1 - 1e-7] so a rater
that exactly matches the running consensus cannot push the model onto the
boundary of the parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateInputError
from .volume import Mask, Volume, VolumeKind, require_same_geometry

_CLAMP = 1e-7


@dataclass(frozen=True)
class RaterStack:
    masks: tuple[Mask, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        masks = tuple(self.masks)
        if len(masks) < 2:
            raise DegenerateInputError("need at least two raters to fuse")
        for m in masks[1:]:
            require_same_geometry(masks[0], m)
        names = tuple(self.names) or tuple(f"rater{i}" for i in range(len(masks)))
        if len(names) != len(masks):
            raise ConfigError("names must match the number of masks")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "names", names)

    def matrix(self) -> np.ndarray:
        """Decisions as (n_raters, n_voxels) float array."""
        return np.stack([m.data.astype(np.float64) for m in self.masks])


@dataclass(frozen=True)
class StapleResult:
    consensus_prob: Volume
    consensus_mask: Mask
    sensitivities: np.ndarray
    specificities: np.ndarray
    iterations: int
    converged: bool
    log_likelihood: np.ndarray = field(default_factory=lambda: np.empty(0))


def staple_fuse(stack: RaterStack, prior=None, max_iters: int = 100,
                tol: float = 1e-6) -> StapleResult:
    """Run EM to convergence (max per-rater parameter change < tol).

    prior may be a scalar in (0, 1), a probability Volume, or None for the
    default: the mean foreground fraction across raters.
    """
    if max_iters < 1:
        raise ConfigError(f"max_iters must be >= 1, got {max_iters}")
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    d = stack.matrix()
    n_raters, n_vox = d.shape

    if prior is None:
        pi = np.full(n_vox, float(d.mean()))
    elif isinstance(prior, Volume):
        require_same_geometry(prior, stack.masks[0])
        pi = np.asarray(prior.data, dtype=np.float64).copy()
    else:
        pi = np.full(n_vox, float(prior))
    if pi.min() <= 0.0 or pi.max() >= 1.0:
        raise ConfigError("prior must lie strictly inside (0, 1)")

    log_pi = np.log(pi)
    log_1mpi = np.log1p(-pi)

    p = np.full(n_raters, 0.99)
    q = np.full(n_raters, 0.99)
    ll_trace = []
    converged = False
    iterations = 0
    w = np.empty(n_vox)

    for iterations in range(1, max_iters + 1):
        # E-step: posterior weight of the foreground hypothesis per voxel
        log_a = log_pi + d.T @ np.log(p) + (1.0 - d).T @ np.log1p(-p)
        log_b = log_1mpi + d.T @ np.log1p(-q) + (1.0 - d).T @ np.log(q)
        hi = np.maximum(log_a, log_b)
        ea = np.exp(log_a - hi)
        eb = np.exp(log_b - hi)
        w = ea / (ea + eb)
        ll_trace.append(float((hi + np.log(ea + eb)).sum()))

        # M-step
        wsum = w.sum()
        csum = n_vox - wsum
        p_new = np.clip((d @ w) / wsum, _CLAMP, 1.0 - _CLAMP)
        q_new = np.clip(((1.0 - d) @ (1.0 - w)) / csum, _CLAMP, 1.0 - _CLAMP)

        delta = max(np.abs(p_new - p).max(), np.abs(q_new - q).max())
        p, q = p_new, q_new
        if delta < tol:
            converged = True
            break

    prob = np.clip(w, 0.0, 1.0)
    consensus_prob = Volume(prob, stack.masks[0].shape, stack.masks[0].spacing,
                            VolumeKind.PROBABILITY, stack.masks[0].affine)
    consensus_mask = Mask((prob >= 0.5).astype(np.uint8), stack.masks[0].shape,
                          stack.masks[0].spacing, stack.masks[0].affine)
    return StapleResult(
        consensus_prob=consensus_prob,
        consensus_mask=consensus_mask,
        sensitivities=p.copy(),
        specificities=q.copy(),
        iterations=iterations,
        converged=converged,
        log_likelihood=np.asarray(ll_trace),
    )
