"""Action and keypoint distributions.

Two families live here:

* a mixture of discretized logistic distributions over integer action bins,
  used for behavior cloning and inverse-dynamics targets, and
* a 2D Gaussian over pixel coordinates, used for future-gripper-point
  prediction.

All functions are plain tensor math (differentiable, dtype-polymorphic) and
safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

N_BINS = 256
LOG_SCALE_FLOOR = -7.0
PROB_FLOOR = 1e-12
COV_FLOOR = 1e-4


@dataclass
class MixtureParams:
    """Per-dimension mixture of discretized logistics over action bins.

    All tensors share the trailing shape ``[..., A, k]`` where ``A`` is the
    number of action dimensions and ``k`` the number of mixture components.
    ``weights`` are unnormalized logits, ``means`` and ``log_scales`` are in
    bin-index units.
    """

    weights: Tensor
    means: Tensor
    log_scales: Tensor
    n_bins: int = N_BINS

    def __post_init__(self):
        if self.weights.shape != self.means.shape or self.weights.shape != self.log_scales.shape:
            raise ValueError(
                f"mismatched mixture shapes: {self.weights.shape} / "
                f"{self.means.shape} / {self.log_scales.shape}"
            )
        if self.weights.shape[-1] < 1:
            raise ValueError("need at least one mixture component")
        self.log_scales = self.log_scales.clamp(min=LOG_SCALE_FLOOR)

    @property
    def k(self) -> int:
        return self.weights.shape[-1]

    def log_weights(self) -> Tensor:
        return torch.log_softmax(self.weights, dim=-1)


@dataclass
class Keypoint2DParams:
    """2D Gaussian over pixel coordinates: ``mean [..., 2]``, ``cov [..., 2, 2]``."""

    mean: Tensor
    covariance: Tensor

    def __post_init__(self):
        if self.mean.shape[-1] != 2 or self.covariance.shape[-2:] != (2, 2):
            raise ValueError("keypoint params must be 2D")


def logistic_cdf(x: Tensor) -> Tensor:
    """CDF of the standard logistic, 1 / (1 + exp(-x)). Saturates at extremes."""
    return torch.sigmoid(x)


def bin_prob(a: Tensor, mu: Tensor, sigma: Tensor, n_bins: int = N_BINS) -> Tensor:
    """Probability mass a discretized logistic assigns to integer bin ``a``.

    The mass is the difference of logistic CDFs at the bin edges a +- 0.5,
    except that bin 0 absorbs everything below 0.5 and bin ``n_bins - 1``
    everything above ``n_bins - 1.5``, so the pmf sums to one exactly.
    """
    if not torch.all(sigma > 0):
        raise ValueError("sigma must be positive")
    a = a.to(mu.dtype) if isinstance(a, Tensor) else mu.new_tensor(float(a))
    upper = logistic_cdf((a + 0.5 - mu) / sigma)
    lower = logistic_cdf((a - 0.5 - mu) / sigma)
    one = torch.ones_like(upper)
    zero = torch.zeros_like(lower)
    upper = torch.where(a >= n_bins - 1, one, upper)
    lower = torch.where(a <= 0, zero, lower)
    return upper - lower


def mixture_nll(params: MixtureParams, actions: Tensor) -> Tensor:
    """Negative log-likelihood of integer actions under the bin mixture.

    ``actions`` has shape ``[..., A]`` with entries in ``[0, n_bins)``; the
    result has shape ``[...]`` (summed over action dimensions). A probability
    floor keeps the value finite when every component assigns ~zero mass.
    """
    a = actions.unsqueeze(-1).to(params.means.dtype)
    comp = bin_prob(a, params.means, params.log_scales.exp(), params.n_bins)
    mix = (params.log_weights().exp() * comp).sum(dim=-1)
    nll = -torch.log(mix.clamp(min=PROB_FLOOR))
    return nll.sum(dim=-1)


def mixture_sample(params: MixtureParams, generator: torch.Generator | None = None) -> Tensor:
    """Sample integer action bins, one per action dimension."""
    cont = mixture_sample_continuous(params, generator)
    return cont.round().long()


def mixture_sample_continuous(params: MixtureParams, generator: torch.Generator | None = None) -> Tensor:
    """Sample continuous bin-unit values (component choice + logistic noise).

    Values are clamped to ``[0, n_bins - 1]``; controllers consume these
    directly while datasets store the rounded bin.
    """
    log_w = params.log_weights()
    flat_w = log_w.reshape(-1, params.k)
    idx = torch.multinomial(flat_w.exp(), 1, generator=generator).reshape(log_w.shape[:-1] + (1,))
    mu = params.means.gather(-1, idx).squeeze(-1)
    sigma = params.log_scales.exp().gather(-1, idx).squeeze(-1)
    u = torch.rand(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
    u = u.clamp(1e-7, 1 - 1e-7)
    cont = mu + sigma * (torch.log(u) - torch.log1p(-u))
    return cont.clamp(0.0, params.n_bins - 1.0)


def keypoint_nll(params: Keypoint2DParams, target: Tensor) -> Tensor:
    """Negative log-density of a 2D Gaussian at pixel ``target`` ``[..., 2]``."""
    cov = params.covariance
    sym_gap = (cov - cov.transpose(-1, -2)).abs().max()
    if sym_gap > 1e-6:
        raise ValueError("covariance must be symmetric")
    a = cov[..., 0, 0]
    b = cov[..., 0, 1]
    d = cov[..., 1, 1]
    det = a * d - b * b
    if not (torch.all(det > 0) and torch.all(a > 0)):
        raise ValueError("covariance must be positive definite")
    diff = target - params.mean
    dx, dy = diff[..., 0], diff[..., 1]
    quad = (d * dx * dx - 2 * b * dx * dy + a * dy * dy) / det
    return 0.5 * quad + 0.5 * torch.log(det) + torch.log(torch.tensor(2 * torch.pi, dtype=det.dtype))


def action_to_bins(action, n_bins: int = N_BINS):
    """Map continuous actions in [-1, 1] to integer bins [0, n_bins - 1]."""
    import numpy as np

    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    half = (n_bins - 1) / 2.0
    return np.rint((a + 1.0) * half).astype(np.int64)


def bins_to_action(bins, n_bins: int = N_BINS):
    """Inverse of :func:`action_to_bins` on bin centers (float bins accepted)."""
    import numpy as np

    half = (n_bins - 1) / 2.0
    return np.asarray(bins, dtype=np.float64) / half - 1.0
