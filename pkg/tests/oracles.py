"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written with plain Python floats / numpy and
no reuse of package internals, so tests compare two independent routes to the
same number.
"""

from __future__ import annotations

import math

import numpy as np


def ref_logistic_cdf(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def ref_bin_prob(a: int, mu: float, sigma: float, n_bins: int) -> float:
    upper = 1.0 if a >= n_bins - 1 else ref_logistic_cdf((a + 0.5 - mu) / sigma)
    lower = 0.0 if a <= 0 else ref_logistic_cdf((a - 0.5 - mu) / sigma)
    return upper - lower


def ref_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def ref_mixture_nll(weights, means, log_scales, actions, n_bins, prob_floor=1e-12):
    """Brute-force mixture NLL, summed over action dimensions.

    ``weights/means/log_scales`` are ``[A, k]`` arrays, ``actions`` length-A
    integers.
    """
    weights = np.asarray(weights, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    log_scales = np.asarray(log_scales, dtype=np.float64)
    total = 0.0
    for dim in range(weights.shape[0]):
        alpha = ref_softmax(weights[dim])
        p = 0.0
        for i in range(weights.shape[1]):
            p += alpha[i] * ref_bin_prob(
                int(actions[dim]), means[dim, i], math.exp(log_scales[dim, i]), n_bins
            )
        total += -math.log(max(p, prob_floor))
    return total


def ref_mixture_pmf(weights, means, log_scales, n_bins):
    """Full pmf of a single-dimension bin mixture, brute-forced over all bins."""
    alpha = ref_softmax(weights)
    pmf = np.zeros(n_bins)
    for a in range(n_bins):
        for i in range(len(alpha)):
            pmf[a] += alpha[i] * ref_bin_prob(a, float(means[i]), math.exp(float(log_scales[i])), n_bins)
    return pmf


def ref_gaussian2d_nll(mean, cov, target) -> float:
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    diff = np.asarray(target, dtype=np.float64) - mean
    inv = np.linalg.inv(cov)
    quad = float(diff @ inv @ diff)
    return 0.5 * quad + 0.5 * math.log(float(np.linalg.det(cov))) + math.log(2 * math.pi)


def finite_difference_grads(f, tensors, step=1e-4, max_coords=None, rng=None):
    """Central finite differences of scalar ``f()`` w.r.t. a list of tensors.

    Returns, per tensor, a list of ``(flat_index, estimate)`` pairs. When
    ``max_coords`` is set, a random subset of coordinates is probed.
    """
    results = []
    for t in tensors:
        flat = t.detach().reshape(-1)
        n = flat.numel()
        if max_coords is not None and n > max_coords:
            idxs = (rng or np.random.default_rng(0)).choice(n, size=max_coords, replace=False)
        else:
            idxs = range(n)
        pairs = []
        for i in idxs:
            orig = flat[i].item()
            flat[i] = orig + step
            hi = float(f())
            flat[i] = orig - step
            lo = float(f())
            flat[i] = orig
            pairs.append((int(i), (hi - lo) / (2 * step)))
        results.append(pairs)
    return results


def assert_grads_match(analytic, fd_pairs, rel_tol=1e-3, abs_floor=1e-7):
    """Compare autograd gradients against finite-difference estimates."""
    for grad, pairs in zip(analytic, fd_pairs):
        flat = grad.detach().reshape(-1)
        for idx, est in pairs:
            got = float(flat[idx])
            scale = max(abs(got), abs(est))
            if scale < abs_floor:
                continue
            assert abs(got - est) / scale <= rel_tol, (
                f"gradient mismatch at coord {idx}: autograd {got:.8g} vs fd {est:.8g}"
            )


def ref_single_head_nonlocal(x, weights, tau, mask=None):
    """Dense single-head non-local block forward (train-mode batchnorm).

    ``x`` is ``[B, C, T, H, W]``; ``weights`` holds 2D conv matrices and
    biases plus head projections, with the output projection assumed to be
    the identity. Dropout is treated as disabled.
    """
    b, c, t, h, w = x.shape
    n = t * h * w
    flat = x.reshape(b, c, n)

    def conv_relu(mat, bias):
        out = np.einsum("oc,bcn->bon", mat, flat) + bias[None, :, None]
        return np.maximum(out, 0.0)

    k = np.einsum("oc,bcn->bon", weights["k_head"], conv_relu(weights["wk"], weights["bk"]))
    q = np.einsum("oc,bcn->bon", weights["q_head"], conv_relu(weights["wq"], weights["bq"]))
    v = np.einsum("oc,bcn->bon", weights["v_head"], conv_relu(weights["wv"], weights["bv"]))

    logits = np.einsum("bcn,bcm->bnm", k, q) / tau  # [B, key, query]
    if mask is not None:
        blocked = ~np.asarray(mask).T  # [key, query]
        logits = np.where(blocked[None], -np.inf, logits)
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    attn = e / e.sum(axis=1, keepdims=True)
    out = np.einsum("bcn,bnm->bcm", v, attn)

    res = flat + out  # identity output projection, no dropout
    mean = res.mean(axis=(0, 2))
    var = res.var(axis=(0, 2))  # biased, as train-mode batchnorm uses
    normed = (res - mean[None, :, None]) / np.sqrt(var[None, :, None] + 1e-5)
    return normed.reshape(b, c, t, h, w)
