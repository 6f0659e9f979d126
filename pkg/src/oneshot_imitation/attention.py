"""Causal space-time non-local attention blocks.

The block follows the non-local formulation: key/query/value tensors come
from 1x1x1 3D convolutions with ReLU, multi-head attention mixes all
space-time positions, and the result is projected back and merged with a
residual connection, dropout and batch normalization. Masking restricts
which frames may attend to which, so the operator can be made causal (or
given a context-then-causal structure by the policy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn


@dataclass
class AttentionBlockConfig:
    embed_dim: int = 128
    n_heads: int = 4
    temperature: float | None = None  # None -> sqrt(embed_dim / n_heads)
    dropout_rate: float = 0.1
    causal: bool = True
    kernel_t: int = 1  # temporal conv kernel; >1 is left-padded to stay causal

    def __post_init__(self):
        if self.embed_dim % self.n_heads != 0:
            raise ValueError(f"n_heads {self.n_heads} must divide embed_dim {self.embed_dim}")
        if self.temperature is not None and self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def tau(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return math.sqrt(self.embed_dim / self.n_heads)


def positional_encoding(shape: tuple[int, int, int, int], dtype=torch.float32) -> Tensor:
    """Sinusoidal encoding over the flattened space-time index.

    ``shape`` is ``(C, T, H, W)``; time and space are treated as a single
    flattened dimension of length T*H*W. Channels alternate sin/cos down a
    geometric frequency ladder, so position 0 encodes as (0, 1, 0, 1, ...).
    """
    c, t, h, w = shape
    if c % 2 != 0:
        raise ValueError("channel count must be even")
    pos = torch.arange(t * h * w, dtype=dtype)
    idx = torch.arange(c // 2, dtype=dtype)
    div = torch.pow(torch.tensor(10000.0, dtype=dtype), 2 * idx / c)
    angles = pos[None, :] / div[:, None]  # [C/2, N]
    enc = torch.zeros(c, t * h * w, dtype=dtype)
    enc[0::2] = torch.sin(angles)
    enc[1::2] = torch.cos(angles)
    return enc.reshape(c, t, h, w)


def causal_mask(t: int, h: int, w: int) -> Tensor:
    """Boolean [query, key] mask permitting attention within or behind a frame.

    Entry (q, k) is True iff the key's frame index is <= the query's frame
    index; all spatial positions inside a visible frame are visible.
    """
    frame = torch.arange(t).repeat_interleave(h * w)
    return frame[None, :] <= frame[:, None]


def context_stream_mask(t_ctx: int, t_obs: int, h: int, w: int) -> Tensor:
    """Mask for a [context | observation] stream.

    Context frames are a completed demonstration, so every observation query
    may see all of them; observation queries additionally see observation
    frames up to their own. Context queries see only context, which keeps
    stacked blocks causal end to end.
    """
    n_ctx = t_ctx * h * w
    frame = torch.arange(t_ctx + t_obs).repeat_interleave(h * w)
    is_ctx = frame < t_ctx
    causal = frame[None, :] <= frame[:, None]
    mask = is_ctx[None, :] | causal
    mask[is_ctx] = False
    mask[:n_ctx, :n_ctx] = True
    return mask


class NonLocalAttentionBlock(nn.Module):
    """Multi-head non-local attention over a [B, C, T, H, W] tensor."""

    def __init__(self, cfg: AttentionBlockConfig):
        super().__init__()
        self.cfg = cfg
        d, n = cfg.embed_dim, cfg.n_heads
        kt = cfg.kernel_t
        self.k_conv = nn.Conv3d(d, d, kernel_size=(kt, 1, 1))
        self.q_conv = nn.Conv3d(d, d, kernel_size=(kt, 1, 1))
        self.v_conv = nn.Conv3d(d, d, kernel_size=(kt, 1, 1))
        dh = d // n
        self.k_heads = nn.Parameter(torch.empty(n, dh, d))
        self.q_heads = nn.Parameter(torch.empty(n, dh, d))
        self.v_heads = nn.Parameter(torch.empty(n, dh, d))
        for p in (self.k_heads, self.q_heads, self.v_heads):
            nn.init.normal_(p, std=d**-0.5)
        self.out_conv = nn.Conv3d(d, d, kernel_size=1)
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.norm = nn.BatchNorm3d(d)

    def _kqv(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        if self.cfg.kernel_t > 1:
            x = F.pad(x, (0, 0, 0, 0, self.cfg.kernel_t - 1, 0))
        return (
            F.relu(self.k_conv(x)),
            F.relu(self.q_conv(x)),
            F.relu(self.v_conv(x)),
        )

    def _attend(self, x: Tensor, mask: Tensor | None) -> tuple[Tensor, Tensor]:
        b, c, t, h, w = x.shape
        k, q, v = self._kqv(x)
        kh = torch.einsum("hcd,bdn->bhcn", self.k_heads, k.reshape(b, c, -1))
        qh = torch.einsum("hcd,bdn->bhcn", self.q_heads, q.reshape(b, c, -1))
        vh = torch.einsum("hcd,bdn->bhcn", self.v_heads, v.reshape(b, c, -1))
        logits = torch.einsum("bhcn,bhcm->bhnm", kh, qh) / self.cfg.tau
        if mask is None and self.cfg.causal:
            mask = causal_mask(t, h, w)
        if mask is not None:
            blocked = ~mask.T.to(x.device)  # [key, query]
            logits = logits.masked_fill(blocked[None, None], float("-inf"))
        return torch.softmax(logits, dim=2), vh

    def attention(self, x: Tensor, mask: Tensor | None = None) -> Tensor:
        """Attention matrices [B, heads, key, query]; columns sum to one."""
        return self._attend(x, mask)[0]

    def forward(self, x: Tensor, mask: Tensor | None = None) -> Tensor:
        b, c, t, h, w = x.shape
        if c != self.cfg.embed_dim:
            raise ValueError(f"expected {self.cfg.embed_dim} channels, got {c}")
        attn, vh = self._attend(x, mask)
        out = torch.einsum("bhcn,bhnm->bhcm", vh, attn)
        out = out.reshape(b, c, t, h, w)
        out = self.out_conv(out)
        return self.norm(x + self.dropout(out))


class SpaceTimeConvBlock(nn.Module):
    """Attention-free counterpart: two space-time convolutions, same plumbing.

    Temporal mixing comes from a causal (left-padded) temporal kernel instead
    of attention; used for the no-attention architecture ablation.
    """

    def __init__(self, cfg: AttentionBlockConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        kt = max(cfg.kernel_t, 2)
        self.kt = kt
        self.conv1 = nn.Conv3d(d, d, kernel_size=(kt, 3, 3), padding=(0, 1, 1))
        self.conv2 = nn.Conv3d(d, d, kernel_size=(kt, 3, 3), padding=(0, 1, 1))
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.norm = nn.BatchNorm3d(d)

    def forward(self, x: Tensor, mask: Tensor | None = None) -> Tensor:
        pad = (0, 0, 0, 0, self.kt - 1, 0)
        out = F.relu(self.conv1(F.pad(x, pad)))
        out = self.conv2(F.pad(out, pad))
        return self.norm(x + self.dropout(out))


def stack_blocks(x: Tensor, blocks, mask: Tensor | None = None) -> Tensor:
    """Apply blocks sequentially; an empty stack is the identity."""
    for block in blocks:
        x = block(x, mask)
    return x
