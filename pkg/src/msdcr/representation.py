"""Item feature mapping, per-domain self-attention and user lookup.

All tensors are row-major: a user's n interactions in a domain form an
``(n, d)`` matrix (one row per item), batched as ``(B, n, d)`` with a boolean
mask marking real (non-padding) rows.
"""
from __future__ import annotations

import math

import torch
from torch import nn


def uniform_init_(tensor: torch.Tensor, fan_in: int, generator: torch.Generator | None = None) -> torch.Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=generator)
    return tensor


def embed_items(features: torch.Tensor, mapping: torch.Tensor) -> torch.Tensor:
    """Linear map of raw features, ``(..., d_s) -> (..., d)``, with ``mapping`` of shape ``(d, d_s)``."""
    if features.shape[-1] != mapping.shape[1]:
        raise ValueError(f"feature width {features.shape[-1]} does not match mapping input {mapping.shape[1]}")
    return features @ mapping.T


def self_attention(z: torch.Tensor, w_q: torch.Tensor, w_k: torch.Tensor, w_v: torch.Tensor,
                   mask: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Scaled dot-product self-attention over a user's interactions.

    ``z`` is ``(..., n, d)``. Returns ``(h, weights)`` where ``weights[..., i, j]``
    is the share of item j's value vector in item i's output; each row over
    real items sums to one. Padded rows come back as zeros.
    """
    d = z.shape[-1]
    q, k, v = z @ w_q.T, z @ w_k.T, z @ w_v.T
    if z.shape[-2] == 0:
        return torch.zeros_like(v), z.new_zeros(z.shape[:-1] + (0,))
    scores = q @ k.transpose(-1, -2) / math.sqrt(d)
    if mask is not None:
        scores = scores.masked_fill(~mask.unsqueeze(-2), float("-inf"))
        # rows with no valid key at all would be NaN; give them a harmless uniform row
        empty = ~mask.any(-1, keepdim=True).unsqueeze(-1)
        scores = scores.masked_fill(empty, 0.0)
    weights = torch.softmax(scores, dim=-1)
    h = weights @ v
    if mask is not None:
        h = h * mask.unsqueeze(-1)
        weights = weights * mask.unsqueeze(-1)
    return h, weights


class Representation(nn.Module):
    """Per-domain item maps and attention projections plus the shared user table.

    ``item_maps[s]`` has shape ``(d, d_s)``; the user table is stored as
    ``(num_users, d)`` so row u is the user's embedding.
    """

    def __init__(self, num_users: int, feature_dims: list[int], d: int,
                 generator: torch.Generator | None = None, dtype=torch.float64):
        super().__init__()
        self.d = d
        self.item_maps = nn.ParameterList()
        self.w_q = nn.ParameterList()
        self.w_k = nn.ParameterList()
        self.w_v = nn.ParameterList()
        for d_s in feature_dims:
            self.item_maps.append(nn.Parameter(uniform_init_(torch.empty(d, d_s, dtype=dtype), d_s, generator)))
            for plist in (self.w_q, self.w_k, self.w_v):
                plist.append(nn.Parameter(uniform_init_(torch.empty(d, d, dtype=dtype), d, generator)))
        self.user_table = nn.Parameter(uniform_init_(torch.empty(num_users, d, dtype=dtype), num_users, generator))

    @property
    def num_domains(self) -> int:
        return len(self.item_maps)

    def embed_user(self, users) -> torch.Tensor:
        users = torch.as_tensor(users, dtype=torch.long)
        n = self.user_table.shape[0]
        if users.numel() and (users.min() < 0 or users.max() >= n):
            raise IndexError(f"user index outside [0, {n})")
        return self.user_table[users]

    def embed_items(self, features: torch.Tensor, domain: int) -> torch.Tensor:
        return embed_items(features, self.item_maps[domain])

    def attend(self, features: torch.Tensor, domain: int, mask: torch.Tensor | None = None):
        """Item features ``(..., n, d_s)`` to attentional embeddings ``(..., n, d)`` and weights."""
        z = self.embed_items(features, domain)
        return self_attention(z, self.w_q[domain], self.w_k[domain], self.w_v[domain], mask)
