"""Domain-specific aspect preferences: aspect projections, attention pooling,
the separation discriminator and gated cross-domain enhancement.

An aspect preference matrix for one user is stored as ``(M, d)``: row m is
the d-dimensional preference for latent aspect m. Flattening it row-major
gives the concatenation of the aspect vectors in aspect order.
"""
from __future__ import annotations

import torch
from torch import nn

from .representation import uniform_init_

LOG_CLAMP = 1e-12


def aspect_item_embeddings(h: torch.Tensor, p: torch.Tensor, weight: torch.Tensor,
                           bias: torch.Tensor) -> torch.Tensor:
    """Project every interaction onto every latent aspect.

    h: ``(..., n, d)`` attentional item embeddings; p: ``(..., d)`` user embedding;
    weight: ``(M, d, 2d)``; bias: ``(M, d)``. Returns ``(..., n, M, d)``.
    """
    d = h.shape[-1]
    if weight.shape[-1] != 2 * d or p.shape[-1] != d:
        raise ValueError(f"aspect projection expects input width {weight.shape[-1]}, got {2 * d}")
    p = p.unsqueeze(-2).expand(h.shape)
    x = torch.cat([h, p], dim=-1)  # (..., n, 2d)
    return torch.einsum("...nk,mdk->...nmd", x, weight) + bias


def aspect_attention_pool(e: torch.Tensor, queries: torch.Tensor, mask: torch.Tensor | None = None):
    """Attention-pool ``(..., n, M, d)`` aspect embeddings into ``(..., M, d)``.

    Returns ``(pooled, weights, empty)``; ``weights`` is ``(..., n, M)`` and sums
    to one over n for every aspect, ``empty`` flags inputs with no interactions
    (their pooled matrix is zero).
    """
    logits = torch.einsum("...nmd,md->...nm", e, queries)
    if mask is None:
        mask = torch.ones(e.shape[:-2], dtype=torch.bool, device=e.device)
    empty = ~mask.any(-1)
    logits = logits.masked_fill(~mask.unsqueeze(-1), float("-inf"))
    logits = logits.masked_fill(empty[..., None, None], 0.0)
    weights = torch.softmax(logits, dim=-2) * mask.unsqueeze(-1)
    pooled = torch.einsum("...nm,...nmd->...md", weights, e)
    return pooled, weights, empty


class AspectEncoder(nn.Module):
    """Aspect projections and pooling queries shared by every domain."""

    def __init__(self, d: int, num_aspects: int, generator: torch.Generator | None = None,
                 dtype=torch.float64):
        super().__init__()
        self.d, self.num_aspects = d, num_aspects
        self.weight = nn.Parameter(uniform_init_(torch.empty(num_aspects, d, 2 * d, dtype=dtype), 2 * d, generator))
        self.bias = nn.Parameter(uniform_init_(torch.empty(num_aspects, d, dtype=dtype), 2 * d, generator))
        self.queries = nn.Parameter(uniform_init_(torch.empty(num_aspects, d, dtype=dtype), d, generator))

    def forward(self, h: torch.Tensor, p: torch.Tensor, mask: torch.Tensor | None = None):
        e = aspect_item_embeddings(h, p, self.weight, self.bias)
        return aspect_attention_pool(e, self.queries, mask)


class DomainDiscriminator(nn.Module):
    """One-hidden-layer MLP from a flattened ``(M, d)`` matrix to a softmax over S domains."""

    def __init__(self, input_dim: int, num_domains: int, hidden: int = 128,
                 generator: torch.Generator | None = None, dtype=torch.float64):
        super().__init__()
        self.hidden = nn.Linear(input_dim, hidden, dtype=dtype)
        self.out = nn.Linear(hidden, num_domains, dtype=dtype)
        for layer in (self.hidden, self.out):
            uniform_init_(layer.weight, layer.in_features, generator)
            uniform_init_(layer.bias, layer.in_features, generator)

    def forward(self, matrices: torch.Tensor) -> torch.Tensor:
        x = matrices.flatten(start_dim=-2)
        return torch.softmax(self.out(torch.relu(self.hidden(x))), dim=-1)


def domain_cross_entropy(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Summed cross-entropy of predicted domain distributions against true domain indices."""
    picked = probs.gather(-1, labels.long().unsqueeze(-1)).squeeze(-1)
    return -torch.log(picked.clamp_min(LOG_CLAMP)).sum()


def separation_loss(raw: torch.Tensor, labels: torch.Tensor, discriminator: DomainDiscriminator) -> torch.Tensor:
    """Domain label prediction loss of the separation discriminator.

    ``raw`` is ``(K, M, d)`` for K (user, domain) samples. The result is a
    summed scalar with an autograd graph to both the discriminator and ``raw``.
    """
    if raw.shape[0] == 0:
        raise ValueError("separation loss needs at least one sample")
    return domain_cross_entropy(discriminator(raw), labels)


def gate_matrix(target: torch.Tensor, source: torch.Tensor, weight: torch.Tensor,
                bias: torch.Tensor) -> torch.Tensor:
    """Gate controlling how much of ``source``'s aspect preferences flow to ``target``.

    target, source: ``(..., M, d)``; weight: ``(d, 2d)``; bias: ``(d, M)``.
    Entries lie in (0, 1).
    """
    if target.shape != source.shape:
        raise ValueError(f"gate inputs differ in shape: {tuple(target.shape)} vs {tuple(source.shape)}")
    x = torch.cat([target * source, target - source], dim=-1)
    return torch.sigmoid(x @ weight.T + bias.T)


class GatedEnhancement(nn.Module):
    """Gates indexed by source domain and fusion maps indexed by target domain."""

    def __init__(self, d: int, num_aspects: int, num_domains: int,
                 generator: torch.Generator | None = None, dtype=torch.float64):
        super().__init__()
        S, M = num_domains, num_aspects
        self.gate_weight = nn.Parameter(uniform_init_(torch.empty(S, d, 2 * d, dtype=dtype), 2 * d, generator))
        self.gate_bias = nn.Parameter(uniform_init_(torch.empty(S, d, M, dtype=dtype), 2 * d, generator))
        self.fuse_weight = nn.Parameter(uniform_init_(torch.empty(S, d, S * d, dtype=dtype), S * d, generator))
        self.fuse_bias = nn.Parameter(uniform_init_(torch.empty(S, d, M, dtype=dtype), S * d, generator))

    def gate(self, raw: torch.Tensor, target: int, source: int) -> torch.Tensor:
        return gate_matrix(raw[..., target, :, :], raw[..., source, :, :],
                           self.gate_weight[source], self.gate_bias[source])

    def enhance(self, raw: torch.Tensor, target: int, empty: torch.Tensor | None = None,
                gate_override: float | None = None) -> torch.Tensor:
        """Enhanced ``(..., M, d)`` preferences for ``target`` from raw ``(..., S, M, d)`` matrices.

        Source domains flagged in ``empty`` contribute nothing regardless of
        their gate. ``gate_override`` pins every gate to a constant (test hook).
        """
        S = raw.shape[-3]
        blocks = []
        for s in range(S):
            a = raw[..., s, :, :]
            if s != target:
                g = self.gate(raw, target, s) if gate_override is None else torch.full_like(a, gate_override)
                a = g * a
                if empty is not None:
                    a = a * (~empty[..., s]).to(a.dtype)[..., None, None]
            blocks.append(a)
        x = torch.cat(blocks, dim=-1)  # (..., M, S*d)
        return torch.sigmoid(x @ self.fuse_weight[target].T + self.fuse_bias[target].T)

    def forward(self, raw: torch.Tensor, empty: torch.Tensor | None = None) -> torch.Tensor:
        return torch.stack([self.enhance(raw, s, empty) for s in range(raw.shape[-3])], dim=-3)


def enhance_aspects(raw: torch.Tensor, target: int, module: GatedEnhancement,
                    empty: torch.Tensor | None = None, gate_override: float | None = None) -> torch.Tensor:
    return module.enhance(raw, target, empty, gate_override)
