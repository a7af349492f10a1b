"""Domain-invariant aspect preferences and the adaptation discriminator.

The invariant encoder has the same structure as the domain-specific one but
its own projections and pooling queries; only the adversarial direction
differs (see ``training``).
"""
from __future__ import annotations

import torch

from .dsape import AspectEncoder, DomainDiscriminator, domain_cross_entropy


class InvariantEncoder(AspectEncoder):
    pass


class AdaptationDiscriminator(DomainDiscriminator):
    pass


def invariant_aspect_matrix(h: torch.Tensor, p: torch.Tensor, encoder: InvariantEncoder,
                            mask: torch.Tensor | None = None) -> torch.Tensor:
    """``(..., M, d)`` invariant preferences from ``(..., n, d)`` attentional embeddings."""
    pooled, _, _ = encoder(h, p, mask)
    return pooled


def adaptation_loss(invariant: torch.Tensor, labels: torch.Tensor,
                    discriminator: AdaptationDiscriminator) -> torch.Tensor:
    """Summed domain cross-entropy of the adaptation discriminator over ``(K, M, d)`` samples."""
    if invariant.shape[0] == 0:
        raise ValueError("adaptation loss needs at least one sample")
    return domain_cross_entropy(discriminator(invariant), labels)


class GradientReversal(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, scale):
        ctx.scale = scale
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad):
        return -ctx.scale * grad, None


def reverse_gradient(x: torch.Tensor, scale: float = 1.0) -> torch.Tensor:
    return GradientReversal.apply(x, scale)
