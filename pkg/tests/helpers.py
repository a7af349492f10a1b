"""Tiny hand-built scenarios and a finite-difference gradient oracle."""
import numpy as np
import torch

from msdcr.data import DomainDataset, FeatureField, FeatureSchema, MultiDomainScenario


def id_feature_domain(domain_id, n_items, interactions, extra_dims=0, rng=None):
    """Domain whose items are one-hot by index, optionally with random dense extras."""
    fields = [FeatureField("id", n_items, "one-hot")]
    feats = np.eye(n_items)
    if extra_dims:
        fields.append(FeatureField("tags", extra_dims, "multi-hot"))
        feats = np.hstack([feats, (rng.random((n_items, extra_dims)) < 0.5).astype(float)])
    return DomainDataset(domain_id, FeatureSchema(tuple(fields)), [f"i{k}" for k in range(n_items)],
                         feats, {u: list(v) for u, v in interactions.items()})


def random_scenario(num_users, num_domains, n_items, per_user, seed):
    rng = np.random.default_rng(seed)
    domains = []
    for s in range(num_domains):
        inter = {u: sorted(rng.choice(n_items, per_user, replace=False).tolist()) for u in range(num_users)}
        domains.append(id_feature_domain(s + 1, n_items, inter))
    return MultiDomainScenario(num_users, domains)


def flat_params(params):
    return torch.cat([p.detach().flatten() for p in params])


def set_flat(params, vec):
    k = 0
    with torch.no_grad():
        for p in params:
            n = p.numel()
            p.copy_(vec[k:k + n].view_as(p))
            k += n


def central_difference(fn, params, step=1e-5):
    """Numerical gradient of scalar ``fn()`` with respect to every entry of ``params``."""
    base = flat_params(params)
    grad = torch.empty_like(base)
    with torch.no_grad():
        _fill_differences(fn, params, base, grad, step)
    set_flat(params, base)
    return grad


def _fill_differences(fn, params, base, grad, step):
    for i in range(base.numel()):
        shifted = base.clone()
        shifted[i] += step
        set_flat(params, shifted)
        up = float(fn())
        shifted[i] -= 2 * step
        set_flat(params, shifted)
        down = float(fn())
        grad[i] = (up - down) / (2 * step)


def analytic_gradient(fn, params):
    for p in params:
        p.grad = None
    fn().backward()
    return torch.cat([(p.grad if p.grad is not None else torch.zeros_like(p)).flatten() for p in params])


def relative_error(a, b):
    return float((a - b).norm() / max(a.norm(), b.norm(), 1e-30))
