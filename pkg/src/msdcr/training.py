"""Prediction heads, losses, the alternating minimax step and the fit loop.

Parameter families
------------------
``backbone``  item maps, attention projections and the user table
``ds``        domain-specific aspect encoder plus gates and fusion maps
``psi``       separation discriminator (ascends the separation loss)
``da``        domain-invariant aspect encoder
``phi``       adaptation discriminator (descends the adaptation loss)
``f``         per-domain prediction MLPs

One training step first updates the two discriminators on detached encoder
outputs, then takes one Adam step on the min-side families for
``L_ds - L_da + L_f + l2 * ||theta||^2``. The adversarial terms enter as means
over the (user, domain) samples of the batch so their scale matches the
per-triple BPR mean.
"""
from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import evaluation
from .data import SplitScenario, MultiDomainScenario, domain_subscenario, sample_bpr_triples
from .diape import AdaptationDiscriminator, InvariantEncoder, adaptation_loss, reverse_gradient
from .dsape import AspectEncoder, DomainDiscriminator, GatedEnhancement, separation_loss
from .errors import ConfigError, TrainingError
from .representation import Representation, uniform_init_

logger = logging.getLogger(__name__)

VARIANTS = ("full", "wo-dsape", "wo-diape", "wo-sep", "wo-enhan", "single-target")
FAMILIES = ("backbone", "ds", "psi", "da", "phi", "f")
MIN_FAMILIES = ("backbone", "ds", "da", "f")


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("w/o", "wo").replace("_", "-")
    if key == "single":
        key = "single-target"
    if key not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return key


@dataclass
class TrainConfig:
    d: int = 16
    num_aspects: int = 4
    lr: float = 1e-3
    disc_lr: float = 1e-3
    l2: float = 1e-5
    batch_size: int = 128
    epochs: int = 50
    negatives_per_positive: int = 1
    k_disc: int = 1
    variant: str = "full"
    patience: int = 10
    disc_hidden: int = 128
    predictor_hidden: tuple[int, ...] = (256, 128)
    dropout: float = 0.0
    adaptation_mode: str = "alternating"
    bpr_scores: str = "logit"
    dtype: str = "float64"
    sep_weight: float = 1.0
    adapt_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.variant = normalize_variant(self.variant)
        self.predictor_hidden = tuple(int(h) for h in self.predictor_hidden)

    def validate(self) -> None:
        for name in ("d", "num_aspects", "batch_size", "negatives_per_positive", "k_disc", "disc_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0 or self.patience < 1:
            raise ConfigError("epochs must be >= 0 and patience >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be non-negative")
        if self.adaptation_mode not in ("alternating", "reversal"):
            raise ConfigError(f"adaptation_mode must be alternating or reversal, got {self.adaptation_mode!r}")
        if self.bpr_scores not in ("logit", "probability"):
            raise ConfigError(f"bpr_scores must be logit or probability, got {self.bpr_scores!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown train config key {key!r}")
            default = getattr(cls(), key)
            if isinstance(default, tuple):
                kwargs[key] = tuple(int(v) for v in str(value).split(",") if v.strip())
            elif isinstance(default, bool):
                kwargs[key] = str(value).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(value)
            elif isinstance(default, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


# ---------------------------------------------------------------------------
# heads and losses


class Predictor(nn.Module):
    """Per-domain MLP with a sigmoid output."""

    def __init__(self, input_dim: int, hidden=(256, 128), dropout: float = 0.0,
                 generator: torch.Generator | None = None, dtype=torch.float64):
        super().__init__()
        layers, width = [], input_dim
        for h in hidden:
            layers += [nn.Linear(width, h, dtype=dtype), nn.ReLU()]
            if dropout:
                layers.append(nn.Dropout(dropout))
            width = h
        layers.append(nn.Linear(width, 1, dtype=dtype))
        self.net = nn.Sequential(*layers)
        self.input_dim = input_dim
        for m in self.net:
            if isinstance(m, nn.Linear):
                uniform_init_(m.weight, m.in_features, generator)
                uniform_init_(m.bias, m.in_features, generator)

    def forward(self, x: torch.Tensor, logits: bool = False) -> torch.Tensor:
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"predictor expects width {self.input_dim}, got {x.shape[-1]}")
        z = self.net(x).squeeze(-1)
        return z if logits else torch.sigmoid(z)


def predict_interaction(x: torch.Tensor, a: torch.Tensor | None, c: torch.Tensor | None,
                        predictor: Predictor, logits: bool = False) -> torch.Tensor:
    """Probability that the user interacts with items ``x``.

    ``a`` and ``c`` are ``(..., M, d)`` preference matrices (or None when the
    variant drops that block); they broadcast against the leading dims of x.
    """
    prefs = [b.flatten(start_dim=-2) for b in (a, c) if b is not None]
    width = x.shape[-1] + sum(p.shape[-1] for p in prefs)
    if width != predictor.input_dim:
        raise ValueError(f"predictor expects width {predictor.input_dim}, got {width}")
    # first layer split into item and user halves so the user half is computed
    # once per user rather than once per candidate
    first = predictor.net[0]
    d_x = x.shape[-1]
    h = x @ first.weight[:, :d_x].T + first.bias
    if prefs:
        h = h + torch.cat(prefs, dim=-1) @ first.weight[:, d_x:].T
    z = predictor.net[1:](h).squeeze(-1)
    return z if logits else torch.sigmoid(z)


def bpr_loss(pos_scores: torch.Tensor, neg_scores: torch.Tensor) -> torch.Tensor:
    """Mean of -log sigmoid(pos - neg), written as softplus for stability."""
    if pos_scores.numel() == 0:
        raise ValueError("bpr_loss needs at least one triple")
    return F.softplus(-(pos_scores - neg_scores)).mean()


def total_prediction_loss(losses) -> torch.Tensor:
    losses = list(losses)
    if not losses:
        raise ValueError("need at least one domain loss")
    return torch.stack([torch.as_tensor(v) for v in losses]).mean()


# ---------------------------------------------------------------------------
# model


class InteractionContext:
    """Item features and padded training histories for every domain."""

    def __init__(self, scenario: MultiDomainScenario, dtype=torch.float64):
        self.num_users = scenario.num_users
        self.features, self.history, self.mask = [], [], []
        for d in scenario.domains:
            self.features.append(torch.as_tensor(d.features, dtype=dtype))
            length = max([len(v) for v in d.interactions.values()] + [1])
            hist = torch.zeros(scenario.num_users, length, dtype=torch.long)
            mask = torch.zeros(scenario.num_users, length, dtype=torch.bool)
            for u, items in d.interactions.items():
                hist[u, :len(items)] = torch.as_tensor(items, dtype=torch.long)
                mask[u, :len(items)] = True
            self.history.append(hist)
            self.mask.append(mask)

    @property
    def num_domains(self) -> int:
        return len(self.features)

    @property
    def feature_dims(self) -> list[int]:
        return [f.shape[1] for f in self.features]


@dataclass
class Encoded:
    users: torch.Tensor
    raw: torch.Tensor | None  # (U, S, M, d)
    enhanced: torch.Tensor | None
    invariant: torch.Tensor | None
    empty: torch.Tensor  # (U, S)

    def specific(self, domain: int):
        if self.enhanced is not None:
            return self.enhanced[:, domain]
        return None if self.raw is None else self.raw[:, domain]

    def shared(self, domain: int):
        return None if self.invariant is None else self.invariant[:, domain]


class MSDCR(nn.Module):
    """Multi-domain model; which components exist depends on ``config.variant``.

    ``single-target`` is realised by fitting one ``full`` model per domain on a
    one-domain scenario, so this class never sees it.
    """

    def __init__(self, num_users: int, feature_dims: list[int], config: TrainConfig):
        super().__init__()
        if config.variant == "single-target":
            raise ConfigError("single-target is built from per-domain full models")
        S, d, M = len(feature_dims), config.d, config.num_aspects
        dtype = getattr(torch, config.dtype)
        self.dtype = dtype
        gen = torch.Generator().manual_seed(config.seed)
        v = config.variant
        self.config = config
        self.num_domains = S
        self.feature_dims = list(feature_dims)
        self.use_dsape = v != "wo-dsape"
        self.use_diape = v != "wo-diape"
        self.use_enhan = self.use_dsape and v != "wo-enhan"
        self.use_sep = self.use_dsape and v != "wo-sep" and S > 1
        self.use_adapt = self.use_diape and S > 1

        self.representation = Representation(num_users, feature_dims, d, gen, dtype)
        self.dsape = AspectEncoder(d, M, gen, dtype) if self.use_dsape else None
        self.enhancement = GatedEnhancement(d, M, S, gen, dtype) if self.use_enhan else None
        self.diape = InvariantEncoder(d, M, gen, dtype) if self.use_diape else None
        self.separator = DomainDiscriminator(M * d, S, config.disc_hidden, gen, dtype) if self.use_sep else None
        self.adaptor = AdaptationDiscriminator(M * d, S, config.disc_hidden, gen, dtype) if self.use_adapt else None
        pref_dim = M * d * (int(self.use_dsape) + int(self.use_diape))
        self.predictors = nn.ModuleList(
            Predictor(d_s + pref_dim, config.predictor_hidden, config.dropout, gen, dtype) for d_s in feature_dims
        )

    def families(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        groups = {
            "backbone": [self.representation],
            "ds": [self.dsape, self.enhancement],
            "psi": [self.separator],
            "da": [self.diape],
            "phi": [self.adaptor],
            "f": [self.predictors],
        }
        prefix = {id(m): n for n, m in self.named_children()}
        out = {}
        for fam, mods in groups.items():
            out[fam] = [
                (f"{prefix[id(m)]}.{n}", p) for m in mods if m is not None for n, p in m.named_parameters()
            ]
        return out

    def encode(self, ctx: InteractionContext, users) -> Encoded:
        users = torch.as_tensor(users, dtype=torch.long)
        p = self.representation.embed_user(users)
        raw, inv, empties = [], [], []
        for s in range(self.num_domains):
            mask = ctx.mask[s][users]
            feats = ctx.features[s][ctx.history[s][users]]
            h, _ = self.representation.attend(feats, s, mask)
            empties.append(~mask.any(-1))
            if self.dsape is not None:
                raw.append(self.dsape(h, p, mask)[0])
            if self.diape is not None:
                inv.append(self.diape(h, p, mask)[0])
        empty = torch.stack(empties, dim=1)
        raw = torch.stack(raw, dim=1) if raw else None
        inv = torch.stack(inv, dim=1) if inv else None
        enhanced = self.enhancement(raw, empty) if self.enhancement is not None else None
        return Encoded(users, raw, enhanced, inv, empty)

    def score_rows(self, ctx: InteractionContext, enc: Encoded, domain: int, rows: torch.Tensor,
                   items: torch.Tensor, logits: bool = False) -> torch.Tensor:
        """Scores for ``items`` (same leading shape as ``rows`` plus optional candidate axis)."""
        x = ctx.features[domain][items]
        a, c = enc.specific(domain), enc.shared(domain)
        extra = items.dim() - rows.dim()
        def pick(block):
            if block is None:
                return None
            block = block[rows]
            for _ in range(extra):
                block = block.unsqueeze(-3)
            return block
        return predict_interaction(x, pick(a), pick(c), self.predictors[domain], logits)

    def l2(self) -> torch.Tensor:
        fams = self.families()
        return sum((p.pow(2).sum() for f in MIN_FAMILIES for _, p in fams[f]), torch.zeros((), dtype=self.dtype))


class FittedModel:
    """A model bound to the training histories it conditions on."""

    def __init__(self, model: MSDCR, ctx: InteractionContext):
        self.model = model
        self.ctx = ctx

    @property
    def num_domains(self) -> int:
        return self.ctx.num_domains

    @torch.no_grad()
    def score(self, domain: int, users, items, logits: bool = True) -> np.ndarray:
        """``(U, C)`` scores of candidate item matrix ``items`` for ``users``.

        Ranking uses the pre-sigmoid output by default: the order is the same
        as for probabilities, but confident scores do not collapse to 1.0 and tie.
        """
        self.model.eval()
        users = torch.as_tensor(np.asarray(users), dtype=torch.long)
        items = torch.as_tensor(np.asarray(items), dtype=torch.long)
        enc = self.model.encode(self.ctx, users)
        rows = torch.arange(len(users))
        out = self.model.score_rows(self.ctx, enc, domain, rows, items, logits)
        return out.numpy()


class SingleTargetModel:
    """One independently trained one-domain model per target domain."""

    def __init__(self, members: list[FittedModel]):
        self.members = members

    @property
    def num_domains(self) -> int:
        return len(self.members)

    def score(self, domain: int, users, items, logits: bool = True) -> np.ndarray:
        return self.members[domain].score(0, users, items, logits)


# ---------------------------------------------------------------------------
# training step


class Trainer:
    def __init__(self, model: MSDCR, ctx: InteractionContext, config: TrainConfig, track_updates: bool = False):
        self.model, self.ctx, self.config = model, ctx, config
        self.track_updates = track_updates
        self.last_updates: list[dict] = []
        fams = model.families()
        reversal = config.adaptation_mode == "reversal"
        groups = [{"params": [p for _, p in fams[f]], "name": f} for f in MIN_FAMILIES if fams[f]]
        if reversal and fams["phi"]:
            groups.append({"params": [p for _, p in fams["phi"]], "name": "phi", "lr": config.disc_lr})
        self.min_opt = torch.optim.Adam(groups, lr=config.lr)
        self.psi_opt = torch.optim.Adam([p for _, p in fams["psi"]], lr=config.disc_lr, maximize=True) \
            if fams["psi"] else None
        self.phi_opt = torch.optim.Adam([p for _, p in fams["phi"]], lr=config.disc_lr) \
            if fams["phi"] and not reversal else None
        self.steps = 0

    def _samples(self, enc: Encoded):
        """Non-empty (user, domain) samples as flat index tensors."""
        rows, doms = torch.nonzero(~enc.empty, as_tuple=True)
        return rows, doms

    def discriminator_inputs(self, batches: dict[int, tuple]):
        """Detached raw/invariant matrices and domain labels the discriminators train on."""
        users = self._batch_users(batches)
        with torch.no_grad():
            enc = self.model.encode(self.ctx, users)
        rows, labels = self._samples(enc)
        raw = enc.raw[rows, labels] if enc.raw is not None else None
        inv = enc.invariant[rows, labels] if enc.invariant is not None else None
        return raw, inv, labels

    @staticmethod
    def _batch_users(batches) -> torch.Tensor:
        return torch.unique(torch.cat([torch.as_tensor(b[0], dtype=torch.long) for b in batches.values()]))

    def _disc_update(self, opt, disc, loss_fn, inputs, labels, family):
        params = list(disc.parameters())
        before = [p.detach().clone() for p in params] if self.track_updates else None
        opt.zero_grad()
        loss = loss_fn(inputs, labels, disc) / len(labels)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite {family} discriminator loss at step {self.steps}")
        loss.backward()
        if self.track_updates:
            grad = torch.cat([p.grad.flatten() for p in params]).clone()
        opt.step()
        if self.track_updates:
            delta = torch.cat([(p.detach() - b).flatten() for p, b in zip(params, before)])
            self.last_updates.append({"family": family, "grad": grad, "delta": delta})
        return float(loss.detach())

    def step(self, batches: dict[int, tuple]) -> dict[str, float]:
        """One alternating update. ``batches`` maps domain -> (users, positives, negatives)."""
        model, cfg = self.model, self.config
        model.train()
        self.last_updates = []
        raw, inv, labels = self.discriminator_inputs(batches)
        if len(labels):
            for _ in range(cfg.k_disc):
                if self.psi_opt is not None:
                    self._disc_update(self.psi_opt, model.separator, separation_loss, raw, labels, "psi")
                if self.phi_opt is not None:
                    self._disc_update(self.phi_opt, model.adaptor, adaptation_loss, inv, labels, "phi")

        users = self._batch_users(batches)
        enc = model.encode(self.ctx, users)
        rows, doms = self._samples(enc)
        report: dict[str, float] = {}
        objective = torch.zeros((), dtype=model.dtype)
        if model.separator is not None and len(doms):
            l_ds = separation_loss(enc.raw[rows, doms], doms, model.separator) / len(doms)
            report["L_ds"] = float(l_ds.detach())
            objective = objective + cfg.sep_weight * l_ds
        if model.adaptor is not None and len(doms):
            c = enc.invariant[rows, doms]
            if cfg.adaptation_mode == "reversal":
                l_da = adaptation_loss(reverse_gradient(c), doms, model.adaptor) / len(doms)
                objective = objective + cfg.adapt_weight * l_da
            else:
                l_da = adaptation_loss(c, doms, model.adaptor) / len(doms)
                objective = objective - cfg.adapt_weight * l_da
            report["L_da"] = float(l_da.detach())

        per_domain = []
        for s, (u, pos, neg) in sorted(batches.items()):
            u = torch.as_tensor(u, dtype=torch.long)
            r = torch.searchsorted(users, u)
            items = torch.stack([torch.as_tensor(pos, dtype=torch.long), torch.as_tensor(neg, dtype=torch.long)], 1)
            scores = model.score_rows(self.ctx, enc, s, r, items, cfg.bpr_scores == "logit")
            per_domain.append(bpr_loss(scores[:, 0], scores[:, 1]))
        l_f = total_prediction_loss(per_domain)
        reg = model.l2()
        report["L_f"] = float(l_f.detach())
        report["reg"] = float(cfg.l2 * reg.detach())
        for name, value in report.items():
            if not math.isfinite(value):
                raise TrainingError(f"non-finite {name} at step {self.steps}")
        objective = objective + l_f + cfg.l2 * reg

        self.min_opt.zero_grad()
        objective.backward()
        self.min_opt.step()
        for opt in (self.psi_opt, self.phi_opt):
            if opt is not None:
                opt.zero_grad()
        self.steps += 1
        report["objective"] = float(objective.detach())
        return report


def min_side_objective(model: MSDCR, ctx: InteractionContext, batches: dict[int, tuple],
                       l2: float = 0.0, adaptation_sign: float = -1.0, logits: bool = True) -> torch.Tensor:
    """The quantity the min-side step descends, evaluated with gradients enabled."""
    users = Trainer._batch_users(batches)
    enc = model.encode(ctx, users)
    rows, doms = torch.nonzero(~enc.empty, as_tuple=True)
    total = torch.zeros((), dtype=model.dtype)
    if model.separator is not None and len(doms):
        total = total + separation_loss(enc.raw[rows, doms], doms, model.separator) / len(doms)
    if model.adaptor is not None and len(doms):
        total = total + adaptation_sign * adaptation_loss(enc.invariant[rows, doms], doms, model.adaptor) / len(doms)
    losses = []
    for s, (u, pos, neg) in sorted(batches.items()):
        u = torch.as_tensor(u, dtype=torch.long)
        r = torch.searchsorted(users, u)
        items = torch.stack([torch.as_tensor(pos, dtype=torch.long), torch.as_tensor(neg, dtype=torch.long)], 1)
        scores = model.score_rows(ctx, enc, s, r, items, logits)
        losses.append(bpr_loss(scores[:, 0], scores[:, 1]))
    return total + total_prediction_loss(losses) + l2 * model.l2()


# ---------------------------------------------------------------------------
# fit


@dataclass
class FitResult:
    model: FittedModel | SingleTargetModel
    trace: list[dict] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0


def _epoch_batches(split: SplitScenario, config: TrainConfig, epoch: int):
    """Round-robin list of {domain: (users, pos, neg)} batches for one epoch."""
    per_domain = []
    for s in range(split.num_domains):
        seed = np.random.SeedSequence([config.seed, epoch, s]).generate_state(1)[0]
        t = sample_bpr_triples(split, s, config.negatives_per_positive, int(seed))
        if len(t) == 0:
            per_domain.append([])
            continue
        order = np.random.default_rng(int(seed) ^ 0x5EED).permutation(len(t))
        chunks = [order[k:k + config.batch_size] for k in range(0, len(t), config.batch_size)]
        per_domain.append([(t.users[c], t.positives[c], t.negatives[c]) for c in chunks])
    n_steps = max((len(b) for b in per_domain), default=0)
    out = []
    for k in range(n_steps):
        out.append({s: b[k % len(b)] for s, b in enumerate(per_domain) if b})
    return out


def _fit_one(split: SplitScenario, config: TrainConfig, on_step: Callable | None = None) -> FitResult:
    ctx = InteractionContext(split.train, getattr(torch, config.dtype))
    model = MSDCR(split.train.num_users, ctx.feature_dims, config)
    fitted = FittedModel(model, ctx)
    trainer = Trainer(model, ctx, config)
    trace, history = [], []
    best_score, best_state, best_epoch, stale = -1.0, copy.deepcopy(model.state_dict()), 0, 0
    for epoch in range(1, config.epochs + 1):
        for batches in _epoch_batches(split, config, epoch):
            report = trainer.step(batches)
            entry = {"step": trainer.steps, **report}
            trace.append(entry)
            if on_step is not None:
                on_step(entry)
        val = evaluation.evaluate_all(fitted, split, ks=(10,), which="validation")
        score = float(np.mean([r.metrics["NDCG@10"] for r in val]))
        history.append({"epoch": epoch, "val_ndcg10": score})
        if score > best_score:
            best_score, best_state, best_epoch, stale = score, copy.deepcopy(model.state_dict()), epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.load_state_dict(best_state)
    return FitResult(fitted, trace, history, best_epoch)


def fit(split: SplitScenario, config: TrainConfig, on_step: Callable | None = None) -> FitResult:
    """Train with early stopping on mean validation NDCG@10; returns the best-validation model."""
    config.validate()
    if not any(d.num_interactions for d in split.train.domains):
        raise ConfigError("training set is empty")
    if config.variant != "single-target":
        return _fit_one(split, config, on_step)
    members, trace, history = [], [], []
    for s in range(split.num_domains):
        sub_cfg = TrainConfig(**{**asdict(config), "variant": "full"})
        res = _fit_one(domain_subscenario(split, s), sub_cfg, on_step)
        members.append(res.model)
        trace += [{**e, "target": s + 1} for e in res.trace]
        history += [{**h, "target": s + 1} for h in res.history]
    return FitResult(SingleTargetModel(members), trace, history, 0)


def make_variant(num_users: int, feature_dims: list[int], config: TrainConfig):
    """Untrained model(s) wired for ``config.variant``."""
    if config.variant == "single-target":
        sub = TrainConfig(**{**asdict(config), "variant": "full"})
        return [MSDCR(num_users, [d_s], sub) for d_s in feature_dims]
    return MSDCR(num_users, feature_dims, config)


# ---------------------------------------------------------------------------
# persistence


def write_trace(trace: list[dict], path, header: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header if header.endswith("\n") else header + "\n")
        for e in trace:
            cells = [str(e["step"])]
            for key in ("L_ds", "L_da", "L_f", "reg"):
                cells.append(repr(e[key]) if key in e else "-")
            fh.write("\t".join(cells) + "\n")


def save_checkpoint(fitted: FittedModel | SingleTargetModel, config: TrainConfig, path, extra: dict | None = None) -> None:
    """Store every tensor as ``member::family::name`` in an .npz plus a JSON header."""
    members = fitted.members if isinstance(fitted, SingleTargetModel) else [fitted]
    arrays, layout = {}, []
    for k, m in enumerate(members):
        layout.append({"num_users": m.ctx.num_users, "feature_dims": m.model.feature_dims})
        for fam, params in m.model.families().items():
            for name, p in params:
                arrays[f"{k}::{fam}::{name}"] = p.detach().numpy().copy()
    meta = {"config": asdict(config), "members": layout, "extra": extra or {}}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["__meta__"]).decode("utf-8"))
        tensors = {k: z[k] for k in z.files if k != "__meta__"}
    return meta, tensors


def load_checkpoint(path, split: SplitScenario):
    """Rebuild the fitted model(s) from ``path``; ``split`` supplies the training histories."""
    meta, tensors = read_checkpoint(path)
    cfg_dict = meta["config"]
    cfg_dict["predictor_hidden"] = tuple(cfg_dict["predictor_hidden"])
    config = TrainConfig(**cfg_dict)
    single = config.variant == "single-target"
    sub_cfg = TrainConfig(**{**cfg_dict, "variant": "full"}) if single else config
    members = []
    for k, layout in enumerate(meta["members"]):
        sub_split = domain_subscenario(split, k) if single else split
        ctx = InteractionContext(sub_split.train, getattr(torch, config.dtype))
        if ctx.feature_dims != layout["feature_dims"] or ctx.num_users != layout["num_users"]:
            raise ConfigError("checkpoint does not match the scenario it is loaded against")
        model = MSDCR(layout["num_users"], layout["feature_dims"], sub_cfg)
        with torch.no_grad():
            for fam, params in model.families().items():
                for name, p in params:
                    p.copy_(torch.from_numpy(tensors[f"{k}::{fam}::{name}"]))
        members.append(FittedModel(model, ctx))
    fitted = SingleTargetModel(members) if single else members[0]
    return fitted, config, meta.get("extra", {})
