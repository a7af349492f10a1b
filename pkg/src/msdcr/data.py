"""Multi-domain implicit-feedback datasets.

Users are shared by every domain and stored as dense 0-based indices; the
original string ids are kept on the scenario for writing files back out.
Items are 0-based indices into each domain's feature matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyOverlapError,
    IntegrityError,
    ParseError,
    ProtocolError,
)

logger = logging.getLogger(__name__)

ONE_HOT = "one-hot"
MULTI_HOT = "multi-hot"


def round_half_up(x) -> int:
    return int(Decimal(str(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class FeatureField:
    name: str
    cardinality: int
    encoding: str


@dataclass(frozen=True)
class FeatureSchema:
    fields: tuple[FeatureField, ...]

    def __post_init__(self):
        if not self.fields:
            raise IntegrityError("schema has no fields")
        for f in self.fields:
            if f.cardinality < 1:
                raise IntegrityError(f"field {f.name!r} has cardinality {f.cardinality}")
            if f.encoding not in (ONE_HOT, MULTI_HOT):
                raise IntegrityError(f"field {f.name!r} has unknown encoding {f.encoding!r}")

    @property
    def total_dim(self) -> int:
        return sum(f.cardinality for f in self.fields)

    def offsets(self) -> dict[str, int]:
        out, pos = {}, 0
        for f in self.fields:
            out[f.name] = pos
            pos += f.cardinality
        return out

    def encode(self, values: dict[str, Sequence[int]]) -> np.ndarray:
        """Build the 0/1 feature vector from per-field value indices."""
        x = np.zeros(self.total_dim)
        offsets = self.offsets()
        known = {f.name: f for f in self.fields}
        for name in values:
            if name not in known:
                raise IntegrityError(f"unknown feature field {name!r}")
        for f in self.fields:
            vals = list(values.get(f.name, ()))
            if f.encoding == ONE_HOT and len(vals) != 1:
                raise IntegrityError(f"one-hot field {f.name!r} needs exactly one value, got {len(vals)}")
            for v in vals:
                if not 0 <= v < f.cardinality:
                    raise IntegrityError(f"value {v} out of range for field {f.name!r}")
                x[offsets[f.name] + v] = 1.0
        return x

    def check_vector(self, x: np.ndarray) -> None:
        if x.shape != (self.total_dim,):
            raise IntegrityError(f"feature vector has width {x.shape[-1]}, schema needs {self.total_dim}")
        offsets = self.offsets()
        for f in self.fields:
            block = x[offsets[f.name]:offsets[f.name] + f.cardinality]
            if not np.all((block == 0) | (block == 1)):
                raise IntegrityError(f"field {f.name!r} is not binary")
            if f.encoding == ONE_HOT and block.sum() != 1:
                raise IntegrityError(f"one-hot field {f.name!r} has {int(block.sum())} active entries")


@dataclass
class DomainDataset:
    domain_id: int
    schema: FeatureSchema
    item_ids: list[str]
    features: np.ndarray  # (num_items, d_s)
    interactions: dict[int, list[int]]  # user index -> item indices

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def num_interactions(self) -> int:
        return sum(len(v) for v in self.interactions.values())

    def validate(self) -> None:
        if self.features.shape != (self.num_items, self.schema.total_dim):
            raise IntegrityError(
                f"domain {self.domain_id}: feature matrix {self.features.shape} does not match "
                f"{self.num_items} items x {self.schema.total_dim} dims"
            )
        for x in self.features:
            self.schema.check_vector(x)
        for u, items in self.interactions.items():
            if len(set(items)) != len(items):
                raise IntegrityError(f"domain {self.domain_id}: duplicate items for user {u}")
            for i in items:
                if not 0 <= i < self.num_items:
                    raise IntegrityError(f"domain {self.domain_id}: unknown item index {i}")


@dataclass
class GroundTruth:
    """Generating parameters of a synthetic scenario."""

    aspect_vectors: np.ndarray  # (num_users, S, num_aspects)
    item_aspects: list[np.ndarray]  # per domain, (num_items,)
    sharpness: float

    def relevance(self, user: int, domain_index: int) -> np.ndarray:
        return self.aspect_vectors[user, domain_index][self.item_aspects[domain_index]]


@dataclass
class MultiDomainScenario:
    num_users: int
    domains: list[DomainDataset]
    user_ids: list[str] = field(default_factory=list)
    ground_truth: GroundTruth | None = None

    def __post_init__(self):
        if not self.user_ids:
            self.user_ids = [str(u + 1) for u in range(self.num_users)]

    @property
    def num_domains(self) -> int:
        return len(self.domains)

    def validate(self, min_domains: int = 2) -> None:
        if self.num_domains < min_domains:
            raise IntegrityError(f"scenario needs at least {min_domains} domains, has {self.num_domains}")
        for d in self.domains:
            d.validate()
            for u in d.interactions:
                if not 0 <= u < self.num_users:
                    raise IntegrityError(f"domain {d.domain_id}: user index {u} outside [0, {self.num_users})")


@dataclass
class SplitScenario:
    train: MultiDomainScenario
    validation: list[dict[int, int]]
    test: list[dict[int, int]]
    eval_negatives: list[dict[int, np.ndarray]]

    @property
    def num_domains(self) -> int:
        return self.train.num_domains

    def full_items(self, domain_index: int, user: int) -> set[int]:
        items = set(self.train.domains[domain_index].interactions.get(user, ()))
        for held in (self.validation[domain_index], self.test[domain_index]):
            if user in held:
                items.add(held[user])
        return items


class TrainingTriple(NamedTuple):
    user: int
    positive: int
    negative: int
    domain: int


@dataclass
class Triples:
    """Column-stored BPR triples for one domain."""

    domain: int
    users: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self) -> Iterator[TrainingTriple]:
        for u, p, n in zip(self.users, self.positives, self.negatives):
            yield TrainingTriple(int(u), int(p), int(n), self.domain)


# ---------------------------------------------------------------------------
# file formats


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, line


def read_schema(path) -> FeatureSchema:
    out = []
    for line_no, line in _content_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(path, line_no, "expected name<TAB>cardinality<TAB>encoding")
        name, card, enc = (p.strip() for p in parts)
        try:
            card = int(card)
        except ValueError:
            raise ParseError(path, line_no, f"cardinality {card!r} is not an integer") from None
        if enc not in (ONE_HOT, MULTI_HOT):
            raise ParseError(path, line_no, f"encoding must be one-hot or multi-hot, got {enc!r}")
        if card < 1:
            raise ParseError(path, line_no, "cardinality must be >= 1")
        out.append(FeatureField(name, card, enc))
    if not out:
        raise ParseError(path, 0, "schema file is empty")
    return FeatureSchema(tuple(out))


def write_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in schema.fields:
            fh.write(f"{f.name}\t{f.cardinality}\t{f.encoding}\n")


def read_items(path, schema: FeatureSchema) -> tuple[list[str], np.ndarray]:
    ids, rows, seen = [], [], set()
    for line_no, line in _content_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(path, line_no, "expected item_id<TAB>features")
        item_id, spec = parts[0].strip(), parts[1].strip()
        if item_id in seen:
            raise ParseError(path, line_no, f"duplicate item id {item_id!r}")
        values = {}
        for chunk in filter(None, spec.split(";")):
            if "=" not in chunk:
                raise ParseError(path, line_no, f"malformed feature {chunk!r}")
            name, vals = chunk.split("=", 1)
            try:
                values[name.strip()] = [int(v) for v in vals.split(",") if v.strip()]
            except ValueError:
                raise ParseError(path, line_no, f"non-integer value in {chunk!r}") from None
        try:
            rows.append(schema.encode(values))
        except IntegrityError as exc:
            raise IntegrityError(f"{path}:{line_no}: {exc}") from None
        ids.append(item_id)
        seen.add(item_id)
    features = np.vstack(rows) if rows else np.zeros((0, schema.total_dim))
    return ids, features


def write_items(dataset: DomainDataset, path) -> None:
    offsets = dataset.schema.offsets()
    with open(path, "w", encoding="utf-8") as fh:
        for item_id, x in zip(dataset.item_ids, dataset.features):
            chunks = []
            for f in dataset.schema.fields:
                block = x[offsets[f.name]:offsets[f.name] + f.cardinality]
                active = np.flatnonzero(block)
                chunks.append(f"{f.name}=" + ",".join(str(v) for v in active))
            fh.write(f"{item_id}\t{';'.join(chunks)}\n")


def read_interactions(path) -> list[tuple[str, str]]:
    pairs = []
    for line_no, line in _content_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(path, line_no, "expected user_id<TAB>item_id")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return pairs


def write_interactions(scenario: MultiDomainScenario, domain_index: int, path) -> None:
    d = scenario.domains[domain_index]
    with open(path, "w", encoding="utf-8") as fh:
        for u in sorted(d.interactions):
            for i in d.interactions[u]:
                fh.write(f"{scenario.user_ids[u]}\t{d.item_ids[i]}\n")


def _id_key(s: str):
    return (0, int(s), "") if s.lstrip("-").isdigit() else (1, 0, s)


def load_scenario(interaction_paths, item_paths, schemas) -> MultiDomainScenario:
    """Read per-domain files into a scenario restricted to users common to all domains.

    ``schemas`` may hold FeatureSchema objects or schema file paths.
    """
    if not (len(interaction_paths) == len(item_paths) == len(schemas)):
        raise ConfigError("need the same number of interaction files, item files and schemas")
    schemas = [s if isinstance(s, FeatureSchema) else read_schema(s) for s in schemas]
    raw = []
    for inter_path, item_path, schema in zip(interaction_paths, item_paths, schemas):
        item_ids, features = read_items(item_path, schema)
        index = {iid: k for k, iid in enumerate(item_ids)}
        per_user: dict[str, list[int]] = {}
        for user_id, item_id in read_interactions(inter_path):
            if item_id not in index:
                raise IntegrityError(f"{inter_path}: interaction references unknown item {item_id!r}")
            items = per_user.setdefault(user_id, [])
            k = index[item_id]
            if k not in items:
                items.append(k)
        raw.append((schema, item_ids, features, per_user))

    common = set(raw[0][3])
    for r in raw[1:]:
        common &= set(r[3])
    if not common:
        raise EmptyOverlapError("no user appears in every domain")
    user_ids = sorted(common, key=_id_key)
    uindex = {uid: k for k, uid in enumerate(user_ids)}

    domains = []
    for s, (schema, item_ids, features, per_user) in enumerate(raw, 1):
        inter = {uindex[uid]: items for uid, items in per_user.items() if uid in uindex}
        domains.append(DomainDataset(s, schema, item_ids, features, dict(sorted(inter.items()))))
    scenario = MultiDomainScenario(len(user_ids), domains, user_ids)
    scenario.validate(min_domains=2)
    return scenario


def save_scenario(scenario: MultiDomainScenario, directory) -> list[dict[str, Path]]:
    """Write every domain as interaction/item/schema files; returns the paths per domain."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for k, d in enumerate(scenario.domains):
        paths = {
            "interactions": directory / f"domain{d.domain_id}.interactions.tsv",
            "items": directory / f"domain{d.domain_id}.items.tsv",
            "schema": directory / f"domain{d.domain_id}.schema.tsv",
        }
        write_interactions(scenario, k, paths["interactions"])
        write_items(d, paths["items"])
        write_schema(d.schema, paths["schema"])
        out.append(paths)
    return out


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass
class SyntheticConfig:
    num_users: int = 150
    num_domains: int = 3
    items_per_domain: tuple[int, ...] = (1000, 1000, 1000)
    num_aspects: int = 8
    shared_fraction: float = 0.3
    complementary_fraction: float = 0.5
    sparsity: tuple[float, ...] = (0.005, 0.005, 0.005)
    noise_rate: float = 0.0
    sharpness: float = 3.0
    tag_cardinality: int = 8
    schemas: tuple[FeatureSchema, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.items_per_domain, int):
            self.items_per_domain = (self.items_per_domain,) * self.num_domains
        if isinstance(self.sparsity, (int, float)):
            self.sparsity = (float(self.sparsity),) * self.num_domains
        self.items_per_domain = tuple(int(v) for v in self.items_per_domain)
        self.sparsity = tuple(float(v) for v in self.sparsity)

    def validate(self) -> None:
        S = self.num_domains
        if self.num_users < 1 or S < 1 or self.num_aspects < 1:
            raise ConfigError("num_users, num_domains and num_aspects must be positive")
        if len(self.items_per_domain) != S or len(self.sparsity) != S:
            raise ConfigError("items_per_domain and sparsity need one entry per domain")
        if self.schemas is not None and len(self.schemas) != S:
            raise ConfigError("schemas need one entry per domain")
        for name in ("shared_fraction", "complementary_fraction", "noise_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")
        if self.shared_fraction + self.complementary_fraction > 1.0 + 1e-12:
            raise ConfigError("shared_fraction + complementary_fraction exceeds 1")
        for s, (n_items, rho) in enumerate(zip(self.items_per_domain, self.sparsity), 1):
            if n_items < 1:
                raise ConfigError(f"domain {s}: item count must be positive")
            if not 0.0 < rho <= 1.0:
                raise ConfigError(f"domain {s}: target sparsity {rho} outside (0, 1]")
            total = round_half_up(Decimal(str(rho)) * self.num_users * n_items)
            if total > self.num_users * n_items:
                raise ConfigError(f"domain {s}: {total} interactions do not fit {self.num_users}x{n_items} pairs")


_LIST_FIELDS = {"items_per_domain": int, "sparsity": float}


def parse_synthetic_config(mapping: dict[str, str]) -> SyntheticConfig:
    """Build a SyntheticConfig from string key/value pairs (schemas are not file-configurable)."""
    known = {f.name: f for f in fields(SyntheticConfig) if f.name != "schemas"}
    kwargs = {}
    for key, value in mapping.items():
        if key not in known:
            raise ConfigError(f"unknown synthetic config key {key!r}")
        if key in _LIST_FIELDS:
            kwargs[key] = tuple(_LIST_FIELDS[key](v) for v in value.split(",") if v.strip())
        elif key in ("num_users", "num_domains", "num_aspects", "tag_cardinality", "seed"):
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    try:
        cfg = SyntheticConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    # single-value lists broadcast across domains
    S = cfg.num_domains
    if len(cfg.items_per_domain) == 1 and S > 1:
        cfg.items_per_domain = cfg.items_per_domain * S
    if len(cfg.sparsity) == 1 and S > 1:
        cfg.sparsity = cfg.sparsity * S
    return cfg


def read_synthetic_config(path) -> SyntheticConfig:
    mapping = {}
    for line_no, line in _content_lines(path):
        if "=" not in line:
            raise ParseError(path, line_no, "expected key = value")
        k, v = line.split("=", 1)
        mapping[k.strip()] = v.strip()
    return parse_synthetic_config(mapping)


def default_schema(num_aspects: int, tag_cardinality: int) -> FeatureSchema:
    return FeatureSchema((
        FeatureField("aspect", num_aspects, ONE_HOT),
        FeatureField("tag", tag_cardinality, MULTI_HOT),
        FeatureField("level", 4, ONE_HOT),
    ))


def _aspect_field(schema: FeatureSchema, num_aspects: int) -> FeatureField:
    for f in schema.fields:
        if f.encoding == ONE_HOT and f.cardinality == num_aspects:
            return f
    raise ConfigError(f"schema has no one-hot field of cardinality {num_aspects} to carry the item aspect")


def generate_synthetic(config: SyntheticConfig) -> MultiDomainScenario:
    """Sample a scenario whose users carry shared, complementary and domain-specific tastes.

    Each user's aspect vector in domain s mixes three standard-normal blocks:
    a shared block identical everywhere, a complementary block that is the
    same per-user vector seen through a domain-specific permutation of the
    aspects (so the taste transfers but lands on different aspects), and a
    block private to the domain. Interactions are drawn without replacement
    with probability proportional to exp(sharpness * relevance), blended with
    a uniform draw at ``noise_rate``.
    """
    config.validate()
    S, N, K = config.num_domains, config.num_users, config.num_aspects
    root = np.random.SeedSequence(config.seed)
    rng_users, *rng_domains = (np.random.default_rng(s) for s in root.spawn(S + 1))

    shared = rng_users.standard_normal((N, K))
    comp = rng_users.standard_normal((N, K))
    f_sh, f_c = config.shared_fraction, config.complementary_fraction
    f_sp = max(0.0, 1.0 - f_sh - f_c)

    aspect_vectors = np.zeros((N, S, K))
    item_aspects, domains = [], []
    for k in range(S):
        rng = rng_domains[k]
        perm = np.arange(K) if k == 0 else rng.permutation(K)
        specific = rng.standard_normal((N, K))
        theta = f_sh * shared + f_c * comp[:, perm] + f_sp * specific
        aspect_vectors[:, k] = theta

        n_items = config.items_per_domain[k]
        schema = config.schemas[k] if config.schemas is not None else default_schema(K, config.tag_cardinality)
        carrier = _aspect_field(schema, K)
        aspects = rng.permutation(np.arange(n_items) % K)
        slot = rng.permutation(K)  # feature slot of each aspect differs per domain
        features = np.zeros((n_items, schema.total_dim))
        offsets = schema.offsets()
        for f in schema.fields:
            base = offsets[f.name]
            if f is carrier:
                features[np.arange(n_items), base + slot[aspects]] = 1.0
            elif f.encoding == ONE_HOT:
                features[np.arange(n_items), base + rng.integers(0, f.cardinality, n_items)] = 1.0
            else:
                features[:, base:base + f.cardinality] = rng.random((n_items, f.cardinality)) < 1.0 / max(f.cardinality, 4)

        total = round_half_up(Decimal(str(config.sparsity[k])) * N * n_items)
        counts = np.full(N, total // N)
        counts[rng.permutation(N)[: total - counts.sum()]] += 1
        interactions = {}
        for u in range(N):
            n_u = int(counts[u])
            if n_u == 0:
                continue
            logits = config.sharpness * theta[u][aspects]
            p = np.exp(logits - logits.max())
            p /= p.sum()
            p = (1.0 - config.noise_rate) * p + config.noise_rate / n_items
            interactions[u] = [int(i) for i in rng.choice(n_items, size=n_u, replace=False, p=p)]
        item_aspects.append(aspects)
        domains.append(DomainDataset(k + 1, schema, [str(i + 1) for i in range(n_items)], features, interactions))

    truth = GroundTruth(aspect_vectors, item_aspects, config.sharpness)
    return MultiDomainScenario(N, domains, ground_truth=truth)


# ---------------------------------------------------------------------------
# statistics, splitting and sampling


def compute_sparsity(dataset: DomainDataset, num_users: int) -> float:
    """Observed interactions over all user-item pairs."""
    if num_users <= 0 or dataset.num_items <= 0:
        raise ValueError("num_users and item count must be positive")
    return dataset.num_interactions / (num_users * dataset.num_items)


def split_leave_one_out(scenario: MultiDomainScenario, seed: int, num_negatives: int = 99,
                        min_interactions: int = 3) -> SplitScenario:
    """Hold out one validation and one test item per qualifying user and domain.

    Users with fewer than ``min_interactions`` interactions in a domain keep
    all of them for training and are not evaluated there.
    """
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(scenario.num_domains)]
    train_domains, val, test, negs = [], [], [], []
    for d, rng in zip(scenario.domains, streams):
        if d.num_items < num_negatives + 1:
            raise ProtocolError(
                f"domain {d.domain_id} has {d.num_items} items; cannot sample {num_negatives} negatives"
            )
        train_inter, v_map, t_map, n_map = {}, {}, {}, {}
        for u in sorted(d.interactions):
            items = d.interactions[u]
            if len(items) >= min_interactions:
                t_pos, v_pos = rng.choice(len(items), size=2, replace=False)
                t_map[u], v_map[u] = items[t_pos], items[v_pos]
                train_inter[u] = [i for k, i in enumerate(items) if k not in (t_pos, v_pos)]
                candidates = np.setdiff1d(np.arange(d.num_items), np.asarray(items))
                if len(candidates) < num_negatives:
                    raise ProtocolError(f"domain {d.domain_id}: user {u} leaves fewer than {num_negatives} negatives")
                n_map[u] = rng.choice(candidates, size=num_negatives, replace=False)
            else:
                train_inter[u] = list(items)
        train_domains.append(DomainDataset(d.domain_id, d.schema, d.item_ids, d.features, train_inter))
        val.append(v_map)
        test.append(t_map)
        negs.append(n_map)
    train = MultiDomainScenario(scenario.num_users, train_domains, scenario.user_ids, scenario.ground_truth)
    return SplitScenario(train, val, test, negs)


def sample_bpr_triples(split: SplitScenario, domain_index: int, negatives_per_positive: int = 1,
                       seed: int = 0) -> Triples:
    """Pair every training positive with uniformly drawn never-interacted items."""
    if negatives_per_positive < 1:
        raise ValueError("negatives_per_positive must be >= 1")
    rng = np.random.default_rng(seed)
    d = split.train.domains[domain_index]
    users, pos, neg = [], [], []
    for u in sorted(d.interactions):
        positives = d.interactions[u]
        if not positives:
            continue
        seen = split.full_items(domain_index, u)
        if len(seen) >= d.num_items:
            logger.warning("domain %d: user %d interacted with the whole catalog; skipped", d.domain_id, u)
            continue
        draws = []
        need = len(positives) * negatives_per_positive
        while len(draws) < need:
            cand = rng.integers(0, d.num_items, size=2 * (need - len(draws)) + 4)
            draws.extend(int(c) for c in cand if c not in seen)
        draws = draws[:need]
        for k, p in enumerate(positives):
            for j in range(negatives_per_positive):
                users.append(u)
                pos.append(p)
                neg.append(draws[k * negatives_per_positive + j])
    return Triples(
        domain_index,
        np.asarray(users, dtype=np.int64),
        np.asarray(pos, dtype=np.int64),
        np.asarray(neg, dtype=np.int64),
    )


def remove_training_fraction(split: SplitScenario, fraction: float, seed: int) -> SplitScenario:
    """Drop ``fraction`` of each domain's training interactions uniformly at random.

    Held-out items and evaluation negatives are untouched.
    """
    if not 0.0 <= fraction <= 0.9:
        raise ConfigError(f"removal fraction {fraction} outside [0, 0.9]")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence([seed, 7919]).spawn(split.num_domains)]
    domains = []
    for d, rng in zip(split.train.domains, streams):
        pairs = [(u, i) for u in sorted(d.interactions) for i in d.interactions[u]]
        n_drop = round_half_up(Decimal(str(fraction)) * len(pairs))
        drop = set(rng.choice(len(pairs), size=n_drop, replace=False).tolist()) if n_drop else set()
        kept: dict[int, list[int]] = {u: [] for u in d.interactions}
        for k, (u, i) in enumerate(pairs):
            if k not in drop:
                kept[u].append(i)
        domains.append(DomainDataset(d.domain_id, d.schema, d.item_ids, d.features, kept))
    train = MultiDomainScenario(split.train.num_users, domains, split.train.user_ids, split.train.ground_truth)
    return SplitScenario(train, split.validation, split.test, split.eval_negatives)


def domain_subscenario(split: SplitScenario, domain_index: int) -> SplitScenario:
    """A one-domain split containing only ``domain_index`` (used for single-target training)."""
    t = split.train
    train = MultiDomainScenario(t.num_users, [t.domains[domain_index]], t.user_ids, None)
    return SplitScenario(
        train,
        [split.validation[domain_index]],
        [split.test[domain_index]],
        [split.eval_negatives[domain_index]],
    )


def sparsity_percent(ratio: float, digits: int = 3) -> float:
    """Sparsity as a percentage rounded half up to ``digits`` decimals."""
    q = Decimal(1).scaleb(-digits)
    return float((Decimal(repr(ratio)) * 100).quantize(q, rounding=ROUND_HALF_UP))

