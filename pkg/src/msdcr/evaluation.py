"""Leave-one-out ranking metrics, evaluation runs and sparsity sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .data import SplitScenario, remove_training_fraction

DEFAULT_KS = (5, 10)


class Scorer(Protocol):
    num_domains: int

    def score(self, domain: int, users, items) -> np.ndarray: ...


@dataclass
class RankedList:
    """Candidates for one user; ``scores[0]`` belongs to the held-out positive."""

    candidates: np.ndarray
    scores: np.ndarray

    @property
    def rank(self) -> int:
        return positive_rank(self.scores[0], self.scores[1:])


def positive_rank(pos_score: float, neg_scores) -> int:
    """1-based rank of the positive; negatives scoring equal to it are ranked first."""
    return 1 + int(np.count_nonzero(np.asarray(neg_scores) >= pos_score))


def _ranks(lists) -> np.ndarray:
    return np.asarray([r.rank if isinstance(r, RankedList) else r for r in lists], dtype=np.int64)


def hit_ratio_at_k(lists, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _ranks(lists)
    return float(np.mean(ranks <= k)) if len(ranks) else 0.0


def ndcg_at_k(lists, k: int) -> float:
    """Single-relevant-item NDCG: 1/log2(rank + 1) inside the top k, else 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _ranks(lists)
    if not len(ranks):
        return 0.0
    gains = np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)
    return float(gains.mean())


@dataclass
class EvalResult:
    domain: int  # 1-based
    metrics: dict[str, float]
    num_users: int
    skipped: int = 0
    seed: int = 0
    config: dict = field(default_factory=dict)


def batch_ranks(pos_scores: np.ndarray, neg_scores: np.ndarray) -> np.ndarray:
    return 1 + np.count_nonzero(neg_scores >= pos_scores[:, None], axis=1)


def evaluate(model: Scorer, split: SplitScenario, domain: int, ks: Sequence[int] = DEFAULT_KS,
             which: str = "test", seed: int = 0, config: dict | None = None,
             chunk: int = 256) -> EvalResult:
    """Rank every qualifying user's held-out item against their frozen negatives.

    ``domain`` is a 0-based index; the result reports it 1-based.
    """
    held = (split.test if which == "test" else split.validation)[domain]
    negatives = split.eval_negatives[domain]
    users = [u for u in sorted(held) if u in negatives]
    skipped = len(held) - len(users)
    ranks = []
    for start in range(0, len(users), chunk):
        block = users[start:start + chunk]
        cands = np.stack([np.concatenate([[held[u]], negatives[u]]) for u in block])
        scores = model.score(domain, np.asarray(block), cands)
        ranks.append(batch_ranks(scores[:, 0], scores[:, 1:]))
    ranks = np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64)
    metrics = {}
    for k in ks:
        metrics[f"HR@{k}"] = hit_ratio_at_k(ranks, k)
        metrics[f"NDCG@{k}"] = ndcg_at_k(ranks, k)
    return EvalResult(domain + 1, metrics, len(users), skipped, seed, dict(config or {}))


def evaluate_all(model: Scorer, split: SplitScenario, ks: Sequence[int] = DEFAULT_KS, which: str = "test",
                 seed: int = 0, config: dict | None = None) -> list[EvalResult]:
    return [evaluate(model, split, s, ks, which, seed, config) for s in range(split.num_domains)]


def mean_metric(results: Iterable[EvalResult], key: str = "NDCG@10") -> float:
    return float(np.mean([r.metrics[key] for r in results]))


# ---------------------------------------------------------------------------
# reports


def format_report(results: Sequence[EvalResult], header: dict | None = None) -> str:
    """Key-value records followed by a ``domain<TAB>metric<TAB>k<TAB>value`` table."""
    lines = [f"# {k}={v}" for k, v in (header or {}).items()]
    for r in results:
        lines.append(f"domain={r.domain} users={r.num_users} skipped={r.skipped} seed={r.seed}")
        for name, value in r.metrics.items():
            lines.append(f"domain={r.domain} {name}={value!r}")
    lines.append("domain\tmetric\tk\tvalue")
    for r in results:
        for name, value in r.metrics.items():
            metric, k = name.split("@")
            lines.append(f"{r.domain}\t{metric}\t{k}\t{value!r}")
    return "\n".join(lines) + "\n"


def parse_report_table(text: str) -> list[tuple[int, str, int, float]]:
    rows, in_table = [], False
    for line in text.splitlines():
        if line == "domain\tmetric\tk\tvalue":
            in_table = True
            continue
        if in_table and line.strip():
            d, m, k, v = line.split("\t")
            rows.append((int(d), m, int(k), float(v)))
    return rows


# ---------------------------------------------------------------------------
# sparsity sweep


@dataclass
class SweepResult:
    rows: list[dict]  # rho, seed, domain, metric, value
    summary: list[dict]  # rho, domain, metric, mean, std

    def plot_data(self) -> str:
        lines = ["rho\tdomain\tmetric\tmean\tstddev"]
        for s in self.summary:
            lines.append(f"{s['rho']}\t{s['domain']}\t{s['metric']}\t{s['mean']!r}\t{s['std']!r}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        lines = ["rho\tseed\tdomain\tmetric\tvalue"]
        for r in self.rows:
            lines.append(f"{r['rho']}\t{r['seed']}\t{r['domain']}\t{r['metric']}\t{r['value']!r}")
        return "\n".join(lines) + "\n"

    def mean_over_domains(self, rho: float, metric: str = "NDCG@10") -> tuple[float, float]:
        """Mean and std over seeds of the domain-averaged metric at one removal level."""
        per_seed: dict[int, list[float]] = {}
        for r in self.rows:
            if r["rho"] == rho and r["metric"] == metric:
                per_seed.setdefault(r["seed"], []).append(r["value"])
        vals = np.array([np.mean(v) for v in per_seed.values()])
        return float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0


def sparsity_sweep(split: SplitScenario, config, fractions: Sequence[float], seeds: Sequence[int],
                   ks: Sequence[int] = DEFAULT_KS) -> SweepResult:
    """Retrain per (removal fraction, seed) and evaluate on the untouched test items."""
    from dataclasses import asdict, replace

    from .training import fit

    rows = []
    for rho in fractions:
        for seed in seeds:
            reduced = remove_training_fraction(split, rho, seed) if rho > 0 else split
            cfg = replace(config, seed=int(seed))
            result = fit(reduced, cfg)
            for r in evaluate_all(result.model, reduced, ks, "test", seed, asdict(cfg)):
                for metric, value in r.metrics.items():
                    rows.append({"rho": rho, "seed": seed, "domain": r.domain, "metric": metric, "value": value})
    summary = []
    keys = sorted({(r["rho"], r["domain"], r["metric"]) for r in rows})
    for rho, dom, metric in keys:
        vals = np.array([r["value"] for r in rows if (r["rho"], r["domain"], r["metric"]) == (rho, dom, metric)])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        summary.append({"rho": rho, "domain": dom, "metric": metric, "mean": float(vals.mean()), "std": std})
    return SweepResult(rows, summary)


def pooled_std(stds: Sequence[float]) -> float:
    """Root mean square of equal-size group standard deviations."""
    return math.sqrt(float(np.mean(np.square(stds))))
