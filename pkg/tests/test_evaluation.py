import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msdcr import evaluation as ev


def scan_rank(pos, negs):
    """Sort candidates by score, positive placed after any equal-scoring negative."""
    order = sorted([(s, 1) for s in negs] + [(pos, 0)], key=lambda t: (-t[0], -t[1]))
    for idx, (_, is_neg) in enumerate(order, 1):
        if not is_neg:
            return idx


def brute_hr(lists, k):
    return sum(1 for pos, negs in lists if scan_rank(pos, negs) <= k) / len(lists)


def brute_ndcg(lists, k):
    total = 0.0
    for pos, negs in lists:
        r = scan_rank(pos, negs)
        if r <= k:
            total += 1.0 / math.log2(r + 1)
    return total / len(lists)


def test_metrics_match_sort_and_scan():
    rng = np.random.default_rng(0)
    lists, ranked = [], []
    for _ in range(1000):
        n = int(rng.integers(1, 100))
        # coarse scores so ties occur often
        scores = rng.integers(0, 12, size=n + 1).astype(float)
        lists.append((scores[0], list(scores[1:])))
        ranked.append(ev.RankedList(np.arange(n + 1), scores))
    for k in (1, 5, 10, 20):
        assert ev.hit_ratio_at_k(ranked, k) == brute_hr(lists, k)
        assert ev.ndcg_at_k(ranked, k) == pytest.approx(brute_ndcg(lists, k), abs=0, rel=1e-14)


def test_rank_three_ndcg_half():
    assert ev.ndcg_at_k([3], 5) == 0.5
    assert ev.hit_ratio_at_k([3], 5) == 1.0
    assert ev.ndcg_at_k([6], 5) == 0.0


def test_ties_count_against_the_positive():
    assert ev.positive_rank(1.0, [1.0, 1.0, 0.5]) == 3
    assert ev.positive_rank(1.0, [0.2, 0.5]) == 1


def test_random_scorer_hit_ratio():
    rng = np.random.default_rng(1)
    scores = rng.random((10_000, 100))
    ranks = ev.batch_ranks(scores[:, 0], scores[:, 1:])
    assert abs(ev.hit_ratio_at_k(ranks, 10) - 0.100) <= 0.01


def test_bad_cutoff():
    with pytest.raises(ValueError):
        ev.ndcg_at_k([1], 0)


@given(st.lists(st.integers(1, 100), min_size=1, max_size=50), st.integers(1, 20))
@settings(max_examples=100, deadline=None)
def test_metric_bounds(ranks, k):
    hr, ndcg = ev.hit_ratio_at_k(ranks, k), ev.ndcg_at_k(ranks, k)
    assert 0.0 <= ndcg <= hr <= 1.0
    assert ev.hit_ratio_at_k(ranks, k + 1) >= hr


class OracleScorer:
    """Scores the held-out test item highest and everything else by item index."""

    def __init__(self, split):
        self.split = split
        self.num_domains = split.num_domains

    def score(self, domain, users, items):
        out = -np.asarray(items, dtype=float)
        for r, u in enumerate(users):
            out[r, items[r] == self.split.test[domain][u]] = 1.0
        return out


def test_evaluate_perfect_scorer(small_split):
    results = ev.evaluate_all(OracleScorer(small_split), small_split)
    for r in results:
        assert r.metrics == {"HR@5": 1.0, "NDCG@5": 1.0, "HR@10": 1.0, "NDCG@10": 1.0}
        assert r.num_users == len(small_split.test[r.domain - 1])
    assert [r.domain for r in results] == [1, 2]


def test_report_round_trip(small_split):
    results = ev.evaluate_all(OracleScorer(small_split), small_split, ks=(1, 10))
    text = ev.format_report(results, {"config_hash": "abc", "seed": 3})
    assert text.startswith("# config_hash=abc\n# seed=3\n")
    rows = ev.parse_report_table(text)
    assert len(rows) == 2 * 4
    assert {(d, m) for d, m, _, _ in rows} == {(d, m) for d in (1, 2) for m in ("HR", "NDCG")}
    assert ev.format_report(results) == ev.format_report(results)


def test_pooled_std():
    assert ev.pooled_std([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))


def test_sweep_summary_tables():
    rows = [{"rho": rho, "seed": s, "domain": d, "metric": "NDCG@10", "value": rho + s + d}
            for rho in (0.0, 0.3) for s in (0, 1) for d in (1, 2)]
    summary = [{"rho": 0.0, "domain": 1, "metric": "NDCG@10", "mean": 1.5, "std": 0.7}]
    sweep = ev.SweepResult(rows, summary)
    mean, std = sweep.mean_over_domains(0.3)
    assert mean == pytest.approx(0.3 + 0.5 + 1.5)
    assert std == pytest.approx(math.sqrt(0.5))
    assert sweep.table().count("\n") == len(rows) + 1
    assert sweep.plot_data().splitlines()[0] == "rho\tdomain\tmetric\tmean\tstddev"
