from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from msdcr.data import (
    DomainDataset,
    FeatureField,
    FeatureSchema,
    MultiDomainScenario,
    SyntheticConfig,
    compute_sparsity,
    generate_synthetic,
    load_scenario,
    read_synthetic_config,
    remove_training_fraction,
    round_half_up,
    sample_bpr_triples,
    save_scenario,
    sparsity_percent,
    split_leave_one_out,
)
from msdcr.errors import ConfigError, EmptyOverlapError, IntegrityError, ParseError, ProtocolError

SCHEMA_TEXT = "genre\t3\tone-hot\ntags\t4\tmulti-hot\n"


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def two_domain_files(tmp_path):
    schema = _write(tmp_path / "schema.tsv", SCHEMA_TEXT)
    items = _write(tmp_path / "items.tsv", "a\tgenre=0;tags=1,2\nb\tgenre=1;tags=\nc\tgenre=2;tags=3\n")
    d1 = _write(tmp_path / "d1.tsv", "# header\nu1\ta\nu2\tb\nu3\tc\nu4\ta\n")
    d2 = _write(tmp_path / "d2.tsv", "u1\tb\nu2\tc\nu3\ta\nu5\tb\nu3\ta\n")
    return [d1, d2], [items, items], [schema, schema]


def test_load_keeps_only_common_users(two_domain_files):
    inter, items, schemas = two_domain_files
    sc = load_scenario(inter, items, schemas)
    assert sc.num_users == 3
    assert sc.user_ids == ["u1", "u2", "u3"]
    assert sc.num_domains == 2
    # duplicate (u3, a) in the second file collapses to one interaction
    assert sc.domains[1].interactions[2] == [0]
    assert sc.domains[0].features.shape == (3, 7)
    np.testing.assert_array_equal(sc.domains[0].features[0], [1, 0, 0, 0, 1, 1, 0])


def test_load_rejects_wrong_width(tmp_path, two_domain_files):
    inter, items, schemas = two_domain_files
    bad = _write(tmp_path / "bad.tsv", "a\tgenre=0;tags=1\nb\tgenre=5;tags=\n")
    with pytest.raises(IntegrityError):
        load_scenario(inter, [bad, items[1]], schemas)


def test_load_rejects_one_hot_with_two_values(tmp_path, two_domain_files):
    inter, items, schemas = two_domain_files
    bad = _write(tmp_path / "bad.tsv", "a\tgenre=0,1;tags=1\n")
    with pytest.raises(IntegrityError):
        load_scenario(inter, [bad, items[1]], schemas)


def test_malformed_line_reports_line_number(tmp_path, two_domain_files):
    inter, items, schemas = two_domain_files
    bad = _write(tmp_path / "bad_inter.tsv", "u1\ta\nthis line has no tab\n")
    with pytest.raises(ParseError) as exc:
        load_scenario([bad, inter[1]], items, schemas)
    assert exc.value.line_no == 2


def test_unknown_item_is_an_integrity_error(tmp_path, two_domain_files):
    inter, items, schemas = two_domain_files
    bad = _write(tmp_path / "bad_inter.tsv", "u1\tzzz\n")
    with pytest.raises(IntegrityError):
        load_scenario([bad, inter[1]], items, schemas)


def test_empty_overlap(tmp_path, two_domain_files):
    inter, items, schemas = two_domain_files
    other = _write(tmp_path / "other.tsv", "x9\ta\n")
    with pytest.raises(EmptyOverlapError):
        load_scenario([inter[0], other], items, schemas)


def test_schema_file_errors(tmp_path):
    from msdcr.data import read_schema

    with pytest.raises(ParseError):
        read_schema(_write(tmp_path / "s.tsv", "genre\t3\tsometimes-hot\n"))
    with pytest.raises(ParseError):
        read_schema(_write(tmp_path / "s2.tsv", "genre\tthree\tone-hot\n"))


def test_save_load_round_trip(tmp_path, small_scenario):
    paths = save_scenario(small_scenario, tmp_path / "sc")
    sc = load_scenario([p["interactions"] for p in paths], [p["items"] for p in paths],
                       [p["schema"] for p in paths])
    # every synthetic user has interactions in both domains
    assert sc.num_users == small_scenario.num_users
    for a, b in zip(sc.domains, small_scenario.domains):
        np.testing.assert_array_equal(a.features, b.features)
        assert {sc.user_ids[u]: sorted(v) for u, v in a.interactions.items()} == {
            small_scenario.user_ids[u]: sorted(v) for u, v in b.interactions.items()
        }


# --- synthetic generation


def test_generator_is_deterministic():
    cfg = SyntheticConfig(num_users=30, num_domains=2, items_per_domain=(200, 200), sparsity=0.02, seed=5)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    for da, db in zip(a.domains, b.domains):
        assert da.features.tobytes() == db.features.tobytes()
        assert da.interactions == db.interactions
    assert a.ground_truth.aspect_vectors.tobytes() == b.ground_truth.aspect_vectors.tobytes()


def test_target_sparsity_count():
    cfg = SyntheticConfig(num_users=100, num_domains=2, items_per_domain=(1000, 1000), sparsity=0.001, seed=1)
    sc = generate_synthetic(cfg)
    for d in sc.domains:
        # brute-force count over every emitted record
        assert sum(1 for items in d.interactions.values() for _ in items) == 100


def test_rounding_is_half_up():
    assert round_half_up(2.5) == 3
    assert round_half_up(3.5) == 4
    assert round_half_up(0.49) == 0
    cfg = SyntheticConfig(num_users=5, num_domains=2, items_per_domain=(10, 10), sparsity=0.05, seed=0)
    # 0.05 * 5 * 10 = 2.5 -> 3
    assert all(d.num_interactions == 3 for d in generate_synthetic(cfg).domains)


def test_full_sharing_gives_identical_aspect_vectors():
    cfg = SyntheticConfig(num_users=20, num_domains=3, items_per_domain=(100, 100, 100), sparsity=0.05,
                          shared_fraction=1.0, complementary_fraction=0.0, seed=2)
    gt = generate_synthetic(cfg).ground_truth
    np.testing.assert_array_equal(gt.aspect_vectors[:, 0], gt.aspect_vectors[:, 1])
    np.testing.assert_array_equal(gt.aspect_vectors[:, 0], gt.aspect_vectors[:, 2])


def test_shared_only_rankings_agree_after_aspect_mapping():
    cfg = SyntheticConfig(num_users=15, num_domains=2, items_per_domain=(120, 80), sparsity=0.05,
                          shared_fraction=1.0, complementary_fraction=0.0, noise_rate=0.0, seed=4)
    gt = generate_synthetic(cfg).ground_truth
    for u in range(cfg.num_users):
        # rank aspects by the relevance of any item that carries them
        orders = []
        for s in range(2):
            rel = gt.relevance(u, s)
            by_aspect = {int(a): rel[np.flatnonzero(gt.item_aspects[s] == a)[0]] for a in range(cfg.num_aspects)}
            orders.append(sorted(by_aspect, key=by_aspect.get))
        assert orders[0] == orders[1]


def test_item_features_carry_the_aspect(small_scenario):
    gt = small_scenario.ground_truth
    for s, d in enumerate(small_scenario.domains):
        slot = d.features[:, :4].argmax(1)
        # the slot used for an aspect is a fixed relabeling within each domain
        mapping = {}
        for a, k in zip(gt.item_aspects[s], slot):
            assert mapping.setdefault(int(a), int(k)) == int(k)


def test_infeasible_sparsity_rejected():
    with pytest.raises(ConfigError):
        SyntheticConfig(num_users=5, num_domains=2, items_per_domain=(10, 10), sparsity=1.5).validate()
    with pytest.raises(ConfigError):
        SyntheticConfig(shared_fraction=0.7, complementary_fraction=0.5).validate()


def test_synthetic_config_file(tmp_path):
    path = _write(tmp_path / "syn.cfg", "num_users = 12\nnum_domains = 2\nitems_per_domain = 110\n"
                                        "sparsity = 0.05, 0.1\nseed = 9\n")
    cfg = read_synthetic_config(path)
    assert cfg.items_per_domain == (110, 110)
    assert cfg.sparsity == (0.05, 0.1)
    assert cfg.seed == 9
    with pytest.raises(ConfigError):
        read_synthetic_config(_write(tmp_path / "bad.cfg", "colour = blue\n"))


# --- sparsity


def _dataset(n_items, pairs):
    schema = FeatureSchema((FeatureField("f", 1, "one-hot"),))
    inter = {}
    for u, i in pairs:
        inter.setdefault(u, []).append(i)
    return DomainDataset(1, schema, [str(k) for k in range(n_items)], np.ones((n_items, 1)), inter)


def test_sparsity_table_values():
    # counts only; a lightweight stand-in with the right totals
    class Stub:
        def __init__(self, n_inter, n_items):
            self.num_interactions, self.num_items = n_inter, n_items

    assert sparsity_percent(compute_sparsity(Stub(93074, 154886), 800)) == 0.075
    assert sparsity_percent(compute_sparsity(Stub(29781, 165461), 800)) == 0.022
    assert sparsity_percent(compute_sparsity(Stub(30487, 166447), 800)) == 0.023
    assert compute_sparsity(_dataset(10, []), 4) == 0.0


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_sparsity_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pairs = {(int(u), int(i)) for u, i in zip(rng.integers(0, 7, 20), rng.integers(0, 11, 20))}
    base = compute_sparsity(_dataset(11, pairs), 7)
    up, ip = rng.permutation(7), rng.permutation(11)
    permuted = compute_sparsity(_dataset(11, {(int(up[u]), int(ip[i])) for u, i in pairs}), 7)
    assert base == permuted == len(pairs) / 77


# --- splitting


def test_split_partitions_each_user(small_scenario, small_split):
    for s, d in enumerate(small_scenario.domains):
        for u, items in d.interactions.items():
            train = small_split.train.domains[s].interactions[u]
            held = [h[s][u] for h in (small_split.validation, small_split.test) if u in h[s]]
            assert sorted(train + held) == sorted(items)
            assert len(set(train) | set(held)) == len(items)


def test_split_three_items():
    d = _dataset(120, [(0, 5), (0, 6), (0, 7)])
    sc = MultiDomainScenario(1, [d, _dataset(120, [(0, 1), (0, 2), (0, 3)])])
    sp = split_leave_one_out(sc, seed=0)
    train, val, test = sp.train.domains[0].interactions[0], sp.validation[0][0], sp.test[0][0]
    assert len(train) == 1 and len({train[0], val, test}) == 3
    assert {train[0], val, test} == {5, 6, 7}


def test_forced_negative_set():
    sc = MultiDomainScenario(1, [_dataset(100, [(0, 4), (0, 9), (0, 17)]), _dataset(100, [(0, 1), (0, 2), (0, 3)])])
    sp = split_leave_one_out(sc, seed=0, num_negatives=97)
    assert sorted(sp.eval_negatives[0][0]) == sorted(set(range(100)) - {4, 9, 17})
    sc1 = MultiDomainScenario(1, [_dataset(101, [(0, 4), (0, 9)]), _dataset(101, [(0, 1)])])
    # users below three interactions are not held out, so nothing to sample
    assert split_leave_one_out(sc1, seed=0).eval_negatives[0] == {}


def test_forced_99_negatives():
    sc = MultiDomainScenario(2, [_dataset(102, [(0, 4), (0, 9), (0, 17), (1, 3)]),
                                 _dataset(102, [(0, 1), (0, 2), (0, 3), (1, 1)])])
    sp = split_leave_one_out(sc, seed=1)
    assert sorted(sp.eval_negatives[0][0]) == sorted(set(range(102)) - {4, 9, 17})
    assert 1 not in sp.eval_negatives[0]


def test_split_requires_enough_items():
    sc = MultiDomainScenario(1, [_dataset(50, [(0, 1), (0, 2), (0, 3)]), _dataset(200, [(0, 1)])])
    with pytest.raises(ProtocolError):
        split_leave_one_out(sc, seed=0)
    assert split_leave_one_out(sc, seed=0, num_negatives=20).eval_negatives[0][0].size == 20


def test_split_deterministic_and_negatives_valid(small_scenario, small_split):
    again = split_leave_one_out(small_scenario, seed=11)
    assert again.test == small_split.test and again.validation == small_split.validation
    for s, d in enumerate(small_scenario.domains):
        for u, negs in small_split.eval_negatives[s].items():
            assert len(negs) == 99 and len(set(negs.tolist())) == 99
            assert not set(negs.tolist()) & set(d.interactions[u])


# --- BPR triples


def test_triple_counts_and_invariant(small_split):
    for ratio in (1, 3):
        t = sample_bpr_triples(small_split, 0, ratio, seed=2)
        n_pos = small_split.train.domains[0].num_interactions
        assert len(t) == ratio * n_pos
        for tr in t:
            assert tr.positive in small_split.train.domains[0].interactions[tr.user]
            assert tr.negative not in small_split.full_items(0, tr.user)
    a, b = sample_bpr_triples(small_split, 1, 2, seed=4), sample_bpr_triples(small_split, 1, 2, seed=4)
    assert a.negatives.tobytes() == b.negatives.tobytes()


def test_negative_distribution_is_uniform():
    # one user, 25 positives, ratio 4: 100 triples per draw; pool 10^5 negatives
    n_items = 60
    positives = list(range(25))
    sc = MultiDomainScenario(1, [_dataset(n_items, [(0, i) for i in positives]), _dataset(n_items, [(0, 0)])])
    sp = split_leave_one_out(sc, seed=0, num_negatives=10, min_interactions=1000)
    counts = Counter()
    total = 0
    seed = 0
    while total < 100_000:
        t = sample_bpr_triples(sp, 0, 4, seed=seed)
        assert len(t) == 100
        counts.update(t.negatives.tolist())
        total += len(t)
        seed += 1
    eligible = range(25, n_items)
    assert set(counts) == set(eligible)
    observed = np.array([counts[i] for i in eligible])
    _, p = stats.chisquare(observed)
    assert p > 1e-3


def test_whole_catalog_user_is_skipped(caplog):
    sc = MultiDomainScenario(2, [_dataset(3, [(0, 0), (0, 1), (0, 2), (1, 0)]), _dataset(3, [(0, 0), (1, 1)])])
    sp = split_leave_one_out(sc, seed=0, num_negatives=1, min_interactions=100)
    t = sample_bpr_triples(sp, 0, 1, seed=0)
    assert set(t.users.tolist()) == {1}
    assert "whole catalog" in caplog.text


# --- removal for sweeps


def test_removal_counts(small_split):
    before = small_split.train.domains[0].num_interactions
    reduced = remove_training_fraction(small_split, 0.5, seed=3)
    assert reduced.train.domains[0].num_interactions == before - round_half_up(0.5 * before)
    assert reduced.test == small_split.test
    same = remove_training_fraction(small_split, 0.0, seed=3)
    assert same.train.domains[0].interactions == small_split.train.domains[0].interactions


def test_removal_thousand():
    sc = MultiDomainScenario(100, [_dataset(200, [(u, i) for u in range(100) for i in range(10)]),
                                   _dataset(200, [(u, 0) for u in range(100)])])
    sp = split_leave_one_out(sc, seed=0, min_interactions=1000)
    assert sp.train.domains[0].num_interactions == 1000
    assert remove_training_fraction(sp, 0.5, seed=1).train.domains[0].num_interactions == 500
