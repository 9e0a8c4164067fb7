"""Screening protocol tests: splits, ranking, AUC/EF against brute-force
oracles, threshold tables, the per-target protocol and the synthetic
benchmark generator."""

import numpy as np
import pytest

from scvs import mpe, ref_nn, screening, synth
from scvs.mpe import Atom, FeatureScaler, Molecule, MpeVector
from scvs.ref_nn import TrainConfig
from scvs.screening import (
    Metrics,
    RankedList,
    SplitError,
    SplitSpec,
    TargetData,
    TargetSet,
    UndefinedMetric,
    auc,
    build_split,
    compute_metrics,
    enrichment_factor,
    per_target_protocol,
    score_library,
    threshold_table,
)


def _vec(rng) -> MpeVector:
    return MpeVector(np.sort(rng.uniform(0, 100, 6))[::-1], np.sort(rng.uniform(-100, 0, 6)))


def _target(rng, tid="t0", n_act=10, n_dec=100) -> TargetData:
    compounds = [(f"a{i:03d}", _vec(rng), 1) for i in range(n_act)]
    compounds += [(f"d{i:03d}", _vec(rng), 0) for i in range(n_dec)]
    return TargetData(tid, _vec(rng), compounds)


def _ranked(scores, labels, tid="t") -> RankedList:
    entries = sorted(
        [(f"c{i:04d}", float(s), int(l)) for i, (s, l) in enumerate(zip(scores, labels))],
        key=lambda e: (-e[1], e[0]))
    return RankedList(tid, entries)


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def recount_ef(scores, labels, x):
    order = np.argsort([-s for s in scores], kind="stable")
    n_top = int(np.ceil(x / 100 * len(scores)))
    tp = sum(labels[i] for i in order[:n_top])
    return tp * 100 / (x * sum(labels))


class TestBuildSplit:
    def test_default_fraction_arithmetic(self):
        # 50% of 10 actives and 10% of 100 decoys train; the other 95 test.
        rng = np.random.default_rng(0)
        t = _target(rng, n_act=10, n_dec=100)
        train, test, scaler = build_split([t], SplitSpec(seed=1))
        assert len(train) == 5 + 10
        assert len(test) == 110 - 15
        assert scaler.fitted

    def test_full_fractions_leave_no_test(self):
        rng = np.random.default_rng(1)
        with pytest.raises(SplitError, match="test set is empty"):
            build_split([_target(rng)], SplitSpec(1.0, 1.0, 2))

    def test_zero_sample_class_names_target(self):
        rng = np.random.default_rng(2)
        t = _target(rng, n_act=10, n_dec=4)  # 10% of 4 decoys rounds to 0
        with pytest.raises(SplitError, match="t0"):
            build_split([t], SplitSpec(seed=3))

    def test_deterministic_and_disjoint(self):
        rng = np.random.default_rng(3)
        targets = [_target(rng, f"t{i}") for i in range(3)]
        a_train, a_test, _ = build_split(targets, SplitSpec(seed=11))
        b_train, b_test, _ = build_split(targets, SplitSpec(seed=11))
        key = lambda pairs: [(p.target_id, p.compound_id) for p in pairs]
        assert key(a_train) == key(b_train) and key(a_test) == key(b_test)
        assert not set(key(a_train)) & set(key(a_test))

    def test_features_are_scaled_and_24_wide(self):
        rng = np.random.default_rng(4)
        train, test, _ = build_split([_target(rng)], SplitSpec(seed=5))
        for p in train + test:
            assert p.features.shape == (24,)
            assert np.all(np.abs(p.features) <= 1.0)

    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            SplitSpec(active_fraction=0.0)


class TestScoreLibrary:
    def test_constant_scorer_ranks_by_compound_id(self):
        rng = np.random.default_rng(5)
        t = _target(rng, n_act=3, n_dec=5)
        scaler = FeatureScaler(np.full(24, -300.0), np.full(24, 300.0))
        ranked = score_library(lambda f: 1.0, t, scaler)
        ids = [e[0] for e in ranked.entries]
        assert ids == sorted(ids)

    def test_perfect_oracle_puts_actives_on_top(self):
        rng = np.random.default_rng(6)
        t = _target(rng, n_act=4, n_dec=8)
        scaler = FeatureScaler(np.full(24, -300.0), np.full(24, 300.0))
        # label-leaking stub: scores follow compound order, which the scorer
        # sees row by row
        labels_in_order = iter([label for _, _, label in t.compounds])
        ranked = score_library(lambda f: float(next(labels_in_order)) + 0.0, t, scaler)
        labels = [e[2] for e in ranked.entries]
        assert labels == sorted(labels, reverse=True)
        assert auc(ranked) == 1.0

    def test_mlp_scoring_consistent_with_forward(self):
        rng = np.random.default_rng(7)
        t = _target(rng, n_act=3, n_dec=3)
        scaler = FeatureScaler(np.full(24, -300.0), np.full(24, 300.0))
        mlp = ref_nn.init_mlp([24, 6, 1], "tanh", seed=1)
        ranked = score_library(mlp, t, scaler)
        by_id = {cid: (vec, label) for cid, vec, label in t.compounds}
        for cid, score, _ in ranked.entries:
            feats = scaler.transform(mpe.pair_features(t.crystal, by_id[cid][0]))
            assert score == pytest.approx(ref_nn.forward(mlp, feats))


class TestAuc:
    def test_perfect_inverted_tied(self):
        assert auc(_ranked([3, 2, 3, 1, 0, 1], [1, 1, 1, 0, 0, 0])) == 1.0
        assert auc(_ranked([0, 1, 0, 3, 2, 3], [1, 1, 1, 0, 0, 0])) == 0.0
        assert auc(_ranked([1, 1, 1, 1], [1, 0, 1, 0])) == 0.5

    def test_single_class_undefined(self):
        with pytest.raises(UndefinedMetric):
            auc(_ranked([1, 2], [1, 1]))

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(10, 50))
            labels = (rng.random(n) < 0.3).astype(int)
            if labels.sum() in (0, n):
                continue
            scores = np.round(rng.normal(size=n), 1)  # coarse grid forces ties
            got = auc(_ranked(scores, labels))
            assert got == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(9)
        labels = (rng.random(40) < 0.4).astype(int)
        scores = rng.normal(size=40)
        base = auc(_ranked(scores, labels))
        assert auc(_ranked(np.exp(scores), labels)) == pytest.approx(base, abs=1e-12)
        assert auc(_ranked(3 * scores - 7, labels)) == pytest.approx(base, abs=1e-12)


class TestEnrichmentFactor:
    def test_single_active_ranked_first_hits_bound(self):
        labels = [1] + [0] * 99
        scores = list(range(100, 0, -1))
        assert enrichment_factor(_ranked(scores, labels), 1) == 100.0

    def test_uniform_interleaving_is_chance(self):
        labels = [1, 0] * 50
        scores = list(range(100, 0, -1))
        for x in (10, 20, 50, 100):
            assert enrichment_factor(_ranked(scores, labels), x) == pytest.approx(1.0, abs=0.3)

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            n = int(rng.integers(20, 120))
            labels = (rng.random(n) < 0.2).astype(int)
            if labels.sum() == 0:
                continue
            scores = rng.normal(size=n)
            r = _ranked(scores, labels)
            for x in (1, 5, 10, 37.5):
                assert enrichment_factor(r, x) == pytest.approx(
                    recount_ef(list(scores), list(labels), x), abs=1e-12)

    def test_random_ranking_averages_one(self):
        rng = np.random.default_rng(11)
        labels = np.array([1] * 20 + [0] * 180)
        efs = []
        for _ in range(200):
            scores = rng.permutation(200).astype(float)
            efs.append(enrichment_factor(_ranked(scores, labels), 10))
        assert np.mean(efs) == pytest.approx(1.0, abs=0.2)

    def test_x_range_validated(self):
        r = _ranked([1, 0], [1, 0])
        with pytest.raises(ValueError):
            enrichment_factor(r, 0)
        with pytest.raises(ValueError):
            enrichment_factor(r, 101)


class TestThresholdTable:
    def test_all_perfect(self):
        assert threshold_table([1.0, 1.0]) == {
            "lt_0.5": 0, "ge_0.6": 100, "ge_0.7": 100,
            "ge_0.8": 100, "ge_0.9": 100, "ge_0.95": 100}

    def test_mixed_example(self):
        assert threshold_table([0.4, 0.65, 0.96]) == {
            "lt_0.5": 33, "ge_0.6": 67, "ge_0.7": 33,
            "ge_0.8": 33, "ge_0.9": 33, "ge_0.95": 33}

    def test_empty_rejected(self):
        with pytest.raises(UndefinedMetric):
            threshold_table([])


class TestPerTargetProtocol:
    def test_separable_target_scores_high(self):
        targets = synth.make_benchmark(seed=5, n_targets=1, n_actives=40, n_decoys=120)
        cfg = TrainConfig(epochs=60, batch_size=32, rng_seed=2, val_fraction=0.0)
        _, metrics = per_target_protocol(targets[0], cfg)
        assert metrics.auc > 0.95
        assert metrics.n_total == 8 + 24  # the held-out 20%

    def test_zero_epochs_is_null_model(self):
        # Unlearnable noise target: an untrained net must rank near chance.
        rng = np.random.default_rng(12)
        t = _target(rng, n_act=30, n_dec=90)
        cfg = TrainConfig(epochs=0, rng_seed=3, val_fraction=0.0)
        _, metrics = per_target_protocol(t, cfg)
        assert abs(metrics.auc - 0.5) < 0.35

    def test_tiny_target_split_error(self):
        rng = np.random.default_rng(12)
        t = _target(rng, n_act=1, n_dec=10)
        with pytest.raises(SplitError):
            per_target_protocol(t, TrainConfig(epochs=1))


class TestTargetTypes:
    def test_duplicate_ids_across_classes_rejected(self):
        m = Molecule("same", [Atom(0.1, 0, 0, 0)])
        with pytest.raises(ValueError, match="both classes"):
            TargetSet("t", m, [m], [m])

    def test_descriptor_conversion_counts_failures(self):
        good = Molecule("ok", [Atom(0.5, 0, 0, 0), Atom(-0.5, 1, 0, 0)])
        bad = Molecule("bad", [Atom(0.5, 0, 0, 0), Atom(0.5, 0, 0, 0)])
        ts = TargetSet("t", good, [good], [bad])
        data = screening.target_descriptors(ts)
        assert data.n_skipped == 1
        assert [c[0] for c in data.compounds] == ["ok"]

    def test_cache_lookup_used(self):
        m = Molecule("m1", [Atom(0.5, 0, 0, 0), Atom(-0.5, 1, 0, 0)])
        fake = MpeVector(np.array([9.0, 0, 0, 0, 0, 0]), np.zeros(6))
        ts = TargetSet("t", m, [m], [])
        data = screening.target_descriptors(ts, cache={"m1": fake})
        assert data.crystal.most_positive == 9.0


class TestSyntheticBenchmark:
    def test_deterministic(self):
        a = synth.make_benchmark(seed=3, n_targets=2, n_actives=5, n_decoys=7)
        b = synth.make_benchmark(seed=3, n_targets=2, n_actives=5, n_decoys=7)
        for ta, tb in zip(a, b):
            assert ta.target_id == tb.target_id
            np.testing.assert_array_equal(ta.crystal.features, tb.crystal.features)
            for (ida, va, la), (idb, vb, lb) in zip(ta.compounds, tb.compounds):
                assert (ida, la) == (idb, lb)
                np.testing.assert_array_equal(va.features, vb.features)

    def test_counts_and_classes(self):
        targets = synth.make_benchmark(seed=4, n_targets=3, n_actives=6, n_decoys=9)
        assert len(targets) == 3
        for t in targets:
            assert t.n_actives == 6 and t.n_decoys == 9

    def test_realized_molecule_reproduces_descriptor(self):
        targets = synth.make_benchmark(seed=8, n_targets=1, n_actives=2, n_decoys=2)
        for cid, vec, _ in targets[0].compounds:
            mol = synth.realize_molecule(vec, cid)
            back = mpe.mpe_vector(mol)
            np.testing.assert_allclose(back.features, vec.features, rtol=1e-3, atol=0.02)


class TestMetricsContainer:
    def test_compute_metrics_round_trip(self):
        r = _ranked([5, 4, 3, 2, 1, 0], [1, 1, 0, 1, 0, 0])
        m = compute_metrics(r)
        assert m.n_actives == 3 and m.n_total == 6
        assert set(m.ef) == {1, 5, 10}
        d = m.as_dict()
        assert d["auc"] == round(m.auc, 4)

    def test_aggregate_layout(self):
        r1 = _ranked([5, 4, 3, 2], [1, 1, 0, 0])
        r2 = _ranked([5, 4, 3, 2], [0, 1, 1, 0])
        agg = screening.aggregate_metrics({"a": compute_metrics(r1), "b": compute_metrics(r2)})
        assert agg["n_targets"] == 2
        assert set(agg["threshold_table"]) == set(screening.AUC_BUCKETS)
        assert "ef1_mean" in agg and "ef10_std" in agg
