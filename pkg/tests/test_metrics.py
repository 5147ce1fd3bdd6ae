import numpy as np
import pytest

from prospect.graphs import (
    LabeledDatum,
    MapGraph,
    ProspectMap,
    adjacency_lists,
    build_chain_graph,
    build_grid_graph,
    canonical_edges,
)
from prospect.kernel import SpriteEmbedding
from prospect.metrics import (
    DEFAULT_THRESHOLDS,
    ap_at_thresholds,
    auprc,
    best_threshold_metrics,
    cluster_sprite_embeddings,
    evaluate_dataset,
    region_dispersion,
    region_prevalence,
    threshold_metrics,
)


class TestAuprc:
    def test_perfect_ranking(self):
        assert auprc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_hand_step_integration(self):
        assert auprc([0.9, 0.8, 0.1], [0, 1, 1]) == pytest.approx(7 / 12)

    def test_single_tie_block_gives_prevalence(self):
        assert auprc([0.5] * 10, [1, 1, 0, 0, 0, 0, 0, 0, 0, 0]) == pytest.approx(0.2)

    def test_degenerate_masks_rejected(self):
        with pytest.raises(ValueError):
            auprc([0.1, 0.2], [1, 1])
        with pytest.raises(ValueError):
            auprc([0.1, 0.2], [0, 0])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(61)
        for _ in range(20):
            t = int(rng.integers(3, 40))
            scores = rng.random(t)
            mask = rng.random(t) < 0.4
            if mask.all() or not mask.any():
                continue
            a = auprc(scores, mask)
            b = auprc(scores ** 2, mask)
            assert a == pytest.approx(b, abs=1e-12)

    def test_matches_sklearn_average_precision(self):
        sk = pytest.importorskip("sklearn.metrics")
        rng = np.random.default_rng(62)
        for _ in range(30):
            t = int(rng.integers(3, 50))
            # Quantized scores force tie blocks.
            scores = rng.integers(0, 5, size=t) / 4.0
            mask = rng.random(t) < 0.5
            if mask.all() or not mask.any():
                continue
            assert auprc(scores, mask) == pytest.approx(
                float(sk.average_precision_score(mask, scores)), abs=1e-12
            )


class TestApAtThresholds:
    def test_perfect_binary_map(self):
        mask = np.array([1, 0, 0, 1, 0], dtype=bool)
        scores = mask.astype(float)
        want = (10.0 + 2 / 5) / 11.0
        assert ap_at_thresholds(scores, mask) == pytest.approx(want)

    def test_all_zero_scores(self):
        mask = np.array([1, 0, 0, 0], dtype=bool)
        assert ap_at_thresholds(np.zeros(4), mask) == pytest.approx((1 / 4) / 11)

    def test_eleven_threshold_hand_table(self):
        scores = [0.95, 0.55, 0.45, 0.05]
        mask = [1, 1, 0, 0]
        # t=0: 2/4; t=0.1..0.4: 2/3; t=0.5..0.9: 1; t=1.0: no predictions.
        want = (0.5 + 4 * (2 / 3) + 5 * 1.0 + 0.0) / 11
        assert ap_at_thresholds(scores, mask) == pytest.approx(want)
        assert want == pytest.approx(49 / 66)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(63)
        scores = rng.random(20)
        mask = rng.random(20) < 0.3
        perm = rng.permutation(20)
        assert ap_at_thresholds(scores, mask) == pytest.approx(
            ap_at_thresholds(scores[perm], mask[perm])
        )

    def test_default_ladder_is_11_exact_tenths(self):
        assert DEFAULT_THRESHOLDS == tuple(k / 10 for k in range(11))


class TestThresholdMetrics:
    def test_perfect_predictions(self):
        out = threshold_metrics([1.0, 1.0, 0.0], [1, 1, 0], 0.5)
        assert out == (1.0, 1.0, 1.0)

    def test_inverted_predictions(self):
        out = threshold_metrics([0.0, 0.0, 1.0, 1.0], [1, 1, 0, 0], 0.5)
        assert out.precision == 0.0
        assert out.mcc == -1.0
        assert out.dice == 0.0

    def test_no_predictions_convention(self):
        out = threshold_metrics([0.1, 0.2], [1, 0], 0.9)
        assert out == (0.0, 0.0, 0.0)

    def test_matches_confusion_matrix_oracle(self):
        rng = np.random.default_rng(64)
        for _ in range(40):
            t = int(rng.integers(2, 30))
            scores = rng.random(t)
            mask = rng.random(t) < 0.5
            thr = float(rng.random())
            pred = scores >= thr
            tp = int((pred & mask).sum())
            fp = int((pred & ~mask).sum())
            fn = int((~pred & mask).sum())
            tn = int((~pred & ~mask).sum())
            prec = tp / (tp + fp) if tp + fp else 0.0
            denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
            mcc = (tp * tn - fp * fn) / np.sqrt(denom) if denom else 0.0
            dice = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0
            got = threshold_metrics(scores, mask, thr)
            assert got.precision == pytest.approx(prec)
            assert got.mcc == pytest.approx(mcc)
            assert got.dice == pytest.approx(dice)

    def test_best_threshold_maximizes_each_metric_independently(self):
        scores = np.array([0.9, 0.6, 0.3, 0.0])
        mask = np.array([1, 0, 1, 0], dtype=bool)
        best = best_threshold_metrics(scores, mask)
        per_t = [threshold_metrics(scores, mask, t) for t in DEFAULT_THRESHOLDS]
        assert best.precision == max(m.precision for m in per_t)
        assert best.mcc == max(m.mcc for m in per_t)
        assert best.dice == max(m.dice for m in per_t)


class TestRegions:
    def test_prevalence_cases(self):
        assert region_prevalence([1, 1] + [0] * 8) == 0.2
        assert region_prevalence([0, 0, 0]) == 0.0
        assert region_prevalence([1, 1]) == 1.0

    def test_dispersion_single_component(self):
        adj = adjacency_lists(4, build_chain_graph(4))
        assert region_dispersion([1, 1, 1, 1], adj) == 0.25

    def test_dispersion_two_components_sizes_2_and_4(self):
        adj = adjacency_lists(8, build_chain_graph(8))
        mask = [1, 1, 0, 0, 1, 1, 1, 1]
        assert region_dispersion(mask, adj) == pytest.approx(2 / 3)

    def test_dispersion_isolated_singletons(self):
        adj = adjacency_lists(9, build_grid_graph(3, 3, 4))
        mask = np.zeros(9, dtype=bool)
        mask[[0, 2, 6, 8]] = True
        assert region_dispersion(mask, adj) == 4.0

    def test_dispersion_fully_connected_region_is_reciprocal_size(self):
        rng = np.random.default_rng(65)
        for _ in range(10):
            t = int(rng.integers(2, 12))
            edges = canonical_edges(
                [(i, j) for i in range(t) for j in range(i + 1, t)], t
            )
            adj = adjacency_lists(t, edges)
            size = int(rng.integers(1, t + 1))
            mask = np.zeros(t, dtype=bool)
            mask[:size] = True
            assert region_dispersion(mask, adj) == pytest.approx(1 / size)

    def test_dispersion_empty_region_rejected(self):
        adj = adjacency_lists(3, build_chain_graph(3))
        with pytest.raises(ValueError):
            region_dispersion([0, 0, 0], adj)


def _datum(mask, label=1, t=None):
    t = t if t is not None else len(mask)
    g = MapGraph(np.zeros((t, 1)), build_chain_graph(t), datum_id=f"d{id(mask) % 997}")
    return LabeledDatum(g, label, np.asarray(mask, dtype=bool))


class TestEvalReport:
    def test_rows_and_aggregates(self):
        d1 = _datum([1, 1, 0, 0])
        d2 = _datum([0, 1, 1, 0])
        maps = [
            ProspectMap(np.array([1.0, 0.9, 0.1, 0.0]), True, d1.datum_id),
            ProspectMap(np.array([0.0, 1.0, 0.9, 0.1]), True, d2.datum_id),
        ]
        report = evaluate_dataset(maps, [d1, d2])
        assert report.skipped == 0
        assert len(report.rows) == 2
        assert report.rows[0].auprc == 1.0
        assert report.rows[1].auprc == 1.0
        mean, stderr = report.aggregates["auprc"]
        assert mean == 1.0 and stderr == 0.0
        assert report.aggregates["prevalence"][0] == 0.5

    def test_empty_mask_skipped_but_counted(self):
        d1 = _datum([1, 0, 0, 0], label=1)
        d0 = LabeledDatum(
            MapGraph(np.zeros((4, 1)), build_chain_graph(4)), 0,
            np.zeros(4, dtype=bool),
        )
        maps = [
            ProspectMap(np.array([1.0, 0.0, 0.0, 0.0]), True, d1.datum_id),
            ProspectMap(np.array([0.5, 0.5, 0.5, 0.5]), True),
        ]
        report = evaluate_dataset(maps, [d1, d0])
        assert report.skipped == 1
        assert report.rows[1].auprc is None
        assert report.rows[1].prevalence == 0.0
        # Aggregates only cover the datum with a positive region.
        assert report.aggregates["auprc"] == (1.0, 0.0)
        assert report.aggregates["prevalence"] == (0.25, 0.0)

    def test_missing_mask_counts_as_skipped(self):
        g = MapGraph(np.zeros((3, 1)), build_chain_graph(3))
        datum = LabeledDatum(g, 0, None)
        pmap = ProspectMap(np.array([0.0, 0.5, 1.0]), True)
        report = evaluate_dataset([pmap], [datum])
        assert report.skipped == 1
        assert report.aggregates["auprc"] is None

    def test_unscaled_map_rejected(self):
        d = _datum([1, 0])
        with pytest.raises(ValueError):
            evaluate_dataset([ProspectMap(np.array([2.0, 1.0]), False)], [d])

    def test_csv_has_prevalence_and_dispersion_columns(self):
        d = _datum([1, 0, 0])
        pmap = ProspectMap(np.array([1.0, 0.0, 0.0]), True, d.datum_id)
        rows = evaluate_dataset([pmap], [d]).csv_rows()
        header = rows[0]
        assert "prevalence" in header and "dispersion" in header
        assert len(rows) == 2

    def test_json_round_trip_shape(self):
        d = _datum([1, 0, 0])
        pmap = ProspectMap(np.array([1.0, 0.0, 0.0]), True, d.datum_id)
        out = evaluate_dataset([pmap], [d]).to_dict()
        assert out["skipped"] == 0
        assert out["aggregates"]["auprc"]["mean"] == 1.0
        assert len(out["per_datum"]) == 1


class TestClustering:
    def test_identical_pair_clusters_before_outlier(self):
        embs = [
            SpriteEmbedding(np.array([0.0, 0.0]), True),
            SpriteEmbedding(np.array([0.0, 0.0]), True),
            SpriteEmbedding(np.array([9.0, 9.0]), True),
        ]
        tree = cluster_sprite_embeddings(embs)
        assert tree.merges[0][:2] == (0, 1)
        assert tree.merges[0][2] == 0.0
        labels = tree.cut(2)
        assert labels.tolist() == [0, 0, 1]

    def test_all_identical_merge_at_zero(self):
        embs = [SpriteEmbedding(np.zeros(3), True) for _ in range(5)]
        tree = cluster_sprite_embeddings(embs)
        assert all(m[2] == 0.0 for m in tree.merges)

    def test_cut_extremes(self):
        rng = np.random.default_rng(66)
        x = rng.normal(size=(6, 2))
        tree = cluster_sprite_embeddings(x)
        assert tree.cut(1).tolist() == [0] * 6
        assert tree.cut(6).tolist() == list(range(6))

    def test_matches_scipy_average_linkage(self):
        hierarchy = pytest.importorskip("scipy.cluster.hierarchy")
        rng = np.random.default_rng(67)
        for _ in range(10):
            n = int(rng.integers(4, 20))
            x = rng.normal(size=(n, 3))
            tree = cluster_sprite_embeddings(x)
            z = hierarchy.linkage(x, method="average")
            assert np.allclose([m[2] for m in tree.merges], z[:, 2], atol=1e-9)
            for k in (2, 3):
                if k > n:
                    continue
                mine = tree.cut(k)
                ref = hierarchy.fcluster(z, t=k, criterion="maxclust")
                # Compare partitions, not label values.
                mine_parts = {tuple(np.flatnonzero(mine == c)) for c in set(mine)}
                ref_parts = {tuple(np.flatnonzero(ref == c)) for c in set(ref)}
                assert mine_parts == ref_parts

    def test_requires_two_embeddings(self):
        with pytest.raises(ValueError):
            cluster_sprite_embeddings(np.zeros((1, 2)))

    def test_only_average_linkage(self):
        with pytest.raises(ValueError):
            cluster_sprite_embeddings(np.zeros((3, 2)), linkage="single")
