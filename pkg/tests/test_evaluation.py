import numpy as np
import pytest
from sklearn.metrics import average_precision_score

from app.models import embed
from app.services import EvaluationService, TrainerService
from app.settings import EvalFeature
from app.utils import ShapeError


def brute_force(distances, query_ids, query_cams, gallery_ids, gallery_cams, ks=(1, 5, 10)):
    """Straight-line CMC and mAP with same-identity same-camera entries removed."""
    hits_at = {k: 0 for k in ks}
    aps, valid = [], 0
    for q in range(distances.shape[0]):
        keep = [g for g in range(distances.shape[1])
                if not (gallery_ids[g] == query_ids[q] and gallery_cams[g] == query_cams[q])]
        ranked = sorted(keep, key=lambda g: (distances[q, g], g))
        relevant = np.array([gallery_ids[g] == query_ids[q] for g in ranked])
        if not relevant.any():
            continue
        valid += 1
        for k in ks:
            hits_at[k] += int(relevant[:k].any())
        scores = -np.array([distances[q, g] for g in ranked])
        aps.append(average_precision_score(relevant, scores))
    if not valid:
        return {k: 0.0 for k in ks}, 0.0
    return {k: hits_at[k] / valid for k in ks}, float(np.mean(aps))


class TestDistanceMatrix:
    def test_double_loop_oracle(self):
        rng = np.random.default_rng(0)
        queries, gallery = rng.standard_normal((20, 8)), rng.standard_normal((30, 8))
        distances = EvaluationService.distance_matrix(queries, gallery)
        for q in range(20):
            for g in range(30):
                assert distances[q, g] == pytest.approx(np.sqrt(np.sum((queries[q] - gallery[g]) ** 2)), rel=1e-12)

    def test_simple_values(self):
        distances = EvaluationService.distance_matrix(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_allclose(distances, [[0.0, np.sqrt(2.0)]])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            EvaluationService.distance_matrix(np.zeros((2, 3)), np.zeros((2, 4)))


class TestRanking:
    def test_match_at_second_position(self):
        ranks = EvaluationService.cmc_rank_k(
            np.array([[0.1, 0.2, 0.3]]), np.array([1]), np.array([0]), np.array([9, 1, 9]), np.array([1, 1, 1])
        )
        assert ranks[1] == 0.0
        assert ranks[5] == 1.0

    def test_single_relevant_at_rank_two(self):
        gallery_ids = np.array([0, 1, 0, 0, 0, 0, 0, 0, 0, 0])
        distances = np.arange(10, dtype=float)[None, :]
        ap = EvaluationService.mean_average_precision(distances, np.array([1]), np.array([0]), gallery_ids, np.ones(10))
        assert ap == pytest.approx(0.5, abs=1e-9)

    def test_two_relevant_at_ranks_one_and_three(self):
        gallery_ids = np.array([1, 0, 1, 0])
        distances = np.arange(4, dtype=float)[None, :]
        ap = EvaluationService.mean_average_precision(distances, np.array([1]), np.array([0]), gallery_ids, np.ones(4))
        assert ap == pytest.approx(0.8333333333, abs=1e-9)

    def test_perfect_ranking(self):
        distances = np.array([[0.1, 0.2, 0.9], [0.8, 0.1, 0.2]])
        stats = EvaluationService.ranking_statistics(
            distances, np.array([5, 6]), np.array([0, 0]), np.array([5, 6, 6]), np.array([1, 1, 1])
        )
        assert stats.rank(1) == 1.0
        assert stats.mean_average_precision == 1.0

    def test_same_camera_matches_are_excluded(self):
        distances = np.array([[0.1, 0.2, 0.3]])
        stats = EvaluationService.ranking_statistics(
            distances, np.array([1]), np.array([0]), np.array([1, 2, 1]), np.array([0, 1, 1])
        )
        assert stats.num_excluded == 1
        assert stats.rank(1) == 0.0
        assert stats.mean_average_precision == pytest.approx(0.5)
        kept = EvaluationService.ranking_statistics(
            distances, np.array([1]), np.array([0]), np.array([1, 2, 1]), np.array([0, 1, 1]),
            exclude_same_camera=False,
        )
        assert kept.num_excluded == 0
        assert kept.rank(1) == 1.0

    def test_query_without_match_is_skipped(self):
        stats = EvaluationService.ranking_statistics(
            np.array([[0.1, 0.2], [0.3, 0.1]]), np.array([1, 7]), np.array([0, 0]), np.array([1, 2]), np.array([1, 1])
        )
        assert stats.num_skipped == 1
        assert stats.num_valid == 1
        assert stats.rank(1) == 1.0

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        queries, gallery = rng.integers(1, 21), rng.integers(1, 51)
        query_ids, gallery_ids = rng.integers(0, 6, queries), rng.integers(0, 6, gallery)
        query_cams, gallery_cams = rng.integers(0, 3, queries), rng.integers(0, 3, gallery)
        distances = rng.uniform(size=(queries, gallery))

        stats = EvaluationService.ranking_statistics(distances, query_ids, query_cams, gallery_ids, gallery_cams)
        expected_ranks, expected_map = brute_force(distances, query_ids, query_cams, gallery_ids, gallery_cams)
        for k, value in expected_ranks.items():
            assert stats.rank(k) == pytest.approx(value, abs=1e-12)
        assert stats.mean_average_precision == pytest.approx(expected_map, abs=1e-12)

    def test_rank_only_dependence_and_query_order(self):
        rng = np.random.default_rng(3)
        query_ids, gallery_ids = rng.integers(0, 4, 10), rng.integers(0, 4, 30)
        query_cams, gallery_cams = rng.integers(0, 2, 10), rng.integers(0, 2, 30)
        distances = rng.uniform(size=(10, 30))
        base = EvaluationService.ranking_statistics(distances, query_ids, query_cams, gallery_ids, gallery_cams)

        warped = EvaluationService.ranking_statistics(
            np.exp(3 * distances), query_ids, query_cams, gallery_ids, gallery_cams
        )
        order = rng.permutation(10)
        shuffled = EvaluationService.ranking_statistics(
            distances[order], query_ids[order], query_cams[order], gallery_ids, gallery_cams
        )
        for other in (warped, shuffled):
            assert other.mean_average_precision == pytest.approx(base.mean_average_precision)
            for k in (1, 5, 10):
                assert other.rank(k) == pytest.approx(base.rank(k))
        ranks = [base.rank(k) for k in range(1, 31)]
        assert ranks == sorted(ranks)
        assert ranks[-1] == 1.0


class TestEvaluate:
    def test_report(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits, stop_after=2)
        report = EvaluationService.evaluate(state.params, tiny_splits, tiny_config.eval)
        assert report.num_queries == len(tiny_splits.query) == 4
        assert report.num_excluded == 4
        assert report.num_skipped == 0
        assert 0.0 <= report.rank1 <= report.rank5 <= report.rank10 <= 1.0
        assert 0.0 < report.map_score <= 1.0
        assert set(report.model_dump(by_alias=True)) >= {"rank1", "rank5", "rank10", "mAP", "num_queries"}

    def test_concat_feature_doubles_width(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits, stop_after=1)
        settings = tiny_config.eval.model_copy(update={"feature": EvalFeature.CONCAT})
        features = EvaluationService.embed_samples(tiny_splits.query, state.params, settings)
        assert features.shape == (4, 2 * tiny_config.model.key_dim)

    def test_local_feature_is_v_local(self, tiny_config, tiny_splits):
        state = TrainerService.fit(tiny_config, tiny_splits, stop_after=1)
        settings = tiny_config.eval.model_copy(update={"feature": EvalFeature.LOCAL})
        features = EvaluationService.embed_samples(tiny_splits.query, state.params, settings)
        pixels = np.stack([s.pixels for s in tiny_splits.query]).astype(np.float64)
        expected = embed(pixels, state.params, train_mode=False).v_local.data
        np.testing.assert_allclose(features, expected, atol=1e-12)
