import numpy as np
import pytest

from latentattr.attribution import PointwiseModel, impact_measure, pair_rows, sample_latents
from latentattr.errors import InputError
from latentattr.heatmap import (
    NEGATIVE,
    POSITIVE,
    HeatMap,
    SelectionParams,
    balanced_subset,
    default_baselines,
    generate_heatmap,
    generate_heatmaps,
    merge_heatmaps,
    top_dissimilar_samples,
    top_impactful_features,
)
from latentattr.model import random_mlp
from latentattr.samples import Dataset, TimeSeriesSample
from latentattr.synth import contiguous_subsets, make_block_model, make_dataset


def brute_dissimilar(Z, z, k):
    def cos(row):
        dot = sum(a * b for a, b in zip(row, z))
        n1 = np.sqrt(sum(a * a for a in row))
        n2 = np.sqrt(sum(b * b for b in z))
        return 0.0 if n1 * n2 == 0 else dot / (n1 * n2)

    sims = [cos(list(row)) for row in Z]
    return sorted(range(len(sims)), key=lambda i: (sims[i], i))[:k]


def brute_top(p_row, direction, l):
    sign = -1 if direction == POSITIVE else 1
    return sorted(range(len(p_row)), key=lambda i: (sign * p_row[i], i))[:l]


def one_step(x, sid="s", label=0):
    return TimeSeriesSample(sid, np.zeros(1), np.atleast_2d(np.asarray(x, dtype=np.float64)), label)


class TestBalancedSubset:
    def test_two_of_each(self):
        idx = balanced_subset([0, 0, 0, 1, 1, 1], 4, seed=3)
        y = np.array([0, 0, 0, 1, 1, 1])[idx]
        assert sorted(y.tolist()) == [0, 0, 1, 1]
        assert len(set(idx.tolist())) == 4

    def test_full_is_permutation(self):
        assert sorted(balanced_subset([1, 0, 1, 0], 4, seed=0).tolist()) == [0, 1, 2, 3]

    def test_deterministic(self):
        y = np.arange(40) % 2
        a, b = balanced_subset(y, 10, 5), balanced_subset(y, 10, 5)
        assert a.tolist() == b.tolist()
        assert a.tolist() != balanced_subset(y, 10, 6).tolist()

    def test_odd_m(self):
        idx = balanced_subset([0, 1] * 5, 5, 0)
        assert (np.array([0, 1] * 5)[idx] == 0).sum() == 3

    def test_insufficient_class(self):
        with pytest.raises(InputError):
            balanced_subset([0, 0, 0, 1], 4, 0)


class TestDissimilar:
    def test_opposite_vector(self):
        Z = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        assert top_dissimilar_samples(Z, np.array([1.0, 0.0]), 1).tolist() == [2]

    def test_full_sort(self):
        Z = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 1.0]])
        assert top_dissimilar_samples(Z, np.array([1.0, 0.0]), 4).tolist() == [2, 1, 3, 0]

    def test_zero_rows_score_zero(self):
        Z = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.1], [0.0, 1.0]])
        assert top_dissimilar_samples(Z, np.array([1.0, 0.0]), 4).tolist() == [2, 0, 3, 1]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        Z = rng.normal(size=(50, 8))
        z = rng.normal(size=8)
        assert top_dissimilar_samples(Z, z, 10).tolist() == brute_dissimilar(Z, z, 10)

    def test_ties_by_index(self):
        Z = np.array([[2, 0], [1, 0], [2, 0], [0, 3], [2, 0]], dtype=float)
        assert top_dissimilar_samples(Z, np.array([1.0, 0.0]), 5).tolist() == [3, 0, 1, 2, 4]

    def test_empty(self):
        with pytest.raises(InputError):
            top_dissimilar_samples(np.zeros((0, 3)), np.ones(3), 1)


class TestTopFeatures:
    def test_linear_example(self, linear2):
        model = PointwiseModel(linear2)
        F, g = top_impactful_features(POSITIVE, model, one_step([0, 0]), [one_step([1, 1])], 1, n_quad=1)
        assert F[0, 0].tolist() == [1]
        F, g = top_impactful_features(NEGATIVE, model, one_step([0, 0]), [one_step([1, 1])], 1, n_quad=1)
        assert F[0, 0].tolist() == [0]
        assert not g.any()

    def test_direction_flag_booleans(self, linear2):
        model = PointwiseModel(linear2)
        a, _ = top_impactful_features(True, model, one_step([0, 0]), [one_step([1, 1])], 2, n_quad=1)
        b, _ = top_impactful_features(False, model, one_step([0, 0]), [one_step([1, 1])], 2, n_quad=1)
        assert a[0, 0].tolist() == [1, 0] and b[0, 0].tolist() == [0, 1]

    def test_guarded_rows_lowest_indices(self, tanh_mlp):
        model = PointwiseModel(tanh_mlp)
        x = one_step(np.linspace(-1, 1, 20))
        F, g = top_impactful_features(POSITIVE, model, x, [x], 3)
        assert g.all()
        assert F[0].tolist() == [[0, 1, 2]] * 4

    @pytest.mark.parametrize("direction", [POSITIVE, NEGATIVE])
    def test_random_tanh_matches_oracle(self, direction):
        mlp = random_mlp([10, 12, 4], seed=4, scale=1.5)
        model = PointwiseModel(mlp)
        rng = np.random.default_rng(6)
        x_hat = one_step(rng.uniform(-2, 2, 10))
        sel = [one_step(rng.uniform(-2, 2, 10)) for _ in range(5)]
        F, _ = top_impactful_features(direction, model, x_hat, sel, 3, n_quad=32, h=4)
        assert F.shape == (5, 4, 3)
        for kk, x in enumerate(sel):
            p = impact_measure(pair_rows(model, x, x_hat, 32)).p
            for r in range(4):
                assert F[kk, r].tolist() == brute_top(p[r].tolist(), direction, 3)

    def test_h_limits_rows(self, tanh_mlp):
        rng = np.random.default_rng(0)
        F, _ = top_impactful_features(POSITIVE, PointwiseModel(tanh_mlp), one_step(rng.normal(size=20)),
                                      [one_step(rng.normal(size=20))], 2, h=2)
        assert F.shape == (1, 2, 2)


@pytest.fixture(scope="module")
def small_run():
    bm = make_block_model(8, 2, contiguous_subsets(8, 2, 4), seed=0)
    ds = make_dataset(40, 3, 8, seed=1, activity=0.8, max_count=20)
    model = PointwiseModel(bm.mlp)
    params = SelectionParams(m=16, k=3, l=2)
    baselines = default_baselines(ds, balanced_subset(ds.labels, 16, 0), 6, 0)
    return bm, ds, model, params, baselines


class TestGenerate:
    def test_row_sums(self, small_run):
        bm, ds, model, params, baselines = small_run
        hm = generate_heatmap(POSITIVE, ds, model, baselines, params, seed=0)
        per_row = np.full(6, len(baselines) * params.k * params.l)
        for _, _, r in hm.guarded:
            per_row[r] -= params.l
        np.testing.assert_array_equal(hm.row_sums(), per_row)
        assert hm.counts.min() >= 0
        assert hm.row_labels == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]

    def test_deterministic(self, small_run):
        _, ds, model, params, baselines = small_run
        a = generate_heatmap(NEGATIVE, ds, model, baselines, params, seed=4)
        b = generate_heatmap(NEGATIVE, ds, model, baselines, params, seed=4)
        assert a.counts.tobytes() == b.counts.tobytes()

    def test_workers_do_not_change_result(self, small_run):
        _, ds, model, params, baselines = small_run
        a = generate_heatmaps([POSITIVE, NEGATIVE], ds, model, baselines, params, seed=2, workers=1)
        b = generate_heatmaps([POSITIVE, NEGATIVE], ds, model, baselines, params, seed=2, workers=3)
        for d in a:
            assert a[d].counts.tobytes() == b[d].counts.tobytes()
            assert a[d].guarded == b[d].guarded

    def test_single_direction_equals_joint_pass(self, small_run):
        _, ds, model, params, baselines = small_run
        both = generate_heatmaps([POSITIVE, NEGATIVE], ds, model, baselines, params, seed=1)
        neg = generate_heatmap(NEGATIVE, ds, model, baselines, params, seed=1)
        assert np.array_equal(both[NEGATIVE].counts, neg.counts)

    def test_matches_explicit_loop(self, small_run):
        """Re-run the double loop by hand from the public building blocks."""
        _, ds, model, params, baselines = small_run
        hm = generate_heatmap(POSITIVE, ds, model, baselines, params, seed=3)
        sub = balanced_subset(ds.labels, params.m, 3)
        Xc = [ds[i] for i in sub]
        Zc = np.array([sample_latents(model, s) for s in Xc])
        M = np.zeros_like(hm.counts)
        for xh in baselines:
            ids = top_dissimilar_samples(Zc, sample_latents(model, xh), params.k)
            F, g = top_impactful_features(POSITIVE, model, xh, [Xc[i] for i in ids], params.l)
            for kk in range(params.k):
                for r in range(M.shape[0]):
                    if not g[kk, r]:
                        for j in F[kk, r]:
                            M[r, j] += 1
        np.testing.assert_array_equal(hm.counts, M)

    def test_out_of_block_picks_have_zero_impact(self, small_run):
        bm, ds, model, params, baselines = small_run
        sub = balanced_subset(ds.labels, params.m, 0)
        for xh in baselines[:3]:
            for i in sub[:5]:
                p = impact_measure(pair_rows(model, ds[i], xh, 16)).p
                for r in range(p.shape[0]):
                    outside = [j for j in range(8) if j not in bm.subsets[r // 3]]
                    assert np.all(p[r, outside] == 0.0)

    def test_h_rows_only(self, small_run):
        _, ds, model, params, baselines = small_run
        p2 = SelectionParams(params.m, params.k, params.l, h=2)
        hm = generate_heatmap(POSITIVE, ds, model, baselines, p2, seed=0)
        assert hm.counts[2:].sum() == 0

    def test_invalid_params(self, small_run):
        _, ds, model, _, baselines = small_run
        with pytest.raises(InputError):
            generate_heatmap(POSITIVE, ds, model, baselines, SelectionParams(m=16, k=17), seed=0)
        with pytest.raises(InputError):
            generate_heatmap(POSITIVE, ds, model, baselines, SelectionParams(m=16, l=9), seed=0)
        with pytest.raises(InputError):
            generate_heatmap(POSITIVE, ds, model, [], SelectionParams(m=16), seed=0)


class TestMerge:
    def test_zero_identity(self, small_run):
        _, ds, model, params, baselines = small_run
        hm = generate_heatmap(POSITIVE, ds, model, baselines, params, seed=0)
        merged = merge_heatmaps(hm, hm.zeros_like())
        np.testing.assert_array_equal(merged.counts, hm.counts)
        assert merged.n_baselines == hm.n_baselines

    def test_commutative_and_associative(self):
        rng = np.random.default_rng(0)
        maps = [HeatMap(rng.integers(0, 9, (3, 4)), POSITIVE, {"k": 1}, 2) for _ in range(3)]
        a, b, c = maps
        np.testing.assert_array_equal(merge_heatmaps(a, b).counts, merge_heatmaps(b, a).counts)
        np.testing.assert_array_equal(merge_heatmaps(merge_heatmaps(a, b), c).counts,
                                      merge_heatmaps(a, merge_heatmaps(b, c)).counts)

    def test_halves_equal_single_pass(self, small_run):
        _, ds, model, params, baselines = small_run
        full = generate_heatmap(POSITIVE, ds, model, baselines, params, seed=5)
        a = generate_heatmap(POSITIVE, ds, model, baselines[:3], params, seed=5)
        b = generate_heatmap(POSITIVE, ds, model, baselines[3:], params, seed=5)
        merged = merge_heatmaps(a, b)
        np.testing.assert_array_equal(merged.counts, full.counts)
        assert merged.n_baselines == full.n_baselines

    def test_metadata_mismatch(self):
        a = HeatMap(np.zeros((2, 2), dtype=np.int64), POSITIVE, {"k": 1}, 1)
        with pytest.raises(InputError):
            merge_heatmaps(a, HeatMap(np.zeros((2, 2), dtype=np.int64), NEGATIVE, {"k": 1}, 1))
        with pytest.raises(InputError):
            merge_heatmaps(a, HeatMap(np.zeros((2, 2), dtype=np.int64), POSITIVE, {"k": 2}, 1))


def test_default_baselines_held_out():
    ds = make_dataset(30, 2, 3, seed=0)
    sub = balanced_subset(ds.labels, 10, 0)
    base = default_baselines(ds, sub, 8, 0)
    ids = {ds[i].sample_id for i in sub}
    assert len(base) == 8 and not ids & {b.sample_id for b in base}
    assert sorted(b.label for b in base) == [0, 0, 0, 0, 1, 1, 1, 1]


def test_dataset_subset_helper():
    ds = Dataset([one_step([1.0], "a"), one_step([2.0], "b")])
    assert ds.subset([1]).samples[0].sample_id == "b"
