import numpy as np
import pytest

from latentattr.attribution import PointwiseModel
from latentattr.errors import InputError
from latentattr.features import fit_minmax, minmax_shift
from latentattr.heatmap import (
    NEGATIVE,
    POSITIVE,
    SelectionParams,
    balanced_subset,
    default_baselines,
    generate_heatmaps,
)
from latentattr.latent_rank import (
    ReadoutSpec,
    explanation_chain,
    linear_readout_attribution,
    permutation_importance,
    rank_latents,
)
from latentattr.samples import Dataset, TimeSeriesSample
from latentattr.synth import contiguous_subsets, make_block_model, make_dataset


def test_linear_attribution_hand():
    np.testing.assert_array_equal(linear_readout_attribution(ReadoutSpec([2.0, -1.0]), [3.0, 4.0], [0.0, 0.0]),
                                  [6.0, -4.0])


def test_linear_attribution_zero():
    r = ReadoutSpec([2.0, -1.0, 0.5])
    assert np.all(linear_readout_attribution(r, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0)


def test_linear_attribution_completeness():
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = ReadoutSpec(rng.normal(size=12), rng.normal())
        z, zr = rng.normal(size=(2, 12))
        total = linear_readout_attribution(r, z, zr).sum()
        assert total == pytest.approx(r.predict(z) - r.predict(zr), abs=1e-12)


class TestPermutation:
    def test_dead_coordinate(self):
        Z = np.random.default_rng(1).normal(size=(50, 3))
        scores = permutation_importance(ReadoutSpec([1.0, -2.0, 0.0]), Z, 5, seed=0)
        assert scores[2] == 0.0 and scores[0] > 0 and scores[1] > 0

    def test_constant_column(self):
        Z = np.random.default_rng(2).normal(size=(30, 3))
        Z[:, 1] = 4.0
        assert permutation_importance(lambda A: np.tanh(A).sum(axis=1), Z, 3, seed=1)[1] == 0.0

    def test_linear_ranking_matches_expectation(self):
        rng = np.random.default_rng(3)
        w = np.array([0.2, -1.5, 0.7, 3.0, -0.1, 1.0])
        Z = rng.normal(size=(4000, 6)) * np.array([1.0, 2.0, 0.5, 1.0, 3.0, 1.5])
        scores = permutation_importance(ReadoutSpec(w), Z, 3, seed=0)
        expected = np.abs(w) * Z.std(axis=0)
        assert set(np.argsort(-scores)[:3]) == set(np.argsort(-expected)[:3])

    def test_seeded(self):
        Z = np.random.default_rng(4).normal(size=(20, 4))
        head = ReadoutSpec([1.0, 2.0, 3.0, 4.0])
        assert permutation_importance(head, Z, 4, 9).tobytes() == permutation_importance(head, Z, 4, 9).tobytes()

    def test_batch_too_small(self):
        with pytest.raises(InputError):
            permutation_importance(ReadoutSpec([1.0]), np.ones((1, 1)), 1)


class TestRanking:
    def test_sorted_with_tiebreak(self):
        Z = np.array([[1.0, 1.0, 0.0, 2.0], [-1.0, -1.0, 0.0, -2.0]])
        ranking = rank_latents(ReadoutSpec([1.0, -1.0, 5.0, 0.5]), Z, 2, 2)
        assert [r.row for r in ranking] == [0, 1, 3, 2]
        assert [(r.state, r.time) for r in ranking][:2] == [(0, 0), (0, 1)]
        assert [r.sign for r in ranking][:2] == [1, -1]

    def test_positive_rescaling_invariance(self):
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(40, 8))
        w = rng.normal(size=8)
        a = [r.row for r in rank_latents(ReadoutSpec(w), Z, 2, 4)]
        b = [r.row for r in rank_latents(ReadoutSpec(7.5 * w), Z, 2, 4)]
        assert a == b

    def test_permutation_method(self):
        rng = np.random.default_rng(6)
        Z = rng.normal(size=(60, 4))
        ranking = rank_latents(ReadoutSpec([0.0, 0.1, -4.0, 1.0]), Z, 1, 4, method="permutation", seed=1)
        assert ranking[0].row == 2 and ranking[0].sign == -1
        assert ranking[-1].row == 0 and ranking[-1].score == 0.0


@pytest.fixture(scope="module")
def block_setup():
    bm = make_block_model(12, 4, contiguous_subsets(12, 4, 3), seed=1)
    raw = make_dataset(120, 3, 12, seed=2, activity=0.8, max_count=20)
    stats = fit_minmax([s.values for s in raw.samples])
    ds = Dataset([TimeSeriesSample(s.sample_id, s.times, minmax_shift(s.values, stats), s.label)
                  for s in raw.samples], raw.feature_names)
    model = PointwiseModel(bm.mlp)
    readout = ReadoutSpec(np.linspace(-1, 1, 12))
    params = SelectionParams(m=32, k=4, l=3)
    baselines = default_baselines(ds, balanced_subset(ds.labels, 32, 0), 8, 0)
    return bm, ds, model, readout, params, baselines


class TestExplanationChain:
    def test_empty(self, block_setup):
        _, ds, model, readout, params, baselines = block_setup
        report = explanation_chain(model, readout, ds, baselines, params, 0)
        assert report.empty and not report.heatmaps and not report.scatter

    def test_structure(self, block_setup):
        _, ds, model, readout, params, baselines = block_setup
        report = explanation_chain(model, readout, ds, baselines, params, 3, seed=0)
        assert len(report.top) == 3 and len(report.ranking) == 12
        rows = [r.row for r in report.top]
        assert report.heatmaps[POSITIVE].counts.shape == (3, 12)
        for r in rows:
            ids, table = report.scatter[(r, POSITIVE)]
            assert table.shape == (len(ds), 3)
            a, b = report.top_features[(r, POSITIVE)][:2]
            n = r % 3
            np.testing.assert_array_equal(table[:, 0], [s.values[n, a] for s in ds.samples])

    def test_deterministic(self, block_setup):
        _, ds, model, readout, params, baselines = block_setup
        a = explanation_chain(model, readout, ds, baselines, params, 2, seed=3)
        b = explanation_chain(model, readout, ds, baselines, params, 2, seed=3)
        assert a.top == b.top and a.top_features == b.top_features
        for key in a.scatter:
            assert a.scatter[key][1].tobytes() == b.scatter[key][1].tobytes()

    def test_slices_match_full_maps(self, block_setup):
        _, ds, model, readout, params, baselines = block_setup
        report = explanation_chain(model, readout, ds, baselines, params, 2, seed=4)
        full = generate_heatmaps([POSITIVE, NEGATIVE], ds, model, baselines, params, seed=4)
        rows = [r.row for r in report.top]
        for d in (POSITIVE, NEGATIVE):
            np.testing.assert_array_equal(report.heatmaps[d].counts, full[d].counts[rows])
