import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablab.errors import ParameterError
from stablab.gd_engine import TrainConfig, direction_gap
from stablab.quad_surrogate import make_quadratic_task, verify_thm1
from stablab.stability_lab import (
    GDTrainer,
    QuadTrainer,
    SvmTrainer,
    data_perturbation_stability,
    default_subset,
    loo_model_stability,
    normalized_loo_stability,
    svm_solution_shift,
)
from stablab.svm_oracle import solve_hard_margin
from stablab.synth_data import DatasetSpec, LabeledDataset, generate_dataset, leave_one_out


@pytest.fixture
def ds():
    return generate_dataset(DatasetSpec(n=30, seed=5))


GD = GDTrainer(TrainConfig(steps=300, eta_fraction=0.5, seed=1))


class TestNormalized:
    def test_svm_non_support_zero(self, ds):
        sol = solve_hard_margin(ds)
        rep = normalized_loo_stability(ds, SvmTrainer())
        support = set(sol.support_indices.tolist())
        for i, gap, skipped, _ in rep.per_index_gaps:
            assert not skipped
            if i not in support:
                assert gap <= 1e-8

    def test_svm_duplicated_all_zero(self, ds):
        dup = LabeledDataset(np.vstack([ds.features] * 2), np.concatenate([ds.labels] * 2))
        rep = normalized_loo_stability(dup, SvmTrainer(), subset=range(0, 60, 7))
        assert np.all(rep.gaps <= 1e-6)

    def test_batched_matches_retraining(self, ds):
        rep = normalized_loo_stability(ds, GD, subset=[0, 3, 17])
        bound = GD.bind(ds)
        full = bound.fit(ds)
        for i, gap, _, _ in rep.per_index_gaps:
            assert gap == pytest.approx(direction_gap(bound.fit(leave_one_out(ds, i)), full), rel=1e-8, abs=1e-14)

    def test_multihead_batched_matches(self, ds):
        tr = GDTrainer(TrainConfig(steps=100, eta_fraction=0.5, init_scale=1.0), heads=4)
        rep = normalized_loo_stability(ds, tr, subset=[2, 9])
        bound = tr.bind(ds)
        full = bound.fit(ds)
        for i, gap, _, _ in rep.per_index_gaps:
            assert gap == pytest.approx(direction_gap(bound.fit(leave_one_out(ds, i)), full), rel=1e-8, abs=1e-14)

    def test_aggregates(self, ds):
        rep = normalized_loo_stability(ds, GD)
        g = np.array([r[1] for r in rep.per_index_gaps])
        assert abs(rep.mean_gap - g.mean()) <= 1e-12
        assert abs(rep.std_gap - g.std()) <= 1e-12
        assert np.all((g >= 0) & (g <= 2))

    def test_skip_degenerate(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [-1.5, 0.2]])
        rep = normalized_loo_stability(LabeledDataset(x, np.array([1.0, -1.0, -1.0])), SvmTrainer())
        assert rep.n_skipped == 1
        assert rep.per_index_gaps[0][2] and "empties" in rep.per_index_gaps[0][3]
        assert len(rep.gaps) == 2

    def test_zero_steps_zero_init_raises(self, ds):
        from stablab.errors import DegenerateVectorError
        tr = GDTrainer(TrainConfig(steps=0, init_scale=0.0, eta_fraction=0.5))
        with pytest.raises(DegenerateVectorError):
            normalized_loo_stability(ds, tr, subset=[0])

    def test_reordering_invariance(self, ds):
        perm = np.random.default_rng(0).permutation(ds.n)
        a = normalized_loo_stability(ds, GD)
        b = normalized_loo_stability(ds.take(perm), GD)
        gap_a = {i: g for i, g, _, _ in a.per_index_gaps}
        for j, g, _, _ in b.per_index_gaps:
            assert g == pytest.approx(gap_a[perm[j]], rel=1e-6, abs=1e-12)

    def test_csv(self, ds, tmp_path):
        rep = normalized_loo_stability(ds, SvmTrainer(), subset=[0, 1])
        rep.to_csv(tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "i,gap,skipped,reason"

    def test_decreases_with_n(self):
        means = []
        for n in (100, 200, 400):
            m = [normalized_loo_stability(generate_dataset(DatasetSpec(n=n, seed=s)), GD,
                                          subset=np.arange(0, n, n // 25)).mean_gap for s in range(5)]
            means.append(np.median(m))
        assert means[0] > means[1] > means[2]


class TestSubset:
    def test_full_below_threshold(self):
        assert np.array_equal(default_subset(500), np.arange(500))

    def test_sampled_above(self):
        s = default_subset(501, seed=3)
        assert len(s) == 200 and len(set(s)) == 200
        assert np.array_equal(s, default_subset(501, seed=3))


class TestUnnormalized:
    def test_zero_steps(self):
        task = make_quadratic_task(4, 10, 0.2, 1.0, 1.0, seed=0)
        rep = loo_model_stability(task, QuadTrainer(steps=0))
        assert np.all(rep.gaps == 0)

    def test_isotropic_zero(self):
        task = make_quadratic_task(4, 10, 1.0, 1.0, 1.0, seed=0)
        assert np.all(loo_model_stability(task, QuadTrainer(steps=17)).gaps == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_every_gap_below_bound(self, seed):
        task = make_quadratic_task(6, 40, 0.3, 1.0, 1.0, seed=seed)
        rep = loo_model_stability(task, QuadTrainer(steps=5))
        check = verify_thm1(task, 5)
        assert np.all(rep.gaps <= check.rhs)

    def test_dataset_path(self, ds):
        rep = loo_model_stability(ds, SvmTrainer(), subset=[0, 1, 2])
        assert not rep.normalized and len(rep.gaps) == 3


class TestSvmShift:
    def test_non_support_zero_and_lipschitz(self, ds):
        sol = solve_hard_margin(ds)
        shifts = svm_solution_shift(ds)
        for s in shifts:
            if s.index not in set(sol.support_indices.tolist()):
                assert s.shift <= 1e-7
            assert s.direction_gap <= s.lipschitz_rhs + 1e-12

    def test_trend_in_n(self):
        means = []
        for n in (20, 80, 320):
            vals = [np.mean([s.shift for s in svm_solution_shift(generate_dataset(DatasetSpec(n=n, seed=k)))])
                    for k in range(8)]
            means.append(np.mean(vals))
        assert means[0] > means[1] > means[2]


class TestPerturbation:
    def test_svm_deterministic_floor_small_drop(self, ds):
        rep = data_perturbation_stability(ds, 0.01, 3, SvmTrainer())
        # ceil(0.99 * 30) == 30 keeps every sample
        assert np.all(rep.gaps == 0)

    def test_larger_drop_larger_gap(self):
        big, small = [], []
        for s in range(5):
            d = generate_dataset(DatasetSpec(n=100, seed=s))
            small.append(data_perturbation_stability(d, 0.1, 5, GD, seed=s).mean_gap)
            big.append(data_perturbation_stability(d, 0.3, 5, GD, seed=s).mean_gap)
        assert np.mean(big) > np.mean(small)

    @pytest.mark.parametrize("ratio", [0.0, 1.0])
    def test_bad_ratio(self, ds, ratio):
        with pytest.raises(ParameterError):
            data_perturbation_stability(ds, ratio, 2, SvmTrainer())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), r=st.floats(0.01, 10.0))
def test_normalization_lipschitz(seed, r):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((500, 4))
    y = rng.standard_normal((500, 4))
    # push both below-norm samples out to radius r
    for v in (x, y):
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        v *= np.maximum(r / norms, 1.0)
    lhs = np.linalg.norm(x / np.linalg.norm(x, axis=1, keepdims=True)
                         - y / np.linalg.norm(y, axis=1, keepdims=True), axis=1)
    assert np.all(lhs <= 2 / r * np.linalg.norm(x - y, axis=1) * (1 + 1e-12))
