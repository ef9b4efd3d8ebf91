import numpy as np
import pytest

from oracles import svm_by_enumeration
from stablab.errors import DegenerateVectorError, InfeasibleError
from stablab.svm_oracle import KKT_TOL, SvmSolution, kkt_report, margin, solve_hard_margin
from stablab.synth_data import DatasetSpec, LabeledDataset, generate_dataset


class TestKnownSolutions:
    def test_two_points(self, two_point_ds):
        sol = solve_hard_margin(two_point_ds)
        assert np.allclose(sol.v_hat, [1.0, 0.0], atol=1e-9)
        assert sol.b_hat == pytest.approx(0.0, abs=1e-9)
        assert sol.gamma == pytest.approx(1.0)
        assert list(sol.support_indices) == [0, 1]

    def test_shifted_pair(self):
        ds = LabeledDataset(np.array([[3.0, 1.0], [1.0, 1.0]]), np.array([1.0, -1.0]))
        sol = solve_hard_margin(ds)
        assert np.allclose(sol.v_hat, [1.0, 0.0], atol=1e-9)
        assert sol.b_hat == pytest.approx(2.0, abs=1e-9)

    def test_extra_far_point_not_support(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [5.0, 3.0]])
        sol = solve_hard_margin(LabeledDataset(x, np.array([1.0, -1.0, 1.0])))
        assert list(sol.support_indices) == [0, 1]
        assert sol.dual_values[2] == 0.0

    def test_json_keys(self, two_point_ds):
        assert set(solve_hard_margin(two_point_ds).to_json()) == {"v_hat", "b_hat", "gamma", "support",
                                                                  "kkt_residual"}


class TestAgainstEnumeration:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_oracle(self, seed):
        n = int(np.random.default_rng(seed).integers(4, 20))
        ds = generate_dataset(DatasetSpec(n=n, center_distance=1.2, cluster_radius=0.5, bound_B=1.1, seed=seed))
        v, _ = svm_by_enumeration(ds.features, ds.labels)
        sol = solve_hard_margin(ds)
        assert sol.v_hat @ sol.v_hat == pytest.approx(v @ v, abs=1e-6)
        assert sol.kkt_residual <= 1e-8


class TestCertificate:
    @pytest.mark.parametrize("seed", range(5))
    def test_kkt_report(self, seed):
        ds = generate_dataset(DatasetSpec(n=60, seed=seed))
        sol = solve_hard_margin(ds)
        rep = kkt_report(sol, ds)
        assert rep.max_violation <= 1e-8
        assert rep.reconstruction_error <= 1e-12
        assert rep.dual_balance <= 1e-9
        assert min(rep.support_count_per_class) >= 1

    def test_intercept_bound(self):
        for seed in range(20):
            spec = DatasetSpec(n=50, center_distance=2.0, cluster_radius=0.8, bound_B=1.8, seed=seed)
            sol = solve_hard_margin(generate_dataset(spec))
            assert abs(sol.b_hat) <= 1 + np.linalg.norm(sol.v_hat) * spec.bound_B + 1e-9

    def test_duplicated_points_same_solution(self, small_ds):
        dup = LabeledDataset(np.vstack([small_ds.features] * 2), np.concatenate([small_ds.labels] * 2))
        a, b = solve_hard_margin(small_ds), solve_hard_margin(dup)
        assert np.allclose(a.w_hat, b.w_hat, atol=1e-7)


class TestErrors:
    def test_non_separable(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(InfeasibleError):
            solve_hard_margin(LabeledDataset(x, np.array([1.0, -1.0, 1.0])))

    def test_coincident_opposite_points(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(InfeasibleError):
            solve_hard_margin(LabeledDataset(x, np.array([1.0, -1.0])))

    def test_margin_zero_vector(self):
        sol = SvmSolution(np.zeros(2), 0.0, np.inf, np.array([]), np.zeros(2), 0.0)
        with pytest.raises(DegenerateVectorError):
            margin(sol)

    def test_default_tolerance(self):
        assert KKT_TOL <= 1e-8
