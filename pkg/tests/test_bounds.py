import math

import numpy as np
import pytest

from oracles import margin_term_decimal, thm1_decimal
from stablab.bounds import (
    BoundInputs,
    convergence_term,
    cor1_rhs,
    evaluate,
    margin_term,
    mh_factor,
    mh_rhs,
    thm1_rhs,
    thm2_rhs,
)
from stablab.errors import DomainError, PreconditionError


class TestThm1:
    def test_reference_value(self):
        assert thm1_rhs(1, 1, 1, 0.5, 100) == pytest.approx(float(thm1_decimal(1, 1, 1, 0.5, 100)), rel=1e-14)
        assert thm1_rhs(1, 1, 1, 0.5, 100) == pytest.approx(0.0747442, abs=5e-8)

    def test_zero_lipschitz(self):
        assert thm1_rhs(0, 1, 1, 0.5, 100) == 0.0

    def test_doubling_n_halves(self):
        assert thm1_rhs(2, 3, 1.5, 0.5, 200) == pytest.approx(thm1_rhs(2, 3, 1.5, 0.5, 100) / 2, rel=1e-15)

    @pytest.mark.parametrize("mu", [1.0, 1.5])
    def test_domain(self, mu):
        with pytest.raises(DomainError):
            thm1_rhs(1, 1, 1.0, mu, 10)


class TestThm2:
    def test_reference_value(self):
        v = thm2_rhs(0, 10, 1, 1, 100, 1, 1)
        assert v == pytest.approx(float(margin_term_decimal(1, 1, 100, 1, 1)), rel=1e-14)
        assert v == pytest.approx(0.205062, abs=5e-7)

    def test_first_term_at_e_to_e(self):
        assert convergence_term(1.0, math.e ** math.e) == pytest.approx(math.exp(-1), rel=1e-14)

    def test_t_below_three(self):
        with pytest.raises(DomainError):
            convergence_term(1.0, 2.9)

    @pytest.mark.parametrize("kw", [dict(nu=0), dict(lam=-1), dict(n=0), dict(B=0), dict(gamma=0)])
    def test_nonpositive(self, kw):
        args = dict(nu=1, lam=1, n=10, B=1, gamma=1)
        args.update(kw)
        with pytest.raises(DomainError):
            margin_term(**args)


class TestCor1AndMh:
    def test_cor1_value(self):
        assert cor1_rhs(0, 10, 1, 2, 1, 100) == pytest.approx(0.02, rel=1e-15)

    def test_cor1_linear_in_l(self):
        a, b = cor1_rhs(0, 10, 1, 1, 1, 50), cor1_rhs(0, 10, 1, 3, 1, 50)
        assert b == pytest.approx(3 * a, rel=1e-15)

    def test_cor1_large_n_limit(self):
        assert cor1_rhs(1, 100, 1, 1, 1, 1e15) == pytest.approx(convergence_term(1, 100), rel=1e-12)

    def test_mh_factor(self):
        assert mh_factor(100, math.exp(-1)) == pytest.approx(math.sqrt(0.1), rel=1e-14)

    def test_mh_quadruple_h_halves(self):
        assert mh_factor(400, 0.1) == pytest.approx(mh_factor(100, 0.1) / 2, rel=1e-14)

    def test_mh_threshold_strict(self):
        with pytest.raises(PreconditionError) as exc:
            mh_factor(10, math.exp(-1))
        assert exc.value.threshold == pytest.approx(10.0)

    @pytest.mark.parametrize("delta", [0.0, 1.0, 1.5])
    def test_mh_delta_domain(self, delta):
        with pytest.raises(DomainError):
            mh_factor(100, delta)


def _grid(lo, hi, k=6):
    return np.geomspace(lo, hi, k)


class TestMonotonicity:
    def test_thm1(self):
        for L in _grid(0.1, 10):
            vals = [thm1_rhs(L, 1, 1, 0.5, n) for n in _grid(2, 1e4)]
            assert all(a > b for a, b in zip(vals, vals[1:]))
        for n in _grid(2, 1e4):
            Ls = [thm1_rhs(L, 1, 1, 0.5, n) for L in _grid(0.1, 10)]
            ds = [thm1_rhs(1, d, 1, 0.5, n) for d in _grid(0.1, 10)]
            assert all(a < b for a, b in zip(Ls, Ls[1:]))
            assert all(a < b for a, b in zip(ds, ds[1:]))

    def test_thm2(self):
        base = dict(C=1, t=100, nu=1, lam=1, n=100, B=1, gamma=1)
        for key, values, direction in [("n", _grid(2, 1e4), -1), ("t", _grid(16, 1e6), -1),
                                       ("gamma", _grid(0.01, 10), -1), ("B", _grid(0.01, 10), 1)]:
            vals = [thm2_rhs(**{**base, key: v}) for v in values]
            diffs = np.diff(vals)
            assert np.all(direction * diffs > 0), key

    def test_convergence_term_peaks_at_e_to_e(self):
        # ln ln t / ln t rises until t = e^e, so decrease in t holds only beyond it
        assert convergence_term(1, 10) < convergence_term(1, math.e ** math.e) > convergence_term(1, 20)

    def test_cor1(self):
        vals = [cor1_rhs(1, 100, 1, L, 1, 10) for L in _grid(0.01, 10)]
        assert np.all(np.diff(vals) > 0)

    def test_mh(self):
        vals = [mh_rhs(1, 1, 100, H, 0.1, 1, 1, 100, 1, 1) for H in _grid(21, 1e4)]
        assert np.all(np.diff(vals) < 0)

    def test_structural_consistency(self):
        for n in (10, 100, 1000):
            lhs = thm2_rhs(0.7, 50, 2, 0.5, n, 3, 0.4)
            rhs = cor1_rhs(0.7, 50, 2, 0, 0.5, n) + margin_term(2, 0.5, n, 3, 0.4)
            assert lhs == pytest.approx(rhs, rel=1e-15)


class TestEvaluate:
    def test_by_name(self):
        assert evaluate("cor1", {"C": 0, "t": 10, "nu": 1, "L": 2, "lam": 1, "n": 100}) == pytest.approx(0.02)

    def test_dataclass(self):
        v = evaluate("thm1", BoundInputs(L=1, w_dist=1, beta=1, mu=0.5, n=100))
        assert v == pytest.approx(thm1_rhs(1, 1, 1, 0.5, 100))

    def test_missing(self):
        with pytest.raises(DomainError, match="gamma"):
            evaluate("thm2", {"C": 0, "t": 10, "nu": 1, "lam": 1, "n": 100, "B": 1})

    def test_unknown(self):
        with pytest.raises(DomainError):
            evaluate("thm9", {})
