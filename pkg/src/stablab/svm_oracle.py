"""Hard-margin SVM by pairwise dual coordinate ascent.

Solves ``min ||v||^2  s.t.  y_i (v @ x_i - b) >= 1`` through its dual

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j>
    s.t. a >= 0,  sum(a * y) = 0

with an SMO-style update on the most violating pair.  Ties are broken by the
lowest index, so the iteration sequence is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ConvergenceError, DegenerateVectorError, InfeasibleError, ShapeError
from .synth_data import LabeledDataset

KKT_TOL = 1e-10
SUPPORT_TOL = 1e-6
MAX_PAIR_UPDATES = 1_000_000
# dual mass beyond this means the constraints cannot be met
DUAL_GUARD = 1e12


@dataclass(frozen=True)
class SvmSolution:
    v_hat: np.ndarray
    b_hat: float
    gamma: float
    support_indices: np.ndarray
    dual_values: np.ndarray
    kkt_residual: float
    iterations: int = 0

    @property
    def w_hat(self) -> np.ndarray:
        """Parameters in the augmented space ``[v, b]``."""
        return np.append(self.v_hat, self.b_hat)

    def to_json(self) -> dict:
        return {
            "v_hat": [float(v) for v in self.v_hat],
            "b_hat": float(self.b_hat),
            "gamma": float(self.gamma),
            "support": [int(i) for i in self.support_indices],
            "kkt_residual": float(self.kkt_residual),
        }


def _as_xy(data):
    if isinstance(data, LabeledDataset):
        return data.features, data.labels
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def is_separable(x, y) -> bool:
    """LP feasibility of ``y_i (v @ x_i - b) >= 1``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    A = -np.hstack([y[:, None] * x, -y[:, None]])
    res = linprog(np.zeros(x.shape[1] + 1), A_ub=A, b_ub=-np.ones(len(y)),
                  bounds=[(None, None)] * (x.shape[1] + 1), method="highs")
    return res.status == 0


def solve_hard_margin(data, tol: float = KKT_TOL, max_iter: int = MAX_PAIR_UPDATES) -> SvmSolution:
    """Max-margin classifier of a separable dataset.

    ``data`` is a :class:`LabeledDataset` or an ``(x, y)`` pair.  Stops when
    the dual KKT gap ``max_up(-y G) - min_low(-y G)`` is at most ``tol``.
    """
    x, y = _as_xy(data)
    n = x.shape[0]
    if y.shape != (n,):
        raise ShapeError("labels do not match features")
    if not is_separable(x, y):
        raise InfeasibleError("data is not linearly separable")
    K = x @ x.T
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    pos = y > 0
    neg = ~pos
    it = 0
    gap = np.inf
    while True:
        score = -y * grad
        active = alpha > 0
        up = pos | active
        low = neg | active
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap <= tol:
            break
        if it >= max_iter:
            if gap > 1e-6:
                raise ConvergenceError(
                    f"SMO hit {max_iter} pair updates with KKT gap {gap:.3e}", residual=float(gap))
            break
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = gap / curv if curv > 1e-15 else np.inf
        # keep both multipliers nonnegative along a_i += y_i t, a_j -= y_j t
        if y[i] < 0:
            t = min(t, alpha[i])
        if y[j] > 0:
            t = min(t, alpha[j])
        if not np.isfinite(t):
            raise InfeasibleError(f"samples {i} and {j} cannot be separated")
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        # clipped steps land exactly on zero; remove round-off below it
        alpha[i] = max(alpha[i], 0.0)
        alpha[j] = max(alpha[j], 0.0)
        grad += t * (y[i] * Q[:, i] - y[j] * Q[:, j])
        it += 1
        if alpha.sum() > DUAL_GUARD:
            raise InfeasibleError("dual variables diverge; data is not linearly separable")

    v = (alpha * y) @ x
    sv = alpha > 0
    if not sv.any():
        raise InfeasibleError("no support vectors found")
    b = float(np.mean(x[sv] @ v - y[sv]))
    norm = float(np.linalg.norm(v))
    margins = y * (x @ v - b)
    residual = float(max(0.0, np.max(1.0 - margins)))
    support = np.flatnonzero(margins <= 1.0 + SUPPORT_TOL)
    gamma = 1.0 / norm if norm > 0 else np.inf
    return SvmSolution(v, b, gamma, support, alpha, residual, it)


def margin(sol: SvmSolution) -> float:
    norm = float(np.linalg.norm(sol.v_hat))
    if norm == 0.0:
        raise DegenerateVectorError("SVM weight vector is zero; margin undefined")
    return 1.0 / norm


@dataclass(frozen=True)
class KktReport:
    max_violation: float
    support_count_per_class: tuple[int, int]
    reconstruction_error: float
    dual_balance: float


def kkt_report(sol: SvmSolution, data) -> KktReport:
    """Recompute the certificate quantities of ``sol`` from scratch."""
    x, y = _as_xy(data)
    v = np.asarray(sol.v_hat, dtype=float)
    margins = y * (x @ v - sol.b_hat)
    violation = float(max(0.0, np.max(1.0 - margins)))
    support = margins <= 1.0 + SUPPORT_TOL
    counts = (int(np.count_nonzero(support & (y > 0))), int(np.count_nonzero(support & (y < 0))))
    alpha = np.asarray(sol.dual_values, dtype=float)
    if alpha.shape == y.shape:
        recon = float(np.max(np.abs((alpha * y) @ x - v))) if x.size else 0.0
        balance = float(abs(alpha @ y))
    else:
        recon = balance = np.inf
    return KktReport(violation, counts, recon, balance)
