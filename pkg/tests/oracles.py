"""Independent reference implementations used only by the tests.

None of these share code with the package under test.
"""

from decimal import Decimal, getcontext
from itertools import combinations

import numpy as np


def svm_by_enumeration(x, y, feas_tol=1e-9):
    """Hard-margin SVM by brute force over small active sets.

    In the plane the optimum is pinned by at most three support vectors.  For
    every 2- and 3-subset containing both classes, solve the KKT system with
    all of its constraints active, and keep the feasible candidate of least
    ``||v||^2``.  Returns ``(v, b)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    best = None
    for k in (2, 3):
        for sub in combinations(range(n), k):
            sub = list(sub)
            ys = y[sub]
            if not (np.any(ys > 0) and np.any(ys < 0)):
                continue
            xs = x[sub]
            # unknowns: v (d), b, alpha (k)
            m = d + 1 + k
            A = np.zeros((m, m))
            rhs = np.zeros(m)
            # v - sum alpha_i y_i x_i = 0
            A[:d, :d] = np.eye(d)
            A[:d, d + 1:] = -(ys[:, None] * xs).T
            # sum alpha_i y_i = 0
            A[d, d + 1:] = ys
            # y_i (v x_i - b) = 1
            for r in range(k):
                A[d + 1 + r, :d] = ys[r] * xs[r]
                A[d + 1 + r, d] = -ys[r]
                rhs[d + 1 + r] = 1.0
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            v, b, alpha = sol[:d], sol[d], sol[d + 1:]
            if np.any(alpha < -1e-9):
                continue
            if np.min(y * (x @ v - b)) < 1 - feas_tol:
                continue
            val = float(v @ v)
            if best is None or val < best[0] - 1e-12:
                best = (val, v, b)
    if best is None:
        raise ValueError("no feasible active set")
    return best[1], best[2]


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


getcontext().prec = 40


def dsqrt(v):
    return Decimal(v).sqrt()


def thm1_decimal(L, w_dist, beta, mu, n):
    """Strongly convex leave-one-out bound evaluated in 40-digit decimal."""
    L, w_dist, beta, mu, n = map(Decimal, map(str, (L, w_dist, beta, mu, n)))
    root4 = (1 / (1 - mu / beta)).sqrt().sqrt()
    return (2 * L * w_dist / beta).sqrt() / (n * (root4 - 1))


def margin_term_decimal(nu, lam, n, B, gamma):
    nu, lam, n, B, gamma = map(Decimal, map(str, (nu, lam, n, B, gamma)))
    k = 1 + B / gamma
    a = (2 / (lam * n) * k).sqrt()
    b = (B + (B * B + 8 * n * lam * k).sqrt()) / (2 * n * lam)
    return nu * max(a, b)
