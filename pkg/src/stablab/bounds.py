"""Closed-form stability bounds.

All logarithms are natural.  The constants ``C``, ``lam``, ``nu`` and ``xi``
are existential in the underlying results, so callers always pass them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError, PreconditionError

LOG_BASE = "e"


def _positive(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be finite and > 0, got {v}")


def _nonneg(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v >= 0):
            raise DomainError(f"{name} must be finite and >= 0, got {v}")


def thm1_rhs(L: float, w_dist: float, beta: float, mu: float, n: float) -> float:
    """Leave-one-out bound for GD with step ``1/beta`` on strongly convex smooth losses."""
    _nonneg(L=L, w_dist=w_dist)
    _positive(beta=beta, mu=mu)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if mu >= beta:
        raise DomainError(f"need mu < beta, got mu={mu}, beta={beta}")
    denom = n * ((1.0 - mu / beta) ** -0.25 - 1.0)
    return math.sqrt(2.0 * L * w_dist / beta) / denom


def convergence_term(C: float, t: float) -> float:
    """``C * ln ln t / ln t``."""
    _nonneg(C=C)
    if not (math.isfinite(t) and t >= 3):
        raise DomainError(f"t must be >= 3, got {t}")
    lt = math.log(t)
    return C * math.log(lt) / lt


def margin_term(nu: float, lam: float, n: float, B: float, gamma: float) -> float:
    """Second term of the head-tuning bound, growing with ``B / gamma``."""
    _positive(nu=nu, lam=lam, n=n, B=B, gamma=gamma)
    k = 1.0 + B / gamma
    first = math.sqrt(2.0 / (lam * n) * k)
    second = (B + math.sqrt(B * B + 8.0 * n * lam * k)) / (2.0 * n * lam)
    return nu * max(first, second)


def thm2_rhs(C, t, nu, lam, n, B, gamma) -> float:
    return convergence_term(C, t) + margin_term(nu, lam, n, B, gamma)


def cor1_rhs(C, t, nu, L, lam, n) -> float:
    _positive(nu=nu, lam=lam, n=n)
    _nonneg(L=L)
    return convergence_term(C, t) + nu * L / (lam * n)


def mh_threshold(delta: float) -> float:
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 + 8.0 * math.log(1.0 / delta)


def mh_factor(H: float, delta: float) -> float:
    """``sqrt((2 + 8 ln(1/delta)) / H)``; requires ``H`` above the threshold."""
    thr = mh_threshold(delta)
    if not H > thr:
        raise PreconditionError(f"H={H} must exceed 2 + 8 ln(1/delta) = {thr:.6g}", threshold=thr)
    return math.sqrt(thr / H)


def mh_rhs(C, xi, t, H, delta, nu, lam, n, B, gamma) -> float:
    _nonneg(xi=xi)
    return mh_factor(H, delta) * xi * convergence_term(C, t) + margin_term(nu, lam, n, B, gamma)


@dataclass(frozen=True)
class BoundInputs:
    L: float | None = None
    w_dist: float | None = None
    beta: float | None = None
    mu: float | None = None
    n: float | None = None
    t: float | None = None
    B: float | None = None
    gamma: float | None = None
    lam: float | None = None
    nu: float | None = None
    C: float | None = None
    xi: float | None = None
    H: float | None = None
    delta: float | None = None


EVALUATORS = {
    "thm1": (thm1_rhs, ("L", "w_dist", "beta", "mu", "n")),
    "thm2": (thm2_rhs, ("C", "t", "nu", "lam", "n", "B", "gamma")),
    "cor1": (cor1_rhs, ("C", "t", "nu", "L", "lam", "n")),
    "mh": (mh_rhs, ("C", "xi", "t", "H", "delta", "nu", "lam", "n", "B", "gamma")),
}


def evaluate(kind: str, inputs: BoundInputs | dict) -> float:
    """Evaluate bound ``kind`` reading its arguments by name from ``inputs``."""
    if kind not in EVALUATORS:
        raise DomainError(f"unknown bound {kind!r}; choose from {', '.join(EVALUATORS)}")
    fn, names = EVALUATORS[kind]
    params = asdict(inputs) if isinstance(inputs, BoundInputs) else dict(inputs)
    missing = [k for k in names if params.get(k) is None]
    if missing:
        raise DomainError(f"bound {kind} needs parameters: {', '.join(missing)}")
    return fn(*(float(params[k]) for k in names))
