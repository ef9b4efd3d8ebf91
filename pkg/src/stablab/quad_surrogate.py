"""Quadratic surrogate of full fine-tuning.

Each sample owns a loss ``f_i(w) = 1/2 (w - w*)' H_i (w - w*)`` with a shared
optimum ``w*`` and a Hessian whose spectrum lies in ``[mu, beta]``.  Training
is full-batch gradient descent on the mean loss, so the error ``e = w - w*``
evolves linearly: ``e <- (I - eta * mean(H)) e``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import thm1_rhs
from .errors import DivergenceError, DomainError, ParameterError, ShapeError

EIG_TOL = 1e-9


@dataclass(frozen=True)
class QuadraticTask:
    w_star: np.ndarray
    hessians: np.ndarray
    mu: float
    beta: float
    w0: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.hessians.shape[0]

    @property
    def d(self) -> int:
        return self.w_star.shape[0]

    @property
    def init_distance(self) -> float:
        return float(np.linalg.norm(self.w0 - self.w_star))

    def mean_hessian(self) -> np.ndarray:
        return self.hessians.mean(axis=0)

    def without(self, i: int) -> "QuadraticTask":
        if not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for n={self.n}")
        if self.n < 2:
            raise ParameterError("cannot remove the only sample")
        keep = np.arange(self.n) != i
        return QuadraticTask(self.w_star, self.hessians[keep], self.mu, self.beta, self.w0, self.seed)


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_quadratic_task(d: int, n: int, mu: float, beta: float, init_distance: float,
                        seed: int = 0) -> QuadraticTask:
    """Random task with every Hessian spectrum pinned to ``[mu, beta]``.

    Each diagonal draw has its smallest entry set to ``mu`` and its largest to
    ``beta`` so the declared bounds are tight.  With ``mu == beta`` every
    Hessian is exactly ``beta * I``.
    """
    if not (np.isfinite(mu) and np.isfinite(beta) and 0 < mu <= beta):
        raise ParameterError(f"need 0 < mu <= beta, got mu={mu}, beta={beta}")
    if d < 1 or n < 2:
        raise ParameterError(f"need d >= 1 and n >= 2, got d={d}, n={n}")
    if not (np.isfinite(init_distance) and init_distance >= 0):
        raise ParameterError("init_distance must be finite and >= 0")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(d)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    w0 = w_star + init_distance * u
    if mu == beta:
        hess = np.broadcast_to(beta * np.eye(d), (n, d, d)).copy()
    else:
        hess = np.empty((n, d, d))
        for i in range(n):
            q = _random_orthogonal(rng, d)
            diag = rng.uniform(mu, beta, d)
            # with d == 1 only the upper end can be pinned
            diag[0] = beta
            if d > 1:
                diag[1] = mu
            h = (q * diag) @ q.T
            hess[i] = (h + h.T) / 2
        eig = np.linalg.eigvalsh(hess)
        if eig.min() < mu - EIG_TOL or eig.max() > beta + EIG_TOL:
            raise ParameterError("constructed Hessian spectrum escaped [mu, beta]")
    return QuadraticTask(w_star, hess, float(mu), float(beta), w0, seed)


def quad_loss_grad(task: QuadraticTask, w, i: int | None = None) -> tuple[float, np.ndarray]:
    """Per-sample ``(1/2 e'H_i e, H_i e)``, or their mean over samples if ``i`` is None."""
    w = np.asarray(w, dtype=float)
    if w.shape != task.w_star.shape:
        raise ShapeError(f"w has shape {w.shape}, task dimension is {task.d}")
    e = w - task.w_star
    H = task.mean_hessian() if i is None else task.hessians[i]
    g = H @ e
    return 0.5 * float(e @ g), g


@dataclass
class QuadTrajectory:
    ws: np.ndarray
    dist: np.ndarray
    loss: np.ndarray
    eta: float

    @property
    def final_w(self) -> np.ndarray:
        return self.ws[-1]


def _check_eta(task: QuadraticTask, eta, strict: bool) -> float:
    eta = 1.0 / task.beta if eta is None else float(eta)
    if not (np.isfinite(eta) and eta > 0):
        raise ParameterError(f"eta must be finite and > 0, got {eta}")
    if strict and eta > 1.0 / task.beta * (1 + 1e-12):
        raise ParameterError(f"eta={eta} exceeds 1/beta={1 / task.beta}")
    return eta


def train_quad(task: QuadraticTask, T: int, eta: float | None = None, strict: bool = True) -> QuadTrajectory:
    """Gradient descent on the mean quadratic loss; records every step."""
    if T < 0:
        raise ParameterError("T must be >= 0")
    eta = _check_eta(task, eta, strict)
    step = np.eye(task.d) - eta * task.mean_hessian()
    Hbar = task.mean_hessian()
    E = np.empty((T + 1, task.d))
    E[0] = task.w0 - task.w_star
    for t in range(T):
        E[t + 1] = step @ E[t]
        if not np.isfinite(E[t + 1]).all():
            raise DivergenceError(f"non-finite iterate at step {t + 1}", step=t + 1)
    loss = 0.5 * np.einsum("ti,ij,tj->t", E, Hbar, E)
    return QuadTrajectory(E + task.w_star, np.linalg.norm(E, axis=1), loss, eta)


def empirical_lipschitz(task: QuadraticTask, trajectory) -> float:
    """Largest per-sample gradient norm ``||H_i (w_t - w*)||`` along the path(s).

    ``trajectory`` is a :class:`QuadTrajectory`, an ``(T+1, d)`` array of
    iterates, or a list of those.  Since ``||H_i e|| <= beta ||e||`` the scan
    stops at the first step whose error norm cannot beat the current maximum.
    """
    paths = trajectory if isinstance(trajectory, list) else [trajectory]
    best = 0.0
    for path in paths:
        ws = path.ws if isinstance(path, QuadTrajectory) else np.asarray(path, dtype=float)
        if ws.size == 0:
            raise ParameterError("empty trajectory")
        E = ws - task.w_star
        norms = np.linalg.norm(E, axis=1)
        for t in np.argsort(-norms, kind="stable"):
            if task.beta * norms[t] <= best:
                break
            best = max(best, float(np.linalg.norm(task.hessians @ E[t], axis=1).max()))
    return best


@dataclass
class LooQuadResult:
    gaps: np.ndarray
    indices: np.ndarray
    full_final: np.ndarray
    lhat: float
    eta: float


def loo_quad(task: QuadraticTask, T: int, eta: float | None = None, indices=None,
             strict: bool = True) -> LooQuadResult:
    """Train on the task and on every leave-one-out variant in one batch.

    Returns raw parameter gaps ``||w_T(S^i) - w_T(S)||`` and the empirical
    Lipschitz constant over the union of all visited iterates, where sample
    ``i`` is excluded from the maximum on its own leave-one-out path.
    """
    eta = _check_eta(task, eta, strict)
    n, d = task.n, task.d
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=int)
    Hsum = task.hessians.sum(axis=0)
    Hbar = Hsum / n
    Hloo = (Hsum[None] - task.hessians[idx]) / (n - 1)
    e0 = task.w0 - task.w_star
    k = len(idx)
    # slot 0 is the full dataset, slots 1.. the variants
    steps = np.concatenate([(np.eye(d) - eta * Hbar)[None], np.eye(d)[None] - eta * Hloo])
    E = np.empty((T + 1, k + 1, d))
    E[0] = e0
    for t in range(T):
        E[t + 1] = np.einsum("kij,kj->ki", steps, E[t])
        if not np.isfinite(E[t + 1]).all():
            raise DivergenceError(f"non-finite iterate at step {t + 1}", step=t + 1)
    gaps = np.linalg.norm(E[T, 1:] - E[T, 0], axis=1)
    lhat = _union_lipschitz(task, E, idx)
    return LooQuadResult(gaps, idx, E[T, 0] + task.w_star, lhat, eta)


def _union_lipschitz(task: QuadraticTask, E: np.ndarray, idx: np.ndarray) -> float:
    norms = np.linalg.norm(E, axis=2)  # (T+1, k+1)
    order = np.argsort(-norms.max(axis=1), kind="stable")
    mask = np.ones((len(idx) + 1, task.n), dtype=bool)
    mask[np.arange(1, len(idx) + 1), idx] = False
    best = 0.0
    for t in order:
        if task.beta * norms[t].max() <= best:
            break
        G = np.linalg.norm(np.einsum("nij,kj->kni", task.hessians, E[t]), axis=2)
        best = max(best, float(G[mask].max()))
    return best


@dataclass(frozen=True)
class Thm1Check:
    measured_mean: float
    measured_max: float
    lhat: float
    rhs: float
    holds: bool
    gaps: np.ndarray


def verify_thm1(task: QuadraticTask, T: int) -> Thm1Check:
    """Compare the measured leave-one-out gap with the stability bound.

    The bound uses the measured Lipschitz constant and ``eta = 1/beta``; for
    ``mu == beta`` it is ``+inf``, and with zero initial distance it is 0.
    """
    res = loo_quad(task, T)
    w_dist = task.init_distance
    if task.mu >= task.beta:
        rhs = 0.0 if res.lhat == 0 or w_dist == 0 else np.inf
    else:
        try:
            rhs = thm1_rhs(res.lhat, w_dist, task.beta, task.mu, task.n)
        except DomainError:
            rhs = np.inf
    mean = float(res.gaps.mean())
    return Thm1Check(mean, float(res.gaps.max()), res.lhat, rhs, bool(mean <= rhs), res.gaps)
