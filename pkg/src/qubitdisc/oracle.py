"""Independent checks on the constructive solver.

The dual problem (minimum trace of Gamma subject to Gamma >= p_j rho_j)
reduces on the Bloch ball to

    minimise  f(b) = max_j (p_j + |b - w_j|)

which is convex and piecewise smooth.  It is solved here numerically,
without reference to which states are identified.  Primal values and a
Monte Carlo simulation of the measurement give the other side of the
duality gap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .bloch import Ensemble
from .solver import DEFAULT_TOL, Tolerances, validate_povm


class NotConverged(RuntimeWarning):
    pass


@dataclass
class DualSolution:
    value: float
    center: np.ndarray
    active_set: tuple[int, ...]
    iterations: int
    converged: bool
    gap_bound: float = np.inf
    certificate: float = np.inf


def dual_value(b, ensemble: Ensemble) -> float:
    b = np.asarray(b, dtype=float)
    return float(np.max(ensemble.priors + np.linalg.norm(b - ensemble.points, axis=1)))


def _subgradient_starts(ensemble: Ensemble, starts: int, rng: np.random.Generator) -> np.ndarray:
    w = ensemble.points
    extra = max(starts - len(w), 0)
    # uniform in the unit ball
    g = rng.standard_normal((extra, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.random((extra, 1)) ** (1 / 3)
    return np.vstack([w, g])[:starts] if starts >= len(w) else w[:starts].copy()


def _subgradient(ensemble: Ensemble, x: np.ndarray, iters: int, step: float):
    """Vectorised subgradient descent from every row of ``x`` with step
    ``step / sqrt(t)``; returns the best point seen."""
    p, w = ensemble.priors, ensemble.points
    best_x = x.copy()
    best_f = np.full(len(x), np.inf)
    for t in range(1, iters + 1):
        diff = x[:, None, :] - w[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        vals = p[None, :] + dist
        j = np.argmax(vals, axis=1)
        f = vals[np.arange(len(x)), j]
        better = f < best_f
        best_f[better] = f[better]
        best_x[better] = x[better]
        d = diff[np.arange(len(x)), j]
        n = dist[np.arange(len(x)), j]
        g = np.where(n[:, None] > 0, d / np.where(n > 0, n, 1.0)[:, None], 0.0)
        x = x - (step / np.sqrt(t)) * g
    k = int(np.argmin(best_f))
    return best_x[k], float(best_f[k])


def _barrier_terms(ensemble: Ensemble, t: float, b: np.ndarray):
    s = t - ensemble.priors
    d = b - ensemble.points
    g = s**2 - np.einsum("ij,ij->i", d, d)
    return s, d, g


def _feasible(ensemble: Ensemble, t: float, b: np.ndarray) -> bool:
    s, _, g = _barrier_terms(ensemble, t, b)
    return bool(np.all(s > 0) and np.all(g > 0))


def _barrier(ensemble: Ensemble, t: float, b: np.ndarray, tau: float, gap_tol: float, budget: int):
    """Path-following log-barrier method on the epigraph
    ``t >= p_j + |b - w_j|``.  Each second-order cone contributes barrier
    parameter 2, so a centred point has ``t - f* <= 2N / tau``."""
    n = len(ensemble)
    steps = 0
    while True:
        for _ in range(50):
            s, d, g = _barrier_terms(ensemble, t, b)
            grad_g = np.hstack([2 * s[:, None], -2 * d])  # (N, 4)
            grad = np.array([tau, 0.0, 0.0, 0.0]) - (grad_g / g[:, None]).sum(axis=0)
            hess = np.einsum("ni,nj->ij", grad_g / g[:, None], grad_g / g[:, None])
            hess -= np.diag([2.0, -2.0, -2.0, -2.0]) * np.sum(1.0 / g)
            step = -np.linalg.solve(hess, grad)
            dec = float(-grad @ step)
            steps += 1
            if dec <= 1e-14:
                break
            h = 1.0
            obj = tau * t - np.sum(np.log(g))
            while True:
                t2, b2 = t + h * step[0], b + h * step[1:]
                if _feasible(ensemble, t2, b2):
                    _, _, g2 = _barrier_terms(ensemble, t2, b2)
                    if tau * t2 - np.sum(np.log(g2)) <= obj - 0.25 * h * dec:
                        break
                h *= 0.5
                if h < 1e-14:
                    break
            if h < 1e-14:
                break
            t, b = t2, b2
            if dec <= 1e-12 or steps >= budget:
                break
        if 2 * n / tau <= gap_tol or steps >= budget:
            return t, b, tau, steps
        tau *= 8.0


def minimize_dual(ensemble: Ensemble, max_iters: int = 2000, tol: float = 1e-7, seed: int = 0,
                  starts: int = 32) -> DualSolution:
    """Numerical minimum of ``max_j (p_j + |b - w_j|)`` over b.

    Multi-start subgradient descent supplies a warm start; a log-barrier
    Newton method then drives the duality gap below ``tol``.
    """
    if max_iters < 1 or tol <= 0:
        raise ValueError("max_iters must be >= 1 and tol > 0")
    rng = np.random.default_rng(seed)
    x0 = _subgradient_starts(ensemble, starts, rng)
    spread = float(np.ptp(ensemble.points, axis=0).max()) if len(ensemble) > 1 else 0.0
    b, f = _subgradient(ensemble, x0, min(max_iters, 200), 0.25 * max(spread, 1e-3))

    t = f + max(1e-2, 0.1 * spread)
    gap_tol = min(tol, 1e-11)
    t, b, tau, steps = _barrier(ensemble, t, b, 2 * len(ensemble) / max(t - f, 1e-3),
                                gap_tol, max_iters)
    value = dual_value(b, ensemble)
    gap = 2 * len(ensemble) / tau

    s, d, g = _barrier_terms(ensemble, t, b)
    dist = np.linalg.norm(d, axis=1)
    vals = ensemble.priors + dist
    active = tuple(int(j) for j in np.flatnonzero(value - vals <= 1e-6))
    cert = _certificate(d, dist, active)
    converged = bool(gap <= tol and cert <= tol)
    if not converged:
        warnings.warn(NotConverged(f"dual minimisation stopped with gap {gap:.2e}, "
                                   f"certificate {cert:.2e}"))
    return DualSolution(value, b, active, steps, converged, gap, cert)


def _certificate(d: np.ndarray, dist: np.ndarray, active) -> float:
    """Distance from the origin to the convex hull of the active subgradients.

    A state sitting exactly at ``b`` contributes the whole unit ball, so the
    certificate is zero there.
    """
    if any(dist[j] <= 1e-12 for j in active):
        return 0.0
    U = np.array([d[j] / dist[j] for j in active]).T  # (3, k)
    rho = 1e3
    A = np.vstack([U, rho * np.ones(U.shape[1])])
    y = np.array([0.0, 0.0, 0.0, rho])
    lam, _ = nnls(A, y)
    return float(np.linalg.norm(U @ lam))


def primal_value(ensemble: Ensemble, povm, tol: Tolerances = DEFAULT_TOL) -> float:
    """Born-rule success probability ``sum_e c_e (p_j + w_j . m_e) / 2``."""
    validate_povm(ensemble, povm, tol)
    p, w = ensemble.priors, ensemble.points
    return float(sum(e.weight * 0.5 * (p[e.identifies] + w[e.identifies] @ e.direction)
                     for e in povm))


def _unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _random_directions(rng: np.random.Generator, k: int):
    if k == 2:
        m = _unit(rng, 1)[0]
        return np.array([m, -m]), np.array([1.0, 1.0])
    if k == 3:
        e1, e2 = np.linalg.qr(rng.standard_normal((3, 2)))[0].T
        phi = rng.uniform(0, 2 * np.pi, 3)
        dirs = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    else:
        dirs = _unit(rng, 4)
    A = np.vstack([np.ones(k), dirs.T])
    c, *_ = np.linalg.lstsq(A, np.array([2.0, 0, 0, 0]), rcond=None)
    if np.linalg.norm(A @ c - [2.0, 0, 0, 0]) > 1e-10 or np.any(c < 0) or np.any(c > 1):
        return None
    return dirs, c


def random_povm_lower_bound(ensemble: Ensemble, trials: int = 1000, seed: int = 0) -> float:
    """Best success probability over random 2-4 outcome measurements, each
    outcome assigned to the state it favours most."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    p, w = ensemble.priors, ensemble.points
    best = float(p.max())  # guessing is always available
    for _ in range(trials):
        draw = _random_directions(rng, int(rng.integers(2, 5)))
        if draw is None:
            continue
        dirs, c = draw
        score = 0.5 * c[:, None] * (p[None, :] + dirs @ w.T)  # (k, N)
        best = max(best, float(score.max(axis=1).sum()))
    return best


def outcome_probabilities(ensemble: Ensemble, povm) -> np.ndarray:
    """``P[i, e]``: probability of outcome ``e`` given state ``i``."""
    c = np.array([e.weight for e in povm])
    m = np.array([e.direction for e in povm])
    blochs = np.array([s.bloch for s in ensemble])
    return 0.5 * c[None, :] * (1.0 + blochs @ m.T)


def monte_carlo_simulate(ensemble: Ensemble, povm, samples: int = 100_000, seed: int = 0,
                         tol: Tolerances = DEFAULT_TOL) -> tuple[float, float]:
    """Empirical success rate and its binomial standard error.

    State draws and outcome draws use separate child streams of
    ``SeedSequence(seed)`` so either can change without perturbing the other.
    """
    validate_povm(ensemble, povm, tol)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    state_seq, outcome_seq = np.random.SeedSequence(seed).spawn(2)
    state_rng = np.random.Generator(np.random.PCG64(state_seq))
    outcome_rng = np.random.Generator(np.random.PCG64(outcome_seq))

    prior_cdf = np.cumsum(ensemble.priors)
    states = np.minimum(np.searchsorted(prior_cdf, state_rng.random(samples), side="right"),
                        len(ensemble) - 1)

    probs = np.clip(outcome_probabilities(ensemble, povm), 0.0, None)
    cdf = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
    u = outcome_rng.random(samples)
    outcomes = np.minimum((u[:, None] >= cdf[states]).sum(axis=1), len(povm) - 1)

    labels = np.array([e.identifies for e in povm])
    rate = float(np.mean(labels[outcomes] == states))
    return rate, float(np.sqrt(rate * (1 - rate) / samples))
