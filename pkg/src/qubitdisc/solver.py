"""Constructive minimum-error discrimination for qubit ensembles.

For a hypothesised set of identified states the Lagrange operator
``Gamma = 0.5 * (a I + b . sigma)`` is pinned down by requiring that
``Gamma - p_j rho_j`` has a zero eigenvalue for each identified ``j``:

    a^2 - |b|^2 = 2 p_j a - 2 w_j . b + p_j^2 (1 - alpha_j^2)

with ``w_j = p_j alpha_j r_j``.  The right-hand sides differ only by terms
linear in ``(a, b)``, so pairwise differences give linear equations and one
quadratic in ``a`` remains.  Every candidate is then checked against the
full positivity condition ``a - p_j >= |b - w_j|`` on all states before a
measurement is built from the kernels of ``Gamma - p_j rho_j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bloch import Ensemble, PauliOperator, compose, kernel_direction, to_operator


class SolverError(ValueError):
    pass


class DegeneratePair(SolverError):
    pass


class CollinearPoints(SolverError):
    pass


class NoRealRoot(SolverError):
    pass


class SingularLinearSystem(SolverError):
    pass


class NegativeWeight(SolverError):
    pass


class InconsistentSystem(SolverError):
    pass


class NoSolutionFound(SolverError):
    pass


class NotAPovm(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    psd: float = 1e-9
    povm: float = 1e-8
    geom: float = 1e-10


DEFAULT_TOL = Tolerances()


@dataclass
class GammaCertificate:
    a: float
    b: np.ndarray
    subset: tuple[int, ...]
    slacks: np.ndarray
    valid: bool

    @property
    def operator(self) -> PauliOperator:
        return PauliOperator(self.a, self.b)

    @property
    def worst(self) -> int:
        return int(np.argmin(self.slacks))


@dataclass(frozen=True)
class PovmElement:
    """Rank-one element ``weight * 0.5 * (I + direction . sigma)``."""

    weight: float
    direction: np.ndarray
    identifies: int

    @property
    def operator(self) -> PauliOperator:
        return PauliOperator(self.weight, self.weight * np.asarray(self.direction))


@dataclass
class SolveReport:
    p_corr: float
    gamma: GammaCertificate
    povm: list[PovmElement]
    k: int
    candidates_examined: int
    notes: list[str] = field(default_factory=list)
    alternatives: list[GammaCertificate] = field(default_factory=list)


@dataclass
class VerifyReport:
    optimal: bool
    p_corr: float
    gamma: PauliOperator
    residual: float
    slacks: np.ndarray

    @property
    def worst(self) -> int:
        return int(np.argmin(self.slacks))


def slacks(ensemble: Ensemble, a: float, b) -> np.ndarray:
    """``(a - p_j) - |b - w_j|`` for every state; twice the smallest eigenvalue
    of ``Gamma - p_j rho_j``."""
    b = np.asarray(b, dtype=float)
    return (a - ensemble.priors) - np.linalg.norm(b - ensemble.points, axis=1)


def certify(ensemble: Ensemble, a: float, b, subset, tol: Tolerances = DEFAULT_TOL) -> GammaCertificate:
    b = np.asarray(b, dtype=float)
    s = slacks(ensemble, a, b)
    subset = tuple(subset)
    valid = bool(
        np.all(s >= -tol.psd)
        and np.all(np.abs(s[list(subset)]) <= tol.psd)
        and a >= np.linalg.norm(b) - tol.psd
        and ensemble.priors.max() - tol.psd <= a <= 1.0 + tol.psd
    )
    return GammaCertificate(float(a), b, subset, s, valid)


def check_no_measurement(ensemble: Ensemble, tol: Tolerances = DEFAULT_TOL) -> int | None:
    """Index of a state whose weighted operator dominates all others, if any."""
    p, w = ensemble.priors, ensemble.points
    for j in np.argsort(-p, kind="stable"):
        gaps = (p[j] - p) - np.linalg.norm(w[j] - w, axis=1)
        if np.all(gaps >= -tol.psd):
            return int(j)
    return None


def candidate_pair(ensemble: Ensemble, i: int, j: int, tol: Tolerances = DEFAULT_TOL):
    """Helstrom measurement for states ``i`` and ``j``.

    Returns the certificate and the two projective elements.
    """
    if i == j:
        raise ValueError("pair needs two distinct indices")
    p, w = ensemble.priors, ensemble.points
    diff = w[i] - w[j]
    d = float(np.linalg.norm(diff))
    if d <= tol.psd:
        raise DegeneratePair(f"states {i} and {j} share a weighted Bloch point")
    m = diff / d
    a = 0.5 * (p[i] + p[j] + d)
    b = 0.5 * (w[i] + w[j]) + 0.5 * (p[i] - p[j]) * m
    cert = certify(ensemble, a, b, (i, j), tol)
    povm = [PovmElement(1.0, m, i), PovmElement(1.0, -m, j)]
    return cert, povm


def _orthogonal_unit(line: np.ndarray) -> np.ndarray:
    line = line / np.linalg.norm(line)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(line)))] = 1.0
    n = axis - (axis @ line) * line
    return n / np.linalg.norm(n)


def plane_axis(ensemble: Ensemble, subset, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Normal of the plane through three weighted Bloch points and their
    common projection onto it."""
    i, j, k = subset
    w = ensemble.points
    n = np.cross(w[i] - w[j], w[i] - w[k])
    nn = float(np.linalg.norm(n))
    if nn <= tol.geom:
        raise CollinearPoints(f"weighted points of {tuple(subset)} are collinear")
    n = n / nn
    return n, float(w[i] @ n)


def _difference_rows(ensemble: Ensemble, subset):
    """Linear equations ``(w_i - w_j) . b = (p_i - p_j) a - (o_i - o_j) / 2``
    relative to the first index of ``subset``."""
    p, w, o = ensemble.priors, ensemble.points, ensemble.offsets
    i0 = subset[0]
    rows, slope, const = [], [], []
    for j in subset[1:]:
        rows.append(w[i0] - w[j])
        slope.append(p[i0] - p[j])
        const.append(-0.5 * (o[i0] - o[j]))
    return rows, slope, const


def _affine_b(rows, slope, const, tol: Tolerances):
    M = np.array(rows)
    # scale-free singularity test: smallest singular value relative to largest
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= tol.geom * sv[0]:
        raise SingularLinearSystem("difference equations do not determine b")
    u = np.linalg.solve(M, np.array(slope))
    v = np.linalg.solve(M, np.array(const))
    return u, v


def _quadratic_roots(A: float, B: float, C: float) -> list[float]:
    scale = max(abs(A), abs(B), abs(C))
    if scale == 0.0:
        raise SingularLinearSystem("constraint is identically satisfied")
    if abs(A) <= 1e-14 * scale:
        if abs(B) <= 1e-14 * scale:
            raise NoRealRoot("degenerate constraint")
        return [-C / B]
    disc = B * B - 4 * A * C
    if disc < 0:
        if disc > -1e-14 * B * B:
            disc = 0.0
        else:
            raise NoRealRoot(f"discriminant {disc:.3e} < 0")
    q = -0.5 * (B + math.copysign(math.sqrt(disc), B))
    roots = [q / A]
    if q != 0.0:
        roots.append(C / q)
    return sorted(set(roots))


def tangency_roots(ensemble: Ensemble, subset, extra_row=None, extra_value=0.0,
                   tol: Tolerances = DEFAULT_TOL) -> list[tuple[float, np.ndarray]]:
    """All real ``(a, b)`` making ``Gamma - p_j rho_j`` singular on ``subset``.

    ``extra_row . b = extra_value`` supplies the missing equation when
    ``subset`` has three states.  No admissibility filtering is applied.
    """
    rows, slope, const = _difference_rows(ensemble, subset)
    if extra_row is not None:
        rows.append(np.asarray(extra_row, dtype=float))
        slope.append(0.0)
        const.append(extra_value)
    u, v = _affine_b(rows, slope, const, tol)
    i0 = subset[0]
    p, w, o = ensemble.priors[i0], ensemble.points[i0], ensemble.offsets[i0]
    # a^2 - |u a + v|^2 - 2 p a + 2 w.(u a + v) + o = 0
    A = 1.0 - u @ u
    B = -2.0 * (u @ v) - 2.0 * p + 2.0 * (w @ u)
    C = -(v @ v) + 2.0 * (w @ v) + o
    return [(a, u * a + v) for a in _quadratic_roots(A, B, C)]


def _admissible(ensemble: Ensemble, roots, subset, tol: Tolerances):
    pmax = ensemble.priors.max()
    out = []
    for a, b in roots:
        if a > np.linalg.norm(b) + tol.psd and pmax - tol.psd <= a <= 1.0 + tol.psd:
            out.append(certify(ensemble, a, b, subset, tol))
    return out


def candidate_three(ensemble: Ensemble, subset, tol: Tolerances = DEFAULT_TOL) -> list[GammaCertificate]:
    subset = tuple(subset)
    try:
        normal, level = plane_axis(ensemble, subset, tol)
    except CollinearPoints:
        w = ensemble.points
        line = w[subset[1]] - w[subset[0]]
        if np.linalg.norm(line) <= tol.geom:
            line = w[subset[2]] - w[subset[0]]
        if np.linalg.norm(line) <= tol.geom:
            raise SingularLinearSystem("all three weighted points coincide")
        normal = _orthogonal_unit(line)
        level = float(w[subset[0]] @ normal)
    roots = tangency_roots(ensemble, subset, normal, level, tol)
    return _admissible(ensemble, roots, subset, tol)


def candidate_four(ensemble: Ensemble, subset, tol: Tolerances = DEFAULT_TOL) -> list[GammaCertificate]:
    subset = tuple(subset)
    roots = tangency_roots(ensemble, subset, tol=tol)
    return _admissible(ensemble, roots, subset, tol)


def _min_norm_nonnegative(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    from scipy.optimize import minimize

    x0 = np.linalg.lstsq(A, y, rcond=None)[0]
    res = minimize(
        lambda c: c @ c,
        np.clip(x0, 0.0, 1.0),
        jac=lambda c: 2 * c,
        bounds=[(0.0, 1.0)] * len(x0),
        constraints=[{"type": "eq", "fun": lambda c: A @ c - y, "jac": lambda c: A}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 200},
    )
    return res.x


def build_povm(ensemble: Ensemble, cert: GammaCertificate, tol: Tolerances = DEFAULT_TOL,
               notes: list[str] | None = None) -> list[PovmElement]:
    """Weighted kernel projectors of ``Gamma - p_j rho_j`` resolving the identity."""
    subset = cert.subset
    if len(subset) < 2:
        raise ValueError("build_povm needs at least two identified states")
    gamma = cert.operator
    dirs = []
    for j in subset:
        dirs.append(kernel_direction(gamma - to_operator(ensemble[j], weighted=True)))
    dirs = np.array(dirs)
    A = np.vstack([np.ones(len(subset)), dirs.T])
    y = np.array([2.0, 0.0, 0.0, 0.0])
    c, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < len(subset):
        c = _min_norm_nonnegative(A, y)
        if notes is not None:
            notes.append(f"POVM weights for subset {subset} not unique; minimum-norm choice")
    resid = float(np.linalg.norm(A @ c - y))
    if resid > tol.povm:
        raise InconsistentSystem(f"completeness residual {resid:.3e}")
    if np.any(c < -tol.povm):
        raise NegativeWeight(f"weights {np.round(c, 12).tolist()} for subset {subset}")
    c = np.clip(c, 0.0, 1.0)
    povm = [PovmElement(float(cj), mj, j) for cj, mj, j in zip(c, dirs, subset)]
    born = _born_value(ensemble, povm)
    if abs(born - cert.a) > tol.povm:
        raise InconsistentSystem(f"Born-rule value {born!r} differs from Tr Gamma {cert.a!r}")
    return povm


def _born_value(ensemble: Ensemble, povm) -> float:
    p, w = ensemble.priors, ensemble.points
    return float(
        sum(e.weight * 0.5 * (p[e.identifies] + w[e.identifies] @ e.direction) for e in povm)
    )


def identity_povm(j: int) -> list[PovmElement]:
    """Guess state ``j`` without measuring, written as two rank-one halves."""
    z = np.array([0.0, 0.0, 1.0])
    return [PovmElement(1.0, z, j), PovmElement(1.0, -z, j)]


def _ordered(ensemble: Ensemble, size: int):
    n = len(ensemble)
    skip = set(ensemble.duplicates)
    subsets = [s for s in itertools.combinations(range(n), size) if not skip.intersection(s)]
    p = ensemble.priors
    # descending combined prior, ties lexicographic (sort is stable)
    return sorted(subsets, key=lambda s: -sum(p[i] for i in s))


def _candidates(ensemble: Ensemble, subset, tol: Tolerances):
    """Yield ``(certificate, povm_or_None)`` for one subset."""
    if len(subset) == 2:
        cert, povm = candidate_pair(ensemble, *subset, tol)
        yield cert, povm
    elif len(subset) == 3:
        for cert in candidate_three(ensemble, subset, tol):
            yield cert, None
    else:
        for cert in candidate_four(ensemble, subset, tol):
            yield cert, None


def solve(ensemble: Ensemble, tol: Tolerances = DEFAULT_TOL, exhaustive: bool = False) -> SolveReport:
    """Optimal measurement by search over identified subsets of size 1 to 4.

    With ``exhaustive=True`` every subset is examined and further valid
    certificates are kept in ``alternatives``.
    """
    notes: list[str] = []
    if ensemble.duplicates:
        notes.append(
            "duplicate states skipped in subset search: "
            + ", ".join(f"{j}->{i}" for j, i in sorted(ensemble.duplicates.items()))
        )
    examined = 1
    best: SolveReport | None = None
    j = check_no_measurement(ensemble, tol)
    if j is not None:
        cert = certify(ensemble, ensemble.priors[j], ensemble.points[j], (j,), tol)
        best = SolveReport(float(cert.a), cert, identity_povm(j), 1, examined, notes)
        if not exhaustive:
            return best
    for size in range(2, min(4, len(ensemble)) + 1):
        for subset in _ordered(ensemble, size):
            examined += 1
            try:
                found = list(_candidates(ensemble, subset, tol))
            except SolverError:
                continue
            for cert, povm in found:
                if not cert.valid:
                    continue
                cand_notes: list[str] = []
                if povm is None:
                    try:
                        povm = build_povm(ensemble, cert, tol, cand_notes)
                    except SolverError:
                        continue
                if best is None:
                    notes.extend(cand_notes)
                    best = SolveReport(cert.a, cert, povm, len(subset), examined, notes)
                    if not exhaustive:
                        return best
                else:
                    best.alternatives.append(cert)
    if best is None:
        raise NoSolutionFound(f"no valid certificate after {examined} candidates")
    best.candidates_examined = examined
    for alt in best.alternatives:
        if abs(alt.a - best.p_corr) <= 10 * tol.psd:
            notes.append(f"subset {alt.subset} also optimal")
        else:
            notes.append(f"subset {alt.subset} valid with a={alt.a!r} (uniqueness violated)")
    return best


def verify_external(ensemble: Ensemble, povm, tol: Tolerances = DEFAULT_TOL) -> VerifyReport:
    """Check a labelled POVM against the positivity conditions.

    ``Gamma`` is rebuilt as ``sum_j p_j rho_j pi_j``; its anti-Hermitian
    part must vanish and ``Gamma - p_j rho_j`` must be positive for all j.
    """
    validate_povm(ensemble, povm, tol)
    gamma = PauliOperator(0.0, np.zeros(3))
    resid = np.zeros(3)
    for e in povm:
        h, u = compose(to_operator(ensemble[e.identifies], weighted=True), e.operator)
        gamma = gamma + h
        resid = resid + u
    s = slacks(ensemble, gamma.scalar, gamma.vector)
    r = float(np.linalg.norm(resid))
    optimal = bool(r <= tol.povm and np.all(s >= -tol.psd))
    return VerifyReport(optimal, gamma.scalar, gamma, r, s)


def validate_povm(ensemble: Ensemble, povm, tol: Tolerances = DEFAULT_TOL) -> None:
    if not povm:
        raise NotAPovm("empty measurement")
    total = 0.0
    moment = np.zeros(3)
    for e in povm:
        if not 0 <= e.identifies < len(ensemble):
            raise NotAPovm(f"element identifies unknown state {e.identifies}")
        if e.weight < -tol.povm or e.weight > 1.0 + tol.povm:
            raise NotAPovm(f"weight {e.weight} outside [0, 1]")
        if abs(np.linalg.norm(e.direction) - 1.0) > tol.povm:
            raise NotAPovm("element direction is not a unit vector")
        total += e.weight
        moment = moment + e.weight * np.asarray(e.direction)
    if abs(total - 2.0) > tol.povm or np.linalg.norm(moment) > tol.povm:
        raise NotAPovm(
            f"elements do not sum to the identity (sum of weights {total!r}, "
            f"moment {np.linalg.norm(moment):.3e})"
        )
