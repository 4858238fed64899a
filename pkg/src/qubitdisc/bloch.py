"""Qubit operator algebra in Pauli coordinates.

Every 2x2 Hermitian operator is stored as ``(s, t)`` meaning
``0.5 * (s * I + t . sigma)``.  Trace is ``s`` and the eigenvalues are
``0.5 * (s +/- |t|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIRECTION_TOL = 1e-12
KERNEL_DEGENERACY = 1e-12


class DegenerateKernel(ValueError):
    """The operator is a multiple of the identity; no unique kernel direction."""


class SingularOperator(ValueError):
    """The operator is not strictly positive and cannot be inverted."""


def _vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(3)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SignalState:
    """One alphabet state: prior, purity and unit Bloch direction."""

    prior: float
    purity: float
    direction: np.ndarray = field(default_factory=lambda: _vec([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "direction", _vec(self.direction))
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError(f"prior must lie in [0, 1], got {self.prior}")
        if not 0.0 <= self.purity <= 1.0:
            raise ValueError(f"purity must lie in [0, 1], got {self.purity}")
        if abs(np.linalg.norm(self.direction) - 1.0) > DIRECTION_TOL:
            raise ValueError("direction must be a unit vector")

    @classmethod
    def from_bloch(cls, prior: float, bloch) -> "SignalState":
        """Build from a Bloch vector whose length is the purity."""
        v = np.asarray(bloch, dtype=float).reshape(3)
        n = float(np.linalg.norm(v))
        if n > 1.0 + DIRECTION_TOL:
            raise ValueError(f"Bloch vector length {n} exceeds 1")
        if n == 0.0:
            return cls(prior, 0.0, np.array([0.0, 0.0, 1.0]))
        return cls(prior, min(n, 1.0), v / n)

    @property
    def bloch(self) -> np.ndarray:
        return self.purity * self.direction

    @property
    def weighted_point(self) -> np.ndarray:
        """The Pauli-vector part of ``prior * rho``."""
        return self.prior * self.purity * self.direction


class Ensemble:
    """Ordered list of signal states with priors normalised to one.

    Priors must already sum to one within ``1e-9``; they are then rescaled
    so the stored sum is exact up to rounding.  Duplicate weighted operators
    are kept (indices stay stable) but recorded in ``duplicates``.
    """

    PRIOR_SUM_TOL = 1e-9

    def __init__(self, states):
        states = list(states)
        if not states:
            raise ValueError("an ensemble needs at least one state")
        total = sum(s.prior for s in states)
        if abs(total - 1.0) > self.PRIOR_SUM_TOL:
            raise ValueError(f"priors sum to {total!r}, expected 1")
        self.states = tuple(
            SignalState(s.prior / total, s.purity, s.direction) for s in states
        )
        self.priors = np.array([s.prior for s in self.states])
        self.points = np.array([s.weighted_point for s in self.states])
        self.purities = np.array([s.purity for s in self.states])
        # p_j^2 (1 - alpha_j^2): the constant term of each tangency constraint
        self.offsets = self.priors**2 * (1.0 - self.purities**2)
        self.duplicates = self._find_duplicates()

    @classmethod
    def from_bloch(cls, priors, blochs) -> "Ensemble":
        return cls(SignalState.from_bloch(p, b) for p, b in zip(priors, blochs))

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def _find_duplicates(self) -> dict[int, int]:
        dup = {}
        for j in range(len(self.states)):
            for i in range(j):
                if i in dup:
                    continue
                if self.priors[i] == self.priors[j] and np.array_equal(
                    self.points[i], self.points[j]
                ):
                    dup[j] = i
                    break
        return dup

    def rotated(self, rotation) -> "Ensemble":
        """Apply a common 3x3 rotation to every Bloch direction."""
        R = np.asarray(rotation, dtype=float)
        out = []
        for s in self.states:
            d = R @ s.direction
            out.append(SignalState(s.prior, s.purity, d / np.linalg.norm(d)))
        return Ensemble(out)


@dataclass(frozen=True)
class PauliOperator:
    """The operator ``0.5 * (scalar * I + vector . sigma)``."""

    scalar: float
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scalar", float(self.scalar))
        object.__setattr__(self, "vector", _vec(self.vector))

    def __eq__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self.scalar == other.scalar and np.array_equal(self.vector, other.vector)

    def __hash__(self):
        return hash((self.scalar, tuple(self.vector)))

    def __add__(self, other: "PauliOperator") -> "PauliOperator":
        return PauliOperator(self.scalar + other.scalar, self.vector + other.vector)

    def __sub__(self, other: "PauliOperator") -> "PauliOperator":
        return PauliOperator(self.scalar - other.scalar, self.vector - other.vector)

    def __mul__(self, k: float) -> "PauliOperator":
        return PauliOperator(k * self.scalar, k * self.vector)

    __rmul__ = __mul__

    @property
    def trace(self) -> float:
        return self.scalar

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def eigenvalues(self) -> tuple[float, float]:
        n = self.norm
        return 0.5 * (self.scalar - n), 0.5 * (self.scalar + n)

    def is_psd(self, tol: float = 0.0) -> bool:
        return self.scalar >= self.norm - tol

    def matrix(self) -> np.ndarray:
        """Dense complex matrix; intended for tests and debugging only."""
        x, y, z = self.vector
        s = self.scalar
        return 0.5 * np.array([[s + z, x - 1j * y], [x + 1j * y, s - z]])

    @classmethod
    def identity(cls) -> "PauliOperator":
        return cls(2.0, np.zeros(3))


def to_operator(state: SignalState, weighted: bool = False) -> PauliOperator:
    """Density operator of ``state``, optionally multiplied by its prior."""
    op = PauliOperator(1.0, state.purity * state.direction)
    return op * state.prior if weighted else op


def min_eigenvalue(op: PauliOperator) -> float:
    return 0.5 * (op.scalar - op.norm)


def kernel_direction(op: PauliOperator) -> np.ndarray:
    """Bloch direction of the eigenvector with the smaller eigenvalue.

    The caller is responsible for checking that this eigenvalue is zero.
    """
    n = op.norm
    if n < KERNEL_DEGENERACY * max(1.0, abs(op.scalar)):
        raise DegenerateKernel("operator is proportional to the identity")
    return -op.vector / n


def invert(op: PauliOperator, tol: float = 1e-12) -> PauliOperator:
    det = op.scalar**2 - op.norm**2
    if op.scalar <= op.norm + tol:
        raise SingularOperator(
            f"operator not strictly positive (s={op.scalar}, |t|={op.norm})"
        )
    return PauliOperator(4.0 * op.scalar / det, -4.0 * op.vector / det)


def compose(lhs: PauliOperator, rhs: PauliOperator) -> tuple[PauliOperator, np.ndarray]:
    """Product ``lhs @ rhs`` split into Hermitian part and residual.

    Returns ``(H, u)`` with ``lhs @ rhs == H + 0.5j * (u . sigma)``.
    """
    s1, t1 = lhs.scalar, lhs.vector
    s2, t2 = rhs.scalar, rhs.vector
    herm = PauliOperator(0.5 * (s1 * s2 + t1 @ t2), 0.5 * (s1 * t2 + s2 * t1))
    return herm, 0.5 * np.cross(t1, t2)
