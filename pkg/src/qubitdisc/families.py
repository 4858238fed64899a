"""Named ensembles with known closed-form answers."""

from __future__ import annotations

import math

import numpy as np

from .bloch import Ensemble


def mirror_symmetric(theta: float, p: float) -> Ensemble:
    """|+> with prior 1-2p and two equatorial states at angles +/-theta with prior p."""
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"p must lie in [0, 1/2], got {p}")
    c, s = math.cos(theta), math.sin(theta)
    return Ensemble.from_bloch(
        [1 - 2 * p, p, p],
        [[1.0, 0.0, 0.0], [c, s, 0.0], [c, -s, 0.0]],
    )


def trine() -> Ensemble:
    return mirror_symmetric(2 * math.pi / 3, 1 / 3)


def tetrahedron(purity: float = 1.0) -> Ensemble:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    return Ensemble.from_bloch([0.25] * 4, purity * v)


def two_element_value(theta: float, p: float) -> float:
    """Success probability of the sigma_y projective measurement on states 1, 2."""
    return p * (1 + math.sin(theta))


def three_element_value(theta: float, p: float) -> float:
    """Trace of the three-outcome candidate; meaningless (and may exceed 1
    or be negative) where that candidate is unphysical."""
    s2 = math.sin(theta / 2) ** 2
    c2 = math.cos(theta / 2) ** 2
    den = 1 - 2 * p - p * c2
    return (1 - 2 * p) * (p * s2 + 1 - 2 * p - p * c2) / den


def three_element_bx(theta: float, p: float) -> float:
    """x-component of Gamma's Bloch vector for the three-outcome candidate,
    in the convention rho = (I + r . sigma) / 2 (opposite sign to the
    convention where the constraint reads a + b_x)."""
    c2 = math.cos(theta / 2) ** 2
    return -(3 * p - 1) * (1 - 2 * p) / (1 - 2 * p - p * c2)


def threshold(theta: float) -> float:
    """Smallest p at which the two-outcome measurement is optimal."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return 1 / (2 + c * (c + s))
