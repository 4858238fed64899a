import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from qubitdisc import families
from qubitdisc.bloch import Ensemble
from qubitdisc.oracle import dual_value, minimize_dual, primal_value
from qubitdisc.solver import (
    CollinearPoints,
    DegeneratePair,
    NegativeWeight,
    NotAPovm,
    PovmElement,
    SingularLinearSystem,
    SolverError,
    build_povm,
    candidate_four,
    candidate_pair,
    candidate_three,
    certify,
    check_no_measurement,
    plane_axis,
    solve,
    tangency_roots,
    verify_external,
)

from conftest import ensembles, random_ensemble

TRINE = 2 * math.pi / 3
EPS_PSD, EPS_POVM = 1e-9, 1e-8


def oracle(ens):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return minimize_dual(ens).value


def orthogonal_pair():
    return Ensemble.from_bloch([0.5, 0.5], [[0, 0, 1], [0, 0, -1]])


def mixed_trine(purity=0.8):
    c, s = math.cos(TRINE), math.sin(TRINE)
    dirs = np.array([[1, 0, 0], [c, s, 0], [c, -s, 0]])
    return Ensemble.from_bloch([1 / 3] * 3, purity * dirs)


# -------------------------------------------------------------- no measurement

def test_single_state_needs_no_measurement():
    ens = Ensemble.from_bloch([1.0], [[0, 0, 1]])
    assert check_no_measurement(ens) == 0
    rep = solve(ens)
    assert rep.k == 1 and rep.p_corr == 1.0


def test_pure_states_never_dominate():
    assert check_no_measurement(orthogonal_pair()) is None


def test_dominant_maximally_mixed_state():
    ens = Ensemble.from_bloch([0.9, 0.1], [[0, 0, 0], [0, 0, 0]])
    assert check_no_measurement(ens) == 0
    rep = solve(ens)
    assert rep.p_corr == pytest.approx(0.9)
    assert primal_value(ens, rep.povm) == pytest.approx(0.9)


# ----------------------------------------------------------------- pairs

def test_pair_orthogonal():
    cert, povm = candidate_pair(orthogonal_pair(), 0, 1)
    assert cert.valid and cert.a == 1.0
    np.testing.assert_allclose(cert.b, 0, atol=1e-15)
    assert [e.weight for e in povm] == [1.0, 1.0]
    np.testing.assert_allclose(povm[0].direction, -povm[1].direction)


@pytest.mark.parametrize("phi", [0.3, 1.0, 2.0, 3.0])
def test_pair_equiprobable_pure(phi):
    ens = Ensemble.from_bloch([0.5, 0.5], [[0, 0, 1], [math.sin(phi), 0, math.cos(phi)]])
    cert, _ = candidate_pair(ens, 0, 1)
    # |w_0 - w_1| = sin(phi / 2)
    assert cert.a == pytest.approx(0.5 * (1 + math.sin(phi / 2)), abs=1e-14)
    assert cert.a == pytest.approx(oracle(ens), abs=1e-9)


def test_pair_mirror_above_threshold():
    cert, _ = candidate_pair(families.mirror_symmetric(TRINE, 0.45), 1, 2)
    assert cert.valid
    assert cert.a == pytest.approx(0.45 * (1 + math.sqrt(3) / 2), abs=1e-14)


def test_pair_degenerate():
    ens = Ensemble.from_bloch([0.6, 0.4], [[0, 0, 0], [0, 0, 0]])
    with pytest.raises(DegeneratePair):
        candidate_pair(ens, 0, 1)


def test_pair_dominated_is_rejected():
    # state 0 dominates state 1, so the pair measurement is invalid
    ens = Ensemble.from_bloch([0.9, 0.1], [[0, 0, 0.1], [0, 0, 0]])
    cert, _ = candidate_pair(ens, 0, 1)
    assert not cert.valid


# ---------------------------------------------------------------- triples

def test_plane_axis_equatorial():
    n, level = plane_axis(families.mirror_symmetric(TRINE, 0.3), (0, 1, 2))
    np.testing.assert_allclose(np.abs(n), [0, 0, 1], atol=1e-15)
    assert level == pytest.approx(0.0, abs=1e-15)


def test_plane_axis_common_latitude():
    z0 = 0.6
    rho = math.sqrt(1 - z0**2)
    dirs = [[rho * math.cos(t), rho * math.sin(t), z0] for t in (0.1, 2.0, 4.0)]
    ens = Ensemble.from_bloch([1 / 3] * 3, dirs)
    n, level = plane_axis(ens, (0, 1, 2))
    assert abs(level) == pytest.approx(z0 / 3, abs=1e-14)
    np.testing.assert_allclose(np.abs(n), [0, 0, 1], atol=1e-14)


def test_plane_axis_collinear():
    ens = Ensemble.from_bloch([1 / 3] * 3, [[0, 0, 0], [1, 0, 0], [2 / 3 * 1.0, 0, 0]])
    with pytest.raises(CollinearPoints):
        plane_axis(ens, (0, 1, 2))
    with pytest.raises(SingularLinearSystem):
        candidate_three(ens, (0, 1, 2))


def test_trine_candidate():
    [cert] = candidate_three(families.trine(), (0, 1, 2))
    assert cert.valid
    assert cert.a == pytest.approx(2 / 3, abs=1e-14)
    np.testing.assert_allclose(cert.b, [families.three_element_bx(TRINE, 1 / 3), 0, 0], atol=1e-14)


@pytest.mark.parametrize("theta", [math.pi / 2, TRINE, 5 * math.pi / 6])
@pytest.mark.parametrize("frac", [0.3, 0.6, 0.95])
def test_three_outcome_closed_form(theta, frac):
    p = frac * families.threshold(theta)
    certs = [c for c in candidate_three(families.mirror_symmetric(theta, p), (0, 1, 2)) if c.valid]
    assert len(certs) == 1
    assert certs[0].a == pytest.approx(families.three_element_value(theta, p), abs=1e-12)
    assert certs[0].b[0] == pytest.approx(families.three_element_bx(theta, p), abs=1e-12)


def test_mixed_trine_against_oracle():
    ens = mixed_trine(0.8)
    [cert] = candidate_three(ens, (0, 1, 2))
    assert cert.valid
    assert cert.a == pytest.approx(oracle(ens), abs=1e-8)


def test_three_outcome_candidate_root_beyond_pole():
    # the spurious branch of the figure: the algebraic root is the closed form,
    # but it is not an admissible trace
    ens = families.mirror_symmetric(TRINE, 0.45)
    roots = [a for a, _ in tangency_roots(ens, (0, 1, 2), [0, 0, 1], 0.0)]
    assert any(a == pytest.approx(families.three_element_value(TRINE, 0.45)) for a in roots)
    assert candidate_three(ens, (0, 1, 2)) == []


def test_three_outcome_candidate_unphysical_below_pole():
    # between the threshold and the pole the candidate trace beats the true optimum
    ens = families.mirror_symmetric(TRINE, 0.40)
    assert families.three_element_value(TRINE, 0.40) > families.two_element_value(TRINE, 0.40)
    [cert] = candidate_three(ens, (0, 1, 2))
    assert cert.a == pytest.approx(families.three_element_value(TRINE, 0.40), abs=1e-12)
    # Gamma is dual feasible (an upper bound) but its kernels admit no measurement
    with pytest.raises(NegativeWeight):
        build_povm(ens, cert)


# -------------------------------------------------------------- quadruples

@pytest.mark.parametrize("purity", [1.0, 0.5])
def test_tetrahedron(purity):
    ens = families.tetrahedron(purity)
    [cert] = candidate_four(ens, (0, 1, 2, 3))
    assert cert.valid
    np.testing.assert_allclose(cert.b, 0, atol=1e-14)
    # with b = 0 the constraint reads a^2 = 2 a / 4 - (1 - purity^2) / 16
    assert cert.a == pytest.approx(0.25 * (1 + purity), abs=1e-14)
    assert cert.a == pytest.approx(oracle(ens), abs=1e-8)
    povm = build_povm(ens, cert)
    np.testing.assert_allclose([e.weight for e in povm], 0.5, atol=1e-12)


def test_four_coplanar_is_singular():
    dirs = [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]]
    ens = Ensemble.from_bloch([0.1, 0.2, 0.3, 0.4], dirs)
    with pytest.raises(SingularLinearSystem):
        candidate_four(ens, (0, 1, 2, 3))


def test_random_four_state_against_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(300):
        ens = random_ensemble(rng, 4)
        try:
            certs = candidate_four(ens, (0, 1, 2, 3))
        except SolverError:
            continue
        for cert in certs:
            if not cert.valid:
                continue
            # a valid certificate only bounds P_corr from above
            assert cert.a >= oracle(ens) - 1e-8
            try:
                build_povm(ens, cert)
            except SolverError:
                continue
            assert cert.a == pytest.approx(oracle(ens), abs=1e-8)
            checked += 1
    assert checked > 0


# ------------------------------------------------------------------- POVMs

def test_build_povm_pair_is_projective():
    ens = families.mirror_symmetric(TRINE, 0.45)
    cert, _ = candidate_pair(ens, 1, 2)
    povm = build_povm(ens, cert)
    np.testing.assert_allclose([e.weight for e in povm], 1.0, atol=1e-12)
    np.testing.assert_allclose(povm[0].direction, -povm[1].direction, atol=1e-12)


def test_build_povm_trine():
    ens = families.trine()
    [cert] = candidate_three(ens, (0, 1, 2))
    povm = build_povm(ens, cert)
    np.testing.assert_allclose([e.weight for e in povm], 2 / 3, atol=1e-12)
    for e, s in zip(povm, ens):
        # each element points along its own state
        np.testing.assert_allclose(e.direction, s.direction, atol=1e-12)
    assert primal_value(ens, povm) == pytest.approx(2 / 3, abs=1e-14)


def test_weight_of_state_zero_vanishes_at_threshold():
    p_star = families.threshold(TRINE)
    weights = []
    for p in (p_star - 1e-2, p_star - 1e-3, p_star):
        ens = families.mirror_symmetric(TRINE, p)
        [cert] = candidate_three(ens, (0, 1, 2))
        weights.append(build_povm(ens, cert)[0].weight)
    assert weights[0] > weights[1] > weights[2]
    assert weights[2] == pytest.approx(0.0, abs=1e-6)


# ------------------------------------------------------------------ solve

@pytest.mark.parametrize("p", [0.40, 0.45, 0.5])
def test_solve_two_outcome_region(p):
    rep = solve(families.mirror_symmetric(TRINE, p))
    assert rep.k == 2 and rep.gamma.subset == (1, 2)
    assert rep.p_corr == pytest.approx(p * (1 + math.sin(TRINE)), abs=1e-12)


def test_solve_trine():
    rep = solve(families.trine())
    assert rep.k == 3 and rep.p_corr == pytest.approx(2 / 3, abs=1e-14)


def test_solve_report_consistency():
    rep = solve(families.mirror_symmetric(TRINE, 0.25))
    assert rep.p_corr == rep.gamma.a
    assert {e.identifies for e in rep.povm} <= set(rep.gamma.subset)
    assert len({e.identifies for e in rep.povm}) == rep.k
    assert rep.candidates_examined >= 1


def test_solve_duplicates_noted():
    ens = Ensemble.from_bloch([0.25, 0.25, 0.5], [[0, 0, 1], [0, 0, 1], [0, 0, -1]])
    rep = solve(ens)
    assert any("duplicate" in n for n in rep.notes)
    assert 1 not in rep.gamma.subset
    assert rep.p_corr == pytest.approx(oracle(ens), abs=1e-9)


def check_certificate(ens, rep):
    g = rep.gamma
    assert g.valid
    assert np.all(g.slacks >= -EPS_PSD)
    assert np.all(np.abs(g.slacks[list(g.subset)]) <= EPS_PSD)
    # a = max_j (p_j + |b - w_j|), attained on the subset
    assert dual_value(g.b, ens) == pytest.approx(g.a, abs=EPS_PSD)
    w = np.array([e.weight for e in rep.povm])
    m = np.array([e.direction for e in rep.povm])
    assert abs(w.sum() - 2) <= EPS_POVM
    assert np.linalg.norm(w @ m) <= EPS_POVM
    assert np.all(w >= 0) and np.all(w <= 1 + EPS_PSD)
    assert abs(primal_value(ens, rep.povm) - g.a) <= EPS_POVM
    assert ens.priors.max() - EPS_PSD <= rep.p_corr <= 1 + EPS_PSD


@given(ensembles())
@settings(max_examples=200, deadline=None)
def test_solver_certificate_properties(ens):
    rep = solve(ens)
    check_certificate(ens, rep)
    assert verify_external(ens, rep.povm).optimal


@given(ensembles(min_size=2))
@settings(max_examples=60, deadline=None)
def test_solver_matches_oracle(ens):
    assert solve(ens).p_corr == pytest.approx(oracle(ens), abs=1e-7)


def _rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def test_rotation_covariance(rng):
    for _ in range(100):
        ens = random_ensemble(rng)
        R = _rotation(rng)
        a, b = solve(ens), solve(ens.rotated(R))
        assert b.p_corr == pytest.approx(a.p_corr, abs=1e-10)
        np.testing.assert_allclose(b.gamma.b, R @ a.gamma.b, atol=1e-9)


def test_continuity_across_threshold():
    p_star = families.threshold(TRINE)
    below = solve(families.mirror_symmetric(TRINE, p_star - 1e-6))
    above = solve(families.mirror_symmetric(TRINE, p_star + 1e-6))
    assert below.k == 3 and above.k == 2
    ens = families.mirror_symmetric(TRINE, p_star)
    pair, _ = candidate_pair(ens, 1, 2)
    [three] = candidate_three(ens, (0, 1, 2))
    assert abs(pair.a - three.a) <= 1e-8
    assert families.two_element_value(TRINE, p_star) == pytest.approx(
        families.three_element_value(TRINE, p_star), abs=1e-12)


def test_uniqueness_at_threshold():
    rep = solve(families.mirror_symmetric(TRINE, families.threshold(TRINE)), exhaustive=True)
    assert rep.alternatives
    for alt in rep.alternatives:
        assert alt.a == pytest.approx(rep.gamma.a, abs=1e-8)
        np.testing.assert_allclose(alt.b, rep.gamma.b, atol=1e-8)


def test_uniqueness_square_of_states():
    # four equiprobable equatorial states: both diagonal pairs are optimal
    dirs = [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]]
    rep = solve(Ensemble.from_bloch([0.25] * 4, dirs), exhaustive=True)
    subsets = {rep.gamma.subset} | {a.subset for a in rep.alternatives}
    assert {(0, 2), (1, 3)} <= subsets
    for alt in rep.alternatives:
        assert alt.a == pytest.approx(rep.gamma.a, abs=1e-8)
        np.testing.assert_allclose(alt.b, rep.gamma.b, atol=1e-8)


def test_orthogonal_pair_perfect():
    rep = solve(orthogonal_pair())
    assert rep.p_corr == 1.0 and rep.k == 2


# ------------------------------------------------------------ verification

def test_verify_own_output(rng):
    for _ in range(50):
        ens = random_ensemble(rng)
        rep = verify_external(ens, solve(ens).povm)
        assert rep.optimal
        assert rep.residual <= EPS_POVM


def test_verify_two_outcome_below_threshold():
    ens = families.mirror_symmetric(TRINE, 0.35)
    povm = [PovmElement(1.0, [0, 1, 0], 1), PovmElement(1.0, [0, -1, 0], 2)]
    rep = verify_external(ens, povm)
    assert not rep.optimal
    assert rep.worst == 0 and rep.slacks[0] < 0
    assert rep.p_corr == pytest.approx(families.two_element_value(TRINE, 0.35))


def test_verify_rejects_incomplete():
    ens = orthogonal_pair()
    povm = [PovmElement(0.5, [0, 0, 1], 0), PovmElement(0.5, [0, 0, -1], 1)]
    with pytest.raises(NotAPovm):
        verify_external(ens, povm)


def test_verify_mislabelled_guess():
    ens = Ensemble.from_bloch([0.9, 0.1], [[0, 0, 0], [0, 0, 0]])
    guess_wrong = [PovmElement(1.0, [1, 0, 0], 1), PovmElement(1.0, [-1, 0, 0], 1)]
    rep = verify_external(ens, guess_wrong)
    assert not rep.optimal and rep.p_corr == pytest.approx(0.1)


def test_certify_bounds():
    ens = orthogonal_pair()
    assert not certify(ens, 1.5, [0, 0, 0], (0, 1)).valid
