import numpy as np
import pytest

from qed2lattice.grassmann import (MINUS, PLUS, FermionCovariance, GrassmannElement, Universe,
                                   UniverseError, action_element, berezin, exp_even,
                                   fermion_universe, gauge_invariance_check, gaussian_expectation,
                                   interaction_from_vertices, lattice_labels, random_covariance,
                                   random_element, symmetry_suite, truncated_expectation,
                                   truncated_expectation_logseries)
from qed2lattice.lattice import LatticeParams

LABELS = [((i, 0), 0) for i in range(3)]


@pytest.fixture
def U():
    return fermion_universe(LABELS)


def gen(U, sign, i):
    return GrassmannElement.generator(U, (sign, LABELS[i]))


def test_anticommutation(U):
    a, b = gen(U, PLUS, 0), gen(U, MINUS, 1)
    assert (a * b + b * a).terms == {}
    assert (a * a).terms == {}


def test_universe_cap_and_duplicates():
    with pytest.raises(UniverseError):
        Universe(tuple((PLUS, i) for i in range(25)))
    with pytest.raises(UniverseError):
        Universe(((PLUS, 0), (PLUS, 0)))


def test_berezin_top_monomial(U):
    top = GrassmannElement.monomial(U, U.keys)
    assert berezin(top) == 1.0
    # reversing six generators is an odd number (15) of swaps
    assert berezin(GrassmannElement.monomial(U, U.keys[::-1])) == -1.0


def test_exp_even_inverse(U):
    rng = np.random.default_rng(2)
    x = random_element(U, rng, parity=0, density=0.6)
    x = x - x.terms.get(0, 0)  # nilpotent part only
    one = exp_even(x) * exp_even(-x)
    assert one.max_abs_diff(GrassmannElement.scalar(U, 1.0)) < 1e-12


def test_two_and_four_point(U):
    rng = np.random.default_rng(3)
    cov = random_covariance(LABELS, rng)
    G = cov.matrix
    two = gen(U, MINUS, 0) * gen(U, PLUS, 1)
    assert gaussian_expectation(two, cov) == pytest.approx(G[0, 1])
    four = gen(U, MINUS, 0) * gen(U, PLUS, 1) * gen(U, MINUS, 2) * gen(U, PLUS, 0)
    expect = G[0, 1] * G[2, 0] - G[0, 0] * G[2, 1]
    assert gaussian_expectation(four, cov) == pytest.approx(expect)
    assert gaussian_expectation(gen(U, MINUS, 0) * gen(U, MINUS, 1), cov) == 0


def test_truncated_single_and_odd_pair(U):
    rng = np.random.default_rng(4)
    cov = random_covariance(LABELS, rng)
    x = random_element(U, rng, parity=0, density=0.5)
    assert truncated_expectation([x], cov) == pytest.approx(gaussian_expectation(x, cov))
    # E^T(psi^-_a, psi^+_b) is the propagator itself
    assert truncated_expectation([gen(U, MINUS, 2), gen(U, PLUS, 1)], cov) == pytest.approx(cov.matrix[2, 1])


def test_truncated_matches_logseries(U):
    rng = np.random.default_rng(5)
    cov = random_covariance(LABELS, rng)
    for s in (2, 3):
        xs = [random_element(U, rng, parity=0, density=0.5, max_degree=2) for _ in range(s)]
        assert abs(truncated_expectation(xs, cov) - truncated_expectation_logseries(xs, cov)) < 1e-12


def test_truncated_rejects_mixed(U):
    cov = random_covariance(LABELS, np.random.default_rng(6))
    mixed = gen(U, PLUS, 0) + gen(U, PLUS, 1) * gen(U, MINUS, 1)
    with pytest.raises(ValueError):
        truncated_expectation([mixed], cov)


def test_action_onsite_coefficient():
    p = LatticeParams(N=2, n_side=2, m_N=0.3, r=0.8)
    I0 = action_element(np.zeros((2, 2, 2)), p, measure=False)
    x = ((0, 0), 0)
    c = I0.coefficient([(PLUS, x), (MINUS, x)])
    assert c == pytest.approx(p.m_N + 2 * p.r / p.a)
    Im = action_element(np.zeros((2, 2, 2)), p, measure=True)
    assert Im.coefficient([(PLUS, x), (MINUS, x)]) == pytest.approx(p.a ** 2 * c)


def test_interaction_is_action_difference():
    rng = np.random.default_rng(7)
    p = LatticeParams(N=1, n_side=2, m_N=0.2, r=1.0, lam=1.3)
    U = fermion_universe(lattice_labels(2))
    A = rng.normal(size=(2, 2, 2))
    diff = action_element(A, p, U) - action_element(np.zeros_like(A), p, U)
    assert diff.max_abs_diff(interaction_from_vertices(A, p, U)) < 1e-12


def test_gauge_invariance_single_draw():
    rng = np.random.default_rng(8)
    p = LatticeParams(N=2, n_side=2, m_N=0.4, lam=2.0)
    assert gauge_invariance_check(rng.normal(size=(2, 2, 2)), rng.normal(size=(2, 2)), p) < 1e-12
    # a constant shift of A is not a gradient and moves the action
    A = rng.normal(size=(2, 2, 2))
    bad = action_element(A + 0.3, p).max_abs_diff(action_element(A, p))
    assert bad > 1e-3


def test_free_covariance_symmetries():
    dev = symmetry_suite(LatticeParams(N=2, n_side=8, m_N=0.3, r=1.0))
    assert set(dev) == {"U1", "Q", "F", "P"}
    assert max(dev.values()) < 1e-12
