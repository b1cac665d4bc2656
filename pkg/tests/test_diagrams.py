import numpy as np
import pytest

from qed2lattice.anomaly import b_hat_grid
from qed2lattice.diagrams import (b_hat, bare_vertex, bubble_grid, bubble_hat, bubble_hat_grid,
                                  bubble_position, quartic_kernel, tadpole)
from qed2lattice.grassmann import (FermionCovariance, fermion_universe, lattice_labels,
                                   truncated_expectation, vertex_element)
from qed2lattice.lattice import LatticeParams, index_to_momentum, momentum_grid, sigma
from qed2lattice.propagators import GAMMA, GAMMA5, boson_propagator, fermion_propagator


def test_bare_vertices():
    p = LatticeParams(N=2, n_side=4, r=0.6, Z5=1.0)
    u, v, C = bare_vertex(0, 1, p)
    assert u == (0, 0) and v == (1, 0) and np.allclose(C, 0.5 * (GAMMA[0] - 0.6 * np.eye(2)))
    u, v, C = bare_vertex(1, -1, p)
    assert u == (0, 1) and v == (0, 0) and np.allclose(C, -0.5 * (GAMMA[1] + 0.6 * np.eye(2)))
    u, v, C = bare_vertex(1, -1, p, chiral=True)
    assert np.allclose(C, -0.5 * GAMMA[1] @ GAMMA5)
    with pytest.raises(ValueError):
        bare_vertex(2, 1, p)


@pytest.fixture(scope="module")
def small():
    p = LatticeParams(N=1, n_side=2, m_N=0.4, r=0.9)
    prop = fermion_propagator(p)
    labels = lattice_labels(2)
    return p, prop, fermion_universe(labels), FermionCovariance.from_propagator(prop, labels)


@pytest.mark.parametrize("chiral", [False, True])
def test_bubble_is_truncated_expectation(small, chiral):
    p, prop, U, cov = small
    for b1 in [((0, 0), 0, 1), ((1, 0), 1, -1)]:
        for b2 in [((0, 1), 0, -1), ((1, 1), 1, 1), ((0, 0), 0, 1)]:
            O1 = vertex_element(b1, p, U)
            O2 = vertex_element(b2, p, U, chiral=chiral)
            et = truncated_expectation([O1, O2], cov)
            assert bubble_position(b1, b2, prop, chiral2=chiral) == pytest.approx(-0.5 * et, abs=1e-12)


def test_tadpole_is_expectation(small):
    p, prop, U, cov = small
    for mu in (0, 1):
        for eps in (1, -1):
            et = truncated_expectation([vertex_element(((0, 0), mu, eps), p, U)], cov)
            assert tadpole(p, mu=mu, eps=eps) == pytest.approx(p.a * et, abs=1e-12)


@pytest.mark.parametrize("chiral", [False, True])
def test_grid_matches_pointwise(chiral):
    p = LatticeParams(N=2, n_side=8, m_N=0.15, r=0.8)
    G = bubble_hat_grid(p, chiral=chiral)
    k0, k1 = momentum_grid(p)
    for i, j in [(0, 0), (1, 0), (3, 5), (4, 4), (7, 2)]:
        ref = bubble_hat((k0[i, j], k1[i, j]), p, chiral=chiral).values
        assert np.abs(G[i, j] - ref).max() < 1e-12 * max(1.0, np.abs(ref).max())


def test_b_hat_grid_and_ward_identity():
    p = LatticeParams(N=2, n_side=8, m_N=0.3)
    B = b_hat_grid(p)
    k0, k1 = momentum_grid(p)
    s0, s1, _ = sigma((k0, k1), p)
    contr = s0[..., None] * B[..., 0, :] + s1[..., None] * B[..., 1, :]
    assert np.abs(contr).max() < 1e-12 * np.abs(B).max()
    pt = (k0[3, 1], k1[3, 1])
    assert np.allclose(B[3, 1], b_hat(pt, p), atol=1e-12)


def test_off_grid_momentum_rejected():
    with pytest.raises(ValueError):
        bubble_hat((0.1, 0.0), LatticeParams(N=2, n_side=4))


def test_windowed_bubble_runs():
    p = LatticeParams(N=4, n_side=16, m_N=0.1)
    full = bubble_hat((0.0, 0.0), p).values
    win = bubble_hat((0.0, 0.0), p, window=(0, 4)).values
    assert np.isfinite(win).all() and not np.allclose(full, win)


def test_bubble_grid_rows():
    p = LatticeParams(N=1, n_side=4)
    rows = bubble_grid(p, momenta=[(0.0, 0.0), (float(index_to_momentum(1, p)), 0.0)])
    assert len(rows) == 8 and rows[0][:4] == (0.0, 0.0, 0, 0)


def test_quartic_kernel_antisymmetry():
    prop = boson_propagator(LatticeParams(N=2, n_side=4, lam=0.8, r=0.5))
    e1, e2, e1p, e2p = ((0, 0), 0), ((1, 0), 1), ((1, 0), 0), ((2, 0), 1)
    k = quartic_kernel(e1, e2, e1p, e2p, prop)
    assert abs(k) > 0
    assert quartic_kernel(e2, e1, e1p, e2p, prop) == pytest.approx(-k)
    zero = boson_propagator(LatticeParams(N=2, n_side=4, lam=0.0))
    assert quartic_kernel(e1, e2, e1p, e2p, zero) == 0
