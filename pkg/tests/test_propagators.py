import math

import numpy as np
import pytest

from qed2lattice.lattice import (LatticeParams, ParameterError, direct_position_sum,
                                 fermi_symbols, momentum_grid)
from qed2lattice.propagators import (GAMMA, ID2, Kernel2, NormDivergence, SingularPropagator,
                                     boson_momentum_tensor, boson_propagator, boson_sup_norm,
                                     doubling_scan, fermion_momentum, fermion_propagator,
                                     fit_decay, fitted_constants, precision_duality_check,
                                     weighted_norm)


def test_feynman_gauge_tensor():
    p = LatticeParams(N=3, n_side=8, M=1.3, xi=1.0)
    T = boson_momentum_tensor(p)
    k0, k1 = momentum_grid(p)
    s2 = 4 / p.a ** 2 * (np.sin(p.a * k0 / 2) ** 2 + np.sin(p.a * k1 / 2) ** 2)
    assert np.allclose(T[..., 0, 0], 1 / (s2 + p.M ** 2), atol=1e-15)
    assert np.all(T[..., 0, 1] == 0)


@pytest.mark.parametrize("xi", [0.0, 0.3, 1.0])
def test_zero_momentum_tensor(xi):
    p = LatticeParams(N=3, n_side=8, M=2.0, xi=xi)
    assert np.allclose(boson_momentum_tensor(p)[0, 0], np.eye(2) / 4.0)


def test_massless_landau_rejected():
    with pytest.raises(ParameterError):
        boson_propagator(LatticeParams(N=2, n_side=4, M=0.0, xi=0.0))


def test_boson_origin_against_nested_loop():
    p = LatticeParams(N=3, n_side=8, M=1.0, xi=1.0)
    tot = 0.0
    for j0 in range(8):
        for j1 in range(8):
            q = 0.0
            for j in (j0, j1):
                k = 2 * math.pi * j / p.L
                q += (2 / p.a * math.sin(p.a * k / 2)) ** 2
            tot += 1.0 / (q + 1.0)
    assert boson_propagator(p).at((0, 0), 0, 0) == pytest.approx(tot / p.L ** 2, abs=1e-12)


@pytest.mark.parametrize("xi", [0.0, 0.5, 1.0])
def test_boson_fft_vs_direct_and_symmetry(xi):
    p = LatticeParams(N=2, n_side=8, M=0.7, xi=xi)
    g = boson_propagator(p)
    for x in [(0, 0), (1, 2), (5, 3)]:
        for mu in (0, 1):
            for nu in (0, 1):
                assert abs(direct_position_sum(g.hat[..., mu, nu], p, x) - g.at(x, mu, nu)) < 1e-12
                # covariance symmetry; componentwise evenness only holds for mu = nu
                assert abs(g.at(x, mu, nu) - g.at((-x[0], -x[1]), nu, mu)) < 1e-12
        assert abs(g.at(x, 0, 0) - g.at((-x[0], -x[1]), 0, 0)) < 1e-12
    if xi == 1.0:
        assert np.abs(g.grid[..., 0, 1]).max() < 1e-12


def test_label_sign():
    g = boson_propagator(LatticeParams(N=2, n_side=4))
    b, bp = ((0, 0), 0, 1), ((1, 0), 0, 1)
    assert g.label(b, bp) == -g.label(b, ((1, 0), 0, -1))


@pytest.mark.parametrize("xi", [0.0, 0.5, 1.0])
def test_duality_examples(xi):
    assert precision_duality_check(LatticeParams(N=3, n_side=8, M=1.0, xi=xi)) < 1e-10


def test_duality_size_guard():
    with pytest.raises(ParameterError):
        precision_duality_check(LatticeParams(N=3, n_side=32))


def test_fermion_zero_momentum():
    p = LatticeParams(N=3, n_side=8, m_N=0.1)
    assert np.allclose(fermion_momentum(p)[0, 0], ID2 / 0.1)


def test_fermion_inverse_against_numpy():
    p = LatticeParams(N=2, n_side=8, m_N=0.2, r=0.7)
    g = fermion_momentum(p)
    k = momentum_grid(p)
    s0, s1, MN = fermi_symbols(k, p)
    for i in range(8):
        for j in range(8):
            D = -1j * (s0[i, j] * GAMMA[0] + s1[i, j] * GAMMA[1]) + (p.m_N + MN[i, j]) * ID2
            assert np.allclose(g[i, j], np.linalg.inv(D), atol=1e-13)


def test_scale_windows_telescope():
    p = LatticeParams(N=5, n_side=32, m_N=0.1)
    full = fermion_propagator(p, (0, 5)).grid
    parts = sum(fermion_propagator(p, (h - 1, h)).grid for h in range(1, 6))
    assert np.abs(parts - full).max() < 1e-12


def test_singular_propagator_reported():
    with pytest.raises(SingularPropagator) as e:
        fermion_propagator(LatticeParams(N=2, n_side=4, m_N=0.0, r=0.0))
    assert e.value.k == (0.0, 0.0)


def test_doubling_corner_gap():
    N = 3
    r1, = doubling_scan(LatticeParams(N=N, n_side=16, m_N=2.0 ** -N), (1.0,))
    assert r1["wilson_gap"]["(pi/a,pi/a)"] == pytest.approx(4 * 2 ** N)
    assert r1["wilson_gap"]["(pi/a,0)"] == pytest.approx(2 * 2 ** N)


def test_weighted_norm_zero_and_divergence():
    p = LatticeParams(N=3, n_side=32, M=1.0)
    assert weighted_norm(Kernel2(p, np.zeros((32, 32, 1, 1))), 1, 1.0) == 0.0
    g = boson_propagator(p)
    with pytest.raises(NormDivergence):
        weighted_norm(Kernel2(p, g.grid[..., :1, :1]), 1, 50.0)
    sup = weighted_norm(Kernel2(p, g.grid), math.inf, 1.0)
    assert sup == pytest.approx(np.abs(g.grid).max())


def test_plain_l1_norm_is_zero_mode():
    # g^A_00 >= 0 at xi = 1, so its 1-norm equals ghat(0) = 1/M^2
    p = LatticeParams(N=3, n_side=64, M=2.0)
    g = boson_propagator(p)
    assert weighted_norm(Kernel2(p, g.grid[..., :1, :1]), 1, 0.0) == pytest.approx(0.25, rel=1e-12)


def test_sup_norm_is_origin_value():
    p = LatticeParams(N=4, n_side=16, M=1.0)
    assert boson_sup_norm(p) == pytest.approx(boson_propagator(p).grid[..., 0, 0].max(), rel=1e-13)


def test_fit_decay_recovers_rate():
    d = np.linspace(0.01, 4.0, 400)
    v = 3.0 * np.exp(-1.7 * np.sqrt(d))
    fit = fit_decay(v, d, 1.0)
    assert fit["kappa"] == pytest.approx(1.7, rel=1e-6)
    assert fit["K"] == pytest.approx(3.0, rel=1e-6)
    with pytest.raises(ValueError):
        fit_decay(np.zeros_like(d), d, 1.0)


def test_fitted_constants_positive():
    c = fitted_constants(LatticeParams(N=4, n_side=128, M=1.0))
    for k in ("kappa1", "kappa2", "kappa3", "kappa"):
        assert c[k] > 0
    assert c["kappa"] == pytest.approx(0.5 * min(c["kappa1"], c["kappa2"], c["kappa3"]))
