import numpy as np
import pytest

from qed2lattice.cutoffs import (chi, chi_h, f_h, gevrey_footprint, mollifier_grid,
                                 window_factor)
from qed2lattice.lattice import LatticeParams


def test_chi_plateaus_and_monotone():
    t = np.linspace(0, 2, 2001)
    c = chi(t)
    assert np.all(c[t <= 0.5] == 1.0) and np.all(c[t >= 1.0] == 0.0)
    assert np.all(np.diff(c) <= 0)


def test_chi_reflection():
    t = np.linspace(0.5, 1.0, 101)
    assert np.allclose(chi(t) + chi(1.5 - t), 1.0, atol=1e-15)


def test_f_h_telescopes():
    k = np.linspace(0, 300, 1001)
    N = 7
    tot = sum(f_h(k, h, N) for h in range(1, N + 1))
    assert np.allclose(tot, 1.0 - chi_h(k, 0), atol=1e-15)
    with pytest.raises(ValueError):
        f_h(k, 0, N)


def test_window_factor_matches_sum():
    k = np.linspace(0, 200, 501)
    N = 6
    assert np.allclose(window_factor(k, (2, 5), N), sum(f_h(k, h, N) for h in range(3, 6)), atol=1e-15)
    assert np.all(window_factor(k, None, N) == 1.0)
    with pytest.raises(ValueError):
        window_factor(k, (3, 3), N)


def test_gevrey_footprint_positive():
    g = gevrey_footprint(4)
    assert len(g["derivatives"]) == 4 and g["C1"] > 0 and g["C2"] > 0


def test_mollifier_integrates_to_one():
    p = LatticeParams(N=3, n_side=16)
    d = mollifier_grid(p, 3)
    assert p.a ** 2 * d.sum() == pytest.approx(1.0, abs=1e-12)
