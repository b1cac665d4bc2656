"""The fifteen acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that the terminal summary prints."""
import math

import numpy as np
import pytest

from qed2lattice.anomaly import (MINUS_ONE_OVER_4PI, ONE_OVER_8PI, ONE_OVER_PI, anomaly_scan,
                                 tadpole_continuum, tadpole_lattice_sequence,
                                 ward_identity_check)
from qed2lattice.cumulants import (conjugation_symmetry_check, kernel_split_scan,
                                   tree_property_check)
from qed2lattice.diagrams import bubble_hat, bubble_hat_position
from qed2lattice.grassmann import (gauge_invariance_suite, truncated_oracle_check,
                                   wick_oracle_check)
from qed2lattice.lattice import LatticeParams, index_to_momentum
from qed2lattice.propagators import (doubling_scan, fermion_propagator, norm_scan,
                                     precision_duality_check, propagator_bound_ratio)
from qed2lattice.rgtrees import (cauchy_check, chain_sum_closed_form, chain_sum_enumerated,
                                 dimensional_sum_scan)


def test_c01_ward_identity(criterion):
    worst = 0.0
    for n, N in ((16, 4), (32, 5), (64, 6)):
        res = ward_identity_check(LatticeParams(N=N, n_side=n, M=1.0, m_N=0.1))
        worst = max(worst, res["vector_residual"])
    ok = criterion(1, worst < 1e-9, f"Ward identity relative residual {worst:.2e} < 1e-9")
    assert ok


def test_c02_duality(criterion):
    res = [precision_duality_check(LatticeParams(N=3, n_side=8, M=1.0, xi=xi))
           for xi in (0.0, 0.5, 1.0)]
    ok = criterion(2, max(res) < 1e-10, f"covariance-precision residual {max(res):.2e} < 1e-10")
    assert ok


def test_c03_fermion_bound(criterion):
    bound = math.sqrt(2.0) * math.pi
    worst = max(propagator_bound_ratio(LatticeParams(N=6, n_side=64, r=1.0, m_N=m))
                for m in (0.0, 0.1, 0.5, 1.0, -0.5))
    ok = criterion(3, worst <= bound, f"max ||g(k)|| sqrt(k^2+m^2) = {worst:.4f} <= {bound:.4f}")
    assert ok


def test_c04_doubling(criterion):
    N = 4
    prm = LatticeParams(N=N, n_side=64, m_N=2.0 ** -N)
    r0, r1 = doubling_scan(prm, (0.0, 1.0))
    gap = r1["wilson_gap"]["(pi/a,0)"]
    corner = r1["wilson_gap"]["(pi/a,pi/a)"]
    ok = (r0["regions"] == 4 and r1["regions"] == 1
          and abs(gap - 2 * 2 ** N) < 1e-9 and abs(corner - 4 * 2 ** N) < 1e-9)
    criterion(4, ok, f"regions r=0: {r0['regions']}, r=1: {r1['regions']}; gap {gap:g} = 2*2^N")
    assert ok


def test_c05_gauge_invariance(criterion):
    dev = gauge_invariance_suite(draws=20, seed=11, n_side=2)
    ok = criterion(5, dev < 1e-12, f"gauge deviation {dev:.2e} < 1e-12 over 20 draws")
    assert ok


def test_c06_wick_and_truncated(criterion):
    wick = max(wick_oracle_check(n_labels=k, draws=5, seed=k) for k in (1, 2, 3, 4))
    trunc = truncated_oracle_check(s_max=4, n_labels=3, draws=5, seed=5)
    worst_t = max(trunc.values())
    ok = wick < 1e-12 and worst_t < 1e-12
    criterion(6, ok, f"determinant vs Berezin {wick:.2e}; truncated vs connected part {worst_t:.2e}")
    assert ok


def test_c07_bubble_cross_oracle(criterion):
    prm = LatticeParams(N=2, n_side=4, m_N=0.3, r=0.8)
    prop = fermion_propagator(prm)
    worst = 0.0
    for idx in ((0, 0), (1, 0), (0, 1), (1, 1), (2, 3), (3, 2)):
        p = tuple(float(index_to_momentum(i, prm)) for i in idx)
        for chiral in (False, True):
            a = bubble_hat(p, prm, chiral=chiral).values
            b = bubble_hat_position(p, prop, chiral=chiral)
            worst = max(worst, float(np.abs(a - b).max()))
    ok = criterion(7, worst < 1e-10, f"momentum vs position bubble {worst:.2e} < 1e-10")
    assert ok


def test_c08_bubble_symmetries(criterion):
    worst_d = worst_e = 0.0
    for prm in (LatticeParams(N=3, n_side=8, m_N=0.1), LatticeParams(N=4, n_side=16, m_N=0.5, r=0.6)):
        P = bubble_hat((0.0, 0.0), prm).values
        P5 = bubble_hat((0.0, 0.0), prm, chiral=True).values
        s = max(np.abs(P).max(), np.abs(P5).max())
        worst_d = max(worst_d, abs(P[0, 1]) / s, abs(P[1, 0]) / s, abs(P[0, 0] - P[1, 1]) / s)
        worst_e = max(worst_e, abs(P5[0, 0]) / s, abs(P5[1, 1]) / s, abs(P5[0, 1] + P5[1, 0]) / s)
    ok = worst_d < 1e-10 and worst_e < 1e-10
    criterion(8, ok, f"Pi(0) off-delta {worst_d:.2e}, Pi5(0) off-epsilon {worst_e:.2e}")
    assert ok


def test_c09_tree_property(criterion):
    rng = np.random.default_rng(9)
    worst = 0.0
    for n in range(2, 8):
        for _ in range(100):
            w = rng.uniform(-1.0, 1.0, size=(n, n))
            worst = max(worst, tree_property_check(n, w + w.T))
    ok = criterion(9, worst < 1e-9, f"tree identity residual {worst:.2e} < 1e-9 (n <= 7)")
    assert ok


def test_c10_kernel_splitting(criterion):
    scan = kernel_split_scan(2, [(0.25, 0.25), (0.5, 0.375)], [0, 0], [1, 1], range(4, 10), 0.01)
    slope = scan["slope"]
    ok = slope is not None and abs(slope + 2.0) <= 0.3
    criterion(10, ok, f"log2|w_20 - v_2| slope {slope:.3f} = -2 +- 0.3")
    assert ok


def test_c11_furry(criterion):
    prm = LatticeParams(N=1, n_side=4, lam=0.5)
    odd = [conjugation_symmetry_check(prm, p) for p in (1, 3)]
    even = conjugation_symmetry_check(prm, 2)
    worst = max(r["contracted_max"] for r in odd)
    ok = worst < 1e-10 and even["contracted_max"] > 1e-6
    criterion(11, ok, f"odd-p contraction {worst:.2e}; even control {even['contracted_max']:.3g}")
    assert ok


def test_c12_norm_scalings(criterion):
    res = norm_scan(N=4, L=8.0, M_values=(1, 2, 4, 8), N_values=range(6, 13))
    ok = abs(res["l1_slope"] + 2.0) <= 0.1 and res["sup_r2"] > 0.99
    criterion(12, ok, f"||g||_1 slope {res['l1_slope']:.4f}; ||g||_inf R^2 {res['sup_r2']:.6f}")
    assert ok


@pytest.fixture(scope="module")
def scan512():
    return anomaly_scan(512, (1, 2, 3, 4))


def test_c13_anomaly_coefficients(criterion, scan512):
    c = scan512["coefficients"]
    r8 = abs(c["one_over_8pi"] - ONE_OVER_8PI) / ONE_OVER_8PI
    r4 = abs(c["minus_one_over_4pi"] - MINUS_ONE_OVER_4PI) / abs(MINUS_ONE_OVER_4PI)
    rp = abs(c["one_over_pi"] - ONE_OVER_PI) / ONE_OVER_PI
    rc = abs(c["chiral_one_over_pi"] - ONE_OVER_PI) / ONE_OVER_PI
    ok = r8 < 0.02 and r4 < 0.01 and rp < 0.02 and rc < 0.02
    criterion(13, ok, f"1/8pi {r8:.1e}, -1/4pi {r4:.1e}, 1/pi {rp:.1e}, chiral i/pi {rc:.1e} (relative)")
    assert ok


def test_c14_tadpole_sequence(criterion):
    ref = tadpole_continuum(4096)
    errs = [abs(v - ref) for _, v in tadpole_lattice_sequence(range(5, 11))]
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    criterion(14, ok, f"|T(N) - T_inf| from {errs[0]:.1e} to {errs[-1]:.1e}, strictly decreasing")
    assert ok


def test_c15_gn_sums(criterion):
    worst_chain = max(abs(chain_sum_closed_form(0, N, th) - chain_sum_enumerated(0, N, th))
                      for N in range(1, 11) for th in (0.5, 0.99))
    checks = []
    for ep in (1, 2, 3, 4):
        for th in (0.5, 0.99):
            rows = dimensional_sum_scan(0, range(1, 11), ep, th)
            checks.append(cauchy_check(rows, ep, th))
    ok = worst_chain < 1e-12 and all(c["bounded"] and c["shrinking"] for c in checks)
    tail = max(c["tail_ratio"] for c in checks)
    criterion(15, ok, f"chain closed form {worst_chain:.1e}; sums bounded, worst tail ratio {tail:.3f}")
    assert ok
