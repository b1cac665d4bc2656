"""Bare vertices, one-loop bubbles and tadpoles on the lattice."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeParams, momentum_grid
from .propagators import (GAMMA, GAMMA5, ID2, BosonPropagator, FermionPropagator,
                          fermion_momentum)


def bare_vertex(mu: int, eps: int, params: LatticeParams, chiral: bool = False):
    """(u, v, C) with O_b = psi^+_{y+u} C psi^-_{y+v} in lattice units."""
    if mu not in (0, 1) or eps not in (1, -1):
        raise ValueError(f"bad vertex label mu={mu}, eps={eps}")
    if chiral:
        return (0, 0), (0, 0), 0.5 * eps * params.Z5 * GAMMA[mu] @ GAMMA5
    e = (1, 0) if mu == 0 else (0, 1)
    if eps == 1:
        return (0, 0), e, 0.5 * (GAMMA[mu] - params.r * ID2)
    return e, (0, 0), -0.5 * (GAMMA[mu] + params.r * ID2)


def vertex_terms(mu: int, params: LatticeParams, chiral: bool = False):
    """[(eps, C, u, v)] for both charge labels of a vector or chiral leg."""
    out = []
    for eps in (1, -1):
        u, v, C = bare_vertex(mu, eps, params, chiral=chiral)
        out.append((eps, C, np.array(u), np.array(v)))
    return out


def vertex_kernel(b, eta, eta_p, params: LatticeParams, chiral: bool = False) -> complex:
    """c_b(eta, eta') with the lattice delta functions (a^-2 each)."""
    (y, mu, eps), (x, s), (xp, sp) = b, eta, eta_p
    u, v, C = bare_vertex(mu, eps, params, chiral=chiral)
    n = params.n_side
    hit = all((x[i] - y[i] - u[i]) % n == 0 and (xp[i] - y[i] - v[i]) % n == 0 for i in (0, 1))
    return complex(C[s, sp]) / params.a ** 4 if hit else 0j


@dataclass(frozen=True)
class BubbleTensor:
    p: tuple
    values: np.ndarray
    window: tuple | None
    chiral: bool
    params: LatticeParams


def _momentum_index(p, params: LatticeParams):
    idx = []
    for pk in p:
        j = pk * params.L / (2 * np.pi)
        if abs(j - round(j)) > 1e-9:
            raise ValueError(f"momentum {p} is not on the lattice dual grid")
        idx.append(int(round(j)))
    return tuple(idx)


def _shifted(ghat, shift):
    return np.roll(ghat, (-shift[0], -shift[1]), axis=(0, 1))


def bubble_hat(p, params: LatticeParams, window=None, chiral: bool = False,
               ghat: np.ndarray | None = None) -> BubbleTensor:
    """Fourier transform of the one-loop bubble with the eps, eps' sign sum.
    With ``chiral`` the second leg is the chiral vertex."""
    p = tuple(float(x) for x in p)
    shift = _momentum_index(p, params)
    if ghat is None:
        ghat = fermion_momentum(params, window)
    k0, k1 = momentum_grid(params)
    a = params.a
    gp = _shifted(ghat, shift)
    pk = (k0 + p[0], k1 + p[1])
    T = np.zeros((2, 2), dtype=complex)
    for mu in (0, 1):
        for nu in (0, 1):
            tot = 0j
            for w1, C1, u1, v1 in vertex_terms(mu, params):
                for w2, C2, u2, v2 in vertex_terms(nu, params, chiral=chiral):
                    d1, d2 = v1 - u2, v2 - u1
                    ph = np.exp(-1j * a * (k0 * d1[0] + k1 * d1[1] + pk[0] * d2[0] + pk[1] * d2[1]))
                    tr = np.einsum("ab,...bc,cd,...da->...", C1, ghat, C2, gp)
                    tot += w1 * w2 * np.sum(ph * tr)
            T[mu, nu] = 0.25 * tot / params.L ** 2
    return BubbleTensor(p, T, window, chiral, params)


def bubble_position(b1, b2, prop: FermionPropagator, chiral2: bool = False) -> complex:
    """Pi(b1, b2) = (1/2) Tr[C1 g(x1' - x2) C2 g(x2' - x1)] in position space."""
    prm = prop.params
    (y1, mu1, e1), (y2, mu2, e2) = b1, b2
    u1, v1, C1 = bare_vertex(mu1, e1, prm)
    u2, v2, C2 = bare_vertex(mu2, e2, prm, chiral=chiral2)
    x1 = np.add(y1, u1)
    x1p = np.add(y1, v1)
    x2 = np.add(y2, u2)
    x2p = np.add(y2, v2)
    return 0.5 * complex(np.trace(C1 @ prop.at(x1p - x2) @ C2 @ prop.at(x2p - x1)))


def bubble_hat_position(p, prop: FermionPropagator, chiral: bool = False) -> np.ndarray:
    """Slow oracle: (1/2) sum_{eps eps'} eps eps' int dx dy / L^2 e^{-ip(x-y)} Pi."""
    prm = prop.params
    n, a = prm.n_side, prm.a
    T = np.zeros((2, 2), dtype=complex)
    sites = [(i, j) for i in range(n) for j in range(n)]
    for mu in (0, 1):
        for nu in (0, 1):
            tot = 0j
            for e1 in (1, -1):
                for e2 in (1, -1):
                    for x in sites:
                        ph = np.exp(-1j * a * (p[0] * x[0] + p[1] * x[1]))
                        tot += e1 * e2 * ph * bubble_position((x, mu, e1), ((0, 0), nu, e2), prop, chiral)
            # translation invariance turns int dy / L^2 into 1
            T[mu, nu] = 0.5 * tot * a ** 2
    return T


def tadpole(params: LatticeParams, window=None, mu: int = 0, eps: int = 1,
            ghat: np.ndarray | None = None) -> complex:
    """a E^T(O_b) = -a Tr[C g(x' - x)] for b = (0, mu, eps), as a momentum sum."""
    if ghat is None:
        ghat = fermion_momentum(params, window)
    u, v, C = bare_vertex(mu, eps, params)
    d = np.subtract(v, u)
    k0, k1 = momentum_grid(params)
    ph = np.exp(-1j * params.a * (k0 * d[0] + k1 * d[1]))
    g_d = np.einsum("xy,xyab->ab", ph, ghat) / params.L ** 2
    return -params.a * complex(np.trace(C @ g_d))


def b_hat(p, params: LatticeParams, window=None, chiral: bool = False,
          ghat: np.ndarray | None = None) -> np.ndarray:
    """lambda-linear coefficient of the current-current (vector) or
    current-chiral correlation: -2(delta T + 2 Pi) and -4 Pi_5."""
    if ghat is None:
        ghat = fermion_momentum(params, window)
    P = bubble_hat(p, params, window, chiral=chiral, ghat=ghat).values
    if chiral:
        return -4.0 * P
    return -2.0 * (np.eye(2) * tadpole(params, window, ghat=ghat) + 2.0 * P)


def quartic_kernel(eta1, eta2, eta1p, eta2p, prop: BosonPropagator) -> complex:
    """-(1/4) int db db' lam g^A_{b b'} (c_b(1,1') c_b'(2,2') - c_b(2,1') c_b'(1,2'))."""
    prm = prop.params
    if prm.lam == 0:
        return 0j
    a2 = prm.a ** 2

    def supports(eta, eta_p):
        """Labels b with c_b(eta, eta') != 0 and their value."""
        out = []
        (x, s), (xp, sp) = eta, eta_p
        for mu in (0, 1):
            for eps in (1, -1):
                u, v, C = bare_vertex(mu, eps, prm)
                y = tuple((x[i] - u[i]) % prm.n_side for i in (0, 1))
                b = (y, mu, eps)
                val = vertex_kernel(b, eta, eta_p, prm)
                if val != 0:
                    out.append((b, val))
        return out

    def term(e1, e1p, e2, e2p):
        tot = 0j
        for b, c1 in supports(e1, e1p):
            for bp, c2 in supports(e2, e2p):
                tot += prop.label(b, bp) * c1 * c2
        return tot

    direct = term(eta1, eta1p, eta2, eta2p)
    exch = term(eta2, eta1p, eta1, eta2p)
    return -0.25 * a2 * a2 * prm.lam * (direct - exch)


def bubble_grid(params: LatticeParams, window=None, chiral: bool = False, momenta=None):
    """Rows (p0, p1, mu, nu, value) of Pi-hat over a set of dual momenta."""
    ghat = fermion_momentum(params, window)
    if momenta is None:
        k0, k1 = momentum_grid(params)
        momenta = list(zip(k0.ravel(), k1.ravel()))
    rows = []
    for p in momenta:
        T = bubble_hat(p, params, window, chiral=chiral, ghat=ghat).values
        for mu in (0, 1):
            for nu in (0, 1):
                rows.append((float(p[0]), float(p[1]), mu, nu, complex(T[mu, nu])))
    return rows


def _correlate(X, Y):
    """sum_k X(k) Y(k + p) for every dual momentum p, by FFT."""
    n0, n1 = X.shape
    return np.fft.ifft2(n0 * n1 * np.fft.ifft2(X) * np.fft.fft2(Y))


def bubble_hat_grid(params: LatticeParams, window=None, chiral: bool = False,
                    ghat: np.ndarray | None = None) -> np.ndarray:
    """Pi-hat(p) at every dual momentum p, shape (n, n, 2, 2); the same sum
    as bubble_hat, evaluated as a cross-correlation over k."""
    if ghat is None:
        ghat = fermion_momentum(params, window)
    k0, k1 = momentum_grid(params)
    a, n = params.a, params.n_side
    out = np.zeros((n, n, 2, 2), dtype=complex)
    for mu in (0, 1):
        for nu in (0, 1):
            for w1, C1, u1, v1 in vertex_terms(mu, params):
                for w2, C2, u2, v2 in vertex_terms(nu, params, chiral=chiral):
                    d1, d2 = v1 - u2, v2 - u1
                    X = ghat * np.exp(-1j * a * (k0 * d1[0] + k1 * d1[1]))[..., None, None]
                    Y = ghat * np.exp(-1j * a * (k0 * d2[0] + k1 * d2[1]))[..., None, None]
                    # Tr[C1 X C2 Y] = sum_{ijcd} C1_di X_ij C2_jc Y_cd
                    for i, j, c, d in np.ndindex(2, 2, 2, 2):
                        coef = w1 * w2 * C1[d, i] * C2[j, c]
                        if coef != 0:
                            out[..., mu, nu] += coef * _correlate(X[..., i, j], Y[..., c, d])
    return 0.25 * out / params.L ** 2
