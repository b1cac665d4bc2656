"""Boson covariance, Wilson-fermion propagator with scale windows, weighted
norms and the fitted decay constants that feed them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .cutoffs import window_factor
from .lattice import (LatticeParams, ParameterError, distance_grid, fermi_symbols,
                      momentum_grid, sigma, to_position)

GAMMA0 = np.array([[1, 0], [0, -1]], dtype=complex)
GAMMA1 = np.array([[0, -1j], [1j, 0]], dtype=complex)
GAMMA = (GAMMA0, GAMMA1)
GAMMA5 = 1j * GAMMA0 @ GAMMA1
ID2 = np.eye(2, dtype=complex)


class SingularPropagator(ArithmeticError):
    def __init__(self, k):
        super().__init__(f"Dirac operator is singular at momentum k = {tuple(k)}")
        self.k = tuple(k)


class NormDivergence(ArithmeticError):
    pass


# -- boson ------------------------------------------------------------------

def boson_momentum_tensor(params: LatticeParams) -> np.ndarray:
    """(delta + (1-xi) sigma_mu sigma*_nu / (xi|sigma|^2 + M^2)) / (|sigma|^2 + M^2)."""
    if params.M == 0 and params.xi == 0:
        raise ParameterError("M = 0 with xi = 0 leaves the k = 0 mode unbounded")
    k0, k1 = momentum_grid(params)
    s0, s1, s2 = sigma((k0, k1), params)
    M2 = params.M ** 2
    den = s2 + M2
    if params.M == 0:
        den = np.where(den == 0, np.inf, den)  # zero mode dropped when M = 0
    xi = params.xi
    sig = (s0, s1)
    out = np.zeros(k0.shape + (2, 2), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            long = 0.0
            if xi != 1.0:
                long = (1.0 - xi) * sig[mu] * np.conj(sig[nu]) / (xi * s2 + M2)
            out[..., mu, nu] = ((mu == nu) + long) / den
    return out


@dataclass(frozen=True)
class BosonPropagator:
    params: LatticeParams
    hat: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)  # g_{mu nu}(x), shape (n, n, 2, 2), real

    def at(self, dx, mu: int, nu: int) -> float:
        n = self.params.n_side
        return float(self.grid[dx[0] % n, dx[1] % n, mu, nu])

    def label(self, b1, b2) -> float:
        """g^A on decorated labels, carrying the eps1*eps2 sign."""
        (x1, mu1, e1), (x2, mu2, e2) = b1, b2
        dx = (x1[0] - x2[0], x1[1] - x2[1])
        return e1 * e2 * self.at(dx, mu1, mu2)


def boson_propagator(params: LatticeParams) -> BosonPropagator:
    hat = boson_momentum_tensor(params)
    g = to_position(hat, params)
    imag = float(np.max(np.abs(g.imag))) if g.size else 0.0
    scale = float(np.max(np.abs(g.real))) or 1.0
    if imag > 1e-9 * scale:
        raise ArithmeticError(f"boson propagator not real (|Im| = {imag:.3e})")
    return BosonPropagator(params, hat, np.ascontiguousarray(g.real))


def boson_gradient(prop: BosonPropagator, alpha: int) -> np.ndarray:
    """Forward lattice derivative along alpha of every g_{mu nu}(x)."""
    g = prop.grid
    return (np.roll(g, -1, axis=alpha) - g) / prop.params.a


def precision_matrix(params: LatticeParams) -> np.ndarray:
    """Hessian of the lattice boson action over (site, mu), including the
    a^2 lattice measure."""
    n, a = params.n_side, params.a
    V = n * n
    idx = np.arange(V).reshape(n, n)
    I = np.eye(V)
    fwd, bwd = [], []
    for mu in range(2):
        shift_p = np.roll(idx, -1, axis=mu).ravel()  # x + a e_mu
        shift_m = np.roll(idx, 1, axis=mu).ravel()   # x - a e_mu
        fwd.append((I[shift_p] - I) / a)
        bwd.append((I[shift_m] - I) / a)
    Z = np.zeros((V, V))

    def block(mu_op):  # operator acting on the full (mu, site) vector
        return np.hstack(mu_op)

    K = np.zeros((2 * V, 2 * V))
    for mu in range(2):
        for nu in range(2):
            if mu == nu:
                continue
            # F_{mu nu} = D_mu A_nu - D_nu A_mu
            ops = [Z, Z]
            ops[nu] = ops[nu] + fwd[mu]
            ops[mu] = ops[mu] - fwd[nu]
            F = block(ops)
            K += 0.5 * F.T @ F
    K += params.M ** 2 * np.eye(2 * V)
    Dv = block([bwd[0], bwd[1]])
    K += params.xi * Dv.T @ Dv
    return a * a * K


def covariance_matrix(prop: BosonPropagator) -> np.ndarray:
    n = prop.params.n_side
    V = n * n
    i0, i1 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i0, i1 = i0.ravel(), i1.ravel()
    d0 = (i0[:, None] - i0[None, :]) % n
    d1 = (i1[:, None] - i1[None, :]) % n
    C = np.zeros((2 * V, 2 * V))
    for mu in range(2):
        for nu in range(2):
            C[mu * V:(mu + 1) * V, nu * V:(nu + 1) * V] = prop.grid[d0, d1, mu, nu]
    return C


def precision_duality_check(params: LatticeParams) -> float:
    if params.n_side > 16:
        raise ParameterError("duality check builds dense matrices; use n_side <= 16")
    prop = boson_propagator(params)
    P = precision_matrix(params)
    C = covariance_matrix(prop)
    return float(np.max(np.abs(P @ C - np.eye(P.shape[0]))))


# -- fermion ------------------------------------------------------------------

def dirac_inverse(s0, s1, W) -> np.ndarray:
    """(-i sslash + W)^-1 = (i sslash + W) / (s^2 + W^2), elementwise."""
    det = s0 ** 2 + s1 ** 2 + W ** 2
    out = np.empty(np.shape(det) + (2, 2), dtype=complex)
    out[..., 0, 0] = (W + 1j * s0) / det
    out[..., 0, 1] = s1 / det
    out[..., 1, 0] = -s1 / det
    out[..., 1, 1] = (W - 1j * s0) / det
    return out


def fermion_momentum(params: LatticeParams, window=None) -> np.ndarray:
    k0, k1 = momentum_grid(params)
    s0, s1, MN = fermi_symbols((k0, k1), params)
    W = params.m_N + MN
    f = window_factor(np.hypot(k0, k1), window, params.N)
    det = s0 ** 2 + s1 ** 2 + W ** 2
    bad = (det == 0) & (f != 0)
    if np.any(bad):
        i = np.argwhere(bad)[0]
        raise SingularPropagator((k0[tuple(i)], k1[tuple(i)]))
    zero = det == 0  # only reached where the window vanishes
    Ws = np.where(zero, 1.0, W)
    return dirac_inverse(s0, s1, Ws) * np.where(zero, 0.0, f)[..., None, None]


@dataclass(frozen=True)
class FermionPropagator:
    params: LatticeParams
    window: tuple | None
    hat: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)  # g(x)_{s s'}, shape (n, n, 2, 2)

    def at(self, dx) -> np.ndarray:
        n = self.params.n_side
        return self.grid[dx[0] % n, dx[1] % n]

    def entry(self, eta_minus, eta_plus) -> complex:
        """E(psi^-_eta psi^+_eta') = g(x - x')_{s s'}."""
        (x, s), (y, t) = eta_minus, eta_plus
        return complex(self.at((x[0] - y[0], x[1] - y[1]))[s, t])


def fermion_propagator(params: LatticeParams, window=None) -> FermionPropagator:
    hat = fermion_momentum(params, window)
    return FermionPropagator(params, window, hat, to_position(hat, params))


def propagator_bound_ratio(params: LatticeParams) -> float:
    """max_k ||ghat(k)||_op * sqrt(|k|^2 + m^2)."""
    k0, k1 = momentum_grid(params)
    s0, s1, MN = fermi_symbols((k0, k1), params)
    W = params.m_N + MN
    # D D^dagger = (s^2 + W^2) 1, so the operator norm is 1/sqrt(s^2 + W^2)
    det = s0 ** 2 + s1 ** 2 + W ** 2
    ok = det > 0  # k = 0 at m = 0 is the massless zero mode; excluded
    norm = 1.0 / np.sqrt(det[ok])
    return float(np.max(norm * np.sqrt(k0[ok] ** 2 + k1[ok] ** 2 + params.m_N ** 2)))


def doubling_scan(params: LatticeParams, r_values=(0.0, 1.0), threshold: float = 3.0):
    """Count connected low-mode regions of the Dirac operator for each r."""
    n = params.n_side
    k0, k1 = momentum_grid(params)
    cut = threshold * abs(params.m_N)
    doublers = {"(pi/a,0)": (n // 2, 0), "(0,pi/a)": (0, n // 2), "(pi/a,pi/a)": (n // 2, n // 2)}
    out = []
    for r in r_values:
        p = params.replace(r=float(r))
        s0, s1, MN = fermi_symbols((k0, k1), p)
        smin = np.sqrt(s0 ** 2 + s1 ** 2 + (p.m_N + MN) ** 2)
        mask = smin < cut
        out.append({
            "r": float(r),
            "regions": _count_periodic_regions(mask),
            "low_modes": int(mask.sum()),
            "wilson_gap": {k: float(MN[i]) for k, i in doublers.items()},
            "sigma_min": {k: float(smin[i]) for k, i in doublers.items()},
        })
    return out


def _count_periodic_regions(mask: np.ndarray) -> int:
    n0, n1 = mask.shape
    idx = np.arange(mask.size).reshape(mask.shape)
    rows, cols = [], []
    for ax in (0, 1):
        nb = np.roll(idx, -1, axis=ax)
        both = mask & np.roll(mask, -1, axis=ax)
        rows.append(idx[both])
        cols.append(nb[both])
    r = np.concatenate(rows) if rows else np.array([], int)
    c = np.concatenate(cols) if cols else np.array([], int)
    adj = coo_matrix((np.ones(len(r)), (r, c)), shape=(mask.size, mask.size))
    ncomp, lab = connected_components(adj, directed=False)
    return int(len(np.unique(lab[mask.ravel()])))


# -- norms and fitted decay ---------------------------------------------------

@dataclass(frozen=True)
class Kernel2:
    """Translation-invariant two-point kernel: W(x) per decoration pair,
    grid shape (n, n, d1, d2)."""
    params: LatticeParams
    grid: np.ndarray = field(repr=False)


def weighted_norm(kernel: Kernel2, p, kappa: float, h_star: int | None = None,
                  tail_tol: float = 1e-2) -> float:
    prm = kernel.params
    W = np.abs(kernel.grid)
    if p == math.inf or p == "inf":
        return float(W.max()) if W.size else 0.0
    if p < 1:
        raise ValueError("norm index must be >= 1 or inf")
    hs = prm.h_star if h_star is None else h_star
    d = distance_grid(prm)
    logw = 0.5 * p * kappa * np.sqrt(2.0 ** hs * d)
    dens = np.exp(logw)[..., None, None] * W ** p
    if not dens.any():
        return 0.0
    far = d >= 0.9 * d.max()
    if dens[far].max() > tail_tol * dens.max():
        raise NormDivergence("weight outgrows the kernel decay on this torus")
    return float((prm.a ** 2 * dens.sum()) ** (1.0 / p))


def fit_decay(values: np.ndarray, dist: np.ndarray, scale: float, prefactor=None,
              floor: float = 1e-12, n_bins: int = 40):
    """Fit an envelope |v| <= K exp(-kappa sqrt(scale * d)) on the upper
    envelope of |v| binned in distance (distances up to L/2 only).

    ``prefactor`` optionally divides the values by a known algebraic factor
    before fitting."""
    v = np.abs(values)
    if v.ndim > dist.ndim:
        v = v.reshape(dist.shape + (-1,)).max(axis=-1)
    if prefactor is not None:
        v = v * prefactor
    L_half = dist.max() / math.sqrt(2.0)
    if not v.any():
        raise ValueError("kernel vanishes identically; nothing to fit")
    sel = (dist > 0) & (dist <= L_half) & (v > floor * v.max())
    if sel.sum() < 3:
        raise ValueError("too few points to fit a decay rate")
    u = np.sqrt(scale * dist[sel])
    y = np.log(v[sel])
    edges = np.linspace(u.min(), u.max(), n_bins + 1)
    which = np.clip(np.digitize(u, edges) - 1, 0, n_bins - 1)
    ub, yb = [], []
    for b in range(n_bins):
        m = which == b
        if m.any():
            j = np.argmax(y[m])
            ub.append(u[m][j])
            yb.append(y[m][j])
    ub, yb = np.array(ub), np.array(yb)
    slope, icpt = np.polyfit(ub, yb, 1)
    kappa = -slope
    K = math.exp(np.max(y - slope * u))  # lift the line to an envelope
    return {"kappa": float(kappa), "K": float(K)}


def fitted_constants(params: LatticeParams, h_fermion: int | None = None) -> dict:
    """kappa_1 (boson), kappa_2 (single-scale fermion), kappa_3 (boson
    gradient) fitted on this lattice; kappa defaults to half their minimum."""
    d = distance_grid(params)
    gb = boson_propagator(params.replace(xi=1.0))
    b = fit_decay(gb.grid[..., 0, 0], d, 2.0 ** params.h_star)
    grad = np.abs(boson_gradient(gb, 0)[..., 0, 0])
    g3 = fit_decay(grad, d, 1.0, prefactor=(params.a + d))
    h = h_fermion if h_fermion is not None else max(1, params.N - 1)
    gf = fermion_propagator(params, window=(h - 1, h))
    f2 = fit_decay(gf.grid, d, 2.0 ** h)
    f2["K"] = f2["K"] / 2.0 ** h
    kappa = 0.5 * min(b["kappa"], f2["kappa"], g3["kappa"])
    return {"kappa1": b["kappa"], "K_p": b["K"], "kappa2": f2["kappa"], "K": f2["K"],
            "h_fermion": h, "kappa3": g3["kappa"], "K_grad": g3["K"], "kappa": kappa}


# -- norm scalings ----------------------------------------------------------

def boson_sup_norm(params: LatticeParams) -> float:
    """||g^A||_inf at xi = 1.  The symbol is positive, so the sup sits at
    x = 0 and equals the momentum sum; evaluated row by row to avoid the
    full grid at large N."""
    if params.M <= 0:
        raise ParameterError("sup-norm scan needs M > 0")
    n, a = params.n_side, params.a
    q = 4.0 * np.sin(np.pi * np.arange(n) / n) ** 2 / a ** 2  # |sigma|^2 per axis
    tot = 0.0
    for q0 in q:
        tot += float(np.sum(1.0 / (q0 + q + params.M ** 2)))
    return tot / params.L ** 2


def boson_l1_norm(params: LatticeParams, kappa: float = 0.0) -> float:
    """Weighted 1-norm of g^A_00 on the full torus."""
    g = boson_propagator(params)
    return weighted_norm(Kernel2(params, g.grid[..., :1, :1]), 1, kappa)


def norm_scan(N: int = 4, L: float = 8.0, M_values=(1, 2, 4, 8),
              N_values=range(6, 13), L_inf: float = 1.0, kappa: float = 0.0) -> dict:
    """log2 ||g^A||_1 against h*_M at fixed a, and ||g^A||_inf against
    N - h*_M at fixed L and M = 1."""
    n = int(round(L * 2 ** N))
    h, l1 = [], []
    for M in M_values:
        p = LatticeParams(N=N, n_side=n, M=float(M), xi=1.0)
        h.append(p.h_star)
        l1.append(boson_l1_norm(p, kappa))
    slope = float(np.polyfit(h, np.log2(l1), 1)[0])
    x, sup = [], []
    for Nv in N_values:
        p = LatticeParams(N=Nv, n_side=int(round(L_inf * 2 ** Nv)), M=1.0, xi=1.0)
        x.append(Nv - p.h_star)
        sup.append(boson_sup_norm(p))
    x, sup = np.array(x, float), np.array(sup)
    coef = np.polyfit(x, sup, 1)
    fit = np.polyval(coef, x)
    r2 = 1.0 - np.sum((sup - fit) ** 2) / np.sum((sup - sup.mean()) ** 2)
    return {"h_star": h, "l1": l1, "l1_slope": slope,
            "N_minus_h": x.tolist(), "sup": sup.tolist(),
            "sup_slope": float(coef[0]), "sup_r2": float(r2)}
