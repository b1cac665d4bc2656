"""Ward identity, longitudinal decoupling and the continuum extraction of
the bubble, tadpole and current-correlation coefficients.

Continuum quantities use rescaled momenta q = a k on (-pi, pi]^2 with the
massless integrand.  The quadrature is a midpoint rule with nodes
q = (j - n/2 + 1/2) 2 pi / n, which never hits the integrable q = 0 point;
external momenta Q are multiples of 2 pi / n so q + Q stays on the grid.
Refining n stands in for L -> infinity and Q -> 0 for a -> 0 at fixed p.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .diagrams import b_hat, bubble_hat, bubble_hat_grid, tadpole, vertex_terms
from .lattice import LatticeParams, momentum_grid, sigma
from .propagators import GAMMA, GAMMA5, ID2, dirac_inverse, fermion_momentum

ONE_OVER_8PI = 1.0 / (8.0 * math.pi)
MINUS_ONE_OVER_4PI = -1.0 / (4.0 * math.pi)
ONE_OVER_PI = 1.0 / math.pi
EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])  # eps_{01} = 1


class QuadratureError(ArithmeticError):
    pass


@dataclass
class ExtrapolationReport:
    x: list
    values: list
    limit: float
    exponent: float
    residuals: list
    model: str
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {"x": list(map(float, self.x)), "values": list(map(float, self.values)),
                "limit": float(self.limit), "exponent": float(self.exponent),
                "residuals": list(map(float, self.residuals)), "model": self.model, **self.extra}


def extrapolate(x, y, exponent: float | None = None, use: int = 4) -> ExtrapolationReport:
    """Fit y = y0 + c x^alpha on the ``use`` smallest x.  With ``exponent``
    None the exponent is fitted too (bounded to (0.05, 4))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    xs, ys = x[:use], y[:use]
    if exponent is not None:
        A = np.stack([np.ones_like(xs), xs ** exponent], axis=1)
        cond = float(np.linalg.cond(A))
        if not np.isfinite(cond) or cond > 1e8:
            raise QuadratureError(f"extrapolation ill-conditioned (cond = {cond:.3e})")
        coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
        y0, c, alpha = float(coef[0]), float(coef[1]), float(exponent)
    else:
        if len(xs) < 3:
            raise QuadratureError("free-exponent extrapolation needs at least 3 points")
        span = float(np.ptp(ys)) or 1.0

        def model(t, y0, c, alpha):
            return y0 + c * t ** alpha
        d1 = ys[1] - ys[0]
        guess = 1.5
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OptimizeWarning)
                (y0, c, alpha), cov = curve_fit(model, xs, ys, p0=[ys[0], np.sign(d1 or 1.0) * span, guess],
                                                bounds=([-np.inf, -np.inf, 0.05], [np.inf, np.inf, 4.0]),
                                                maxfev=20000)
        except RuntimeError as exc:
            raise QuadratureError(f"extrapolation did not converge: {exc}") from exc
        cond = float(np.linalg.cond(cov)) if np.all(np.isfinite(cov)) else float("inf")
    res = ys - (y0 + c * xs ** alpha)
    return ExtrapolationReport(list(x), list(y), float(y0), float(alpha), list(res),
                               "y0 + c*x^alpha", {"cond": cond, "c": float(c)})


# -- exact lattice identities -----------------------------------------------------

def ward_identity_check(params: LatticeParams, momenta=None) -> dict:
    """max_p |sum_mu sigma_mu(p) B_{mu nu}(p)| / max_p |B| for the vector
    correlator, and the same contraction of the chiral one (not conserved).
    Without explicit momenta the whole dual lattice is scanned."""
    ghat = fermion_momentum(params)
    if momenta is None:
        k0, k1 = momentum_grid(params)
        s0, s1, _ = sigma((k0, k1), params)
        s = np.stack([s0, s1], axis=-1)
        Bv = b_hat_grid(params, ghat=ghat)
        Bc = b_hat_grid(params, chiral=True, ghat=ghat)
        n_mom = k0.size
    else:
        s = np.array([np.array(sigma(np.array(p), params)[:2]) for p in momenta])
        Bv = np.array([b_hat(p, params, ghat=ghat) for p in momenta])
        Bc = np.array([b_hat(p, params, chiral=True, ghat=ghat) for p in momenta])
        n_mom = len(momenta)
    cv = np.abs(np.einsum("...m,...mn->...n", s, Bv))
    cc = np.abs(np.einsum("...m,...mn->...n", s, Bc))
    scale_v = float(np.abs(Bv).max())
    scale_c = float(np.abs(Bc).max())
    per_nu = cv.reshape(-1, 2).max(axis=0)
    return {"vector_residual": float(cv.max()) / scale_v,
            "vector_residual_per_nu": (per_nu / scale_v).tolist(),
            "chiral_contraction": float(cc.max()) / scale_c, "n_momenta": n_mom}


def b_hat_grid(params: LatticeParams, chiral: bool = False, ghat=None) -> np.ndarray:
    """B-hat at every dual momentum, shape (n, n, 2, 2)."""
    if ghat is None:
        ghat = fermion_momentum(params)
    P = bubble_hat_grid(params, chiral=chiral, ghat=ghat)
    if chiral:
        return -4.0 * P
    T = tadpole(params, ghat=ghat)
    return -2.0 * (T * np.eye(2) + 2.0 * P)


def longitudinal_tensor_dxi(params: LatticeParams) -> np.ndarray:
    """d/dxi of (1-xi) sigma_nu sigma*_mu / ((xi|s|^2 + M^2)(|s|^2 + M^2)), indexed [.., mu, nu]."""
    k0, k1 = momentum_grid(params)
    s0, s1, s2 = sigma((k0, k1), params)
    xi, M2 = params.xi, params.M ** 2
    d1 = xi * s2 + M2
    d2 = s2 + M2
    with np.errstate(divide="ignore", invalid="ignore"):
        scal = -1.0 / (d1 * d2) - (1.0 - xi) * s2 / (d1 ** 2 * d2)
    scal = np.where(np.isfinite(scal), scal, 0.0)
    sig = (s0, s1)
    out = np.empty(k0.shape + (2, 2), dtype=complex)
    for mu in (0, 1):
        for nu in (0, 1):
            out[..., mu, nu] = scal * sig[nu] * np.conj(sig[mu])
    return out


def longitudinal_decoupling(params: LatticeParams, B: np.ndarray | None = None) -> dict:
    """|sum_k dT_{mu nu}(k) B_{mu nu}(-k)| relative to sum |dT||B|."""
    if B is None:
        B = b_hat_grid(params)
    dT = longitudinal_tensor_dxi(params)
    n = params.n_side
    neg = (-np.arange(n)) % n
    Bm = B[np.ix_(neg, neg)]
    val = complex(np.sum(dT * Bm))
    ref = float(np.sum(np.abs(dT) * np.abs(Bm)))
    return {"residual": abs(val) / ref if ref else 0.0, "raw": abs(val), "scale": ref}


# -- continuum integrals ------------------------------------------------------------

def midpoint_grid(n: int):
    q = (np.arange(n) - n // 2 + 0.5) * 2 * np.pi / n
    return np.meshgrid(q, q, indexing="ij")


@lru_cache(maxsize=8)
def _ghat_rescaled(n: int, m: float, r: float):
    q0, q1 = midpoint_grid(n)
    s0, s1 = np.sin(q0), np.sin(q1)
    W = m + 2 * r * (np.sin(q0 / 2) ** 2 + np.sin(q1 / 2) ** 2)
    return dirac_inverse(s0, s1, W)


def _unit_params(r: float = 1.0) -> LatticeParams:
    # vertex matrices only depend on r and Z5; a = 1 in rescaled units
    return LatticeParams(N=1, n_side=2, r=r, m_N=0.0, Z5=1.0)


def continuum_bubble(Q, n: int, m: float = 0.0, r: float = 1.0, chiral: bool = False) -> np.ndarray:
    """Rescaled-momentum bubble at external Q (multiple of 2 pi / n)."""
    return _continuum_bubble(tuple(float(x) for x in Q), int(n), float(m), float(r), bool(chiral)).copy()


@lru_cache(maxsize=256)
def _continuum_bubble(Q, n, m, r, chiral):
    steps = [Qi * n / (2 * np.pi) for Qi in Q]
    if any(abs(s - round(s)) > 1e-9 for s in steps):
        raise QuadratureError("external momentum must be a multiple of 2 pi / n")
    q0, q1 = midpoint_grid(n)
    A = _ghat_rescaled(n, float(m), float(r))
    B = np.roll(A, (-int(round(steps[0])), -int(round(steps[1]))), axis=(0, 1))
    prm = _unit_params(r)
    qq = (q0, q1)
    T = np.zeros((2, 2), dtype=complex)
    for mu in (0, 1):
        for nu in (0, 1):
            tot = 0j
            for w1, C1, u1, v1 in vertex_terms(mu, prm):
                for w2, C2, u2, v2 in vertex_terms(nu, prm, chiral=chiral):
                    d1, d2 = v1 - u2, v2 - u1
                    ph = np.exp(-1j * (qq[0] * d1[0] + qq[1] * d1[1]
                                       + (qq[0] + Q[0]) * d2[0] + (qq[1] + Q[1]) * d2[1]))
                    tr = np.einsum("...ab,...ba->...", C1 @ A, C2 @ B)
                    tot += w1 * w2 * np.sum(ph * tr)
            T[mu, nu] = 0.25 * tot / n ** 2
    return T


def singular_tensor(Q) -> np.ndarray:
    """(1/(8 pi |Q|^2)) (2 Q_mu Q_nu - |Q|^2 delta)."""
    Q = np.asarray(Q, dtype=float)
    q2 = Q @ Q
    return (2 * np.outer(Q, Q) - q2 * np.eye(2)) / (8 * np.pi * q2)


def tadpole_continuum(n: int, r: float = 1.0, m: float = 0.0) -> complex:
    """-int d^2q/(2 pi)^2 e^{-i q0} (i s0 - r W)/(s^2 + W^2), midpoint rule."""
    q0, q1 = midpoint_grid(n)
    s0, s1 = np.sin(q0), np.sin(q1)
    W = m + 2 * r * (np.sin(q0 / 2) ** 2 + np.sin(q1 / 2) ** 2)
    return complex(-np.mean(np.exp(-1j * q0) * (1j * s0 - r * W) / (s0 ** 2 + s1 ** 2 + W ** 2)))


def tadpole_lattice_sequence(N_values, L: float = 1.0, m_N: float = 0.0, r: float = 1.0):
    """Lattice tadpole with window (0, N] at fixed physical L."""
    out = []
    for N in N_values:
        prm = LatticeParams(N=N, n_side=int(round(L * 2 ** N)), m_N=m_N, r=r)
        out.append((N, tadpole(prm, window=(0, N))))
    return out


def m_sequence_limit(fun, m_values, degree: int = 2) -> dict:
    """Evaluate fun(m) on a decreasing mass sequence and extrapolate to m = 0
    with a polynomial fit (Richardson-style)."""
    ms = np.asarray(m_values, dtype=float)
    vals = np.array([fun(m) for m in ms])
    flat = vals.reshape(len(ms), -1)
    coef = np.polyfit(ms, flat.real, min(degree, len(ms) - 1))
    lim = coef[-1]
    if np.iscomplexobj(flat):
        lim = lim + 1j * np.polyfit(ms, flat.imag, min(degree, len(ms) - 1))[-1]
    return {"m": ms.tolist(), "values": vals, "limit": np.asarray(lim).reshape(vals.shape[1:])}


# -- continuum extraction ---------------------------------------------------------------

AXIS = (1, 0)
DIAG = (1, 1)
TRIPLE_DIRS = ((5, 0), (4, 3), (3, 4), (0, 5))


def _scaled(direction, j, n):
    h = 2 * np.pi / n
    return (direction[0] * j * h, direction[1] * j * h)


def bubble_series(n: int, steps=(1, 2, 3, 4), directions=(AXIS, DIAG), r: float = 1.0,
                  chiral: bool = False) -> list:
    rows = []
    for d in directions:
        for j in steps:
            Q = _scaled(d, j, n)
            T = continuum_bubble(Q, n, r=r, chiral=chiral)
            rows.append({"direction": d, "step": j, "Q": Q, "absQ": float(np.hypot(*Q)), "tensor": T})
    return rows


def _fit_singular(rows) -> tuple[float, float, np.ndarray]:
    """Least squares Pi = c S(Qhat) + rho delta over the rows (same |Q|)."""
    A, y = [], []
    for row in rows:
        Qh = np.asarray(row["Q"]) / row["absQ"]
        S = 2 * np.outer(Qh, Qh) - np.eye(2)
        for mu in (0, 1):
            for nu in (0, 1):
                A.append([S[mu, nu], float(mu == nu)])
                y.append(row["tensor"][mu, nu].real)
    coef, res, *_ = np.linalg.lstsq(np.array(A), np.array(y), rcond=None)
    return float(coef[0]), float(coef[1]), np.array(y) - np.array(A) @ coef


def extract_singular_coefficient(n: int = 512, steps=(1, 2, 3, 4)) -> dict:
    """1/(8 pi) from equal-|Q| directions (5,0),(4,3),(3,4),(0,5): the
    fitted singular coefficient and isotropic remainder per |Q|, then
    extrapolated to Q -> 0."""
    cs, rhos, qs, raw = [], [], [], []
    for j in steps:
        rows = [{"Q": _scaled(d, j, n), "absQ": 5 * j * 2 * np.pi / n,
                 "tensor": continuum_bubble(_scaled(d, j, n), n)} for d in TRIPLE_DIRS]
        c, rho, res = _fit_singular(rows)
        cs.append(c)
        rhos.append(rho)
        qs.append(rows[0]["absQ"])
        raw.append({"absQ": qs[-1], "c": c, "rho": rho, "fit_residual": float(np.abs(res).max())})
    c_rep = extrapolate(qs, cs)
    rho_rep = extrapolate(qs, rhos)
    return {"c": c_rep, "rho": rho_rep, "raw": raw}


def isotropy_check(n: int = 512, steps=(1, 2, 3, 4)) -> dict:
    """Singular coefficient from the traceless part along the axis,
    (Pi00 - Pi11)/2, and along the diagonal, Pi01."""
    ax, dg, qa, qd = [], [], [], []
    for j in steps:
        Ta = continuum_bubble(_scaled(AXIS, j, n), n)
        Td = continuum_bubble(_scaled(DIAG, j, n), n)
        ax.append(0.5 * (Ta[0, 0] - Ta[1, 1]).real)
        dg.append(Td[0, 1].real)
        qa.append(j * 2 * np.pi / n)
        qd.append(math.sqrt(2) * j * 2 * np.pi / n)
    ra, rd = extrapolate(qa, ax), extrapolate(qd, dg)
    return {"axis": ra, "diagonal": rd, "relative_gap": abs(ra.limit - rd.limit) / abs(rd.limit)}


def holder_footprint(n: int = 1024, steps=(1, 2, 4, 8, 16, 32)) -> dict:
    """log-log slope of |rho(Q) - rho(0)| over a decade of |Q|, where
    rho = tr(Pi)/2 is the remainder left after the traceless singular part
    (taken along the diagonal; along an axis Pi_00 is pinned by the Ward
    identity and carries no information)."""
    qs, rs = [], []
    for j in steps:
        Q = _scaled(DIAG, j, n)
        T = continuum_bubble(Q, n).real
        qs.append(float(np.hypot(*Q)))
        rs.append(0.5 * (T[0, 0] + T[1, 1]))
    r0 = extrapolate(qs, rs, use=4).limit
    d = np.abs(np.array(rs) - r0)
    q = np.array(qs)
    sel = d > 0
    slope = float(np.polyfit(np.log(q[sel]), np.log(d[sel]), 1)[0])
    return {"absQ": qs, "rho": rs, "rho_0": r0, "slope": slope}


def anomaly_relation_check(n: int = 512, steps=(1, 2, 3, 4), r: float = 1.0) -> dict:
    """2 R(0) + T delta against -(1/4 pi) delta."""
    sing = extract_singular_coefficient(n, steps)
    rho0 = sing["rho"].limit
    T = tadpole_continuum(n, r=r)
    # off-diagonal remainder from the (4,3) direction after removing the singular part
    off = []
    qs = []
    for j in steps:
        Q = _scaled((4, 3), j, n)
        R = continuum_bubble(Q, n).real - sing["c"].limit * (
            2 * np.outer(np.array(Q), np.array(Q)) / (np.array(Q) @ np.array(Q)) - np.eye(2))
        off.append(R[0, 1])
        qs.append(float(np.hypot(*Q)))
    off0 = extrapolate(qs, off).limit
    value = 2 * rho0 + T.real
    return {"two_R_plus_T": value, "target": MINUS_ONE_OVER_4PI,
            "residual": abs(value - MINUS_ONE_OVER_4PI),
            "offdiag": abs(2 * off0), "R00_0": rho0, "tadpole": T,
            "singular": sing}


def current_limit_check(n: int = 512, steps=(1, 2, 3, 4)) -> dict:
    """Vector and chiral correlators against their closed continuum tensors."""
    T = tadpole_continuum(n).real
    tr, lo, ch, chs, qs = [], [], [], [], []
    for j in steps:
        fits_t, fits_l, fits_c, fits_cs = [], [], [], []
        for d in TRIPLE_DIRS:
            Q = np.array(_scaled(d, j, n))
            Qh = Q / np.hypot(*Q)
            P = continuum_bubble(tuple(Q), n)
            B = -2.0 * (np.eye(2) * T + 2.0 * P)
            Pt = np.eye(2) - np.outer(Qh, Qh)
            Pl = np.outer(Qh, Qh)
            fits_t.append((np.sum(B.real * Pt) / np.sum(Pt * Pt)))
            fits_l.append((np.sum(B.real * Pl) / np.sum(Pl * Pl)))
            B5 = -4.0 * continuum_bubble(tuple(Q), n, chiral=True)
            E = np.array([[1j * (EPS2[nu, mu] - sum(EPS2[nu, al] * Qh[mu] * Qh[al] for al in (0, 1)))
                           for nu in (0, 1)] for mu in (0, 1)])
            fits_c.append((np.vdot(E, B5) / np.vdot(E, E)).real)
            # chiral contraction sum_nu Q_nu B5_{mu nu} against (i/pi) sum_nu eps_{nu mu} Q_nu
            lhs = B5 @ Qh
            rhs = 1j * EPS2.T @ Qh
            fits_cs.append((np.vdot(rhs, lhs) / np.vdot(rhs, rhs)).real)
        qs.append(5 * j * 2 * np.pi / n)
        tr.append(np.mean(fits_t))
        lo.append(np.mean(fits_l))
        ch.append(np.mean(fits_c))
        chs.append(np.mean(fits_cs))
    return {"transverse": extrapolate(qs, tr), "longitudinal": extrapolate(qs, lo),
            "chiral": extrapolate(qs, ch), "chiral_contraction": extrapolate(qs, chs)}


def anomaly_scan(n: int = 512, steps=(1, 2, 3, 4)) -> dict:
    """Everything the anomaly-scan report needs, with raw series."""
    rel = anomaly_relation_check(n, steps)
    cur = current_limit_check(n, steps)
    iso = isotropy_check(n, steps)
    c = rel["singular"]["c"].limit
    return {
        "coefficients": {"one_over_8pi": c, "minus_one_over_4pi": rel["two_R_plus_T"],
                         "one_over_pi": cur["transverse"].limit,
                         "chiral_one_over_pi": cur["chiral"].limit},
        "targets": {"one_over_8pi": ONE_OVER_8PI, "minus_one_over_4pi": MINUS_ONE_OVER_4PI,
                    "one_over_pi": ONE_OVER_PI, "chiral_one_over_pi": ONE_OVER_PI},
        "residuals": {"one_over_8pi": abs(c - ONE_OVER_8PI) / ONE_OVER_8PI,
                      "minus_one_over_4pi": rel["residual"] / abs(MINUS_ONE_OVER_4PI),
                      "one_over_pi": abs(cur["transverse"].limit - ONE_OVER_PI) / ONE_OVER_PI,
                      "chiral_one_over_pi": abs(cur["chiral"].limit - ONE_OVER_PI) / ONE_OVER_PI,
                      "longitudinal": abs(cur["longitudinal"].limit) / ONE_OVER_PI,
                      "isotropy": iso["relative_gap"],
                      "offdiag_R": rel["offdiag"] / abs(MINUS_ONE_OVER_4PI)},
        "raw_series": {"singular": rel["singular"]["c"].as_dict(),
                       "isotropic_remainder": rel["singular"]["rho"].as_dict(),
                       "transverse": cur["transverse"].as_dict(),
                       "longitudinal": cur["longitudinal"].as_dict(),
                       "chiral": cur["chiral"].as_dict(),
                       "chiral_contraction": cur["chiral_contraction"].as_dict(),
                       "isotropy_axis": iso["axis"].as_dict(),
                       "isotropy_diagonal": iso["diagonal"].as_dict(),
                       "tadpole": float(rel["tadpole"].real)},
        "quadrature_n": n,
    }
