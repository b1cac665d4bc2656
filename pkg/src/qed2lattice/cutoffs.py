"""Gevrey-2 cutoff, its scale translates and the smoothing kernel used to
compare lattices with different spacings."""
from __future__ import annotations

import math

import numpy as np

from .lattice import LatticeParams, momentum_grid

DEFAULT_GAMMA = math.sqrt(2.0)


def _g(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = np.exp(-1.0 / v[pos])
    return out


def chi(t):
    """1 on [0, 1/2], 0 on [1, inf), smooth monotone transition between.

    Built from the exp(-1/v) bump so that chi(t) + chi(3/2 - t) = 1."""
    t = np.asarray(t, dtype=float)
    u = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    gu, gv = _g(u), _g(1.0 - u)
    out = gv / (gu + gv)
    return out if out.ndim else float(out)


def chi_h(kabs, h):
    return chi(np.asarray(kabs, dtype=float) * 2.0 ** (-h))


def f_h(kabs, h: int, N: int):
    """Single-scale window: chi_h - chi_{h-1} below N, 1 - chi_{N-1} at N."""
    if not 1 <= h <= N:
        raise ValueError(f"scale h={h} outside [1, N={N}]")
    if h == N:
        return 1.0 - chi_h(kabs, N - 1)
    return chi_h(kabs, h) - chi_h(kabs, h - 1)


def window_factor(kabs, window, N: int):
    """Sum of f_h over h in (h1, h2]; ``None`` means the full propagator.

    Telescopes to chi_{h2} - chi_{h1}, with chi_{h2} replaced by 1 when h2 = N.
    """
    if window is None:
        return np.ones_like(np.asarray(kabs, dtype=float))
    h1, h2 = window
    if h2 > N or h1 >= h2:
        raise ValueError(f"bad scale window ({h1}, {h2}] for N={N}")
    top = 1.0 if h2 == N else chi_h(kabs, h2)
    return top - chi_h(kabs, h1)


def gevrey_footprint(n_max: int = 4, n_pts: int = 4001):
    """Max-norm of the first n_max finite-difference derivatives of chi on
    (1/2, 1), together with a log-linear fit D_n ~ C1 * C2**n * (n!)**2."""
    t = np.linspace(0.5, 1.0, n_pts)
    h = t[1] - t[0]
    y = chi(t)
    D = []
    for n in range(1, n_max + 1):
        y = np.diff(y) / h
        D.append(float(np.max(np.abs(y))))
    n = np.arange(1, n_max + 1)
    lhs = np.log(np.array(D) / np.array([math.factorial(k) ** 2 for k in n]))
    slope, icpt = np.polyfit(n, lhs, 1)
    C2 = math.exp(slope)
    C1 = math.exp(icpt + np.max(lhs - (icpt + slope * n)))
    return {"derivatives": D, "C1": C1, "C2": C2}


# -- smoothing kernel ---------------------------------------------------------

def mollifier_hat(kabs, N: int, gamma: float = DEFAULT_GAMMA):
    return chi(np.asarray(kabs, dtype=float) * gamma ** (-N) / 2.0)


def mollifier(x, L: float, N: int, gamma: float = DEFAULT_GAMMA):
    """d_N(x) = (1/L^2) sum_{k in (2pi/L)Z^2} e^{-ik.x} chi(gamma^-N |k| / 2).

    ``x`` is a physical position (array of shape (..., 2)); the momentum sum
    is truncated where chi vanishes, |k| >= 2 gamma^N."""
    if not 1.0 < gamma <= 2.0:
        raise ValueError("gamma must lie in (1, 2]")
    kmax = 2.0 * gamma ** N
    jmax = int(math.ceil(kmax * L / (2.0 * math.pi)))
    j = np.arange(-jmax, jmax + 1)
    k0, k1 = np.meshgrid(2 * np.pi * j / L, 2 * np.pi * j / L, indexing="ij")
    w = mollifier_hat(np.hypot(k0, k1), N, gamma)
    keep = w > 0
    k0, k1, w = k0[keep], k1[keep], w[keep]
    x = np.asarray(x, dtype=float)
    ph = np.exp(-1j * (np.multiply.outer(x[..., 0], k0) + np.multiply.outer(x[..., 1], k1)))
    return (ph @ w).real / L ** 2


def mollifier_grid(params: LatticeParams, N_smear: int, gamma: float = DEFAULT_GAMMA):
    """d_{N_smear} sampled on every lattice site."""
    n = params.n_side
    i = np.arange(n) * params.a
    X0, X1 = np.meshgrid(i, i, indexing="ij")
    return mollifier(np.stack([X0, X1], axis=-1), params.L, N_smear, gamma)


def smear(f: np.ndarray, params: LatticeParams, N_smear: int,
          gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Lattice convolution a^2 sum_y d(x - y) f(y) (periodic)."""
    d = mollifier_grid(params, N_smear, gamma)
    conv = np.fft.ifft2(np.fft.fft2(d) * np.fft.fft2(f))
    return conv * params.a ** 2


def momentum_abs(params: LatticeParams) -> np.ndarray:
    k0, k1 = momentum_grid(params)
    return np.hypot(k0, k1)
