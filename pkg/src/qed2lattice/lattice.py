"""Torus geometry, Brillouin zone and the elementary lattice symbols.

Sites are integer pairs modulo ``n_side``; the physical position of site
``i`` is ``a * i`` with ``a = 2**-N``.  Momenta are stored on the same integer
grid: index ``i`` maps to ``j = i`` for ``i <= n_side/2`` and to ``j = i - n_side``
otherwise, so ``k = 2*pi*j/L`` lies in the half-open zone ``(-pi/a, pi/a]``.
With this layout ``numpy.fft`` conventions line up with the lattice Fourier
transform used throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace
from typing import NamedTuple

import numpy as np


class ParameterError(ValueError):
    pass


def floor_log2(x: float) -> int:
    """Exact floor(log2 x) read off the binary exponent."""
    if not x > 0:
        raise ParameterError(f"floor_log2 needs a positive argument, got {x}")
    mant, exp = math.frexp(x)  # x = mant * 2**exp, 0.5 <= mant < 1
    return exp - 1


@dataclass(frozen=True)
class LatticeParams:
    N: int
    n_side: int
    M: float = 1.0
    m_N: float = 0.1
    r: float = 1.0
    lam: float = 0.0
    xi: float = 1.0
    Z5: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be an integer >= 1, got {self.N}")
        if int(self.n_side) != self.n_side or self.n_side < 2 or self.n_side % 2:
            raise ParameterError(f"n_side must be an even integer >= 2, got {self.n_side}")
        if self.M < 0:
            raise ParameterError("boson mass M must be non-negative")
        if self.r < 0:
            raise ParameterError("Wilson parameter r must be non-negative")
        if self.lam < 0:
            raise ParameterError("coupling lambda must be non-negative")
        if not 0.0 <= self.xi <= 1.0:
            raise ParameterError("xi must lie in [0, 1]")

    @property
    def a(self) -> float:
        return 2.0 ** (-self.N)

    @property
    def L(self) -> float:
        return self.n_side * self.a

    @property
    def e(self) -> float:
        return math.sqrt(self.lam)

    @property
    def h_star(self) -> int:
        return floor_log2(self.M)

    @property
    def volume(self) -> int:
        return self.n_side * self.n_side

    def replace(self, **kw) -> "LatticeParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


class Site(NamedTuple):
    x0: int
    x1: int


class BosonLabel(NamedTuple):
    site: tuple
    mu: int
    eps: int

    def conj(self) -> "BosonLabel":
        return BosonLabel(self.site, self.mu, -self.eps)


class FermionLabel(NamedTuple):
    site: tuple
    s: int  # spin index 0 or 1


def rescale(params: LatticeParams) -> LatticeParams:
    """Map to the equivalent theory with M in [1, 2): masses and charge scale
    by 2**-h*, the lattice keeps its sites and N drops by h*."""
    h = params.h_star
    N_new = params.N - h
    if N_new < 1:
        raise ParameterError(f"rescaling leaves N - h* = {N_new} < 1")
    f = 2.0 ** (-h)
    return params.replace(N=N_new, M=params.M * f, m_N=params.m_N * f,
                          lam=params.lam * f * f)


# -- zone bookkeeping -------------------------------------------------------

def zone_integers(n_side: int) -> np.ndarray:
    i = np.arange(n_side)
    return np.where(i <= n_side // 2, i, i - n_side)


def index_to_momentum(idx, params: LatticeParams) -> np.ndarray:
    idx = np.asarray(idx)
    n = params.n_side
    j = np.where(idx % n <= n // 2, idx % n, idx % n - n)
    return 2.0 * np.pi * j / params.L


def momentum_to_index(k, params: LatticeParams) -> np.ndarray:
    j = np.rint(np.asarray(k, dtype=float) * params.L / (2.0 * np.pi)).astype(int)
    return j % params.n_side


def momentum_grid(params: LatticeParams) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (k0, k1) of shape (n, n) in grid-index order."""
    k = 2.0 * np.pi * zone_integers(params.n_side) / params.L
    return np.meshgrid(k, k, indexing="ij")


def in_zone(k, params: LatticeParams) -> bool:
    lim = np.pi / params.a
    k = np.asarray(k, dtype=float)
    tol = 1e-9 * lim
    return bool(np.all((k > -lim + tol) & (k <= lim + tol)))


# -- symbols ----------------------------------------------------------------

def sigma(k, params: LatticeParams):
    """sigma_mu(k) = i 2^N (exp(-i 2^-N k_mu) - 1); returns (s0, s1, |sigma|^2)."""
    k0, k1 = k
    inv_a = 1.0 / params.a
    s0 = 1j * inv_a * (np.exp(-1j * params.a * np.asarray(k0)) - 1.0)
    s1 = 1j * inv_a * (np.exp(-1j * params.a * np.asarray(k1)) - 1.0)
    return s0, s1, np.abs(s0) ** 2 + np.abs(s1) ** 2


def fermi_symbols(k, params: LatticeParams):
    """(s0, s1, M_N): sine symbols and the Wilson mass function."""
    k0, k1 = np.asarray(k[0]), np.asarray(k[1])
    a = params.a
    s0 = np.sin(a * k0) / a
    s1 = np.sin(a * k1) / a
    MN = 2.0 * params.r * (np.sin(0.5 * a * k0) ** 2 + np.sin(0.5 * a * k1) ** 2) / a
    return s0, s1, MN


def torus_distance(x, y, params: LatticeParams):
    """Minimum-image Euclidean distance between sites given as index pairs."""
    n = params.n_side
    d = (np.asarray(x) - np.asarray(y)) % n
    d = np.minimum(d, n - d)
    out = params.a * np.hypot(d[..., 0], d[..., 1])
    return float(out) if np.ndim(out) == 0 else out


def distance_grid(params: LatticeParams) -> np.ndarray:
    """Torus distance from the origin for every site, shape (n, n)."""
    n = params.n_side
    i = np.arange(n)
    d = np.minimum(i, n - i) * params.a
    return np.hypot(d[:, None], d[None, :])


# -- Fourier pair -----------------------------------------------------------
# f(x) = (1/L^2) sum_k e^{-ik.x} F(k)      F(k) = a^2 sum_x e^{ik.x} f(x)

def to_position(F: np.ndarray, params: LatticeParams) -> np.ndarray:
    return np.fft.fft2(F, axes=(0, 1)) / params.L ** 2


def to_momentum(f: np.ndarray, params: LatticeParams) -> np.ndarray:
    return np.fft.ifft2(f, axes=(0, 1)) * (params.a ** 2 * params.volume)


def direct_position_sum(F: np.ndarray, params: LatticeParams, x) -> complex:
    """Slow O(V) evaluation of f(x) at one site; oracle for the FFT path."""
    k0, k1 = momentum_grid(params)
    ph = np.exp(-1j * (k0 * x[0] + k1 * x[1]) * params.a)
    F = np.asarray(F)
    tot = 0.0
    # fixed lexicographic accumulation for bit-reproducibility
    for i in range(params.n_side):
        tot = tot + np.tensordot(ph[i], F[i], axes=(0, 0))
    return tot / params.L ** 2
