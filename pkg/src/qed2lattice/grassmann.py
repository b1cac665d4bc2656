"""Finite Grassmann algebra on an explicit generator universe.

Elements are sparse maps from generator bitmasks to complex coefficients; a
mask stands for the product of its generators taken in universe order.
Generators are keyed ``(charge, label)`` with ``charge`` +1 for psi^+ and -1
for psi^-.  The default universe lists every psi^+ before every psi^-, each
block sorted by label.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sympy.utilities.iterables import multiset_partitions

from .lattice import LatticeParams, ParameterError
from .propagators import GAMMA, GAMMA0, GAMMA1, GAMMA5, FermionPropagator

MAX_GENERATORS = 24
PLUS, MINUS = 1, -1


class UniverseError(ValueError):
    pass


@dataclass(frozen=True)
class Universe:
    keys: tuple

    def __post_init__(self):
        if len(self.keys) > MAX_GENERATORS:
            raise UniverseError(f"{len(self.keys)} generators exceeds the cap of {MAX_GENERATORS}")
        if len(set(self.keys)) != len(self.keys):
            raise UniverseError("duplicate generator keys")

    @cached_property
    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys)}

    @cached_property
    def charges(self) -> np.ndarray:
        return np.array([k[0] for k in self.keys])

    def __len__(self):
        return len(self.keys)

    def bit(self, key) -> int:
        try:
            return 1 << self.index[key]
        except KeyError:
            raise UniverseError(f"generator {key!r} not in universe") from None


def fermion_universe(labels) -> Universe:
    labels = sorted(set(labels))
    return Universe(tuple((PLUS, l) for l in labels) + tuple((MINUS, l) for l in labels))


def lattice_labels(n_side: int, sites=None):
    if sites is None:
        sites = [(i, j) for i in range(n_side) for j in range(n_side)]
    return [(tuple(x), s) for x in sites for s in (0, 1)]


def _bits(mask: int):
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def _merge_sign(m1: int, m2: int) -> int:
    """Sign of (ordered m1)(ordered m2) -> ordered (m1|m2)."""
    swaps = 0
    for j in _bits(m2):
        swaps += bin(m1 >> (j + 1)).count("1")
    return -1 if swaps & 1 else 1


def _perm_sign(seq) -> int:
    seq = list(seq)
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv & 1 else 1


class GrassmannElement:
    __slots__ = ("universe", "terms")

    def __init__(self, universe: Universe, terms=None, tol: float = 0.0):
        self.universe = universe
        self.terms = {m: complex(c) for m, c in (terms or {}).items() if abs(c) > tol}

    # construction
    @classmethod
    def scalar(cls, universe, c=1.0):
        return cls(universe, {0: c})

    @classmethod
    def generator(cls, universe, key, c=1.0):
        return cls(universe, {universe.bit(key): c})

    @classmethod
    def monomial(cls, universe, keys, c=1.0):
        out = cls.scalar(universe, c)
        for k in keys:
            out = out * cls.generator(universe, k)
        return out

    # algebra
    def _check(self, other):
        if not isinstance(other, GrassmannElement):
            return GrassmannElement.scalar(self.universe, other)
        if other.universe != self.universe:
            raise UniverseError("elements live on different universes")
        return other

    def __add__(self, other):
        other = self._check(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0) + c
        return GrassmannElement(self.universe, t)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.universe, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        if not isinstance(other, GrassmannElement):
            return GrassmannElement(self.universe, {m: c * other for m, c in self.terms.items()})
        return product(self, other)

    def __rmul__(self, other):
        return GrassmannElement(self.universe, {m: other * c for m, c in self.terms.items()})

    def __repr__(self):
        return f"GrassmannElement({len(self.terms)} terms on {len(self.universe)} generators)"

    # structure
    def coefficient(self, keys) -> complex:
        """Coefficient of the product of ``keys`` in the given order."""
        idx = [self.universe.index[k] for k in keys]
        if len(set(idx)) != len(idx):
            return 0j
        mask = sum(1 << i for i in idx)
        return _perm_sign(idx) * self.terms.get(mask, 0j)

    def parity(self):
        """0 or 1 for homogeneous elements, None for mixed ones."""
        ps = {bin(m).count("1") & 1 for m in self.terms}
        if len(ps) > 1:
            return None
        return ps.pop() if ps else 0

    def substitute_phases(self, phase) -> "GrassmannElement":
        """Apply psi_g -> phase(key) psi_g generator by generator."""
        ph = [phase(k) for k in self.universe.keys]
        out = {}
        for m, c in self.terms.items():
            f = 1.0 + 0j
            for i in _bits(m):
                f *= ph[i]
            out[m] = c * f
        return GrassmannElement(self.universe, out)

    def max_abs_diff(self, other) -> float:
        d = self - other
        return max((abs(c) for c in d.terms.values()), default=0.0)


def product(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    if a.universe != b.universe:
        raise UniverseError("elements live on different universes")
    out: dict = {}
    for m1, c1 in a.terms.items():
        for m2, c2 in b.terms.items():
            if m1 & m2:
                continue
            m = m1 | m2
            out[m] = out.get(m, 0) + _merge_sign(m1, m2) * c1 * c2
    return GrassmannElement(a.universe, out)


def exp_even(x: GrassmannElement) -> GrassmannElement:
    """exp of an element whose terms are all even; the series terminates."""
    if x.parity() not in (0, None) or any(bin(m).count("1") & 1 for m in x.terms):
        raise ValueError("exp_even needs an even element")
    out = GrassmannElement.scalar(x.universe, 1.0)
    term = GrassmannElement.scalar(x.universe, 1.0)
    for k in range(1, len(x.universe) // 2 + 2):
        term = term * x * (1.0 / k)
        if not term.terms:
            break
        out = out + term
    return out


def berezin(x: GrassmannElement) -> complex:
    """Top-monomial coefficient; the product of all generators in universe
    order integrates to one."""
    return x.terms.get((1 << len(x.universe)) - 1, 0j)


# -- Gaussian expectations ----------------------------------------------------

@dataclass(frozen=True)
class FermionCovariance:
    """E(psi^-_a psi^+_b) = matrix[index[a], index[b]] over ``labels``."""
    labels: tuple
    matrix: np.ndarray

    @cached_property
    def index(self):
        return {l: i for i, l in enumerate(self.labels)}

    @classmethod
    def from_propagator(cls, prop: FermionPropagator, labels):
        labels = tuple(sorted(set(labels)))
        G = np.empty((len(labels), len(labels)), dtype=complex)
        for i, (x, s) in enumerate(labels):
            for j, (y, t) in enumerate(labels):
                G[i, j] = prop.entry((x, s), (y, t))
        return cls(labels, G)


def _monomial_expectation(universe: Universe, mask: int, cov: FermionCovariance) -> complex:
    idx = list(_bits(mask))
    plus = [i for i in idx if universe.keys[i][0] == PLUS]
    minus = [i for i in idx if universe.keys[i][0] == MINUS]
    if len(plus) != len(minus):
        return 0j  # unbalanced charge
    if not idx:
        return 1.0 + 0j
    # reorder to psi^-_{i1} psi^+_{j1} psi^-_{i2} psi^+_{j2} ...
    target = [v for pair in zip(minus, plus) for v in pair]
    sign = _perm_sign(target)
    ci = [cov.index[universe.keys[i][1]] for i in minus]
    cj = [cov.index[universe.keys[j][1]] for j in plus]
    return sign * complex(np.linalg.det(cov.matrix[np.ix_(ci, cj)]))


def gaussian_expectation(x: GrassmannElement, cov: FermionCovariance) -> complex:
    return sum((c * _monomial_expectation(x.universe, m, cov) for m, c in x.terms.items()), 0j)


def berezin_expectation(x: GrassmannElement, cov: FermionCovariance) -> complex:
    """Brute-force oracle: integrate against exp(-(psi^+, g^-1 psi^-))."""
    K = np.linalg.inv(cov.matrix)
    U = x.universe
    S = GrassmannElement(U)
    for a, la in enumerate(cov.labels):
        for b, lb in enumerate(cov.labels):
            if K[a, b] != 0:
                S = S + GrassmannElement.monomial(U, [(PLUS, la), (MINUS, lb)], K[a, b])
    w = exp_even(-S)
    return berezin(w * x) / berezin(w)


def _partitions(items):
    """Set partitions, blocks ordered by first element."""
    for p in multiset_partitions(list(items)):
        yield sorted((sorted(b) for b in p), key=lambda b: b[0])


def _reorder_sign(parities, order) -> int:
    odd = [i for i in order if parities[i]]
    return _perm_sign(odd)


def truncated_expectation(xs, cov: FermionCovariance) -> complex:
    """Recursive truncated expectation with the partition sum and ordering
    sign; the one-block partition is the simple expectation itself."""
    xs = list(xs)
    s = len(xs)
    if s == 0:
        raise ValueError("truncated expectation needs at least one argument")
    par = []
    for x in xs:
        p = x.parity()
        if p is None:
            raise ValueError("truncated expectation needs homogeneous arguments")
        par.append(p)
    memo: dict = {}

    def simple(block):
        prod = GrassmannElement.scalar(xs[0].universe, 1.0)
        for i in block:
            prod = prod * xs[i]
        return gaussian_expectation(prod, cov)

    def et(block):
        key = tuple(block)
        if key in memo:
            return memo[key]
        val = simple(block)
        if len(block) > 1:
            for part in _partitions(block):
                if len(part) == 1:
                    continue
                order = [i for b in part for i in b]
                term = _reorder_sign(par, order)
                for b in part:
                    term *= et(b)
                    if term == 0:
                        break
                val -= term
        memo[key] = val
        return val

    return et(list(range(s)))


def truncated_expectation_logseries(xs, cov: FermionCovariance) -> complex:
    """Oracle for even arguments: the t_1...t_s coefficient of
    log E prod(1 + t_i X_i), computed in the square-free polynomial ring."""
    xs = list(xs)
    s = len(xs)
    if any(x.parity() != 0 for x in xs):
        raise ValueError("log-series oracle needs even arguments")
    full = (1 << s) - 1
    f = np.zeros(full + 1, dtype=complex)
    for S in range(full + 1):
        prod = GrassmannElement.scalar(xs[0].universe, 1.0)
        for i in range(s):
            if S >> i & 1:
                prod = prod * xs[i]
        f[S] = gaussian_expectation(prod, cov)
    u = f.copy()
    u[0] = 0.0  # f - 1

    def mul(p, q):
        r = np.zeros_like(p)
        for A in range(full + 1):
            if p[A] == 0:
                continue
            rest = full ^ A
            B = rest
            while True:
                r[A | B] += p[A] * q[B]
                if B == 0:
                    break
                B = (B - 1) & rest
        return r

    log = np.zeros_like(u)
    power = u.copy()
    for k in range(1, s + 1):
        log += ((-1) ** (k + 1) / k) * power
        power = mul(power, u)
    return complex(log[full])


# -- lattice action -----------------------------------------------------------

def _bilinear(U: Universe, plus_label, C, minus_label, coeff=1.0):
    out = GrassmannElement(U)
    for s in (0, 1):
        for t in (0, 1):
            c = coeff * C[s, t]
            if c != 0:
                out = out + GrassmannElement.monomial(
                    U, [(PLUS, (plus_label, s)), (MINUS, (minus_label, t))], c)
    return out


def _shift(x, mu, n):
    y = list(x)
    y[mu] = (y[mu] + 1) % n
    return tuple(y)


def action_element(A, params: LatticeParams, universe: Universe | None = None,
                   measure: bool = True) -> GrassmannElement:
    """I(A, psi) on the full lattice.  ``measure`` includes the a^2 of the
    lattice integral; without it coefficients are per site."""
    n = params.n_side
    A = np.asarray(A, dtype=float)
    if A.shape != (n, n, 2):
        raise ParameterError(f"A must have shape ({n}, {n}, 2)")
    U = universe or fermion_universe(lattice_labels(n))
    needed = {(PLUS, l) for l in lattice_labels(n)} | {(MINUS, l) for l in lattice_labels(n)}
    if not needed <= set(U.keys):
        raise UniverseError("universe does not host every lattice fermion label")
    a, r, e = params.a, params.r, params.e
    hop = 0.5 / a
    I2 = np.eye(2)
    out = GrassmannElement(U)
    for x in itertools.product(range(n), repeat=2):
        for mu in (0, 1):
            y = _shift(x, mu, n)
            ph = np.exp(1j * a * e * A[x + (mu,)])
            out = out + _bilinear(U, x, GAMMA[mu] - r * I2, y, hop * ph)
            out = out + _bilinear(U, y, GAMMA[mu] + r * I2, x, -hop / ph)
        out = out + _bilinear(U, x, I2, x, params.m_N + 2 * r / a)
    if measure:
        out = out * (a * a)
    return out


def lattice_gradient(alpha, params: LatticeParams) -> np.ndarray:
    al = np.asarray(alpha, dtype=float)
    return np.stack([(np.roll(al, -1, axis=mu) - al) / params.a for mu in (0, 1)], axis=-1)


def gauge_invariance_check(A, alpha, params: LatticeParams) -> float:
    """max |I(A + grad alpha, e^{+-ie alpha} psi) - I(A, psi)| over coefficients."""
    al = np.asarray(alpha, dtype=float)
    e = params.e
    shifted = action_element(np.asarray(A) + lattice_gradient(al, params), params)
    rotated = shifted.substitute_phases(
        lambda k: np.exp(1j * k[0] * e * al[k[1][0]]))
    return rotated.max_abs_diff(action_element(A, params))


def vertex_element(b, params: LatticeParams, U: Universe, chiral: bool = False) -> GrassmannElement:
    """O_b (or O_{5;b}) as a Grassmann element; b = (site, mu, eps)."""
    from .diagrams import bare_vertex
    x, mu, eps = b
    u, v, C = bare_vertex(mu, eps, params, chiral=chiral)
    n = params.n_side
    xp = tuple((x[i] + u[i]) % n for i in (0, 1))
    xm = tuple((x[i] + v[i]) % n for i in (0, 1))
    return _bilinear(U, xp, C, xm)


def interaction_from_vertices(A, params: LatticeParams, U: Universe) -> GrassmannElement:
    """int db O_b G_b(A), with G_{x,mu,eps}(A) = (e^{i eps a e A} - 1)/a."""
    n, a, e = params.n_side, params.a, params.e
    out = GrassmannElement(U)
    for x in itertools.product(range(n), repeat=2):
        for mu in (0, 1):
            for eps in (1, -1):
                G = (np.exp(1j * eps * a * e * A[x + (mu,)]) - 1.0) / a
                out = out + vertex_element((x, mu, eps), params, U) * (a * a * G)
    return out


# -- symmetries of the free covariance -----------------------------------------

F_MATRIX = (GAMMA0 - GAMMA1) @ GAMMA5 / np.sqrt(2.0)


def symmetry_suite(params: LatticeParams, alpha: float = 0.7) -> dict:
    """Deviation of each transformed free covariance from the original.

    With E(psi^-_x psi^+_y) = g(x - y), a linear substitution
    psi^- -> S psi^-_{Tx}, psi^+ -> psi^+_{Tx} R leaves the measure invariant
    iff S g(Tx - Ty) R = g(x - y) for every pair; charge conjugation swaps
    the roles of the two fields and transposes."""
    from .propagators import fermion_propagator
    g = fermion_propagator(params).grid  # g[dx0, dx1]
    n = params.n_side
    idx = np.arange(n)

    def at(d0, d1):
        return g[np.ix_(d0 % n, d1 % n)]

    base = g
    out = {}
    # global U(1): psi^- -> e^{-i a} psi^-, psi^+ -> e^{i a} psi^+
    out["U1"] = float(np.max(np.abs(np.exp(-1j * alpha) * base * np.exp(1j * alpha) - base)))
    # charge conjugation: psi^+_s -> sum psi^-_{s'} (g1)_{s s'}, psi^-_s -> (g1)_{s s'} psi^+_{s'}
    # E(Qpsi^-_x Qpsi^+_y)_{st} = sum g1_{s s'} E(psi^+_{x s'} psi^-_{y t'}) g1_{t t'}
    #                          = -(g1 g(y - x)^T g1^T)_{st}
    gneg = at(-idx, -idx)
    qg = -np.einsum("ab,xybc,dc->xyad", GAMMA1, np.swapaxes(gneg, 2, 3), GAMMA1)
    out["Q"] = float(np.max(np.abs(qg - base)))
    # axes flip T(x0, x1) = (x1, x0): E = F g(T dx) F^dagger
    gT = np.swapaxes(g, 0, 1)
    fg = np.einsum("ab,xybc,dc->xyad", F_MATRIX, gT, F_MATRIX.conj())
    out["F"] = float(np.max(np.abs(fg - base)))
    # parity P(x0, x1) = (x0, -x1): psi^- -> g1 g5 psi^-, psi^+ -> psi^+ g5 g1
    gP = at(idx, -idx)
    pg = np.einsum("ab,xybc,cd->xyad", GAMMA1 @ GAMMA5, gP, GAMMA5 @ GAMMA1)
    out["P"] = float(np.max(np.abs(pg - base)))
    return out


# -- random draws for oracle suites -------------------------------------------

def random_covariance(labels, rng: np.random.Generator) -> FermionCovariance:
    """Well-conditioned random complex covariance on ``labels``."""
    labels = tuple(sorted(set(labels)))
    k = len(labels)
    G = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return FermionCovariance(labels, G + 2.0 * np.sqrt(k) * np.eye(k))


def random_element(U: Universe, rng: np.random.Generator, parity: int | None = None,
                   density: float = 0.5, max_degree: int | None = None) -> GrassmannElement:
    """Random complex element; ``parity`` restricts to even (0) or odd (1)
    monomials."""
    top = max_degree if max_degree is not None else len(U)
    terms = {}
    for m in range(1 << len(U)):
        deg = bin(m).count("1")
        if deg > top or (parity is not None and deg % 2 != parity):
            continue
        if rng.random() < density:
            terms[m] = complex(rng.normal(), rng.normal())
    if not terms:
        m = 0 if parity in (None, 0) else 1
        terms[m] = 1.0
    return GrassmannElement(U, terms)


def wick_oracle_check(n_labels: int = 4, draws: int = 10, seed: int = 0) -> float:
    """max |determinant rule - Berezin brute force| relative to the value scale."""
    rng = np.random.default_rng(seed)
    labels = [((i, 0), 0) for i in range(n_labels)]
    U = fermion_universe(labels)
    worst = 0.0
    for _ in range(draws):
        cov = random_covariance(labels, rng)
        x = random_element(U, rng)
        det_rule = gaussian_expectation(x, cov)
        brute = berezin_expectation(x, cov)
        worst = max(worst, abs(det_rule - brute) / max(1.0, abs(brute)))
    return worst


def truncated_oracle_check(s_max: int = 4, n_labels: int = 3, draws: int = 5,
                           seed: int = 0) -> dict:
    """Partition recursion against the log-series connected part, per s."""
    rng = np.random.default_rng(seed)
    labels = [((i, 0), 0) for i in range(n_labels)]
    U = fermion_universe(labels)
    out = {}
    for s in range(1, s_max + 1):
        worst = 0.0
        for _ in range(draws):
            cov = random_covariance(labels, rng)
            xs = [random_element(U, rng, parity=0, density=0.4, max_degree=2) for _ in range(s)]
            a, b = truncated_expectation(xs, cov), truncated_expectation_logseries(xs, cov)
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
        out[s] = worst
    return out


def gauge_invariance_suite(draws: int = 20, seed: int = 0, n_side: int = 2) -> float:
    """Worst coefficientwise deviation over random (A, alpha, couplings)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        params = LatticeParams(N=int(rng.integers(1, 4)), n_side=n_side,
                               m_N=float(rng.uniform(0.05, 1.0)), r=float(rng.uniform(0.0, 1.5)),
                               lam=float(rng.uniform(0.1, 4.0)))
        A = rng.normal(size=(n_side, n_side, 2))
        alpha = rng.normal(size=(n_side, n_side))
        worst = max(worst, gauge_invariance_check(A, alpha, params))
    return worst
