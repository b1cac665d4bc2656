"""Exact boson integration: characteristic functions of the G_b vertices,
moment-cumulant inversion, tree kernels and the tree-splitting identity.

Boson labels are ``(site, mu, eps)`` triples.  G_b(A) = (e^{i eps a e A} - 1)/a
with ``a = 2**-N``; g^A on labels carries the eps*eps' sign.

Kernels with m pinned copies are exercised for m <= 2 only; m >= 3 is untested.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sympy.combinatorics.prufer import Prufer
from sympy.utilities.iterables import multiset_partitions

from .lattice import LatticeParams, ParameterError, BosonLabel
from .propagators import BosonPropagator, boson_propagator

MAX_MOMENT = 8
MAX_CUMULANT = 6


@dataclass(frozen=True)
class SpanningTree:
    n: int
    edges: tuple

    def __post_init__(self):
        if len(self.edges) != self.n - 1:
            raise ValueError("a spanning tree on n vertices has n - 1 edges")
        parent = list(range(self.n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i
        for i, j in self.edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                raise ValueError("edge set contains a cycle")
            parent[ri] = rj


@dataclass(frozen=True)
class SetPartition:
    blocks: tuple

    def __post_init__(self):
        flat = [i for b in self.blocks for i in b]
        if len(flat) != len(set(flat)):
            raise ValueError("blocks overlap")


def spanning_trees(n: int):
    """All n^(n-2) labelled trees on range(n), from Prufer sequences."""
    if n == 1:
        yield SpanningTree(1, ())
        return
    if n == 2:
        yield SpanningTree(2, ((0, 1),))
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield SpanningTree(n, tuple(tuple(e) for e in Prufer.to_tree(list(seq))))


def set_partitions(n: int):
    for p in multiset_partitions(list(range(n))):
        yield SetPartition(tuple(tuple(b) for b in p))


def kirchhoff_tree_sum(w: np.ndarray) -> float:
    """Matrix-tree theorem: sum over spanning trees of the product of edge weights."""
    n = w.shape[0]
    if n == 1:
        return 1.0
    W = np.array(w, dtype=float)
    np.fill_diagonal(W, 0.0)
    Lap = np.diag(W.sum(axis=1)) - W
    return float(np.linalg.det(Lap[1:, 1:]))


# -- label covariance -----------------------------------------------------------

def _norm(label) -> BosonLabel:
    x, mu, eps = label
    if eps not in (1, -1) or mu not in (0, 1):
        raise ParameterError(f"bad boson label {label!r}")
    return BosonLabel(tuple(x), mu, eps)


def label_matrix(labels, prop: BosonPropagator) -> np.ndarray:
    """g^A_{b_i b_j} including the eps_i eps_j sign."""
    labels = [_norm(b) for b in labels]
    n = len(labels)
    G = np.empty((n, n))
    for i, bi in enumerate(labels):
        for j, bj in enumerate(labels):
            G[i, j] = prop.label(bi, bj)
    return G


def mu_N(prop: BosonPropagator, mu: int = 0) -> float:
    p = prop.params
    return math.exp(-0.5 * p.lam * p.a ** 2 * prop.at((0, 0), mu, mu))


def _theta_J(labels, J, params):
    if J is None:
        return np.zeros(len(labels))
    J = np.asarray(J, dtype=float)
    n = params.n_side
    return np.array([b.eps * params.a * params.e * J[b.site[0] % n, b.site[1] % n, b.mu]
                     for b in labels])


def charfun(labels, prop: BosonPropagator) -> float:
    """E prod_j exp(i eps_j a e A_{b_j})."""
    labels = [_norm(b) for b in labels]
    if not labels:
        return 1.0
    p = prop.params
    C = p.lam * p.a ** 2 * label_matrix(labels, prop)
    return math.exp(-0.5 * C.sum())


def _subset_charfuns(labels, prop):
    p = prop.params
    C = p.lam * p.a ** 2 * label_matrix(labels, prop)
    n = len(labels)
    out = np.empty(1 << n)
    for S in range(1 << n):
        idx = [i for i in range(n) if S >> i & 1]
        out[S] = math.exp(-0.5 * C[np.ix_(idx, idx)].sum()) if idx else 1.0
    return out


def g_moment(labels, prop: BosonPropagator, J=None) -> complex:
    """E prod_j G_{b_j}(A + J) by inclusion-exclusion over subsets."""
    labels = [_norm(b) for b in labels]
    n = len(labels)
    if n > MAX_MOMENT:
        raise ParameterError(f"moments limited to n <= {MAX_MOMENT}")
    if n == 0:
        return 1.0
    p = prop.params
    cf = _subset_charfuns(labels, prop)
    ph = np.exp(1j * _theta_J(labels, J, p))
    tot = 0j
    for S in range(1 << n):
        k = bin(S).count("1")
        f = np.prod([ph[i] for i in range(n) if S >> i & 1]) if k else 1.0
        tot += (-1) ** (n - k) * f * cf[S]
    tot /= p.a ** n
    return tot if J is not None else tot.real


def g_cumulant_partition(labels, prop: BosonPropagator, J=None):
    """Joint cumulant of G_{b_1}..G_{b_n} via the partition (Moebius) sum
    over moments.  Exact but loses digits to cancellation at large N."""
    labels = [_norm(b) for b in labels]
    n = len(labels)
    if n == 0:
        raise ParameterError("cumulants need at least one label")
    if n > MAX_CUMULANT:
        raise ParameterError(f"cumulants limited to n <= {MAX_CUMULANT}")
    memo = {}

    def mom(block):
        if block not in memo:
            memo[block] = g_moment([labels[i] for i in block], prop, J)
        return memo[block]

    tot = 0j if J is not None else 0.0
    for part in set_partitions(n):
        k = len(part.blocks)
        term = (-1) ** (k - 1) * math.factorial(k - 1)
        for b in part.blocks:
            term = term * mom(b)
        tot += term
    return tot


@lru_cache(maxsize=None)
def connected_graphs(n: int) -> tuple:
    """Edge lists of all connected simple graphs on range(n)."""
    edges = list(itertools.combinations(range(n), 2))
    full = (1 << n) - 1
    out = []
    for mask in range(1 << len(edges)):
        es = [edges[i] for i in range(len(edges)) if mask >> i & 1]
        if len(es) < n - 1:
            continue
        adj = [0] * n
        for i, j in es:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        seen, frontier = 1, 1
        while frontier:
            nxt = 0
            for v in range(n):
                if frontier >> v & 1:
                    nxt |= adj[v]
            frontier = nxt & ~seen
            seen |= nxt
        if seen == full:
            out.append(tuple(es))
    return tuple(out)


def g_cumulant(labels, prop: BosonPropagator, J=None):
    """Joint cumulant of G_{b_1}..G_{b_n}.

    For n >= 2 the constant shift in G drops out and the exponentials have
    moments prod mu_j prod_{i<j}(1 + f_ij) with f_ij = expm1(-C_ij); the
    cumulant is then the sum over connected graphs of prod f, which keeps
    full relative precision as a -> 0."""
    labels = [_norm(b) for b in labels]
    n = len(labels)
    if n == 0:
        raise ParameterError("cumulants need at least one label")
    if n > MAX_CUMULANT:
        raise ParameterError(f"cumulants limited to n <= {MAX_CUMULANT}")
    p = prop.params
    a = p.a
    C = p.lam * a ** 2 * label_matrix(labels, prop)
    ph = np.exp(1j * _theta_J(labels, J, p))
    if n == 1:
        if J is None:
            return math.expm1(-0.5 * C[0, 0]) / a
        return (math.exp(-0.5 * C[0, 0]) * ph[0] - 1.0) / a
    f = np.expm1(-C)
    tot = sum(math.prod(f[i, j] for i, j in g) for g in connected_graphs(n))
    pref = math.exp(-0.5 * np.trace(C)) / a ** n
    if J is None:
        return pref * tot
    return pref * np.prod(ph) * tot


def w_n0(labels, prop: BosonPropagator) -> float:
    """Coefficient kernel of O_{b_1}..O_{b_n} in the effective potential,
    normalized so the potential reads 2^{N(2-n)} int db w_{n,0} O^n."""
    n = len(labels)
    a = prop.params.a
    return a ** (2 - n) * (-1) ** (n + 1) * g_cumulant(labels, prop) / math.factorial(n)


def _delta(b, bp, params) -> float:
    n = params.n_side
    same = (b.mu == bp.mu and b.eps == bp.eps
            and all((b.site[i] - bp.site[i]) % n == 0 for i in (0, 1)))
    return 1.0 / params.a ** 2 if same else 0.0


def w_nm(labels, primed, prop: BosonPropagator) -> float:
    """Kernel w_{n,m}(b; b') for m <= 2.  For n >= 2 the J dependence of the
    cumulant factorizes as prod_i (1 + a G_{b_i}(J)), so w_{n,m} is w_{n,0}
    times delta functions pinning each b'_j to a distinct b_i, over m!."""
    labels = [_norm(b) for b in labels]
    primed = [_norm(b) for b in primed]
    n, m = len(labels), len(primed)
    if m > 2:
        raise ParameterError("only m <= 2 is implemented")
    p = prop.params
    if n == 1:
        if m == 0:
            return w_n0(labels, prop)
        if m == 1:
            return mu_N(prop, labels[0].mu) * _delta(labels[0], primed[0], p)
        return 0.0
    pins = 0.0
    for inj in itertools.permutations(range(n), m):
        term = 1.0
        for j, i in enumerate(inj):
            term *= _delta(primed[j], labels[i], p)
        pins += term
    return w_n0(labels, prop) * pins / math.factorial(m)


def potential_coefficient(labels, prop: BosonPropagator, J) -> complex:
    """sum_{m<=2} 2^{N(2-n-m)} int db' w_{n,m}(b; b') G^m_{b'}(J), truncated at m = 2."""
    labels = [_norm(b) for b in labels]
    p = prop.params
    a, n = p.a, len(labels)
    GJ = (np.exp(1j * _theta_J(labels, J, p)) - 1.0) / a
    tot = 0j
    for m in range(3):
        # the delta functions collapse the b' integrals onto the b_i
        s = 0j
        for inj in itertools.permutations(range(n), m):
            primed = [labels[i] for i in inj]
            val = w_nm(labels, primed, prop) * a ** (2 * m)
            s += val * np.prod([GJ[i] for i in inj]) if m else val
        tot += a ** (n + m - 2) * s
    return tot


def potential_coefficient_exact(labels, prop: BosonPropagator, J) -> complex:
    """(-1)^{n+1} kappa_n(G(A+J)) / n!, the exact J-dependent coefficient."""
    n = len(labels)
    return (-1) ** (n + 1) * g_cumulant(labels, prop, J) / math.factorial(n)


# -- trees ---------------------------------------------------------------------

def tree_kernel_v(labels, prop: BosonPropagator, method: str = "prufer") -> float:
    """v_n = (mu^n / n!) sum_T prod_{(i,j) in T} lam g^A_{b_i b_j}."""
    labels = [_norm(b) for b in labels]
    n = len(labels)
    if n > 8:
        raise ParameterError("tree kernels limited to n <= 8")
    p = prop.params
    w = p.lam * label_matrix(labels, prop)
    if method == "kirchhoff":
        ts = kirchhoff_tree_sum(w)
    else:
        ts = sum(math.prod(w[i, j] for i, j in T.edges) for T in spanning_trees(n))
    return mu_N(prop) ** n / math.factorial(n) * ts


def _tree_sum(w, verts) -> float:
    """Sum over spanning trees on ``verts``; a single vertex contributes 1."""
    verts = list(verts)
    k = len(verts)
    if k == 1:
        return 1.0
    tot = 0.0
    for T in spanning_trees(k):
        tot += math.prod(w[verts[i], verts[j]] for i, j in T.edges)
    return tot


def tree_property_check(n: int, w: np.ndarray) -> float:
    """|LHS - RHS| of the root-edge decomposition of the spanning-tree sum.

    Vertex 0 plays the root; vertex 1 anchors X_1.  The first sum on the
    right is the X_2 = {} case (root attached to a tree on all of I')."""
    if not 2 <= n <= 7:
        raise ParameterError("tree property check needs 2 <= n <= 7")
    w = np.asarray(w, dtype=float)
    rest = list(range(1, n))
    lhs = _tree_sum(w, range(n))
    rhs = sum(w[0, k] for k in rest) * _tree_sum(w, rest)
    if n >= 3:
        others = rest[1:]
        for r in range(len(others)):  # X_2 nonempty: at most len(others) - 1 in X_1 besides vertex 1
            for extra in itertools.combinations(others, r):
                X1 = [1, *extra]
                X2 = [v for v in rest if v not in X1]
                if not X2:
                    continue
                rhs += (sum(w[0, k] for k in X1) * _tree_sum(w, X1)
                        * _tree_sum(w, [0, *X2]))
    return abs(lhs - rhs)


# -- scans and symmetry ----------------------------------------------------------

def physical_labels(positions, mus, epss, params: LatticeParams):
    """Snap physical positions to lattice sites."""
    out = []
    for x, mu, eps in zip(positions, mus, epss):
        site = tuple(int(round(xi / params.a)) % params.n_side for xi in x)
        out.append(BosonLabel(site, mu, eps))
    return out


def kernel_split_scan(n: int, positions, mus, epss, N_values, lam: float,
                      L: float = 1.0, M: float = 1.0, xi: float = 1.0,
                      noise: float = 1e-13) -> dict:
    """Delta_n(N) = w_{n,0} - v_n at fixed physical labels; slope of log2|Delta|."""
    if n not in (2, 3) or len(positions) != n:
        raise ParameterError("scan supports n in {2, 3} with n positions")
    rows = []
    for N in N_values:
        n_side = int(round(L * 2 ** N))
        prm = LatticeParams(N=N, n_side=n_side, M=M, lam=lam, xi=xi)
        prop = boson_propagator(prm)
        labels = physical_labels(positions, mus, epss, prm)
        w = w_n0(labels, prop)
        v = tree_kernel_v(labels, prop)
        rows.append({"N": N, "n": n, "lambda": lam, "w": w, "v": v, "delta": w - v})
    deltas = np.array([abs(r["delta"]) for r in rows])
    scale = max(abs(r["w"]) for r in rows) or 1.0
    if np.all(deltas <= noise * scale):
        return {"rows": rows, "slope": None, "status": "converged"}
    ok = deltas > noise * scale
    Ns = np.array([r["N"] for r in rows])[ok]
    slope = float(np.polyfit(Ns, np.log2(deltas[ok]), 1)[0]) if ok.sum() >= 2 else None
    for r in rows:
        r["slope"] = slope
    return {"rows": rows, "slope": slope, "status": "fitted"}


def all_labels(params: LatticeParams):
    n = params.n_side
    return [BosonLabel((i, j), mu, eps) for i in range(n) for j in range(n)
            for mu in (0, 1) for eps in (1, -1)]


def cumulant_tensor(labels, prop: BosonPropagator, p: int) -> np.ndarray:
    """kappa_p over all label tuples, vectorized for p <= 3."""
    prm = prop.params
    a = prm.a
    C = prm.lam * a ** 2 * label_matrix(labels, prop)
    d = np.diag(C)
    mu1 = np.exp(-0.5 * d)
    m1 = (mu1 - 1.0) / a
    if p == 1:
        return m1
    e2 = mu1[:, None] * mu1[None, :] * np.exp(-C)  # charfun of pairs
    m2 = (e2 - mu1[:, None] - mu1[None, :] + 1.0) / a ** 2
    if p == 2:
        return m2 - m1[:, None] * m1[None, :]
    if p == 3:
        pair = np.exp(-C)
        e3 = (mu1[:, None, None] * mu1[None, :, None] * mu1[None, None, :]
              * pair[:, :, None] * pair[:, None, :] * pair[None, :, :])
        e12, e13, e23 = e2[:, :, None], e2[:, None, :], e2[None, :, :]
        u1, u2, u3 = mu1[:, None, None], mu1[None, :, None], mu1[None, None, :]
        m3 = (e3 - e12 - e13 - e23 + u1 + u2 + u3 - 1.0) / a ** 3
        M1, M2, M3 = m1[:, None, None], m1[None, :, None], m1[None, None, :]
        return (m3 - m2[:, :, None] * M3 - m2[:, None, :] * M2 - m2[None, :, :] * M1
                + 2.0 * M1 * M2 * M3)
    raise ParameterError("vectorized cumulants only for p <= 3")


def conjugation_symmetry_check(params: LatticeParams, p: int, externals=None) -> dict:
    """Residual of W(b) = W(bbar) for the order-p cumulant kernel, and the
    magnitude of its contraction with g^A on every leg."""
    prop = boson_propagator(params)
    labels = all_labels(params)
    K = cumulant_tensor(labels, prop, p)
    conj = np.array([labels.index(b.conj()) for b in labels])
    flipped = K[np.ix_(*([conj] * p))] if p > 1 else K[conj]
    sym = float(np.max(np.abs(flipped - K)))
    G = label_matrix(labels, prop)
    a2 = params.a ** 2
    if externals is None:
        externals = [0, len(labels) // 3, len(labels) - 1][:max(1, min(3, len(labels)))]
    ext = list(externals)
    if p == 1:
        contr = a2 * G[ext] @ K
        ref = a2 * np.abs(G[ext]) @ np.abs(K)
    elif p == 2:
        contr = a2 ** 2 * np.einsum("ia,jb,ab->ij", G[ext], G[ext], K)
        ref = a2 ** 2 * np.einsum("ia,jb,ab->ij", np.abs(G[ext]), np.abs(G[ext]), np.abs(K))
    else:
        Ge = G[ext]
        contr = a2 ** 3 * np.einsum("ia,jb,kc,abc->ijk", Ge, Ge, Ge, K, optimize=True)
        ref = a2 ** 3 * np.einsum("ia,jb,kc,abc->ijk", np.abs(Ge), np.abs(Ge), np.abs(Ge),
                                  np.abs(K), optimize=True)
    return {"p": p, "symmetry_residual": sym,
            "contracted_max": float(np.max(np.abs(contr))),
            "contracted_scale": float(np.max(ref))}
