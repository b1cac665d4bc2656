"""Scaling dimensions and Gallavotti-Nicolo tree sums.

A tree is stored canonically as nested tuples ``(scale, children)`` with
children sorted; an empty ``children`` tuple marks an endpoint.  The root
sits at scale h with a single non-endpoint child v0 at h + 1.  Endpoints
below N + 1 are non-irrelevant and sit one scale above their predecessor;
endpoints at N + 1 are bare kernels and may follow any scale.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

GRADINGS = ("fermionic", "sources", "auxiliary", "uv")

# endpoint menu: psi^2, psi^4, G psi^2, Gdot psi^2, Gddot psi^2 (fermionic grading)
ENDPOINT_MENU = {
    "psi2": {"q": 1},
    "psi4": {"q": 2},
    "G_psi2": {"q": 1, "p": 1},
    "Gdot_psi2": {"q": 1, "pdot": 1},
    "Gddot_psi2": {"q": 1, "pddot": 1},
}


class TreeBudgetExceeded(RuntimeError):
    pass


def scaling_dimension(counts: dict, grading: str = "fermionic") -> int:
    """Scaling dimension of a monomial from its field counts.

    fermionic: 2 - q - p - pdot - 2 pddot   (q = number of psi pairs)
    sources:   2 - (q+q')/2 - 3(qt+qt')/2 - n - ndot - 2 nddot - p
    auxiliary: 2 - (q+q')/2 - 3(qt+qt')/2 - n - 3 ndot - pddot - p
    uv:        2 - (q+q')/2 - 3(qt+qt')/2 - p - p'
    In the last three q, q' count psi^+, psi^- and qt, qt' count the
    external fermion sources."""
    c = {k: v for k, v in counts.items()}
    if any(v < 0 for v in c.values()):
        raise ValueError("field counts must be non-negative")
    g = lambda k: c.get(k, 0)
    if grading == "fermionic":
        d = 2 - g("q") - g("p") - g("pdot") - 2 * g("pddot")
    elif grading in ("sources", "auxiliary", "uv"):
        base = 2 - 0.5 * (g("q") + g("q'")) - 1.5 * (g("qt") + g("qt'"))
        if grading == "sources":
            d = base - g("n") - g("ndot") - 2 * g("nddot") - g("p")
        elif grading == "auxiliary":
            d = base - g("n") - 3 * g("ndot") - g("pddot") - g("p")
        else:
            d = base - g("p") - g("p'")
    else:
        raise ValueError(f"unknown grading {grading!r}; expected one of {GRADINGS}")
    if d != int(d):
        raise ValueError(f"non-integer dimension {d} (unbalanced fermion counts?)")
    return int(d)


def classify(dim: int) -> str:
    return "relevant" if dim > 0 else "marginal" if dim == 0 else "irrelevant"


@dataclass(frozen=True)
class GNTree:
    h: int
    N: int
    v0: tuple  # (scale, children)

    @property
    def endpoints(self) -> list:
        out = []

        def walk(node, parent_scale):
            s, ch = node
            if not ch:
                out.append((s, parent_scale))
            for c in ch:
                walk(c, s)
        walk(self.v0, self.h)
        return out

    @property
    def n_endpoints(self) -> int:
        return len(self.endpoints)

    @property
    def h_max(self) -> int:
        return max(s for s, _ in self.endpoints)

    def edges(self):
        """(h_v, h_v') for every vertex v with predecessor v'."""
        out = []

        def walk(node, parent_scale):
            s, ch = node
            out.append((s, parent_scale))
            for c in ch:
                walk(c, s)
        walk(self.v0, self.h)
        return out

    def endpoint_kinds(self):
        return ["bare" if s == self.N + 1 else "non-irrelevant" for s, _ in self.endpoints]


def validate_tree(t: GNTree, branching: bool = False) -> list:
    """Independent re-check of the structural constraints; returns problems."""
    problems = []
    s0, ch0 = t.v0
    if s0 != t.h + 1:
        problems.append("v0 not at h + 1")
    if not ch0:
        problems.append("v0 is an endpoint")

    def walk(node, parent_scale, is_v0):
        s, ch = node
        if not (t.h + 1 <= s <= t.N + 1):
            problems.append(f"scale {s} outside [h+1, N+1]")
        if s <= parent_scale:
            problems.append("scales not increasing along the tree")
        if ch:
            if s > t.N:
                problems.append("internal vertex at N + 1")
            if branching and not is_v0 and len(ch) < 2:
                problems.append("non-branching internal vertex")
            if list(ch) != sorted(ch):
                problems.append("children not canonical")
            for c in ch:
                walk(c, s, False)
        else:
            if s <= t.N and s != parent_scale + 1:
                problems.append("non-irrelevant endpoint not one scale above predecessor")
    walk(t.v0, t.h, True)
    return problems


@lru_cache(maxsize=None)
def _subtrees(parent: int, N: int, max_ep: int, branching: bool) -> tuple:
    """All canonical subtrees hanging from a vertex at scale ``parent``,
    with at most ``max_ep`` endpoints, as (node, endpoint_count)."""
    out = []
    if max_ep >= 1:
        if parent + 1 <= N:
            out.append(((parent + 1, ()), 1))
        out.append(((N + 1, ()), 1))
    for s in range(parent + 1, N + 1):
        for kids in _children(s, N, max_ep, 2 if branching else 1, branching):
            out.append(((s, kids[0]), kids[1]))
    return tuple(sorted(set(out)))


@lru_cache(maxsize=None)
def _children(s: int, N: int, max_ep: int, min_kids: int, branching: bool) -> tuple:
    """Canonical multisets of subtrees below a vertex at scale s."""
    opts = _subtrees(s, N, max_ep, branching)
    out = []

    def rec(start, chosen, eps):
        if len(chosen) >= min_kids:
            out.append((tuple(sorted(c[0] for c in chosen)), eps))
        for i in range(start, len(opts)):
            node, e = opts[i]
            if eps + e <= max_ep:
                chosen.append(opts[i])
                rec(i, chosen, eps + e)
                chosen.pop()
    rec(0, [], 0)
    return tuple(out)


@lru_cache(maxsize=None)
def _count_subtrees(parent: int, N: int, max_ep: int, branching: bool) -> tuple:
    """c[e] = number of distinct subtrees below ``parent`` with e endpoints."""
    c = [0] * (max_ep + 1)
    if max_ep >= 1:
        c[1] += 1 + (parent + 1 <= N)
    for s in range(parent + 1, N + 1):
        for e, k in enumerate(_count_children(s, N, max_ep, 2 if branching else 1, branching)):
            c[e] += k
    return tuple(c)


@lru_cache(maxsize=None)
def _count_children(s: int, N: int, max_ep: int, min_kids: int, branching: bool) -> tuple:
    # poly[k][e]: multisets with min(#children, min_kids) = k and e endpoints
    c = _count_subtrees(s, N, max_ep, branching)
    poly = [[0] * (max_ep + 1) for _ in range(min_kids + 1)]
    poly[0][0] = 1
    for e in range(1, max_ep + 1):
        if not c[e]:
            continue
        new = [[0] * (max_ep + 1) for _ in range(min_kids + 1)]
        for k in range(min_kids + 1):
            for e0 in range(max_ep + 1):
                if poly[k][e0]:
                    for j in range(0, (max_ep - e0) // e + 1):
                        ways = math.comb(c[e] + j - 1, j)
                        new[min(k + j, min_kids)][e0 + e * j] += poly[k][e0] * ways
        poly = new
    return tuple(poly[min_kids])


def count_trees(h: int, N: int, max_endpoints: int, branching: bool = False) -> int:
    """Number of trees enumerate_trees would return, without building them."""
    if N - h < 1 or max_endpoints < 1:
        return 0
    return sum(_count_children(h + 1, N, max_endpoints, 1, branching))


def enumerate_trees(h: int, N: int, max_endpoints: int, branching: bool = False,
                    budget: int = 500_000):
    """All trees between scales h and N with 1..max_endpoints endpoints.

    ``branching`` restricts to trees whose internal vertices other than v0
    have at least two successors.  Returns (trees, complete_flag); when the
    count exceeds ``budget`` nothing is built and ([], False) comes back."""
    if N - h > 10 or max_endpoints > 5:
        raise ValueError("enumeration limited to N - h <= 10 and at most 5 endpoints")
    if N - h < 1 or max_endpoints < 1:
        return [], True
    if count_trees(h, N, max_endpoints, branching) > budget:
        return [], False
    trees = [GNTree(h, N, (h + 1, kids))
             for kids, _ in _children(h + 1, N, max_endpoints, 1, branching)]
    return trees, True


def tree_weight(t: GNTree, theta: float) -> float:
    w = 2.0 ** (-theta * (t.h_max - t.h))
    for hv, hp in t.edges():
        w *= 2.0 ** (-0.5 * (1.0 - theta) * (hv - hp))
    return w


def dimensional_sum(h: int, N: int, endpoints: int, theta: float,
                    exact: bool = False) -> float:
    """Sum of tree weights over branching trees with at most (or exactly)
    ``endpoints`` endpoints."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    trees, complete = enumerate_trees(h, N, endpoints, branching=True)
    if not complete:
        raise TreeBudgetExceeded("tree budget exceeded")
    return sum(tree_weight(t, theta) for t in trees if not exact or t.n_endpoints == endpoints)


def dimensional_sum_scan(h: int, N_values, endpoints: int, theta: float) -> list:
    rows, prev = [], None
    for N in N_values:
        s = dimensional_sum(h, N, endpoints, theta)
        rows.append({"N": N, "sum": s, "increment": None if prev is None else s - prev})
        prev = s
    return rows


def tree_sum_bound(endpoints: int, theta: float) -> float:
    return (8.0 / (2.0 ** ((1.0 - theta) / 2.0) - 1.0)) ** (2 * max(1, endpoints))


def chain_sum_closed_form(h: int, N: int, theta: float) -> float:
    """Weight sum over all single-endpoint trees (chains allowed), closed form.

    Weights telescope to 2^{-beta (h_e - h)}, beta = (1 + theta)/2.  An
    endpoint at h_e <= N needs its predecessor at h_e - 1, leaving
    2^{max(0, h_e - h - 3)} chains; an endpoint at N + 1 leaves 2^{N-h-1}."""
    D = N - h
    beta = 0.5 * (1.0 + theta)
    total = 0.0
    if D >= 2:
        total += 2.0 ** (-2 * beta)
    if D >= 3:
        rho = 2.0 ** (1.0 - beta)
        total += rho ** 3 * (1.0 - rho ** (D - 2)) / (1.0 - rho) / 8.0
    total += 2.0 ** (D - 1) * 2.0 ** (-beta * (D + 1))
    return total


def chain_sum_enumerated(h: int, N: int, theta: float) -> float:
    trees, _ = enumerate_trees(h, N, 1)
    return sum(tree_weight(t, theta) for t in trees)


def cauchy_check(rows: list, endpoints: int, theta: float) -> dict:
    """Boundedness against the analytic constant and tail shrinkage of the
    increments of a dimensional_sum_scan."""
    sums = [r["sum"] for r in rows]
    inc = [abs(r["increment"]) for r in rows if r["increment"] is not None]
    bound = tree_sum_bound(endpoints, theta)
    shrinking = len(inc) >= 2 and inc[-1] < inc[-2]
    return {"endpoints": endpoints, "theta": theta, "sup": max(sums), "bound": bound,
            "bounded": max(sums) <= bound, "last_increment": inc[-1] if inc else None,
            "tail_ratio": inc[-1] / inc[-2] if len(inc) >= 2 and inc[-2] else None,
            "shrinking": bool(shrinking)}
