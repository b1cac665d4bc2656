import pytest

from qed2lattice.rgtrees import (ENDPOINT_MENU, GNTree, TreeBudgetExceeded, cauchy_check,
                                 chain_sum_closed_form, chain_sum_enumerated, classify, count_trees,
                                 dimensional_sum, dimensional_sum_scan, enumerate_trees,
                                 tree_sum_bound, scaling_dimension, tree_weight, validate_tree)


@pytest.mark.parametrize("counts,dim,cls", [({"q": 1}, 1, "relevant"), ({"q": 2}, 0, "marginal"),
                                            ({"q": 1, "p": 1}, 0, "marginal"),
                                            ({"q": 3}, -1, "irrelevant"),
                                            ({"q": 1, "pddot": 1}, -1, "irrelevant")])
def test_fermionic_dimensions(counts, dim, cls):
    assert scaling_dimension(counts) == dim
    assert classify(dim) == cls


def test_other_gradings():
    assert scaling_dimension({"q": 1, "q'": 1}, "uv") == 1
    assert scaling_dimension({"q": 1, "q'": 1, "p": 1}, "uv") == 0
    assert scaling_dimension({"qt": 1, "qt'": 1}, "sources") == -1
    assert scaling_dimension({"q": 1, "q'": 1, "ndot": 1}, "auxiliary") == -2
    assert scaling_dimension({"q": 1, "q'": 1, "nddot": 1}, "sources") == -1
    with pytest.raises(ValueError):
        scaling_dimension({"q": 1}, "nonsense")
    with pytest.raises(ValueError):
        scaling_dimension({"q": -1})
    with pytest.raises(ValueError):
        scaling_dimension({"q": 1}, "uv")


def test_endpoint_menu_is_non_irrelevant():
    for counts in ENDPOINT_MENU.values():
        assert scaling_dimension(counts) >= -1


# regression values from exhaustive enumeration, frozen
CHAIN_COUNTS = {1: 1, 2: 3, 3: 6, 4: 12, 5: 24}
TWO_ENDPOINT = [2, 10, 35, 127, 476, 1828, 7136]


def test_frozen_counts():
    for D, c in CHAIN_COUNTS.items():
        trees, complete = enumerate_trees(0, D, 1)
        assert complete and len(trees) == c
    for D, c in enumerate(TWO_ENDPOINT, 1):
        assert len(enumerate_trees(0, D, 2)[0]) == c


def test_zero_endpoints_and_monotone_counts():
    assert enumerate_trees(0, 5, 0) == ([], True)
    counts = [count_trees(0, D, 3) for D in range(1, 11)]
    assert all(b >= a for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("branching", [False, True])
def test_every_tree_validates(branching):
    trees, _ = enumerate_trees(1, 6, 3, branching=branching)
    assert trees
    for t in trees:
        assert validate_tree(t, branching=branching) == []
    assert len({t.v0 for t in trees}) == len(trees)


def test_validator_catches_violations():
    assert validate_tree(GNTree(0, 3, (2, ((4, ()),))))  # v0 not at h + 1
    assert validate_tree(GNTree(0, 3, (1, ((3, ()),))))  # endpoint skips a scale
    assert validate_tree(GNTree(0, 3, (1, ((2, ((4, ()),)),))), branching=True)  # chain vertex


def test_count_matches_enumeration():
    for D in range(1, 6):
        for ep in (1, 2, 3):
            for b in (False, True):
                assert count_trees(0, D, ep, b) == len(enumerate_trees(0, D, ep, branching=b)[0])
    # exact counts well past what enumeration can hold, frozen
    assert count_trees(0, 10, 4) == 101095136096
    assert count_trees(0, 10, 4, True) == 3245


def test_budget_flag():
    trees, complete = enumerate_trees(0, 8, 3, budget=5)
    assert not complete and trees == []
    with pytest.raises(ValueError):
        enumerate_trees(0, 12, 2)


def test_chain_closed_form():
    for th in (0.1, 0.5, 0.99):
        for D in range(1, 11):
            assert chain_sum_closed_form(3, 3 + D, th) == pytest.approx(chain_sum_enumerated(3, 3 + D, th), abs=1e-12)


def test_weights_and_theta_monotonicity():
    t = enumerate_trees(0, 4, 1)[0][0]
    assert 0 < tree_weight(t, 0.5) <= 1
    for ep in (1, 2, 3):
        assert dimensional_sum(0, 8, ep, 0.99) < dimensional_sum(0, 8, ep, 0.5)
    with pytest.raises(ValueError):
        dimensional_sum(0, 5, 2, 1.0)


def test_scan_is_bounded_and_settling():
    rows = dimensional_sum_scan(0, range(1, 11), 2, 0.5)
    chk = cauchy_check(rows, 2, 0.5)
    assert chk["bounded"] and chk["shrinking"] and chk["tail_ratio"] < 0.8
    assert rows[0]["increment"] is None
    assert tree_sum_bound(2, 0.5) == pytest.approx((8 / (2 ** 0.25 - 1)) ** 4)
    assert issubclass(TreeBudgetExceeded, RuntimeError)
