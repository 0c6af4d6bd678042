"""Marginal-dependence skeleton construction and the mediator search."""

import numpy as np
import pytest

from edgecert.skeleton import MB_CAP, Skeleton, _tier3_set, build_skeleton, mediator_search

from conftest import make_dataset


def _chain_dataset(seed=3, n=1000):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = 1.2 * a + rng.normal(size=n)
    c = 0.9 * b + rng.normal(size=n)
    return make_dataset({"a": a, "b": b, "c": c})


# ---------------------------------------------------------------------------
# Skeleton container


def test_skeleton_neighbors_and_membership():
    sk = Skeleton(pairs=((0, 1), (1, 2)), marginal_p={(0, 1): 0.0, (1, 2): 0.0, (0, 2): 0.5})
    assert sk.neighbors(1) == [0, 2]
    assert sk.neighbors(0) == [1]
    assert (1, 0) in sk and (2, 1) in sk
    assert (0, 2) not in sk


def test_tier3_set_ranks_by_dependence_and_caps():
    # star around the pair (0, 1): twelve shared neighbors with graded p-values
    others = list(range(2, 14))
    pairs = tuple((0, v) for v in others) + tuple((1, v) for v in others) + ((0, 1),)
    marginal = {p: 1e-6 for p in pairs}
    for rank, v in enumerate(others):
        marginal[(0, v)] = (rank + 1) * 1e-3        # v=2 strongest ... v=13 weakest
        marginal[(1, v)] = 1.0
    sk = Skeleton(pairs=tuple(sorted(pairs)), marginal_p=marginal)
    zs = _tier3_set(sk, (0, 1))
    assert len(zs) == MB_CAP
    assert zs == tuple(others[:MB_CAP])             # strongest MB_CAP survive


# ---------------------------------------------------------------------------
# build_skeleton


def test_single_variable_gives_empty_skeleton(gamma_config):
    ds = make_dataset({"a": np.random.default_rng(0).normal(size=50)})
    sk = build_skeleton(ds, gamma_config)
    assert sk.pairs == () and sk.marginal_p == {}


def test_independent_variables_yield_empty_skeleton(gamma_config):
    """Three mutually independent Gaussians: the FDR pass keeps the skeleton
    empty in at least 85 of 100 seeds."""
    empty = 0
    for s in range(100):
        rng = np.random.default_rng(s)
        ds = make_dataset({k: rng.normal(size=400) for k in "abc"})
        if not build_skeleton(ds, gamma_config).pairs:
            empty += 1
    assert empty >= 85


def test_chain_retains_all_three_pairs(gamma_config):
    sk = build_skeleton(_chain_dataset(), gamma_config)
    assert sk.pairs == ((0, 1), (0, 2), (1, 2))
    assert set(sk.marginal_p) == {(0, 1), (0, 2), (1, 2)}


def test_collider_excludes_independent_parents(gamma_config):
    rng = np.random.default_rng(5)
    a = rng.normal(size=1000)
    b = rng.normal(size=1000)
    c = a + b + 0.8 * rng.normal(size=1000)
    sk = build_skeleton(make_dataset({"a": a, "b": b, "c": c}), gamma_config)
    assert sk.pairs == ((0, 2), (1, 2))


def test_skeleton_is_deterministic(gamma_config):
    ds = _chain_dataset()
    s1 = build_skeleton(ds, gamma_config)
    s2 = build_skeleton(ds, gamma_config)
    assert s1.pairs == s2.pairs
    assert s1.marginal_p == s2.marginal_p


# ---------------------------------------------------------------------------
# mediator_search


def test_chain_midpoint_mediates_the_endpoints(gamma_config):
    ds = _chain_dataset()
    sk = build_skeleton(ds, gamma_config)
    verdicts = mediator_search(sk, ds, gamma_config)
    v = verdicts[(0, 2)]
    assert v is not None
    assert v.mediated_by == (1,) and v.tier == 1
    assert v.p_conditional > gamma_config.alpha_residual
    assert verdicts[(0, 1)] is None
    assert verdicts[(1, 2)] is None


def _parallel_paths_dataset(seed=11, n=1200):
    """a -> b1 -> c and a -> b2 -> c with unequal path weights: no single
    node separates (a, c); the pair {b1, b2} does."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b1 = a + 0.6 * rng.normal(size=n)
    b2 = 0.6 * a + 0.6 * rng.normal(size=n)
    c = b1 + 0.8 * b2 + 0.6 * rng.normal(size=n)
    return make_dataset({"a": a, "b1": b1, "b2": b2, "c": c})


def test_parallel_paths_need_a_two_node_conditioning_set(gamma_config):
    ds = _parallel_paths_dataset()
    sk = build_skeleton(ds, gamma_config)
    verdicts = mediator_search(sk, ds, gamma_config)
    v = verdicts[(0, 3)]
    assert v is not None
    assert v.tier == 2 and v.mediated_by == (1, 2)


def test_mediator_max_tier_caps_the_search(gamma_config):
    ds = _parallel_paths_dataset()
    sk = build_skeleton(ds, gamma_config)
    capped = mediator_search(sk, ds, gamma_config.replace(mediator_max_tier=1))
    assert capped[(0, 3)] is None
    for verdict in capped.values():
        if verdict is not None:
            assert verdict.tier == 1
