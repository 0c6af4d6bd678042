"""Per-tier gates and deciders, and the pairwise feature block they read."""

import numpy as np
import pytest

from edgecert.model import ALL_TIERS, Config, VariableMeta
from edgecert.tiers import (
    GUARD_TIERS,
    SAFE_TIERS,
    PairFeatures,
    TierDecision,
    decide_all,
    gate,
    rank_gaussianize,
    score_fisher_information,
    tier_decide,
)


def make_features(**kw) -> PairFeatures:
    """Neutral feature block; every decider abstains until a field is set."""
    base = dict(
        n=2000, sw_x=0.5, sw_y=0.5, int_x=False, int_y=False,
        lin_p={"FWD": 0.001, "BWD": 0.001},
        nl_p={"FWD": 0.001, "BWD": 0.001},
        hetero_p={"FWD": 0.5, "BWD": 0.5},
        lsnm_p={"FWD": 0.001, "BWD": 0.001},
        stein_j={"FWD": 1.0, "BWD": 1.0},
        mdl_code={"FWD": 1.0, "BWD": 1.0},
        peit_h={"FWD": 1.0, "BWD": 1.0},
        igci_delta=0.0, l2_stat=0.0,
    )
    base.update(kw)
    return PairFeatures(**base)


CFG = Config(hsic_method="gamma")


# ---------------------------------------------------------------------------
# TierDecision invariants


def test_decision_rejects_commit_through_closed_gate():
    with pytest.raises(ValueError, match="gate rejected"):
        TierDecision("L_IGCI", "FWD", gate_passed=False)
    TierDecision("L_IGCI", "ABSTAIN", gate_passed=False)   # fine


def test_decision_rejects_unknown_outcome():
    with pytest.raises(ValueError, match="bad outcome"):
        TierDecision("L0", "MAYBE", gate_passed=True)


def test_tier_constants_are_consistent():
    assert set(SAFE_TIERS) < set(ALL_TIERS)
    assert set(GUARD_TIERS) < set(SAFE_TIERS)
    assert ALL_TIERS[0] == "L0" and ALL_TIERS[-1] == "L_PEIT"


# ---------------------------------------------------------------------------
# Gates on synthetic data


def _compute(x, y, seed=5):
    return PairFeatures.compute(
        x, y, VariableMeta.from_values(x), VariableMeta.from_values(y), CFG, seed)


def test_gates_stay_closed_on_linear_gaussian_pairs():
    rng = np.random.default_rng(2)
    x = rng.normal(size=1000)
    y = 1.5 * x + rng.normal(size=1000)
    f = _compute(x, y)
    for tier in SAFE_TIERS:
        assert not gate(tier, f, CFG), tier
    for tier in ("L0", "L1", "L2"):
        assert gate(tier, f, CFG), tier


def test_heteroscedastic_noise_opens_the_location_scale_gate():
    rng = np.random.default_rng(3)
    x = rng.normal(size=1000)
    y = x + (0.2 + np.abs(x)) * rng.normal(size=1000)
    f = _compute(x, y)
    assert gate("L_LSNM", f, CFG)


def test_integer_columns_keep_the_score_gate_closed():
    rng = np.random.default_rng(4)
    x = rng.poisson(4, size=1000).astype(float)
    y = (x + rng.poisson(2, size=1000)).astype(float)
    f = _compute(x, y)
    assert f.non_gaussian
    assert gate("L_IGCI", f, CFG)       # non-Gaussian is enough here
    assert not gate("L_STEIN", f, CFG)  # but integer support blocks the score tier


def test_gate_rejects_unknown_tier():
    with pytest.raises(ValueError, match="unknown tier"):
        gate("L99", make_features(), CFG)


# ---------------------------------------------------------------------------
# Deciders on hand-built features


def test_residual_independence_commits_on_exactly_one_accept():
    f = make_features(lin_p={"FWD": 0.5, "BWD": 0.001})
    assert tier_decide("L0", f, CFG).outcome == "FWD"
    f = make_features(lin_p={"FWD": 0.001, "BWD": 0.5})
    assert tier_decide("L0", f, CFG).outcome == "BWD"
    f = make_features(lin_p={"FWD": 0.5, "BWD": 0.5})
    assert tier_decide("L0", f, CFG).outcome == "ABSTAIN"
    f = make_features(lin_p={"FWD": 0.001, "BWD": 0.001})
    assert tier_decide("L0", f, CFG).outcome == "ABSTAIN"


def test_nonlinear_tier_needs_the_margin():
    wide = make_features(nl_p={"FWD": 0.30, "BWD": 0.01})
    assert tier_decide("L1", wide, CFG).outcome == "FWD"
    narrow = make_features(nl_p={"FWD": 0.09, "BWD": 0.01})
    d = tier_decide("L1", narrow, CFG)       # margin 0.08 < 0.10
    assert d.outcome == "ABSTAIN"
    assert d.scores["margin"] == pytest.approx(0.08)


def test_location_scale_tier_margin(monkeypatch):
    hetero = {"hetero_p": {"FWD": 0.001, "BWD": 0.5}}   # opens the gate
    f = make_features(lsnm_p={"FWD": 0.30, "BWD": 0.01}, **hetero)
    assert tier_decide("L_LSNM", f, CFG).outcome == "FWD"
    f = make_features(lsnm_p={"FWD": 0.055, "BWD": 0.02}, **hetero)
    assert tier_decide("L_LSNM", f, CFG).outcome == "ABSTAIN"   # margin 0.035 < 0.05


def test_slope_score_threshold_is_two_sided():
    ng = {"sw_x": 0.01}       # open the non-Gaussianity gates
    assert tier_decide("L_IGCI", make_features(igci_delta=0.4, **ng), CFG).outcome == "FWD"
    assert tier_decide("L_IGCI", make_features(igci_delta=-0.4, **ng), CFG).outcome == "BWD"
    assert tier_decide("L_IGCI", make_features(igci_delta=0.3, **ng), CFG).outcome == "ABSTAIN"


def test_score_information_ratio_direction():
    ng = {"sw_x": 0.01}
    f = make_features(stein_j={"FWD": 1.0, "BWD": 3.0}, **ng)    # ratio 3 > 2.5
    assert tier_decide("L_STEIN", f, CFG).outcome == "FWD"
    f = make_features(stein_j={"FWD": 3.0, "BWD": 1.0}, **ng)    # ratio 1/3 < 0.4
    assert tier_decide("L_STEIN", f, CFG).outcome == "BWD"
    f = make_features(stein_j={"FWD": 1.0, "BWD": 2.0}, **ng)
    assert tier_decide("L_STEIN", f, CFG).outcome == "ABSTAIN"
    f = make_features(stein_j={"FWD": 0.0, "BWD": 2.0}, **ng)
    assert tier_decide("L_STEIN", f, CFG).outcome == "ABSTAIN"
    f = make_features(stein_j={"FWD": float("inf"), "BWD": 2.0}, **ng)
    assert tier_decide("L_STEIN", f, CFG).outcome == "ABSTAIN"


def test_codelength_tier_prefers_the_shorter_description():
    ng = {"sw_x": 0.01}
    f = make_features(mdl_code={"FWD": 1.0, "BWD": 1.2}, **ng)   # delta 0.2 > 0.15
    assert tier_decide("L_MDL", f, CFG).outcome == "FWD"
    f = make_features(mdl_code={"FWD": 1.2, "BWD": 1.0}, **ng)
    assert tier_decide("L_MDL", f, CFG).outcome == "BWD"
    f = make_features(mdl_code={"FWD": 1.0, "BWD": 1.1}, **ng)
    assert tier_decide("L_MDL", f, CFG).outcome == "ABSTAIN"
    f = make_features(mdl_code={"FWD": float("-inf"), "BWD": 1.0}, **ng)
    assert tier_decide("L_MDL", f, CFG).outcome == "ABSTAIN"


def test_higher_order_cumulant_tier():
    assert tier_decide("L2", make_features(l2_stat=0.35), CFG).outcome == "FWD"
    assert tier_decide("L2", make_features(l2_stat=-0.35), CFG).outcome == "BWD"
    assert tier_decide("L2", make_features(l2_stat=0.25), CFG).outcome == "ABSTAIN"


def test_post_gaussianization_entropy_tier():
    ng = {"sw_x": 0.01}
    f = make_features(peit_h={"FWD": 1.0, "BWD": 1.2}, **ng)     # delta 0.2 > 0.12
    assert tier_decide("L_PEIT", f, CFG).outcome == "FWD"
    f = make_features(peit_h={"FWD": 1.2, "BWD": 1.0}, **ng)
    assert tier_decide("L_PEIT", f, CFG).outcome == "BWD"
    f = make_features(peit_h={"FWD": 1.0, "BWD": 1.1}, **ng)
    assert tier_decide("L_PEIT", f, CFG).outcome == "ABSTAIN"
    f = make_features(peit_h={"FWD": float("-inf"), "BWD": 1.0}, **ng)
    assert tier_decide("L_PEIT", f, CFG).outcome == "ABSTAIN"


def test_tier_decide_unknown_tier():
    with pytest.raises(ValueError, match="unknown tier"):
        tier_decide("L99", make_features(), CFG)


def test_closed_gate_abstains_without_reading_scores():
    f = make_features(igci_delta=5.0)      # would commit, but sw says Gaussian
    d = tier_decide("L_IGCI", f, CFG)
    assert d.outcome == "ABSTAIN" and not d.gate_passed and d.scores == {}


def test_decide_all_covers_every_tier_in_order():
    decisions = decide_all(make_features(), CFG)
    assert [d.tier for d in decisions] == list(ALL_TIERS)


# ---------------------------------------------------------------------------
# feature helpers


def test_rank_gaussianize_is_monotone_and_normal():
    rng = np.random.default_rng(0)
    v = rng.exponential(size=500)
    g = rank_gaussianize(v)
    order = np.argsort(v)
    assert np.all(np.diff(g[order]) > 0)
    assert abs(g.mean()) < 0.05
    assert abs(g.std() - 1.0) < 0.05


def test_score_information_orders_noise_families():
    """Empirical Fisher information: Gaussian lowest, heavier/lighter tails
    higher — the ordering the ratio decider relies on."""
    rng = np.random.default_rng(1)
    n = 2000
    j_gauss = score_fisher_information(rng.normal(size=n))
    j_laplace = score_fisher_information(rng.laplace(size=n) / np.sqrt(2))
    j_student = score_fisher_information(rng.standard_t(3, size=n))
    assert j_gauss < j_laplace
    assert j_gauss < j_student
    assert 0.4 < j_gauss < 1.2          # theory value 1, estimated with bias


def test_score_information_degenerate_input():
    assert score_fisher_information(np.zeros(100)) == float("inf")


def test_feature_snapshot_is_json_ready():
    import json
    json.dumps(make_features().snapshot())
