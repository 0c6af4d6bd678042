"""Zero-query auto-resolution: acyclicity/Meek propagation, the
confirm-ratio gate, parent-conditioned re-audit, and transitive
d-separation."""

import numpy as np
import pytest

from edgecert.model import Config, Direction, EdgeStatus, PartialDag, Trace
from edgecert.propagation import (
    RULE_ACYCLICITY,
    RULE_R1,
    RULE_R3,
    RULE_REAUDIT,
    RULE_TRANSITIVE_DSEP,
    RunCache,
    propagate,
    reaudit_conditioned,
    run_auto_resolution,
    transitive_dsep,
)

from conftest import make_dataset
from _graphs import brute_force_closure

CFG = Config(hsic_method="gamma")
UNGATED = CFG.replace(confirm_ratio=0.0)


def _noise_dataset(v, n=60, seed=0):
    rng = np.random.default_rng(seed)
    return make_dataset({f"v{k}": rng.normal(size=n) for k in range(v)})


def _dag(n, open_pairs=(), commits=()):
    d = PartialDag([f"v{k}" for k in range(n)])
    for i, j in open_pairs:
        d.ensure_open(i, j)
    for i, j in commits:          # (parent, child)
        a, b = min(i, j), max(i, j)
        d.commit(a, b, Direction.FWD if i < j else Direction.BWD, None, "M3")
    return d


# ---------------------------------------------------------------------------
# propagate


def test_propagate_without_commits_does_nothing():
    dag = _dag(3, open_pairs=[(0, 1), (1, 2)])
    report = propagate(dag, _noise_dataset(3), UNGATED)
    assert report.new_commits == [] and report.resolution_count == 0
    assert dag.open_pairs() == [(0, 1), (1, 2)]


def test_propagation_can_be_disabled():
    dag = _dag(3, open_pairs=[(0, 1), (1, 2), (0, 2)],
               commits=[(0, 1), (1, 2)])
    off = UNGATED.replace(propagation_enabled=False)
    report = propagate(dag, _noise_dataset(3), off)
    assert report.new_commits == []
    assert dag.state(0, 2).status is EdgeStatus.OPEN


def test_acyclicity_orients_forced_edges_without_the_gate():
    # 0 -> 1 -> 2 committed; (0, 2) must point forward regardless of data or
    # confirm-ratio setting
    dag = _dag(3, open_pairs=[(0, 1), (1, 2), (0, 2)],
               commits=[(0, 1), (1, 2)])
    strict = CFG.replace(confirm_ratio=1e9)
    trace = Trace()
    report = propagate(dag, _noise_dataset(3), strict, trace=trace, round_no=2)
    assert report.new_commits == [((0, 2), Direction.FWD, RULE_ACYCLICITY)]
    assert dag.committed_edges() == [(0, 1), (0, 2), (1, 2)]
    assert (0, 2) not in report.confirm_ratios
    ev = [e for e in trace if e.action == "COMMIT_FWD"][0]
    assert ev.mechanism == "M6" and '"ACYCLICITY"' in ev.detail


def test_acyclicity_orients_the_reverse_case():
    # committed 2 -> 1 -> 0: pair (0, 2) is forced to 2 -> 0 (BWD)
    dag = _dag(3, open_pairs=[(0, 1), (1, 2), (0, 2)],
               commits=[(2, 1), (1, 0)])
    report = propagate(dag, _noise_dataset(3), UNGATED)
    assert ((0, 2), Direction.BWD, RULE_ACYCLICITY) in report.new_commits


def _tanh_chain(seed=21, n=1000):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = np.tanh(1.5 * a) + 0.3 * rng.normal(size=n)
    c = np.tanh(1.5 * b) + 0.3 * rng.normal(size=n)
    return make_dataset({"a": a, "b": b, "c": c})


def test_r1_commits_and_records_the_confirm_ratio():
    # a -> b committed, (b, c) open, a and c non-adjacent
    ds = _tanh_chain()
    dag = _dag(3, open_pairs=[(0, 1), (1, 2)], commits=[(0, 1)])
    trace = Trace()
    report = propagate(dag, ds, CFG, trace=trace, round_no=2)
    assert report.new_commits == [((1, 2), Direction.FWD, RULE_R1)]
    assert report.confirm_ratios[(1, 2)] >= CFG.confirm_ratio
    ev = [e for e in trace if e.action == "COMMIT_FWD"][0]
    assert '"confirm_ratio"' in ev.detail and '"MEEK_R1"' in ev.detail


def test_r1_gate_blocks_statistically_reversible_directions():
    # same structure but linear-Gaussian data: the candidate direction is not
    # favored by the bivariate evidence, so the commit is withheld
    rng = np.random.default_rng(22)
    a = rng.normal(size=1000)
    b = a + rng.normal(size=1000)
    c = b + rng.normal(size=1000)
    ds = make_dataset({"a": a, "b": b, "c": c})
    dag = _dag(3, open_pairs=[(0, 1), (1, 2)], commits=[(0, 1)])
    report = propagate(dag, ds, CFG)
    assert report.new_commits == []
    assert dag.state(1, 2).status is EdgeStatus.OPEN


def test_confirm_ratio_zero_disables_the_gate():
    dag = _dag(3, open_pairs=[(0, 1), (1, 2)], commits=[(0, 1)])
    report = propagate(dag, _noise_dataset(3), UNGATED)
    assert report.new_commits == [((1, 2), Direction.FWD, RULE_R1)]
    assert report.confirm_ratios == {}        # nothing was computed


def test_r1_requires_nonadjacent_source():
    # (a, c) still open means a and c are adjacent: R1 must not fire
    dag = _dag(3, open_pairs=[(0, 1), (1, 2), (0, 2)], commits=[(0, 1)])
    report = propagate(dag, _noise_dataset(3), UNGATED)
    assert report.new_commits == []


def test_r3_orients_the_hub_edge():
    # c -> b and d -> b committed; (a, b), (a, c), (a, d) open; c, d
    # non-adjacent: orient a -> b
    dag = _dag(4, open_pairs=[(0, 1), (0, 2), (0, 3)], commits=[(2, 1), (3, 1)])
    report = propagate(dag, _noise_dataset(4), UNGATED)
    assert ((0, 1), Direction.FWD, RULE_R3) in report.new_commits
    assert dag.state(0, 1).provenance == RULE_R3


def test_r3_needs_nonadjacent_parents():
    dag = _dag(4, open_pairs=[(0, 1), (0, 2), (0, 3), (2, 3)],
               commits=[(2, 1), (3, 1)])
    report = propagate(dag, _noise_dataset(4), UNGATED)
    assert all(rule != RULE_R3 for _, _, rule in report.new_commits)


def test_propagation_runs_to_fixpoint():
    # one call chains two R1 applications: a -> b orients (b, c), which then
    # orients (c, d)
    dag = _dag(4, open_pairs=[(0, 1), (1, 2), (2, 3)], commits=[(0, 1)])
    report = propagate(dag, _noise_dataset(4), UNGATED)
    rules = {pair: rule for pair, _, rule in report.new_commits}
    assert rules == {(1, 2): RULE_R1, (2, 3): RULE_R1}
    assert dag.committed_edges() == [(0, 1), (1, 2), (2, 3)]


def test_meek_closure_matches_brute_force():
    """With the confirm gate off, propagation equals an independent
    brute-force fixpoint of {acyclicity, R1, R3} on random graphs."""
    rng = np.random.default_rng(77)
    for trial in range(20):
        n = 5
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)
                 if rng.random() < 0.45]
        if not pairs:
            continue
        k = rng.integers(0, len(pairs) + 1)
        order = rng.permutation(n)          # hidden topological order
        rank = {v: r for r, v in enumerate(order)}
        # choose k seed commits consistent with the hidden order
        committed = {}
        seed_pairs = [pairs[idx] for idx in rng.choice(len(pairs), size=k, replace=False)]
        for (i, j) in seed_pairs:
            committed[(i, j)] = (i, j) if rank[i] < rank[j] else (j, i)

        dag = PartialDag([f"v{q}" for q in range(n)])
        for i, j in pairs:
            dag.ensure_open(i, j)
        for (i, j), (p, c) in committed.items():
            dag.commit(i, j, Direction.FWD if p == i else Direction.BWD,
                       None, "M3")
        propagate(dag, _noise_dataset(n, seed=trial), UNGATED)

        expected = brute_force_closure(pairs, list(committed.values()))
        got = {}
        for (i, j) in pairs:
            st = dag.state(i, j)
            if st.status is EdgeStatus.COMMITTED:
                got[(i, j)] = (i, j) if st.direction is Direction.FWD else (j, i)
        assert got == expected, f"trial {trial}: {got} != {expected}"


# ---------------------------------------------------------------------------
# reaudit_conditioned


def test_reaudit_skips_pairs_without_committed_parents():
    dag = _dag(3, open_pairs=[(0, 1), (1, 2)])
    report = reaudit_conditioned(dag, _noise_dataset(3), CFG)
    assert report.new_commits == []


def _confounded_fork(seed=23, n=1200):
    """c -> a and c -> b committed, plus a true direct a -> b edge that the
    bivariate cascade could not resolve.  Conditioning both endpoints on c
    leaves an identifiable linear non-Gaussian pair."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    a = 0.8 * c + 0.5 * rng.normal(size=n)
    u = (rng.uniform(size=n) - 0.5)
    b = a + 0.6 * c + u
    ds = make_dataset({"a": a, "b": b, "c": c})
    dag = _dag(3, open_pairs=[(0, 1), (0, 2), (1, 2)],
               commits=[(2, 0), (2, 1)])
    return ds, dag


def test_reaudit_resolves_a_confounded_direct_effect():
    ds, dag = _confounded_fork()
    trace = Trace()
    report = reaudit_conditioned(dag, ds, CFG, trace=trace, round_no=2)
    assert report.new_commits == [((0, 1), Direction.FWD, RULE_REAUDIT)]
    st = dag.state(0, 1)
    assert st.status is EdgeStatus.COMMITTED and st.provenance == RULE_REAUDIT
    assert [e.mechanism for e in trace if e.action == "COMMIT_FWD"] == ["M7"]


# ---------------------------------------------------------------------------
# transitive_dsep


def _gauss_chain(seed=22, n=1000):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = a + rng.normal(size=n)
    c = b + rng.normal(size=n)
    return make_dataset({"a": a, "b": b, "c": c})


def test_dsep_drops_pairs_shielded_by_committed_parents():
    ds = _gauss_chain()
    dag = _dag(3, open_pairs=[(0, 1), (1, 2), (0, 2)],
               commits=[(0, 1), (1, 2)])
    trace = Trace()
    report = transitive_dsep(dag, ds, CFG, trace=trace, round_no=2)
    assert report.new_commits == [((0, 2), None, RULE_TRANSITIVE_DSEP)]
    assert dag.state(0, 2).status is EdgeStatus.DROPPED
    ev = [e for e in trace if e.action == "DROP"][0]
    assert ev.mechanism == "M8" and '"cond": [1]' in ev.detail


def test_dsep_needs_committed_parents():
    ds = _gauss_chain()
    dag = _dag(3, open_pairs=[(0, 2)])
    report = transitive_dsep(dag, ds, CFG)
    assert report.new_commits == []
    assert dag.state(0, 2).status is EdgeStatus.OPEN


def test_dsep_keeps_dependent_pairs():
    # v-structure: parents 0 and 1 of 2; conditioning (0, 1) on their child's
    # other parent does not separate a truly dependent pair
    rng = np.random.default_rng(31)
    a = rng.normal(size=1000)
    b = np.tanh(a) + 0.4 * rng.normal(size=1000)
    ds = make_dataset({"a": a, "b": b, "c": a + b + 0.5 * rng.normal(size=1000)})
    dag = _dag(3, open_pairs=[(0, 1), (0, 2), (1, 2)],
               commits=[(0, 2), (1, 2)])
    report = transitive_dsep(dag, ds, CFG)
    # conditioning on {} for (0,1): no committed parents of 0 or 1 -> skip
    assert report.new_commits == []


# ---------------------------------------------------------------------------
# run_auto_resolution


def test_auto_resolution_reaches_a_joint_fixpoint():
    """The re-audit commit (M7) enables a d-separation drop (M8) in the same
    call: a -> b resolved makes b a committed parent for (b, x) testing."""
    ds, dag = _confounded_fork()
    report = run_auto_resolution(dag, ds, CFG)
    rules = {pair: rule for pair, _, rule in report.new_commits}
    assert rules[(0, 1)] == RULE_REAUDIT
    assert dag.state(0, 1).status is EdgeStatus.COMMITTED


def test_auto_resolution_can_exclude_the_reaudit():
    ds, dag = _confounded_fork()
    report = run_auto_resolution(dag, ds, CFG, include_reaudit=False)
    assert all(rule != RULE_REAUDIT for _, _, rule in report.new_commits)
    assert dag.state(0, 1).status is EdgeStatus.OPEN


def test_report_merge_and_snapshot():
    ds, dag = _confounded_fork()
    report = run_auto_resolution(dag, ds, CFG)
    snap = report.snapshot()
    assert any(c["rule"] == RULE_REAUDIT for c in snap["new_commits"])
    import json
    json.dumps(snap)
