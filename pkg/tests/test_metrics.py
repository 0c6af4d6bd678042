"""Direction-aware precision/recall/F1 on recovered graphs."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgecert.metrics import evaluate
from edgecert.model import CertificateCode, Direction, PartialDag


def dag_with(commits, names=None, n=5):
    d = PartialDag(names or [f"v{k}" for k in range(n)])
    for p, c in commits:
        a, b = min(p, c), max(p, c)
        d.ensure_open(a, b)
        d.commit(a, b, Direction.FWD if p == a else Direction.BWD,
                 CertificateCode.RESOLVED_DECISIVE, "M3")
    return d


def test_perfect_recovery():
    truth = [(0, 1), (1, 2), (0, 3)]
    rep = evaluate(dag_with(truth), truth)
    assert rep.precision == 1.0 and rep.recall == 1.0 and rep.f1 == 1.0
    assert rep.committed == rep.correct == rep.gt_edges == 3
    assert not rep.empty_committed


def test_orientation_matters():
    rep = evaluate(dag_with([(1, 0)]), [(0, 1)])
    assert rep.precision == 0.0 and rep.recall == 0.0 and rep.f1 == 0.0
    assert rep.committed == 1 and rep.correct == 0


def test_partial_recovery_mixes():
    # two right, one wrong, one missing
    rep = evaluate(dag_with([(0, 1), (1, 2), (4, 3)]), [(0, 1), (1, 2), (3, 4)])
    assert rep.precision == pytest.approx(2 / 3)
    assert rep.recall == pytest.approx(2 / 3)
    assert rep.f1 == pytest.approx(2 / 3)


def test_f1_is_the_harmonic_mean():
    rep = evaluate(dag_with([(0, 1), (2, 3)]), [(0, 1), (1, 2), (2, 4), (0, 4)])
    p, r = rep.precision, rep.recall
    assert (p, r) == (0.5, 0.25)
    assert rep.f1 == pytest.approx(2 * p * r / (p + r))


def test_empty_committed_set_is_flagged():
    rep = evaluate(PartialDag(["a", "b"]), [(0, 1)])
    assert rep.empty_committed
    assert rep.precision == 0.0 and rep.recall == 0.0 and rep.f1 == 0.0


def test_empty_truth_gives_full_recall():
    rep = evaluate(PartialDag(["a", "b"]), [])
    assert rep.recall == 1.0 and rep.precision == 0.0
    assert rep.empty_committed and rep.gt_edges == 0


def test_by_mechanism_counts_provenance():
    d = dag_with([(0, 1)])
    d.ensure_open(1, 2)
    d.commit(1, 2, Direction.FWD, CertificateCode.RESOLVED_DECISIVE, "M11")
    rep = evaluate(d, [(0, 1), (1, 2)])
    assert rep.by_mechanism == {"M3": 1, "M11": 1}


def test_queries_passthrough_and_snapshot_rounding():
    rep = evaluate(dag_with([(0, 1), (0, 2), (1, 2)]), [(0, 1)], queries=4)
    assert rep.queries == 4
    snap = rep.snapshot()
    assert snap["precision"] == pytest.approx(0.333333)
    assert snap["queries"] == 4
    import json
    json.dumps(snap)


@settings(max_examples=50, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4)), max_size=8))
def test_precision_recall_bounds(edges):
    edges = {(a, b) for a, b in edges if a != b}
    # keep only one orientation per unordered pair, acyclic by index order
    commits = sorted({(min(a, b), max(a, b)) for a, b in edges})
    truth = [(0, 1), (1, 2)]
    rep = evaluate(dag_with(commits), truth)
    assert 0.0 <= rep.precision <= 1.0
    assert 0.0 <= rep.recall <= 1.0
    assert 0.0 <= rep.f1 <= 1.0
    assert rep.correct <= min(rep.committed, rep.gt_edges)
