"""Direction-aware evaluation of a recovered graph against a reference
edge list."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import EdgeStatus, PartialDag

__all__ = ["EvalReport", "evaluate"]


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    committed: int
    correct: int
    gt_edges: int
    queries: int = 0
    empty_committed: bool = False
    by_mechanism: dict = field(default_factory=dict)

    def snapshot(self) -> dict:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
            "committed": self.committed,
            "correct": self.correct,
            "gt_edges": self.gt_edges,
            "queries": self.queries,
            "empty_committed": self.empty_committed,
            "by_mechanism": dict(sorted(self.by_mechanism.items())),
        }


def evaluate(dag: PartialDag, gt_edges, queries: int = 0) -> EvalReport:
    """Edge-wise direction-aware precision/recall/F1 against ``gt_edges``.

    An edge counts as correct only with the right orientation (a->b and b->a
    are different edges).  An empty committed set makes precision undefined;
    it is reported as 0.0 with ``empty_committed`` set.
    """
    truth = {(int(a), int(b)) for a, b in gt_edges}
    committed = dag.committed_edges()
    correct = sum(1 for e in committed if e in truth)

    empty = len(committed) == 0
    precision = 0.0 if empty else correct / len(committed)
    recall = 1.0 if not truth else correct / len(truth)
    if empty and truth:
        recall = 0.0
    f1 = (0.0 if precision + recall == 0
          else 2 * precision * recall / (precision + recall))

    by_mechanism: dict[str, int] = {}
    for pair, st in sorted(dag.states.items()):
        if st.status == EdgeStatus.COMMITTED:
            key = st.provenance or "UNKNOWN"
            by_mechanism[key] = by_mechanism.get(key, 0) + 1

    return EvalReport(precision=precision, recall=recall, f1=f1,
                      committed=len(committed), correct=correct,
                      gt_edges=len(truth), queries=queries,
                      empty_committed=empty, by_mechanism=by_mechanism)
