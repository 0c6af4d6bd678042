"""Stateful expert-in-the-loop session: one discovery run, stepped one
oracle interaction at a time.

``SessionCore`` wraps the iterative loop so a driver (HTTP service, CLI,
test harness) can interleave question delivery and answer collection with
its own I/O.  The trace events it produces for a given answer sequence are
byte-identical to a batch ``run_iterative`` call with a backend giving the
same answers: both paths share the same round numbering, query selection,
and answer application code.

A session is fully recoverable from ``(dataset, config, trace)``: the trace
is the single source of truth for graph state and oracle bookkeeping, and
the per-pair question contexts are deterministic functions of the dataset
and config (they are also snapshotted alongside the trace so resume does
not have to re-run the per-pair statistics).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cascade import run_cascade
from .metrics import evaluate
from .model import (
    CertificateCode,
    Config,
    Dataset,
    EdgeStatus,
    Trace,
    replay,
)
from .oracle import (
    ApplyResult,
    EmptyResidualError,
    META_HUB,
    NODE_CHILDREN,
    OracleAnswer,
    OracleQuery,
    PER_EDGE,
    QueryLoopState,
    apply_answer,
    log_query,
    next_query,
    question_context,
    run_round_one,
    state_from_trace,
)
from .propagation import RunCache, run_auto_resolution
from .skeleton import build_skeleton, mediator_search

__all__ = [
    "AWAITING_ANSWER", "PROPAGATING", "DONE",
    "SessionCore", "StaleQueryError",
    "compute_contexts", "dataset_sha256",
    "parse_contexts", "serialize_contexts",
]

AWAITING_ANSWER = "AWAITING_ANSWER"
PROPAGATING = "PROPAGATING"
DONE = "DONE"


class StaleQueryError(Exception):
    """An answer referenced a query id that is not the pending one."""


def dataset_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# question contexts (numeric evidence embedded in question texts)
# ---------------------------------------------------------------------------

def compute_contexts(dataset: Dataset, config: Config) -> dict[tuple[int, int], dict]:
    """Per-pair question contexts, recomputed from scratch.

    Deterministic in (dataset, config); equals the contexts a fresh
    ``run_round_one`` pass would produce.  Used when resuming a session
    whose snapshot did not carry them.
    """
    skeleton = build_skeleton(dataset, config)
    mediators = mediator_search(skeleton, dataset, config)
    out: dict[tuple[int, int], dict] = {}
    for pair in skeleton.pairs:
        if mediators.get(pair) is not None:
            continue
        out[pair] = question_context(run_cascade(dataset, pair, config), config)
    return out


def serialize_contexts(contexts: dict[tuple[int, int], dict]) -> dict[str, dict]:
    return {f"{i}-{j}": dict(ctx) for (i, j), ctx in sorted(contexts.items())}


def parse_contexts(blob: dict[str, dict]) -> dict[tuple[int, int], dict]:
    out = {}
    for key, ctx in blob.items():
        i, j = key.split("-")
        out[(int(i), int(j))] = dict(ctx)
    return out


def _pending_from_trace(trace: Trace) -> OracleQuery | None:
    """Reconstruct the unanswered query a trace ends on, if any."""
    pending: OracleQuery | None = None
    for ev in trace:
        if ev.action not in ("QUERY", "ANSWER"):
            continue
        blob = json.loads(ev.detail) if ev.detail else {}
        if ev.action == "ANSWER":
            if pending is not None and blob.get("query_id") == pending.query_id:
                pending = None
            continue
        kind = blob.get("kind", PER_EDGE)
        cert = blob.get("certificate")
        pending = OracleQuery(
            kind,
            edge=(ev.edge_i, ev.edge_j) if kind == PER_EDGE else None,
            node=ev.edge_i if kind == NODE_CHILDREN else None,
            k=blob.get("k"),
            question_text=blob.get("question", ""),
            query_id=blob.get("query_id", 0),
            info_value=blob.get("info_value", 0.0),
            certificate=CertificateCode(cert) if cert else None,
        )
    return pending


# ---------------------------------------------------------------------------
# the session
# ---------------------------------------------------------------------------

@dataclass
class SessionCore:
    """One discovery run with at most one pending oracle query.

    Lifecycle: ``fresh`` runs the data-only rounds and selects the first
    question; ``submit`` applies an answer (propagating to fixpoint) and
    selects the next one; ``resume`` rebuilds the same state from a saved
    trace.  Status is AWAITING_ANSWER while a query is pending, PROPAGATING
    transiently inside ``submit``, and DONE when no open candidates remain
    (or the query budget is exhausted).
    """

    dataset: Dataset
    config: Config
    trace: Trace
    dag: object
    state: QueryLoopState
    contexts: dict[tuple[int, int], dict]
    gt_edges: list[tuple[int, int]] | None = None
    pending: OracleQuery | None = None
    round_no: int = 3
    status: str = AWAITING_ANSWER
    cache: RunCache = field(default_factory=RunCache)

    # -- construction --------------------------------------------------------

    @classmethod
    def fresh(cls, dataset: Dataset, config: Config,
              gt_edges=None) -> "SessionCore":
        """Round 1 (data-only cascade) + round 2 (auto-propagation), then
        select the first oracle question."""
        trace = Trace()
        cache = RunCache()
        dag, _skeleton, _mediators, verdicts = run_round_one(dataset, config, trace)
        if config.propagation_enabled:
            run_auto_resolution(dag, dataset, config, trace, 2, cache)
        contexts = {p: question_context(v, config) for p, v in verdicts.items()}
        core = cls(dataset=dataset, config=config, trace=trace, dag=dag,
                   state=QueryLoopState(), contexts=contexts,
                   gt_edges=list(gt_edges) if gt_edges is not None else None,
                   round_no=3, cache=cache)
        core._advance()
        return core

    @classmethod
    def resume(cls, dataset: Dataset, config: Config, trace: Trace,
               gt_edges=None,
               contexts: dict[tuple[int, int], dict] | None = None,
               ) -> "SessionCore":
        """Rebuild a session from its persisted trace.

        The graph is replayed event by event (validating every transition),
        the oracle bookkeeping is folded from the query/answer events, and
        the pending query — when the trace ends on an unanswered QUERY — is
        reconstructed verbatim from its logged detail, so the resumed
        session asks exactly the question the interrupted one was waiting
        on.  Contexts are taken from the snapshot when available, otherwise
        recomputed (deterministically) from the dataset.
        """
        dag = replay(trace, dataset.names)
        state = state_from_trace(trace)
        pending = _pending_from_trace(trace)
        if contexts is None:
            contexts = compute_contexts(dataset, config)
        max_round = max((ev.round for ev in trace), default=1)
        core = cls(dataset=dataset, config=config, trace=trace, dag=dag,
                   state=state, contexts=contexts,
                   gt_edges=list(gt_edges) if gt_edges is not None else None,
                   pending=pending, cache=RunCache())
        if pending is not None:
            core.round_no = max_round
            core.status = AWAITING_ANSWER
        else:
            # one query/answer exchange per round, starting at round 3
            core.round_no = max(2, max_round) + 1
            core._advance()
        return core

    # -- stepping -------------------------------------------------------------

    def _advance(self) -> None:
        """Select and log the next query, or mark the session DONE."""
        budget = self.config.query_budget
        if budget is not None and self.trace.query_count >= budget:
            self.pending, self.status = None, DONE
            return
        try:
            query = next_query(self.dag, self.dataset, self.config,
                               self.state, self.cache, self.contexts)
        except EmptyResidualError:
            self.pending, self.status = None, DONE
            return
        log_query(self.trace, self.round_no, query)
        self.pending, self.status = query, AWAITING_ANSWER

    def submit(self, query_id: int, answer: OracleAnswer,
               ) -> tuple[ApplyResult, list]:
        """Apply an answer to the pending query and select the next one.

        Returns the propagation result and the trace events this exchange
        appended (answer, oracle mutation, auto-resolution, next query).
        Raises ``StaleQueryError`` when ``query_id`` does not match the
        pending query (or nothing is pending).
        """
        if self.pending is None:
            raise StaleQueryError("session has no pending query")
        if query_id != self.pending.query_id:
            raise StaleQueryError(
                f"answer references query {query_id}, "
                f"pending query is {self.pending.query_id}")
        query = self.pending
        self.status = PROPAGATING
        mark = len(self.trace)
        result = apply_answer(self.dag, self.dataset, self.config, query,
                              answer, self.state, self.trace, self.round_no,
                              self.cache)
        self.round_no += 1
        self.pending = None
        self._advance()
        return result, self.trace.events[mark:]

    def run_to_completion(self, backend) -> int:
        """Drain the session against an oracle backend; returns the number
        of exchanges performed (continuation of an interrupted run)."""
        steps = 0
        while self.status != DONE:
            answer = backend.answer(self.pending)
            self.submit(self.pending.query_id, answer)
            steps += 1
        return steps

    # -- reporting ------------------------------------------------------------

    def counts(self) -> dict:
        return {
            "committed": len(self.dag.pairs_with(EdgeStatus.COMMITTED)),
            "open": len(self.dag.open_pairs()),
            "dropped": len(self.dag.pairs_with(EdgeStatus.DROPPED)),
            "queries": self.trace.query_count,
            "bits": self.trace.bits_total,
        }

    def metrics(self) -> dict:
        """Running counts plus a ground-truth evaluation when available."""
        payload = dict(self.counts())
        payload["eval"] = (
            evaluate(self.dag, self.gt_edges,
                     queries=self.trace.query_count).snapshot()
            if self.gt_edges is not None else None)
        return payload
