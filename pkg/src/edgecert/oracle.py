"""Expert-oracle layer: query types, backends, information-value ordering,
the iterative resolution loop, the pure hub protocol, and missing-edge
recovery.

Three interaction primitives exist.  A PER_EDGE query asks one question about
one undirected candidate and receives FWD / BWD / ABSENT / UNKNOWN.  A
META_HUB query asks for the top-k nodes by out-degree (one interaction,
answer is an ordered node list).  A NODE_CHILDREN query asks for the direct
children of one node (one interaction, answer is a node subset), committing
every outgoing edge of that node at once.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .cascade import CascadeVerdict, run_cascade
from .model import (
    Answer,
    CertificateCode,
    Config,
    Dataset,
    Direction,
    EdgeStatus,
    PartialDag,
    Trace,
    TraceEvent,
    TraceMismatch,
    canonical,
)
from .propagation import PropagationReport, RunCache, run_auto_resolution
from .questions import render_meta_hub, render_node_children, render_question
from .skeleton import Skeleton, build_skeleton, mediator_search

__all__ = [
    "PER_EDGE", "META_HUB", "NODE_CHILDREN",
    "OracleQuery", "OracleAnswer", "OracleBackend",
    "GroundTruthBackend", "ScriptedBackend", "InteractiveBackend",
    "RecordingBackend",
    "EmptyResidualError", "ImperfectOracleError", "ScriptMismatchError",
    "QueryLoopState", "ApplyResult", "IterationResult", "PureResult",
    "info_value", "next_query", "apply_answer", "question_context",
    "log_query", "log_answer", "state_from_trace",
    "run_round_one", "run_iterative", "run_pure_metahub", "recover_missing",
]

PER_EDGE = "PER_EDGE"
META_HUB = "META_HUB"
NODE_CHILDREN = "NODE_CHILDREN"

_QUERY_KINDS = (PER_EDGE, META_HUB, NODE_CHILDREN)


class EmptyResidualError(RuntimeError):
    """next_query was called with no open candidates left."""


class ImperfectOracleError(RuntimeError):
    """The pure hub protocol got answers inconsistent with any single DAG."""


class ScriptMismatchError(RuntimeError):
    """A scripted answer file does not line up with the queries issued."""


# --------------------------------------------------------------------------
# query / answer payloads
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleQuery:
    kind: str
    edge: tuple[int, int] | None = None     # PER_EDGE
    node: int | None = None                 # NODE_CHILDREN
    k: int | None = None                    # META_HUB
    question_text: str = ""
    query_id: int = 0
    info_value: float = 0.0                 # PER_EDGE ordering score
    certificate: CertificateCode | None = None

    def __post_init__(self) -> None:
        if self.kind not in _QUERY_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.kind == PER_EDGE and self.edge is None:
            raise ValueError("PER_EDGE query needs an edge")
        if self.kind == NODE_CHILDREN and self.node is None:
            raise ValueError("NODE_CHILDREN query needs a node")


@dataclass(frozen=True)
class OracleAnswer:
    kind: str
    response: Answer | None = None          # PER_EDGE payload
    nodes: tuple[int, ...] = ()             # META_HUB (ordered) / NODE_CHILDREN

    def __post_init__(self) -> None:
        if self.kind not in _QUERY_KINDS:
            raise ValueError(f"unknown answer kind {self.kind!r}")
        if self.kind == PER_EDGE and self.response is None:
            raise ValueError("PER_EDGE answer needs a response value")
        if self.kind == META_HUB and len(set(self.nodes)) != len(self.nodes):
            raise ValueError("META_HUB answer must list distinct nodes")


# --------------------------------------------------------------------------
# backends
# --------------------------------------------------------------------------

class OracleBackend:
    """Behavioral interface: one method per query kind plus a dispatcher."""

    def per_edge(self, query: OracleQuery) -> OracleAnswer:
        raise NotImplementedError

    def meta_hub(self, query: OracleQuery) -> OracleAnswer:
        raise NotImplementedError

    def node_children(self, query: OracleQuery) -> OracleAnswer:
        raise NotImplementedError

    def answer(self, query: OracleQuery) -> OracleAnswer:
        if query.kind == PER_EDGE:
            return self.per_edge(query)
        if query.kind == META_HUB:
            return self.meta_hub(query)
        return self.node_children(query)


class GroundTruthBackend(OracleBackend):
    """Simulated expert that reads a fixed directed graph.

    All answers are consistent with that one graph: per-edge answers report
    the true direction or absence, the hub answer lists the top-k nodes by
    out-degree (ties broken by node index), and children answers enumerate
    the node's true direct children.
    """

    def __init__(self, edges, n_vertices: int):
        self.edges = frozenset((int(a), int(b)) for a, b in edges)
        self.n_vertices = int(n_vertices)
        for a, b in self.edges:
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise ValueError(f"edge ({a},{b}) outside vertex range")
            if a == b:
                raise ValueError("self-loop in ground truth")

    def out_degree(self, v: int) -> int:
        return sum(1 for a, _ in self.edges if a == v)

    def non_leaves(self) -> tuple[int, ...]:
        """Nodes with at least one child, ordered by (-out_degree, index)."""
        withkids = [v for v in range(self.n_vertices) if self.out_degree(v)]
        return tuple(sorted(withkids, key=lambda v: (-self.out_degree(v), v)))

    def per_edge(self, query: OracleQuery) -> OracleAnswer:
        i, j = query.edge
        if (i, j) in self.edges:
            resp = Answer.FWD
        elif (j, i) in self.edges:
            resp = Answer.BWD
        else:
            resp = Answer.ABSENT
        return OracleAnswer(PER_EDGE, response=resp)

    def meta_hub(self, query: OracleQuery) -> OracleAnswer:
        hubs = self.non_leaves()
        if query.k is not None:
            ranked = sorted(range(self.n_vertices),
                            key=lambda v: (-self.out_degree(v), v))
            hubs = tuple(ranked[:query.k])
        return OracleAnswer(META_HUB, nodes=hubs)

    def node_children(self, query: OracleQuery) -> OracleAnswer:
        kids = tuple(sorted(b for a, b in self.edges if a == query.node))
        return OracleAnswer(NODE_CHILDREN, nodes=kids)


class ScriptedBackend(OracleBackend):
    """Replays a recorded answer sequence, validating each query matches.

    Rows are (query_kind, target, answer): target is "a-b" for PER_EDGE,
    a node name for NODE_CHILDREN, empty for META_HUB; answer is one of
    FWD/BWD/ABSENT/UNKNOWN for PER_EDGE and a semicolon-joined name list
    for the other kinds (empty string = empty set).
    """

    def __init__(self, rows: list[tuple[str, str, str]], names: list[str]):
        self.rows = list(rows)
        self.names = list(names)
        self.index = {n: k for k, n in enumerate(names)}
        self.cursor = 0

    @classmethod
    def from_csv(cls, path: str, names: list[str]) -> "ScriptedBackend":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and [h.strip() for h in header[:1]] != ["query_kind"]:
                rows.append(tuple(c.strip() for c in header))  # headerless file
            for row in reader:
                if row and any(c.strip() for c in row):
                    rows.append(tuple(c.strip() for c in row))
        return cls(rows, names)

    def _next(self, query: OracleQuery) -> tuple[str, str, str]:
        if self.cursor >= len(self.rows):
            raise ScriptMismatchError(
                f"script exhausted at query {query.query_id} ({query.kind})")
        row = self.rows[self.cursor]
        self.cursor += 1
        if len(row) < 3:
            raise ScriptMismatchError(f"malformed script row {row!r}")
        kind, target, answer = row[0], row[1], row[2]
        if kind != query.kind:
            raise ScriptMismatchError(
                f"script row {self.cursor} is {kind}, query is {query.kind}")
        return kind, target, answer

    def _node_set(self, text: str) -> tuple[int, ...]:
        if not text:
            return ()
        out = []
        for name in text.split(";"):
            name = name.strip()
            if name not in self.index:
                raise ScriptMismatchError(f"unknown variable {name!r} in script")
            out.append(self.index[name])
        return tuple(out)

    def per_edge(self, query: OracleQuery) -> OracleAnswer:
        _, target, answer = self._next(query)
        i, j = query.edge
        expected = {f"{self.names[i]}-{self.names[j]}",
                    f"{self.names[j]}-{self.names[i]}"}
        if target not in expected:
            raise ScriptMismatchError(
                f"script row {self.cursor} targets {target!r}, "
                f"query is {self.names[i]}-{self.names[j]}")
        try:
            resp = Answer(answer)
        except ValueError as exc:
            raise ScriptMismatchError(f"bad per-edge answer {answer!r}") from exc
        return OracleAnswer(PER_EDGE, response=resp)

    def meta_hub(self, query: OracleQuery) -> OracleAnswer:
        _, _, answer = self._next(query)
        return OracleAnswer(META_HUB, nodes=self._node_set(answer))

    def node_children(self, query: OracleQuery) -> OracleAnswer:
        _, target, answer = self._next(query)
        if target != self.names[query.node]:
            raise ScriptMismatchError(
                f"script row {self.cursor} targets node {target!r}, "
                f"query is {self.names[query.node]!r}")
        return OracleAnswer(NODE_CHILDREN, nodes=self._node_set(answer))


class InteractiveBackend(OracleBackend):
    """Delegates each query to a callable (session service, stdin prompt)."""

    def __init__(self, responder):
        self.responder = responder

    def per_edge(self, query: OracleQuery) -> OracleAnswer:
        return self.responder(query)

    def meta_hub(self, query: OracleQuery) -> OracleAnswer:
        return self.responder(query)

    def node_children(self, query: OracleQuery) -> OracleAnswer:
        return self.responder(query)


class RecordingBackend(OracleBackend):
    """Wraps another backend, recording rows a ScriptedBackend can replay."""

    def __init__(self, inner: OracleBackend, names: list[str]):
        self.inner = inner
        self.names = list(names)
        self.rows: list[tuple[str, str, str]] = []

    def _record(self, query: OracleQuery, ans: OracleAnswer) -> OracleAnswer:
        if query.kind == PER_EDGE:
            i, j = query.edge
            target = f"{self.names[i]}-{self.names[j]}"
            payload = ans.response.value
        else:
            target = self.names[query.node] if query.kind == NODE_CHILDREN else ""
            payload = ";".join(self.names[v] for v in ans.nodes)
        self.rows.append((query.kind, target, payload))
        return ans

    def per_edge(self, query):
        return self._record(query, self.inner.per_edge(query))

    def meta_hub(self, query):
        return self._record(query, self.inner.meta_hub(query))

    def node_children(self, query):
        return self._record(query, self.inner.node_children(query))

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_kind", "target", "answer"])
            writer.writerows(self.rows)


# --------------------------------------------------------------------------
# information-value ordering
# --------------------------------------------------------------------------

def info_value(edge: tuple[int, int], dag: PartialDag, dataset: Dataset,
               config: Config, cache: RunCache | None = None) -> float:
    """Worst-case number of free auto-resolutions an answer to ``edge`` buys.

    Each direction is committed hypothetically on a copy; propagation and
    transitive d-separation run to fixpoint (no trace, no conditional
    re-audit) and the derived resolutions are counted.  The default strategy
    takes the minimum over the two answers — the guaranteed floor no matter
    what the expert says; the "expected" strategy takes their mean.
    """
    cache = cache or RunCache()
    counts = []
    for direction in (Direction.FWD, Direction.BWD):
        dup = dag.copy()
        try:
            dup.commit(edge[0], edge[1], direction,
                       CertificateCode.RESOLVED_DECISIVE, "hypothetical")
        except TraceMismatch:
            continue                      # direction impossible: cycle
        report = run_auto_resolution(dup, dataset, config, trace=None,
                                     round_no=0, cache=cache,
                                     include_reaudit=False)
        counts.append(report.resolution_count)
    if not counts:
        return 0.0
    if config.info_value_strategy == "expected":
        return sum(counts) / len(counts)
    return float(min(counts))


def question_context(verdict: CascadeVerdict | None, config: Config) -> dict:
    """Numeric evidence for question templates, from a cascade verdict."""
    if verdict is None or verdict.features is None:
        return {}
    f = verdict.features
    ps = [f.nl_p[Direction.FWD], f.nl_p[Direction.BWD]]
    return {
        "accept_p": max(ps),
        "reject_p": min(ps),
        "hoc_stat": abs(f.l2_stat),
        "hoc_threshold": config.l2_threshold,
    }


# --------------------------------------------------------------------------
# loop state & trace logging
# --------------------------------------------------------------------------

@dataclass
class QueryLoopState:
    """Per-run oracle bookkeeping that is not part of the DAG itself."""
    hubs: tuple[int, ...] | None = None
    pending_hubs: list[int] = field(default_factory=list)
    queried_children: set[int] = field(default_factory=set)
    not_outgoing: set[tuple[int, int]] = field(default_factory=set)
    inconsistent: set[tuple[int, int]] = field(default_factory=set)
    next_query_id: int = 1

    def take_query_id(self) -> int:
        qid = self.next_query_id
        self.next_query_id += 1
        return qid


def log_query(trace: Trace | None, round_no: int, query: OracleQuery) -> None:
    """One QUERY event per interaction; each interaction is charged 1 bit."""
    if trace is None:
        return
    i, j = query.edge if query.edge is not None else (
        query.node if query.node is not None else -1, -1)
    mechanism = {PER_EDGE: "M11", META_HUB: "M13", NODE_CHILDREN: "M14"}[query.kind]
    detail = {"kind": query.kind, "query_id": query.query_id,
              "question": query.question_text}
    if query.kind == PER_EDGE:
        detail["info_value"] = query.info_value
        detail["certificate"] = query.certificate.value if query.certificate else None
    if query.k is not None:
        detail["k"] = query.k
    trace.append(TraceEvent(round=round_no, mechanism=mechanism,
                            edge_i=i, edge_j=j, action="QUERY",
                            detail=json.dumps(detail, sort_keys=True), bits=1.0))


def log_answer(trace: Trace | None, round_no: int, query: OracleQuery,
               answer: OracleAnswer, extra: dict | None = None) -> None:
    if trace is None:
        return
    i, j = query.edge if query.edge is not None else (
        query.node if query.node is not None else -1, -1)
    mechanism = {PER_EDGE: "M11", META_HUB: "M13", NODE_CHILDREN: "M14"}[query.kind]
    detail = {"kind": query.kind, "query_id": query.query_id}
    if answer.response is not None:
        detail["answer"] = answer.response.value
    if query.kind != PER_EDGE:
        detail["nodes"] = list(answer.nodes)
    detail.update(extra or {})
    trace.append(TraceEvent(round=round_no, mechanism=mechanism,
                            edge_i=i, edge_j=j, action="ANSWER",
                            detail=json.dumps(detail, sort_keys=True), bits=0.0))


def state_from_trace(trace: Trace) -> QueryLoopState:
    """Rebuild oracle bookkeeping from the trace (for session resume)."""
    state = QueryLoopState()
    for ev in trace:
        if ev.action not in ("QUERY", "ANSWER"):
            continue
        blob = json.loads(ev.detail) if ev.detail else {}
        qid = blob.get("query_id", 0)
        state.next_query_id = max(state.next_query_id, qid + 1)
        if ev.action == "QUERY" and blob.get("kind") == NODE_CHILDREN:
            state.queried_children.add(ev.edge_i)
            if state.pending_hubs and state.pending_hubs[0] == ev.edge_i:
                state.pending_hubs.pop(0)
        elif ev.action == "ANSWER":
            if blob.get("kind") == META_HUB:
                state.hubs = tuple(blob.get("nodes", []))
                state.pending_hubs = [v for v in state.hubs
                                      if v not in state.queried_children]
            for v, u in blob.get("not_outgoing", []):
                state.not_outgoing.add((v, u))
            if blob.get("error") == "INCONSISTENT_ANSWER":
                state.inconsistent.add(canonical(ev.edge_i, ev.edge_j))
    return state


# --------------------------------------------------------------------------
# query selection
# --------------------------------------------------------------------------

def _candidate_pairs(dag: PartialDag, state: QueryLoopState) -> list[tuple[int, int]]:
    return [p for p in dag.open_pairs() if p not in state.inconsistent]


def _best_edge_query(dag: PartialDag, dataset: Dataset, config: Config,
                     cache: RunCache, state: QueryLoopState,
                     contexts: dict | None) -> OracleQuery:
    candidates = _candidate_pairs(dag, state)
    if not candidates:
        raise EmptyResidualError("no open candidates left to query")
    best_pair, best_value = None, -1.0
    for pair in candidates:                       # skeleton order
        value = info_value(pair, dag, dataset, config, cache)
        if value > best_value:
            best_pair, best_value = pair, value
    i, j = best_pair
    cert = dag.states[best_pair].certificate
    ctx = (contexts or {}).get(best_pair)
    text = render_question(cert, dag.names[i], dag.names[j], ctx)
    return OracleQuery(PER_EDGE, edge=best_pair, question_text=text,
                       query_id=state.take_query_id(), info_value=best_value,
                       certificate=cert)


def _children_query(node: int, dag: PartialDag, state: QueryLoopState) -> OracleQuery:
    return OracleQuery(NODE_CHILDREN, node=node,
                       question_text=render_node_children(dag.names[node]),
                       query_id=state.take_query_id())


def next_query(dag: PartialDag, dataset: Dataset, config: Config,
               state: QueryLoopState, cache: RunCache | None = None,
               contexts: dict | None = None) -> OracleQuery:
    """Select the next oracle interaction for the current partial graph.

    PER_EDGE mode: argmax of info_value over open candidates, ties broken by
    skeleton order.  METAHUB_CHILDREN mode: one META_HUB query first, then
    NODE_CHILDREN over the returned hubs, then over any node that still has
    open candidates.  HYBRID: hub phase first, per-edge for the remainder.
    """
    cache = cache or RunCache()
    mode = config.oracle_mode
    if mode in ("METAHUB_CHILDREN", "HYBRID"):
        if state.hubs is None:
            k = config.metahub_k
            return OracleQuery(META_HUB, k=k,
                               question_text=render_meta_hub(k if k else "all"),
                               query_id=state.take_query_id())
        if state.pending_hubs:
            return _children_query(state.pending_hubs[0], dag, state)
        if mode == "METAHUB_CHILDREN":
            degree: dict[int, int] = {}
            for i, j in _candidate_pairs(dag, state):
                for v in (i, j):
                    if v not in state.queried_children:
                        degree[v] = degree.get(v, 0) + 1
            if not degree:
                raise EmptyResidualError("no open candidates left to query")
            node = min(degree, key=lambda v: (-degree[v], v))
            return _children_query(node, dag, state)
    return _best_edge_query(dag, dataset, config, cache, state, contexts)


# --------------------------------------------------------------------------
# answer application
# --------------------------------------------------------------------------

@dataclass
class ApplyResult:
    report: PropagationReport
    error: str | None = None          # "INCONSISTENT_ANSWER" when commit cycles
    mutated: bool = False


def _oracle_commit(dag: PartialDag, pair: tuple[int, int], direction: Direction,
                   mechanism: str, trace: Trace | None, round_no: int,
                   detail_extra: dict | None = None) -> None:
    cert = None
    st = dag.states.get(pair)
    if st is not None and st.certificate is not None:
        cert = st.certificate             # keep the code that explains the query
    cert = cert or CertificateCode.RESOLVED_DECISIVE
    dag.commit(pair[0], pair[1], direction, cert, mechanism)
    if trace is not None:
        action = "COMMIT_FWD" if direction is Direction.FWD else "COMMIT_BWD"
        detail = {"certificate": cert.value, "rule": "ORACLE"}
        detail.update(detail_extra or {})
        trace.append(TraceEvent(round=round_no, mechanism=mechanism,
                                edge_i=pair[0], edge_j=pair[1], action=action,
                                detail=json.dumps(detail, sort_keys=True),
                                bits=0.0))


def _oracle_drop(dag: PartialDag, pair: tuple[int, int], mechanism: str,
                 trace: Trace | None, round_no: int,
                 detail_extra: dict | None = None) -> None:
    st = dag.states.get(pair)
    kept = st.certificate if st is not None else None
    dag.drop(pair[0], pair[1], None, mechanism)
    if trace is not None:
        detail = {"certificate": kept.value if kept else None, "rule": "ORACLE"}
        detail.update(detail_extra or {})
        trace.append(TraceEvent(round=round_no, mechanism=mechanism,
                                edge_i=pair[0], edge_j=pair[1], action="DROP",
                                detail=json.dumps(detail, sort_keys=True),
                                bits=0.0))


def apply_answer(dag: PartialDag, dataset: Dataset, config: Config,
                 query: OracleQuery, answer: OracleAnswer,
                 state: QueryLoopState, trace: Trace | None = None,
                 round_no: int = 0, cache: RunCache | None = None) -> ApplyResult:
    """Mutate the graph per the answer, then run auto-resolution to fixpoint.

    FWD/BWD commit the pair; ABSENT drops it; UNKNOWN is treated as ABSENT
    for downstream propagation (the edge leaves the queue either way).  A
    commit that would close a cycle is an oracle inconsistency: the edge is
    left OPEN, excluded from future selection, and the error is reported.
    NODE_CHILDREN commits every candidate child pair and records that all
    other open pairs at the node are not outgoing from it; a pair excluded
    in both directions is dropped.  META_HUB stores the hub list.
    """
    cache = cache or RunCache()
    if answer.kind != query.kind:
        raise ValueError(f"answer kind {answer.kind} != query kind {query.kind}")

    if query.kind == META_HUB:
        state.hubs = tuple(answer.nodes)
        state.pending_hubs = [v for v in state.hubs
                              if v not in state.queried_children]
        log_answer(trace, round_no, query, answer)
        return ApplyResult(PropagationReport(), mutated=False)

    if query.kind == PER_EDGE:
        pair = canonical(*query.edge)
        resp = answer.response
        if resp in (Answer.FWD, Answer.BWD):
            direction = Direction.FWD if resp is Answer.FWD else Direction.BWD
            try:
                probe = dag.copy()
                probe.commit(pair[0], pair[1], direction,
                             CertificateCode.RESOLVED_DECISIVE, "probe")
            except TraceMismatch:
                state.inconsistent.add(pair)
                log_answer(trace, round_no, query, answer,
                           {"error": "INCONSISTENT_ANSWER"})
                return ApplyResult(PropagationReport(),
                                   error="INCONSISTENT_ANSWER", mutated=False)
            log_answer(trace, round_no, query, answer)
            _oracle_commit(dag, pair, direction, "M11", trace, round_no)
        else:
            extra = {"treated_as": "ABSENT"} if resp is Answer.UNKNOWN else None
            log_answer(trace, round_no, query, answer, extra)
            _oracle_drop(dag, pair, "M11", trace, round_no,
                         {"answer": resp.value})
        report = run_auto_resolution(dag, dataset, config, trace, round_no, cache)
        return ApplyResult(report, mutated=True)

    # NODE_CHILDREN
    v = query.node
    children = set(answer.nodes)
    if v in children:
        raise ValueError("node-children answer contains the queried node")
    state.queried_children.add(v)
    if state.pending_hubs and state.pending_hubs[0] == v:
        state.pending_hubs.pop(0)

    commits: list[tuple[tuple[int, int], Direction]] = []
    exclusions: list[tuple[int, int]] = []
    drops: list[tuple[int, int]] = []
    error = None
    for pair in dag.open_pairs():
        if v not in pair:
            continue
        other = pair[1] if pair[0] == v else pair[0]
        if other in children:
            direction = Direction.FWD if pair[0] == v else Direction.BWD
            parent, child = (pair if direction is Direction.FWD
                             else (pair[1], pair[0]))
            if dag.has_directed_path(child, parent):
                state.inconsistent.add(pair)
                error = "INCONSISTENT_ANSWER"
                continue
            commits.append((pair, direction))
        else:
            exclusions.append((v, other))
            if (other, v) in state.not_outgoing:
                drops.append(pair)
    state.not_outgoing.update(exclusions)
    log_answer(trace, round_no, query, answer,
               {"not_outgoing": [list(e) for e in exclusions],
                **({"error": error} if error else {})})
    for pair, direction in commits:
        _oracle_commit(dag, pair, direction, "M14", trace, round_no)
    for pair in drops:
        _oracle_drop(dag, pair, "M14", trace, round_no,
                     {"rule": "CHILDREN_EXCLUDED"})
    mutated = bool(commits or drops)
    report = PropagationReport()
    if mutated:
        report = run_auto_resolution(dag, dataset, config, trace, round_no, cache)
    return ApplyResult(report, error=error, mutated=mutated)


# --------------------------------------------------------------------------
# round 1 (data only) and the full iterative loop
# --------------------------------------------------------------------------

@dataclass
class IterationResult:
    dag: PartialDag
    trace: Trace
    skeleton: Skeleton
    mediators: dict
    verdicts: dict[tuple[int, int], CascadeVerdict]
    query_count: int = 0
    rounds: int = 1
    recovered: list[tuple[int, int]] = field(default_factory=list)


def run_round_one(dataset: Dataset, config: Config,
                  trace: Trace) -> tuple[PartialDag, Skeleton, dict, dict]:
    """M1 skeleton + M2 mediator drops + the per-pair direction cascade.

    Cascade commits are applied in canonical pair order.  Bivariate verdicts
    are mutually independent, so a later verdict can contradict earlier
    commits by closing a directed cycle; such a pair is left OPEN with an
    IMPOSSIBLE_AMBIGUOUS certificate (conflicting evidence goes to the
    expert) rather than breaking acyclicity."""
    skeleton = build_skeleton(dataset, config)
    dag = PartialDag(list(dataset.names))
    for (i, j) in skeleton.pairs:
        dag.ensure_open(i, j)
        trace.append(TraceEvent(
            round=1, mechanism="M1", edge_i=i, edge_j=j, action="ABSTAIN",
            detail=json.dumps({"p": round(skeleton.marginal_p[(i, j)], 6)},
                              sort_keys=True), bits=0.0))

    mediators = mediator_search(skeleton, dataset, config)
    for pair in skeleton.pairs:
        verdict = mediators.get(pair)
        if verdict is None:
            continue
        dag.drop(pair[0], pair[1], CertificateCode.RESOLVED_MEDIATED, "M2")
        trace.append(TraceEvent(
            round=1, mechanism="M2", edge_i=pair[0], edge_j=pair[1],
            action="DROP",
            detail=json.dumps({
                "certificate": CertificateCode.RESOLVED_MEDIATED.value,
                "mediated_by": list(verdict.mediated_by),
                "tier": verdict.tier,
                "p": round(verdict.p_conditional, 6)}, sort_keys=True),
            bits=0.0))

    def conflict_abstain(i: int, j: int, cert: CertificateCode,
                         blocked_by: str) -> None:
        # a bivariate verdict contradicting earlier commits (directed cycle)
        # cannot be applied; the pair stays open for the expert
        dag.set_certificate(i, j, cert, "M3")
        trace.append(TraceEvent(
            round=1, mechanism="M3", edge_i=i, edge_j=j, action="ABSTAIN",
            detail=json.dumps({"certificate": cert.value,
                               "conflict": "acyclicity",
                               "blocked": blocked_by}, sort_keys=True),
            bits=0.0))

    verdicts: dict[tuple[int, int], CascadeVerdict] = {}
    for pair in dag.open_pairs():
        verdict = run_cascade(dataset, pair, config)
        verdicts[pair] = verdict
        i, j = pair
        if verdict.direction is not None:
            action = ("COMMIT_FWD" if verdict.direction is Direction.FWD
                      else "COMMIT_BWD")
            try:
                dag.commit(i, j, verdict.direction,
                           CertificateCode.RESOLVED_DECISIVE, "M3")
            except TraceMismatch:
                conflict_abstain(i, j, CertificateCode.IMPOSSIBLE_AMBIGUOUS,
                                 verdict.committed_by or "cascade")
                continue
            trace.append(TraceEvent(
                round=1, mechanism="M3", edge_i=i, edge_j=j, action=action,
                detail=json.dumps({"certificate": "RESOLVED_DECISIVE",
                                   "committed_by": verdict.committed_by},
                                  sort_keys=True), bits=0.0))
        elif verdict.demoted_by is not None:
            l0 = verdict.decision_for("L0")
            l0_dir = Direction(l0.outcome)
            action = ("COMMIT_FWD" if l0_dir is Direction.FWD else "COMMIT_BWD")
            try:
                dag.commit(i, j, l0_dir, CertificateCode.RESOLVED_DECISIVE, "M3")
            except TraceMismatch:
                conflict_abstain(i, j, verdict.certificate, "L0")
                continue
            trace.append(TraceEvent(
                round=1, mechanism="M3", edge_i=i, edge_j=j, action=action,
                detail=json.dumps({"certificate": "RESOLVED_DECISIVE",
                                   "committed_by": "L0"}, sort_keys=True),
                bits=0.0))
            dag.demote(i, j, verdict.certificate, "M5")
            trace.append(TraceEvent(
                round=1, mechanism="M5", edge_i=i, edge_j=j, action="DEMOTE",
                detail=json.dumps({"certificate": verdict.certificate.value,
                                   "demoted_by": verdict.demoted_by},
                                  sort_keys=True), bits=0.0))
        else:
            dag.set_certificate(i, j, verdict.certificate, "M3")
            trace.append(TraceEvent(
                round=1, mechanism="M3", edge_i=i, edge_j=j, action="ABSTAIN",
                detail=json.dumps({"certificate": verdict.certificate.value},
                                  sort_keys=True), bits=0.0))
    return dag, skeleton, mediators, verdicts


def run_iterative(dataset: Dataset, config: Config,
                  backend: OracleBackend) -> IterationResult:
    """The full loop: round 1 data-only, round 2 auto-propagation, rounds
    three onward one oracle interaction each, auto-resolution after every
    answer, until no open candidates remain (or the query budget is hit)."""
    trace = Trace()
    cache = RunCache()
    dag, skeleton, mediators, verdicts = run_round_one(dataset, config, trace)

    round_no = 2
    if config.propagation_enabled:
        run_auto_resolution(dag, dataset, config, trace, round_no, cache)

    state = QueryLoopState()
    contexts = {p: question_context(v, config) for p, v in verdicts.items()}
    result = IterationResult(dag=dag, trace=trace, skeleton=skeleton,
                             mediators=mediators, verdicts=verdicts)

    round_no = 3
    while True:
        if config.query_budget is not None and trace.query_count >= config.query_budget:
            break
        try:
            query = next_query(dag, dataset, config, state, cache, contexts)
        except EmptyResidualError:
            break
        log_query(trace, round_no, query)
        answer = backend.answer(query)
        apply_answer(dag, dataset, config, query, answer, state,
                     trace, round_no, cache)
        round_no += 1

    if config.recover_missing:
        result.recovered = recover_missing(dag, dataset, config, backend,
                                           skeleton, state, trace, round_no,
                                           cache)
    result.query_count = trace.query_count
    result.rounds = round_no - 1
    return result


# --------------------------------------------------------------------------
# pure hub protocol (1 + K interactions)
# --------------------------------------------------------------------------

@dataclass
class PureResult:
    dag: PartialDag
    query_count: int
    trace: Trace


def run_pure_metahub(names: list[str], backend: OracleBackend,
                     trace: Trace | None = None) -> PureResult:
    """Recover a DAG with 1 META_HUB + K NODE_CHILDREN interactions.

    The direction cascade is disabled: the hub answer names every non-leaf
    node, each children answer commits that node's outgoing edges, and all
    pairs never named are absent.  With a correct oracle the result equals
    the hidden graph exactly, in 1+K interactions (K = non-leaf count).
    """
    trace = trace if trace is not None else Trace()
    state = QueryLoopState()
    dag = PartialDag(list(names))

    query = OracleQuery(META_HUB, k=None, question_text=render_meta_hub("all"),
                        query_id=state.take_query_id())
    log_query(trace, 1, query)
    hub_answer = backend.meta_hub(query)
    log_answer(trace, 1, query, hub_answer)
    hubs = tuple(hub_answer.nodes)

    round_no = 2
    for v in hubs:
        cq = OracleQuery(NODE_CHILDREN, node=v,
                         question_text=render_node_children(names[v]),
                         query_id=state.take_query_id())
        log_query(trace, round_no, cq)
        ans = backend.node_children(cq)
        log_answer(trace, round_no, cq, ans)
        if v in ans.nodes:
            raise ImperfectOracleError(f"node {names[v]} listed as its own child")
        for c in ans.nodes:
            pair = canonical(v, c)
            st = dag.states.get(pair)
            if st is not None:
                already = st.direction is not None and (
                    (pair[0] if st.direction is Direction.FWD else pair[1]) == v)
                if already:
                    continue
                raise ImperfectOracleError(
                    f"edge {names[v]}->{names[c]} conflicts with an earlier answer")
            direction = Direction.FWD if pair[0] == v else Direction.BWD
            try:
                dag.commit(pair[0], pair[1], direction,
                           CertificateCode.RESOLVED_DECISIVE, "M14")
            except TraceMismatch as exc:
                raise ImperfectOracleError(str(exc)) from exc
            trace.append(TraceEvent(
                round=round_no, mechanism="M14", edge_i=pair[0], edge_j=pair[1],
                action="COMMIT_FWD" if direction is Direction.FWD else "COMMIT_BWD",
                detail=json.dumps({"certificate": "RESOLVED_DECISIVE",
                                   "rule": "ORACLE"}, sort_keys=True),
                bits=0.0))
        round_no += 1

    committed = set(dag.committed_edges())
    truth = getattr(backend, "edges", None)
    if truth is not None and set(truth) - committed:
        missing = sorted(set(truth) - committed)
        raise ImperfectOracleError(f"answers miss ground-truth edges {missing}")
    return PureResult(dag=dag, query_count=trace.query_count, trace=trace)


# --------------------------------------------------------------------------
# missing-edge recovery (optional)
# --------------------------------------------------------------------------

def recover_missing(dag: PartialDag, dataset: Dataset, config: Config,
                    backend: OracleBackend, skeleton: Skeleton,
                    state: QueryLoopState | None = None,
                    trace: Trace | None = None, round_no: int = 0,
                    cache: RunCache | None = None,
                    use_marginal_filter: bool = True,
                    use_degree_priority: bool = True,
                    use_reachability_filter: bool = True) -> list[tuple[int, int]]:
    """Query node pairs the skeleton pruned, behind three optional filters:
    (a) marginal dependence below a loose threshold, (b) candidates ordered
    by committed degree, (c) skip pairs already joined by a committed path.
    Returns the directed edges the expert recovered."""
    state = state or QueryLoopState()
    cache = cache or RunCache()
    in_skeleton = set(skeleton.pairs)
    n_vars = len(dataset.names)
    candidates = []
    for i in range(n_vars):
        for j in range(i + 1, n_vars):
            if (i, j) in in_skeleton:
                continue
            if use_marginal_filter:
                p = skeleton.marginal_p.get((i, j))
                if p is None or p >= config.recovery_alpha:
                    continue
            if use_reachability_filter and (
                    dag.has_directed_path(i, j) or dag.has_directed_path(j, i)):
                continue
            candidates.append((i, j))

    if use_degree_priority:
        def committed_degree(pair):
            deg = 0
            for a, b in dag.committed_edges():
                deg += (a in pair) + (b in pair)
            return deg
        candidates.sort(key=lambda p: (-committed_degree(p), p))

    recovered: list[tuple[int, int]] = []
    for pair in candidates:
        st = dag.states.get(pair)
        if st is not None and st.status is not EdgeStatus.OPEN:
            continue
        if st is None:
            dag.ensure_open(pair[0], pair[1])
            if trace is not None:
                trace.append(TraceEvent(
                    round=round_no, mechanism="M15", edge_i=pair[0],
                    edge_j=pair[1], action="ABSTAIN",
                    detail=json.dumps({"rule": "RECOVERY_CANDIDATE"},
                                      sort_keys=True), bits=0.0))
        text = render_question(None, dag.names[pair[0]], dag.names[pair[1]])
        query = OracleQuery(PER_EDGE, edge=pair, question_text=text,
                            query_id=state.take_query_id())
        log_query(trace, round_no, query)
        answer = backend.answer(query)
        result = apply_answer(dag, dataset, config, query, answer, state,
                              trace, round_no, cache)
        if result.mutated and answer.response in (Answer.FWD, Answer.BWD):
            a, b = pair if answer.response is Answer.FWD else (pair[1], pair[0])
            recovered.append((a, b))
        round_no += 1
    return recovered
