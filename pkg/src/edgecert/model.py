"""Core data model: datasets, configuration, edge states, the partial DAG, and the audit trace.

Vertex identity is the column index of the dataset; names are display-only.
Every pair of vertices is stored in canonical order (i < j).  A committed
direction is expressed relative to that order: FWD means i -> j, BWD means
j -> i.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path

import numpy as np

ALL_TIERS = ("L0", "L1", "L_LSNM", "L_IGCI", "L_STEIN", "L_MDL", "L2", "L_PEIT")

# Lattice order: cheap/safe tiers first; the first committing enabled tier wins.
TIER_ORDER = {tier: rank for rank, tier in enumerate(ALL_TIERS)}


class Direction(str, Enum):
    FWD = "FWD"
    BWD = "BWD"

    def flipped(self) -> "Direction":
        return Direction.BWD if self is Direction.FWD else Direction.FWD


class Answer(str, Enum):
    FWD = "FWD"
    BWD = "BWD"
    ABSENT = "ABSENT"
    UNKNOWN = "UNKNOWN"


class CertificateCode(str, Enum):
    RESOLVED_DECISIVE = "RESOLVED_DECISIVE"
    RESOLVED_MEDIATED = "RESOLVED_MEDIATED"
    IMPOSSIBLE_R1 = "IMPOSSIBLE_R1"
    IMPOSSIBLE_LATENT_LIKELY = "IMPOSSIBLE_LATENT_LIKELY"
    IMPOSSIBLE_REGRESSOR_INCONSISTENT = "IMPOSSIBLE_REGRESSOR_INCONSISTENT"
    IMPOSSIBLE_NONLINEAR_WEAK = "IMPOSSIBLE_NONLINEAR_WEAK"
    IMPOSSIBLE_HOC_AMBIGUOUS = "IMPOSSIBLE_HOC_AMBIGUOUS"
    IMPOSSIBLE_AMBIGUOUS = "IMPOSSIBLE_AMBIGUOUS"
    IMPOSSIBLE_L0_DISAGREES_WITH_HIGH_TIER = "IMPOSSIBLE_L0_DISAGREES_WITH_HIGH_TIER"
    IMPOSSIBLE_CIRCULAR = "IMPOSSIBLE_CIRCULAR"
    IMPOSSIBLE_BINARY_CONTINUOUS = "IMPOSSIBLE_BINARY_CONTINUOUS"
    IMPOSSIBLE_COUNT = "IMPOSSIBLE_COUNT"
    IMPOSSIBLE_HIGH_CARDINALITY_DISCRETE = "IMPOSSIBLE_HIGH_CARDINALITY_DISCRETE"

    @property
    def is_resolved(self) -> bool:
        return self.value.startswith("RESOLVED")

    @property
    def is_impossible(self) -> bool:
        return self.value.startswith("IMPOSSIBLE")


class TraceMismatch(Exception):
    """Replaying a trace produced a state transition the trace does not support."""


class MalformedDataset(Exception):
    """CSV could not be parsed into a numeric N x V matrix."""


def canonical(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError(f"self pair ({i},{j})")
    return (i, j) if i < j else (j, i)


def direction_of(i: int, j: int, parent: int) -> Direction:
    """Direction label for edge parent->other on the canonical pair (i,j)."""
    a, _ = canonical(i, j)
    return Direction.FWD if parent == a else Direction.BWD


# ---------------------------------------------------------------------------
# Dataset


@dataclass
class VariableMeta:
    is_integer: bool
    cardinality: int
    is_binary: bool
    flagged_circular: bool = False
    dispersion: float = 0.0          # variance / mean, for count detection

    @classmethod
    def from_values(cls, values, name: str = "",
                    circular: bool = False) -> "VariableMeta":
        col = np.asarray(values, dtype=float)
        distinct = np.unique(col)
        if distinct.size < 2:
            raise MalformedDataset(f"column {name or '<anonymous>'} is constant")
        mean = float(col.mean())
        return cls(
            is_integer=bool(np.all(col == np.round(col))),
            cardinality=int(distinct.size),
            is_binary=bool(distinct.size == 2),
            flagged_circular=circular,
            dispersion=float(col.var() / mean) if mean > 0 else 0.0,
        )


class Dataset:
    """N x V numeric sample matrix with per-column metadata.

    Column metadata drives the regime detectors: integer support, cardinality,
    binary flags, and an explicit circular flag that can be supplied through a
    ``<csv>.meta.json`` sidecar (keys: variable name -> {"circular": true}).
    """

    def __init__(self, data: np.ndarray, names: list[str] | None = None,
                 circular: set[str] | None = None, min_n: int = 1000):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise MalformedDataset(f"expected 2-D matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise MalformedDataset("non-finite values in dataset")
        self.data = data
        self.names = list(names) if names is not None else [f"x{k}" for k in range(data.shape[1])]
        if len(self.names) != data.shape[1]:
            raise MalformedDataset("header width does not match data width")
        if len(set(self.names)) != len(self.names):
            raise MalformedDataset("duplicate column names")
        circular = circular or set()
        self.meta: list[VariableMeta] = [
            VariableMeta.from_values(data[:, k], self.names[k],
                                     circular=self.names[k] in circular)
            for k in range(data.shape[1])
        ]
        if data.shape[0] < min_n:
            warnings.warn(
                f"dataset has N={data.shape[0]} < {min_n} samples; "
                "bivariate verdicts may be unstable", stacklevel=2)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def v(self) -> int:
        return self.data.shape[1]

    def column(self, k: int) -> np.ndarray:
        return self.data[:, k]

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    @classmethod
    def from_csv(cls, path: str | Path, min_n: int = 1000) -> "Dataset":
        path = Path(path)
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                rows = list(reader)
        except OSError as exc:
            raise MalformedDataset(f"cannot read {path}: {exc}") from exc
        if len(rows) < 2:
            raise MalformedDataset(f"{path}: need a header row plus data rows")
        header = [h.strip() for h in rows[0]]
        try:
            data = np.array([[float(v) for v in row] for row in rows[1:] if row],
                            dtype=float)
        except ValueError as exc:
            raise MalformedDataset(f"{path}: non-numeric cell ({exc})") from exc
        if data.ndim != 2 or data.shape[1] != len(header):
            raise MalformedDataset(f"{path}: ragged rows")
        circular: set[str] = set()
        sidecar = path.with_suffix(path.suffix + ".meta.json")
        if sidecar.exists():
            blob = json.loads(sidecar.read_text())
            circular = {name for name, m in blob.items() if m.get("circular")}
        return cls(data, header, circular=circular, min_n=min_n)


# ---------------------------------------------------------------------------
# Config


ORACLE_MODES = ("PER_EDGE", "METAHUB_CHILDREN", "HYBRID")
HSIC_METHODS = ("permutation", "gamma")
INFO_VALUE_STRATEGIES = ("worst_case", "expected")


@dataclass
class Config:
    """Run configuration.  Decision thresholds were calibrated once on the
    synthetic regime generators and are frozen here; tests depend on them only
    through banded accuracy properties."""

    alpha_skeleton: float = 0.05
    fdr_level: float | None = None          # defaults to alpha_skeleton
    alpha_residual: float = 0.05
    gauss_gate_p: float = 0.05
    hetero_gate_p: float = 0.01
    confirm_ratio: float = 2.0              # 0 disables the gate
    permutations: int = 500
    hsic_method: str = "permutation"
    hsic_max_n: int = 512
    seed: int = 0
    tier_mask: tuple[str, ...] = ALL_TIERS
    oracle_mode: str = "PER_EDGE"
    propagation_enabled: bool = True
    mediator_max_tier: int = 3
    recover_missing: bool = False
    recovery_alpha: float = 0.10
    reaudit_safe_tiers: bool = False    # re-audit with the full cascade
    min_n: int = 1000
    metahub_k: int | None = None
    query_budget: int | None = None
    info_value_strategy: str = "worst_case"
    # calibrated tier thresholds (frozen)
    l1_margin: float = 0.10
    lsnm_margin: float = 0.05
    igci_threshold: float = 0.35
    stein_ratio: float = 2.5
    mdl_margin: float = 0.15
    l2_threshold: float = 0.30
    l2_floor: float = 0.15
    peit_margin: float = 0.12

    def __post_init__(self) -> None:
        if self.fdr_level is None:
            self.fdr_level = self.alpha_skeleton
        self.tier_mask = tuple(self.tier_mask)
        self.validate()

    def validate(self) -> None:
        for name in ("alpha_skeleton", "fdr_level", "alpha_residual",
                     "gauss_gate_p", "hetero_gate_p"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name}={value} outside (0, 1)")
        if self.permutations < 200:
            raise ValueError("permutations must be >= 200")
        if self.confirm_ratio < 0:
            raise ValueError("confirm_ratio must be >= 0")
        if self.hsic_method not in HSIC_METHODS:
            raise ValueError(f"hsic_method must be one of {HSIC_METHODS}")
        unknown = set(self.tier_mask) - set(ALL_TIERS)
        if unknown:
            raise ValueError(f"unknown tiers in tier_mask: {sorted(unknown)}")
        if self.oracle_mode not in ORACLE_MODES:
            raise ValueError(f"oracle_mode must be one of {ORACLE_MODES}")
        if self.mediator_max_tier not in (1, 2, 3):
            raise ValueError("mediator_max_tier must be 1, 2 or 3")
        if self.info_value_strategy not in INFO_VALUE_STRATEGIES:
            raise ValueError(f"info_value_strategy must be one of {INFO_VALUE_STRATEGIES}")

    def enabled_tiers(self) -> list[str]:
        return [t for t in ALL_TIERS if t in self.tier_mask]

    def to_json(self) -> str:
        blob = asdict(self)
        blob["tier_mask"] = list(self.tier_mask)
        return json.dumps(blob, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Config":
        blob = json.loads(text)
        blob["tier_mask"] = tuple(blob.get("tier_mask", ALL_TIERS))
        return cls(**blob)

    def replace(self, **kw) -> "Config":
        blob = asdict(self)
        blob.update(kw)
        blob["tier_mask"] = tuple(blob["tier_mask"])
        return Config(**blob)


# ---------------------------------------------------------------------------
# Trace


TRACE_ACTIONS = ("COMMIT_FWD", "COMMIT_BWD", "DROP", "DEMOTE", "ABSTAIN",
                 "QUERY", "ANSWER")
TRACE_COLUMNS = ("round", "mechanism", "edge_i", "edge_j", "action", "detail", "bits")


@dataclass(frozen=True)
class TraceEvent:
    round: int
    mechanism: str
    edge_i: int
    edge_j: int
    action: str
    detail: str
    bits: float

    def __post_init__(self) -> None:
        if self.action not in TRACE_ACTIONS:
            raise ValueError(f"unknown action {self.action}")

    def row(self) -> list:
        return [self.round, self.mechanism, self.edge_i, self.edge_j,
                self.action, self.detail, format(self.bits, "g")]


class Trace:
    """Append-only event log.  The trace is the single source of truth for a
    run: replaying it reconstructs the final PartialDag."""

    def __init__(self, events: list[TraceEvent] | None = None):
        self.events: list[TraceEvent] = list(events) if events else []

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def bits_total(self) -> float:
        return sum(e.bits for e in self.events)

    @property
    def query_count(self) -> int:
        return sum(1 for e in self.events if e.action == "QUERY")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for event in self.events:
            writer.writerow(event.row())
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{"round": e.round, "mechanism": e.mechanism,
                 "edge_i": e.edge_i, "edge_j": e.edge_j, "action": e.action,
                 "detail": e.detail, "bits": e.bits} for e in self.events]
        return json.dumps(rows, indent=1)

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
        if not rows or tuple(rows[0]) != TRACE_COLUMNS:
            raise TraceMismatch("trace CSV header mismatch")
        events = []
        for row in rows[1:]:
            if not row:
                continue
            events.append(TraceEvent(int(row[0]), row[1], int(row[2]), int(row[3]),
                                     row[4], row[5], float(row[6])))
        return cls(events)

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        rows = json.loads(text)
        return cls([TraceEvent(r["round"], r["mechanism"], r["edge_i"], r["edge_j"],
                               r["action"], r["detail"], r["bits"]) for r in rows])


# ---------------------------------------------------------------------------
# Partial DAG


class EdgeStatus(str, Enum):
    OPEN = "OPEN"
    COMMITTED = "COMMITTED"
    DROPPED = "DROPPED"


@dataclass
class EdgeState:
    status: EdgeStatus
    direction: Direction | None = None
    certificate: CertificateCode | None = None
    provenance: str | None = None

    def snapshot(self) -> dict:
        return {
            "status": self.status.value,
            "direction": self.direction.value if self.direction else None,
            "certificate": self.certificate.value if self.certificate else None,
            "provenance": self.provenance,
        }


class PartialDag:
    """Mutable pairwise state over a fixed vertex set.

    Pairs are tracked in exactly one of three states (open, committed,
    dropped); pairs never admitted stay absent.  Committed edges always form
    a DAG: every commit re-checks acyclicity in O(V + E).
    """

    def __init__(self, names: list[str]):
        self.names = list(names)
        self.states: dict[tuple[int, int], EdgeState] = {}

    # -- queries ------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.names)

    def state(self, i: int, j: int) -> EdgeState | None:
        return self.states.get(canonical(i, j))

    def pairs_with(self, status: EdgeStatus) -> list[tuple[int, int]]:
        return sorted(p for p, s in self.states.items() if s.status == status)

    def open_pairs(self) -> list[tuple[int, int]]:
        return self.pairs_with(EdgeStatus.OPEN)

    def committed_edges(self) -> list[tuple[int, int]]:
        """Directed (parent, child) list in canonical pair order."""
        out = []
        for (i, j), st in sorted(self.states.items()):
            if st.status == EdgeStatus.COMMITTED:
                out.append((i, j) if st.direction == Direction.FWD else (j, i))
        return out

    def adjacent(self, i: int, j: int) -> bool:
        st = self.states.get(canonical(i, j))
        return st is not None and st.status != EdgeStatus.DROPPED

    def parents(self, v: int) -> list[int]:
        return sorted(p for p, c in self.committed_edges() if c == v)

    def children(self, v: int) -> list[int]:
        return sorted(c for p, c in self.committed_edges() if p == v)

    def _adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(self.n)}
        for p, c in self.committed_edges():
            adj[p].append(c)
        return adj

    def is_acyclic(self) -> bool:
        adj = self._adjacency()
        indeg = {v: 0 for v in range(self.n)}
        for p in adj:
            for c in adj[p]:
                indeg[c] += 1
        queue = [v for v in range(self.n) if indeg[v] == 0]
        seen = 0
        while queue:
            v = queue.pop()
            seen += 1
            for c in adj[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen == self.n

    def has_directed_path(self, src: int, dst: int) -> bool:
        if src == dst:
            return True
        adj = self._adjacency()
        stack, seen = [src], {src}
        while stack:
            v = stack.pop()
            for c in adj[v]:
                if c == dst:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    # -- mutations ----------------------------------------------------------

    def ensure_open(self, i: int, j: int) -> None:
        pair = canonical(i, j)
        if pair in self.states:
            raise TraceMismatch(f"pair {pair} already tracked")
        self.states[pair] = EdgeState(EdgeStatus.OPEN)

    def commit(self, i: int, j: int, direction: Direction,
               certificate: CertificateCode | None, provenance: str) -> None:
        pair = canonical(i, j)
        st = self.states.get(pair)
        if st is not None and st.status != EdgeStatus.OPEN:
            raise TraceMismatch(f"cannot commit {pair}: status {st.status}")
        parent, child = (pair[0], pair[1]) if direction == Direction.FWD else (pair[1], pair[0])
        # child ~> parent already committed would close a cycle
        if self.has_directed_path(child, parent):
            raise TraceMismatch(f"commit {parent}->{child} would create a cycle")
        self.states[pair] = EdgeState(EdgeStatus.COMMITTED, direction, certificate, provenance)

    def drop(self, i: int, j: int, certificate: CertificateCode | None,
             provenance: str) -> None:
        pair = canonical(i, j)
        st = self.states.get(pair)
        if st is not None and st.status != EdgeStatus.OPEN:
            raise TraceMismatch(f"cannot drop {pair}: status {st.status}")
        if certificate is None and st is not None:
            certificate = st.certificate      # keep the audit label that explains the pair
        self.states[pair] = EdgeState(EdgeStatus.DROPPED, None, certificate, provenance)

    def demote(self, i: int, j: int, certificate: CertificateCode,
               provenance: str) -> None:
        pair = canonical(i, j)
        st = self.states.get(pair)
        if st is None or st.status != EdgeStatus.COMMITTED:
            raise TraceMismatch(f"cannot demote {pair}: not committed")
        self.states[pair] = EdgeState(EdgeStatus.OPEN, None, certificate, provenance)

    def set_certificate(self, i: int, j: int, certificate: CertificateCode,
                        provenance: str) -> None:
        pair = canonical(i, j)
        st = self.states.get(pair)
        if st is None:
            raise TraceMismatch(f"pair {pair} not tracked")
        st.certificate = certificate
        st.provenance = provenance

    def copy(self) -> "PartialDag":
        dup = PartialDag(self.names)
        dup.states = {p: EdgeState(s.status, s.direction, s.certificate, s.provenance)
                      for p, s in self.states.items()}
        return dup

    def check_invariants(self) -> None:
        if not self.is_acyclic():
            raise TraceMismatch("committed edges contain a cycle")

    def snapshot(self) -> dict:
        return {
            "names": self.names,
            "pairs": {f"{i}-{j}": st.snapshot() for (i, j), st in sorted(self.states.items())},
            "committed": [[p, c] for p, c in self.committed_edges()],
            "open": [[i, j] for i, j in self.open_pairs()],
            "dropped": [[i, j] for i, j in self.pairs_with(EdgeStatus.DROPPED)],
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialDag) and self.names == other.names \
            and self.states == other.states


# ---------------------------------------------------------------------------
# Replay


def _detail_certificate(detail: str) -> CertificateCode | None:
    if not detail:
        return None
    try:
        blob = json.loads(detail)
    except (json.JSONDecodeError, ValueError):
        return None
    code = blob.get("certificate") if isinstance(blob, dict) else None
    return CertificateCode(code) if code else None


def replay(trace: Trace, names: list[str]) -> PartialDag:
    """Rebuild the PartialDag a trace describes, validating every transition.

    Raises TraceMismatch when an event is illegal against the replayed state
    (double commits, commits closing a cycle, drops of committed pairs, ...).
    """
    dag = PartialDag(names)
    for ev in trace:
        cert = _detail_certificate(ev.detail)
        if ev.action == "ABSTAIN":
            if ev.mechanism == "M1":
                dag.ensure_open(ev.edge_i, ev.edge_j)
            elif cert is not None:
                dag.set_certificate(ev.edge_i, ev.edge_j, cert, ev.mechanism)
        elif ev.action in ("COMMIT_FWD", "COMMIT_BWD"):
            direction = Direction.FWD if ev.action == "COMMIT_FWD" else Direction.BWD
            dag.commit(ev.edge_i, ev.edge_j, direction,
                       cert or CertificateCode.RESOLVED_DECISIVE, ev.mechanism)
        elif ev.action == "DROP":
            dag.drop(ev.edge_i, ev.edge_j, cert, ev.mechanism)
        elif ev.action == "DEMOTE":
            if cert is None:
                raise TraceMismatch("DEMOTE event without certificate")
            dag.demote(ev.edge_i, ev.edge_j, cert, ev.mechanism)
        elif ev.action in ("QUERY", "ANSWER"):
            continue
        dag.check_invariants()
    return dag
