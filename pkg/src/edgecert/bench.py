"""Benchmark plumbing: fixture manifests, the per-tier regime stress matrix,
the tier-ablation table, and the query/accuracy trade-off runner."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass

from . import regimes
from .cascade import aggregate, run_cascade
from .metrics import EvalReport, evaluate
from .model import ALL_TIERS, Config, Dataset, PartialDag, canonical
from .oracle import GroundTruthBackend, run_iterative, run_pure_metahub
from .tiers import SAFE_TIERS

__all__ = [
    "BenchmarkFixture", "load_manifest", "read_edges", "write_edges",
    "MatrixCell", "run_tier_matrix", "matrix_to_csv",
    "AblationRow", "ABLATION_ROWS", "run_ablation", "ablation_to_csv",
    "ParetoPoint", "run_pareto", "pareto_to_csv", "pareto_to_svg",
]

FIXTURE_DIR_ENV = "EDGECERT_FIXTURES"


# --------------------------------------------------------------------------
# fixtures
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkFixture:
    name: str
    csv_path: str
    gt_path: str
    n_vertices: int
    n_gt_edges: int
    k_non_leaves: int

    def load(self) -> tuple[Dataset, list[tuple[int, int]]]:
        dataset = Dataset.from_csv(self.csv_path)
        edges = read_edges(self.gt_path, dataset.names)
        if len(dataset.names) != self.n_vertices:
            raise ValueError(f"{self.name}: expected {self.n_vertices} "
                             f"variables, file has {len(dataset.names)}")
        if len(edges) != self.n_gt_edges:
            raise ValueError(f"{self.name}: expected {self.n_gt_edges} "
                             f"edges, file has {len(edges)}")
        k = len({a for a, _ in edges})
        if k != self.k_non_leaves:
            raise ValueError(f"{self.name}: expected K={self.k_non_leaves}, "
                             f"edge list implies {k}")
        return dataset, edges


def load_manifest(path: str) -> dict[str, BenchmarkFixture]:
    """Read a fixture manifest: JSON list of {name, csv, gt, V, gt_edges, K}.

    Relative csv/gt paths resolve against the manifest's directory; the
    EDGECERT_FIXTURES environment variable overrides that base directory.
    """
    with open(path) as fh:
        entries = json.load(fh)
    base = os.environ.get(FIXTURE_DIR_ENV) or os.path.dirname(os.path.abspath(path))
    fixtures = {}
    for e in entries:
        fixtures[e["name"]] = BenchmarkFixture(
            name=e["name"],
            csv_path=os.path.join(base, e["csv"]),
            gt_path=os.path.join(base, e["gt"]),
            n_vertices=int(e["V"]),
            n_gt_edges=int(e["gt_edges"]),
            k_non_leaves=int(e["K"]),
        )
    return fixtures


def read_edges(path: str, names: list[str]) -> list[tuple[int, int]]:
    """Read a directed edge list: one ``parent,child`` line per edge."""
    index = {n: k for k, n in enumerate(names)}
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parent, child = (tok.strip() for tok in line.split(","))
            edges.append((index[parent], index[child]))
    return edges


def write_edges(path: str, edges, names: list[str]) -> None:
    with open(path, "w") as fh:
        for a, b in edges:
            fh.write(f"{names[a]},{names[b]}\n")


# --------------------------------------------------------------------------
# per-tier regime stress matrix
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixCell:
    fired: int
    correct: int

    @property
    def abstained(self) -> bool:
        return self.fired == 0

    @property
    def accuracy(self) -> float | None:
        return None if self.fired == 0 else self.correct / self.fired

    def label(self) -> str:
        return "abstain" if self.abstained else f"{self.correct}/{self.fired}"


def run_tier_matrix(config: Config, n_pairs: int = 40, n_samples: int = 2000,
                    seed: int | None = None,
                    regime_names: tuple[str, ...] = regimes.REGIMES,
                    ) -> dict[tuple[str, str], MatrixCell]:
    """Fire all eight tiers on every synthetic regime and count (correct,
    fired) per cell.  A tier whose gate rejected every pair of a regime
    abstains on that regime."""
    from .tiers import PairFeatures, decide_all
    from .model import VariableMeta
    from . import stats

    seed = config.seed if seed is None else seed
    out: dict[tuple[str, str], MatrixCell] = {}
    for regime in regime_names:
        samples = regimes.generate_regime(regime, n_pairs, n_samples, seed)
        tallies = {tier: [0, 0] for tier in ALL_TIERS}
        for k, sample in enumerate(samples):
            meta_x = VariableMeta.from_values(sample.x, "x")
            meta_y = VariableMeta.from_values(sample.y, "y")
            features = PairFeatures.compute(
                sample.x, sample.y, meta_x, meta_y, config,
                stats.stable_seed(seed, "matrix", regime, k))
            for decision in decide_all(features, config):
                if decision.outcome == "ABSTAIN":
                    continue
                tallies[decision.tier][0] += 1
                if decision.outcome == sample.direction.value:
                    tallies[decision.tier][1] += 1
        for tier in ALL_TIERS:
            fired, correct = tallies[tier]
            out[(tier, regime)] = MatrixCell(fired=fired, correct=correct)
    return out


def matrix_to_csv(matrix: dict[tuple[str, str], MatrixCell],
                  regime_names: tuple[str, ...] = regimes.REGIMES) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tier"] + list(regime_names))
    for tier in ALL_TIERS:
        row = [tier]
        for regime in regime_names:
            cell = matrix.get((tier, regime))
            row.append(cell.label() if cell else "abstain")
        writer.writerow(row)
    return buf.getvalue()


# --------------------------------------------------------------------------
# tier ablation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    label: str
    tiers: tuple[str, ...]
    guard: bool
    commits: int
    correct: int
    queries_left: int
    demotions: int
    precision: float


BASE_TIERS = ("L0", "L1", "L2")

ABLATION_ROWS: tuple[tuple[str, tuple[str, ...], bool], ...] = (
    ("BASE", BASE_TIERS, False),
    *((f"+{tier}", tuple(dict.fromkeys(BASE_TIERS + (tier,))), False)
      for tier in SAFE_TIERS),
    ("+all", ALL_TIERS, False),
    ("+all+guard", ALL_TIERS, True),
)


def run_ablation(dataset: Dataset, config: Config,
                 gt_edges) -> list[AblationRow]:
    """Re-aggregate one cascade pass under each tier subset.

    The expensive per-pair statistics are computed once (every tier always
    runs); each row then folds the stored decisions with a different enabled
    set, so rows differ only in aggregation.  Commits are checked against
    the reference edges; pairs left IMPOSSIBLE are the queries a practitioner
    would still face.
    """
    from .skeleton import build_skeleton, mediator_search

    truth = {(int(a), int(b)) for a, b in gt_edges}
    skeleton = build_skeleton(dataset, config)
    mediators = mediator_search(skeleton, dataset, config)
    survivors = [p for p in skeleton.pairs if mediators.get(p) is None]
    verdicts = [run_cascade(dataset, pair, config) for pair in survivors]

    rows = []
    for label, tiers, guard in ABLATION_ROWS:
        commits = correct = queries_left = demotions = 0
        for verdict in verdicts:
            final, _cert, _by, demoted_by = aggregate(
                verdict.decisions, verdict.features,
                dataset.meta[verdict.pair[0]], dataset.meta[verdict.pair[1]],
                config, enabled=tiers, guard=guard)
            if final in ("FWD", "BWD"):
                commits += 1
                i, j = verdict.pair
                edge = (i, j) if final == "FWD" else (j, i)
                correct += edge in truth
            else:
                queries_left += 1
                demotions += demoted_by is not None
        precision = correct / commits if commits else 0.0
        rows.append(AblationRow(label=label, tiers=tiers, guard=guard,
                                commits=commits, correct=correct,
                                queries_left=queries_left,
                                demotions=demotions, precision=precision))
    return rows


def ablation_to_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["configuration", "commits", "correct", "queries_left",
                     "demotions", "precision"])
    for r in rows:
        writer.writerow([r.label, r.commits, r.correct, r.queries_left,
                         r.demotions, f"{r.precision:.3f}"])
    return buf.getvalue()


# --------------------------------------------------------------------------
# query/accuracy trade-off
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ParetoPoint:
    strategy: str
    queries: int
    precision: float
    recall: float
    f1: float


def run_pareto(dataset: Dataset, config: Config, gt_edges) -> list[ParetoPoint]:
    """Three operating points on the interaction/accuracy frontier:
    the gate-guarded tiers alone plus a 5-query per-edge budget, the
    hub-first mode with the full cascade on, and the pure hub protocol
    with the cascade off."""
    backend = GroundTruthBackend(gt_edges, len(dataset.names))
    points = []

    capped = config.replace(tier_mask=SAFE_TIERS, oracle_mode="PER_EDGE",
                            query_budget=5)
    res = run_iterative(dataset, capped, backend)
    points.append(_point("safe tiers + 5 queries", res.dag, gt_edges,
                         res.query_count))

    k = len({a for a, _ in gt_edges})
    hub = config.replace(oracle_mode="METAHUB_CHILDREN", metahub_k=k)
    res = run_iterative(dataset, hub, backend)
    points.append(_point("cascade + hub", res.dag, gt_edges, res.query_count))

    pure = run_pure_metahub(list(dataset.names), backend)
    points.append(_point("pure hub", pure.dag, gt_edges, pure.query_count))
    return points


def _point(strategy: str, dag: PartialDag, gt_edges, queries: int) -> ParetoPoint:
    report = evaluate(dag, gt_edges, queries=queries)
    return ParetoPoint(strategy=strategy, queries=queries,
                       precision=report.precision, recall=report.recall,
                       f1=report.f1)


def pareto_to_csv(points: list[ParetoPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "queries", "precision", "recall", "f1"])
    for p in points:
        writer.writerow([p.strategy, p.queries, f"{p.precision:.3f}",
                         f"{p.recall:.3f}", f"{p.f1:.3f}"])
    return buf.getvalue()


def pareto_to_svg(points: list[ParetoPoint], title: str = "") -> str:
    """Static SVG scatter of the interaction/accuracy frontier.

    One marker per (strategy, metric) with F1 points connected in query
    order; self-contained markup with no external assets.
    """
    width, height = 640, 420
    left, right, top, bottom = 70, 20, 40, 90
    plot_w, plot_h = width - left - right, height - top - bottom
    max_q = max((p.queries for p in points), default=1)
    x_hi = max(1, int(max_q * 1.15) + 1)

    def sx(q: float) -> float:
        return left + plot_w * q / x_hi

    def sy(v: float) -> float:
        return top + plot_h * (1.0 - v / 1.05)

    series = (("f1", "#1f6feb"), ("precision", "#2da44e"), ("recall", "#cf222e"))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    # axes and gridlines
    parts.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
                 f'y2="{top + plot_h}" stroke="#333"/>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" '
                 f'y2="{top + plot_h}" stroke="#333"/>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(tick)
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + plot_w}" '
                     f'y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" '
                     f'text-anchor="end">{tick:g}</text>')
    step = max(1, x_hi // 8)
    for q in range(0, x_hi + 1, step):
        x = sx(q)
        parts.append(f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" '
                     f'y2="{top + plot_h + 4}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{top + plot_h + 18}" '
                     f'text-anchor="middle">{q}</text>')
    parts.append(f'<text x="{left + plot_w / 2:.0f}" y="{height - 52}" '
                 f'text-anchor="middle">oracle interactions</text>')
    parts.append(f'<text x="18" y="{top + plot_h / 2:.0f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {top + plot_h / 2:.0f})">score</text>')

    ordered = sorted(points, key=lambda p: p.queries)
    for metric, color in series:
        coords = [(sx(p.queries), sy(getattr(p, metric))) for p in ordered]
        if metric == "f1" and len(coords) > 1:
            path = " ".join(f"{'M' if k == 0 else 'L'}{x:.1f},{y:.1f}"
                            for k, (x, y) in enumerate(coords))
            parts.append(f'<path d="{path}" fill="none" stroke="{color}" '
                         f'stroke-width="1.5" stroke-dasharray="4,3"/>')
        for (x, y), p in zip(coords, ordered):
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" '
                         f'fill="{color}"><title>{p.strategy} {metric}='
                         f'{getattr(p, metric):.3f}</title></circle>')
    for p in ordered:
        parts.append(f'<text x="{sx(p.queries):.1f}" '
                     f'y="{sy(p.f1) - 10:.1f}" text-anchor="middle" '
                     f'font-size="11">{p.strategy} ({p.queries}q)</text>')
    # legend
    lx = left + 10
    for k, (metric, color) in enumerate(series):
        y = height - 30
        x = lx + k * 110
        parts.append(f'<circle cx="{x}" cy="{y}" r="4" fill="{color}"/>')
        parts.append(f'<text x="{x + 10}" y="{y + 4}">{metric}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
