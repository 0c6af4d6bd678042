"""Zero-query auto-resolution: acyclicity/Meek propagation gated by a
bivariate confirm-ratio, parent-conditioned re-audit, and transitive
d-separation.  These run after the cascade and again after every oracle
answer, so each expert interaction is amplified by every free consequence it
licenses.

All statistics flow through a RunCache: hypothetical what-if propagation
(info-value scoring) replays these rules many times per query selection, and
the underlying regressions/HSIC tests depend only on (dataset, config, pair,
conditioning set), never on graph state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .model import CertificateCode, Config, Dataset, Direction, PartialDag, Trace, TraceEvent, canonical
from . import stats

RULE_ACYCLICITY = "ACYCLICITY"
RULE_R1 = "MEEK_R1"
RULE_R3 = "MEEK_R3"
RULE_REAUDIT = "REAUDIT"
RULE_TRANSITIVE_DSEP = "TRANSITIVE_DSEP"


class RunCache:
    """Memo for direction p-values and conditional-independence p-values.

    Keyed purely by data-side arguments, so one cache serves the real run and
    every hypothetical copy of the graph."""

    def __init__(self) -> None:
        self.direction_p: dict[tuple[int, int], tuple[float, float]] = {}
        self.cond_p: dict[tuple, float] = {}


def _direction_pvalues(dataset: Dataset, pair: tuple[int, int], config: Config,
                       cache: RunCache) -> tuple[float, float]:
    """Nonlinear-ANM residual-independence p-values (FWD, BWD) for a pair."""
    pair = canonical(*pair)
    if pair in cache.direction_p:
        return cache.direction_p[pair]
    i, j = pair
    seed = stats.stable_seed(config.seed, "dirp", i, j)
    out = []
    for tag, a, b in (("F", dataset.column(i), dataset.column(j)),
                      ("B", dataset.column(j), dataset.column(i))):
        fit = stats.fit_regression(a, b, "nonlinear",
                                   seed=stats.stable_seed(seed, tag))
        res = stats.hsic_test(a, fit.residuals,
                              permutations=config.permutations,
                              seed=stats.stable_seed(seed, tag, "h"),
                              method=config.hsic_method,
                              max_n=config.hsic_max_n)
        out.append(res.p_value)
    cache.direction_p[pair] = (out[0], out[1])
    return cache.direction_p[pair]


def _conditional_p(dataset: Dataset, pair: tuple[int, int],
                   cond: tuple[int, ...], config: Config,
                   cache: RunCache) -> float:
    """Residual HSIC p-value for the pair given a conditioning set."""
    pair = canonical(*pair)
    key = (pair, cond)
    if key in cache.cond_p:
        return cache.cond_p[key]
    i, j = pair
    z = dataset.data[:, list(cond)]
    seed = stats.stable_seed(config.seed, "dsep", i, j, *cond)
    fit_i = stats.fit_regression(z, dataset.column(i), "nonlinear",
                                 seed=stats.stable_seed(seed, "i"))
    fit_j = stats.fit_regression(z, dataset.column(j), "nonlinear",
                                 seed=stats.stable_seed(seed, "j"))
    res = stats.hsic_test(fit_i.residuals, fit_j.residuals,
                          permutations=config.permutations,
                          seed=stats.stable_seed(seed, "h"),
                          method=config.hsic_method, max_n=config.hsic_max_n)
    cache.cond_p[key] = res.p_value
    return res.p_value


@dataclass
class PropagationReport:
    new_commits: list[tuple[tuple[int, int], Direction | None, str]] = field(default_factory=list)
    confirm_ratios: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def resolution_count(self) -> int:
        return len(self.new_commits)

    def merge(self, other: "PropagationReport") -> None:
        self.new_commits.extend(other.new_commits)
        self.confirm_ratios.update(other.confirm_ratios)

    def snapshot(self) -> dict:
        return {
            "new_commits": [
                {"edge": list(pair),
                 "direction": d.value if d is not None else None,
                 "rule": rule}
                for pair, d, rule in self.new_commits],
            "confirm_ratios": {f"{i}-{j}": r
                               for (i, j), r in self.confirm_ratios.items()},
        }


def _confirm_ratio(dataset: Dataset, pair: tuple[int, int],
                   direction: Direction, config: Config,
                   cache: RunCache) -> float:
    p_fwd, p_bwd = _direction_pvalues(dataset, pair, config, cache)
    cand, opp = (p_fwd, p_bwd) if direction is Direction.FWD else (p_bwd, p_fwd)
    return cand / max(opp, stats.EPS)


def _log(trace: Trace | None, round_no: int, mechanism: str,
         pair: tuple[int, int], action: str, detail: str) -> None:
    if trace is not None:
        trace.append(TraceEvent(round=round_no, mechanism=mechanism,
                                edge_i=pair[0], edge_j=pair[1],
                                action=action, detail=detail, bits=0.0))


def _commit(dag: PartialDag, pair: tuple[int, int], direction: Direction,
            rule: str, ratio: float | None, report: PropagationReport,
            trace: Trace | None, round_no: int, mechanism: str) -> None:
    dag.commit(pair[0], pair[1], direction, CertificateCode.RESOLVED_DECISIVE,
               provenance=rule)
    report.new_commits.append((pair, direction, rule))
    if ratio is not None:
        report.confirm_ratios[pair] = ratio
    action = "COMMIT_FWD" if direction is Direction.FWD else "COMMIT_BWD"
    detail = {"rule": rule}
    if ratio is not None:
        detail["confirm_ratio"] = round(ratio, 6)
    _log(trace, round_no, mechanism, pair, action,
         json.dumps(detail, sort_keys=True))


def propagate(dag: PartialDag, dataset: Dataset, config: Config,
              trace: Trace | None = None, round_no: int = 0,
              cache: RunCache | None = None) -> PropagationReport:
    """Acyclicity + Meek R1 + Meek R3 to fixpoint over OPEN pairs.

    R1/R3 candidates additionally need the bivariate confirm-ratio (p-value
    of residual independence in the candidate direction over the opposite)
    to reach config.confirm_ratio; a zero configures the gate off.
    Acyclicity-forced orientations are logically entailed and skip the gate.
    """
    cache = cache or RunCache()
    report = PropagationReport()
    if not config.propagation_enabled:
        return report

    def gate(pair: tuple[int, int], direction: Direction) -> float | None:
        """Returns the ratio when the gate passes, else None."""
        if config.confirm_ratio == 0:
            return 0.0
        ratio = _confirm_ratio(dataset, pair, direction, config, cache)
        return ratio if ratio >= config.confirm_ratio else None

    changed = True
    while changed:
        changed = False

        # (a) acyclicity: one orientation would close a directed cycle
        for pair in dag.open_pairs():
            i, j = pair
            if dag.has_directed_path(j, i):          # i->j would cycle
                _commit(dag, pair, Direction.BWD, RULE_ACYCLICITY, None,
                        report, trace, round_no, "M6")
                changed = True
            elif dag.has_directed_path(i, j):        # j->i would cycle
                _commit(dag, pair, Direction.FWD, RULE_ACYCLICITY, None,
                        report, trace, round_no, "M6")
                changed = True

        # (b) Meek R1: a->b committed, (b,c) open, a and c non-adjacent
        for pair in dag.open_pairs():
            state = dag.state(*pair)
            if state is None or state.status.value != "OPEN":
                continue
            fired = False
            for b, c in (pair, pair[::-1]):
                for a in dag.parents(b):
                    if (a != c and not dag.adjacent(a, c)
                            and not dag.has_directed_path(c, b)):
                        direction = Direction.FWD if b < c else Direction.BWD
                        ratio = gate(canonical(b, c), direction)
                        if ratio is not None:
                            _commit(dag, canonical(b, c), direction, RULE_R1,
                                    ratio or None, report, trace, round_no, "M6")
                            changed = fired = True
                            break
                if fired:
                    break

        # (c) Meek R3: (a,b) open; c->b, d->b committed; (a,c), (a,d) open;
        #     c and d non-adjacent
        for pair in dag.open_pairs():
            state = dag.state(*pair)
            if state is None or state.status.value != "OPEN":
                continue
            fired = False
            for a, b in (pair, pair[::-1]):
                parents_b = [p for p in dag.parents(b) if p != a]
                for idx, c in enumerate(parents_b):
                    for d in parents_b[idx + 1:]:
                        def is_open(u: int, v: int) -> bool:
                            st = dag.state(*canonical(u, v))
                            return st is not None and st.status.value == "OPEN"
                        if (is_open(a, c) and is_open(a, d)
                                and not dag.adjacent(c, d)
                                and not dag.has_directed_path(b, a)):
                            direction = Direction.FWD if a < b else Direction.BWD
                            ratio = gate(canonical(a, b), direction)
                            if ratio is not None:
                                _commit(dag, canonical(a, b), direction,
                                        RULE_R3, ratio or None, report, trace,
                                        round_no, "M6")
                                fired = True
                                break
                    if fired:
                        break
                if fired:
                    changed = True
                    break
    return report


def reaudit_conditioned(dag: PartialDag, dataset: Dataset, config: Config,
                        trace: Trace | None = None, round_no: int = 0,
                        cache: RunCache | None = None) -> PropagationReport:
    """Parent-conditioned ANM re-audit (M7): residualize each OPEN pair's
    endpoints on their committed parents and rerun the L0/L1 decision on the
    residual pair.  Pairs whose endpoints have no committed parents carry no
    new information and are skipped."""
    report = PropagationReport()
    for pair in dag.open_pairs():
        i, j = pair
        parents_i = tuple(dag.parents(i))
        parents_j = tuple(dag.parents(j))
        if not parents_i and not parents_j:
            continue
        seed = stats.stable_seed(config.seed, "reaudit", i, j,
                                 *parents_i, "|", *parents_j)
        res_i = dataset.column(i)
        if parents_i:
            res_i = stats.fit_regression(dataset.data[:, list(parents_i)],
                                         res_i, "nonlinear",
                                         seed=stats.stable_seed(seed, "ri")).residuals
        res_j = dataset.column(j)
        if parents_j:
            res_j = stats.fit_regression(dataset.data[:, list(parents_j)],
                                         res_j, "nonlinear",
                                         seed=stats.stable_seed(seed, "rj")).residuals

        direction = None
        for kind, margin in (("linear", 0.0), ("nonlinear", config.l1_margin)):
            p = {}
            for tag, a, b in (("F", res_i, res_j), ("B", res_j, res_i)):
                fit = stats.fit_regression(a, b, kind,
                                           seed=stats.stable_seed(seed, kind, tag))
                p[tag] = stats.hsic_test(
                    a, fit.residuals, permutations=config.permutations,
                    seed=stats.stable_seed(seed, kind, tag, "h"),
                    method=config.hsic_method, max_n=config.hsic_max_n).p_value
            acc_f = p["F"] > config.alpha_residual
            acc_b = p["B"] > config.alpha_residual
            if acc_f != acc_b and abs(p["F"] - p["B"]) >= margin:
                direction = Direction.FWD if acc_f else Direction.BWD
                break

        if direction is None and config.reaudit_safe_tiers:
            # optional variant: full cascade on the residual stream
            from .model import VariableMeta
            from .tiers import PairFeatures, decide_all
            meta = VariableMeta(is_integer=False, cardinality=res_i.size,
                                is_binary=False)
            feats = PairFeatures.compute(res_i, res_j, meta, meta, config,
                                         stats.stable_seed(seed, "safe"))
            enabled = set(config.enabled_tiers())
            for decision in decide_all(feats, config):
                if decision.tier in enabled and decision.outcome != "ABSTAIN":
                    direction = Direction(decision.outcome)
                    break

        if direction is not None:
            if dag.has_directed_path(
                    pair[1] if direction is Direction.FWD else pair[0],
                    pair[0] if direction is Direction.FWD else pair[1]):
                continue          # would close a cycle; leave for acyclicity
            _commit(dag, pair, direction, RULE_REAUDIT, None, report,
                    trace, round_no, "M7")
    return report


def transitive_dsep(dag: PartialDag, dataset: Dataset, config: Config,
                    trace: Trace | None = None, round_no: int = 0,
                    cache: RunCache | None = None) -> PropagationReport:
    """Transitive d-separation (M8): re-test each OPEN pair given the union
    of both endpoints' committed parents; accepted independence DROPs the
    pair."""
    cache = cache or RunCache()
    report = PropagationReport()
    for pair in dag.open_pairs():
        i, j = pair
        cond = tuple(sorted((set(dag.parents(i)) | set(dag.parents(j))) - {i, j}))
        if not cond:
            continue
        p = _conditional_p(dataset, pair, cond, config, cache)
        if p > config.alpha_residual:
            dag.drop(i, j, None, provenance=RULE_TRANSITIVE_DSEP)
            report.new_commits.append((pair, None, RULE_TRANSITIVE_DSEP))
            _log(trace, round_no, "M8", pair, "DROP",
                 json.dumps({"rule": RULE_TRANSITIVE_DSEP,
                             "cond": list(cond),
                             "p": round(p, 6)}, sort_keys=True))
    return report


def run_auto_resolution(dag: PartialDag, dataset: Dataset, config: Config,
                        trace: Trace | None = None, round_no: int = 0,
                        cache: RunCache | None = None,
                        include_reaudit: bool = True) -> PropagationReport:
    """M6 -> M7 -> M8 to a joint fixpoint (each pass can enable the others)."""
    cache = cache or RunCache()
    total = PropagationReport()
    while True:
        before = total.resolution_count
        total.merge(propagate(dag, dataset, config, trace, round_no, cache))
        if include_reaudit:
            total.merge(reaudit_conditioned(dag, dataset, config, trace,
                                            round_no, cache))
        total.merge(transitive_dsep(dag, dataset, config, trace, round_no,
                                    cache))
        if total.resolution_count == before:
            return total
