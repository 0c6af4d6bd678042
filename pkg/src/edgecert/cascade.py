"""The eight-tier identifiability cascade: verdict aggregation, the
L0-disagreement guard, and the impossibility-certificate classifier.

``run_cascade`` computes every tier's decision for a pair and aggregates them
into a CascadeVerdict.  Aggregation is a pure function of the decision list,
so ablation tooling can re-score alternative tier subsets (with or without
the guard) from one computed pass — see ``aggregate``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import ALL_TIERS, CertificateCode, Config, Dataset, Direction, VariableMeta, canonical
from .tiers import (BWD, FWD, GUARD_TIERS, PairFeatures, TierDecision,
                    decide_all)
from . import stats

# regime-detector constants (support size / dispersion picked once; the
# labels matter, the exact cutoffs are operational)
COUNT_MAX_SUPPORT = 30
COUNT_DISPERSION = 1.2
HIGH_CARDINALITY_MIN = 30


@dataclass
class CascadeVerdict:
    pair: tuple[int, int]
    decisions: list[TierDecision]
    final: str                               # FWD | BWD | IMPOSSIBLE
    certificate: CertificateCode
    committed_by: str | None = None          # tier id, or None
    demoted_by: str | None = None            # guard witness tier, if demoted
    features: PairFeatures | None = None

    @property
    def direction(self) -> Direction | None:
        if self.final == FWD:
            return Direction.FWD
        if self.final == BWD:
            return Direction.BWD
        return None

    def decision_for(self, tier: str) -> TierDecision:
        for d in self.decisions:
            if d.tier == tier:
                return d
        raise KeyError(tier)

    def detail_json(self) -> str:
        """One JSON blob per pair with all tier scores, for the trace CSV."""
        blob = {
            "certificate": self.certificate.value,
            "committed_by": self.committed_by,
            "tiers": {d.tier: {"outcome": d.outcome,
                               "gate": d.gate_passed,
                               "scores": d.scores}
                      for d in self.decisions},
        }
        if self.demoted_by:
            blob["demoted_by"] = self.demoted_by
        return json.dumps(blob, sort_keys=True, default=float)


def classify_impossible(features: PairFeatures, meta_x: VariableMeta,
                        meta_y: VariableMeta, config: Config) -> CertificateCode:
    """Name the reason no tier could commit.  Regime detectors run first
    (they pick the cheaper targeted question), then the classical failure
    modes, then the generic fallback.  Total function."""
    # -- regime detectors -------------------------------------------------
    if meta_x.flagged_circular or meta_y.flagged_circular:
        return CertificateCode.IMPOSSIBLE_CIRCULAR
    binary = (meta_x.is_binary, meta_y.is_binary)
    integer = (meta_x.is_integer, meta_y.is_integer)
    if (binary[0] and not integer[1]) or (binary[1] and not integer[0]):
        return CertificateCode.IMPOSSIBLE_BINARY_CONTINUOUS
    for meta in (meta_x, meta_y):
        if (meta.is_integer and not meta.is_binary
                and meta.cardinality <= COUNT_MAX_SUPPORT
                and meta.dispersion > COUNT_DISPERSION):
            return CertificateCode.IMPOSSIBLE_COUNT
    for meta in (meta_x, meta_y):
        if meta.is_integer and meta.cardinality > HIGH_CARDINALITY_MIN:
            return CertificateCode.IMPOSSIBLE_HIGH_CARDINALITY_DISCRETE

    # -- classical failure modes ------------------------------------------
    alpha = config.alpha_residual
    lin_acc = (features.lin_p[FWD] > alpha, features.lin_p[BWD] > alpha)
    nl_acc = (features.nl_p[FWD] > alpha, features.nl_p[BWD] > alpha)
    gaussian_symmetric = (not features.non_gaussian and all(lin_acc))
    if gaussian_symmetric:
        return CertificateCode.IMPOSSIBLE_R1
    if not any(lin_acc) and not any(nl_acc):
        return CertificateCode.IMPOSSIBLE_LATENT_LIKELY

    def one_sided(acc: tuple[bool, bool]) -> str | None:
        if acc[0] and not acc[1]:
            return FWD
        if acc[1] and not acc[0]:
            return BWD
        return None

    lin_dir, nl_dir = one_sided(lin_acc), one_sided(nl_acc)
    if lin_dir and nl_dir and lin_dir != nl_dir:
        return CertificateCode.IMPOSSIBLE_REGRESSOR_INCONSISTENT
    if nl_dir is not None:
        # nonlinear engine picked a side but the margin was too weak to commit
        return CertificateCode.IMPOSSIBLE_NONLINEAR_WEAK
    if 0.0 < abs(features.l2_stat) <= config.l2_threshold:
        return CertificateCode.IMPOSSIBLE_HOC_AMBIGUOUS
    return CertificateCode.IMPOSSIBLE_AMBIGUOUS


def aggregate(decisions: list[TierDecision], features: PairFeatures,
              meta_x: VariableMeta, meta_y: VariableMeta, config: Config,
              enabled: tuple[str, ...] | None = None,
              guard: bool = True) -> tuple[str, CertificateCode, str | None, str | None]:
    """Fold a decision list into (final, certificate, committed_by,
    demoted_by).  ``enabled`` restricts the tier subset (default: the config
    mask); ``guard`` applies the L0-disagreement demotion."""
    enabled_set = set(config.enabled_tiers() if enabled is None else enabled)
    first = next((d for d in decisions
                  if d.tier in enabled_set and d.outcome != "ABSTAIN"), None)
    if first is None:
        code = classify_impossible(features, meta_x, meta_y, config)
        return "IMPOSSIBLE", code, None, None
    if guard and first.tier == "L0":
        for d in decisions:
            if (d.tier in GUARD_TIERS and d.tier in enabled_set
                    and d.outcome not in ("ABSTAIN", first.outcome)):
                return ("IMPOSSIBLE",
                        CertificateCode.IMPOSSIBLE_L0_DISAGREES_WITH_HIGH_TIER,
                        None, d.tier)
    return first.outcome, CertificateCode.RESOLVED_DECISIVE, first.tier, None


def run_cascade(dataset: Dataset, pair: tuple[int, int],
                config: Config) -> CascadeVerdict:
    """Evaluate all eight tiers on one skeleton pair and aggregate.

    Every tier is always evaluated (lattice order, no short-circuit): the
    guard needs the high tiers' opinions even when L0 commits, and the trace
    records all scores for ablation re-aggregation.
    """
    i, j = canonical(*pair)
    x, y = dataset.column(i), dataset.column(j)
    meta_x, meta_y = dataset.meta[i], dataset.meta[j]
    seed = stats.stable_seed(config.seed, "cascade", i, j)
    features = PairFeatures.compute(x, y, meta_x, meta_y, config, seed)
    decisions = decide_all(features, config)
    final, certificate, committed_by, demoted_by = aggregate(
        decisions, features, meta_x, meta_y, config)
    return CascadeVerdict(pair=(i, j), decisions=decisions, final=final,
                          certificate=certificate, committed_by=committed_by,
                          demoted_by=demoted_by, features=features)


def run_cascade_all(dataset: Dataset, pairs: list[tuple[int, int]],
                    config: Config) -> list[CascadeVerdict]:
    """Cascade over many pairs in skeleton order (deterministic)."""
    return [run_cascade(dataset, p, config) for p in sorted(pairs)]
