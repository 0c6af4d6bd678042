"""Stage 1: the FDR-controlled marginal-dependence skeleton and the
multi-tier mediator search that prunes explained-away pairs.

Every unordered pair is tested for marginal dependence with HSIC; a single
Benjamini-Hochberg pass across all pairs keeps the discovery rate at
``config.fdr_level``.  Surviving pairs then get a mediator search: tier 1
conditions on each single common neighbor, tier 2 on each 2-subset of common
neighbors (joint residualization), tier 3 on the pooled skeleton
neighborhood of both endpoints (a Markov-blanket proxy, capped at 8 nodes by
dependence strength).  The first conditioning set under which the residuals
test independent wins; such pairs are certified RESOLVED_MEDIATED and
dropped from the candidate set.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import Config, Dataset, canonical
from . import stats

MB_CAP = 8          # tier-3 conditioning-set size cap


@dataclass(frozen=True)
class Skeleton:
    pairs: tuple[tuple[int, int], ...]            # retained, sorted
    marginal_p: dict[tuple[int, int], float]      # all tested pairs

    def neighbors(self, v: int) -> list[int]:
        out = {b for a, b in self.pairs if a == v}
        out |= {a for a, b in self.pairs if b == v}
        return sorted(out)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return canonical(*pair) in set(self.pairs)


@dataclass(frozen=True)
class MediatorVerdict:
    pair: tuple[int, int]
    mediated_by: tuple[int, ...]
    tier: int
    p_conditional: float


def build_skeleton(dataset: Dataset, config: Config) -> Skeleton:
    """Test all V(V-1)/2 pairs marginally; one BH-FDR pass across them."""
    pairs = [(i, j) for i in range(dataset.v) for j in range(i + 1, dataset.v)]
    p_values = {}
    for i, j in pairs:
        res = stats.hsic_test(
            dataset.column(i), dataset.column(j),
            permutations=config.permutations,
            seed=stats.stable_seed(config.seed, "skeleton", i, j),
            method=config.hsic_method, max_n=config.hsic_max_n)
        p_values[(i, j)] = res.p_value
    if not pairs:
        return Skeleton(pairs=(), marginal_p={})
    mask = stats.bh_fdr(np.array([p_values[p] for p in pairs]), config.fdr_level)
    kept = tuple(p for p, keep in zip(pairs, mask) if keep)
    return Skeleton(pairs=kept, marginal_p=p_values)


def _residual_independence(dataset: Dataset, pair: tuple[int, int],
                           cond: tuple[int, ...], config: Config) -> float:
    """Regress both endpoints on the conditioning set (nonlinear, joint for
    multi-node sets) and HSIC-test the residuals; the p-value is evidence the
    pair's dependence flows through ``cond``."""
    i, j = pair
    z = dataset.data[:, list(cond)]
    seed = stats.stable_seed(config.seed, "mediator", i, j, *cond)
    fit_i = stats.fit_regression(z, dataset.column(i), "nonlinear",
                                 seed=stats.stable_seed(seed, "i"))
    fit_j = stats.fit_regression(z, dataset.column(j), "nonlinear",
                                 seed=stats.stable_seed(seed, "j"))
    res = stats.hsic_test(fit_i.residuals, fit_j.residuals,
                          permutations=config.permutations,
                          seed=stats.stable_seed(seed, "h"),
                          method=config.hsic_method, max_n=config.hsic_max_n)
    return res.p_value


def _tier3_set(skeleton: Skeleton, pair: tuple[int, int]) -> tuple[int, ...]:
    """Pooled neighborhood of both endpoints, strongest-dependence first,
    capped at MB_CAP nodes."""
    i, j = pair
    candidates = {v for v in skeleton.neighbors(i) + skeleton.neighbors(j)
                  if v not in pair}

    def strength(v: int) -> tuple[float, int]:
        ps = [skeleton.marginal_p.get(canonical(v, u), 1.0) for u in pair]
        return (min(ps), v)          # low p = strong dependence; id tie-break

    ranked = sorted(candidates, key=strength)
    return tuple(sorted(ranked[:MB_CAP]))


def mediator_search(skeleton: Skeleton, dataset: Dataset,
                    config: Config) -> dict[tuple[int, int], MediatorVerdict | None]:
    """For each skeleton pair, find the lowest tier whose conditioning set
    renders the endpoints independent.  Tier 1 wins over tier 2 wins over
    tier 3; tiers above config.mediator_max_tier are never consulted."""
    verdicts: dict[tuple[int, int], MediatorVerdict | None] = {}
    for pair in skeleton.pairs:
        i, j = pair
        common = sorted(set(skeleton.neighbors(i)) & set(skeleton.neighbors(j)))
        verdict = None

        for z in common:                                   # tier 1
            p = _residual_independence(dataset, pair, (z,), config)
            if p > config.alpha_residual:
                verdict = MediatorVerdict(pair, (z,), 1, p)
                break

        if verdict is None and config.mediator_max_tier >= 2:
            for zs in combinations(common, 2):             # tier 2
                p = _residual_independence(dataset, pair, zs, config)
                if p > config.alpha_residual:
                    verdict = MediatorVerdict(pair, zs, 2, p)
                    break

        if verdict is None and config.mediator_max_tier >= 3:
            zs = _tier3_set(skeleton, pair)                # tier 3
            if zs and set(zs) - set(common):               # adds information
                p = _residual_independence(dataset, pair, zs, config)
                if p > config.alpha_residual:
                    verdict = MediatorVerdict(pair, zs, 3, p)

        verdicts[pair] = verdict
    return verdicts
