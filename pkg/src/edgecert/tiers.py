"""Per-pair direction evidence and the eight-tier decision functions.

``PairFeatures.compute`` runs every statistic a tier decision can consume —
linear/nonlinear/location-scale residual-independence p-values, slope scores,
score-function Fisher information, two-part codelengths, cumulant statistics,
and rank-normalized residual entropies — exactly once per unordered pair.
The tier deciders themselves are pure threshold functions of those features,
so ablation tooling can re-aggregate decisions without re-running statistics.

Direction convention: for the canonical pair (i, j) with i < j, FWD means
i -> j and BWD means j -> i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kurtosis, norm

from .model import ALL_TIERS, Config, Direction, VariableMeta
from . import stats

FWD = Direction.FWD.value
BWD = Direction.BWD.value
SAFE_TIERS = ("L_LSNM", "L_IGCI", "L_STEIN", "L_MDL", "L_PEIT")
GUARD_TIERS = ("L_IGCI", "L_STEIN", "L_MDL")

_LOG_FLOOR = 1e-8          # variance floor inside the log-scale model
_SCORE_TRIM = 0.02         # tail fraction excluded from the Fisher moment


@dataclass
class TierDecision:
    tier: str
    outcome: str                      # FWD | BWD | ABSTAIN
    gate_passed: bool
    scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.outcome not in (FWD, BWD, "ABSTAIN"):
            raise ValueError(f"bad outcome {self.outcome}")
        if not self.gate_passed and self.outcome != "ABSTAIN":
            raise ValueError("gate rejected but tier committed")

    def snapshot(self) -> dict:
        return {"tier": self.tier, "outcome": self.outcome,
                "gate_passed": self.gate_passed, "scores": dict(self.scores)}


def rank_gaussianize(v: np.ndarray) -> np.ndarray:
    """Monotone map of the sample to exact standard-normal quantiles; ties
    are broken by stable sort order so the map is deterministic."""
    v = np.asarray(v, float).ravel()
    order = np.argsort(np.argsort(v, kind="stable"), kind="stable")
    return norm.ppf((order + 0.5) / v.size)


def igci_slope_score(x: np.ndarray, y: np.ndarray) -> float:
    """Slope-based IGCI score of x -> y with both marginals min-max scaled
    to [0, 1]; lower score favors the direction."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    sx = (x - x.min()) / max(np.ptp(x), stats.EPS)
    sy = (y - y.min()) / max(np.ptp(y), stats.EPS)
    order = np.argsort(sx, kind="stable")
    dx = np.diff(sx[order])
    dy = np.diff(sy[order])
    mask = (np.abs(dx) > stats.EPS) & (np.abs(dy) > stats.EPS)
    if not mask.any():
        return 0.0
    return float(np.mean(np.log(np.abs(dy[mask]) / np.abs(dx[mask]))))


def hoc_lingam_statistic(x: np.ndarray, y: np.ndarray, kurt_floor: float) -> float:
    """Pairwise cumulant-based LiNGAM measure; positive favors x -> y.
    Zero when the average excess kurtosis is inside the floor (no
    higher-order signal to read)."""
    xs = (x - x.mean()) / max(x.std(), stats.EPS)
    ys = (y - y.mean()) / max(y.std(), stats.EPS)
    rho = float(np.mean(xs * ys))
    c = rho * (float(np.mean(xs ** 3 * ys)) - float(np.mean(xs * ys ** 3)))
    k = 0.5 * (float(kurtosis(xs)) + float(kurtosis(ys)))
    if abs(k) <= kurt_floor:
        return 0.0
    return c * math.copysign(1.0, k)


def score_fisher_information(u: np.ndarray,
                             trim: float = _SCORE_TRIM) -> float:
    """Mean squared estimated score of the standardized residual (empirical
    Fisher information).  Unit-variance Gaussian noise minimizes it at 1, so
    the causal direction of a location-scale pair shows the smaller value.
    Tails are trimmed because the score estimate is unstable at the sample
    extremes."""
    u = np.asarray(u, float).ravel()
    sd = u.std()
    if not np.isfinite(sd) or sd <= 0:
        return float("inf")
    u = (u - u.mean()) / sd
    sc = stats.knn_score(u)
    lo, hi = np.quantile(u, [trim, 1.0 - trim])
    mask = (u >= lo) & (u <= hi)
    if not mask.any():
        return float("inf")
    return float(np.mean(sc[mask] ** 2))


def _codelength(cause: np.ndarray, resid: np.ndarray, cause_integer: bool,
                target_integer: bool, n_params: int, n: int) -> float:
    """Two-part code: marginal entropy of the cause plus residual entropy
    plus 0.5 ln N per parameter (normalized per sample)."""
    h_cause = (stats.shannon_entropy(np.round(cause)) if cause_integer
               else stats.differential_entropy(cause))
    h_resid = (stats.shannon_entropy(np.round(resid)) if target_integer
               else stats.differential_entropy(resid))
    penalty = 0.5 * math.log(n) * n_params / n
    return h_cause + h_resid + penalty


@dataclass
class PairFeatures:
    """Everything the tiers, the guard, and the certificate classifier read."""

    n: int
    sw_x: float
    sw_y: float
    int_x: bool
    int_y: bool
    lin_p: dict[str, float]
    nl_p: dict[str, float]
    hetero_p: dict[str, float]
    lsnm_p: dict[str, float]
    stein_j: dict[str, float]
    mdl_code: dict[str, float]
    peit_h: dict[str, float]
    igci_delta: float
    l2_stat: float

    @classmethod
    def compute(cls, x: np.ndarray, y: np.ndarray, meta_x: VariableMeta,
                meta_y: VariableMeta, config: Config, seed: int) -> "PairFeatures":
        x = np.asarray(x, float).ravel()
        y = np.asarray(y, float).ravel()
        n = x.size
        hsic_kw = dict(permutations=config.permutations,
                       method=config.hsic_method, max_n=config.hsic_max_n)

        lin_p: dict[str, float] = {}
        nl_p: dict[str, float] = {}
        hetero_p: dict[str, float] = {}
        lsnm_p: dict[str, float] = {}
        stein_j: dict[str, float] = {}
        mdl_code: dict[str, float] = {}
        for tag, pred, targ, pred_int, targ_int in (
                (FWD, x, y, meta_x.is_integer, meta_y.is_integer),
                (BWD, y, x, meta_y.is_integer, meta_x.is_integer)):
            lin = stats.fit_regression(pred, targ, "linear",
                                       seed=stats.stable_seed(seed, "lin", tag))
            lin_p[tag] = stats.hsic_test(
                pred, lin.residuals, seed=stats.stable_seed(seed, "lin-h", tag),
                **hsic_kw).p_value

            nl = stats.fit_regression(pred, targ, "nonlinear",
                                      seed=stats.stable_seed(seed, "nl", tag))
            nl_p[tag] = stats.hsic_test(
                pred, nl.residuals, seed=stats.stable_seed(seed, "nl-h", tag),
                **hsic_kw).p_value
            hetero_p[tag] = stats.hsic_test(
                pred, nl.residuals ** 2,
                seed=stats.stable_seed(seed, "het-h", tag), **hsic_kw).p_value

            log_var = np.log(nl.residuals ** 2 + _LOG_FLOOR)
            scale_fit = stats.fit_regression(
                pred, log_var, "nonlinear",
                seed=stats.stable_seed(seed, "scale", tag))
            u = nl.residuals / np.maximum(np.exp(0.5 * scale_fit.fitted),
                                          _LOG_FLOOR)
            lsnm_p[tag] = stats.hsic_test(
                pred, u, seed=stats.stable_seed(seed, "lsnm-h", tag),
                **hsic_kw).p_value
            stein_j[tag] = score_fisher_information(u)

            resid = targ - (np.round(nl.fitted) if targ_int else nl.fitted)
            mdl_code[tag] = _codelength(pred, resid, pred_int, targ_int,
                                        n_params=min(n, stats.KRR_MAX_FIT), n=n)

        xg = rank_gaussianize(x)
        yg = rank_gaussianize(y)
        peit_h: dict[str, float] = {}
        for tag, pred, targ in ((FWD, xg, yg), (BWD, yg, xg)):
            fit = stats.fit_regression(pred, targ, "nonlinear",
                                       seed=stats.stable_seed(seed, "peit", tag))
            peit_h[tag] = stats.differential_entropy(fit.residuals)

        return cls(
            n=n,
            sw_x=stats.shapiro_wilk(x, seed=stats.stable_seed(seed, "sw", "x")),
            sw_y=stats.shapiro_wilk(y, seed=stats.stable_seed(seed, "sw", "y")),
            int_x=meta_x.is_integer,
            int_y=meta_y.is_integer,
            lin_p=lin_p, nl_p=nl_p, hetero_p=hetero_p, lsnm_p=lsnm_p,
            stein_j=stein_j, mdl_code=mdl_code, peit_h=peit_h,
            igci_delta=igci_slope_score(y, x) - igci_slope_score(x, y),
            l2_stat=hoc_lingam_statistic(x, y, config.l2_floor),
        )

    @property
    def non_gaussian(self) -> bool:
        return min(self.sw_x, self.sw_y) < 0.05

    def snapshot(self) -> dict:
        return {
            "n": self.n, "sw_x": self.sw_x, "sw_y": self.sw_y,
            "int_x": self.int_x, "int_y": self.int_y,
            "lin_p": dict(self.lin_p), "nl_p": dict(self.nl_p),
            "hetero_p": dict(self.hetero_p), "lsnm_p": dict(self.lsnm_p),
            "stein_j": dict(self.stein_j), "mdl_code": dict(self.mdl_code),
            "peit_h": dict(self.peit_h), "igci_delta": self.igci_delta,
            "l2_stat": self.l2_stat,
        }


# ---------------------------------------------------------------------------
# Gates


def gate(tier: str, features: PairFeatures, config: Config) -> bool:
    """Precondition test per tier.  L0/L1/L2 are ungated; the safe tiers
    require non-Gaussianity, non-integer data (Stein), or heteroscedasticity
    (LSNM)."""
    if tier in ("L0", "L1", "L2"):
        return True
    non_gauss = min(features.sw_x, features.sw_y) < config.gauss_gate_p
    if tier in ("L_IGCI", "L_MDL", "L_PEIT"):
        return non_gauss
    if tier == "L_STEIN":
        return non_gauss and not (features.int_x or features.int_y)
    if tier == "L_LSNM":
        return min(features.hetero_p[FWD],
                   features.hetero_p[BWD]) < config.hetero_gate_p
    raise ValueError(f"unknown tier {tier}")


# ---------------------------------------------------------------------------
# Deciders (assume the gate passed; return outcome + diagnostic scores)


def _exactly_one_accept(p_fwd: float, p_bwd: float, alpha: float) -> str | None:
    acc_f, acc_b = p_fwd > alpha, p_bwd > alpha
    if acc_f and not acc_b:
        return FWD
    if acc_b and not acc_f:
        return BWD
    return None


def _decide_l0(f: PairFeatures, c: Config) -> tuple[str, dict]:
    out = _exactly_one_accept(f.lin_p[FWD], f.lin_p[BWD], c.alpha_residual)
    return out or "ABSTAIN", {"p_fwd": f.lin_p[FWD], "p_bwd": f.lin_p[BWD]}


def _decide_l1(f: PairFeatures, c: Config) -> tuple[str, dict]:
    scores = {"p_fwd": f.nl_p[FWD], "p_bwd": f.nl_p[BWD],
              "margin": abs(f.nl_p[FWD] - f.nl_p[BWD])}
    out = _exactly_one_accept(f.nl_p[FWD], f.nl_p[BWD], c.alpha_residual)
    if out is not None and scores["margin"] >= c.l1_margin:
        return out, scores
    return "ABSTAIN", scores


def _decide_lsnm(f: PairFeatures, c: Config) -> tuple[str, dict]:
    scores = {"p_fwd": f.lsnm_p[FWD], "p_bwd": f.lsnm_p[BWD],
              "margin": abs(f.lsnm_p[FWD] - f.lsnm_p[BWD])}
    out = _exactly_one_accept(f.lsnm_p[FWD], f.lsnm_p[BWD], c.alpha_residual)
    if out is not None and scores["margin"] >= c.lsnm_margin:
        return out, scores
    return "ABSTAIN", scores


def _decide_igci(f: PairFeatures, c: Config) -> tuple[str, dict]:
    scores = {"delta": f.igci_delta}
    if f.igci_delta > c.igci_threshold:
        return FWD, scores
    if f.igci_delta < -c.igci_threshold:
        return BWD, scores
    return "ABSTAIN", scores


def _decide_stein(f: PairFeatures, c: Config) -> tuple[str, dict]:
    j_f, j_b = f.stein_j[FWD], f.stein_j[BWD]
    scores = {"j_fwd": j_f, "j_bwd": j_b}
    if not (np.isfinite(j_f) and np.isfinite(j_b)) or min(j_f, j_b) <= 0:
        return "ABSTAIN", scores
    ratio = j_b / j_f
    scores["ratio"] = ratio
    if ratio > c.stein_ratio:
        return FWD, scores
    if ratio < 1.0 / c.stein_ratio:
        return BWD, scores
    return "ABSTAIN", scores


def _decide_mdl(f: PairFeatures, c: Config) -> tuple[str, dict]:
    code_f, code_b = f.mdl_code[FWD], f.mdl_code[BWD]
    scores = {"code_fwd": code_f, "code_bwd": code_b}
    if not (np.isfinite(code_f) and np.isfinite(code_b)):
        return "ABSTAIN", scores
    delta = code_b - code_f
    scores["delta"] = delta
    if delta > c.mdl_margin:
        return FWD, scores
    if delta < -c.mdl_margin:
        return BWD, scores
    return "ABSTAIN", scores


def _decide_l2(f: PairFeatures, c: Config) -> tuple[str, dict]:
    scores = {"statistic": f.l2_stat}
    if f.l2_stat > c.l2_threshold:
        return FWD, scores
    if f.l2_stat < -c.l2_threshold:
        return BWD, scores
    return "ABSTAIN", scores


def _decide_peit(f: PairFeatures, c: Config) -> tuple[str, dict]:
    h_f, h_b = f.peit_h[FWD], f.peit_h[BWD]
    scores = {"h_fwd": h_f, "h_bwd": h_b}
    if not (np.isfinite(h_f) and np.isfinite(h_b)):
        return "ABSTAIN", scores
    delta = h_b - h_f
    scores["delta"] = delta
    if delta > c.peit_margin:
        return FWD, scores
    if delta < -c.peit_margin:
        return BWD, scores
    return "ABSTAIN", scores


_DECIDERS = {
    "L0": _decide_l0,
    "L1": _decide_l1,
    "L_LSNM": _decide_lsnm,
    "L_IGCI": _decide_igci,
    "L_STEIN": _decide_stein,
    "L_MDL": _decide_mdl,
    "L2": _decide_l2,
    "L_PEIT": _decide_peit,
}


def tier_decide(tier: str, features: PairFeatures, config: Config) -> TierDecision:
    """Gate, then decide.  A closed gate abstains without reading scores."""
    if tier not in _DECIDERS:
        raise ValueError(f"unknown tier {tier}")
    if not gate(tier, features, config):
        return TierDecision(tier, "ABSTAIN", gate_passed=False)
    outcome, scores = _DECIDERS[tier](features, config)
    clean = {k: float(v) for k, v in scores.items() if np.isfinite(v)}
    return TierDecision(tier, outcome, gate_passed=True, scores=clean)


def decide_all(features: PairFeatures, config: Config) -> list[TierDecision]:
    """Every tier's decision in lattice order (no short-circuiting): the
    disagreement guard and the ablation tooling need all opinions."""
    return [tier_decide(t, features, config) for t in ALL_TIERS]
