"""Statistical primitives: HSIC independence testing, FDR control, normality
and heteroscedasticity gates, regression engines, and entropy estimators.

HSIC uses the biased V-statistic with Gaussian kernels and median-heuristic
bandwidths.  P-values come from a permutation null (with +1 smoothing) or the
moment-matched gamma approximation; both are first-class and selected per
call.  Inputs larger than ``max_n`` are subsampled deterministically
(evenly spaced row indices) before kernel construction.

The nonlinear regression engine is kernel ridge regression with an RBF
kernel, median-heuristic bandwidth, and a fixed ridge penalty, fitted on a
deterministic subsample and evaluated on all rows.  The choice is fixed:
every caller in the package goes through ``fit_regression``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.linalg import solve
from scipy.spatial import cKDTree
from scipy.special import digamma

EPS = 1e-12


def stable_seed(*parts) -> int:
    """Deterministic 32-bit seed derived from arbitrary labels."""
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def _subsample_idx(n: int, max_n: int) -> np.ndarray:
    if n <= max_n:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, max_n).astype(int))


def _pairwise_sq(z: np.ndarray) -> np.ndarray:
    d = z[:, None] - z[None, :]
    return d * d


def _gaussian_gram(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Gram matrix with the median-heuristic bandwidth (sigma^2 = median
    nonzero squared distance / 2); returns (gram, sigma^2)."""
    sq = _pairwise_sq(z)
    nonzero = sq[sq > 0]
    width = np.median(nonzero) * 0.5 if nonzero.size else 1.0
    width = max(width, EPS)
    return np.exp(-sq / (2.0 * width)), width


def _center(k: np.ndarray) -> np.ndarray:
    k = k - k.mean(axis=0, keepdims=True)
    return k - k.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class HsicResult:
    statistic: float
    p_value: float
    method: str
    n_used: int
    bandwidth_x: float = 1.0
    bandwidth_y: float = 1.0


def hsic_statistic(x: np.ndarray, y: np.ndarray, max_n: int = 512) -> float:
    """Biased HSIC V-statistic (no p-value).  Zero for constant input."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    idx = _subsample_idx(x.size, max_n)
    kc = _center(_gaussian_gram(x[idx])[0])
    lc = _center(_gaussian_gram(y[idx])[0])
    n = idx.size
    return float((kc * lc).sum() / (n * n))


def hsic_dependence(x: np.ndarray, y: np.ndarray, max_n: int = 512) -> float:
    """Normalised HSIC (kernel correlation in [0, 1]); scale-free dependence
    strength used where a statistic is needed without a null distribution."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    idx = _subsample_idx(x.size, max_n)
    kc = _center(_gaussian_gram(x[idx])[0])
    lc = _center(_gaussian_gram(y[idx])[0])
    denom = np.sqrt((kc * kc).sum() * (lc * lc).sum())
    if denom < EPS:
        return 0.0
    return float((kc * lc).sum() / denom)


def hsic_test(x: np.ndarray, y: np.ndarray, permutations: int = 500,
              seed: int = 0, method: str = "permutation",
              max_n: int = 512) -> HsicResult:
    """HSIC independence test.

    permutation: p = (1 + #{stat_perm >= stat}) / (B + 1); exact level by
    exchangeability.  gamma: Gretton-style two-moment gamma fit to the null
    of the scaled statistic.  Constant input short-circuits to (0, 1).
    """
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    if x.size != y.size:
        raise ValueError("length mismatch")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return HsicResult(0.0, 1.0, method, x.size)
    idx = _subsample_idx(x.size, max_n)
    xs, ys = x[idx], y[idx]
    n = idx.size
    k, bw_x = _gaussian_gram(xs)
    l, bw_y = _gaussian_gram(ys)
    kc = _center(k)
    lc = _center(l)
    stat = float((kc * lc).sum() / (n * n))

    if method == "gamma":
        scaled = (kc * lc).sum() / n         # n * HSIC_b
        var = ((kc * lc) / 6.0) ** 2
        var_sum = (var.sum() - np.trace(var)) / (n * (n - 1))
        var_hsic = var_sum * 72.0 * (n - 4) * (n - 5) / (n * (n - 1) * (n - 2) * (n - 3))
        k0 = k - np.diag(np.diag(k))
        l0 = l - np.diag(np.diag(l))
        mu_x = k0.sum() / (n * (n - 1))
        mu_y = l0.sum() / (n * (n - 1))
        mean_hsic = (1.0 + mu_x * mu_y - mu_x - mu_y) / n
        if var_hsic <= 0 or mean_hsic <= 0:
            return HsicResult(stat, 1.0, "gamma", n, bw_x, bw_y)
        shape = mean_hsic ** 2 / var_hsic
        scale = var_hsic * n / mean_hsic
        p = float(sps.gamma.sf(scaled, shape, scale=scale))
        return HsicResult(stat, min(max(p, 0.0), 1.0), "gamma", n, bw_x, bw_y)

    rng = np.random.default_rng(seed)
    count = 0
    target = stat * (n * n) - 1e-15          # compare on the unscaled sum
    for _ in range(permutations):
        perm = rng.permutation(n)
        s = (kc * lc[np.ix_(perm, perm)]).sum()
        if s >= target:
            count += 1
    p = (1.0 + count) / (permutations + 1.0)
    return HsicResult(stat, p, "permutation", n, bw_x, bw_y)


def bh_fdr(p_values: np.ndarray, level: float) -> np.ndarray:
    """Benjamini-Hochberg step-up; returns the boolean rejection mask."""
    p = np.asarray(p_values, float)
    m = p.size
    if m == 0:
        return np.zeros(0, bool)
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    thresh = level * (np.arange(1, m + 1) / m)
    passing = np.nonzero(ranked <= thresh)[0]
    mask = np.zeros(m, bool)
    if passing.size:
        mask[order[: passing[-1] + 1]] = True
    return mask


def shapiro_wilk(x: np.ndarray, seed: int = 0, max_n: int = 5000) -> float:
    """Shapiro-Wilk normality p-value; deterministic seeded subsample above
    max_n.  Degenerate input (fewer than 3 distinct values) returns 0.0."""
    x = np.asarray(x, float).ravel()
    if np.unique(x).size < 3:
        return 0.0
    if x.size > max_n:
        rng = np.random.default_rng(seed)
        x = x[rng.choice(x.size, max_n, replace=False)]
    with np.errstate(all="ignore"):
        return float(sps.shapiro(x).pvalue)


# ---------------------------------------------------------------------------
# Regression engines


@dataclass
class RegressionFit:
    fitted: np.ndarray
    residuals: np.ndarray
    engine: str = "NONLINEAR"
    singular: bool = False
    predict: object = None          # callable: new predictor rows -> predictions

    def __call__(self, x_new: np.ndarray) -> np.ndarray:
        if self.predict is None:
            raise ValueError("fit has no predictor handle")
        return self.predict(x_new)


# backward-compatible alias used by early callers
FitResult = RegressionFit


# kernel ridge constants, fixed for the whole package
KRR_RIDGE = 0.1
KRR_MAX_FIT = 700


def _as_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, float)
    return x[:, None] if x.ndim == 1 else x


def _rbf_cross(a: np.ndarray, b: np.ndarray, widths: np.ndarray) -> np.ndarray:
    sq = np.zeros((a.shape[0], b.shape[0]))
    for d in range(a.shape[1]):
        diff = a[:, d, None] - b[None, :, d]
        sq += (diff * diff) / max(widths[d], EPS)
    return np.exp(-0.5 * sq)


def fit_regression(x: np.ndarray, y: np.ndarray, kind: str = "nonlinear",
                   seed: int = 0) -> RegressionFit:
    """Regress y on x (1-D or multi-column x).

    linear: ordinary least squares with intercept.
    nonlinear: RBF kernel ridge on a deterministic subsample, predictions on
    all rows.  A constant predictor is a singular fit: residuals fall back to
    y - mean(y).
    """
    xm = _as_matrix(x)
    y = np.asarray(y, float).ravel()
    if xm.shape[0] != y.size:
        raise ValueError("length mismatch")
    if kind not in ("linear", "nonlinear"):
        raise ValueError(f"unknown regression kind {kind}")
    spans = np.ptp(xm, axis=0)
    if np.all(spans == 0):
        fitted = np.full_like(y, y.mean())
        const = float(y.mean())
        return RegressionFit(fitted, y - fitted, engine=kind.upper(),
                             singular=True,
                             predict=lambda z: np.full(_as_matrix(z).shape[0], const))

    if kind == "linear":
        design = np.column_stack([np.ones(y.size), xm])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ coef

        def predict_linear(z: np.ndarray) -> np.ndarray:
            zm = _as_matrix(z)
            return np.column_stack([np.ones(zm.shape[0]), zm]) @ coef

        return RegressionFit(fitted, y - fitted, engine="LINEAR",
                             predict=predict_linear)
    if kind != "nonlinear":
        raise ValueError(f"unknown regression kind {kind}")

    mu, sd = xm.mean(axis=0), xm.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (xm - mu) / sd
    y_mu, y_sd = y.mean(), y.std()
    y_sd = y_sd if y_sd > 0 else 1.0
    ys = (y - y_mu) / y_sd

    idx = _subsample_idx(y.size, KRR_MAX_FIT)
    anchors = xs[idx]
    widths = np.empty(xs.shape[1])
    for d in range(xs.shape[1]):
        sq = _pairwise_sq(anchors[:, d])
        nz = sq[sq > 0]
        widths[d] = np.median(nz) if nz.size else 1.0
    gram = _rbf_cross(anchors, anchors, widths)
    coef = solve(gram + KRR_RIDGE * np.eye(idx.size), ys[idx],
                 assume_a="pos")
    fitted_s = _rbf_cross(xs, anchors, widths) @ coef
    fitted = fitted_s * y_sd + y_mu

    def predict_krr(z: np.ndarray) -> np.ndarray:
        zs = (_as_matrix(z) - mu) / sd
        return (_rbf_cross(zs, anchors, widths) @ coef) * y_sd + y_mu

    return RegressionFit(fitted, y - fitted, engine="NONLINEAR",
                         predict=predict_krr)


def heteroscedasticity_test(x: np.ndarray, y: np.ndarray, permutations: int = 500,
                            seed: int = 0, method: str = "permutation",
                            max_n: int = 512) -> tuple[float, float]:
    """Conditional-variance dependence per direction: nonlinear mean fit,
    then HSIC between the predictor and the squared residuals.  Returns
    (p for x->y, p for y->x); small p means heteroscedastic."""
    out = []
    for a, b, tag in ((x, y, "xy"), (y, x, "yx")):
        fit = fit_regression(a, b, "nonlinear", seed=stable_seed(seed, "het", tag))
        r2 = fit.residuals ** 2
        res = hsic_test(a, r2, permutations=permutations,
                        seed=stable_seed(seed, "het-hsic", tag),
                        method=method, max_n=max_n)
        out.append(res.p_value)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Entropy and score estimators


def differential_entropy(x: np.ndarray, k: int = 3) -> float:
    """Kozachenko-Leonenko kNN differential entropy (nats, 1-D).

    Fewer than k+1 distinct values is degenerate and returns -inf.  Zero
    neighbor distances from remaining ties are clamped to keep the estimate
    finite and deterministic.
    """
    x = np.asarray(x, float).ravel()
    if np.unique(x).size < k + 1:
        return float("-inf")
    n = x.size
    tree = cKDTree(x[:, None])
    dist, _ = tree.query(x[:, None], k=k + 1)
    eps = np.maximum(dist[:, k], 1e-12)
    return float(digamma(n) - digamma(k) + np.log(2.0) + np.mean(np.log(eps)))


def shannon_entropy(x: np.ndarray) -> float:
    """Plug-in Shannon entropy (nats) over the empirical value distribution."""
    _, counts = np.unique(np.asarray(x).ravel(), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


SCORE_MAX_N = 1024


def knn_score(x: np.ndarray, bandwidth_factor: float = 1.0) -> np.ndarray:
    """Estimate of the score d/dx log p(x) at each sample point.

    Gaussian kernel density with Silverman's bandwidth; the score is the
    analytic derivative of the smoothed log-density,
    score(t) = sum_j (x_j - t) K_h(t - x_j) / (h^2 sum_j K_h(t - x_j)).
    Above SCORE_MAX_N samples the density is built on a deterministic
    subsample but evaluated at every point.  Deterministic.
    """
    x = np.asarray(x, float).ravel()
    n = x.size
    sd = x.std()
    if sd <= 0 or n < 3:
        return np.zeros(n)
    idx = _subsample_idx(n, SCORE_MAX_N)
    anchors = x[idx]
    m = anchors.size
    iqr = np.subtract(*np.percentile(anchors, [75, 25]))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    h = max(bandwidth_factor * 0.9 * spread * m ** (-0.2), 1e-6 * sd)
    diff = anchors[None, :] - x[:, None]          # (n, m)
    w = np.exp(-0.5 * (diff / h) ** 2)
    dens = w.sum(axis=1)
    dens = np.maximum(dens, 1e-300)
    return (w * diff).sum(axis=1) / (h * h * dens)
