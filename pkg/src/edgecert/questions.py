"""Practitioner question templates, keyed by certificate code.

Templates are data: editing a wording needs no code change.  Placeholders
are substituted from a context dict built out of the pair's names and (when
available) the numeric evidence recorded by the direction cascade.  Missing
placeholders render as ``?`` so a template never raises at render time.
"""

from __future__ import annotations

from .model import CertificateCode

__all__ = [
    "EDGE_TEMPLATES",
    "META_HUB_TEMPLATE",
    "NODE_CHILDREN_TEMPLATE",
    "render_question",
    "render_meta_hub",
    "render_node_children",
]

_SUFFIX = ("Answer FWD ({a} → {b}), BWD ({b} → {a}), or ABSENT "
           "(no direct edge).")

EDGE_TEMPLATES: dict[CertificateCode, str] = {
    CertificateCode.IMPOSSIBLE_R1: (
        "Edge {edge}: both variables look Gaussian and a linear model fits in "
        "both directions, so no observational test can orient this edge. "
        "Does {a} cause {b}, does {b} cause {a}, or is the association "
        "indirect? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_LATENT_LIKELY: (
        "Edge {edge}: BOTH linear and nonlinear ANM reject independence in "
        "both directions. Most likely an unmeasured confounder. Is the "
        "{edge} dependence direct, or due to an unmeasured common cause? "
        + _SUFFIX),
    CertificateCode.IMPOSSIBLE_REGRESSOR_INCONSISTENT: (
        "Edge {edge}: the linear and nonlinear regressions disagree about "
        "which direction fits, so neither family can be trusted here. "
        "Direction? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_NONLINEAR_WEAK: (
        "Edge {edge}: nonlinear ANM is decisive at the {reject_p} level but "
        "the asymmetry margin is weak (max p = {accept_p}). Direction? "
        + _SUFFIX),
    CertificateCode.IMPOSSIBLE_HOC_AMBIGUOUS: (
        "Edge {edge}: the higher-order cumulant statistic is non-zero "
        "({hoc_stat}) but below the decision threshold ({hoc_threshold}), "
        "so the sign is not trustworthy. Direction? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_AMBIGUOUS: (
        "Edge {edge}: every identifiability tier either abstained or was "
        "gated off; the data carry no usable directional signal. Direction? "
        + _SUFFIX),
    CertificateCode.IMPOSSIBLE_L0_DISAGREES_WITH_HIGH_TIER: (
        "Edge {edge}: the linear additive-noise tier and a higher-order tier "
        "commit opposite directions, so the linear commit was withdrawn. "
        "Which direction is right? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_CIRCULAR: (
        "Edge {edge}: at least one variable is circular (angular), where "
        "additive-noise asymmetry is undefined. Direction? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_BINARY_CONTINUOUS: (
        "Edge {edge}: one variable is binary and the other continuous; "
        "residual-independence tests are uninformative for this mixed pair. "
        "Direction? " + _SUFFIX),
    CertificateCode.IMPOSSIBLE_COUNT: (
        "Edge {edge}: at least one variable is an overdispersed count, "
        "where additive-noise residuals are ill-calibrated. Direction? "
        + _SUFFIX),
    CertificateCode.IMPOSSIBLE_HIGH_CARDINALITY_DISCRETE: (
        "Edge {edge}: at least one variable is high-cardinality discrete; "
        "entropy and residual estimates are unstable there. Direction? "
        + _SUFFIX),
}

# Fallback for pairs without a certificate (e.g. recovery candidates that
# never went through the cascade).
_DEFAULT_EDGE_TEMPLATE = (
    "Edge {edge}: this candidate was not certified by the cascade. "
    "Does {a} directly cause {b}, does {b} directly cause {a}, or is there "
    "no direct edge? " + _SUFFIX)

META_HUB_TEMPLATE = (
    "Which {k} variables have the most direct causal influence (highest "
    "out-degree) in this system? List the top {k} hub variables.")

NODE_CHILDREN_TEMPLATE = (
    "Which variables are direct causal children of {node}? List every "
    "variable that {node} directly influences (empty if none).")


class _SafeContext(dict):
    def __missing__(self, key: str) -> str:  # noqa: D105 - format hook
        return "?"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.3g}"
    return str(value)


def render_question(code: CertificateCode | None, name_a: str, name_b: str,
                    context: dict | None = None) -> str:
    """Render the per-edge question for ``code`` on the pair (a, b)."""
    template = EDGE_TEMPLATES.get(code, _DEFAULT_EDGE_TEMPLATE)
    ctx = _SafeContext(a=name_a, b=name_b, edge=f"{name_a}-{name_b}")
    for key, value in (context or {}).items():
        ctx[key] = _fmt(value)
    return template.format_map(ctx)


def render_meta_hub(k: int) -> str:
    return META_HUB_TEMPLATE.format_map(_SafeContext(k=k))


def render_node_children(node_name: str) -> str:
    return NODE_CHILDREN_TEMPLATE.format_map(_SafeContext(node=node_name))
