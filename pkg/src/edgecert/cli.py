"""Command-line interface.

Five commands over the same core engine:

    audit     data-only pass: certificates for every candidate edge
    iterate   expert-in-the-loop run (simulated, scripted, or interactive)
    bench     fixture benchmarks: query bounds, tier ablation, frontier
    stress    synthetic per-tier regime stress matrix
    serve     HTTP session service

Exit codes: 0 success, 2 malformed dataset, 3 configuration violation,
4 interactive session abandoned before completion.  Every configuration
field has a matching flag; ``--config FILE`` loads a JSON snapshot first
and explicit flags override it.
"""

from __future__ import annotations

import json
import os
import sys
import threading
import time
from pathlib import Path

import click

from . import session as sess
from .bench import (
    ablation_to_csv,
    load_manifest,
    matrix_to_csv,
    pareto_to_csv,
    pareto_to_svg,
    read_edges,
    run_ablation,
    run_pareto,
    run_tier_matrix,
    write_edges,
)
from .metrics import evaluate
from .model import (
    Config,
    Dataset,
    EdgeStatus,
    HSIC_METHODS,
    INFO_VALUE_STRATEGIES,
    MalformedDataset,
    ORACLE_MODES,
    Trace,
)
from .oracle import (
    GroundTruthBackend,
    ImperfectOracleError,
    RecordingBackend,
    ScriptMismatchError,
    ScriptedBackend,
    question_context,
    run_iterative,
    run_pure_metahub,
    run_round_one,
)
from .propagation import RunCache, run_auto_resolution
from .questions import render_question
from .regimes import REGIMES

EXIT_OK = 0
EXIT_MALFORMED_DATASET = 2
EXIT_CONFIG_VIOLATION = 3
EXIT_ABANDONED = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# ---------------------------------------------------------------------------
# config flags (one per Config field)
# ---------------------------------------------------------------------------

_CONFIG_OPTIONS = [
    click.option("--config", "config_file", type=click.Path(), default=None,
                 help="JSON config snapshot to start from."),
    click.option("--alpha-skeleton", type=float, default=None,
                 help="Marginal-independence level for skeleton pruning."),
    click.option("--fdr-level", type=float, default=None,
                 help="BH false-discovery level for the skeleton."),
    click.option("--alpha-residual", type=float, default=None,
                 help="Residual-independence level for model acceptance."),
    click.option("--gauss-gate-p", type=float, default=None,
                 help="Normality-test level for the linear-Gaussian gate."),
    click.option("--hetero-gate-p", type=float, default=None,
                 help="Heteroscedasticity gate level."),
    click.option("--confirm-ratio", type=float, default=None,
                 help="Propagation confirmation ratio (0 disables)."),
    click.option("--permutations", type=int, default=None,
                 help="Permutation count for independence tests."),
    click.option("--hsic-method", type=click.Choice(HSIC_METHODS), default=None,
                 help="Independence test null: permutation or gamma."),
    click.option("--hsic-max-n", type=int, default=None,
                 help="Subsample cap for kernel independence tests."),
    click.option("--seed", type=int, default=None,
                 help="Root RNG seed."),
    click.option("--tiers", "tier_mask", type=str, default=None,
                 help="Comma-separated enabled tiers (default: all eight)."),
    click.option("--oracle-mode", type=click.Choice(ORACLE_MODES), default=None,
                 help="Query strategy for iterative runs."),
    click.option("--propagation/--no-propagation", "propagation_enabled",
                 default=None, help="Toggle answer propagation."),
    click.option("--mediator-max-tier", type=int, default=None,
                 help="Deepest tier consulted during mediator search (1-3)."),
    click.option("--recover-missing/--no-recover-missing", "recover_missing",
                 default=None, help="Query skeleton-pruned pairs at the end."),
    click.option("--recovery-alpha", type=float, default=None,
                 help="Marginal filter level for missing-edge recovery."),
    click.option("--reaudit-safe-tiers/--no-reaudit-safe-tiers",
                 "reaudit_safe_tiers", default=None,
                 help="Re-run the full cascade on conditioned re-audits."),
    click.option("--min-n", type=int, default=None,
                 help="Sample-size floor before warnings."),
    click.option("--metahub-k", type=int, default=None,
                 help="Hub count requested from META_HUB queries."),
    click.option("--query-budget", type=int, default=None,
                 help="Hard cap on oracle interactions."),
    click.option("--info-value-strategy", type=click.Choice(INFO_VALUE_STRATEGIES),
                 default=None, help="Question ordering: worst_case or expected."),
    click.option("--l1-margin", type=float, default=None,
                 help="Nonlinear-model acceptance margin."),
    click.option("--lsnm-margin", type=float, default=None,
                 help="Location-scale tier acceptance margin."),
    click.option("--igci-threshold", type=float, default=None,
                 help="Slope-entropy asymmetry threshold."),
    click.option("--stein-ratio", type=float, default=None,
                 help="Fisher-information ratio threshold."),
    click.option("--mdl-margin", type=float, default=None,
                 help="Description-length margin (nats/sample)."),
    click.option("--l2-threshold", type=float, default=None,
                 help="Higher-order-cumulant commit threshold."),
    click.option("--l2-floor", type=float, default=None,
                 help="Cumulant floor below which the tier abstains."),
    click.option("--peit-margin", type=float, default=None,
                 help="Post-nonlinear tier acceptance margin."),
]


def config_options(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


_CONFIG_KEYS = [
    "alpha_skeleton", "fdr_level", "alpha_residual", "gauss_gate_p",
    "hetero_gate_p", "confirm_ratio", "permutations", "hsic_method",
    "hsic_max_n", "seed", "tier_mask", "oracle_mode", "propagation_enabled",
    "mediator_max_tier", "recover_missing", "recovery_alpha",
    "reaudit_safe_tiers", "min_n", "metahub_k", "query_budget",
    "info_value_strategy", "l1_margin", "lsnm_margin", "igci_threshold",
    "stein_ratio", "mdl_margin", "l2_threshold", "l2_floor", "peit_margin",
]


def build_config(config_file: str | None, flags: dict) -> Config:
    """Base config (defaults or --config file), overridden by explicit flags.
    Any violation exits with code 3."""
    try:
        if config_file:
            base = Config.from_json(Path(config_file).read_text())
        else:
            base = Config()
        overrides = {}
        for key in _CONFIG_KEYS:
            value = flags.get(key)
            if value is None:
                continue
            if key == "tier_mask":
                value = tuple(t.strip() for t in value.split(",") if t.strip())
            overrides[key] = value
        return base.replace(**overrides) if overrides else base
    except (ValueError, TypeError, json.JSONDecodeError, OSError) as exc:
        _fail(EXIT_CONFIG_VIOLATION, f"config violation: {exc}")


def load_dataset(path: str, config: Config) -> Dataset:
    try:
        return Dataset.from_csv(path, min_n=config.min_n)
    except MalformedDataset as exc:
        _fail(EXIT_MALFORMED_DATASET, f"malformed dataset: {exc}")


def _resolve_manifest(manifest: str | None) -> str:
    if manifest:
        return manifest
    env_dir = os.environ.get("EDGECERT_FIXTURES")
    if env_dir and (Path(env_dir) / "manifest.json").exists():
        return str(Path(env_dir) / "manifest.json")
    return "fixtures/manifest.json"


# ---------------------------------------------------------------------------
# the command group
# ---------------------------------------------------------------------------

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact", prog_name="edgecert")
def main() -> None:
    """Auditable causal discovery with certificate-labeled edges and
    minimal expert interaction."""


# -- audit -------------------------------------------------------------------

@main.command()
@click.argument("dataset_path", metavar="DATASET")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the full JSON report here.")
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Write the audit trace CSV here.")
@config_options
def audit(dataset_path: str, report_path: str | None, trace_path: str | None,
          config_file: str | None, **flags) -> None:
    """Data-only audit: label every candidate edge with a certificate.

    Runs the skeleton, mediator screen, direction cascade, and automatic
    propagation — no oracle questions.  Committed edges, certificates, and
    the question each unresolved edge would ask are printed and optionally
    written to a JSON report.
    """
    config = build_config(config_file, flags)
    dataset = load_dataset(dataset_path, config)
    if dataset.v < 2:
        click.echo("warning: dataset has a single variable; nothing to audit",
                   err=True)

    trace = Trace()
    dag, skeleton, mediators, verdicts = run_round_one(dataset, config, trace)
    round2 = None
    if config.propagation_enabled:
        round2 = run_auto_resolution(dag, dataset, config, trace, 2, RunCache())

    committed = [(pair, st) for pair, st in sorted(dag.states.items())
                 if st.status == EdgeStatus.COMMITTED]
    impossible = [(pair, st) for pair, st in sorted(dag.states.items())
                  if st.status == EdgeStatus.OPEN]
    dropped = [(pair, st) for pair, st in sorted(dag.states.items())
               if st.status == EdgeStatus.DROPPED]

    names = dataset.names
    click.echo(f"dataset {dataset_path}: N={dataset.n} V={dataset.v}")
    click.echo(f"skeleton: {len(skeleton.pairs)} candidate pairs, "
               f"{sum(1 for p in skeleton.pairs if mediators.get(p))} mediated")
    if round2 is not None:
        click.echo(f"propagation: {round2.resolution_count} automatic resolutions")

    click.echo(f"\nCOMMITTED ({len(committed)})")
    for (i, j), st in committed:
        a, b = ((i, j) if st.direction is not None and st.direction.value == "FWD"
                else (j, i))
        click.echo(f"  {names[a]} -> {names[b]}"
                   f"  [{st.certificate.value if st.certificate else '-'}"
                   f" via {st.provenance}]")

    click.echo(f"\nIMPOSSIBLE ({len(impossible)})")
    questions = {}
    for (i, j), st in impossible:
        ctx = question_context(verdicts.get((i, j)), config)
        text = render_question(st.certificate, names[i], names[j], ctx)
        questions[(i, j)] = text
        code = st.certificate.value if st.certificate else "-"
        click.echo(f"  {names[i]} - {names[j]}  [{code}]")
        click.echo(f"    Q: {text}")

    click.echo(f"\nDROPPED ({len(dropped)})")
    for (i, j), st in dropped:
        code = st.certificate.value if st.certificate else "-"
        click.echo(f"  {names[i]} - {names[j]}  [{code} via {st.provenance}]")

    if report_path:
        edges = []
        for (i, j), st in sorted(dag.states.items()):
            row = {"pair": [i, j], "names": [names[i], names[j]]}
            row.update(st.snapshot())
            if st.status == EdgeStatus.OPEN:
                row["question"] = questions[(i, j)]
            edges.append(row)
        report = {
            "schema_version": "1",
            "dataset": {"path": str(dataset_path), "n": dataset.n,
                        "v": dataset.v, "names": names,
                        "sha256": sess.dataset_sha256(dataset_path)},
            "config": json.loads(config.to_json()),
            "summary": {"pairs": len(dag.states), "committed": len(committed),
                        "impossible": len(impossible), "dropped": len(dropped)},
            "edges": edges,
        }
        Path(report_path).write_text(json.dumps(report, indent=1, sort_keys=True))
        click.echo(f"\nreport written to {report_path}")
    if trace_path:
        Path(trace_path).write_text(trace.to_csv())
        click.echo(f"trace written to {trace_path}")


# -- iterate -------------------------------------------------------------------

def _write_run_outputs(out_dir: str, prefix: str, trace: Trace, dag,
                       names: list[str], gt_edges, config: Config,
                       extra: dict | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{prefix}_trace.csv"
    edges_path = out / f"{prefix}_edges.csv"
    report_path = out / f"{prefix}_report.json"
    trace_path.write_text(trace.to_csv())
    write_edges(str(edges_path), dag.committed_edges(), names)
    report = {
        "schema_version": "1",
        "config": json.loads(config.to_json()),
        "counts": {
            "committed": len(dag.pairs_with(EdgeStatus.COMMITTED)),
            "open": len(dag.open_pairs()),
            "dropped": len(dag.pairs_with(EdgeStatus.DROPPED)),
            "queries": trace.query_count,
            "bits": trace.bits_total,
        },
        "eval": (evaluate(dag, gt_edges, queries=trace.query_count).snapshot()
                 if gt_edges is not None else None),
    }
    report.update(extra or {})
    report_path.write_text(json.dumps(report, indent=1, sort_keys=True))
    click.echo(f"trace:  {trace_path}")
    click.echo(f"edges:  {edges_path}")
    click.echo(f"report: {report_path}")
    return report


def _echo_eval(report: dict) -> None:
    ev = report.get("eval")
    counts = report["counts"]
    click.echo(f"queries: {counts['queries']}  committed: {counts['committed']}"
               f"  open: {counts['open']}  dropped: {counts['dropped']}")
    if ev:
        click.echo(f"precision: {ev['precision']:.3f}  recall: {ev['recall']:.3f}"
                   f"  f1: {ev['f1']:.3f}")


def _iterate_interactive(dataset_path: str, gt_path: str | None, config: Config,
                         out_dir: str, prefix: str, host: str, port: int,
                         state_dir: str | None) -> None:
    """Host a session service and wait for a human to finish the session."""
    import uvicorn

    from .service import CreateSessionRequest, ServiceSettings, create_app

    settings = ServiceSettings(dataset=dataset_path, gt=gt_path, config=config,
                               state_dir=state_dir)
    app = create_app(settings)
    store = app.state.store
    entry = store.create(CreateSessionRequest())
    sid = entry.sid
    click.echo(f"session {sid}")
    click.echo(f"question endpoint: http://{host}:{port}/v1/sessions/{sid}/question")
    click.echo("answer each question via POST .../answer; Ctrl-C abandons the run")

    server = uvicorn.Server(uvicorn.Config(app, host=host, port=port,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    abandoned = False
    try:
        while entry.core.status != sess.DONE:
            if not thread.is_alive():
                abandoned = True
                break
            time.sleep(0.2)
    except KeyboardInterrupt:
        abandoned = True
    finally:
        server.should_exit = True
        thread.join(timeout=5)

    report = _write_run_outputs(out_dir, prefix, entry.core.trace,
                                entry.core.dag, entry.core.dataset.names,
                                entry.core.gt_edges, config)
    _echo_eval(report)
    if abandoned or entry.core.status != sess.DONE:
        click.echo("session abandoned before completion; trace preserved",
                   err=True)
        sys.exit(EXIT_ABANDONED)


@main.command()
@click.argument("dataset_path", metavar="DATASET")
@click.option("--gt", "gt_path", type=click.Path(), default=None,
              help="Reference edge list; simulates the expert and scores the run.")
@click.option("--script", "script_path", type=click.Path(), default=None,
              help="Recorded answers CSV; replays a previous expert.")
@click.option("--interactive", is_flag=True,
              help="Host a session service and wait for a human expert.")
@click.option("--mode", type=click.Choice(["full", "pure-metahub"]),
              default="full", show_default=True,
              help="full: cascade + targeted questions; pure-metahub: 1+K protocol.")
@click.option("--resume", "resume_path", type=click.Path(), default=None,
              help="Continue from a saved trace instead of starting over.")
@click.option("--record", "record_path", type=click.Path(), default=None,
              help="Record the answer sequence for later --script replay.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True,
              help="Directory for trace/edges/report outputs.")
@click.option("--prefix", default=None,
              help="Output filename prefix (default: dataset stem).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--state-dir", type=click.Path(), default=None,
              help="Session persistence directory for --interactive.")
@config_options
def iterate(dataset_path: str, gt_path: str | None, script_path: str | None,
            interactive: bool, mode: str, resume_path: str | None,
            record_path: str | None, out_dir: str, prefix: str | None,
            host: str, port: int, state_dir: str | None,
            config_file: str | None, **flags) -> None:
    """Expert-in-the-loop run: audit, then one question at a time.

    The expert is simulated from a reference edge list (--gt), replayed
    from a recorded answer file (--script), or a human answering through
    the hosted session service (--interactive).  Writes the trace, the
    final edge list, and an evaluation report.
    """
    config = build_config(config_file, flags)
    if interactive and script_path:
        _fail(EXIT_CONFIG_VIOLATION,
              "--interactive and --script are mutually exclusive")
    if not (interactive or script_path or gt_path):
        _fail(EXIT_CONFIG_VIOLATION,
              "an answer source is required: --gt (simulated expert), "
              "--script (recorded answers), or --interactive")
    dataset = load_dataset(dataset_path, config)
    prefix = prefix or Path(dataset_path).stem
    names = dataset.names

    gt_edges = None
    if gt_path:
        try:
            gt_edges = read_edges(gt_path, names)
        except (OSError, ValueError, KeyError) as exc:
            _fail(EXIT_CONFIG_VIOLATION, f"cannot read edge list {gt_path}: {exc}")

    if interactive:
        if mode != "full" or resume_path or record_path:
            _fail(EXIT_CONFIG_VIOLATION,
                  "--interactive supports only --mode full without "
                  "--resume/--record; drive resumed sessions through serve")
        _iterate_interactive(dataset_path, gt_path, config, out_dir, prefix,
                             host, port, state_dir)
        return

    backend = (ScriptedBackend.from_csv(script_path, names) if script_path
               else GroundTruthBackend(gt_edges, len(names)))
    if record_path:
        backend = RecordingBackend(backend, names)

    try:
        if mode == "pure-metahub":
            if resume_path:
                _fail(EXIT_CONFIG_VIOLATION,
                      "--resume applies to --mode full (the 1+K protocol "
                      "is a single batch)")
            result = run_pure_metahub(names, backend)
            trace, dag = result.trace, result.dag
        elif resume_path:
            trace = Trace.from_csv(Path(resume_path).read_text())
            core = sess.SessionCore.resume(dataset, config, trace,
                                           gt_edges=gt_edges)
            core.run_to_completion(backend)
            trace, dag = core.trace, core.dag
        else:
            result = run_iterative(dataset, config, backend)
            trace, dag = result.trace, result.dag
    except (ScriptMismatchError, ImperfectOracleError) as exc:
        _fail(EXIT_CONFIG_VIOLATION, str(exc))

    if record_path:
        backend.to_csv(record_path)
        click.echo(f"answers recorded to {record_path}")
    report = _write_run_outputs(out_dir, prefix, trace, dag, names,
                                gt_edges, config, {"mode": mode})
    _echo_eval(report)


# -- bench ---------------------------------------------------------------------

@main.command()
@click.option("--suite", type=click.Choice(["queries", "ablation", "pareto", "all"]),
              default="queries", show_default=True)
@click.option("--manifest", type=click.Path(), default=None,
              help="Fixture manifest (default: $EDGECERT_FIXTURES/manifest.json "
                   "or ./fixtures/manifest.json).")
@click.option("--fixture", "fixture_names", multiple=True,
              help="Restrict to named fixtures (repeatable).")
@click.option("--out-dir", type=click.Path(), default="bench_out",
              show_default=True)
@config_options
def bench(suite: str, manifest: str | None,
          fixture_names: tuple[str, ...], out_dir: str,
          config_file: str | None, **flags) -> None:
    """Fixture benchmarks: 1+K query bound, tier ablation, query/accuracy
    frontier.  Each run writes one CSV (and plot) per seed; --seed is
    mandatory so every output file is attributable to its seed."""
    seed = flags.get("seed")
    if seed is None:
        _fail(EXIT_CONFIG_VIOLATION, "--seed is required for bench runs")
    config = build_config(config_file, flags)
    manifest_path = _resolve_manifest(manifest)
    try:
        fixtures = load_manifest(manifest_path)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        _fail(EXIT_CONFIG_VIOLATION, f"cannot load manifest {manifest_path}: {exc}")
    if fixture_names:
        missing = set(fixture_names) - set(fixtures)
        if missing:
            _fail(EXIT_CONFIG_VIOLATION, f"unknown fixtures: {sorted(missing)}")
        fixtures = {k: fixtures[k] for k in fixture_names}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if suite in ("queries", "all"):
        rows = ["fixture,V,gt_edges,K,expected_queries,queries,exact,"
                "precision,recall,f1"]
        click.echo("1+K query bound (pure hub protocol):")
        for name, fx in fixtures.items():
            try:
                dataset, gt = fx.load()
            except (MalformedDataset, ValueError, OSError, KeyError) as exc:
                _fail(EXIT_MALFORMED_DATASET, f"fixture {name}: {exc}")
            backend = GroundTruthBackend(gt, len(dataset.names))
            result = run_pure_metahub(list(dataset.names), backend)
            report = evaluate(result.dag, gt, queries=result.query_count)
            expected = 1 + fx.k_non_leaves
            exact = (result.query_count == expected and report.f1 == 1.0)
            rows.append(f"{name},{fx.n_vertices},{fx.n_gt_edges},"
                        f"{fx.k_non_leaves},{expected},{result.query_count},"
                        f"{int(exact)},{report.precision:.3f},"
                        f"{report.recall:.3f},{report.f1:.3f}")
            click.echo(f"  {name:8s} V={fx.n_vertices:3d} K={fx.k_non_leaves:3d}"
                       f"  queries={result.query_count:3d} (expected {expected:3d})"
                       f"  P={report.precision:.3f} R={report.recall:.3f}"
                       f"  {'exact' if exact else 'MISMATCH'}")
        path = out / f"queries_seed{seed}.csv"
        path.write_text("\n".join(rows) + "\n")
        click.echo(f"written: {path}")

    if suite in ("ablation", "pareto", "all"):
        targets = (list(fixtures) if fixture_names
                   else [n for n in ("sachs",) if n in fixtures])
        if not targets:
            _fail(EXIT_CONFIG_VIOLATION,
                  "no fixture for this suite; pass --fixture")
        for name in targets:
            dataset, gt = fixtures[name].load()
            if suite in ("ablation", "all"):
                rows = run_ablation(dataset, config, gt)
                text = ablation_to_csv(rows)
                path = out / f"ablation_{name}_seed{seed}.csv"
                path.write_text(text)
                click.echo(f"tier ablation on {name}:")
                click.echo(text.rstrip())
                click.echo(f"written: {path}")
            if suite in ("pareto", "all"):
                points = run_pareto(dataset, config, gt)
                text = pareto_to_csv(points)
                path = out / f"pareto_{name}_seed{seed}.csv"
                path.write_text(text)
                svg_path = out / f"pareto_{name}_seed{seed}.svg"
                svg_path.write_text(pareto_to_svg(
                    points, title=f"interaction/accuracy frontier ({name})"))
                click.echo(f"query/accuracy frontier on {name}:")
                click.echo(text.rstrip())
                click.echo(f"written: {path}")
                click.echo(f"written: {svg_path}")


# -- stress ----------------------------------------------------------------------

@main.command()
@click.option("--pairs", type=int, default=40, show_default=True,
              help="Synthetic pairs per regime.")
@click.option("--samples", type=int, default=2000, show_default=True,
              help="Samples per pair.")
@click.option("--regime", "regime_names", multiple=True,
              type=click.Choice(REGIMES),
              help="Restrict to specific regimes (repeatable).")
@click.option("--out-dir", type=click.Path(), default="bench_out",
              show_default=True)
@config_options
def stress(pairs: int, samples: int,
           regime_names: tuple[str, ...], out_dir: str,
           config_file: str | None, **flags) -> None:
    """Per-tier stress matrix over the synthetic mechanism regimes.

    Every tier fires on every regime; cells count correct/fired decisions
    (a tier whose gate rejects a whole regime reads 'abstain').  --seed is
    mandatory so every output file is attributable to its seed."""
    seed = flags.get("seed")
    if seed is None:
        _fail(EXIT_CONFIG_VIOLATION, "--seed is required for stress runs")
    config = build_config(config_file, flags)
    regimes_used = tuple(regime_names) if regime_names else REGIMES
    matrix = run_tier_matrix(config, n_pairs=pairs, n_samples=samples,
                             seed=seed, regime_names=regimes_used)
    text = matrix_to_csv(matrix, regime_names=regimes_used)
    click.echo(text.rstrip())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"tier_matrix_seed{seed}.csv"
    path.write_text(text)
    click.echo(f"written: {path}")


# -- serve -----------------------------------------------------------------------

@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--dataset", "dataset_path", type=click.Path(), default=None,
              help="Default dataset for new sessions.")
@click.option("--gt", "gt_path", type=click.Path(), default=None,
              help="Default reference edge list (enables metrics).")
@click.option("--manifest", type=click.Path(), default=None,
              help="Fixture manifest so sessions can name fixtures.")
@click.option("--state-dir", type=click.Path(), default=None,
              help="Persist sessions here; they resume on restart.")
@config_options
def serve(host: str, port: int, dataset_path: str | None, gt_path: str | None,
          manifest: str | None, state_dir: str | None,
          config_file: str | None, **flags) -> None:
    """Run the HTTP session service."""
    import uvicorn

    from .service import ServiceSettings, create_app

    config = build_config(config_file, flags)
    if dataset_path:
        load_dataset(dataset_path, config)     # fail fast with exit code 2
    settings = ServiceSettings(dataset=dataset_path, gt=gt_path, config=config,
                               state_dir=state_dir, manifest=manifest)
    app = create_app(settings)
    click.echo(f"session service on http://{host}:{port} "
               f"(schema v1; POST /v1/sessions to begin)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
