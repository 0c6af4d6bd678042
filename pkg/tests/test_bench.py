"""Benchmark plumbing: fixture manifests, the tier/regime stress matrix,
the tier-ablation table, and the interaction/accuracy frontier."""
from __future__ import annotations

import xml.etree.ElementTree as ET

import pytest

from conftest import GAMMA
from edgecert.bench import (
    ABLATION_ROWS,
    BenchmarkFixture,
    MatrixCell,
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
from edgecert.model import ALL_TIERS

NAMES = ["a", "b", "c"]


def write_fixture_files(root, rows: int = 12):
    csv_path = root / "data.csv"
    lines = ["a,b,c"]
    for k in range(rows):
        lines.append(f"{k * 0.5},{k % 3 + 0.25},{(k * 7) % 5}")
    csv_path.write_text("\n".join(lines) + "\n")
    gt_path = root / "gt.csv"
    gt_path.write_text("a,b\n# a comment line\n\nb,c\n")
    return csv_path, gt_path


def make_fixture(root, *, n_vertices=3, n_gt_edges=2, k_non_leaves=2):
    csv_path, gt_path = write_fixture_files(root)
    return BenchmarkFixture(name="toy", csv_path=str(csv_path),
                            gt_path=str(gt_path), n_vertices=n_vertices,
                            n_gt_edges=n_gt_edges, k_non_leaves=k_non_leaves)


# --------------------------------------------------------------------------
# fixture loading
# --------------------------------------------------------------------------

class TestFixtures:
    def test_load_returns_dataset_and_edges(self, tmp_path):
        with pytest.warns(UserWarning):      # tiny N triggers the advisory
            dataset, edges = make_fixture(tmp_path).load()
        assert dataset.names == NAMES
        assert edges == [(0, 1), (1, 2)]

    def test_vertex_count_mismatch(self, tmp_path):
        fixture = make_fixture(tmp_path, n_vertices=4)
        with pytest.raises(ValueError, match="expected 4 variables"):
            with pytest.warns(UserWarning):
                fixture.load()

    def test_edge_count_mismatch(self, tmp_path):
        fixture = make_fixture(tmp_path, n_gt_edges=3)
        with pytest.raises(ValueError, match="expected 3 edges"):
            with pytest.warns(UserWarning):
                fixture.load()

    def test_non_leaf_count_mismatch(self, tmp_path):
        fixture = make_fixture(tmp_path, k_non_leaves=1)
        with pytest.raises(ValueError, match="expected K=1"):
            with pytest.warns(UserWarning):
                fixture.load()

    def test_manifest_resolves_relative_paths(self, tmp_path):
        write_fixture_files(tmp_path)
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            '[{"name": "toy", "csv": "data.csv", "gt": "gt.csv",'
            ' "V": 3, "gt_edges": 2, "K": 2}]')
        fixtures = load_manifest(str(manifest))
        assert set(fixtures) == {"toy"}
        assert fixtures["toy"].csv_path == str(tmp_path / "data.csv")

    def test_fixture_dir_env_overrides_base(self, tmp_path, monkeypatch):
        manifest_dir = tmp_path / "here"
        data_dir = tmp_path / "elsewhere"
        manifest_dir.mkdir()
        data_dir.mkdir()
        write_fixture_files(data_dir)
        manifest = manifest_dir / "manifest.json"
        manifest.write_text(
            '[{"name": "toy", "csv": "data.csv", "gt": "gt.csv",'
            ' "V": 3, "gt_edges": 2, "K": 2}]')
        monkeypatch.setenv("EDGECERT_FIXTURES", str(data_dir))
        fixtures = load_manifest(str(manifest))
        assert fixtures["toy"].csv_path == str(data_dir / "data.csv")
        with pytest.warns(UserWarning):
            dataset, _ = fixtures["toy"].load()
        assert dataset.n == 12

    def test_edge_list_round_trip(self, tmp_path):
        path = tmp_path / "edges.csv"
        edges = [(2, 0), (0, 1)]
        write_edges(str(path), edges, NAMES)
        assert read_edges(str(path), NAMES) == edges

    def test_shipped_manifest_counts(self, manifest):
        expected = {"asia": (8, 8, 6), "sachs": (11, 17, 7),
                    "child": (20, 25, 13), "alarm": (37, 46, 26)}
        assert set(manifest) == set(expected)
        for name, (v, e, k) in expected.items():
            fixture = manifest[name]
            assert (fixture.n_vertices, fixture.n_gt_edges,
                    fixture.k_non_leaves) == (v, e, k)

    def test_shipped_fixtures_validate(self, asia):
        dataset, edges = asia
        assert dataset.v == 8
        assert len(edges) == 8


# --------------------------------------------------------------------------
# tier/regime stress matrix
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_matrix():
    regime_names = ("R_LIN_GAUSS", "R_DISCRETE")
    matrix = run_tier_matrix(GAMMA, n_pairs=6, n_samples=400, seed=3,
                             regime_names=regime_names)
    return matrix, regime_names


class TestTierMatrix:
    def test_cell_properties(self):
        assert MatrixCell(fired=0, correct=0).abstained
        assert MatrixCell(fired=0, correct=0).accuracy is None
        assert MatrixCell(fired=0, correct=0).label() == "abstain"
        cell = MatrixCell(fired=4, correct=3)
        assert not cell.abstained
        assert cell.accuracy == 0.75
        assert cell.label() == "3/4"

    def test_matrix_covers_every_tier_regime_cell(self, small_matrix):
        matrix, regime_names = small_matrix
        assert set(matrix) == {(tier, regime) for tier in ALL_TIERS
                               for regime in regime_names}
        for cell in matrix.values():
            assert 0 <= cell.correct <= cell.fired <= 6

    def test_gates_hold_at_small_scale(self, small_matrix):
        matrix, _ = small_matrix
        # homoscedastic Gaussian pairs never open the location-scale gate;
        # integer-valued pairs never open the score-ratio gate
        assert matrix[("L_LSNM", "R_LIN_GAUSS")].abstained
        assert matrix[("L_STEIN", "R_DISCRETE")].abstained

    def test_matrix_csv_shape(self, small_matrix):
        matrix, regime_names = small_matrix
        text = matrix_to_csv(matrix, regime_names)
        lines = text.strip().splitlines()
        assert lines[0] == "tier,R_LIN_GAUSS,R_DISCRETE"
        assert len(lines) == 1 + len(ALL_TIERS)
        assert [line.split(",")[0] for line in lines[1:]] == list(ALL_TIERS)

    def test_matrix_csv_fills_missing_cells(self):
        text = matrix_to_csv({}, ("R_PNL",))
        for line in text.strip().splitlines()[1:]:
            assert line.endswith(",abstain")


# --------------------------------------------------------------------------
# tier ablation
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def asia_ablation(asia):
    dataset, gt = asia
    return run_ablation(dataset, GAMMA, gt)


class TestAblation:
    def test_row_plan(self):
        labels = [label for label, _, _ in ABLATION_ROWS]
        assert labels == ["BASE", "+L_LSNM", "+L_IGCI", "+L_STEIN",
                          "+L_MDL", "+L_PEIT", "+all", "+all+guard"]
        assert ABLATION_ROWS[0][1] == ("L0", "L1", "L2")
        assert ABLATION_ROWS[-2][1] == ALL_TIERS
        assert [guard for _, _, guard in ABLATION_ROWS] == \
            [False] * 7 + [True]

    def test_rows_follow_the_plan(self, asia_ablation):
        assert [r.label for r in asia_ablation] == \
            [label for label, _, _ in ABLATION_ROWS]
        for row, (_, tiers, guard) in zip(asia_ablation, ABLATION_ROWS):
            assert row.tiers == tiers
            assert row.guard is guard

    def test_every_row_partitions_the_survivors(self, asia_ablation):
        totals = {row.commits + row.queries_left for row in asia_ablation}
        assert len(totals) == 1              # same survivor set re-aggregated

    def test_precision_consistent_with_counts(self, asia_ablation):
        for row in asia_ablation:
            assert 0 <= row.correct <= row.commits
            expected = row.correct / row.commits if row.commits else 0.0
            assert row.precision == pytest.approx(expected)

    def test_demotions_only_under_guard(self, asia_ablation):
        for row in asia_ablation:
            if not row.guard:
                assert row.demotions == 0

    def test_reference_dataset_commits_cleanly(self, asia_ablation):
        # the three identifiable asia pairs commit correctly under every
        # tier subset; three pairs always remain for the expert
        for row in asia_ablation:
            assert (row.commits, row.correct, row.queries_left) == (3, 3, 3)
            assert row.precision == 1.0

    def test_ablation_csv(self, asia_ablation):
        text = ablation_to_csv(asia_ablation)
        lines = text.strip().splitlines()
        assert lines[0] == ("configuration,commits,correct,queries_left,"
                            "demotions,precision")
        assert lines[1] == "BASE,3,3,3,0,1.000"
        assert len(lines) == 9


# --------------------------------------------------------------------------
# interaction/accuracy frontier
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def asia_pareto(asia):
    dataset, gt = asia
    return run_pareto(dataset, GAMMA, gt)


class TestPareto:
    def test_three_operating_points(self, asia_pareto):
        assert [p.strategy for p in asia_pareto] == \
            ["safe tiers + 5 queries", "cascade + hub", "pure hub"]

    def test_capped_point_respects_budget(self, asia_pareto):
        capped = asia_pareto[0]
        assert capped.queries <= 5
        assert (capped.queries, capped.precision, capped.recall) == \
            (3, 1.0, 0.75)

    def test_pure_hub_point_is_exact(self, asia_pareto):
        pure = asia_pareto[-1]
        assert (pure.queries, pure.precision, pure.recall, pure.f1) == \
            (7, 1.0, 1.0, 1.0)

    def test_pareto_csv(self, asia_pareto):
        lines = pareto_to_csv(asia_pareto).strip().splitlines()
        assert lines[0] == "strategy,queries,precision,recall,f1"
        assert lines[3] == "pure hub,7,1.000,1.000,1.000"

    def test_svg_is_well_formed_and_self_contained(self, asia_pareto):
        svg = pareto_to_svg(asia_pareto, title="asia frontier")
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
        assert "http" not in svg.replace("http://www.w3.org/2000/svg", "")
        # one marker per point and metric, plus the three legend swatches
        assert svg.count("<circle") == 3 * len(asia_pareto) + 3
        assert svg.count("<path") == 1   # the F1 frontier line
        assert "asia frontier" in svg
        assert "oracle interactions" in svg

    def test_svg_without_title(self, asia_pareto):
        svg = pareto_to_svg(asia_pareto)
        ET.fromstring(svg)
        assert "frontier" not in svg
