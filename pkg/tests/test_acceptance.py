"""Acceptance gate: every primary criterion at its stated tolerance.

Each test prints one ``ACCEPTANCE PASS`` line once its assertions hold; run
with ``pytest -s tests/test_acceptance.py`` to see them. The synthetic
end-to-end criteria share one session-scoped suite/bank/evaluation run.
"""

import itertools
import json
import time

import numpy as np
import pytest

from lad import bank as bank_mod
from lad import pipeline, synthlab, tensor_store
from lad.cli import main as cli_main
from lad.config import PipelineConfig
from lad.descriptors import dcga_descriptors
from lad.matcher import extract_matches, match_descriptors, sinkhorn_assign
from lad.metrics import GtRegion, auroc, spro
from lad.scene_objects import object_feature_maps
from lad.scorer import (
    GaussianField,
    ScoreParams,
    canonical_crop,
    estimate_gaussian_field,
    lightweight_fuse,
    mahalanobis_map,
    score_objects,
)
from lad.upsampler import jbu_upsample

from tests.test_matcher import diag_dominant, max_weight_permutation
from tests.test_metrics import auroc_sweep_oracle, region, spro_oracle
from tests.test_scorer import covariance_oracle, crop_from, paired_assignments, tiny_scene


def ok(name):
    print(f"\nACCEPTANCE PASS: {name}")


@pytest.fixture(scope="session")
def suite(tmp_path_factory):
    """Standard fixed-seed suite, bank, and full evaluation run."""
    root = tmp_path_factory.mktemp("acceptance")
    t0 = time.perf_counter()
    templates, evals = synthlab.standard_suite()
    synthlab.emit_suite(root / "suite", templates, evals)
    config = PipelineConfig()
    pipeline.build_bank_dir(
        pipeline.scene_dirs_in(root / "suite" / "templates"), root / "bank", config
    )
    bank, sources = bank_mod.load_bank(root / "bank")
    report = pipeline.eval_dataset(
        root / "suite" / "eval", bank, sources, config, out_dir=root / "out"
    )
    wall = time.perf_counter() - t0
    return {
        "root": root,
        "config": config,
        "bank": bank,
        "sources": sources,
        "report": report,
        "wall": wall,
        "eval_specs": evals,
    }


class TestTransportConstraints:
    def test_partial_assignment_constraints(self):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        for _ in range(200):
            m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            s = rng.uniform(-1, 1, size=(m, n))
            plan = sinkhorn_assign(s, float(rng.uniform(-2, 2)), iters=100, tol=1e-6)
            p = plan.interior
            assert np.all(p >= 0.0)
            assert np.all(p.sum(axis=1) <= 1.0 + 1e-6)
            assert np.all(p.sum(axis=0) <= 1.0 + 1e-6)
            assert np.all(plan.p_bar >= 0.0)
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0
        ok(f"transport constraints on 200 random plans ({elapsed:.2f}s < 10s)")


class TestAssignmentOracle:
    def test_matches_exhaustive_permutation_oracle(self):
        rng = np.random.default_rng(7)
        t0 = time.perf_counter()
        for _ in range(100):
            n = int(rng.integers(4, 7))
            s = diag_dominant(rng, n)
            bin_score = float(s.min() - 1.0)
            plan = sinkhorn_assign(s, bin_score, iters=500, tol=1e-9)
            asg = extract_matches(plan, match_threshold=0.2)
            assert {(q, r) for q, r, _ in asg.matched} == max_weight_permutation(s)
            assert asg.unmatched_query == []
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0
        ok(f"assignment equals max-weight oracle on 100 matrices ({elapsed:.2f}s < 30s)")


class TestGaussianMahalanobisOracles:
    def test_covariance_against_double_loop(self):
        rng = np.random.default_rng(11)
        for k, c in ((2, 3), (5, 8), (8, 4)):
            stack = rng.standard_normal((k, 4, 4, c))
            fld = estimate_gaussian_field([crop_from(s) for s in stack], 0.01, "full")
            mean, cov = covariance_oracle(stack, 0.01)
            np.testing.assert_allclose(fld.mean, mean, atol=1e-9)
            np.testing.assert_allclose(fld.cov, cov, atol=1e-9)
            assert np.linalg.eigvalsh(fld.cov).min() >= 0.01 - 1e-9
        ok("covariance matches double-loop oracle within 1e-9; min eig >= eps")

    def test_mahalanobis_against_explicit_inverse(self):
        from tests.test_scorer import adjugate_inverse_3x3

        rng = np.random.default_rng(12)
        stack = rng.standard_normal((6, 3, 3, 3))
        fld = estimate_gaussian_field([crop_from(s) for s in stack], 0.05, "full")
        q = rng.standard_normal((3, 3, 3))
        out = mahalanobis_map(crop_from(q), fld)
        for y in range(3):
            for x in range(3):
                d = q[y, x] - fld.mean[y, x]
                expect = np.sqrt(d @ adjugate_inverse_3x3(fld.cov[y, x]) @ d)
                assert abs(out[y, x] - expect) < 1e-6
        ok("Mahalanobis matches explicit-inverse oracle within 1e-6")

    def test_identity_metric_is_euclidean_exactly(self):
        rng = np.random.default_rng(13)
        q = rng.standard_normal((5, 5, 4))
        fld = GaussianField(
            mean=np.zeros((5, 5, 4)), cov=np.ones((5, 5, 4)), epsilon=1.0, k=2,
            mode="diag",
        )
        out = mahalanobis_map(crop_from(q), fld)
        assert np.array_equal(out, np.sqrt((q * q).sum(axis=-1)))
        ok("mean-zero identity-covariance case equals Euclidean norm exactly")


class TestFusionIdentities:
    def test_additivity_and_lightweight(self):
        rng = np.random.default_rng(14)
        query = tiny_scene(rng)
        refs = [tiny_scene(rng), tiny_scene(rng)]
        params = ScoreParams(r_grid=8, out_hw=(24, 24))
        asgs = [paired_assignments(3, 3, {0, 2}), paired_assignments(3, 3, {2})]
        full = score_objects(asgs, query, refs, params)
        m_only = score_objects(asgs, query, refs, params, sets=("matched",))
        u_only = score_objects(asgs, query, refs, params, sets=("unmatched",))
        np.testing.assert_allclose(full.scores, m_only.scores + u_only.scores, atol=1e-6)
        light = lightweight_fuse(asgs, query, refs, params)
        assert np.array_equal(light.scores, u_only.scores)
        ok("fusion additivity within 1e-6; lightweight equals empty-matched exactly")


class TestMetricOracles:
    def test_twenty_toy_cases(self):
        rng = np.random.default_rng(15)
        for case in range(20):
            scores = np.round(rng.random(30), 2)
            labels = (rng.random(30) < 0.5).astype(int)
            labels[0], labels[1] = 0, 1
            assert auroc(scores, labels) == pytest.approx(
                auroc_sweep_oracle(scores, labels), abs=1e-9
            )
            assert auroc(scores**3, labels) == pytest.approx(
                auroc(scores, labels), abs=1e-9
            )
            grid = np.round(rng.random((8, 8)), 1)
            gt = np.zeros((8, 8), dtype=bool)
            gt[2:4, 3:5] = True
            regions = [[region(gt, saturation=int(rng.integers(1, 5)))]]
            assert spro([grid], regions, 0.05) == pytest.approx(
                spro_oracle([grid], regions, 0.05), abs=1e-9
            )
            assert spro([grid**3], regions, 0.05) == pytest.approx(
                spro([grid], regions, 0.05), abs=1e-9
            )
        ok("AUROC and sPRO match exhaustive oracles within 1e-9 on 20 toy cases")


class TestJbu:
    def test_identity_shapes_and_bounds(self):
        rng = np.random.default_rng(16)
        low = np.full((3, 4, 5), np.float32(1.5))
        guide = rng.random((3, 32, 40)).astype(np.float32)
        out = jbu_upsample(low, guide, 8)
        assert np.all(out == np.float32(1.5))
        assert out.shape == (3, 32, 40)
        for _ in range(50):
            low = rng.standard_normal((2, 3, 3)).astype(np.float32)
            guide = rng.random((3, 24, 24)).astype(np.float32)
            out = jbu_upsample(low, guide, 8, sigma_spatial=0.8, sigma_range=0.15)
            assert out.shape == (2, 24, 24)
            for c in range(2):
                assert out[c].min() >= low[c].min() - 1e-6
                assert out[c].max() <= low[c].max() + 1e-6
        ok("JBU constant identity exact, 8x shapes exact, convex bounds on 50 inputs")


class TestSyntheticEndToEnd:
    def test_image_auroc(self, suite):
        value = suite["report"]["image_auroc"]
        assert value >= 0.95
        ok(f"synthetic suite image AUROC {value:.4f} >= 0.95")

    def test_pixel_spro(self, suite):
        value = suite["report"]["pixel_spro"]
        assert value >= 0.80
        ok(f"synthetic suite pixel sPRO {value:.4f} >= 0.80 at 5% FPR cap")

    def test_matcher_precision_recall(self, suite):
        config = suite["config"]
        normal_specs = [s for s in suite["eval_specs"] if s.anomaly == "none"][:10]
        bundles = [synthlab.generate_scene(s) for s in normal_specs]
        descs = []
        for b in bundles:
            up = jbu_upsample(
                b.features, b.image, config.upsample.factor,
                config.upsample.sigma_spatial, config.upsample.sigma_range,
            )
            descs.append(dcga_descriptors(object_feature_maps(b.masks, up),
                                          config.dcga_params()))
        correct = matched = expected = 0
        for a, b_ in itertools.combinations(range(len(descs)), 2):
            asg, _ = match_descriptors(
                descs[a], descs[b_],
                bin_score=config.match.bin_score, iters=config.match.iters,
                tol=config.match.tol, match_threshold=config.match.threshold,
            )
            correct += sum(1 for q, r, _ in asg.matched if q == r)
            matched += len(asg.matched)
            expected += descs[a].d.shape[0]
        precision = correct / matched if matched else 0.0
        recall = correct / expected
        assert precision >= 0.95
        assert recall >= 0.95
        ok(f"matcher precision {precision:.4f} / recall {recall:.4f} >= 0.95")

    def test_runtime_budget(self, suite):
        assert suite["wall"] < 300.0
        ok(f"full synthetic suite in {suite['wall']:.1f}s < 300s")

    def test_template_query_scores_low(self, suite):
        # a bank template queried against its own bank scores below the
        # normal 95th percentile of the evaluation suite
        normal_scores = sorted(
            row["image_score"]
            for row in suite["report"]["per_scene"]
            if row["label"] == 0
        )
        p95 = normal_scores[int(np.ceil(0.95 * len(normal_scores))) - 1]
        tid = suite["bank"].ids[0]
        res = pipeline.detect_scene(
            suite["sources"][tid], suite["bank"], suite["sources"], suite["config"]
        )
        assert res.anomaly_map.image_score < p95
        ok(f"template self-query {res.anomaly_map.image_score:.3f} "
           f"< normal p95 {p95:.3f}")


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k != "timings"}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj


class TestDeterminism:
    def test_eval_reports_byte_identical(self, suite, tmp_path):
        root = suite["root"]
        # 16-scene subset keeps the double run quick
        subset = tmp_path / "subset"
        subset.mkdir()
        scenes = pipeline.scene_dirs_in(root / "suite" / "eval")
        keep = scenes[:8] + scenes[-8:]
        for s in keep:
            (subset / s.name).symlink_to(s)
        outs = []
        for run in (1, 2):
            out = tmp_path / f"run{run}"
            code = cli_main(
                ["eval", "--bank", str(root / "bank"), "--dataset", str(subset),
                 "--out", str(out), "--seed", "0"]
            )
            assert code == 0
            outs.append(out)
        r1 = json.loads((outs[0] / "metrics.json").read_text())
        r2 = json.loads((outs[1] / "metrics.json").read_text())
        canon = lambda r: json.dumps(strip_timings(r), sort_keys=True)
        assert canon(r1) == canon(r2)
        for s in keep:
            a = (outs[0] / s.name / "report.json").read_text()
            b = (outs[1] / s.name / "report.json").read_text()
            assert canon(json.loads(a)) == canon(json.loads(b))
            assert (outs[0] / s.name / "anomaly.sltf").read_bytes() == (
                outs[1] / s.name / "anomaly.sltf"
            ).read_bytes()
        ok("two eval runs byte-identical modulo timing fields")
