import numpy as np
import pytest

from corp import (
    ArgumentError,
    FeatureGroup,
    MapGroup,
    PipelineConfig,
    ShapeError,
    compute_proxy,
    generate_fixture,
    proxy_from_ground_truth,
    random_fixture_spec,
    resize_map_group,
    run_pipeline,
)
from corp.errors import DecoderNotFoundError
from corp.pipeline import IterationRecord, IterationTrace
from conftest import random_feature_group, random_map_group


def single_pixel_group(embedding):
    return FeatureGroup(np.asarray(embedding, dtype=np.float32).reshape(1, -1, 1, 1))


class TestComputeProxy:
    def test_single_pixel_identity(self):
        fg = single_pixel_group([0.6, 0.8])
        p = compute_proxy(fg, MapGroup.all_ones(1, 1, 1))
        assert np.allclose(p.vec, [0.6, 0.8], atol=1e-7)
        assert not p.degenerate

    def test_zero_masks_fall_back_to_unmasked(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=3, w=3)
        zeros = MapGroup(np.zeros((2, 3, 3), dtype=np.float32))
        p = compute_proxy(fg, zeros)
        unmasked = compute_proxy(fg, MapGroup.all_ones(2, 3, 3))
        assert p.degenerate and not unmasked.degenerate
        assert np.array_equal(p.vec, unmasked.vec)
        assert p.source_norm == 0.0

    def test_two_orthogonal_images(self):
        arr = np.zeros((2, 2, 1, 1), dtype=np.float32)
        arr[0, :, 0, 0] = [1.0, 0.0]
        arr[1, :, 0, 0] = [0.0, 1.0]
        fg = FeatureGroup(arr)
        p = compute_proxy(fg, MapGroup.all_ones(2, 1, 1))
        assert np.allclose(p.vec, [0.70710678, 0.70710678], atol=1e-7)

    def test_unit_norm_when_not_degenerate(self, rng):
        fg = random_feature_group(rng, n=3, d=6, h=4, w=4)
        p = compute_proxy(fg, random_map_group(rng, n=3, h=4, w=4))
        assert abs(np.linalg.norm(p.vec) - 1.0) <= 1e-6

    def test_all_zero_features_give_zero_degenerate_proxy(self):
        fg = FeatureGroup(np.zeros((2, 3, 2, 2), dtype=np.float32))
        p = compute_proxy(fg, MapGroup.all_ones(2, 2, 2))
        assert p.degenerate
        assert np.array_equal(p.vec, np.zeros(3))

    def test_image_order_invariant_bitwise(self, rng):
        # Exact summation over images makes the proxy independent of image order.
        fg = random_feature_group(rng, n=4, d=5, h=3, w=3)
        maps = random_map_group(rng, n=4, h=3, w=3)
        p = compute_proxy(fg, maps)
        perm = [3, 1, 0, 2]
        p2 = compute_proxy(FeatureGroup(fg.embeddings[perm]), MapGroup(maps.maps[perm]))
        assert np.array_equal(p.vec, p2.vec)

    def test_shape_mismatch(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=3, w=3)
        with pytest.raises(ShapeError):
            compute_proxy(fg, MapGroup.all_ones(2, 4, 4))


class TestProxyFromGroundTruth:
    def test_all_ones_gt_equals_unmasked(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=3, w=3)
        gt = MapGroup.all_ones(2, 3, 3)
        assert np.array_equal(
            proxy_from_ground_truth(fg, gt).vec, compute_proxy(fg, gt).vec
        )

    def test_single_selected_pixel(self):
        arr = np.zeros((1, 2, 1, 2), dtype=np.float32)
        arr[0, :, 0, 0] = [0.0, 1.0]
        arr[0, :, 0, 1] = [1.0, 0.0]
        fg = FeatureGroup(arr)
        gt = MapGroup(np.array([[[1.0, 0.0]]], dtype=np.float32))
        p = proxy_from_ground_truth(fg, gt)
        assert np.allclose(p.vec, [0.0, 1.0], atol=1e-7)

    def test_half_mask_normalized_mean(self):
        arr = np.zeros((1, 2, 1, 2), dtype=np.float32)
        arr[0, :, 0, 0] = [1.0, 0.0]
        arr[0, :, 0, 1] = [0.0, 1.0]
        fg = FeatureGroup(arr)
        gt = MapGroup(np.ones((1, 1, 2), dtype=np.float32))
        p = proxy_from_ground_truth(fg, gt)
        assert np.allclose(p.vec, [0.70710678, 0.70710678], atol=1e-7)


class TestRunPipeline:
    def test_zero_iterations_empty_trace(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=4, w=4)
        init = random_map_group(rng, n=2, h=4, w=4)
        trace = run_pipeline(fg, init, PipelineConfig(iters=0))
        assert len(trace) == 0
        assert trace.final_maps(init) is init

    def test_trace_indices_run_from_one(self, rng):
        spec = random_fixture_spec(5)
        fg, gt, init = generate_fixture(spec)
        trace = run_pipeline(fg, init, PipelineConfig(k=8, iters=4), gt=gt)
        assert [r.iteration for r in trace.records] == [1, 2, 3, 4]
        assert all(r.purity is not None for r in trace.records)

    def test_bit_identical_across_runs(self, rng):
        spec = random_fixture_spec(6)
        fg, gt, init = generate_fixture(spec)
        cfg = PipelineConfig(k=8)
        t1 = run_pipeline(fg, init, cfg)
        t2 = run_pipeline(fg, init, cfg)
        for a, b in zip(t1.records, t2.records):
            assert np.array_equal(a.maps.maps, b.maps.maps)
            assert np.array_equal(a.proxy.vec, b.proxy.vec)
            assert np.array_equal(a.corep.coords, b.corep.coords)

    def test_bit_identical_across_thread_counts(self):
        import os
        import subprocess
        import sys

        snippet = (
            "import hashlib, numpy as np\n"
            "from corp import FeatureGroup, MapGroup, PipelineConfig, run_pipeline\n"
            "rng = np.random.default_rng(4242)\n"
            "raw = rng.standard_normal((4, 16, 12, 12)).astype(np.float32)\n"
            "fg = FeatureGroup.from_tensors(list(raw), normalize=True)\n"
            "init = MapGroup(rng.random((4, 12, 12)).astype(np.float32))\n"
            "tr = run_pipeline(fg, init, PipelineConfig(k=8))\n"
            "h = hashlib.sha256()\n"
            "for r in tr.records:\n"
            "    h.update(r.maps.maps.tobytes())\n"
            "    h.update(r.proxy.vec.tobytes())\n"
            "print(h.hexdigest())\n"
        )
        digests = set()
        for threads in ("1", "4"):
            env = dict(
                os.environ, OMP_NUM_THREADS=threads, OPENBLAS_NUM_THREADS=threads,
                MKL_NUM_THREADS=threads,
            )
            out = subprocess.run(
                [sys.executable, "-c", snippet], env=env, capture_output=True, text=True
            )
            assert out.returncode == 0, out.stderr
            digests.add(out.stdout.strip())
        assert len(digests) == 1

    def test_fixed_point_propagates(self, rng):
        # Once two consecutive map groups agree exactly, every later
        # iteration must reproduce the same maps bit for bit. The step is a
        # pure function of (features, previous maps), so feeding any map
        # group twice must give identical outputs.
        spec = random_fixture_spec(7)
        fg, gt, init = generate_fixture(spec)
        cfg = PipelineConfig(k=8, iters=1)
        m1 = run_pipeline(fg, init, cfg).records[-1].maps
        a = run_pipeline(fg, m1, cfg).records[-1].maps
        b = run_pipeline(fg, m1, cfg).records[-1].maps
        assert np.array_equal(a.maps, b.maps)

    def test_converged_trace_stays_fixed(self, rng):
        spec = random_fixture_spec(8)
        fg, gt, init = generate_fixture(spec)
        trace = run_pipeline(fg, init, PipelineConfig(k=8, iters=8))
        maps = [r.maps.maps for r in trace.records]
        fixed_at = None
        for t in range(1, len(maps)):
            if np.array_equal(maps[t], maps[t - 1]):
                fixed_at = t
                break
        if fixed_at is not None:
            for t in range(fixed_at, len(maps)):
                assert np.array_equal(maps[t], maps[fixed_at - 1])

    def test_image_permutation_equivariance(self, rng):
        spec = random_fixture_spec(9)
        fg, gt, init = generate_fixture(spec)
        cfg = PipelineConfig(k=8, iters=2)
        trace = run_pipeline(fg, init, cfg)
        perm = [2, 0, 1]
        fg_p = FeatureGroup(fg.embeddings[perm])
        init_p = MapGroup(init.maps[perm])
        trace_p = run_pipeline(fg_p, init_p, cfg)
        for rec, rec_p in zip(trace.records, trace_p.records):
            assert np.array_equal(rec.maps.maps[perm], rec_p.maps.maps)

    def test_purity_non_decreasing_on_separable_fixture(self):
        for seed in (11, 12, 13):
            spec = random_fixture_spec(seed)
            fg, gt, init = generate_fixture(spec)
            trace = run_pipeline(fg, init, PipelineConfig(k=16), gt=gt)
            purities = [r.purity for r in trace.records]
            assert all(b >= a for a, b in zip(purities, purities[1:]))
            assert all(p == 1.0 for p in purities[1:])

    def test_gt_init_maps_give_pure_first_selection(self):
        spec = random_fixture_spec(10, init_mode="gt")
        fg, gt, init = generate_fixture(spec)
        trace = run_pipeline(fg, init, PipelineConfig(k=16, iters=1), gt=gt)
        assert trace.records[0].purity == 1.0

    def test_maps_resized_to_feature_grid(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=4, w=4)
        init = random_map_group(rng, n=2, h=16, w=16)
        trace = run_pipeline(fg, init, PipelineConfig(k=4, iters=1))
        assert trace.records[0].maps.maps.shape == (2, 4, 4)

    def test_ground_truth_proxy_mode(self, rng):
        spec = random_fixture_spec(14)
        fg, gt, init = generate_fixture(spec)
        cfg = PipelineConfig(k=8, iters=2, proxy_mode="from_ground_truth")
        trace = run_pipeline(fg, init, cfg, gt=gt)
        # Proxy comes from gt each iteration, so it never changes.
        assert np.array_equal(trace.records[0].proxy.vec, trace.records[1].proxy.vec)
        assert trace.records[0].purity == 1.0

    def test_ground_truth_mode_requires_gt(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=4, w=4)
        init = random_map_group(rng, n=2, h=4, w=4)
        with pytest.raises(ArgumentError):
            run_pipeline(fg, init, PipelineConfig(proxy_mode="from_ground_truth"))

    def test_unknown_decoder(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=4, w=4)
        init = random_map_group(rng, n=2, h=4, w=4)
        with pytest.raises(DecoderNotFoundError):
            run_pipeline(fg, init, PipelineConfig(decoder="missing"))

    def test_keep_scores(self, rng):
        fg = random_feature_group(rng, n=2, d=4, h=4, w=4)
        init = random_map_group(rng, n=2, h=4, w=4)
        trace = run_pipeline(fg, init, PipelineConfig(k=4, iters=1), keep_scores=True)
        assert trace.records[0].scores.shape == (2 * 4 * 4,)

    def test_binarize_maps_option(self, rng):
        spec = random_fixture_spec(15)
        fg, gt, init = generate_fixture(spec)
        t_soft = run_pipeline(fg, init, PipelineConfig(k=8, iters=1))
        t_bin = run_pipeline(fg, init, PipelineConfig(k=8, iters=1, binarize_maps=True))
        assert t_soft.records[0].maps.maps.shape == t_bin.records[0].maps.maps.shape


class TestIterationTrace:
    def test_bad_indices_rejected(self, rng):
        spec = random_fixture_spec(16)
        fg, gt, init = generate_fixture(spec)
        rec = run_pipeline(fg, init, PipelineConfig(k=4, iters=1)).records[0]
        with pytest.raises(ArgumentError):
            IterationTrace((IterationRecord(2, rec.proxy, rec.corep, rec.maps),))


class TestResizeMapGroup:
    def test_same_size_passthrough(self, rng):
        mg = random_map_group(rng, n=2, h=4, w=4)
        assert resize_map_group(mg, 4, 4) is mg

    def test_downsample_range(self, rng):
        mg = random_map_group(rng, n=2, h=16, w=16)
        out = resize_map_group(mg, 4, 4)
        assert out.maps.shape == (2, 4, 4)
        assert out.maps.min() >= 0.0 and out.maps.max() <= 1.0
