"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single pass/fail line (visible with ``pytest -s``); run

    pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

from tryon3d.depthtools import (
    depth_gradient_loss,
    depth_metrics,
    drm_combine,
    log_l1_loss,
)
from tryon3d.fusion import fuse
from tryon3d.imgcore import DepthMap, GrayImage, MaskImage, RgbImage
from tryon3d.metrics import iou, ssim
from tryon3d.pipeline import PipelineConfig, SampleRecord, run_pipeline
from tryon3d.prealign import apply_affine, compute_prealign
from tryon3d.recon import (
    euler_characteristic,
    import_ply,
    is_watertight,
    render_depth,
    stitch_mesh,
    telea_inpaint,
)
from tryon3d.synth import write_sample
from tryon3d.tpswarp import Correspondences, fit_tps, grid_points, tps_apply_points


def criterion(number, description, ok):
    line = f"[acceptance {number:02d}] {description}: {'PASS' if ok else 'FAIL'}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def smoke_env(tmp_path_factory):
    """Bundled 512x320 synthetic sample plus one reference pipeline run."""
    base = tmp_path_factory.mktemp("accept")
    root = str(base / "data")
    write_sample(root, name="sample0")  # full 512x320
    sample = SampleRecord.from_dataset(root, "sample0")
    cfg = PipelineConfig(threads=1)
    t0 = time.perf_counter()
    artifacts = run_pipeline(sample, cfg, out_dir=str(base / "run_a"),
                             use_synth_depth=True)
    elapsed = time.perf_counter() - t0
    return {"base": base, "root": root, "sample": sample,
            "artifacts": artifacts, "elapsed": elapsed}


def test_criterion_01_tps_affine_recovery():
    rng = np.random.default_rng(101)
    worst_point = 0.0
    worst_weight = 0.0
    t0 = time.perf_counter()
    for _ in range(100):
        a = rng.normal(size=(2, 2)) + np.eye(2)
        b = rng.normal(size=2) * 30
        src = grid_points(0, 0, 120, 200, 5, 5)  # 25 control points
        tgt = src @ a.T + b
        params = fit_tps(Correspondences(src, tgt))
        worst_weight = max(worst_weight, float(np.abs(params.weights).max()))
        err = np.abs(tps_apply_points(params, src) - tgt).max()
        worst_point = max(worst_point, float(err))
    elapsed = time.perf_counter() - t0
    criterion(
        1,
        f"TPS affine recovery (err {worst_point:.2e}, w {worst_weight:.2e}, {elapsed:.2f}s)",
        worst_point < 1e-6 and worst_weight < 1e-8 and elapsed < 1.0,
    )


def test_criterion_02_tps_interpolation():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(50):
        src = rng.uniform(0, 150, (20, 2))
        amp = rng.uniform(2, 8)
        tgt = src + amp * np.stack(
            [np.sin(src[:, 1] / rng.uniform(15, 40)),
             np.cos(src[:, 0] / rng.uniform(15, 40))], axis=1)
        params = fit_tps(Correspondences(src, tgt), 0.0)
        worst = max(worst, float(np.abs(tps_apply_points(params, src) - tgt).max()))
    criterion(2, f"TPS interpolation at zero regularization (res {worst:.2e})",
              worst < 1e-6)


def test_criterion_03_prealignment_improves_iou():
    rng = np.random.default_rng(103)
    h = w = 150
    ys, xs = np.mgrid[0:h, 0:w]
    wins = 0
    gains = []
    for _ in range(100):
        cx, cy = 75 + rng.uniform(-10, 10, 2)
        rx = rng.uniform(14, 30)
        ry = rng.uniform(20, 42)
        target = MaskImage(((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1)
        scale = rng.uniform(0.3, 3.0)
        anis = rng.uniform(0.9, 1.1)
        ox, oy = rng.uniform(-30, 30, 2)
        cloth = MaskImage(
            ((xs - cx - ox) / (rx * scale)) ** 2
            + ((ys - cy - oy) / (ry * scale * anis)) ** 2 <= 1
        )
        raw = iou(cloth, target)
        params = compute_prealign(cloth, target)
        aligned = apply_affine(cloth, params, w, h)
        post = iou(aligned, target)
        wins += post >= raw
        gains.append(post - raw)
    mean_gain = float(np.mean(gains))
    criterion(3, f"pre-alignment IoU property ({wins}/100 wins, mean gain {mean_gain:.3f})",
              wins >= 95 and mean_gain > 0.1)


def test_criterion_04_gradient_checks():
    rng = np.random.default_rng(104)
    step = 1e-6
    worst = 0.0
    for _ in range(100):
        while True:
            pred = rng.uniform(0.2, 0.8, (16, 16))
            offset = rng.choice([-1.0, 1.0], (16, 16)) * rng.uniform(0.01, 0.25, (16, 16))
            gt = pred + offset
            mask = MaskImage(rng.uniform(size=(16, 16)) > 0.25)
            if mask.data.any() and np.all(np.abs(pred - gt)[mask.data] >= 1e-4):
                break  # reject samples at the L1 kink
        for fn in (log_l1_loss, depth_gradient_loss):
            analytic = fn(DepthMap(pred), DepthMap(gt), mask).gradient
            for i, j in zip(*np.nonzero(mask.data)):
                plus = pred.copy()
                plus[i, j] += step
                minus = pred.copy()
                minus[i, j] -= step
                numeric = (fn(DepthMap(plus), DepthMap(gt), mask).value
                           - fn(DepthMap(minus), DepthMap(gt), mask).value) / (2 * step)
                denom = max(abs(numeric), abs(analytic[i, j]), 1e-8)
                worst = max(worst, abs(numeric - analytic[i, j]) / denom)
    criterion(4, f"analytic gradients vs finite differences (max rel {worst:.2e})",
              worst < 1e-4)


def test_criterion_05_constant_offset_invariance():
    rng = np.random.default_rng(105)
    gt = rng.uniform(0, 1, (24, 24))
    mask = MaskImage(np.ones((24, 24), dtype=bool))
    worst = max(
        abs(depth_gradient_loss(DepthMap(gt + c), DepthMap(gt), mask).value)
        for c in (-0.5, 0.1, 1.0)
    )
    criterion(5, f"constant-offset invariance (max {worst:.2e})", worst < 1e-12)


def test_criterion_06_weighted_sum_arithmetic():
    value = drm_combine(2.0, 1.0, 1.0, 0.5)
    criterion(6, f"weighted loss arithmetic ({value})", value == 2.5)


def test_criterion_07_reconstruction_round_trip():
    from scipy.ndimage import zoom
    rng = np.random.default_rng(107)
    h, w = 40, 64
    ys, xs = np.mgrid[0:h, 0:w]
    mask = MaskImage((xs - 31.5) ** 2 + (ys - 19.5) ** 2 <= 15.3 ** 2)
    white = RgbImage(np.ones((h, w, 3)))
    ok = True
    worst = 0.0
    for _ in range(20):
        def field(lo, hi):
            z = zoom(rng.normal(size=(5, 5)), (h / 5, w / 5), order=3)
            z = (z - z.min()) / (np.ptp(z) + 1e-12)
            return lo + z * (hi - lo)
        df = DepthMap(field(0.25, 0.42))
        db = DepthMap(field(0.55, 0.75))
        mesh = stitch_mesh(df, db, mask, white, white)
        ok = ok and is_watertight(mesh) and euler_characteristic(mesh) == 2
        front = render_depth(mesh, w, h, "front")
        back = render_depth(mesh, w, h, "back")
        worst = max(
            worst,
            float(np.abs(front.data[mask.data] - df.data[mask.data]).max()),
            float(np.abs(back.data[mask.data] - db.data[mask.data]).max()),
        )
    criterion(7, f"reconstruction round trip (max depth err {worst:.2e})",
              ok and worst < 1e-6)


def test_criterion_08_fusion_endpoints():
    rng = np.random.default_rng(108)
    shape = (25, 40)  # 1000 pixels
    cloth = RgbImage(rng.uniform(0, 1, shape + (3,)))
    coarse = RgbImage(rng.uniform(0, 1, shape + (3,)))
    all_cloth = fuse(cloth, coarse, GrayImage(np.ones(shape)))
    all_coarse = fuse(cloth, coarse, GrayImage(np.zeros(shape)))
    endpoints = (np.array_equal(all_cloth.data, cloth.data)
                 and np.array_equal(all_coarse.data, coarse.data))
    blend = fuse(cloth, coarse, GrayImage(rng.uniform(0, 1, shape)))
    lo = np.minimum(cloth.data, coarse.data)
    hi = np.maximum(cloth.data, coarse.data)
    hull = bool(np.all(blend.data >= lo - 1e-12) and np.all(blend.data <= hi + 1e-12))
    criterion(8, "fusion endpoints bit-exact and convex hull", endpoints and hull)


def test_criterion_09_inpainting():
    h = w = 64
    ys, xs = np.mgrid[0:h, 0:w]
    hole = MaskImage((xs - 32) ** 2 + (ys - 32) ** 2 <= 5 ** 2)  # 10-px disk
    const = RgbImage(np.full((h, w, 3), 0.37))
    filled = telea_inpaint(const, hole, 5)
    exact_const = bool(np.abs(filled.data - 0.37).max() < 1e-12)
    ramp = RgbImage(np.repeat((xs / (w - 1.0))[:, :, None], 3, axis=2))
    out = telea_inpaint(ramp, hole, 5)
    ramp_err = float(np.abs(out.data - ramp.data)[hole.data].max())
    untouched = bool(np.array_equal(out.data[~hole.data], ramp.data[~hole.data]))
    criterion(9, f"fast-marching inpainting (ramp err {ramp_err:.3f})",
              exact_const and ramp_err <= 0.05 and untouched)


def test_criterion_10_metric_oracles():
    rng = np.random.default_rng(110)
    img = RgbImage(rng.uniform(0, 1, (20, 20, 3)))
    ssim_ok = ssim(img, img) == 1.0

    nested_small = np.zeros(100, dtype=bool)
    nested_small[:50] = True
    nested_big = np.zeros(100, dtype=bool)
    nested_big[:100] = True
    iou_ok = iou(MaskImage(nested_small.reshape(10, 10)),
                 MaskImage(nested_big.reshape(10, 10))) == 0.5

    pred = DepthMap(rng.uniform(0.1, 1.0, (12, 9)))
    gt = DepthMap(rng.uniform(0.1, 1.0, (12, 9)))
    mask = MaskImage(rng.uniform(size=(12, 9)) > 0.3)
    m = depth_metrics(pred, gt, mask)
    diffs = [float(pred.data[i, j] - gt.data[i, j])
             for i, j in zip(*np.nonzero(mask.data))]
    n = len(diffs)
    brute_abs = sum(abs(d) for d in diffs) / n
    brute_sq = sum(d * d for d in diffs) / n
    brute_rmse = brute_sq ** 0.5
    brute_ok = (abs(m.abs_err - brute_abs) < 1e-12
                and abs(m.sq_err - brute_sq) < 1e-12
                and abs(m.rmse - brute_rmse) < 1e-12)

    const_err = depth_metrics(DepthMap(gt.data + 0.01), gt, mask)
    scaled_ok = abs(const_err.rmse * 1000.0 - 10.0) < 1e-6
    criterion(10, "metric oracles (ssim/iou/depth/scaling)",
              ssim_ok and iou_ok and brute_ok and scaled_ok)


def test_criterion_11_end_to_end_smoke(smoke_env):
    artifacts = smoke_env["artifacts"]
    elapsed = smoke_env["elapsed"]
    mesh = import_ply(artifacts["mesh"])
    reparse_ok = mesh.num_triangles > 0 and mesh.num_vertices > 0
    again = import_ply(artifacts["mesh"])
    lossless = (np.array_equal(mesh.triangles, again.triangles)
                and np.array_equal(mesh.vertices, again.vertices))

    rerun = run_pipeline(smoke_env["sample"], PipelineConfig(threads=1),
                         out_dir=str(smoke_env["base"] / "run_b"),
                         use_synth_depth=True)
    identical = all(
        open(artifacts[k], "rb").read() == open(rerun[k], "rb").read()
        for k in artifacts
    )
    criterion(11, f"end-to-end smoke ({elapsed:.2f}s, 9 intermediates + report)",
              elapsed < 4.0 and len(artifacts) == 10 and reparse_ok
              and lossless and identical)


def test_criterion_12_thread_determinism(smoke_env):
    artifacts = smoke_env["artifacts"]
    threaded = run_pipeline(smoke_env["sample"], PipelineConfig(threads=8),
                            out_dir=str(smoke_env["base"] / "run_c"),
                            use_synth_depth=True)
    mesh_a = import_ply(artifacts["mesh"])
    mesh_c = import_ply(threaded["mesh"])
    topo_ok = (np.array_equal(mesh_a.triangles, mesh_c.triangles)
               and np.array_equal(mesh_a.vertices, mesh_c.vertices))

    def metrics_of(path):
        out = {}
        for line in open(path).read().splitlines():
            key, value = line.split("=", 1)
            try:
                out[key] = float(value)
            except ValueError:
                pass
        return out

    ma = metrics_of(artifacts["report"])
    mc = metrics_of(threaded["report"])
    metric_ok = set(ma) == set(mc) and all(
        abs(ma[k] - mc[k]) <= 1e-12 * max(1.0, abs(ma[k])) for k in ma
    )
    criterion(12, "thread-count determinism (topology + metrics)",
              topo_ok and metric_ok)
