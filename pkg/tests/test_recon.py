import numpy as np
import pytest

from tryon3d.imgcore import DepthMap, LabelMap, MaskImage, RgbImage
from tryon3d.recon import (
    Mesh,
    cleanup_mask,
    euler_characteristic,
    export_ply,
    grid_to_world,
    import_ply,
    is_watertight,
    make_back_texture,
    render_depth,
    stitch_mesh,
    synth_depth,
    telea_inpaint,
    unproject,
)


def white(h, w):
    return RgbImage(np.ones((h, w, 3)))


def disk_mask(h, w, cx, cy, r):
    ys, xs = np.mgrid[0:h, 0:w]
    return MaskImage((xs - cx) ** 2 + (ys - cy) ** 2 <= r * r)


def smooth_pair(rng, h, w, gap=0.1):
    from scipy.ndimage import zoom
    def field(lo, hi):
        z = zoom(rng.normal(size=(5, 5)), (h / 5, w / 5), order=3)
        z = (z - z.min()) / (np.ptp(z) + 1e-12)
        return lo + z * (hi - lo)
    return DepthMap(field(0.25, 0.45)), DepthMap(field(0.45 + gap, 0.75))


def test_unproject_center_pixel():
    h = w = 9
    mask = np.zeros((h, w), dtype=bool)
    mask[4, 4] = True
    df = DepthMap(np.full((h, w), 0.3))
    db = DepthMap(np.full((h, w), 0.7))
    cloud = unproject(df, db, MaskImage(mask), white(h, w), white(h, w))
    assert len(cloud) == 2
    assert np.abs(cloud.positions[0] - [0.0, 0.0, 0.3]).max() < 1.0 / h
    assert np.abs(cloud.positions[1] - [0.0, 0.0, 0.7]).max() < 1.0 / h
    assert np.all(cloud.colors == 1.0)
    assert list(cloud.source) == [0, 1]


def test_unproject_point_count_and_errors():
    rng = np.random.default_rng(0)
    mask = MaskImage(rng.uniform(size=(12, 10)) > 0.4)
    n = mask.count()
    df = DepthMap(np.full((12, 10), 0.4))
    db = DepthMap(np.full((12, 10), 0.6))
    cloud = unproject(df, db, mask, white(12, 10), white(12, 10))
    assert len(cloud) == 2 * n
    with pytest.raises(ValueError, match="empty"):
        unproject(df, db, MaskImage(np.zeros((12, 10), bool)), white(12, 10), white(12, 10))
    with pytest.warns(UserWarning, match="behind"):
        unproject(db, df, mask, white(12, 10), white(12, 10))


def test_stitch_mesh_box():
    mask = MaskImage(np.pad(np.ones((2, 2), dtype=bool), 2))
    df = DepthMap(np.full((6, 6), 0.3))
    db = DepthMap(np.full((6, 6), 0.7))
    mesh = stitch_mesh(df, db, mask, white(6, 6), white(6, 6))
    assert mesh.num_vertices == 8
    assert mesh.num_triangles == 12
    assert is_watertight(mesh)
    assert euler_characteristic(mesh) == 2


def test_stitch_mesh_disk_watertight_outward():
    h, w = 40, 64
    mask = disk_mask(h, w, 31.5, 19.5, 10.2)
    # star-shaped inflation profile so every face normal points away from center
    df, db = synth_depth(mask, base=0.5, amplitude=0.1)
    mesh = stitch_mesh(df, db, mask, white(h, w), white(h, w))
    assert is_watertight(mesh)
    assert euler_characteristic(mesh) == 2
    center = mesh.vertices.mean(axis=0)
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    v1 = mesh.vertices[mesh.triangles[:, 1]]
    v2 = mesh.vertices[mesh.triangles[:, 2]]
    normals = np.cross(v1 - v0, v2 - v0)
    outward = np.einsum("ij,ij->i", normals, (v0 + v1 + v2) / 3 - center)
    nondegenerate = np.linalg.norm(normals, axis=1) > 1e-12
    assert np.all(outward[nondegenerate] > 0)


def test_stitch_mesh_fills_holes():
    mask = np.zeros((20, 20), dtype=bool)
    mask[4:16, 4:16] = True
    mask[9:11, 9:11] = False  # interior hole; cleanup must close it
    df = DepthMap(np.full((20, 20), 0.3))
    db = DepthMap(np.full((20, 20), 0.7))
    mesh = stitch_mesh(df, db, MaskImage(mask), white(20, 20), white(20, 20))
    assert is_watertight(mesh)
    assert euler_characteristic(mesh) == 2


def test_stitch_mesh_errors():
    df = DepthMap(np.full((8, 8), 0.3))
    db = DepthMap(np.full((8, 8), 0.7))
    with pytest.raises(ValueError, match="empty"):
        stitch_mesh(df, db, MaskImage(np.zeros((8, 8), bool)), white(8, 8), white(8, 8))
    line = np.zeros((8, 8), dtype=bool)
    line[4, 1:7] = True
    with pytest.raises(ValueError, match="line"):
        stitch_mesh(df, db, MaskImage(line), white(8, 8), white(8, 8))


def test_stitch_mesh_watertight_on_random_masks():
    rng = np.random.default_rng(2)
    for _ in range(10):
        blob = rng.uniform(size=(18, 22)) > 0.45
        if not blob.any():
            continue
        mask = MaskImage(blob)
        df = DepthMap(np.where(blob, 0.4, 0.0))
        db = DepthMap(np.where(blob, 0.6, 0.0))
        try:
            mesh = stitch_mesh(df, db, mask, white(18, 22), white(18, 22))
        except ValueError:
            continue  # degenerates to a line: acceptable outcome
        assert is_watertight(mesh)


def test_render_round_trip():
    rng = np.random.default_rng(3)
    h, w = 40, 64
    mask = disk_mask(h, w, 31.5, 19.5, 15.3)
    df, db = smooth_pair(rng, h, w)
    mesh = stitch_mesh(df, db, mask, white(h, w), white(h, w))
    front = render_depth(mesh, w, h, "front")
    back = render_depth(mesh, w, h, "back")
    m = mask.data
    assert np.abs(front.data[m] - df.data[m]).max() < 1e-6
    assert np.abs(back.data[m] - db.data[m]).max() < 1e-6


def test_render_empty_mesh():
    mesh = Mesh(vertices=np.zeros((0, 3)), colors=np.zeros((0, 3)),
                normals=np.zeros((0, 3)), triangles=np.zeros((0, 3), np.int64))
    out = render_depth(mesh, 8, 6, "front")
    assert np.all(out.data == 0.0)
    with pytest.raises(ValueError, match="side"):
        render_depth(mesh, 8, 6, "sideways")


def test_telea_identity_on_empty_region():
    rng = np.random.default_rng(4)
    img = RgbImage(rng.uniform(0, 1, (10, 10, 3)))
    out = telea_inpaint(img, MaskImage(np.zeros((10, 10), bool)), 3)
    assert np.array_equal(out.data, img.data)


def test_telea_constant_fill_exact():
    img = RgbImage(np.full((32, 32, 3), 0.42))
    hole = disk_mask(32, 32, 16, 16, 5)
    out = telea_inpaint(img, hole, 5)
    assert np.abs(out.data - 0.42).max() < 1e-12


def test_telea_linear_ramp():
    h = w = 64
    ys, xs = np.mgrid[0:h, 0:w]
    ramp = np.repeat((xs / (w - 1.0))[:, :, None], 3, axis=2)
    img = RgbImage(ramp)
    hole = disk_mask(h, w, 32, 32, 5)
    out = telea_inpaint(img, hole, 5)
    err = np.abs(out.data - img.data)
    assert err[hole.data].max() <= 0.05
    # untouched outside, bit-exact
    assert np.array_equal(out.data[~hole.data], img.data[~hole.data])


def test_telea_hull_property():
    rng = np.random.default_rng(5)
    img = RgbImage(rng.uniform(0, 1, (24, 24, 3)))
    hole = disk_mask(24, 24, 12, 12, 4)
    out = telea_inpaint(img, hole, 4)
    known = img.data[~hole.data]
    for c in range(3):
        assert out.data[:, :, c][hole.data].min() >= known[:, c].min() - 1e-12
        assert out.data[:, :, c][hole.data].max() <= known[:, c].max() + 1e-12


def test_telea_errors():
    img = RgbImage(np.zeros((6, 6, 3)))
    with pytest.raises(ValueError, match="whole image"):
        telea_inpaint(img, MaskImage(np.ones((6, 6), bool)), 2)
    with pytest.raises(ValueError, match="radius"):
        telea_inpaint(img, MaskImage(np.zeros((6, 6), bool)), 0)


def test_make_back_texture_plain_mirror():
    rng = np.random.default_rng(6)
    img = RgbImage(rng.uniform(0, 1, (8, 10, 3)))
    labels = LabelMap(np.zeros((8, 10), np.uint8))  # no face pixels
    out = make_back_texture(img, labels, 3)
    assert np.array_equal(out.data, img.data[:, ::-1])


def test_make_back_texture_fills_face_then_mirrors():
    h = w = 24
    img_data = np.full((h, w, 3), 0.3)  # hair color everywhere
    labels = np.ones((h, w), np.uint8)
    face = disk_mask(h, w, 12, 12, 4)
    labels[face.data] = 2
    img_data[face.data] = [0.9, 0.7, 0.6]
    out = make_back_texture(RgbImage(img_data), LabelMap(labels), 4)
    assert np.abs(out.data - 0.3).max() < 1e-12  # face became hair color
    # double mirror recovers the inpainted image
    again = RgbImage(out.data[:, ::-1])
    assert np.array_equal(again.data[:, ::-1], out.data)


def test_ply_round_trip(tmp_path):
    mesh = Mesh(
        vertices=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.25], [0.0, 1.0, 0.5]],
        colors=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        normals=[[0.0, 0.0, 1.0]] * 3,
        triangles=[[0, 1, 2]],
    )
    path = tmp_path / "m.ply"
    export_ply(mesh, path)
    loaded = import_ply(path)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.abs(loaded.vertices - mesh.vertices).max() < 1e-6  # float32 storage
    assert np.array_equal(loaded.colors[0], [1.0, 0.0, 0.0])  # 255,0,0 bytes
    header = path.read_bytes()[:40]
    assert header.startswith(b"ply\nformat binary_little_endian 1.0\n")


def test_ply_error_paths(tmp_path):
    bad = tmp_path / "bad.ply"
    bad.write_bytes(b"nope\n")
    with pytest.raises(ValueError, match="magic"):
        import_ply(bad)
    mesh = Mesh(vertices=[[0, 0, 0]], colors=[[0, 0, 0]], normals=[[0, 0, 1]],
                triangles=np.zeros((0, 3), np.int64))
    good = tmp_path / "good.ply"
    export_ply(mesh, good)
    truncated = tmp_path / "trunc.ply"
    truncated.write_bytes(good.read_bytes()[:-10])
    with pytest.raises(ValueError, match="truncated"):
        import_ply(truncated)


def test_synth_depth_profile():
    mask = disk_mask(40, 40, 19.5, 19.5, 12.0)
    front, back = synth_depth(mask, base=0.5, amplitude=0.08)
    m = mask.data
    assert np.all(front.data[m] <= back.data[m])
    assert np.all(front.data[~m] == 0.0)
    # boundary pixels stay near the base plane
    from scipy import ndimage
    dist = ndimage.distance_transform_edt(m)
    rim = m & (dist <= 1.0)
    rim_gap = (back.data - front.data)[rim]
    assert rim_gap.max() <= 2 * 0.08 * np.sqrt(1.0 / dist.max()) + 1e-9
    # the deepest pixel carries the full amplitude
    deepest = np.unravel_index(np.argmax(dist), dist.shape)
    assert abs(front.data[deepest] - (0.5 - 0.08)) < 1e-12
    assert abs(back.data[deepest] - (0.5 + 0.08)) < 1e-12
    with pytest.raises(ValueError, match="empty"):
        synth_depth(MaskImage(np.zeros((4, 4), bool)))
    with pytest.raises(ValueError, match="amplitude"):
        synth_depth(mask, amplitude=0.0)


def test_cleanup_mask():
    m = np.zeros((12, 12), dtype=bool)
    m[2:6, 2:6] = True
    m[3, 3] = False          # hole: filled
    m[9:11, 9:11] = True     # smaller separate component: dropped
    out = cleanup_mask(MaskImage(m))
    assert out.data[3, 3]
    assert not out.data[9, 9]


def test_grid_to_world_convention():
    # x spans symmetric range in units of half the image height; y points up
    x, y = grid_to_world(np.array([0, 9]), np.array([0, 9]), 10, 10)
    assert x[0] == -x[1]
    assert y[0] == -y[1]
    assert y[0] > 0  # row 0 is the top
