"""Double-depth-to-mesh reconstruction and its supporting raster machinery.

A front and a back depth map over a shared person silhouette jointly encode
a closed body: each masked pixel unprojects to one point per side under a
fixed orthographic model, and the two height-field sheets are triangulated
directly and sewn together along the silhouette with a strip of wall quads.
Direct stitching replaces a global surface-fitting step: the depth grids
already are the surface, so the mesh is deterministic, exactly aligned with
the try-on texture, and cheap to build.

World convention (the toolkit contract): units of half the image height,
x right, y up, z increasing away from the viewer, so the front sheet has
the smaller z.  Pixel (u, v) maps to

    x(u) = (2u - W + 1) / H,    y(v) = -(2v - H + 1) / H.

Meshes export to binary little-endian PLY with per-vertex position, normal,
and color.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgcore import LABEL_FACE, DepthMap, MaskImage, RgbImage

SOURCE_FRONT = 0
SOURCE_BACK = 1

#: Defaults for the synthetic depth stand-in (tuned at 512x320).
DEFAULT_SYNTH_BASE = 0.5
DEFAULT_SYNTH_AMPLITUDE = 0.08

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class PointCloud:
    """Colored 3-D points tagged by originating side (front/back)."""

    positions: np.ndarray
    colors: np.ndarray
    source: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        src = np.asarray(self.source, dtype=np.uint8).reshape(-1)
        if not (pos.shape[0] == col.shape[0] == src.shape[0]):
            raise ValueError("point cloud field lengths differ")
        if not np.all(np.isfinite(pos)):
            raise ValueError("point positions must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "source", src)

    def __len__(self):
        return self.positions.shape[0]


class Mesh:
    """Indexed triangle mesh with per-vertex position, color, and unit normal."""

    def __init__(self, vertices, colors, normals, triangles):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        n = self.vertices.shape[0]
        if self.colors.shape[0] != n or self.normals.shape[0] != n:
            raise ValueError("per-vertex attribute lengths differ")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= n
        ):
            raise ValueError("triangle indices out of range")

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def __repr__(self):
        return f"Mesh({self.num_vertices} vertices, {self.num_triangles} triangles)"


def grid_to_world(us, vs, width, height):
    """Orthographic pixel-to-world map (isotropic, y-up, unit = height/2)."""
    x = (2.0 * np.asarray(us, dtype=np.float64) - width + 1.0) / height
    y = -(2.0 * np.asarray(vs, dtype=np.float64) - height + 1.0) / height
    return x, y


def world_to_grid(x, y, width, height):
    """Inverse of grid_to_world."""
    u = (np.asarray(x) * height + width - 1.0) / 2.0
    v = (height - 1.0 - np.asarray(y) * height) / 2.0
    return u, v


def unproject(front_depth, back_depth, mask, front_tex, back_tex):
    """Lift masked pixels of a double-depth pair into a colored point cloud.

    Each masked pixel yields a front point (colored from front_tex) and a
    back point (colored from back_tex); the result holds front points first,
    then back points, both in row-major pixel order.  Pixels where the front
    depth exceeds the back depth are counted and reported via a warning.
    """
    shape = mask.data.shape
    for name, obj in (("front depth", front_depth), ("back depth", back_depth),
                      ("front texture", front_tex), ("back texture", back_tex)):
        if obj.data.shape[:2] != shape:
            raise ValueError(f"unproject: {name} dims {obj.data.shape[:2]} != mask {shape}")
    vs, us = np.nonzero(mask.data)
    if us.size == 0:
        raise ValueError("unproject: empty mask")
    h, w = shape
    crossed = int((front_depth.data[vs, us] > back_depth.data[vs, us]).sum())
    if crossed:
        warnings.warn(f"unproject: {crossed} pixels have front depth behind back depth")
    x, y = grid_to_world(us, vs, w, h)
    front = np.column_stack([x, y, front_depth.data[vs, us]])
    back = np.column_stack([x, y, back_depth.data[vs, us]])
    return PointCloud(
        positions=np.vstack([front, back]),
        colors=np.vstack([front_tex.data[vs, us], back_tex.data[vs, us]]),
        source=np.concatenate([
            np.full(us.size, SOURCE_FRONT, dtype=np.uint8),
            np.full(us.size, SOURCE_BACK, dtype=np.uint8),
        ]),
    )


def cleanup_mask(mask):
    """Fill holes and keep the largest 4-connected component."""
    filled = ndimage.binary_fill_holes(mask.data)
    labels, count = ndimage.label(filled, structure=_FOUR_CONN)
    if count == 0:
        return MaskImage(filled)
    sizes = ndimage.sum_labels(filled, labels, index=np.arange(1, count + 1))
    keep = int(np.argmax(sizes)) + 1  # ties resolve to the first label, row-major
    return MaskImage(labels == keep)


def _cell_grid(mask_data):
    """Cells (2x2 pixel quads) whose four corners are all masked."""
    return (
        mask_data[:-1, :-1]
        & mask_data[:-1, 1:]
        & mask_data[1:, :-1]
        & mask_data[1:, 1:]
    )


def _remove_diagonal_pinches(cells):
    """Drop cells until no two cells touch only at a corner.

    A pair of diagonally adjacent cells with both off-diagonal cells absent
    would pinch the sheet boundary at one vertex, which breaks the
    two-triangles-per-edge guarantee of the final mesh; removing the upper
    cell of each offending pair (iterated to a fixed point) restores a
    manifold boundary.
    """
    cells = cells.copy()
    while True:
        main = cells[:-1, :-1] & cells[1:, 1:] & ~cells[:-1, 1:] & ~cells[1:, :-1]
        anti = cells[:-1, 1:] & cells[1:, :-1] & ~cells[:-1, :-1] & ~cells[1:, 1:]
        if not (main.any() or anti.any()):
            return cells
        remove = np.zeros_like(cells)
        remove[:-1, :-1] |= main
        remove[:-1, 1:] |= anti
        cells &= ~remove


def _largest_cell_component(cells):
    labels, count = ndimage.label(cells, structure=_FOUR_CONN)
    if count <= 1:
        return cells
    sizes = ndimage.sum_labels(cells, labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def _boundary_cycles(cells, vid):
    """Closed directed cycles of sheet-boundary vertices, interior on the right.

    Each cell contributes its four directed rim edges (clockwise in pixel
    coords); edges shared by two cells cancel, and what survives is chained
    into cycles.  After pinch removal every boundary vertex has exactly one
    outgoing edge, so the chaining is unambiguous.
    """
    cv, cu = np.nonzero(cells)
    a = vid[cv, cu]
    b = vid[cv, cu + 1]
    c = vid[cv + 1, cu]
    d = vid[cv + 1, cu + 1]
    starts = np.concatenate([a, b, d, c])
    ends = np.concatenate([b, d, c, a])
    nv = int(vid.max()) + 1
    codes = starts * nv + ends
    reverse = ends * nv + starts
    boundary = ~np.isin(codes, reverse)
    succ = {}
    for s, e in zip(starts[boundary].tolist(), ends[boundary].tolist()):
        if s in succ:
            raise RuntimeError("boundary pinch survived cleanup")
        succ[s] = e
    cycles = []
    remaining = dict(succ)
    while remaining:
        start = min(remaining)  # deterministic cycle order
        cycle = [start]
        nxt = remaining.pop(start)
        while nxt != start:
            cycle.append(nxt)
            nxt = remaining.pop(nxt)
        cycles.append(cycle)
    return cycles


def stitch_mesh(front_depth, back_depth, mask, front_tex, back_tex):
    """Triangulate a double-depth pair into a single watertight colored mesh.

    The mask is cleaned first (hole fill, largest component, pinch removal),
    then the front sheet is triangulated over every 2x2 masked quad with the
    diagonal split toward the lower-right, the back sheet mirrors it with
    reversed winding, and the silhouette is closed by a wall-quad strip along
    each boundary cycle.  Every edge of the result borders exactly two
    triangles.

    Mask features narrower than one quad (single-pixel tips or one-pixel
    lines) cannot carry geometry in a quad triangulation and are dropped by
    the cleanup; the mesh covers the largest quad-representable core of the
    silhouette.
    """
    shape = mask.data.shape
    for name, obj in (("front depth", front_depth), ("back depth", back_depth),
                      ("front texture", front_tex), ("back texture", back_tex)):
        if obj.data.shape[:2] != shape:
            raise ValueError(f"stitch_mesh: {name} dims {obj.data.shape[:2]} != mask {shape}")
    if not mask.data.any():
        raise ValueError("stitch_mesh: empty mask")
    cleaned = cleanup_mask(mask)
    cells = _cell_grid(cleaned.data)
    cells = _remove_diagonal_pinches(cells)
    cells = _largest_cell_component(cells)
    if not cells.any():
        raise ValueError("stitch_mesh: mask degenerates to a line (no interior)")

    h, w = shape
    used = np.zeros(shape, dtype=bool)
    used[:-1, :-1] |= cells
    used[:-1, 1:] |= cells
    used[1:, :-1] |= cells
    used[1:, 1:] |= cells
    vs, us = np.nonzero(used)
    nv = us.size
    vid = np.full(shape, -1, dtype=np.int64)
    vid[vs, us] = np.arange(nv)

    x, y = grid_to_world(us, vs, w, h)
    front_pos = np.column_stack([x, y, front_depth.data[vs, us]])
    back_pos = np.column_stack([x, y, back_depth.data[vs, us]])
    vertices = np.vstack([front_pos, back_pos])
    colors = np.vstack([front_tex.data[vs, us], back_tex.data[vs, us]])

    cv, cu = np.nonzero(cells)
    a = vid[cv, cu]
    b = vid[cv, cu + 1]
    c = vid[cv + 1, cu]
    d = vid[cv + 1, cu + 1]
    front_tris = np.concatenate([
        np.column_stack([a, b, d]),
        np.column_stack([a, d, c]),
    ])
    back_tris = np.concatenate([
        np.column_stack([a, d, b]),
        np.column_stack([a, c, d]),
    ]) + nv

    wall_tris = []
    for cycle in _boundary_cycles(cells, vid):
        p = np.array(cycle, dtype=np.int64)
        q = np.roll(p, -1)
        wall_tris.append(np.column_stack([q, p, p + nv]))
        wall_tris.append(np.column_stack([q, p + nv, q + nv]))
    triangles = np.vstack([front_tris, back_tris] + wall_tris)

    normals = _vertex_normals(vertices, triangles)
    return Mesh(vertices=vertices, colors=colors, normals=normals, triangles=triangles)


def _vertex_normals(vertices, triangles):
    """Area-weighted average of incident triangle normals, normalized."""
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    face_n = np.cross(v1 - v0, v2 - v0)  # length = 2x area
    acc = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(acc, triangles[:, k], face_n)
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.where(norm > 0, norm, 1.0)


def edge_face_counts(mesh):
    """Map from undirected edge to the number of triangles using it."""
    counts = {}
    for tri in mesh.triangles:
        i, j, k = int(tri[0]), int(tri[1]), int(tri[2])
        for e in ((i, j), (j, k), (k, i)):
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(mesh):
    """True when every edge borders exactly two triangles."""
    counts = edge_face_counts(mesh)
    return bool(counts) and all(c == 2 for c in counts.values())


def euler_characteristic(mesh):
    """V - E + F (2 for a topological sphere)."""
    e = len(edge_face_counts(mesh))
    return mesh.num_vertices - e + mesh.num_triangles


# ---------------------------------------------------------------------------
# Fast-marching inpainting
# ---------------------------------------------------------------------------

def telea_inpaint(image, region, radius):
    """Fill a masked region by fast-marching weighted averages.

    Unknown pixels are visited in ascending distance to the known area (ties
    broken row-major); each becomes the weighted average of already-known
    pixels within ``radius``, weighted by inverse squared distance and by
    closeness in the distance field (the directional term of the classical
    scheme is omitted).  Pixels outside the region are untouched bit-exact,
    and filled values stay inside the per-channel hull of their sources.
    """
    if radius < 1:
        raise ValueError("telea_inpaint: radius must be >= 1")
    if image.data.shape[:2] != region.data.shape:
        raise ValueError(
            f"telea_inpaint: image dims {image.data.shape[:2]} != region {region.data.shape}"
        )
    if not region.data.any():
        return RgbImage(image.data)
    if region.data.all():
        raise ValueError("telea_inpaint: region covers the whole image")

    h, w = region.data.shape
    dist, nearest = ndimage.distance_transform_edt(
        region.data, return_indices=True, return_distances=True
    )
    vs, us = np.nonzero(region.data)
    order = np.lexsort((us, vs, dist[vs, us]))
    vs, us = vs[order], us[order]

    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    inside = (dy * dy + dx * dx <= radius * radius) & ((dy != 0) | (dx != 0))
    dy, dx = dy[inside], dx[inside]
    inv_d2 = 1.0 / (dy.astype(np.float64) ** 2 + dx.astype(np.float64) ** 2)
    window = dy * w + dx  # flat-index offsets

    out = image.data.copy()
    flat_rgb = out.reshape(-1, 3)
    known = (~region.data).ravel().copy()
    flat_dist = dist.ravel()
    nearest_flat = (nearest[0] * w + nearest[1]).ravel()
    interior = (radius <= vs) & (vs < h - radius) & (radius <= us) & (us < w - radius)
    centers = (vs * w + us).tolist()
    for p, fast in zip(centers, interior.tolist()):
        if fast:
            idx = p + window
            wgt = inv_d2
        else:
            v, u = divmod(p, w)
            ys = v + dy
            xs = u + dx
            ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
            idx = ys[ok] * w + xs[ok]
            wgt = inv_d2[ok]
        have = known[idx]
        if not have.any():
            # no known pixel in reach yet: copy the nearest originally-known pixel
            flat_rgb[p] = flat_rgb[nearest_flat[p]]
            known[p] = True
            continue
        idx = idx[have]
        wq = wgt[have] / (1.0 + np.abs(flat_dist[p] - flat_dist[idx]))
        flat_rgb[p] = wq @ flat_rgb[idx] / wq.sum()
        known[p] = True
    return RgbImage(np.clip(out, 0.0, 1.0))


def make_back_texture(tryon, labels, radius):
    """Back-side texture: inpaint the face from its surroundings, then mirror.

    Filling the face region first lets the hair color bleed across it, so the
    mirrored image reads as the back of the head rather than a second face.
    """
    if tryon.data.shape[:2] != labels.data.shape:
        raise ValueError(
            f"make_back_texture: image dims {tryon.data.shape[:2]} != labels {labels.data.shape}"
        )
    face = MaskImage(labels.data == LABEL_FACE)
    filled = telea_inpaint(tryon, face, radius) if face.data.any() else tryon
    return RgbImage(filled.data[:, ::-1])


# ---------------------------------------------------------------------------
# Depth rendering and synthetic depth
# ---------------------------------------------------------------------------

def render_depth(mesh, width, height, side="front"):
    """Orthographic depth rasterization under the unprojection model.

    ``side='front'`` keeps the minimum z per pixel, ``'back'`` the maximum;
    uncovered pixels are 0.  Triangles that project to (near) zero pixel
    area -- the silhouette walls -- are skipped.
    """
    if side not in ("front", "back"):
        raise ValueError(f"render_depth: side must be 'front' or 'back', got {side!r}")
    buf = np.full((height, width), np.inf if side == "front" else -np.inf)
    if mesh.num_triangles:
        u, v = world_to_grid(mesh.vertices[:, 0], mesh.vertices[:, 1], width, height)
        z = mesh.vertices[:, 2]
        tol = 1e-9
        for tri in mesh.triangles:
            i, j, k = tri
            ua, va, za = u[i], v[i], z[i]
            ub, vb, zb = u[j], v[j], z[j]
            uc, vc, zc = u[k], v[k], z[k]
            area = (ub - ua) * (vc - va) - (uc - ua) * (vb - va)
            if abs(area) < 1e-12:
                continue
            u0 = max(int(np.ceil(min(ua, ub, uc) - tol)), 0)
            u1 = min(int(np.floor(max(ua, ub, uc) + tol)), width - 1)
            v0 = max(int(np.ceil(min(va, vb, vc) - tol)), 0)
            v1 = min(int(np.floor(max(va, vb, vc) + tol)), height - 1)
            if u0 > u1 or v0 > v1:
                continue
            gu, gv = np.meshgrid(
                np.arange(u0, u1 + 1, dtype=np.float64),
                np.arange(v0, v1 + 1, dtype=np.float64),
            )
            la = ((ub - gu) * (vc - gv) - (uc - gu) * (vb - gv)) / area
            lb = ((uc - gu) * (va - gv) - (ua - gu) * (vc - gv)) / area
            lc = 1.0 - la - lb
            hit = (la >= -tol) & (lb >= -tol) & (lc >= -tol)
            if not hit.any():
                continue
            depth = la * za + lb * zb + lc * zc
            sub = buf[v0:v1 + 1, u0:u1 + 1]
            if side == "front":
                np.minimum(sub, np.where(hit, depth, np.inf), out=sub)
            else:
                np.maximum(sub, np.where(hit, depth, -np.inf), out=sub)
    buf[~np.isfinite(buf)] = 0.0
    return DepthMap(buf)


def synth_depth(mask, base=DEFAULT_SYNTH_BASE, amplitude=DEFAULT_SYNTH_AMPLITUDE):
    """Inflate a silhouette into a plausible double-depth pair.

    The inflation profile is amplitude * sqrt(d / d_max) of the Euclidean
    distance d to the mask boundary: zero (so front meets back) at the
    silhouette, the full amplitude at the deepest interior pixel.  Returns
    (front, back) with front = base - inflation and back = base + inflation;
    pixels outside the mask hold the sentinel 0.
    """
    if amplitude <= 0:
        raise ValueError("synth_depth: amplitude must be > 0")
    if not mask.data.any():
        raise ValueError("synth_depth: empty mask")
    dist = ndimage.distance_transform_edt(mask.data)
    inflation = amplitude * np.sqrt(np.clip(dist / dist.max(), 0.0, 1.0))
    front = np.where(mask.data, base - inflation, 0.0)
    back = np.where(mask.data, base + inflation, 0.0)
    return DepthMap(front), DepthMap(back)


# ---------------------------------------------------------------------------
# PLY I/O
# ---------------------------------------------------------------------------

_PLY_VERTEX_DTYPE = np.dtype([
    ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
    ("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4"),
    ("red", "u1"), ("green", "u1"), ("blue", "u1"),
])
_PLY_FACE_DTYPE = np.dtype([("count", "u1"), ("idx", "<u4", (3,))])

_PLY_HEADER_PROPS = [
    "property float x", "property float y", "property float z",
    "property float nx", "property float ny", "property float nz",
    "property uchar red", "property uchar green", "property uchar blue",
]


def export_ply(mesh, path):
    """Write a mesh as binary little-endian PLY (positions, normals, colors)."""
    verts = np.empty(mesh.num_vertices, dtype=_PLY_VERTEX_DTYPE)
    v32 = mesh.vertices.astype("<f4")
    n32 = mesh.normals.astype("<f4")
    rgb = np.rint(np.clip(mesh.colors, 0.0, 1.0) * 255.0).astype(np.uint8)
    for axis, name in enumerate(("x", "y", "z")):
        verts[name] = v32[:, axis]
    for axis, name in enumerate(("nx", "ny", "nz")):
        verts[name] = n32[:, axis]
    for axis, name in enumerate(("red", "green", "blue")):
        verts[name] = rgb[:, axis]
    faces = np.empty(mesh.num_triangles, dtype=_PLY_FACE_DTYPE)
    faces["count"] = 3
    faces["idx"] = mesh.triangles.astype("<u4")
    header = "\n".join(
        ["ply", "format binary_little_endian 1.0",
         f"element vertex {mesh.num_vertices}"]
        + _PLY_HEADER_PROPS
        + [f"element face {mesh.num_triangles}",
           "property list uchar uint vertex_indices",
           "end_header", ""]
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(verts.tobytes())
        fh.write(faces.tobytes())


def import_ply(path):
    """Read a PLY file written by export_ply; topology round trips exactly."""
    with open(path, "rb") as fh:
        line = fh.readline().strip()
        if line != b"ply":
            raise ValueError(f"malformed PLY (bad magic) in {path}")
        if fh.readline().strip() != b"format binary_little_endian 1.0":
            raise ValueError(f"unsupported PLY format in {path}")
        n_vertex = n_face = None
        props = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"truncated PLY header in {path}")
            text = line.decode("ascii", "replace").strip()
            if text == "end_header":
                break
            if text.startswith("comment"):
                continue
            if text.startswith("element vertex "):
                n_vertex = int(text.split()[-1])
            elif text.startswith("element face "):
                n_face = int(text.split()[-1])
            elif text.startswith("property"):
                props.append(text)
        if n_vertex is None or n_face is None:
            raise ValueError(f"PLY header missing element counts in {path}")
        expected = _PLY_HEADER_PROPS + ["property list uchar uint vertex_indices"]
        if props != expected:
            raise ValueError(f"unsupported PLY property layout in {path}")
        vert_bytes = fh.read(n_vertex * _PLY_VERTEX_DTYPE.itemsize)
        face_bytes = fh.read(n_face * _PLY_FACE_DTYPE.itemsize)
    if len(vert_bytes) != n_vertex * _PLY_VERTEX_DTYPE.itemsize:
        raise ValueError(f"truncated PLY vertex payload in {path}")
    if len(face_bytes) != n_face * _PLY_FACE_DTYPE.itemsize:
        raise ValueError(f"truncated PLY face payload in {path}")
    verts = np.frombuffer(vert_bytes, dtype=_PLY_VERTEX_DTYPE)
    faces = np.frombuffer(face_bytes, dtype=_PLY_FACE_DTYPE)
    if faces.size and not np.all(faces["count"] == 3):
        raise ValueError(f"non-triangular face in {path}")
    vertices = np.column_stack([verts["x"], verts["y"], verts["z"]]).astype(np.float64)
    normals = np.column_stack([verts["nx"], verts["ny"], verts["nz"]]).astype(np.float64)
    colors = np.column_stack([verts["red"], verts["green"], verts["blue"]]) / 255.0
    return Mesh(vertices=vertices, colors=colors, normals=normals,
                triangles=faces["idx"].astype(np.int64))
