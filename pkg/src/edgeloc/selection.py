"""Landmark selection: frustum culling, occlusion via a software depth
buffer, and sparse edge-point sampling in the prior camera frame.

Occluders are wireframe interiors (filled planar polygons) and pole
cylinders (approximated by the quad spanned by their two silhouette
lines). Plain line segments do not occlude. Depth is interpolated
perspective-correct (affine in 1/z), which is exact for planar polygons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compact_map import CompactMap, LineSegmentLandmark, WireframeLandmark
from .config import PipelineConfig
from .geometry import CameraIntrinsics, Pose, project_points

# Near clip for selection and rendering; nothing useful projects closer.
NEAR_CLIP_M = 0.05

# Samples this far behind a nearby occluder silhouette are discarded: a
# small prior error shifts thin occluders across them, so they may well be
# invisible in the live image even though the prior says otherwise.
_OCCLUSION_MARGIN_GAP_M = 2.0


@dataclass(frozen=True, eq=False)
class LandmarkSamples:
    """Visible 3D edge samples grouped by label, in the prior camera frame."""

    points_by_label: dict[str, np.ndarray]  # label -> (N, 3) float64
    source_ids_by_label: dict[str, np.ndarray]  # label -> (N,) int

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.points_by_label.keys())

    def total_count(self) -> int:
        return sum(pts.shape[0] for pts in self.points_by_label.values())

    def landmark_ids(self) -> set[int]:
        out: set[int] = set()
        for ids in self.source_ids_by_label.values():
            out.update(int(i) for i in ids)
        return out


class DepthBuffer:
    """Per-pixel minimum depth (meters), initialized to +inf."""

    def __init__(self, width: int, height: int):
        self.values = np.full((height, width), np.inf)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def visible(self, uv: np.ndarray, depth: np.ndarray, tolerance: float) -> np.ndarray:
        """True where depth <= buffered depth at the nearest pixel + tolerance."""
        height, width = self.values.shape
        iu = np.clip(np.rint(uv[:, 0]).astype(int), 0, width - 1)
        iv = np.clip(np.rint(uv[:, 1]).astype(int), 0, height - 1)
        return depth <= self.values[iv, iu] + tolerance


def _view_planes(intrinsics: CameraIntrinsics, near: float, far: float) -> list[tuple[np.ndarray, float]]:
    """Half-spaces n.p + d >= 0 bounding the visible frustum (camera frame)."""
    k = intrinsics
    return [
        (np.array([0.0, 0.0, 1.0]), -near),
        (np.array([0.0, 0.0, -1.0]), far),
        (np.array([k.fx, 0.0, k.cx]), 0.0),
        (np.array([-k.fx, 0.0, k.width - 1 - k.cx]), 0.0),
        (np.array([0.0, k.fy, k.cy]), 0.0),
        (np.array([0.0, -k.fy, k.height - 1 - k.cy]), 0.0),
    ]


def clip_segment_to_view(
    p0: np.ndarray,
    p1: np.ndarray,
    intrinsics: CameraIntrinsics,
    near: float = NEAR_CLIP_M,
    far: float = math.inf,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Clip a camera-frame segment against the view frustum; None if outside."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t0, t1 = 0.0, 1.0
    for normal, offset in _view_planes(intrinsics, near, far):
        c0 = float(normal @ p0 + offset)
        c1 = float(normal @ p1 + offset)
        if c0 < 0.0 and c1 < 0.0:
            return None
        if c0 < 0.0:
            t0 = max(t0, c0 / (c0 - c1))
        elif c1 < 0.0:
            t1 = min(t1, c0 / (c0 - c1))
    if t0 >= t1:
        return None
    direction = p1 - p0
    return p0 + t0 * direction, p0 + t1 * direction


def _clip_polygon_near(points: np.ndarray, near: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a camera-frame polygon against z >= near."""
    out = []
    n = points.shape[0]
    for i in range(n):
        current = points[i]
        following = points[(i + 1) % n]
        c_in = current[2] >= near
        f_in = following[2] >= near
        if c_in:
            out.append(current)
        if c_in != f_in:
            t = (near - current[2]) / (following[2] - current[2])
            out.append(current + t * (following - current))
    return np.array(out) if out else np.empty((0, 3))


def _rasterize_triangle(values: np.ndarray, triangle: np.ndarray, intrinsics: CameraIntrinsics) -> None:
    """Min-depth fill of one camera-frame triangle (already near-clipped)."""
    height, width = values.shape
    uv, valid = project_points(triangle, intrinsics)
    if not valid.all():
        return
    inv_z = 1.0 / triangle[:, 2]
    a, b, c = uv
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area2 < 0.0:
        b, c = c, b
        inv_z = inv_z[[0, 2, 1]]
        area2 = -area2
    if area2 < 1e-12:
        return
    u_lo = max(0, int(math.ceil(min(a[0], b[0], c[0]) - 1e-9)))
    u_hi = min(width - 1, int(math.floor(max(a[0], b[0], c[0]) + 1e-9)))
    v_lo = max(0, int(math.ceil(min(a[1], b[1], c[1]) - 1e-9)))
    v_hi = min(height - 1, int(math.floor(max(a[1], b[1], c[1]) + 1e-9)))
    if u_lo > u_hi or v_lo > v_hi:
        return
    uu, vv = np.meshgrid(np.arange(u_lo, u_hi + 1), np.arange(v_lo, v_hi + 1))
    wa = (c[0] - b[0]) * (vv - b[1]) - (c[1] - b[1]) * (uu - b[0])
    wb = (a[0] - c[0]) * (vv - c[1]) - (a[1] - c[1]) * (uu - c[0])
    wc = (b[0] - a[0]) * (vv - a[1]) - (b[1] - a[1]) * (uu - a[0])
    eps = 1e-9 * (area2 + 1.0)
    inside = (wa >= -eps) & (wb >= -eps) & (wc >= -eps)
    if not inside.any():
        return
    interp_inv_z = (wa * inv_z[0] + wb * inv_z[1] + wc * inv_z[2]) / area2
    depth = np.where(interp_inv_z > 1e-12, 1.0 / np.maximum(interp_inv_z, 1e-12), np.inf)
    patch = values[v_lo:v_hi + 1, u_lo:u_hi + 1]
    np.minimum(patch, np.where(inside, depth, np.inf), out=patch)


def rasterize_polygon(buffer: DepthBuffer, polygon: np.ndarray, intrinsics: CameraIntrinsics) -> None:
    """Fan-triangulate a camera-frame polygon and rasterize it near-clipped."""
    clipped = _clip_polygon_near(np.asarray(polygon, dtype=float), NEAR_CLIP_M)
    if clipped.shape[0] < 3:
        return
    for i in range(1, clipped.shape[0] - 1):
        _rasterize_triangle(buffer.values, clipped[[0, i, i + 1]], intrinsics)


def pole_silhouette(q0: np.ndarray, q1: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Silhouette edges of a cylinder around segment q0->q1 (camera frame).

    Returns (left, right), each a (2, 3) segment offset by the radius
    perpendicular to both the axis and the viewing ray.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    axis = q1 - q0
    offsets = []
    for endpoint in (q0, q1):
        side = np.cross(axis, endpoint)
        norm = np.linalg.norm(side)
        if norm < 1e-9:
            # Axis through the camera ray; pick any perpendicular.
            helper = np.array([1.0, 0.0, 0.0])
            if abs(axis[0]) > abs(axis[1]):
                helper = np.array([0.0, 1.0, 0.0])
            side = np.cross(axis, helper)
            norm = np.linalg.norm(side)
        offsets.append(side / norm)
    left = np.array([q0 - radius * offsets[0], q1 - radius * offsets[1]])
    right = np.array([q0 + radius * offsets[0], q1 + radius * offsets[1]])
    return left, right


def _min_filter(values: np.ndarray, radius: int) -> np.ndarray:
    """Separable sliding-minimum over a (2r+1) square window."""
    out = values
    for axis in (0, 1):
        acc = out.copy()
        for shift in range(1, radius + 1):
            for sign in (1, -1):
                rolled = np.roll(out, sign * shift, axis=axis)
                if axis == 0:
                    if sign > 0:
                        rolled[:shift, :] = np.inf
                    else:
                        rolled[-shift:, :] = np.inf
                else:
                    if sign > 0:
                        rolled[:, :shift] = np.inf
                    else:
                        rolled[:, -shift:] = np.inf
                np.minimum(acc, rolled, out=acc)
        out = acc
    return out


def silhouette_margin_depth(buffer: DepthBuffer, margin_px: int) -> np.ndarray:
    """Min occluder depth at silhouette discontinuities within margin_px.

    A pixel is a silhouette pixel when a 4-neighbor is much deeper (or
    empty); smooth surfaces like a road seen at grazing angles do not
    qualify. Pixels away from every silhouette hold +inf.
    """
    depth = buffer.values
    silhouette = np.zeros(depth.shape, dtype=bool)
    finite = np.isfinite(depth)
    threshold = depth * 1.5 + 1.0
    for axis, sign in ((0, 1), (0, -1), (1, 1), (1, -1)):
        neighbor = np.roll(depth, sign, axis=axis)
        if axis == 0:
            if sign > 0:
                neighbor[0, :] = np.inf
            else:
                neighbor[-1, :] = np.inf
        else:
            if sign > 0:
                neighbor[:, 0] = np.inf
            else:
                neighbor[:, -1] = np.inf
        silhouette |= finite & (neighbor > threshold)
    seeded = np.where(silhouette, depth, np.inf)
    return _min_filter(seeded, margin_px)


def _pole_radius(landmark: LineSegmentLandmark, config: PipelineConfig) -> float:
    if landmark.pole_radius is not None:
        return landmark.pole_radius
    return config.default_pole_radius_m


def rasterize_occluders(
    landmarks,
    prior: Pose,
    intrinsics: CameraIntrinsics,
    config: PipelineConfig | None = None,
) -> DepthBuffer:
    """Depth-buffer wireframe interiors and pole cylinders seen from the prior."""
    config = config or PipelineConfig()
    buffer = DepthBuffer(intrinsics.width, intrinsics.height)
    to_camera = prior.inverse()
    for landmark in landmarks:
        if isinstance(landmark, WireframeLandmark):
            rasterize_polygon(buffer, to_camera.apply(landmark.points), intrinsics)
        elif isinstance(landmark, LineSegmentLandmark) and landmark.is_pole:
            q0 = to_camera.apply(landmark.p0)
            q1 = to_camera.apply(landmark.p1)
            left, right = pole_silhouette(q0, q1, _pole_radius(landmark, config))
            quad = np.array([left[0], left[1], right[1], right[0]])
            rasterize_polygon(buffer, quad, intrinsics)
    return buffer


def _edge_segments(landmark, to_camera: Pose, config: PipelineConfig):
    """Camera-frame edge segments whose visible parts get sampled."""
    if isinstance(landmark, WireframeLandmark):
        points = to_camera.apply(landmark.points)
        n = points.shape[0]
        return [(points[i], points[(i + 1) % n]) for i in range(n)]
    q0 = to_camera.apply(landmark.p0)
    q1 = to_camera.apply(landmark.p1)
    if landmark.is_pole:
        left, right = pole_silhouette(q0, q1, _pole_radius(landmark, config))
        return [(left[0], left[1]), (right[0], right[1])]
    return [(q0, q1)]


def sample_landmark_edges(
    landmark,
    prior: Pose,
    intrinsics: CameraIntrinsics,
    spacing: float | None = None,
    config: PipelineConfig | None = None,
) -> np.ndarray:
    """Sample a landmark's visible edges at <= ``spacing`` px intervals.

    Returns (N, 3) points in the prior camera frame; sampling is uniform in
    image space (perspective-correct along each 3D edge), endpoints included.
    """
    config = config or PipelineConfig()
    if spacing is None:
        spacing = config.sample_spacing_px
    to_camera = prior.inverse()
    chunks = []
    for q0, q1 in _edge_segments(landmark, to_camera, config):
        clipped = clip_segment_to_view(q0, q1, intrinsics, NEAR_CLIP_M, config.max_selection_range_m)
        if clipped is None:
            continue
        qa, qb = clipped
        uv, _ = project_points(np.array([qa, qb]), intrinsics)
        length_px = float(np.hypot(*(uv[1] - uv[0])))
        n_intervals = max(1, int(math.ceil(length_px / spacing)))
        s = np.linspace(0.0, 1.0, n_intervals + 1)
        za, zb = qa[2], qb[2]
        t = s * za / ((1.0 - s) * zb + s * za)
        chunks.append(qa + t[:, None] * (qb - qa))
    if not chunks:
        return np.empty((0, 3))
    return np.vstack(chunks)


def select_landmarks(
    compact_map: CompactMap,
    prior: Pose,
    intrinsics: CameraIntrinsics,
    config: PipelineConfig | None = None,
) -> LandmarkSamples:
    """Full selection pipeline: cull, depth-buffer occluders, sample, z-test."""
    config = config or PipelineConfig()
    buffer = rasterize_occluders(compact_map.landmarks, prior, intrinsics, config)
    margin_depth = None
    if config.occlusion_margin_px > 0:
        margin_depth = silhouette_margin_depth(buffer, config.occlusion_margin_px)
    points_by_label: dict[str, list[np.ndarray]] = {name: [] for name in compact_map.label_names}
    ids_by_label: dict[str, list[np.ndarray]] = {name: [] for name in compact_map.label_names}
    for landmark in compact_map.landmarks:
        points = sample_landmark_edges(landmark, prior, intrinsics, config=config)
        if points.shape[0] == 0:
            continue
        uv, _ = project_points(points, intrinsics)
        keep = buffer.visible(uv, points[:, 2], config.depth_tolerance_m)
        if margin_depth is not None:
            height, width = buffer.shape
            iu = np.clip(np.rint(uv[:, 0]).astype(int), 0, width - 1)
            iv = np.clip(np.rint(uv[:, 1]).astype(int), 0, height - 1)
            keep &= points[:, 2] <= margin_depth[iv, iu] + _OCCLUSION_MARGIN_GAP_M
        if not keep.any():
            continue
        kept = points[keep]
        points_by_label[landmark.label.name].append(kept)
        ids_by_label[landmark.label.name].append(np.full(kept.shape[0], landmark.landmark_id, dtype=int))
    final_points = {}
    final_ids = {}
    for name in compact_map.label_names:
        if points_by_label[name]:
            final_points[name] = np.vstack(points_by_label[name])
            final_ids[name] = np.concatenate(ids_by_label[name])
    return LandmarkSamples(final_points, final_ids)
