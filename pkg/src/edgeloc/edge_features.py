"""Per-label semantic edge masks and their truncated Euclidean distance fields.

The distance transform is computed exactly as two 1-D passes over squared
distances: a vertical nearest-edge sweep per column, then a horizontal
min-plus reduction with the quadratic kernel. All intermediate values are
integers held in float64, so the squared distances are exact (0 ULP) and
the result equals a brute-force nearest-edge-pixel search.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DEFAULT_TRUNCATION_PX = 20.0
DEFAULT_BOUNDARY_MARGIN_PX = 2


class OutOfBoundsPixel(ValueError):
    """Sample location outside the field's valid interpolation domain."""


class DimensionMismatch(ValueError):
    """Input rasters do not share the same shape."""


@dataclass(frozen=True, eq=False)
class SemanticEdgeMask:
    """Binary edge raster for one semantic label."""

    label: str
    pixels: np.ndarray  # (H, W) bool
    frame_id: int | None = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels).astype(bool)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)


@dataclass(frozen=True, eq=False)
class SemanticEdgeField:
    """Truncated distance field V plus its image gradients G_u, G_v."""

    label: str
    distance: np.ndarray  # (H, W) float64, pixels
    grad_u: np.ndarray | None = None
    grad_v: np.ndarray | None = None
    d_max: float = DEFAULT_TRUNCATION_PX

    @property
    def shape(self) -> tuple[int, int]:
        return self.distance.shape


def squared_edge_distance(pixels: np.ndarray, window: int | None = None) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest edge pixel.

    ``window`` bounds the horizontal search radius; pass None for the full
    untruncated transform. Values are exact integers (in float64); empty
    masks yield +inf everywhere. Leading batch dimensions are allowed; the
    last two axes are (height, width).
    """
    mask = np.asarray(pixels).astype(bool)
    if mask.ndim < 2:
        raise ValueError("mask must have at least 2 dimensions")
    height, width = mask.shape[-2:]

    # Pass 1: per-column 1-D distance to the nearest edge row.
    col_dist = np.where(mask, 0.0, np.inf)
    for row in range(1, height):
        np.minimum(col_dist[..., row, :], col_dist[..., row - 1, :] + 1.0, out=col_dist[..., row, :])
    for row in range(height - 2, -1, -1):
        np.minimum(col_dist[..., row, :], col_dist[..., row + 1, :] + 1.0, out=col_dist[..., row, :])
    col_sq = np.square(col_dist)

    # Pass 2: horizontal min-plus with the quadratic kernel. A candidate
    # column offset s can only win within |s| <= window, since it already
    # costs s^2.
    if window is None:
        window = width - 1
    window = min(int(window), width - 1)
    dist_sq = col_sq.copy()
    for shift in range(1, window + 1):
        cost = float(shift * shift)
        np.minimum(dist_sq[..., shift:], col_sq[..., :-shift] + cost, out=dist_sq[..., shift:])
        np.minimum(dist_sq[..., :-shift], col_sq[..., shift:] + cost, out=dist_sq[..., :-shift])
    return dist_sq


def distance_transform(mask: SemanticEdgeMask, d_max: float = DEFAULT_TRUNCATION_PX) -> SemanticEdgeField:
    """Truncated Euclidean distance field of an edge mask.

    V(x) = min(d_max, distance to nearest edge pixel); an all-empty mask
    yields V == d_max everywhere. Gradients are left unset; see gradients().
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    window = int(np.ceil(d_max))
    dist_sq = squared_edge_distance(mask.pixels, window=window)
    distance = np.minimum(np.sqrt(dist_sq), float(d_max))
    distance.setflags(write=False)
    return SemanticEdgeField(label=mask.label, distance=distance, d_max=float(d_max))


def gradients(field: SemanticEdgeField) -> SemanticEdgeField:
    """Populate G_u, G_v: central differences inside, one-sided at borders."""
    height, width = field.distance.shape
    grad_v = np.gradient(field.distance, axis=0) if height > 1 else np.zeros_like(field.distance)
    grad_u = np.gradient(field.distance, axis=1) if width > 1 else np.zeros_like(field.distance)
    grad_u.setflags(write=False)
    grad_v.setflags(write=False)
    return replace(field, grad_u=grad_u, grad_v=grad_v)


def build_field(mask: SemanticEdgeMask, d_max: float = DEFAULT_TRUNCATION_PX) -> SemanticEdgeField:
    """distance_transform followed by gradients."""
    return gradients(distance_transform(mask, d_max=d_max))


def build_fields(masks: list[SemanticEdgeMask], d_max: float = DEFAULT_TRUNCATION_PX) -> dict[str, SemanticEdgeField]:
    """Distance fields with gradients for several same-shape masks at once."""
    if not masks:
        return {}
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    stack = np.stack([m.pixels for m in masks])
    dist_sq = squared_edge_distance(stack, window=int(np.ceil(d_max)))
    distance = np.minimum(np.sqrt(dist_sq), float(d_max))
    height, width = distance.shape[1:]
    grad_v = np.gradient(distance, axis=1) if height > 1 else np.zeros_like(distance)
    grad_u = np.gradient(distance, axis=2) if width > 1 else np.zeros_like(distance)
    fields = {}
    for i, mask in enumerate(masks):
        fields[mask.label] = SemanticEdgeField(
            label=mask.label,
            distance=distance[i],
            grad_u=grad_u[i],
            grad_v=grad_v[i],
            d_max=float(d_max),
        )
    return fields


def coarsen_mask(mask: SemanticEdgeMask, scale: int = 4) -> SemanticEdgeMask:
    """Block-OR downsampling: a coarse pixel is set if any fine pixel was.

    Fields built from coarsened masks keep their truncation radius in
    coarse pixels, so they cover ``scale`` times more image area and give
    the aligner a proportionally wider pull-in range.
    """
    pixels = mask.pixels
    height, width = pixels.shape
    ch, cw = height // scale, width // scale
    blocks = pixels[: ch * scale, : cw * scale].reshape(ch, scale, cw, scale)
    return SemanticEdgeMask(mask.label, blocks.any(axis=(1, 3)), frame_id=mask.frame_id)


def _bilinear(grid: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    height, width = grid.shape
    iu = np.minimum(np.floor(u).astype(int), width - 2) if width > 1 else np.zeros_like(u, dtype=int)
    iv = np.minimum(np.floor(v).astype(int), height - 2) if height > 1 else np.zeros_like(v, dtype=int)
    iu = np.maximum(iu, 0)
    iv = np.maximum(iv, 0)
    fu = u - iu
    fv = v - iv
    top = grid[iv, iu] * (1.0 - fu) + grid[iv, np.minimum(iu + 1, width - 1)] * fu
    iv1 = np.minimum(iv + 1, height - 1)
    bottom = grid[iv1, iu] * (1.0 - fu) + grid[iv1, np.minimum(iu + 1, width - 1)] * fu
    return top * (1.0 - fv) + bottom * fv


def sample_field(field: SemanticEdgeField, u: float, v: float) -> tuple[float, float, float]:
    """Bilinear (V, G_u, G_v) at a sub-pixel location.

    Valid domain is 0 <= u <= width-1, 0 <= v <= height-1 (inclusive).
    """
    height, width = field.shape
    if not (0.0 <= u <= width - 1 and 0.0 <= v <= height - 1):
        raise OutOfBoundsPixel(f"({u:.2f}, {v:.2f}) outside [0, {width - 1}] x [0, {height - 1}]")
    if field.grad_u is None or field.grad_v is None:
        raise ValueError("field gradients not computed; call gradients() first")
    ua = np.asarray([u], dtype=float)
    va = np.asarray([v], dtype=float)
    return (
        float(_bilinear(field.distance, ua, va)[0]),
        float(_bilinear(field.grad_u, ua, va)[0]),
        float(_bilinear(field.grad_v, ua, va)[0]),
    )


def sample_field_many(field: SemanticEdgeField, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized bilinear sampling; caller guarantees in-bounds locations."""
    u = uv[:, 0]
    v = uv[:, 1]
    return (
        _bilinear(field.distance, u, v),
        _bilinear(field.grad_u, u, v),
        _bilinear(field.grad_v, u, v),
    )


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1)-square structuring element."""
    if radius <= 0 or not mask.any():
        return mask.copy()
    out = mask.copy()
    height, width = mask.shape
    padded = np.zeros((height + 2 * radius, width + 2 * radius), dtype=bool)
    padded[radius:radius + height, radius:radius + width] = mask
    for dv in range(-radius, radius + 1):
        for du in range(-radius, radius + 1):
            if dv == 0 and du == 0:
                continue
            out |= padded[radius + dv:radius + dv + height, radius + du:radius + du + width]
    return out


def build_edge_masks(
    label_image: np.ndarray,
    edge_map: np.ndarray,
    dynamic_mask: np.ndarray,
    labels: list[str] | tuple[str, ...],
    boundary_margin: int = DEFAULT_BOUNDARY_MARGIN_PX,
    frame_id: int | None = None,
) -> list[SemanticEdgeMask]:
    """Split a raw edge map into per-label masks, removing dynamic areas.

    ``label_image`` holds 1-based indices into ``labels`` (0 = background).
    Edge pixels inside the dynamic mask, or within ``boundary_margin`` pixels
    of it, are dropped for every label.
    """
    label_image = np.asarray(label_image)
    edges = np.asarray(edge_map) != 0
    dynamic = np.asarray(dynamic_mask) != 0
    if not (label_image.shape == edges.shape == dynamic.shape):
        raise DimensionMismatch(
            f"shapes differ: labels {label_image.shape}, edges {edges.shape}, dynamic {dynamic.shape}"
        )
    keep = edges & ~_dilate(dynamic, boundary_margin)
    masks = []
    for index, name in enumerate(labels, start=1):
        masks.append(SemanticEdgeMask(name, keep & (label_image == index), frame_id=frame_id))
    return masks


def detect_edges(gray: np.ndarray, threshold: float = 10.0) -> np.ndarray:
    """Reference edge detector: gradient magnitude threshold + thinning.

    Central-difference gradients with non-maximum suppression along the
    dominant gradient axis. Meant for synthetic rasters, not real imagery.
    """
    img = np.asarray(gray, dtype=float)
    gv, gu = np.gradient(img)
    mag = np.hypot(gu, gv)
    strong = mag > threshold
    # Suppress non-maxima along the dominant gradient axis.
    horiz = np.abs(gu) >= np.abs(gv)
    left = np.zeros_like(mag)
    right = np.zeros_like(mag)
    left[:, 1:] = mag[:, :-1]
    right[:, :-1] = mag[:, 1:]
    up = np.zeros_like(mag)
    down = np.zeros_like(mag)
    up[1:, :] = mag[:-1, :]
    down[:-1, :] = mag[1:, :]
    keep_u = (mag >= left) & (mag >= right)
    keep_v = (mag >= up) & (mag >= down)
    return strong & np.where(horiz, keep_u, keep_v)
