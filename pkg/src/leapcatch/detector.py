"""RGB-D ball localization: HSV threshold, largest blob, median depth,
pinhole back-projection, end-effector transform and a consecutive-frame
jump filter.

Operates on plain arrays (RGB uint8 HxWx3, depth float32 HxW in meters,
0 = invalid); no camera drivers. Frame-by-frame processing is stateless
except for the jump filter's single-slot memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def validate(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be > 0")


@dataclass
class HsvRange:
    """Inclusive HSV bounds; hue in degrees wraps across 360 when
    h_min > h_max (e.g. a red range 350..10)."""

    h_min: float
    h_max: float
    s_min: float
    s_max: float
    v_min: float
    v_max: float

    def validate(self):
        if not (0.0 <= self.s_min <= self.s_max <= 1.0):
            raise ValueError("saturation range ill-ordered")
        if not (0.0 <= self.v_min <= self.v_max <= 1.0):
            raise ValueError("value range ill-ordered")


@dataclass
class DetectionResult:
    found: bool
    u: float = 0.0
    v: float = 0.0
    area: int = 0
    depth: float = 0.0
    point_ee: np.ndarray | None = None


def rgb_to_hsv(rgb: np.ndarray):
    """Hexcone RGB->HSV. rgb is (...,3) in [0,255]; returns h in [0,360),
    s and v in [0,1]. Zero-saturation pixels get h=0."""
    rgb = np.asarray(rgb, dtype=float) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    safe_c = np.where(c > 0.0, c, 1.0)
    h = np.where(
        v == r, (g - b) / safe_c,
        np.where(v == g, 2.0 + (b - r) / safe_c, 4.0 + (r - g) / safe_c),
    )
    h = np.where(c > 0.0, (h * 60.0) % 360.0, 0.0)
    s = np.where(v > 0.0, c / np.where(v > 0.0, v, 1.0), 0.0)
    return h, s, v


def threshold_mask(rgb: np.ndarray, rng: HsvRange) -> np.ndarray:
    """Binary inclusion mask; hue comparison is wrap-aware."""
    h, s, v = rgb_to_hsv(rgb)
    if rng.h_min <= rng.h_max:
        h_ok = (h >= rng.h_min) & (h <= rng.h_max)
    else:
        h_ok = (h >= rng.h_min) | (h <= rng.h_max)
    return h_ok & (s >= rng.s_min) & (s <= rng.s_max) & (v >= rng.v_min) & (v <= rng.v_max)


_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def largest_component(mask: np.ndarray):
    """8-connected component of maximal area.

    Returns (component mask, centroid (u, v) in pixel coordinates, area)
    or (None, None, 0) on an empty mask.  Ties break on the component with
    the smallest min-row, then min-col.
    """
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if count == 0:
        return None, None, 0
    areas = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1))
    best_area = areas.max()
    candidates = np.nonzero(areas == best_area)[0] + 1
    if len(candidates) == 1:
        chosen = candidates[0]
    else:
        keys = []
        for lab in candidates:
            rows, cols = np.nonzero(labels == lab)
            keys.append((rows.min(), cols[rows == rows.min()].min(), lab))
        chosen = min(keys)[2]
    comp = labels == chosen
    rows, cols = np.nonzero(comp)
    centroid = (cols.mean(), rows.mean())  # (u, v)
    return comp, centroid, int(best_area)


def median_depth(component: np.ndarray, depth: np.ndarray):
    """Median of the valid (> 0) depths inside the component; even counts
    average the two middle values.  Returns None when no valid depth."""
    vals = depth[component]
    vals = vals[vals > 0.0]
    if vals.size == 0:
        return None
    return float(np.median(vals))


def backproject(u, v, d, K: CameraIntrinsics) -> np.ndarray:
    """Pixel + depth -> camera-frame point ((u-cx)d/fx, (v-cy)d/fy, d)."""
    if np.any(np.asarray(d) <= 0.0):
        raise ValueError("depth must be > 0")
    return np.stack(
        [
            (np.asarray(u, dtype=float) - K.cx) * d / K.fx,
            (np.asarray(v, dtype=float) - K.cy) * d / K.fy,
            np.asarray(d, dtype=float),
        ],
        axis=-1,
    )


def project(point_cam: np.ndarray, K: CameraIntrinsics):
    """Inverse of backproject, for round-trip checks."""
    p = np.asarray(point_cam, dtype=float)
    return (K.fx * p[..., 0] / p[..., 2] + K.cx,
            K.fy * p[..., 1] / p[..., 2] + K.cy)


def camera_to_ee(point_cam: np.ndarray, rotation: np.ndarray,
                 translation: np.ndarray) -> np.ndarray:
    """Apply the rigid transform ee <- camera: R @ p + t."""
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape != (3, 3) or abs(np.linalg.det(rotation) - 1.0) > 1e-6:
        raise ValueError("extrinsic rotation must be a proper 3x3 rotation")
    return np.asarray(point_cam, dtype=float) @ rotation.T + np.asarray(translation, dtype=float)


class JumpFilter:
    """Gate on frame-to-frame changes in target range.

    Accepts a new estimate iff its range differs from the last accepted one
    by at most ``max_jump``, or after ``max_rejections`` consecutive
    rejections (forced re-acquisition).
    """

    def __init__(self, max_jump: float = 0.5, max_rejections: int = 3):
        self.max_jump = max_jump
        self.max_rejections = max_rejections
        self.prev = None
        self.rejections = 0

    def reset(self):
        self.prev = None
        self.rejections = 0

    def __call__(self, estimate: np.ndarray):
        """Returns (accepted estimate, accepted flag)."""
        estimate = np.asarray(estimate, dtype=float)
        if self.prev is None:
            self.prev = estimate
            self.rejections = 0
            return estimate, True
        jump = abs(np.linalg.norm(estimate) - np.linalg.norm(self.prev))
        if jump <= self.max_jump or self.rejections >= self.max_rejections:
            self.prev = estimate
            self.rejections = 0
            return estimate, True
        self.rejections += 1
        return self.prev, False


def detect_frame(rgb, depth, hsv: HsvRange, K: CameraIntrinsics,
                 extrinsic_rotation=None, extrinsic_translation=None) -> DetectionResult:
    """Full single-frame pipeline (without the jump filter)."""
    mask = threshold_mask(rgb, hsv)
    comp, centroid, area = largest_component(mask)
    if comp is None:
        return DetectionResult(found=False)
    d = median_depth(comp, depth)
    if d is None:
        return DetectionResult(found=False)
    u, v = centroid
    point = backproject(u, v, d, K)
    if extrinsic_rotation is not None:
        point = camera_to_ee(point, extrinsic_rotation, extrinsic_translation)
    return DetectionResult(found=True, u=u, v=v, area=area, depth=d, point_ee=point)
