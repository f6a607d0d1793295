"""Synthetic RGB-D corpus for exercising the detector offline.

Renders a red ball over a textured background with motion blur, and a
depth raster whose ball silhouette is shifted a few pixels against the RGB
(mis-registration "bleed", so part of the blob reads background depth).
Frames are written as PNG + float32 .npy pairs with a JSON manifest:

    manifest.json:
      version: 1
      intrinsics: {fx, fy, cx, cy}
      extrinsics: {rotation: 3x3, translation: [3]}   # ee <- camera
      frames: [{rgb, depth, timestamp, truth: {u, v, depth, point_cam}}]
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .detector import CameraIntrinsics

MANIFEST_VERSION = 1
BACKGROUND_DEPTH = 4.0

DEFAULT_INTRINSICS = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


def render_frame(center_uv, depth_m: float, K: CameraIntrinsics, rng,
                 width=640, height=480, ball_radius=0.025, blur_px=3.0,
                 bleed_shift=3, corrupt_depth=False):
    """One RGB + depth frame pair.

    Motion blur averages sub-renders along u, symmetric about the true
    center so the blob centroid is preserved.  ``corrupt_depth`` replaces
    the ball's depths with background (an injected outlier frame).
    """
    u0, v0 = center_uv
    r_px = K.fx * ball_radius / depth_m
    vv, uu = np.mgrid[0:height, 0:width].astype(float)

    # textured greenish-gray background, never inside the red HSV gate
    rgb = np.zeros((height, width, 3), dtype=np.uint8)
    noise = rng.integers(60, 120, size=(height, width))
    rgb[..., 0] = noise
    rgb[..., 1] = noise + rng.integers(10, 50, size=(height, width))
    rgb[..., 2] = noise
    coverage = np.zeros((height, width))
    offsets = np.linspace(-blur_px / 2.0, blur_px / 2.0, 5)
    for du in offsets:
        d = np.hypot(uu - (u0 + du), vv - v0)
        coverage += np.clip(r_px + 0.5 - d, 0.0, 1.0)
    coverage /= len(offsets)
    ball_mask = coverage > 0.5
    rgb[ball_mask, 0] = 230
    rgb[ball_mask, 1] = 25
    rgb[ball_mask, 2] = 30

    depth = np.full((height, width), BACKGROUND_DEPTH, dtype=np.float32)
    depth += rng.normal(0.0, 0.01, size=depth.shape).astype(np.float32)
    if not corrupt_depth:
        d_sil = np.hypot(uu - (u0 + bleed_shift), vv - v0)
        depth[d_sil <= r_px] = depth_m
    # a few invalid (zero) depth pixels, as real sensors produce
    invalid = rng.random(depth.shape) < 0.001
    depth[invalid] = 0.0
    return rgb, depth


def generate_corpus(out_dir, n_frames=50, seed=0, K=DEFAULT_INTRINSICS,
                    outlier_frames=(), extrinsic_rotation=None,
                    extrinsic_translation=None):
    """Write a deterministic corpus; returns the manifest path.

    The ball sweeps across the image while its depth ramps 2.2 -> 1.8 m.
    Frames listed in ``outlier_frames`` get corrupted (background) depth.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if extrinsic_rotation is None:
        extrinsic_rotation = np.eye(3)
        extrinsic_translation = np.zeros(3)
    frames = []
    for i in range(n_frames):
        frac = i / max(1, n_frames - 1)
        u = 140.0 + 360.0 * frac
        v = 200.0 + 60.0 * np.sin(2.0 * np.pi * frac)
        z = 2.2 - 0.4 * frac
        rgb, depth = render_frame((u, v), z, K, rng,
                                  corrupt_depth=i in set(outlier_frames))
        rgb_name = f"frame_{i:04d}_rgb.png"
        depth_name = f"frame_{i:04d}_depth.npy"
        Image.fromarray(rgb).save(out_dir / rgb_name)
        np.save(out_dir / depth_name, depth)
        point = np.array([(u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z])
        frames.append({
            "rgb": rgb_name, "depth": depth_name, "timestamp": i / 30.0,
            "truth": {"u": u, "v": v, "depth": z, "point_cam": point.tolist(),
                      "outlier": i in set(outlier_frames)},
        })
    manifest = {
        "version": MANIFEST_VERSION,
        "intrinsics": {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy},
        "extrinsics": {"rotation": np.asarray(extrinsic_rotation).tolist(),
                       "translation": np.asarray(extrinsic_translation).tolist()},
        "frames": frames,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


def load_corpus(manifest_path):
    """Yield (rgb, depth, meta) per frame; meta carries timestamp/truth."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported corpus version {manifest.get('version')}")
    K = CameraIntrinsics(**manifest["intrinsics"])
    ex = manifest["extrinsics"]
    rotation = np.asarray(ex["rotation"])
    translation = np.asarray(ex["translation"])
    root = manifest_path.parent
    for meta in manifest["frames"]:
        rgb = np.asarray(Image.open(root / meta["rgb"]).convert("RGB"))
        depth = np.load(root / meta["depth"])
        yield rgb, depth, meta
    return


def corpus_intrinsics(manifest_path):
    manifest = json.loads(Path(manifest_path).read_text())
    K = CameraIntrinsics(**manifest["intrinsics"])
    ex = manifest["extrinsics"]
    return K, np.asarray(ex["rotation"]), np.asarray(ex["translation"])
