"""Procedural training mask generators.

Four kinds of hole sequences: per-frame random squares, a square flying
in one direction at a constant step, free-form brush strokes with a
per-frame affine jitter, and dilated object segmentation masks read
from disk. Every generator is a deterministic function of (dims, seed,
params).
"""

import os

import cv2
import numpy as np

from .errors import ContractError
from .media import Mask, MaskSeq, load_mask

MASK_KINDS = ("random_square", "flying_square", "arbitrary", "object")

SQUARE_FRAC_RANGE = (0.25, 0.5)
FLY_STEP_RANGE = (2, 8)
STROKE_COUNT_RANGE = (1, 5)
VERTEX_RANGE = (4, 12)
DEFAULT_DILATION = 5


def _square_mask(h, w, y, x, side):
    m = np.zeros((h, w), dtype=np.float32)
    m[y : y + side, x : x + side] = 1.0
    return m


def random_square(T, H, W, seed) -> MaskSeq:
    """One uniformly placed square per frame, side in [0.25,0.5]*min(H,W)."""
    rng = np.random.default_rng(seed)
    masks = []
    for _ in range(T):
        side = int(round(rng.uniform(*SQUARE_FRAC_RANGE) * min(H, W)))
        y = int(rng.integers(0, H - side + 1))
        x = int(rng.integers(0, W - side + 1))
        masks.append(Mask(_square_mask(H, W, y, x, side)))
    return MaskSeq(masks)


def flying_square(T, H, W, seed, step=None) -> MaskSeq:
    """One square moving by a constant integer step in one direction."""
    rng = np.random.default_rng(seed)
    side = int(round(rng.uniform(*SQUARE_FRAC_RANGE) * min(H, W)))
    y = int(rng.integers(0, H - side + 1))
    x = int(rng.integers(0, W - side + 1))
    if step is None:
        step = int(rng.integers(FLY_STEP_RANGE[0], FLY_STEP_RANGE[1] + 1))
    if step < FLY_STEP_RANGE[0] or step > FLY_STEP_RANGE[1]:
        raise ContractError(f"step must lie in {FLY_STEP_RANGE}, got {step}")
    dy, dx = [(-1, 0), (1, 0), (0, -1), (0, 1)][int(rng.integers(0, 4))]
    masks = []
    for k in range(T):
        yk = int(np.clip(y + k * step * dy, 0, H - side))
        xk = int(np.clip(x + k * step * dx, 0, W - side))
        masks.append(Mask(_square_mask(H, W, yk, xk, side)))
    return MaskSeq(masks)


def _draw_strokes(H, W, rng, n_strokes, width_range, vertex_range):
    base = np.zeros((H, W), dtype=np.uint8)
    for _ in range(n_strokes):
        n_vert = int(rng.integers(vertex_range[0], vertex_range[1] + 1))
        width = int(rng.integers(width_range[0], width_range[1] + 1))
        pts = [np.array([rng.integers(0, W), rng.integers(0, H)])]
        for _ in range(n_vert - 1):
            angle = rng.uniform(0, 2 * np.pi)
            length = rng.uniform(0.05, 0.25) * min(H, W)
            nxt = pts[-1] + length * np.array([np.cos(angle), np.sin(angle)])
            pts.append(np.clip(nxt, 0, [W - 1, H - 1]))
        poly = np.stack(pts).astype(np.int32)
        cv2.polylines(base, [poly], isClosed=False, color=1, thickness=width)
    return base


def arbitrary_mask(T, H, W, seed, n_strokes=None, width_range=None,
                   vertex_range=VERTEX_RANGE) -> MaskSeq:
    """Free-form strokes plus a small per-frame affine perturbation."""
    rng = np.random.default_rng(seed)
    if width_range is None:
        width_range = (3, max(3, H // 8))
    if n_strokes is None:
        n_strokes = int(rng.integers(STROKE_COUNT_RANGE[0], STROKE_COUNT_RANGE[1] + 1))
    if n_strokes < 1:
        raise ContractError("at least one stroke required")
    base = _draw_strokes(H, W, rng, n_strokes, width_range, vertex_range)
    masks = []
    tx = ty = rot = 0.0
    scale = 1.0
    shear = 0.0
    # per-frame translation capped at 5 px but scaled down on small
    # canvases so the strokes cannot drift off-frame in a few steps
    t_max = min(5.0, W / 13.0)
    for k in range(T):
        if k > 0:
            tx += rng.uniform(-t_max, t_max)
            ty += rng.uniform(-t_max, t_max)
            rot += rng.uniform(-5, 5)
            scale *= rng.uniform(0.95, 1.05)
            shear += rng.uniform(-0.02, 0.02)
        m = cv2.getRotationMatrix2D((W / 2, H / 2), rot, scale)
        m[0, 1] += shear
        m[:, 2] += (tx, ty)
        warped = cv2.warpAffine(base, m, (W, H), flags=cv2.INTER_NEAREST)
        if warped.sum() == 0 and masks:
            # perturbation pushed every stroke off-canvas; a hole mask
            # with no hole is useless, so keep the previous frame's
            warped = masks[-1].pixels.astype(np.uint8)
        masks.append(Mask(warped.astype(np.float32)))
    return MaskSeq(masks)


def disk_kernel(radius):
    d = 2 * radius + 1
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (yy * yy + xx * xx <= radius * radius).astype(np.uint8)


def object_mask(segmentation_dir, dilation_radius=DEFAULT_DILATION,
                expected_frames=None) -> MaskSeq:
    """Per-frame segmentation masks dilated with a disk."""
    names = sorted(
        n for n in os.listdir(segmentation_dir) if n.lower().endswith(".png")
    )
    if expected_frames is not None and len(names) != expected_frames:
        raise ContractError(
            f"segmentation has {len(names)} frames, clip has {expected_frames}"
        )
    masks = []
    for n in names:
        m = load_mask(os.path.join(segmentation_dir, n))
        if dilation_radius > 0:
            dil = cv2.dilate(m.pixels.astype(np.uint8), disk_kernel(dilation_radius))
            m = Mask(dil.astype(np.float32))
        masks.append(m)
    return MaskSeq(masks)


def generate(kind, T, H, W, seed, segmentation_dir=None) -> MaskSeq:
    """Dispatch by mask kind name."""
    if kind == "random_square":
        return random_square(T, H, W, seed)
    if kind == "flying_square":
        return flying_square(T, H, W, seed)
    if kind == "arbitrary":
        return arbitrary_mask(T, H, W, seed)
    if kind == "object":
        if segmentation_dir is None:
            raise ContractError("object masks need a segmentation directory")
        return object_mask(segmentation_dir, expected_frames=T)
    raise ContractError(f"unknown mask kind {kind!r}")
