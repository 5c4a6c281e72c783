"""Pseudo-ground-truth optical flow and analytic synthetic sequences.

The default estimator is a classical coarse-to-fine iterative
Lucas-Kanade scheme (3 pyramid levels, 10 iterations/level, Gaussian
window sums), with no learned weights so results are deterministic.
Alternative backends can be registered behind `estimate_flow`'s
`backend` argument.

`synth_sequence` builds a translating random texture over a static
random background together with the exact analytic backward flow per
consecutive pair; it stands in for datasets with ground-truth flow.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ContractError
from .media import Clip, FlowField, Frame, resize_array
from .warp import bilinear_warp

PYRAMID_LEVELS = 3
ITERS_PER_LEVEL = 10
WINDOW_SIGMA = 3.0


def _grayscale(frame_px):
    return frame_px @ np.array([0.299, 0.587, 0.114])


def _downsample2(img):
    h, w = img.shape
    return resize_array(gaussian_filter(img, 1.0), h // 2, w // 2).astype(np.float64)


def _lk_refine(a, b, flow, iters, sigma):
    """Iterative LK on one pyramid level; flow warps b toward a."""
    gy, gx = np.gradient(b)
    for _ in range(iters):
        bw = bilinear_warp(b, flow)
        gxw = bilinear_warp(gx, flow)
        gyw = bilinear_warp(gy, flow)
        err = bw - a
        ixx = gaussian_filter(gxw * gxw, sigma)
        iyy = gaussian_filter(gyw * gyw, sigma)
        ixy = gaussian_filter(gxw * gyw, sigma)
        ixt = gaussian_filter(gxw * err, sigma)
        iyt = gaussian_filter(gyw * err, sigma)
        det = ixx * iyy - ixy * ixy
        det = np.where(np.abs(det) < 1e-9, 1e-9, det)
        du = -(iyy * ixt - ixy * iyt) / det
        dv = -(ixx * iyt - ixy * ixt) / det
        step = np.stack([du, dv], axis=2)
        norm = np.sqrt(np.sum(step**2, axis=2, keepdims=True))
        step = np.where(norm > 1.0, step / np.maximum(norm, 1e-12), step)
        flow = flow + step
    return flow


def estimate_flow(frame_a: Frame, frame_b: Frame, backend=None) -> FlowField:
    """Backward flow f with warp(frame_b, f) ~= frame_a."""
    if frame_a.shape != frame_b.shape:
        raise ContractError(
            f"frame shapes disagree: {frame_a.shape} vs {frame_b.shape}"
        )
    if backend is not None:
        return backend(frame_a, frame_b)
    a = _grayscale(frame_a.pixels.astype(np.float64))
    b = _grayscale(frame_b.pixels.astype(np.float64))
    pyr_a, pyr_b = [a], [b]
    for _ in range(PYRAMID_LEVELS - 1):
        if min(pyr_a[-1].shape) < 8:
            break
        pyr_a.append(_downsample2(pyr_a[-1]))
        pyr_b.append(_downsample2(pyr_b[-1]))
    flow = np.zeros(pyr_a[-1].shape + (2,))
    for level in reversed(range(len(pyr_a))):
        if level < len(pyr_a) - 1:
            h, w = pyr_a[level].shape
            flow = resize_array(flow * 2.0, h, w).astype(np.float64)
        flow = _lk_refine(pyr_a[level], pyr_b[level], flow, ITERS_PER_LEVEL, WINDOW_SIGMA)
    return FlowField(flow.astype(np.float32))


@dataclass(frozen=True)
class SynthSpec:
    """Translating-texture scene: a textured patch moving over a static
    random background at constant velocity (pixels/frame)."""

    height: int = 64
    width: int = 64
    frames: int = 8
    velocity: tuple = (1.0, 0.0)  # (vx, vy)
    patch_frac: float = 0.45
    start_frac: tuple = (0.15, 0.15)
    texture_sigma: float = 1.0  # Gaussian blur of the random textures

    def __post_init__(self):
        if abs(self.velocity[0]) > self.width / 2 or abs(self.velocity[1]) > self.height / 2:
            raise ContractError("velocity exceeds half the canvas per frame")


def _patch_box(spec: SynthSpec, t):
    side_h = int(round(spec.patch_frac * spec.height))
    side_w = int(round(spec.patch_frac * spec.width))
    y0 = spec.start_frac[1] * spec.height + t * spec.velocity[1]
    x0 = spec.start_frac[0] * spec.width + t * spec.velocity[0]
    return y0, x0, side_h, side_w


def _render(spec: SynthSpec, bg, tex, t):
    """Place the texture patch at its frame-t position (subpixel via shift)."""
    frame = bg.copy()
    y0, x0, sh, sw = _patch_box(spec, t)
    iy0, ix0 = int(np.floor(y0)), int(np.floor(x0))
    fy, fx = y0 - iy0, x0 - ix0
    # bilinear placement of the patch onto the canvas
    weights = [((0, 0), (1 - fy) * (1 - fx)), ((0, 1), (1 - fy) * fx),
               ((1, 0), fy * (1 - fx)), ((1, 1), fy * fx)]
    acc = np.zeros_like(frame)
    wsum = np.zeros(frame.shape[:2] + (1,))
    for (oy, ox), wgt in weights:
        if wgt == 0.0:
            continue
        y_lo, y_hi = max(iy0 + oy, 0), min(iy0 + oy + sh, spec.height)
        x_lo, x_hi = max(ix0 + ox, 0), min(ix0 + ox + sw, spec.width)
        if y_hi <= y_lo or x_hi <= x_lo:
            continue
        ys, xs = slice(y_lo, y_hi), slice(x_lo, x_hi)
        ty = slice(y_lo - (iy0 + oy), y_hi - (iy0 + oy))
        tx = slice(x_lo - (ix0 + ox), x_hi - (ix0 + ox))
        acc[ys, xs] += wgt * tex[ty, tx]
        wsum[ys, xs] += wgt
    covered = wsum[..., 0] > 1e-9
    frame[covered] = acc[covered] / wsum[covered]
    return frame, covered


def _patch_mask(spec: SynthSpec, t):
    """Binary support of the patch at frame t (1 inside)."""
    m = np.zeros((spec.height, spec.width), dtype=bool)
    y0, x0, sh, sw = _patch_box(spec, t)
    iy0, ix0 = int(np.floor(y0)), int(np.floor(x0))
    extra_y = 1 if y0 != iy0 else 0
    extra_x = 1 if x0 != ix0 else 0
    ys = slice(max(iy0, 0), min(iy0 + sh + extra_y, spec.height))
    xs = slice(max(ix0, 0), min(ix0 + sw + extra_x, spec.width))
    m[ys, xs] = True
    return m


def synth_sequence(spec: SynthSpec, seed):
    """Deterministic clip plus exact analytic backward flows W_{t=>t-1}.

    Returns (clip, flows) with len(flows) == len(clip) - 1; flows[i] maps
    frame i+1 back to frame i.
    """
    rng = np.random.default_rng(seed)
    bg = rng.uniform(0.0, 1.0, (spec.height, spec.width, 3)).astype(np.float64)
    bg = gaussian_filter(bg, (spec.texture_sigma, spec.texture_sigma, 0))
    y0, x0, sh, sw = _patch_box(spec, 0)
    tex = rng.uniform(0.0, 1.0, (sh, sw, 3)).astype(np.float64)
    tex = gaussian_filter(tex, (spec.texture_sigma, spec.texture_sigma, 0))
    frames, supports = [], []
    for t in range(spec.frames):
        px, covered = _render(spec, bg, tex, t)
        frames.append(Frame(np.clip(px, 0.0, 1.0).astype(np.float32)))
        supports.append(_patch_mask(spec, t))
    flows = []
    v = np.array(spec.velocity, dtype=np.float32)
    for t in range(1, spec.frames):
        f = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
        f[supports[t]] = -v
        flows.append(FlowField(f))
    return Clip(frames), flows


def synth_flow_to_first(spec: SynthSpec, t):
    """Analytic backward flow from frame t (0-based) to frame 0."""
    f = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
    f[_patch_mask(spec, t)] = -t * np.array(spec.velocity, dtype=np.float32)
    return FlowField(f)


def synth_flow_forward(spec: SynthSpec, t):
    """Analytic forward flow from frame t-1 to frame t (support at t-1)."""
    f = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
    f[_patch_mask(spec, t - 1)] = np.array(spec.velocity, dtype=np.float32)
    return FlowField(f)


def synth_flow_forward_from_first(spec: SynthSpec, t):
    """Analytic forward flow from frame 0 to frame t."""
    f = np.zeros((spec.height, spec.width, 2), dtype=np.float32)
    f[_patch_mask(spec, 0)] = t * np.array(spec.velocity, dtype=np.float32)
    return FlowField(f)


def synth_patch_support(spec: SynthSpec, t):
    """Patch support mask at frame t, as float {0,1}."""
    return _patch_mask(spec, t).astype(np.float32)
