"""Core value types and file I/O: frames, masks, clips, and flow fields.

Frames are H x W x 3 float arrays in [0,1]; masks are H x W binary arrays
with 1 marking the hole; flow fields are H x W x 2 backward displacements
in pixel units (value at target pixel p gives the source sample offset).
Frames live on disk as PNG sequences (%05d.png), masks as 8-bit grayscale
PNG (255 = hole, thresholded at 128 on load), and flows in the
Middlebury-style .flo layout.
"""

import os
import re
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ContractError, MediaIOError

FLO_MAGIC = b"PIEH"
FRAME_PATTERN = "%05d.png"


def _check_dims(h, w):
    if h < 16 or w < 16 or h % 8 != 0 or w % 8 != 0:
        raise ContractError(
            f"frame dims must be >= 16 and divisible by 8, got {h}x{w}"
        )


@dataclass(frozen=True)
class Frame:
    """One RGB frame, H x W x 3 float32 in [0,1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ContractError(f"frame must be HxWx3, got shape {px.shape}")
        _check_dims(px.shape[0], px.shape[1])
        if not np.all(np.isfinite(px)):
            raise ContractError("frame contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ContractError("frame values must lie in [0,1]")
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self):
        return self.pixels.shape[:2]


@dataclass(frozen=True)
class Mask:
    """Binary hole mask, H x W, 1 = hole/unknown."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ContractError(f"mask must be HxW, got shape {px.shape}")
        vals = np.unique(px)
        if not np.all(np.isin(vals, (0, 1))):
            raise ContractError("mask values must be exactly {0,1}")
        object.__setattr__(self, "pixels", px.astype(np.float32))

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class Clip:
    """Ordered frame sequence with uniform dimensions."""

    frames: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ContractError("clip must contain at least one frame")
        h, w = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != (h, w):
                raise ContractError(
                    f"frame {i} has shape {f.shape}, expected {(h, w)}"
                )

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def shape(self):
        return self.frames[0].shape


@dataclass(frozen=True)
class MaskSeq:
    """Per-frame hole masks aligned with a Clip."""

    masks: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.masks) < 1:
            raise ContractError("mask sequence must contain at least one mask")
        h, w = self.masks[0].shape
        for i, m in enumerate(self.masks):
            if m.shape != (h, w):
                raise ContractError(
                    f"mask {i} has shape {m.shape}, expected {(h, w)}"
                )

    def __len__(self):
        return len(self.masks)

    def __getitem__(self, i):
        return self.masks[i]


@dataclass(frozen=True)
class FlowField:
    """Backward flow, H x W x 2 (dx, dy) in pixels."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float32)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ContractError(f"flow must be HxWx2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ContractError("flow contains non-finite values")
        object.__setattr__(self, "vectors", v)

    @property
    def shape(self):
        return self.vectors.shape[:2]


# ---------------------------------------------------------------------------
# frame / mask I/O


def _sorted_pngs(directory):
    try:
        names = sorted(n for n in os.listdir(directory) if n.lower().endswith(".png"))
    except OSError as e:
        raise MediaIOError(f"cannot list directory {directory}: {e}") from e
    return names


def load_frame(path) -> Frame:
    try:
        img = Image.open(path).convert("RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    except (OSError, SyntaxError) as e:
        raise MediaIOError(f"cannot decode frame {path}: {e}") from e
    return Frame(arr)


def save_frame(frame: Frame, path):
    arr = np.clip(np.rint(frame.pixels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def load_clip(directory) -> Clip:
    names = _sorted_pngs(directory)
    if not names:
        raise MediaIOError(f"no frames found in {directory}")
    frames = [load_frame(os.path.join(directory, n)) for n in names]
    return Clip(frames)


def save_clip(clip: Clip, directory, start_index=1):
    os.makedirs(directory, exist_ok=True)
    for i, f in enumerate(clip.frames):
        save_frame(f, os.path.join(directory, FRAME_PATTERN % (start_index + i)))


def load_mask(path) -> Mask:
    try:
        img = Image.open(path).convert("L")
        arr = np.asarray(img)
    except (OSError, SyntaxError) as e:
        raise MediaIOError(f"cannot decode mask {path}: {e}") from e
    return Mask((arr >= 128).astype(np.float32))


def save_mask(mask: Mask, path):
    arr = (mask.pixels * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_mask_seq(directory) -> MaskSeq:
    names = _sorted_pngs(directory)
    if not names:
        raise MediaIOError(f"no masks found in {directory}")
    return MaskSeq([load_mask(os.path.join(directory, n)) for n in names])


def save_mask_seq(seq: MaskSeq, directory, start_index=1):
    os.makedirs(directory, exist_ok=True)
    for i, m in enumerate(seq.masks):
        save_mask(m, os.path.join(directory, FRAME_PATTERN % (start_index + i)))


# ---------------------------------------------------------------------------
# resizing


def resize_frame(frame: Frame, out_h, out_w) -> Frame:
    """Bilinear resampling to out_h x out_w (both >= 16, divisible by 8)."""
    _check_dims(out_h, out_w)
    out = resize_array(frame.pixels, out_h, out_w)
    return Frame(np.clip(out, 0.0, 1.0))


def resize_array(arr, out_h, out_w):
    """Bilinear resize of an HxW or HxWxC array (align-corners convention)."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[:2]
    if (h, w) == (out_h, out_w):
        return arr.astype(np.float32).copy()
    ys = np.linspace(0, h - 1, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0, w - 1, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    if arr.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


# ---------------------------------------------------------------------------
# flow file I/O (Middlebury-style .flo)


def write_flow(flow: FlowField, path):
    h, w = flow.shape
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(struct.pack("<ii", w, h))
        f.write(flow.vectors.astype("<f4").tobytes())


def read_flow(path) -> FlowField:
    try:
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != FLO_MAGIC:
                raise MediaIOError(f"bad flow magic in {path}: {magic!r}")
            header = f.read(8)
            if len(header) != 8:
                raise MediaIOError(f"truncated flow header in {path}")
            w, h = struct.unpack("<ii", header)
            data = f.read(h * w * 2 * 4)
            if len(data) != h * w * 2 * 4:
                raise MediaIOError(f"truncated flow data in {path}")
    except OSError as e:
        raise MediaIOError(f"cannot read flow {path}: {e}") from e
    vec = np.frombuffer(data, dtype="<f4").reshape(h, w, 2)
    return FlowField(vec.copy())


def frame_indices(directory):
    """Integer indices parsed from %05d.png names, sorted."""
    out = []
    for n in _sorted_pngs(directory):
        m = re.fullmatch(r"(\d+)\.png", n)
        if m:
            out.append(int(m.group(1)))
    return sorted(out)
