"""Synthetic dataset construction and on-disk clip loading.

Layout per clip directory:
    frames/%05d.png          RGB frames, 1-based
    seg/%05d.png             moving-patch support (object-mask source)
    flow/%05d_bwd.flo        backward flow t => t-1, for t = 2..T
    flow/%05d_to1.flo        backward flow t => 1, for t = 2..T
    occl/%05d_bwd.png        non-occluded support for the _bwd flow
    occl/%05d_to1.png        non-occluded support for the _to1 flow
A manifest.txt at the dataset root lists clip directory names.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import flow_oracle, media, warp
from .errors import ContractError, MediaIOError

MANIFEST = "manifest.txt"


def make_synthetic_data(out_dir, n_clips, frames_per_clip, resolution, seed,
                        force=False, texture_sigma=1.0):
    """Translating-texture clips with analytic flows and occlusion masks."""
    if resolution % 8 != 0 or resolution < 16:
        raise ContractError(f"resolution must be >= 16 and divisible by 8, got {resolution}")
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise MediaIOError(f"output directory {out_dir} is not empty (use --force)")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = []
    for i in range(n_clips):
        # integer velocities keep warp consistency exact on the patch
        while True:
            v = (int(rng.integers(-3, 4)), int(rng.integers(-2, 3)))
            if v != (0, 0):
                break
        spec = flow_oracle.SynthSpec(
            height=resolution, width=resolution, frames=frames_per_clip,
            velocity=(float(v[0]), float(v[1])),
            patch_frac=float(rng.uniform(0.3, 0.5)),
            start_frac=(float(rng.uniform(0.1, 0.4)), float(rng.uniform(0.1, 0.4))),
            texture_sigma=texture_sigma,
        )
        clip_seed = int(rng.integers(0, 2**31))
        name = f"clip_{i:03d}"
        write_clip_dir(os.path.join(out_dir, name), spec, clip_seed)
        names.append(name)
    with open(os.path.join(out_dir, MANIFEST), "w") as f:
        f.write("\n".join(names) + "\n")
    return names


def write_clip_dir(clip_dir, spec, clip_seed):
    clip, flows = flow_oracle.synth_sequence(spec, clip_seed)
    media.save_clip(clip, os.path.join(clip_dir, "frames"))
    seg_dir = os.path.join(clip_dir, "seg")
    os.makedirs(seg_dir, exist_ok=True)
    flow_dir = os.path.join(clip_dir, "flow")
    occl_dir = os.path.join(clip_dir, "occl")
    os.makedirs(flow_dir, exist_ok=True)
    os.makedirs(occl_dir, exist_ok=True)
    T = spec.frames
    for t in range(T):
        media.save_mask(
            media.Mask(flow_oracle.synth_patch_support(spec, t)),
            os.path.join(seg_dir, media.FRAME_PATTERN % (t + 1)),
        )
    for t in range(1, T):
        idx = t + 1  # 1-based index of the target frame
        bwd = flows[t - 1]
        media.write_flow(bwd, os.path.join(flow_dir, f"{idx:05d}_bwd.flo"))
        to1 = flow_oracle.synth_flow_to_first(spec, t)
        media.write_flow(to1, os.path.join(flow_dir, f"{idx:05d}_to1.flo"))
        occ_b = warp.occlusion_mask(
            flow_oracle.synth_flow_forward(spec, t).vectors, bwd.vectors
        )
        occ_1 = warp.occlusion_mask(
            flow_oracle.synth_flow_forward_from_first(spec, t).vectors, to1.vectors
        )
        media.save_mask(media.Mask(occ_b), os.path.join(occl_dir, f"{idx:05d}_bwd.png"))
        media.save_mask(media.Mask(occ_1), os.path.join(occl_dir, f"{idx:05d}_to1.png"))


@dataclass
class ClipData:
    """Everything the trainer needs for one clip, loaded eagerly."""

    name: str
    clip: media.Clip
    flows_bwd: list = field(default_factory=list)     # [t=2..T] => t-1
    flows_to1: list = field(default_factory=list)     # [t=2..T] => 1
    occl_bwd: list = field(default_factory=list)
    occl_to1: list = field(default_factory=list)
    seg_dir: str = None

    def __len__(self):
        return len(self.clip)


def load_clip_dir(clip_dir, name=None) -> ClipData:
    clip = media.load_clip(os.path.join(clip_dir, "frames"))
    T = len(clip)
    flows_bwd, flows_to1, occl_bwd, occl_to1 = [], [], [], []
    flow_dir = os.path.join(clip_dir, "flow")
    occl_dir = os.path.join(clip_dir, "occl")
    have_flow = os.path.isdir(flow_dir)
    for t in range(2, T + 1):
        if have_flow:
            flows_bwd.append(media.read_flow(os.path.join(flow_dir, f"{t:05d}_bwd.flo")))
            flows_to1.append(media.read_flow(os.path.join(flow_dir, f"{t:05d}_to1.flo")))
            occl_bwd.append(media.load_mask(os.path.join(occl_dir, f"{t:05d}_bwd.png")).pixels)
            occl_to1.append(media.load_mask(os.path.join(occl_dir, f"{t:05d}_to1.png")).pixels)
    seg = os.path.join(clip_dir, "seg")
    return ClipData(
        name=name or os.path.basename(clip_dir), clip=clip,
        flows_bwd=flows_bwd, flows_to1=flows_to1,
        occl_bwd=occl_bwd, occl_to1=occl_to1,
        seg_dir=seg if os.path.isdir(seg) else None,
    )


def load_dataset(root) -> list:
    manifest = os.path.join(root, MANIFEST)
    if not os.path.isfile(manifest):
        raise MediaIOError(f"no {MANIFEST} in {root}")
    with open(manifest) as f:
        names = [line.strip() for line in f if line.strip()]
    if not names:
        raise MediaIOError(f"empty dataset manifest in {root}")
    return [load_clip_dir(os.path.join(root, n), n) for n in names]


def cache_flows(frames_dir, out_clip_dir, backend=None):
    """Estimate and cache consecutive and to-first flows for a frame
    directory, plus forward/backward occlusion masks."""
    clip = media.load_clip(frames_dir)
    flow_dir = os.path.join(out_clip_dir, "flow")
    occl_dir = os.path.join(out_clip_dir, "occl")
    os.makedirs(flow_dir, exist_ok=True)
    os.makedirs(occl_dir, exist_ok=True)
    for t in range(1, len(clip)):
        idx = t + 1
        bwd = flow_oracle.estimate_flow(clip[t], clip[t - 1], backend)
        fwd = flow_oracle.estimate_flow(clip[t - 1], clip[t], backend)
        media.write_flow(bwd, os.path.join(flow_dir, f"{idx:05d}_bwd.flo"))
        media.save_mask(
            media.Mask(warp.occlusion_mask(fwd.vectors, bwd.vectors)),
            os.path.join(occl_dir, f"{idx:05d}_bwd.png"),
        )
        to1 = flow_oracle.estimate_flow(clip[t], clip[0], backend)
        from1 = flow_oracle.estimate_flow(clip[0], clip[t], backend)
        media.write_flow(to1, os.path.join(flow_dir, f"{idx:05d}_to1.flo"))
        media.save_mask(
            media.Mask(warp.occlusion_mask(from1.vectors, to1.vectors)),
            os.path.join(occl_dir, f"{idx:05d}_to1.png"),
        )
