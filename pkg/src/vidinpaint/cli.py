"""Command-line entry point.

Subcommands: make-data, make-masks, cache-flow, train, infer, eval,
compare. Exit codes: 0 success, 2 contract error, 3 I/O error. Errors
print one machine-parsable line: ERROR[contract]: ... or ERROR[io]: ...
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import data, evaluate, maskgen, media, pipeline
from .config import load_config
from .errors import ContractError, MediaIOError
from .model import load_checkpoint


def _cmd_make_data(args):
    cfg = load_config(args.config)
    data.make_synthetic_data(
        args.out, args.clips, args.frames,
        args.resolution or cfg["resolution"], args.seed, force=args.force,
    )
    print(f"wrote {args.clips} clips to {args.out}")


def _cmd_make_masks(args):
    seq = maskgen.generate(args.kind, args.frames, args.height, args.width,
                           args.seed, segmentation_dir=args.seg_dir)
    media.save_mask_seq(seq, args.out)
    print(f"wrote {len(seq)} masks to {args.out}")


def _cmd_cache_flow(args):
    data.cache_flows(args.frames, args.out)
    print(f"cached flows for {args.frames} in {args.out}")


def _train_config(cfg, args):
    kw = {k: cfg[k] for k in
          ("lr", "betas", "loss_weights", "batch_size", "iterations", "seed",
           "resolution", "channels", "checkpoint_every", "detach_feedback",
           "mask_kinds")}
    kw["stage"] = args.stage
    if args.iterations is not None:
        kw["iterations"] = args.iterations
    if args.seed is not None:
        kw["seed"] = args.seed
    return pipeline.TrainConfig(**kw)


def _cmd_train(args):
    cfg = load_config(args.config)
    tc = _train_config(cfg, args)
    dataset = data.load_dataset(args.data)
    ckpt = pipeline.train(tc, dataset, checkpoint_in=args.ckpt_in,
                          out_dir=args.out)
    print(f"final checkpoint: {ckpt}")


def _cmd_infer(args):
    model = load_checkpoint(args.ckpt)
    clip = media.load_clip(args.frames)
    masks = media.load_mask_seq(args.masks)
    outputs, flows, comps = pipeline.infer(model, clip, masks,
                                           per_frame_mode=args.per_frame)
    media.save_clip(outputs, args.out)
    flow_dir = os.path.join(args.out, "flow")
    comp_dir = os.path.join(args.out, "comp")
    os.makedirs(flow_dir, exist_ok=True)
    os.makedirs(comp_dir, exist_ok=True)
    for i, (fl, cm) in enumerate(zip(flows, comps), start=1):
        media.write_flow(fl, os.path.join(flow_dir, f"{i:05d}_bwd.flo"))
        gate = np.clip(np.rint(cm[1] * 255), 0, 255).astype(np.uint8)
        from PIL import Image

        Image.fromarray(gate, mode="L").save(
            os.path.join(comp_dir, f"{i:05d}.png")
        )
    print(f"wrote {len(outputs)} frames to {args.out}")


def _eval_one_clip(model, cd, metric, mask_seed, per_frame, dilation):
    h, w = cd.clip.shape
    if cd.seg_dir is not None:
        masks = maskgen.object_mask(cd.seg_dir, dilation_radius=dilation,
                                    expected_frames=len(cd))
    else:
        masks = maskgen.flying_square(len(cd), h, w, seed=mask_seed)
    outputs, _, _ = pipeline.infer(model, cd.clip, masks,
                                   per_frame_mode=per_frame)
    if metric == "warp":
        return evaluate.warping_error(outputs, cd.flows_bwd, cd.occl_bwd), outputs
    if metric == "psnr":
        return evaluate.psnr_ssim(outputs, cd.clip)[0], outputs
    return None, outputs


def _cmd_eval(args):
    cfg = load_config(args.config)
    model = load_checkpoint(args.ckpt)
    dataset = data.load_dataset(args.data)
    trials = cfg["eval_seeds"]
    rows = []
    aggregates = []
    for trial, seed in enumerate(trials):
        rng = np.random.default_rng(seed)
        per_video = []
        outputs_all = []
        for cd in dataset:
            mask_seed = int(rng.integers(0, 2**31))
            value, outputs = _eval_one_clip(
                model, cd, args.metric, mask_seed, args.per_frame,
                cfg["dilation_radius"],
            )
            outputs_all.append(outputs)
            if value is not None:
                per_video.append((cd.name, value))
        if args.metric == "fid":
            fid = evaluate.video_fid(outputs_all, [cd.clip for cd in dataset])
            aggregates.append(fid)
            rows.append((f"trial_{trial}", "fid", fid))
        else:
            for name, value in per_video:
                rows.append((f"{name}@trial{trial}", args.metric, value))
            aggregates.append(float(np.mean([v for _, v in per_video])))
    mean = float(np.mean(aggregates))
    rows.append(("aggregate", args.metric, mean))
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("video", "metric", "value"))
        w.writerows(rows)
    print(f"{args.metric}: {mean:.6f} ({args.out})")


def compare_video(clip_dirs, out_dir, masks_dir=None, sep=2):
    """Horizontally tiled frames with 2-px separators; mask boundaries
    are overdrawn in red on the first (input) tile."""
    import cv2
    from PIL import Image

    if not clip_dirs:
        raise ContractError("no input clip directories")
    clips = [media.load_clip(d) for d in clip_dirs]
    T = len(clips[0])
    if any(len(c) != T for c in clips):
        raise ContractError("input clips have differing frame counts")
    h, w = clips[0].shape
    if any(c.shape != (h, w) for c in clips):
        raise ContractError("input clips have differing dimensions")
    masks = media.load_mask_seq(masks_dir) if masks_dir else None
    if masks is not None and len(masks) != T:
        raise ContractError("mask count differs from frame count")
    os.makedirs(out_dir, exist_ok=True)
    for t in range(T):
        tiles = []
        for i, c in enumerate(clips):
            tile = c[t].pixels.copy()
            if i == 0 and masks is not None:
                m = masks[t].pixels.astype(np.uint8)
                eroded = cv2.erode(m, np.ones((3, 3), np.uint8))
                boundary = (m - eroded).astype(bool)
                tile[boundary] = (1.0, 0.0, 0.0)
            tiles.append(tile)
            if i < len(clips) - 1:
                tiles.append(np.zeros((h, sep, 3), dtype=np.float32))
        row = np.concatenate(tiles, axis=1)
        arr = np.clip(np.rint(row * 255), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(
            os.path.join(out_dir, media.FRAME_PATTERN % (t + 1))
        )
    return T


def _cmd_compare(args):
    n = compare_video(args.inputs.split(","), args.out, masks_dir=args.masks)
    print(f"wrote {n} comparison frames to {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="vidinpaint")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("make-data", help="generate a synthetic dataset")
    d.add_argument("--clips", type=int, required=True)
    d.add_argument("--frames", type=int, required=True)
    d.add_argument("--resolution", type=int)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--force", action="store_true")
    d.add_argument("--config")
    d.set_defaults(func=_cmd_make_data)

    m = sub.add_parser("make-masks", help="generate a hole-mask sequence")
    m.add_argument("--kind", choices=maskgen.MASK_KINDS, required=True)
    m.add_argument("--frames", type=int, required=True)
    m.add_argument("--height", type=int, default=64)
    m.add_argument("--width", type=int, default=64)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--seg-dir")
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_make_masks)

    c = sub.add_parser("cache-flow", help="estimate and cache flows")
    c.add_argument("--frames", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_cache_flow)

    t = sub.add_parser("train", help="run one training stage")
    t.add_argument("--stage", type=int, choices=(1, 2), required=True)
    t.add_argument("--config")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--ckpt-in")
    t.add_argument("--iterations", type=int)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=_cmd_train)

    i = sub.add_parser("infer", help="inpaint a clip")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--frames", required=True)
    i.add_argument("--masks", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--per-frame", action="store_true",
                   help="no feedback or memory (stage-1 style)")
    i.set_defaults(func=_cmd_infer)

    e = sub.add_parser("eval", help="compute metrics over a dataset")
    e.add_argument("--metric", choices=("warp", "fid", "psnr"), required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--per-frame", action="store_true")
    e.add_argument("--config")
    e.set_defaults(func=_cmd_eval)

    v = sub.add_parser("compare", help="tile clips side by side")
    v.add_argument("--inputs", required=True,
                   help="comma-separated clip directories, input first")
    v.add_argument("--masks")
    v.add_argument("--out", required=True)
    v.set_defaults(func=_cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ContractError as e:
        print(f"ERROR[contract]: {e}", file=sys.stderr)
        return 2
    except (MediaIOError, OSError) as e:
        print(f"ERROR[io]: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
