"""Training and inference orchestration.

Targets are sampled as recurrence windows of 5 consecutive frames; each
target sees the neighbor set {t-6, t-3, t, t+3, t+6} (stride-3, clamped
to the clip). Stage 1 trains the aggregation path per-target with the
reconstruction loss only; stage 2 threads the recurrent state through
the window, feeds the model its own previous output, and minimizes the
full loss. Inference slides the same window over the whole video
autoregressively.
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from . import losses
from .data import ClipData
from .errors import ContractError
from .maskgen import MASK_KINDS, generate
from .media import Clip, FlowField, Frame, Mask, MaskSeq
from .model import InpaintingNetwork, ModelConfig, load_checkpoint, save_checkpoint

NEIGHBOR_OFFSETS = (-6, -3, 3, 6)
RECURRENCE = 5


@dataclass
class TrainConfig:
    stage: int = 1
    lr: float = 1e-4
    betas: tuple = (0.9, 0.999)
    loss_weights: tuple = (1.0, 10.0, 1.0)
    batch_size: int = 4
    iterations: int = 20000
    seed: int = 0
    resolution: int = 64
    channels: tuple = (32, 64, 128, 256)
    checkpoint_every: int = 500
    detach_feedback: bool = False
    mask_kinds: tuple = MASK_KINDS

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ContractError(f"stage must be 1 or 2, got {self.stage}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ContractError("batch_size >= 1 and iterations >= 0 required")


@dataclass
class TrainSample:
    clip: ClipData
    start: int          # 1-based first target index
    masks: MaskSeq      # whole-clip hole masks

    def target_index(self, k):
        return min(self.start + k, len(self.clip))

    def neighbor_indices(self, t):
        return [min(max(t + off, 1), len(self.clip)) for off in NEIGHBOR_OFFSETS]


def sample_batch(dataset, rng, config: TrainConfig):
    """Uniform clip/start/mask-kind draws; deterministic given the rng."""
    if not dataset:
        raise ContractError("empty dataset")
    batch = []
    for _ in range(config.batch_size):
        clip = dataset[int(rng.integers(0, len(dataset)))]
        T = len(clip)
        if config.stage == 2 and T < RECURRENCE:
            raise ContractError(f"stage-2 needs clips of length >= {RECURRENCE}")
        start = int(rng.integers(1, max(T - RECURRENCE + 1, 1) + 1))
        kinds = [k for k in config.mask_kinds
                 if k != "object" or clip.seg_dir is not None]
        kind = kinds[int(rng.integers(0, len(kinds)))]
        seed = int(rng.integers(0, 2**31))
        h, w = clip.clip.shape
        masks = generate(kind, T, h, w, seed, segmentation_dir=clip.seg_dir)
        batch.append(TrainSample(clip=clip, start=start, masks=masks))
    return batch


# ---------------------------------------------------------------------------
# tensor assembly


def _img(frames):
    """list of HxWx3 float arrays -> (B,3,H,W) tensor."""
    return torch.from_numpy(np.stack(frames)).permute(0, 3, 1, 2).contiguous()


def _msk(masks):
    return torch.from_numpy(np.stack(masks)).unsqueeze(1).contiguous()


def _pair(batch, index_of):
    frames = [s.clip.clip[index_of(s) - 1].pixels for s in batch]
    holes = [s.masks[index_of(s) - 1].pixels for s in batch]
    return _img(frames), _msk(holes)


def _window_inputs(batch, k):
    """Batched (sources-without-prev, reference) tensors for window pos k."""
    ref = _pair(batch, lambda s: s.target_index(k))
    neighbors = []
    for j in range(len(NEIGHBOR_OFFSETS)):
        neighbors.append(
            _pair(batch, lambda s: s.neighbor_indices(s.target_index(k))[j])
        )
    return neighbors, ref


def _gt_target(batch, k):
    return _img([s.clip.clip[s.target_index(k) - 1].pixels for s in batch])


def _gt_flow(batch, k, which):
    """Batched cached flow for target position k; which in {bwd, to1}."""
    flows = []
    for s in batch:
        t = s.target_index(k)
        src = s.clip.flows_bwd if which == "bwd" else s.clip.flows_to1
        flows.append(src[t - 2].vectors)
    return torch.from_numpy(np.stack(flows)).permute(0, 3, 1, 2).contiguous()


def _gt_occl(batch, k, which):
    ms = []
    for s in batch:
        t = s.target_index(k)
        src = s.clip.occl_bwd if which == "bwd" else s.clip.occl_to1
        ms.append(src[t - 2])
    return _msk(ms)


# ---------------------------------------------------------------------------
# training


def _window_loss(model, batch, config):
    """Loss over one recurrence window for a batch of samples."""
    if config.stage == 1:
        recon_l1 = 0.0
        recon_ssim = 0.0
        for k in range(RECURRENCE):
            neighbors, ref = _window_inputs(batch, k)
            pf, pm = _pair(batch, lambda s: max(s.target_index(k) - 1, 1))
            # the fifth-stream image feeds the output blend directly, so
            # its holes must be zeroed here, not only inside the encoder
            prev = (pf * (1.0 - pm), pm)
            state = model.init_state(ref[0], ref[1])
            out = model.step(neighbors + [prev], ref, state, use_memory=False)
            l1, st = losses.recon_loss(out.output, _gt_target(batch, k))
            recon_l1 = recon_l1 + l1
            recon_ssim = recon_ssim + st
        recon = (recon_l1 / RECURRENCE, recon_ssim / RECURRENCE)
        return losses.total_loss(recon, weights=config.loss_weights)

    # stage 2: thread state, feed the model its own previous output
    first = _pair(batch, lambda s: max(s.start - 1, 1))
    state = model.init_state(first[0], first[1])
    prev_pair = (state.prev_output, first[1])
    preds, pred_flows, gts = [], [], []
    recon_l1 = 0.0
    recon_ssim = 0.0
    for k in range(RECURRENCE):
        neighbors, ref = _window_inputs(batch, k)
        out = model.step(neighbors + [prev_pair], ref, state, use_memory=True)
        gt = _gt_target(batch, k)
        l1, st = losses.recon_loss(out.output, gt)
        recon_l1 = recon_l1 + l1
        recon_ssim = recon_ssim + st
        preds.append(out.output)
        pred_flows.append(out.flow)
        gts.append(gt)
        state = out.new_state
        if config.detach_feedback:
            state = state.detached()
        prev_pair = (state.prev_output, torch.zeros_like(ref[1]))
    recon = (recon_l1 / RECURRENCE, recon_ssim / RECURRENCE)
    flow_gt = [_gt_flow(batch, k, "bwd") for k in range(1, RECURRENCE)]
    epe, werr = losses.flow_loss(pred_flows[1:], flow_gt, gts)
    anchor = _img([s.clip.clip[0].pixels for s in batch])
    short, long_ = losses.warping_loss(
        preds, gts,
        flow_gt,
        [_gt_flow(batch, k, "to1") for k in range(1, RECURRENCE)],
        [_gt_occl(batch, k, "bwd") for k in range(1, RECURRENCE)],
        [_gt_occl(batch, k, "to1") for k in range(1, RECURRENCE)],
        anchor=anchor,
    )
    return losses.total_loss(recon, (epe, werr), (short, long_),
                             weights=config.loss_weights)


def train(config: TrainConfig, dataset, checkpoint_in=None, out_dir="."):
    """Run one training stage; returns the final checkpoint path."""
    if config.stage == 2 and checkpoint_in is None:
        raise ContractError("stage-2 training requires a stage-1 checkpoint")
    if not dataset:
        raise ContractError("empty dataset")
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(config.seed)
    if checkpoint_in is not None:
        model = load_checkpoint(checkpoint_in,
                                expected_config=ModelConfig(channels=config.channels))
    else:
        model = InpaintingNetwork(ModelConfig(channels=config.channels))
    model.train()
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, betas=config.betas)
    rows = []
    final = os.path.join(out_dir, "ckpt_final.pt")
    for it in range(config.iterations):
        batch = sample_batch(dataset, rng, config)
        total, report = _window_loss(model, batch, config)
        if not torch.isfinite(total):
            dump = os.path.join(out_dir, "nan_dump.json")
            with open(dump, "w") as f:
                json.dump(
                    {
                        "iteration": it,
                        "report": asdict(report),
                        "batch": [
                            {"clip": s.clip.name, "start": s.start} for s in batch
                        ],
                    },
                    f, indent=2,
                )
            raise RuntimeError(f"non-finite loss at iteration {it}; see {dump}")
        opt.zero_grad()
        total.backward()
        opt.step()
        rows.append((it, report))
        if config.checkpoint_every and (it + 1) % config.checkpoint_every == 0:
            save_checkpoint(model, os.path.join(out_dir, f"ckpt_{it + 1:06d}.pt"))
    save_checkpoint(model, final)
    losses.write_loss_csv(os.path.join(out_dir, "loss_log.csv"), rows)
    return final


# ---------------------------------------------------------------------------
# inference


def infer(model: InpaintingNetwork, clip: Clip, masks: MaskSeq,
          per_frame_mode=False):
    """Autoregressive sliding-window inpainting of a whole clip.

    per_frame_mode drops feedback and memory (stage-1 style): the fifth
    stream sees the masked previous input frame and the state is reset
    every step. Returns (outputs, flows, comp_mask_sequences).
    """
    if len(clip) != len(masks):
        raise ContractError(
            f"clip has {len(clip)} frames but {len(masks)} masks given"
        )
    model.eval()
    T = len(clip)

    def pair(t):
        f = _img([clip[t - 1].pixels])
        m = _msk([masks[t - 1].pixels])
        return f, m

    outputs, flows, comp_masks = [], [], []
    with torch.no_grad():
        state = model.init_state(*pair(1))
        prev_pair = (state.prev_output, pair(1)[1])
        for t in range(1, T + 1):
            ref = pair(t)
            neighbors = [pair(min(max(t + off, 1), T)) for off in NEIGHBOR_OFFSETS]
            if per_frame_mode:
                tp = max(t - 1, 1)
                fifth = (pair(tp)[0] * (1.0 - pair(tp)[1]), pair(tp)[1])
                state = model.init_state(*ref)
                out = model.step(neighbors + [fifth], ref, state, use_memory=False)
            else:
                out = model.step(neighbors + [prev_pair], ref, state, use_memory=True)
                state = out.new_state
                prev_pair = (state.prev_output, torch.zeros_like(ref[1]))
            img = out.output[0].permute(1, 2, 0).numpy()
            outputs.append(Frame(np.clip(img, 0.0, 1.0).astype(np.float32)))
            flows.append(FlowField(
                out.flow[0].permute(1, 2, 0).numpy().astype(np.float32)
            ))
            comp_masks.append(
                {s: m[0, 0].numpy() for s, m in out.comp_masks.items()}
            )
    return Clip(outputs), flows, comp_masks


def in_hole_l1(outputs: Clip, targets: Clip, masks: MaskSeq) -> float:
    """Mean absolute error restricted to hole pixels."""
    num = 0.0
    den = 0.0
    for o, t, m in zip(outputs.frames, targets.frames, masks.masks):
        hole = m.pixels[..., None]
        num += float(np.abs((o.pixels - t.pixels) * hole).sum())
        den += float(hole.sum()) * 3.0
    return num / den if den else 0.0
