"""Training losses: L1 + SSIM reconstruction, flow supervision, and
occlusion-gated short/long-term warping consistency, with a weighted
total.

All terms accept torch tensors in (B,C,H,W) layout (differentiable
path) or the package's numpy-backed value types; numpy inputs yield
plain floats. The SSIM similarity itself is maximized at 1, so the
reconstruction term used for minimization is 1 - SSIM.
"""

import csv
import math
from dataclasses import dataclass, fields

import numpy as np
import torch

from .errors import ContractError
from .media import FlowField, Frame
from .warp import bilinear_warp

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
DEFAULT_WEIGHTS = (1.0, 10.0, 1.0)  # (recon, flow, warp)


def _to_img(x):
    """-> (B,C,H,W) tensor, plus whether the input was numpy-flavored."""
    if isinstance(x, Frame):
        x = x.pixels
    if isinstance(x, torch.Tensor):
        t = x
        was_np = False
    else:
        t = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float64))
        was_np = True
    if t.dim() == 3 and t.shape[-1] in (1, 3):
        t = t.permute(2, 0, 1).unsqueeze(0)
    elif t.dim() == 2:
        t = t.unsqueeze(0).unsqueeze(0)
    elif t.dim() != 4:
        raise ContractError(f"bad image shape {tuple(t.shape)}")
    return t, was_np


def _to_flow(x):
    if isinstance(x, FlowField):
        x = x.vectors
    if isinstance(x, torch.Tensor):
        t = x
    else:
        t = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float64))
    if t.dim() == 3 and t.shape[-1] == 2:
        t = t.permute(2, 0, 1).unsqueeze(0)
    elif t.dim() != 4:
        raise ContractError(f"bad flow shape {tuple(t.shape)}")
    return t


def _gaussian_window(dtype, device):
    half = SSIM_WINDOW // 2
    xs = torch.arange(-half, half + 1, dtype=dtype, device=device)
    g = torch.exp(-(xs**2) / (2 * SSIM_SIGMA**2))
    g = g / g.sum()
    return (g[:, None] * g[None, :]).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)


def ssim(pred, target):
    """Mean SSIM over windows and channels; symmetric, 1 iff identical."""
    p, was_np = _to_img(pred)
    t, _ = _to_img(target)
    if p.shape != t.shape:
        raise ContractError(f"shape mismatch {tuple(p.shape)} vs {tuple(t.shape)}")
    t = t.to(p.dtype)
    c = p.shape[1]
    win = _gaussian_window(p.dtype, p.device).repeat(c, 1, 1, 1)
    conv = lambda x: torch.nn.functional.conv2d(x, win, groups=c)
    mu_p = conv(p)
    mu_t = conv(t)
    var_p = conv(p * p) - mu_p**2
    var_t = conv(t * t) - mu_t**2
    cov = conv(p * t) - mu_p * mu_t
    num = (2 * mu_p * mu_t + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_p**2 + mu_t**2 + SSIM_C1) * (var_p + var_t + SSIM_C2)
    val = (num / den).mean()
    return float(val) if was_np else val


def recon_loss(pred, target):
    """(mean absolute error, 1 - SSIM)."""
    p, was_np = _to_img(pred)
    t, _ = _to_img(target)
    if p.shape != t.shape:
        raise ContractError(f"shape mismatch {tuple(p.shape)} vs {tuple(t.shape)}")
    l1 = (p - t.to(p.dtype)).abs().mean()
    term = 1.0 - ssim(pred, target)
    return (float(l1), float(term)) if was_np else (l1, term)


def flow_loss(pred_flows, gt_flows, gt_frames):
    """(endpoint error, warp error) averaged over t = 2..T.

    The warp term moves ground-truth frame t-1 with the PREDICTED flow
    and compares against ground-truth frame t.
    """
    if len(pred_flows) != len(gt_flows) or len(gt_frames) != len(gt_flows) + 1:
        raise ContractError("flow list lengths disagree with frame count")
    if not pred_flows:
        raise ContractError("flow loss needs at least one frame pair")
    was_np = not isinstance(
        pred_flows[0], torch.Tensor
    ) and not isinstance(getattr(pred_flows[0], "vectors", None), torch.Tensor)
    epe = 0.0
    werr = 0.0
    for i, (pf, gf) in enumerate(zip(pred_flows, gt_flows)):
        pft = _to_flow(pf)
        gft = _to_flow(gf).to(pft.dtype)
        epe = epe + (pft - gft).abs().sum(dim=1).mean()
        prev, _ = _to_img(gt_frames[i])
        cur, _ = _to_img(gt_frames[i + 1])
        warped = bilinear_warp(prev.to(pft.dtype), pft)
        werr = werr + (warped - cur.to(pft.dtype)).abs().mean()
    epe = epe / len(pred_flows)
    werr = werr / len(pred_flows)
    return (float(epe), float(werr)) if was_np else (epe, werr)


def _masked_l1(a, b, occl):
    """Mean over non-occluded pixels; 0 when none are trackable."""
    m, _ = _to_img(occl)
    m = m.to(a.dtype)
    support = m.sum() * a.shape[1]
    if float(support) == 0.0:
        return a.sum() * 0.0
    return ((a - b).abs() * m).sum() / support


def warping_loss(preds, gt_frames, gt_flows_consec, gt_flows_to_first,
                 occl_consec, occl_to_first, anchor=None):
    """(short, long) temporal consistency, averaged over t = 2..T.

    Each term compares the prediction at t with a ground-truth frame
    warped by ground-truth flow, on non-occluded pixels only. The
    long-term reference frame defaults to gt_frames[0]; pass `anchor`
    when the to-first flows point at an earlier clip frame.
    """
    T = len(preds)
    if (len(gt_frames) != T or len(gt_flows_consec) != T - 1
            or len(gt_flows_to_first) != T - 1 or len(occl_consec) != T - 1
            or len(occl_to_first) != T - 1):
        raise ContractError("sequence lengths disagree")
    if T < 2:
        raise ContractError("warping loss needs T >= 2")
    first, _ = _to_img(anchor if anchor is not None else gt_frames[0])
    short = 0.0
    long_ = 0.0
    was_np = True
    for t in range(1, T):
        pred, pred_np = _to_img(preds[t])
        was_np = was_np and pred_np
        fc = _to_flow(gt_flows_consec[t - 1]).to(pred.dtype)
        ff = _to_flow(gt_flows_to_first[t - 1]).to(pred.dtype)
        prev, _ = _to_img(gt_frames[t - 1])
        short = short + _masked_l1(
            pred, bilinear_warp(prev.to(pred.dtype), fc), occl_consec[t - 1]
        )
        long_ = long_ + _masked_l1(
            pred, bilinear_warp(first.to(pred.dtype), ff), occl_to_first[t - 1]
        )
    short = short / (T - 1)
    long_ = long_ / (T - 1)
    return (float(short), float(long_)) if was_np else (short, long_)


@dataclass
class LossReport:
    total: float
    recon_l1: float
    recon_ssim: float
    flow_epe: float
    flow_warp: float
    warp_short: float
    warp_long: float

    CSV_HEADER = ("step", "total", "recon_l1", "recon_ssim", "flow_epe",
                  "flow_warp", "warp_short", "warp_long")

    def csv_row(self, step):
        return [step] + [getattr(self, f.name) for f in fields(self)]


def total_loss(recon, flow=None, warp=None, weights=DEFAULT_WEIGHTS):
    """Weighted sum of the three loss families.

    recon = (l1, ssim_term); flow = (epe, warp_err) or None in stage 1;
    warp = (short, long) or None in stage 1. Returns (scalar, LossReport);
    the scalar stays a tensor when any input component is one.
    """
    lr, lf, lw = weights
    if lr < 0 or lf < 0 or lw < 0:
        raise ContractError("loss weights must be non-negative")
    l1, ssim_term = recon
    epe, fwarp = flow if flow is not None else (0.0, 0.0)
    short, long_ = warp if warp is not None else (0.0, 0.0)
    total = lr * (l1 + ssim_term) + lf * (epe + fwarp) + lw * (short + long_)

    def _f(x):
        return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)

    report = LossReport(
        total=_f(total), recon_l1=_f(l1), recon_ssim=_f(ssim_term),
        flow_epe=_f(epe), flow_warp=_f(fwarp),
        warp_short=_f(short), warp_long=_f(long_),
    )
    return total, report


def write_loss_csv(path, rows, append=False):
    """rows: iterable of (step, LossReport)."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as f:
        writer = csv.writer(f)
        if not append:
            writer.writerow(LossReport.CSV_HEADER)
        for step, report in rows:
            writer.writerow(report.csv_row(step))
