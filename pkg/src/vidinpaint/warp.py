"""Differentiable backward warping and flow utilities.

Convention everywhere: the value at target pixel p is sampled from the
source at p + flow(p). Out-of-bounds samples clamp to the border. All
ops accept torch tensors (differentiable path) or numpy arrays
(converted, returned as numpy).
"""

import numpy as np
import torch

from .errors import ContractError

# forward-backward consistency constants (occlusion test)
OCC_ALPHA = 0.01
OCC_BETA = 0.5


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x, False
    return torch.from_numpy(np.ascontiguousarray(x)), True


def bilinear_warp(source, flow):
    """Backward-warp `source` by `flow`.

    source: (H,W), (H,W,C), or batched torch (B,C,H,W); flow: (H,W,2)
    matching spatially, or (B,2,H,W) for the batched form. Differentiable
    w.r.t. both arguments.
    """
    src, src_np = _as_tensor(source)
    flo, _ = _as_tensor(flow)
    if src.dim() == 4:
        out = _warp_bchw(src, flo)
        return out
    # unbatched layouts: HxW or HxWxC with HxWx2 flow
    if flo.dim() != 3 or flo.shape[-1] != 2:
        raise ContractError(f"flow must be HxWx2, got {tuple(flo.shape)}")
    squeeze_c = src.dim() == 2
    if squeeze_c:
        src = src.unsqueeze(-1)
    if src.dim() != 3:
        raise ContractError(f"source must be HxW or HxWxC, got {tuple(src.shape)}")
    if src.shape[:2] != flo.shape[:2]:
        raise ContractError(
            f"source {tuple(src.shape[:2])} and flow {tuple(flo.shape[:2])} disagree"
        )
    flo = flo.to(src.dtype)
    out = _warp_bchw(
        src.permute(2, 0, 1).unsqueeze(0), flo.permute(2, 0, 1).unsqueeze(0)
    )[0].permute(1, 2, 0)
    if squeeze_c:
        out = out.squeeze(-1)
    return out.numpy() if src_np else out


def _warp_bchw(src, flo):
    """src (B,C,H,W), flo (B,2,H,W) with channels (dx,dy)."""
    if src.shape[0] != flo.shape[0] or src.shape[2:] != flo.shape[2:]:
        raise ContractError(
            f"source {tuple(src.shape)} and flow {tuple(flo.shape)} disagree"
        )
    b, c, h, w = src.shape
    dtype = src.dtype
    ys = torch.arange(h, dtype=dtype, device=src.device).view(1, h, 1)
    xs = torch.arange(w, dtype=dtype, device=src.device).view(1, 1, w)
    x = xs + flo[:, 0]
    y = ys + flo[:, 1]
    x = x.clamp(0, w - 1)
    y = y.clamp(0, h - 1)
    x0 = x.floor().clamp(0, w - 2) if w > 1 else torch.zeros_like(x)
    y0 = y.floor().clamp(0, h - 2) if h > 1 else torch.zeros_like(y)
    fx = (x - x0).unsqueeze(1)
    fy = (y - y0).unsqueeze(1)
    x0l = x0.long()
    y0l = y0.long()
    idx00 = (y0l * w + x0l).view(b, 1, -1).expand(b, c, h * w)
    flat = src.reshape(b, c, h * w)
    dx = 1 if w > 1 else 0
    dy = w if h > 1 else 0
    v00 = flat.gather(2, idx00).view(b, c, h, w)
    v01 = flat.gather(2, idx00 + dx).view(b, c, h, w)
    v10 = flat.gather(2, idx00 + dy).view(b, c, h, w)
    v11 = flat.gather(2, idx00 + dy + dx).view(b, c, h, w)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def upsample_flow_2x(flow):
    """Double spatial size bilinearly and double displacement values."""
    flo, was_np = _as_tensor(flow)
    if flo.dim() == 3 and flo.shape[-1] == 2:
        t = flo.permute(2, 0, 1).unsqueeze(0)
        out = _upsample_bchw(t)[0].permute(1, 2, 0)
        return out.numpy() if was_np else out
    if flo.dim() == 4 and flo.shape[1] == 2:
        return _upsample_bchw(flo)
    raise ContractError(f"flow must be HxWx2 or Bx2xHxW, got {tuple(flo.shape)}")


def _upsample_bchw(flo):
    out = torch.nn.functional.interpolate(
        flo, scale_factor=2, mode="bilinear", align_corners=True
    )
    return out * 2.0


def occlusion_mask(flow_fwd, flow_bwd, alpha=OCC_ALPHA, beta=OCC_BETA):
    """Forward-backward consistency check.

    Pixel p is kept (mask 1) unless
    |fb(p) + ff(p + fb(p))|^2 > alpha * (|fb(p)|^2 + |ff(p + fb(p))|^2) + beta,
    where fb is the backward and ff the forward flow. Returns an HxW
    float array of {0,1} with 1 = non-occluded.
    """
    fwd = np.asarray(flow_fwd, dtype=np.float64)
    bwd = np.asarray(flow_bwd, dtype=np.float64)
    if fwd.shape != bwd.shape or fwd.ndim != 3 or fwd.shape[2] != 2:
        raise ContractError(
            f"flow shapes disagree or malformed: {fwd.shape} vs {bwd.shape}"
        )
    fwd_at = bilinear_warp(fwd, bwd)
    resid = np.sum((bwd + fwd_at) ** 2, axis=2)
    bound = alpha * (np.sum(bwd**2, axis=2) + np.sum(fwd_at**2, axis=2)) + beta
    return (resid <= bound).astype(np.float32)
