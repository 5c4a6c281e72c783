"""Quantitative metrics: occlusion-masked flow warping error, video
Frechet distance over clip-level spatio-temporal features, and
PSNR/SSIM utilities.

The default feature extractor is a fixed-seed random-weight 3D
convolutional encoder with global average pooling; a pretrained
extractor can be plugged in behind the same callable interface
(clip -> 1-D feature vector).
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ContractError
from .losses import ssim as ssim_metric
from .media import Clip
from .warp import bilinear_warp

PSNR_CAP_DB = 99.0
FID_EXTRACTOR_SEED = 1234


def warping_error(output: Clip, flows, occl) -> float:
    """Mean over t of the occlusion-masked per-pixel, per-channel L1
    between frame t and the flow-warped frame t-1. Fully occluded
    frames are excluded from the mean."""
    if len(flows) != len(output) - 1 or len(occl) != len(flows):
        raise ContractError("flow/occlusion counts must be len(clip) - 1")
    terms = []
    for t in range(1, len(output)):
        m = np.asarray(occl[t - 1], dtype=np.float64)
        support = m.sum()
        if support == 0:
            continue
        vec = flows[t - 1].vectors if hasattr(flows[t - 1], "vectors") else flows[t - 1]
        warped = bilinear_warp(output[t - 1].pixels.astype(np.float64), vec)
        diff = np.abs(output[t].pixels.astype(np.float64) - warped).sum(axis=2)
        terms.append(float((diff * m).sum() / (3.0 * support)))
    return float(np.mean(terms)) if terms else 0.0


def default_extractor(seed=FID_EXTRACTOR_SEED, channels=(8, 16, 32)):
    """Fixed-seed random-weight 3D conv encoder; clip -> feature vector."""
    g = torch.Generator().manual_seed(seed)
    layers = []
    cin = 3
    weights = []
    for cout in channels:
        w = torch.randn(cout, cin, 3, 3, 3, generator=g) / np.sqrt(cin * 27)
        weights.append(w)
        cin = cout

    def extract(clip: Clip):
        x = torch.from_numpy(
            np.stack([f.pixels for f in clip.frames]).astype(np.float32)
        ).permute(3, 0, 1, 2).unsqueeze(0)  # (1, 3, T, H, W)
        for i, w in enumerate(weights):
            stride = (1, 2, 2) if i else (1, 1, 1)
            x = torch.nn.functional.conv3d(x, w, stride=stride, padding=1)
            x = torch.nn.functional.leaky_relu(x, 0.2)
        return x.mean(dim=(2, 3, 4)).squeeze(0).numpy().astype(np.float64)

    return extract


def _sqrtm_psd(mat):
    """Symmetric matrix square root, negative eigenvalues clamped to 0."""
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(feats_a, feats_b) -> float:
    """Closed-form Frechet distance between two Gaussian fits.

    feats_*: (N, D) arrays, N >= 2 (unbiased covariance)."""
    a = np.asarray(feats_a, dtype=np.float64)
    b = np.asarray(feats_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 2 or b.shape[0] < 2:
        raise ContractError("need at least 2 feature vectors per set")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False).reshape(a.shape[1], a.shape[1])
    cov_b = np.cov(b, rowvar=False).reshape(b.shape[1], b.shape[1])
    # Tr sqrt(cov_a cov_b) via the symmetric form sqrt(B) A sqrt(B)
    sb = _sqrtm_psd(cov_b)
    cross = _sqrtm_psd(sb @ cov_a @ sb)
    d = float(np.sum((mu_a - mu_b) ** 2)
              + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    return max(d, 0.0)


def video_fid(outputs, references, extractor=None, standardize=True) -> float:
    """Frechet distance between per-clip feature sets.

    With `standardize`, features are shifted/scaled per dimension by the
    reference-set statistics first (random-weight extractors have
    arbitrary scales)."""
    if len(outputs) < 2 or len(references) < 2:
        raise ContractError("need at least 2 clips per set")
    extractor = extractor or default_extractor()
    fo = np.stack([extractor(c) for c in outputs])
    fr = np.stack([extractor(c) for c in references])
    if standardize:
        mu = fr.mean(axis=0)
        sd = np.maximum(fr.std(axis=0), 1e-8)
        fo = (fo - mu) / sd
        fr = (fr - mu) / sd
    return frechet_distance(fo, fr)


def psnr_ssim(output: Clip, target: Clip):
    """(mean PSNR in dB with peak 1.0 capped at 99, mean SSIM)."""
    if len(output) != len(target) or output.shape != target.shape:
        raise ContractError("clip shapes disagree")
    psnrs, ssims = [], []
    for o, t in zip(output.frames, target.frames):
        mse = float(np.mean((o.pixels.astype(np.float64) - t.pixels) ** 2))
        psnrs.append(PSNR_CAP_DB if mse <= 1e-12 else
                     min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))
        ssims.append(ssim_metric(o.pixels, t.pixels))
    return float(np.mean(psnrs)), float(np.mean(ssims))


@dataclass
class MetricReport:
    """Aggregate plus one row per video."""

    warping_error: float = float("nan")
    fid: float = float("nan")
    psnr: float = float("nan")
    ssim: float = float("nan")
    per_video: list = field(default_factory=list)  # (name, metric, value)
