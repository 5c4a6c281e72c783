import numpy as np
import pytest

from vidinpaint import flow_oracle as fo
from vidinpaint.errors import ContractError
from vidinpaint.media import Frame
from vidinpaint.warp import bilinear_warp


def textured_frame(seed, h=64, w=64):
    rng = np.random.default_rng(seed)
    from scipy.ndimage import gaussian_filter

    px = gaussian_filter(rng.uniform(0, 1, (h, w, 3)), (1.5, 1.5, 0))
    return Frame(np.clip(px, 0, 1).astype(np.float32))


def test_identical_frames_near_zero_flow():
    f = textured_frame(0)
    flow = fo.estimate_flow(f, f)
    mag = np.sqrt(np.sum(flow.vectors.astype(np.float64) ** 2, axis=2))
    assert mag.mean() < 0.1


def test_translation_recovered():
    f = textured_frame(1)
    shifted = np.roll(f.pixels, 2, axis=1)  # content moves right by 2
    flow = fo.estimate_flow(Frame(shifted), f)
    interior = flow.vectors[8:-8, 8:-8]
    assert abs(interior[..., 0].mean() - (-2.0)) <= 0.5


def test_constant_frames_no_nan():
    a = Frame(np.full((32, 32, 3), 0.5, dtype=np.float32))
    flow = fo.estimate_flow(a, a)
    assert np.all(np.isfinite(flow.vectors))


def test_dim_mismatch():
    a = Frame(np.zeros((32, 32, 3), dtype=np.float32))
    b = Frame(np.zeros((64, 64, 3), dtype=np.float32))
    with pytest.raises(ContractError):
        fo.estimate_flow(a, b)


def test_synth_static():
    spec = fo.SynthSpec(64, 64, 4, velocity=(0.0, 0.0))
    clip, flows = fo.synth_sequence(spec, seed=0)
    assert len(clip) == 4 and len(flows) == 3
    for t in range(1, 4):
        assert np.array_equal(clip[t].pixels, clip[0].pixels)
    for f in flows:
        assert np.all(f.vectors == 0)


def test_synth_translation_flow_values():
    spec = fo.SynthSpec(64, 64, 3, velocity=(1.0, 0.0))
    clip, flows = fo.synth_sequence(spec, seed=7)
    support = fo.synth_patch_support(spec, 1).astype(bool)
    assert np.all(flows[0].vectors[support][:, 0] == -1.0)
    assert np.all(flows[0].vectors[~support] == 0.0)


def test_synth_deterministic():
    spec = fo.SynthSpec(64, 64, 5, velocity=(2.0, 1.0))
    c1, f1 = fo.synth_sequence(spec, seed=3)
    c2, f2 = fo.synth_sequence(spec, seed=3)
    for a, b in zip(c1.frames, c2.frames):
        assert np.array_equal(a.pixels, b.pixels)
    for a, b in zip(f1, f2):
        assert np.array_equal(a.vectors, b.vectors)


def test_synth_velocity_contract():
    with pytest.raises(ContractError):
        fo.SynthSpec(64, 64, 3, velocity=(40.0, 0.0))


def test_synth_warp_consistency_integer_velocity():
    spec = fo.SynthSpec(64, 64, 4, velocity=(2.0, 0.0))
    clip, flows = fo.synth_sequence(spec, seed=5)
    for t in range(1, 4):
        warped = bilinear_warp(clip[t - 1].pixels.astype(np.float64), flows[t - 1].vectors)
        # pixels revealed behind the patch (dis-occlusion) are excluded
        prev = fo.synth_patch_support(spec, t - 1).astype(bool)
        cur = fo.synth_patch_support(spec, t).astype(bool)
        ok = ~(prev & ~cur)
        err = np.abs(warped - clip[t].pixels.astype(np.float64))[ok]
        assert err.max() <= 1e-6


def test_estimate_flow_epe_on_synth():
    spec = fo.SynthSpec(64, 64, 3, velocity=(3.0, 0.0), patch_frac=0.5)
    clip, flows = fo.synth_sequence(spec, seed=11)
    est = fo.estimate_flow(clip[1], clip[0])
    interior = slice(8, -8)
    diff = est.vectors[interior, interior] - flows[0].vectors[interior, interior]
    epe = np.sqrt(np.sum(diff.astype(np.float64) ** 2, axis=2)).mean()
    assert epe <= 0.5
