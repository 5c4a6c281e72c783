import numpy as np
import pytest

from vidinpaint import evaluate as ev
from vidinpaint.errors import ContractError
from vidinpaint.media import Clip, FlowField, Frame


def rand_clip(seed, T=4, h=32, w=32):
    rng = np.random.default_rng(seed)
    return Clip([Frame(rng.uniform(0, 1, (h, w, 3)).astype(np.float32))
                 for _ in range(T)])


def static_clip(px, T=4):
    return Clip([Frame(px) for _ in range(T)])


def test_warping_error_static_zero():
    rng = np.random.default_rng(0)
    clip = static_clip(rng.uniform(0, 1, (32, 32, 3)).astype(np.float32))
    flows = [FlowField(np.zeros((32, 32, 2), np.float32))] * 3
    occl = [np.ones((32, 32))] * 3
    assert ev.warping_error(clip, flows, occl) == 0.0


def test_warping_error_constant_offset():
    base = np.full((32, 32, 3), 0.4, dtype=np.float32)
    frames = [Frame(base), Frame(base + 0.1), Frame(base), Frame(base + 0.1)]
    clip = Clip(frames)
    flows = [FlowField(np.zeros((32, 32, 2), np.float32))] * 3
    occl = [np.ones((32, 32))] * 3
    assert abs(ev.warping_error(clip, flows, occl) - 0.1) <= 1e-6


def test_warping_error_ignores_fully_occluded():
    rng = np.random.default_rng(1)
    clip = static_clip(rng.uniform(0, 1, (32, 32, 3)).astype(np.float32), T=3)
    flows = [FlowField(np.zeros((32, 32, 2), np.float32))] * 2
    base = ev.warping_error(clip, flows, [np.ones((32, 32))] * 2)
    # appending a fully-occluded frame pair leaves the metric unchanged
    clip2 = Clip(clip.frames + [rand_clip(2, T=1, h=32, w=32)[0]])
    flows2 = flows + [FlowField(np.zeros((32, 32, 2), np.float32))]
    occl2 = [np.ones((32, 32))] * 2 + [np.zeros((32, 32))]
    assert ev.warping_error(clip2, flows2, occl2) == base


def test_warping_error_length_mismatch():
    clip = rand_clip(3)
    with pytest.raises(ContractError):
        ev.warping_error(clip, [], [])


def test_fid_identical_sets():
    clips = [rand_clip(s) for s in range(4)]
    assert ev.video_fid(clips, clips) <= 1e-6


def test_fid_symmetric():
    a = [rand_clip(s) for s in range(4)]
    b = [rand_clip(s + 10) for s in range(4)]
    d1 = ev.video_fid(a, b, standardize=False)
    d2 = ev.video_fid(b, a, standardize=False)
    assert abs(d1 - d2) <= 1e-8


def test_fid_closed_form_1d():
    # A = {0, 2}: mu 1, unbiased var 2; B = {1, 3}: mu 2, var 2
    a = np.array([[0.0], [2.0]])
    b = np.array([[1.0], [3.0]])
    d = ev.frechet_distance(a, b)
    assert abs(d - 1.0) <= 1e-8


def test_fid_too_few_clips():
    with pytest.raises(ContractError):
        ev.video_fid([rand_clip(0)], [rand_clip(1), rand_clip(2)])
    with pytest.raises(ContractError):
        ev.frechet_distance(np.zeros((1, 3)), np.zeros((4, 3)))


def test_extractor_deterministic():
    ex1 = ev.default_extractor()
    ex2 = ev.default_extractor()
    c = rand_clip(5)
    assert np.array_equal(ex1(c), ex2(c))


def test_psnr_identity_capped():
    c = rand_clip(6)
    psnr, s = ev.psnr_ssim(c, c)
    assert psnr == 99.0
    assert abs(s - 1.0) <= 1e-9


def test_psnr_constant_offset():
    base = np.full((32, 32, 3), 0.5, dtype=np.float32)
    a = static_clip(base)
    b = static_clip(base + 0.1)
    psnr, _ = ev.psnr_ssim(b, a)
    assert abs(psnr - 20.0) <= 1e-3


def test_psnr_ssim_symmetric():
    a, b = rand_clip(7), rand_clip(8)
    _, s1 = ev.psnr_ssim(a, b)
    _, s2 = ev.psnr_ssim(b, a)
    assert abs(s1 - s2) <= 1e-6


def test_psnr_shape_mismatch():
    with pytest.raises(ContractError):
        ev.psnr_ssim(rand_clip(0, T=3), rand_clip(1, T=4))
