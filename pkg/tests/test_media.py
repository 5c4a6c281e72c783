import numpy as np
import pytest

from vidinpaint import media
from vidinpaint.errors import ContractError, MediaIOError


def make_frame(h=64, w=64, value=1.0):
    return media.Frame(np.full((h, w, 3), value, dtype=np.float32))


def test_load_clip_identity_decode(tmp_path):
    clip = media.Clip([make_frame() for _ in range(5)])
    media.save_clip(clip, tmp_path)
    loaded = media.load_clip(tmp_path)
    assert len(loaded) == 5
    for f in loaded.frames:
        assert np.all(f.pixels == 1.0)


def test_load_clip_empty_dir(tmp_path):
    with pytest.raises(MediaIOError, match="no frames"):
        media.load_clip(tmp_path)


def test_load_clip_mixed_dims(tmp_path):
    media.save_frame(make_frame(64, 64), tmp_path / "00001.png")
    media.save_frame(make_frame(64, 64), tmp_path / "00002.png")
    media.save_frame(make_frame(32, 32), tmp_path / "00003.png")
    with pytest.raises(ContractError, match="shape"):
        media.load_clip(tmp_path)


def test_roundtrip_quantization(tmp_path):
    rng = np.random.default_rng(0)
    frame = media.Frame(rng.uniform(0, 1, (32, 40, 3)).astype(np.float32))
    media.save_frame(frame, tmp_path / "f.png")
    back = media.load_frame(tmp_path / "f.png")
    assert np.max(np.abs(back.pixels - frame.pixels)) <= 1.0 / 255


def test_frame_invariants():
    with pytest.raises(ContractError):
        media.Frame(np.full((64, 64, 3), 2.0))
    with pytest.raises(ContractError):
        media.Frame(np.full((10, 64, 3), 0.5))
    with pytest.raises(ContractError):
        media.Frame(np.full((63, 64, 3), 0.5))
    nanfull = np.full((64, 64, 3), np.nan)
    with pytest.raises(ContractError):
        media.Frame(nanfull)


def test_resize_constant_preserved():
    f = media.Frame(np.full((32, 32, 3), 0.5, dtype=np.float32))
    out = media.resize_frame(f, 64, 64)
    assert np.allclose(out.pixels, 0.5, atol=1e-6)


def test_resize_identity():
    rng = np.random.default_rng(1)
    f = media.Frame(rng.uniform(0, 1, (32, 32, 3)).astype(np.float32))
    out = media.resize_frame(f, 32, 32)
    assert np.max(np.abs(out.pixels - f.pixels)) <= 1e-6


def brute_force_bilinear(arr, out_h, out_w):
    h, w = arr.shape[:2]
    out = np.zeros((out_h, out_w) + arr.shape[2:])
    for i in range(out_h):
        for j in range(out_w):
            y = i * (h - 1) / (out_h - 1) if out_h > 1 else 0.0
            x = j * (w - 1) / (out_w - 1) if out_w > 1 else 0.0
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = y - y0, x - x0
            out[i, j] = (
                arr[y0, x0] * (1 - fy) * (1 - fx)
                + arr[y0, x1] * (1 - fy) * fx
                + arr[y1, x0] * fy * (1 - fx)
                + arr[y1, x1] * fy * fx
            )
    return out


def test_resize_checkerboard_matches_oracle():
    checker = np.zeros((2, 2, 3), dtype=np.float32)
    checker[0, 1] = checker[1, 0] = 1.0
    up = media.resize_array(checker, 4, 4)
    oracle = brute_force_bilinear(checker, 4, 4)
    assert np.allclose(up, oracle, atol=1e-6)
    # corners keep {0,1}
    assert up[0, 0, 0] == 0.0 and up[0, 3, 0] == 1.0
    assert up[3, 0, 0] == 1.0 and up[3, 3, 0] == 0.0


def test_resize_contract():
    f = make_frame()
    with pytest.raises(ContractError):
        media.resize_frame(f, 50, 50)


def test_flow_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    flow = media.FlowField(rng.normal(size=(8, 8, 2)).astype(np.float32))
    media.write_flow(flow, tmp_path / "a.flo")
    back = media.read_flow(tmp_path / "a.flo")
    assert np.array_equal(back.vectors, flow.vectors)


def test_flow_zero_file(tmp_path):
    flow = media.FlowField(np.zeros((4, 4, 2), dtype=np.float32))
    media.write_flow(flow, tmp_path / "z.flo")
    back = media.read_flow(tmp_path / "z.flo")
    assert back.shape == (4, 4)
    assert np.all(back.vectors == 0)


def test_flow_bad_magic(tmp_path):
    (tmp_path / "bad.flo").write_bytes(b"XXXX" + b"\0" * 16)
    with pytest.raises(MediaIOError, match="magic"):
        media.read_flow(tmp_path / "bad.flo")


def test_flow_truncated(tmp_path):
    flow = media.FlowField(np.zeros((4, 4, 2), dtype=np.float32))
    media.write_flow(flow, tmp_path / "t.flo")
    data = (tmp_path / "t.flo").read_bytes()
    (tmp_path / "t.flo").write_bytes(data[:-8])
    with pytest.raises(MediaIOError, match="truncated"):
        media.read_flow(tmp_path / "t.flo")


def test_mask_roundtrip(tmp_path):
    m = media.Mask((np.arange(64 * 64).reshape(64, 64) % 3 == 0).astype(np.float32))
    media.save_mask(m, tmp_path / "m.png")
    back = media.load_mask(tmp_path / "m.png")
    assert np.array_equal(back.pixels, m.pixels)
