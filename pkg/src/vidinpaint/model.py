"""The inpainting network: 6-tower encoder (5 weight-shared source
streams + 1 reference stream), coarse-to-fine feature-flow subnets with
residual refinement, 5x3x3 temporal aggregation, mask subnets for
learnable feature composition, a ConvLSTM memory at scale 1/8, and a
skip-composed decoder.

One `step` consumes five source (frame, mask) pairs plus the reference
pair and the recurrent state, and produces the inpainted frame, the
full-resolution flow for the previous-output stream, the composition
masks at every scale, and the updated state. The fifth source pair is
the previous output (stage 2) or the masked previous input frame
(stage 1).
"""

from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ContractError
from .warp import _warp_bchw, upsample_flow_2x

FORMAT_VERSION = 1
SCALES = (8, 4, 2)  # denominators of the composed scales; 1 handled apart
NUM_SOURCES = 5


@dataclass(frozen=True)
class ModelConfig:
    channels: tuple = (32, 64, 128, 256)
    flow_hidden: int = 32
    mask_hidden: int = 32
    leak: float = 0.2
    # optional per-channel input normalization, off by default
    input_shift: tuple = (0.0, 0.0, 0.0)
    input_scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.channels) != 4 or any(c < 1 for c in self.channels):
            raise ContractError(f"need 4 positive channel widths, got {self.channels}")
        if any(s == 0 for s in self.input_scale):
            raise ContractError("input_scale entries must be nonzero")


def _conv(cin, cout, stride=1):
    return nn.Conv2d(cin, cout, 3, stride=stride, padding=1)


class Encoder(nn.Module):
    """4-channel (RGB + mask) input -> feature pyramid at 1, 1/2, 1/4, 1/8."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c1, c2, c3, c4 = cfg.channels
        self.act = nn.LeakyReLU(cfg.leak)
        self.register_buffer(
            "shift", torch.tensor(cfg.input_shift).view(1, 3, 1, 1), persistent=False
        )
        self.register_buffer(
            "scale", torch.tensor(cfg.input_scale).view(1, 3, 1, 1), persistent=False
        )
        self.s1a, self.s1b = _conv(4, c1), _conv(c1, c1)
        self.s2a, self.s2b = _conv(c1, c2, 2), _conv(c2, c2)
        self.s3a, self.s3b = _conv(c2, c3, 2), _conv(c3, c3)
        self.s4a, self.s4b = _conv(c3, c4, 2), _conv(c4, c4)

    def forward(self, frame, mask):
        if frame.shape[2] % 8 or frame.shape[3] % 8:
            raise ContractError(f"input dims must divide by 8, got {frame.shape[2:]}")
        normed = (frame - self.shift.to(frame.dtype)) / self.scale.to(frame.dtype)
        x = torch.cat([normed * (1.0 - mask), mask], dim=1)
        f1 = self.act(self.s1b(self.act(self.s1a(x))))
        f2 = self.act(self.s2b(self.act(self.s2a(f1))))
        f3 = self.act(self.s3b(self.act(self.s3a(f2))))
        f4 = self.act(self.s4b(self.act(self.s4a(f3))))
        return {1: f1, 2: f2, 4: f3, 8: f4}


class FlowSubnet(nn.Module):
    """Four plain convolutions -> 2-channel flow (that scale's pixel units)."""

    def __init__(self, cin, hidden, leak):
        super().__init__()
        self.net = nn.Sequential(
            _conv(cin, hidden), nn.LeakyReLU(leak),
            _conv(hidden, hidden), nn.LeakyReLU(leak),
            _conv(hidden, hidden), nn.LeakyReLU(leak),
            _conv(hidden, 2),
        )
        # start from the identity alignment so early warps are stable
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)

    def forward(self, x):
        return self.net(x)


class MaskSubnet(nn.Module):
    """Three convolutions over |F_s' - F_r| -> single-channel gate in (0,1)."""

    def __init__(self, cin, hidden, leak):
        super().__init__()
        self.net = nn.Sequential(
            _conv(cin, hidden), nn.LeakyReLU(leak),
            _conv(hidden, hidden), nn.LeakyReLU(leak),
            _conv(hidden, 1),
        )

    def forward(self, diff):
        return torch.sigmoid(self.net(diff))


class Aggregate(nn.Module):
    """5x3x3 (THW) convolution collapsing the five aligned streams."""

    def __init__(self, channels):
        super().__init__()
        self.conv = nn.Conv3d(channels, channels, (NUM_SOURCES, 3, 3),
                              padding=(0, 1, 1))

    def forward(self, streams):
        if len(streams) != NUM_SOURCES:
            raise ContractError(f"need {NUM_SOURCES} streams, got {len(streams)}")
        x = torch.stack(streams, dim=2)  # (B, C, T, H, W)
        return self.conv(x).squeeze(2)


class ConvLSTM(nn.Module):
    """Single convolutional LSTM cell."""

    def __init__(self, channels):
        super().__init__()
        self.gates = _conv(2 * channels, 4 * channels)
        self.channels = channels

    def forward(self, x, h, c):
        i, f, o, g = torch.chunk(
            self.gates(torch.cat([x, h], dim=1)), 4, dim=1
        )
        c_new = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h_new = torch.sigmoid(o) * torch.tanh(c_new)
        return h_new, c_new


class Decoder(nn.Module):
    """Upsamples x2 three times, composing skip features at 1/4 and 1/2."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c1, c2, c3, c4 = cfg.channels
        self.act = nn.LeakyReLU(cfg.leak)
        self.d8 = _conv(c4, c4)
        self.up4 = _conv(c4, c3)
        self.m4 = _conv(2 * c3, c3)
        self.up2 = _conv(c3, c2)
        self.m2 = _conv(2 * c2, c2)
        self.up1 = _conv(c2, c1)
        self.m1 = _conv(c1, c1)
        self.out = _conv(c1, 3)

    @staticmethod
    def _up(x):
        return F.interpolate(x, scale_factor=2, mode="nearest")

    def forward(self, bottom, skip4, skip2):
        x = self.act(self.d8(bottom))
        x = self.act(self.up4(self._up(x)))
        x = self.act(self.m4(torch.cat([x, skip4], dim=1)))
        x = self.act(self.up2(self._up(x)))
        x = self.act(self.m2(torch.cat([x, skip2], dim=1)))
        x = self.act(self.up1(self._up(x)))
        finest = self.act(self.m1(x))
        raw = torch.sigmoid(self.out(finest))
        return raw, finest


@dataclass
class ModelState:
    """Recurrent carry: ConvLSTM arrays at 1/8 plus the previous output."""

    lstm_hidden: torch.Tensor
    lstm_cell: torch.Tensor
    prev_output: torch.Tensor

    def detached(self):
        return ModelState(self.lstm_hidden.detach(), self.lstm_cell.detach(),
                          self.prev_output.detach())


@dataclass
class StepOutput:
    output: torch.Tensor
    raw_output: torch.Tensor
    flow: torch.Tensor
    comp_masks: dict = field(default_factory=dict)
    new_state: ModelState = None


class InpaintingNetwork(nn.Module):
    def __init__(self, config: ModelConfig = None):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        c1, c2, c3, c4 = cfg.channels
        self.source_encoder = Encoder(cfg)
        self.reference_encoder = Encoder(cfg)
        fh, mh, lk = cfg.flow_hidden, cfg.mask_hidden, cfg.leak
        self.flow_subnet_8 = FlowSubnet(2 * c4, fh, lk)
        self.flow_subnet_4 = FlowSubnet(2 * c3 + 2, fh, lk)
        self.flow_subnet_2 = FlowSubnet(2 * c2 + 2, fh, lk)
        self.flow_subnet_1 = FlowSubnet(2 * c1 + 2, fh, lk)
        self.mask_subnet_8 = MaskSubnet(c4, mh, lk)
        self.mask_subnet_4 = MaskSubnet(c3, mh, lk)
        self.mask_subnet_2 = MaskSubnet(c2, mh, lk)
        self.mask_subnet_1 = MaskSubnet(c1, mh, lk)
        self.aggregate_8 = Aggregate(c4)
        self.aggregate_4 = Aggregate(c3)
        self.aggregate_2 = Aggregate(c2)
        self.conv_lstm = ConvLSTM(c4)
        self.decoder = Decoder(cfg)

    # -- state ------------------------------------------------------------

    def init_state(self, first_frame, first_mask):
        """Zero LSTM arrays; previous output = first frame with holes zeroed."""
        b, _, h, w = first_frame.shape
        c4 = self.config.channels[3]
        kw = dict(dtype=first_frame.dtype, device=first_frame.device)
        return ModelState(
            lstm_hidden=torch.zeros(b, c4, h // 8, w // 8, **kw),
            lstm_cell=torch.zeros(b, c4, h // 8, w // 8, **kw),
            prev_output=first_frame * (1.0 - first_mask),
        )

    # -- sub-steps ---------------------------------------------------------

    def estimate_feature_flow(self, src, ref, full_res=False):
        """Coarse-to-fine flows aligning `src` features to `ref` features.

        Returns {8: flow_1/8, 4: flow_1/4, 2: flow_1/2} and, when
        full_res is set, also key 1 with the full-resolution flow.
        """
        flow8 = self.flow_subnet_8(torch.cat([src[8], ref[8]], dim=1))
        flows = {8: flow8}
        for denom, subnet in ((4, self.flow_subnet_4), (2, self.flow_subnet_2)):
            up = upsample_flow_2x(flows[denom * 2])
            warped = _warp_bchw(src[denom], up)
            flows[denom] = up + subnet(torch.cat([warped, ref[denom], up], dim=1))
        if full_res:
            up = upsample_flow_2x(flows[2])
            warped = _warp_bchw(src[1], up)
            flows[1] = up + self.flow_subnet_1(torch.cat([warped, ref[1], up], dim=1))
        return flows

    def compose(self, f_agg, f_ref, mask_subnet):
        m = mask_subnet((f_agg - f_ref).abs())
        return (1.0 - m) * f_ref + m * f_agg, m

    # -- full step ---------------------------------------------------------

    def step(self, sources, reference, state: ModelState,
             use_memory=True) -> StepOutput:
        """sources: five (frame, mask) pairs, each (B,3,H,W) / (B,1,H,W);
        the last pair is the previous-output stream. reference is the
        (frame, mask) pair for the frame being inpainted."""
        if len(sources) != NUM_SOURCES:
            raise ContractError(f"need {NUM_SOURCES} source pairs, got {len(sources)}")
        ref_frame, ref_mask = reference
        b, _, h, w = ref_frame.shape
        if state.lstm_hidden.shape[2:] != (h // 8, w // 8):
            raise ContractError(
                f"state spatial dims {tuple(state.lstm_hidden.shape[2:])} "
                f"inconsistent with input {h}x{w}"
            )
        ref_feats = self.reference_encoder(ref_frame, ref_mask)
        warped = {s: [] for s in SCALES}
        flow_full = None
        prev_f1 = None
        for i, (frame, mask) in enumerate(sources):
            feats = self.source_encoder(frame, mask)
            is_prev = i == NUM_SOURCES - 1
            flows = self.estimate_feature_flow(feats, ref_feats, full_res=is_prev)
            for s in SCALES:
                warped[s].append(_warp_bchw(feats[s], flows[s]))
            if is_prev:
                flow_full = flows[1]
                prev_f1 = feats[1]
        comp, masks = {}, {}
        for s, agg, msub in (
            (8, self.aggregate_8, self.mask_subnet_8),
            (4, self.aggregate_4, self.mask_subnet_4),
            (2, self.aggregate_2, self.mask_subnet_2),
        ):
            f_agg = agg(warped[s])
            comp[s], masks[s] = self.compose(f_agg, ref_feats[s], msub)
        if use_memory:
            h_new, c_new = self.conv_lstm(comp[8], state.lstm_hidden, state.lstm_cell)
            bottom = h_new
        else:
            h_new, c_new = state.lstm_hidden, state.lstm_cell
            bottom = comp[8]
        raw, finest = self.decoder(bottom, comp[4], comp[2])
        prev_img = sources[-1][0]
        warped_prev_f1 = _warp_bchw(prev_f1, flow_full)
        m1 = self.mask_subnet_1((finest - warped_prev_f1).abs())
        masks[1] = m1
        warped_prev = _warp_bchw(prev_img, flow_full)
        output = (1.0 - m1) * raw + m1 * warped_prev
        new_state = ModelState(h_new, c_new, output)
        return StepOutput(output=output, raw_output=raw, flow=flow_full,
                          comp_masks=masks, new_state=new_state)

    # -- bookkeeping -------------------------------------------------------

    GROUPS = (
        "source_encoder", "reference_encoder",
        "flow_subnet_8", "flow_subnet_4", "flow_subnet_2", "flow_subnet_1",
        "mask_subnet_8", "mask_subnet_4", "mask_subnet_2", "mask_subnet_1",
        "aggregate_8", "aggregate_4", "aggregate_2",
        "conv_lstm", "decoder",
    )

    def count_parameters(self):
        counts = {}
        for g in self.GROUPS:
            counts[g] = sum(p.numel() for p in getattr(self, g).parameters())
        total = sum(p.numel() for p in self.parameters())
        if sum(counts.values()) != total:
            raise AssertionError("parameter groups do not partition the model")
        return counts


def save_checkpoint(model: InpaintingNetwork, path):
    groups = {
        g: getattr(model, g).state_dict() for g in InpaintingNetwork.GROUPS
    }
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "config": asdict(model.config),
            "groups": groups,
        },
        path,
    )


def load_checkpoint(path, expected_config: ModelConfig = None) -> InpaintingNetwork:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != FORMAT_VERSION:
        raise ContractError(
            f"checkpoint format {blob.get('format_version')} != {FORMAT_VERSION}"
        )
    cfg_dict = {
        k: tuple(v) if isinstance(v, (list, tuple)) else v
        for k, v in blob["config"].items()
    }
    cfg = ModelConfig(**cfg_dict)
    if expected_config is not None and cfg != expected_config:
        raise ContractError("checkpoint architecture config does not match")
    model = InpaintingNetwork(cfg)
    for g, sd in blob["groups"].items():
        getattr(model, g).load_state_dict(sd)
    return model
