"""Video inpainting: multi-frame encoder with feature flow, temporal
aggregation, and recurrent feedback, plus synthetic data, mask
generation, training, inference, and evaluation tools."""

from .errors import ContractError, MediaIOError
from .media import Clip, FlowField, Frame, Mask, MaskSeq
from .model import InpaintingNetwork, ModelConfig, load_checkpoint, save_checkpoint
from .pipeline import TrainConfig, infer, train

__all__ = [
    "Clip",
    "ContractError",
    "FlowField",
    "Frame",
    "InpaintingNetwork",
    "Mask",
    "MaskSeq",
    "MediaIOError",
    "ModelConfig",
    "TrainConfig",
    "infer",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
