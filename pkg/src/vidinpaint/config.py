"""Flat key=value configuration files.

Every training/eval default is overridable from a config file; the CLI
looks at --config first, then ./vidinpaint.cfg. Lines are `key = value`;
blank lines and #-comments are ignored. Tuples are comma-separated.
"""

import os

from .errors import ContractError
from .maskgen import MASK_KINDS

DEFAULT_CONFIG_NAME = "vidinpaint.cfg"

DEFAULTS = {
    "stage": 1,
    "lr": 1e-4,
    "betas": (0.9, 0.999),
    "loss_weights": (1.0, 10.0, 1.0),
    "batch_size": 4,
    "iterations": 20000,
    "seed": 0,
    "resolution": 64,
    "channels": (32, 64, 128, 256),
    "checkpoint_every": 500,
    "detach_feedback": False,
    "mask_kinds": MASK_KINDS,
    "input_shift": (0.0, 0.0, 0.0),
    "input_scale": (1.0, 1.0, 1.0),
    "eval_seeds": (0, 1, 2),
    "dilation_radius": 5,
}


def _coerce(key, raw, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ContractError(f"bad boolean for {key}: {raw!r}")
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        elem = default[0] if default else raw
        if isinstance(elem, float):
            return tuple(float(p) for p in parts)
        if isinstance(elem, int):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_file(path):
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in DEFAULTS:
                raise ContractError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw, DEFAULTS[key])
    return values


def load_config(explicit_path=None):
    """Defaults overlaid with --config or ./vidinpaint.cfg when present."""
    cfg = dict(DEFAULTS)
    path = explicit_path
    if path is None and os.path.isfile(DEFAULT_CONFIG_NAME):
        path = DEFAULT_CONFIG_NAME
    if path is not None:
        cfg.update(parse_config_file(path))
    return cfg
