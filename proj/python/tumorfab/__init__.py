"""Tumor fabrication: coarse synthesis, adversarial refinement and evaluation.

Arrays are numpy; volumes are (C, H, W, D) float32 and masks (H, W, D) uint8.
Pipeline commands take a configuration dict (partial dicts are merged over
the defaults) and return the command summary as a dict.
"""

import copy
import json

from . import _tumorfab
from ._tumorfab import (
    Error,
    IoError,
    ValidationError,
    compute_brain_mask,
    dice,
    load_mask,
    load_volume,
    mean_dice,
    normalize_intensity,
    save_mask,
    save_volume,
    t_test,
)

__all__ = [
    "Error", "IoError", "ValidationError", "compute_brain_mask", "config", "dice", "evaluate",
    "fabricate", "fabricate_coarse", "fit_intensity", "load_mask", "load_volume", "mean_dice",
    "normalize_intensity", "phantom", "phantom_case", "preprocess", "refine", "save_mask",
    "save_volume", "t_test", "train_refiner",
]


def _merge(base, update, path=""):
    for key, value in update.items():
        if key not in base:
            raise ValidationError(f"unknown config key '{path}{key}'")
        if isinstance(value, dict) and isinstance(base[key], dict):
            _merge(base[key], value, f"{path}{key}.")
        else:
            base[key] = value
    return base


def config(overrides=None, seed=None, out=None):
    """Default configuration with `overrides` merged in."""
    cfg = json.loads(_tumorfab.default_config())
    _merge(cfg, copy.deepcopy(overrides or {}))
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out_dir"] = str(out)
    return cfg


def _run(fn, cfg, *args, **kwargs):
    return json.loads(fn(json.dumps(cfg), *args, **kwargs))


def phantom_case(cfg=None, tumor=True):
    image, mask = _tumorfab.phantom_case(json.dumps(config(cfg)), tumor)
    return (image, mask) if tumor else image


def fabricate_coarse(healthy, mask, transform, sigma=2.0):
    """`transform` is {"NCR": {"gain": .., "offset": ..}, "ED": .., "ET": ..}."""
    return _tumorfab.fabricate_coarse(healthy, mask, json.dumps(transform), sigma)


def phantom(cfg):
    return _run(_tumorfab.cmd_phantom, cfg)


def preprocess(cfg, input_dir):
    return _run(_tumorfab.cmd_preprocess, cfg, str(input_dir))


def fit_intensity(cfg, healthy, tumor):
    return _run(_tumorfab.cmd_fit_intensity, cfg, str(healthy), str(tumor))


def fabricate(cfg, healthy, tumor, count, transform=None):
    return _run(_tumorfab.cmd_fabricate, cfg, str(healthy), str(tumor), int(count),
                None if transform is None else str(transform))


def train_refiner(cfg, coarse, real, resume=None):
    return _run(_tumorfab.cmd_train_refiner, cfg, str(coarse), str(real),
                None if resume is None else str(resume))


def refine(cfg, checkpoint, coarse):
    return _run(_tumorfab.cmd_refine, cfg, str(checkpoint), str(coarse))


def evaluate(cfg, preds, gt, baselines=()):
    return _run(_tumorfab.cmd_evaluate, cfg, [str(p) for p in preds], str(gt), [str(b) for b in baselines])
