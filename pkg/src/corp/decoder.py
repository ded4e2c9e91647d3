"""Decoders turning correlation-map stacks into co-saliency maps.

The built-in "reference" decoder is parameter-free: average the K channels,
clamp negatives, normalize by the per-image maximum, resize. Alternative
decoders can be registered by name and selected through PipelineConfig.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DecoderNotFoundError, RegistrationError
from .tensor import bilinear_resize
from .types import CorrelationMapStack, MapGroup

__all__ = ["decode_reference", "register_decoder", "get_decoder", "list_decoders", "DecoderFn"]

DecoderFn = Callable[[CorrelationMapStack, int, int], MapGroup]

_REGISTRY: dict[str, DecoderFn] = {}

MAX_EPS = 1e-12


def fuse_mean_clamp(stack_image: np.ndarray) -> np.ndarray:
    """Mean over the K channels with negatives clamped to zero (one image)."""
    fused = stack_image.mean(axis=0)
    return np.maximum(fused, 0.0)


def decode_reference(stack: CorrelationMapStack, out_h: int, out_w: int) -> MapGroup:
    """Parameter-free decode of a correlation stack into [0, 1] maps.

    Per image: mean over K channels, clamp negatives to 0, divide by the
    per-image maximum when it exceeds a tiny epsilon (otherwise the image
    decodes to all zeros), then bilinear-resize to (out_h, out_w).
    """
    out = np.empty((stack.n_images, out_h, out_w), dtype=np.float32)
    for n in range(stack.n_images):
        fused = fuse_mean_clamp(stack.maps[n])
        peak = float(fused.max())
        if peak > MAX_EPS:
            fused = fused / peak
        else:
            fused = np.zeros_like(fused)
        resized = bilinear_resize(fused, out_h, out_w)
        out[n] = np.clip(resized, 0.0, 1.0).astype(np.float32)
    return MapGroup(out)


def register_decoder(name: str, fn: DecoderFn) -> None:
    """Make a decoder selectable by name; duplicate names are rejected."""
    if name in _REGISTRY:
        raise RegistrationError(f"decoder {name!r} is already registered")
    _REGISTRY[name] = fn


def get_decoder(name: str) -> DecoderFn:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DecoderNotFoundError(
            f"unknown decoder {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def list_decoders() -> list[str]:
    return sorted(_REGISTRY)


register_decoder("reference", decode_reference)
