"""Texture stack data model and disk I/O.

A texture stack is a pixel-aligned pair of albedo and normal maps stored as
float arrays in [0, 1].  Normals encode unit vectors via n = 2*v - 1.  All
operations here are pure functions over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    CropTooLarge,
    DegenerateCrop,
    DimensionMismatch,
    FileMissing,
    UnsupportedFormat,
)


@dataclass(frozen=True)
class TextureStack:
    """Paired albedo + normal maps with identical H x W, channels in [0, 1]."""

    albedo: np.ndarray   # H x W x 3 float32
    normals: np.ndarray  # H x W x 3 float32

    def __post_init__(self):
        for name, img in (("albedo", self.albedo), ("normals", self.normals)):
            if img.ndim != 3 or img.shape[2] != 3:
                raise DimensionMismatch(f"{name} must be H x W x 3, got {img.shape}")
        if self.albedo.shape != self.normals.shape:
            raise DimensionMismatch(
                f"albedo {self.albedo.shape[:2]} != normals {self.normals.shape[:2]}"
            )
        if self.height < 1 or self.width < 1:
            raise DimensionMismatch("stack must be at least 1 x 1")

    @property
    def height(self) -> int:
        return self.albedo.shape[0]

    @property
    def width(self) -> int:
        return self.albedo.shape[1]

    @property
    def min_side(self) -> int:
        return min(self.height, self.width)


@dataclass(frozen=True)
class CropSpec:
    """Square crop window: top/left offsets plus side length, in pixels."""

    top: int
    left: int
    size: int


def _read_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileMissing(f"no such file: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UnsupportedFormat(f"cannot decode image: {path}")
    if raw.ndim == 3 and raw.shape[2] == 4:
        raw = raw[:, :, :3]
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise UnsupportedFormat(f"expected RGB image, got shape {raw.shape}: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedFormat(f"expected 8- or 16-bit image, got {raw.dtype}: {path}")
    rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    return rgb.astype(np.float32) / scale


def load_stack(albedo_path, normals_path) -> TextureStack:
    """Load an albedo/normals PNG pair, rescaled to [0, 1].

    Raises FileMissing, UnsupportedFormat, or DimensionMismatch when the two
    maps disagree in size.
    """
    albedo = _read_png(albedo_path)
    normals = _read_png(normals_path)
    if albedo.shape != normals.shape:
        raise DimensionMismatch(
            f"albedo {albedo.shape[:2]} != normals {normals.shape[:2]}"
        )
    return TextureStack(albedo=albedo, normals=normals)


def save_stack(stack: TextureStack, albedo_path, normals_path, bit_depth: int = 8) -> None:
    """Write the stack as a PNG pair (8-bit by default, 16-bit optional)."""
    if bit_depth == 8:
        dtype, scale = np.uint8, 255.0
    elif bit_depth == 16:
        dtype, scale = np.uint16, 65535.0
    else:
        raise UnsupportedFormat(f"bit_depth must be 8 or 16, got {bit_depth}")
    for img, path in ((stack.albedo, albedo_path), (stack.normals, normals_path)):
        quantized = np.round(np.clip(img, 0.0, 1.0) * scale).astype(dtype)
        bgr = cv2.cvtColor(quantized, cv2.COLOR_RGB2BGR)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        if not cv2.imwrite(str(path), bgr):
            raise UnsupportedFormat(f"failed to write {path}")


def crop(stack: TextureStack, spec: CropSpec) -> TextureStack:
    """Extract the window given by ``spec`` from both maps."""
    if spec.top < 0 or spec.left < 0:
        raise CropTooLarge(f"negative crop offset: {spec}")
    if spec.top + spec.size > stack.height or spec.left + spec.size > stack.width:
        raise CropTooLarge(f"crop {spec} exceeds {stack.height}x{stack.width}")
    sl = (slice(spec.top, spec.top + spec.size), slice(spec.left, spec.left + spec.size))
    return TextureStack(albedo=stack.albedo[sl].copy(), normals=stack.normals[sl].copy())


def random_crop(stack: TextureStack, size: int, seed: int) -> tuple[TextureStack, CropSpec]:
    """Draw a uniform random square crop at identical coordinates in both maps.

    Deterministic given ``seed``.
    """
    rng = np.random.default_rng(seed)
    return random_crop_rng(stack, size, rng)


def random_crop_rng(stack: TextureStack, size: int, rng: np.random.Generator) -> tuple[TextureStack, CropSpec]:
    """Like random_crop but drawing from a caller-owned generator."""
    if size > stack.min_side:
        raise CropTooLarge(f"crop size {size} > min side {stack.min_side}")
    top = int(rng.integers(0, stack.height - size + 1))
    left = int(rng.integers(0, stack.width - size + 1))
    spec = CropSpec(top=top, left=left, size=size)
    return crop(stack, spec), spec


def center_crop(stack: TextureStack, fraction: float) -> TextureStack:
    """Centered crop with side length round(fraction * side) per dimension."""
    if not 0.0 < fraction <= 1.0:
        raise DegenerateCrop(f"fraction must be in (0, 1], got {fraction}")
    out_h = int(round(fraction * stack.height))
    out_w = int(round(fraction * stack.width))
    if out_h < 1 or out_w < 1:
        raise DegenerateCrop(f"crop would be {out_h}x{out_w}")
    top = (stack.height - out_h) // 2
    left = (stack.width - out_w) // 2
    sl = (slice(top, top + out_h), slice(left, left + out_w))
    return TextureStack(albedo=stack.albedo[sl].copy(), normals=stack.normals[sl].copy())


def tile_stack(stack: TextureStack, ny: int, nx: int) -> TextureStack:
    """Repeat the stack ny times vertically and nx times horizontally."""
    if ny < 1 or nx < 1:
        raise ValueError(f"tile counts must be >= 1, got ({ny}, {nx})")
    return TextureStack(
        albedo=np.tile(stack.albedo, (ny, nx, 1)),
        normals=np.tile(stack.normals, (ny, nx, 1)),
    )
