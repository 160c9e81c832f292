"""Quantitative evaluation: SSIM, tiled comparison, seam statistics, probes.

SSIM follows the canonical Gaussian-window formulation (11x11, sigma 1.5,
C1 = 0.01^2, C2 = 0.03^2 for unit dynamic range), averaged over valid window
positions and channels.  Learned perceptual metrics are optional plugins that
need a pretrained backbone; without one they report as unavailable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import networks, stacks
from .errors import ShapeMismatch, ShiftTooLarge
from .losses import FeatureExtractor
from .networks import Discriminator
from .stacks import TextureStack

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

TILED_TO_MATCH = "TILED_TO_MATCH"


@dataclass
class MetricReport:
    ssim: float                    # mean over maps
    ssim_albedo: float
    ssim_normals: float
    lpips: float | None = None
    si_fid: float | None = None
    protocol: str = TILED_TO_MATCH
    notes: str = ""


def gaussian_window(window: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 2D Gaussian weights."""
    half = (window - 1) / 2.0
    coords = np.arange(window) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray, kernel: np.ndarray) -> float:
    window = kernel.shape[0]
    wa = np.lib.stride_tricks.sliding_window_view(a, (window, window))
    wb = np.lib.stride_tricks.sliding_window_view(b, (window, window))
    mu_a = np.tensordot(wa, kernel, axes=([2, 3], [0, 1]))
    mu_b = np.tensordot(wb, kernel, axes=([2, 3], [0, 1]))
    ex_aa = np.tensordot(wa * wa, kernel, axes=([2, 3], [0, 1]))
    ex_bb = np.tensordot(wb * wb, kernel, axes=([2, 3], [0, 1]))
    ex_ab = np.tensordot(wa * wb, kernel, axes=([2, 3], [0, 1]))
    var_a = ex_aa - mu_a ** 2
    var_b = ex_bb - mu_b ** 2
    cov = ex_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11, sigma: float = 1.5) -> float:
    """Mean local SSIM over sliding Gaussian windows, channels averaged."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} != {b.shape}")
    if window % 2 != 1:
        raise ValueError(f"window must be odd, got {window}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    kernel = gaussian_window(window, sigma)
    return float(
        np.mean([_ssim_channel(a[:, :, c], b[:, :, c], kernel) for c in range(a.shape[2])])
    )


def tile_to_match(output: TextureStack, target_h: int, target_w: int) -> TextureStack:
    """Tile the stack until it covers target_h x target_w, then crop top-left."""
    ny = max(1, math.ceil(target_h / output.height))
    nx = max(1, math.ceil(target_w / output.width))
    tiled = stacks.tile_stack(output, ny, nx)
    return TextureStack(
        albedo=tiled.albedo[:target_h, :target_w].copy(),
        normals=tiled.normals[:target_h, :target_w].copy(),
    )


def _torch_image(img: np.ndarray):
    import torch

    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None].float()


def _lpips_like(a: np.ndarray, b: np.ndarray, extractor: FeatureExtractor) -> float:
    """Mean squared distance between unit-normalized deep features per layer."""
    import torch

    fa = extractor.extract(_torch_image(a))
    fb = extractor.extract(_torch_image(b))
    dists = []
    for xa, xb in zip(fa, fb):
        na = xa / (xa.norm(dim=1, keepdim=True) + 1e-10)
        nb = xb / (xb.norm(dim=1, keepdim=True) + 1e-10)
        dists.append(float(((na - nb) ** 2).sum(dim=1).mean()))
    return float(np.mean(dists))


def _si_fid_like(a: np.ndarray, b: np.ndarray, extractor: FeatureExtractor) -> float:
    """Frechet distance between per-image deep feature statistics (deepest layer)."""
    from scipy import linalg

    fa = extractor.extract(_torch_image(a))[-1].squeeze(0).detach().numpy()
    fb = extractor.extract(_torch_image(b))[-1].squeeze(0).detach().numpy()
    xa = fa.reshape(fa.shape[0], -1).T
    xb = fb.reshape(fb.shape[0], -1).T
    mu_a, mu_b = xa.mean(axis=0), xb.mean(axis=0)
    cov_a = np.cov(xa, rowvar=False)
    cov_b = np.cov(xb, rowvar=False)
    covmean = linalg.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    return float(
        np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a + cov_b - 2.0 * covmean)
    )


def compare_to_exemplar(
    output: TextureStack,
    exemplar: TextureStack,
    extractor: FeatureExtractor | None = None,
) -> MetricReport:
    """Tile the output to the exemplar's resolution and compute per-map metrics."""
    tiled = tile_to_match(output, exemplar.height, exemplar.width)
    ssim_a = ssim(tiled.albedo, exemplar.albedo)
    ssim_n = ssim(tiled.normals, exemplar.normals)
    lpips = si_fid = None
    notes = "lpips/si_fid unavailable (no pretrained backbone loaded)"
    if extractor is not None:
        lpips = 0.5 * (
            _lpips_like(tiled.albedo, exemplar.albedo, extractor)
            + _lpips_like(tiled.normals, exemplar.normals, extractor)
        )
        si_fid = 0.5 * (
            _si_fid_like(tiled.albedo, exemplar.albedo, extractor)
            + _si_fid_like(tiled.normals, exemplar.normals, extractor)
        )
        notes = "lpips/si_fid computed with the configured backbone"
    return MetricReport(
        ssim=0.5 * (ssim_a + ssim_n),
        ssim_albedo=ssim_a,
        ssim_normals=ssim_n,
        lpips=lpips,
        si_fid=si_fid,
        notes=notes,
    )


def consistency_probe(
    discriminator: Discriminator, stack: TextureStack, shifts: list[int]
) -> list[tuple[int, float]]:
    """Mean discriminator score with the normals map circularly shifted.

    The albedo stays fixed; each shift slides the normals horizontally with
    wraparound, breaking pixel alignment between the two maps.  The aligned
    case (shift 0) is always included first.
    """
    for delta in shifts:
        if delta < 0 or delta >= stack.min_side:
            raise ShiftTooLarge(f"shift {delta} outside [0, {stack.min_side})")
    probe_shifts = list(shifts)
    if 0 not in probe_shifts:
        probe_shifts.insert(0, 0)
    results = []
    for delta in probe_shifts:
        shifted = TextureStack(
            albedo=stack.albedo,
            normals=np.roll(stack.normals, delta, axis=1),
        )
        pmap = networks.discriminate(discriminator, shifted)
        results.append((delta, float(pmap.scores.mean())))
    return results


def seam_gradient_stats(image: np.ndarray) -> tuple[float, float, float]:
    """Tile a map 2x2 and compare cross-seam vs interior pixel gradients.

    Returns (max cross-seam gradient, max interior gradient, their ratio).
    """
    h, w = image.shape[:2]
    tiled = np.tile(image, (2, 2, 1) if image.ndim == 3 else (2, 2))
    gx = np.abs(np.diff(tiled, axis=1))
    gy = np.abs(np.diff(tiled, axis=0))
    seam_x = gx[:, w - 1]          # gradient across the vertical seam
    seam_y = gy[h - 1, :]          # gradient across the horizontal seam
    cross = float(max(seam_x.max(), seam_y.max()))
    interior_x = np.delete(gx, w - 1, axis=1)
    interior_y = np.delete(gy, h - 1, axis=0)
    interior = float(max(interior_x.max(), interior_y.max()))
    ratio = cross / interior if interior > 0 else math.inf
    return cross, interior, ratio
