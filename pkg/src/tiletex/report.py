"""Matplotlib figure rendering for the CLI report paths.

Every function writes a PNG next to the delimited output it illustrates.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from . import metrics, stacks
from .stacks import TextureStack
from .tileability import TileabilityVerdict, _band_slice


def render_loss_curves(log_csv_path, out_png) -> None:
    """Plot each logged loss column against iteration."""
    rows = list(csv.DictReader(open(log_csv_path)))
    if not rows:
        return
    iters = [int(r["iteration"]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for column in ("adv", "l1_albedo", "l1_normals", "style", "total"):
        ax1.plot(iters, [float(r[column]) for r in rows], label=column)
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("loss")
    ax1.set_yscale("log")
    ax1.legend(fontsize=8)
    ax1.set_title("loss terms")
    ax2.plot(iters, [float(r["non_adversarial_ma"]) for r in rows], color="tab:red")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("non-adversarial (moving avg)")
    ax2.set_title("checkpoint score")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def render_probability_heatmap(
    verdict: TileabilityVerdict, band_fraction: float, out_png
) -> None:
    """Discriminator score map with the vertical/horizontal bands outlined."""
    scores = verdict.map.scores
    h, w = scores.shape
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(scores, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(im, ax=ax, fraction=0.046)
    sv = _band_slice(w, band_fraction)
    sh = _band_slice(h, band_fraction)
    ax.add_patch(Rectangle((sv.start - 0.5, -0.5), sv.stop - sv.start, h,
                           fill=False, edgecolor="red", linewidth=1.5))
    ax.add_patch(Rectangle((-0.5, sh.start - 0.5), w, sh.stop - sh.start,
                           fill=False, edgecolor="orange", linewidth=1.5))
    ax.set_title(
        f"tileable={verdict.tileable}  m_v={verdict.m_v:.3f} "
        f"m_h={verdict.m_h:.3f} tau={verdict.tau:.3f}"
    )
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def render_tiled_preview(stack: TextureStack, ny: int, nx: int, out_png) -> None:
    """Side-by-side tiled previews of both maps with the seam-gradient ratio."""
    tiled = stacks.tile_stack(stack, ny, nx)
    _, _, ratio = metrics.seam_gradient_stats(stack.albedo)
    fig, (ax_a, ax_n) = plt.subplots(1, 2, figsize=(10, 5))
    ax_a.imshow(np.clip(tiled.albedo, 0, 1))
    ax_a.set_title(f"albedo tiled {ny}x{nx}")
    ax_n.imshow(np.clip(tiled.normals, 0, 1))
    ax_n.set_title(f"normals tiled {ny}x{nx}")
    for ax in (ax_a, ax_n):
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle(f"cross-seam / interior gradient ratio: {ratio:.3f}")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def render_probe_bars(results: list[tuple[int, float]], out_png) -> None:
    """Bar chart of mean discriminator score per normals shift."""
    shifts = [str(s) for s, _ in results]
    values = [v for _, v in results]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(shifts, values, color="tab:blue")
    ax.set_xlabel("normals shift (px)")
    ax.set_ylabel("mean discriminator score")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
