"""Discriminator-guided tileability test.

Latent-tiling artifacts concentrate on centered vertical/horizontal bands of
the output, so a candidate is declared tileable when the worst discriminator
score inside those bands is no worse than gamma times the worst score in the
rest of the map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import networks
from .errors import MapTooSmall
from .networks import Discriminator, ProbabilityMap
from .stacks import TextureStack


@dataclass(frozen=True)
class TileabilityConfig:
    band_fraction: float = 0.20
    gamma: float = 1.0

    def validate(self):
        if not 0.0 < self.band_fraction < 1.0:
            raise ValueError(f"band_fraction must be in (0, 1), got {self.band_fraction}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass
class TileabilityVerdict:
    tileable: bool
    m_v: float   # worst score in the vertical band
    m_h: float   # worst score in the horizontal band
    m_d: float   # worst score in the remainder
    tau: float   # gamma * m_d
    map: ProbabilityMap


def _band_slice(extent: int, fraction: float) -> slice:
    width = int(round(fraction * extent))
    width = max(width, 1)
    start = (extent - width) // 2
    return slice(start, start + width)


def extract_bands(
    pmap: ProbabilityMap, band_fraction: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks (s_v, s_h, s_r): centered cross bands plus the remainder.

    The bands span the full orthogonal extent; remainder cells belong to
    neither band.  Raises MapTooSmall when the remainder would be empty.
    """
    h, w = pmap.scores.shape
    if h < 5 or w < 5:
        raise MapTooSmall(f"need at least 5x5 score cells, got {h}x{w}")
    s_v = np.zeros((h, w), dtype=bool)
    s_h = np.zeros((h, w), dtype=bool)
    s_v[:, _band_slice(w, band_fraction)] = True
    s_h[_band_slice(h, band_fraction), :] = True
    s_r = ~(s_v | s_h)
    if not s_r.any():
        raise MapTooSmall(f"bands cover the whole {h}x{w} map (fraction {band_fraction})")
    return s_v, s_h, s_r


def is_tileable(pmap: ProbabilityMap, config: TileabilityConfig) -> TileabilityVerdict:
    """Band-minimum test: tileable iff min(s_v) and min(s_h) >= gamma * min(s_r)."""
    config.validate()
    s_v, s_h, s_r = extract_bands(pmap, config.band_fraction)
    scores = pmap.scores
    m_v = float(scores[s_v].min())
    m_h = float(scores[s_h].min())
    m_d = float(scores[s_r].min())
    tau = config.gamma * m_d
    return TileabilityVerdict(
        tileable=bool(m_v >= tau and m_h >= tau),
        m_v=m_v,
        m_h=m_h,
        m_d=m_d,
        tau=tau,
        map=pmap,
    )


def evaluate_candidate(
    discriminator: Discriminator, candidate: TextureStack, config: TileabilityConfig
) -> TileabilityVerdict:
    """Score a candidate tileable stack with the trained discriminator."""
    pmap = networks.discriminate(discriminator, candidate)
    return is_tileable(pmap, config)


def verdict_row(verdict: TileabilityVerdict) -> dict:
    """Flat record for delimited report output."""
    return {
        "tileable": int(verdict.tileable),
        "m_v": verdict.m_v,
        "m_h": verdict.m_h,
        "m_d": verdict.m_d,
        "tau": verdict.tau,
    }
