"""Loss terms for adversarial-expansion training.

Four terms: non-saturating adversarial loss, per-map L1, and a Gram-matrix
style loss over a pluggable feature extractor.  The weighted total and the
non-adversarial checkpoint score are exact arithmetic over the parts.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import ExtractorUnavailable, ShapeMismatch

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-8

BACKBONE_ENV = "TILETEX_BACKBONE"


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 1.0
    lambda_l1_albedo: float = 10.0
    lambda_l1_normals: float = 10.0
    lambda_style: float = 1.0


@dataclass(frozen=True)
class LossBreakdown:
    adv: float
    l1_albedo: float
    l1_normals: float
    style: float
    total: float
    non_adversarial: float


def l1_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all pixels and channels."""
    if predicted.shape != target.shape:
        raise ShapeMismatch(f"{tuple(predicted.shape)} != {tuple(target.shape)}")
    return (predicted - target).abs().mean()


def gram_matrix(features: torch.Tensor) -> torch.Tensor:
    """Channel correlation matrix normalized by h*w*C.

    Accepts C x h x w or B x C x h x w; returns C x C (or B x C x C).
    """
    squeeze = features.dim() == 3
    if squeeze:
        features = features[None]
    b, c, h, w = features.shape
    flat = features.reshape(b, c, h * w)
    gram = flat @ flat.transpose(1, 2) / (h * w * c)
    return gram[0] if squeeze else gram


class FeatureExtractor:
    """Interface: map a 1 x 3 x H x W image in [0, 1] to a list of feature maps."""

    def extract(self, image: torch.Tensor) -> list[torch.Tensor]:
        raise NotImplementedError


class IdentityExtractor(FeatureExtractor):
    """Single layer returning the image itself; handy for stubs and tests."""

    def extract(self, image):
        return [image]


class RandomFeatureExtractor(FeatureExtractor):
    """Fixed random-filter pyramid used when no pretrained backbone is available.

    Filters are frozen at construction, so the extractor is a deterministic
    immutable function of its seed.
    """

    def __init__(self, seed: int = 0, channels=(16, 32, 64, 64, 64)):
        gen = torch.Generator().manual_seed(seed)
        layers = []
        in_ch = 3
        for out_ch in channels:
            conv = nn.Conv2d(in_ch, out_ch, 3, 2, 1)
            with torch.no_grad():
                conv.weight.normal_(0.0, (2.0 / (9 * in_ch)) ** 0.5, generator=gen)
                conv.bias.zero_()
            conv.requires_grad_(False)
            layers.append(conv)
            in_ch = out_ch
        self._layers = layers
        self._act = nn.LeakyReLU(0.2)

    def extract(self, image):
        feats = []
        x = image
        for conv in self._layers:
            x = self._act(conv(x))
            feats.append(x)
        return feats


class PretrainedFeatureExtractor(FeatureExtractor):
    """VGG19 early/mid layers loaded from a local state-dict file.

    Uses the classic five style layers (relu1_1 .. relu5_1).
    """

    STYLE_LAYER_INDICES = (1, 6, 11, 20, 29)

    def __init__(self, weights_path: str):
        try:
            from torchvision.models import vgg19
        except ImportError as exc:
            raise ExtractorUnavailable("torchvision is required for the pretrained backbone") from exc
        if not os.path.exists(weights_path):
            raise ExtractorUnavailable(f"backbone weights not found: {weights_path}")
        model = vgg19(weights=None)
        state = torch.load(weights_path, map_location="cpu")
        model.load_state_dict(state)
        self._features = model.features.eval()
        self._features.requires_grad_(False)
        # ImageNet normalization for [0,1] inputs
        self._mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
        self._std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)

    def extract(self, image):
        x = (image - self._mean) / self._std
        feats = []
        last = max(self.STYLE_LAYER_INDICES)
        for i, layer in enumerate(self._features):
            x = layer(x)
            if i in self.STYLE_LAYER_INDICES:
                feats.append(x)
            if i >= last:
                break
        return feats


_warned_fallback = False


def default_extractor(seed: int = 0) -> FeatureExtractor:
    """Pretrained backbone when TILETEX_BACKBONE points at weights, else random filters."""
    global _warned_fallback
    path = os.environ.get(BACKBONE_ENV)
    if path:
        return PretrainedFeatureExtractor(path)
    if not _warned_fallback:
        log.warning(
            "no pretrained backbone (%s unset); falling back to random-filter features",
            BACKBONE_ENV,
        )
        _warned_fallback = True
    return RandomFeatureExtractor(seed=seed)


def style_loss(
    predicted_maps: list[torch.Tensor],
    target_maps: list[torch.Tensor],
    extractor: FeatureExtractor,
) -> torch.Tensor:
    """Sum over maps and layers of squared Gram differences, layers equally weighted."""
    total = None
    for pred, target in zip(predicted_maps, target_maps):
        pred_feats = extractor.extract(pred)
        target_feats = extractor.extract(target)
        weight = 1.0 / len(pred_feats)
        for pf, tf in zip(pred_feats, target_feats):
            diff = gram_matrix(pf) - gram_matrix(tf)
            term = weight * (diff * diff).sum()
            total = term if total is None else total + term
    return total


def adversarial_losses(
    scores_real: torch.Tensor, scores_fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating GAN losses; log arguments clamped at 1e-8.

    Returns (d_loss, g_loss).
    """
    d_loss = -(
        scores_real.clamp_min(LOG_CLAMP).log().mean()
        + (1.0 - scores_fake).clamp_min(LOG_CLAMP).log().mean()
    )
    g_loss = -scores_fake.clamp_min(LOG_CLAMP).log().mean()
    return d_loss, g_loss


def generator_adversarial_loss(scores_fake: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator term alone (no real scores needed)."""
    return -scores_fake.clamp_min(LOG_CLAMP).log().mean()


def total_loss(
    adv: float, l1_albedo: float, l1_normals: float, style: float, weights: LossWeights
) -> LossBreakdown:
    """Weighted global objective plus the non-adversarial checkpoint score."""
    non_adv = (
        weights.lambda_l1_albedo * l1_albedo
        + weights.lambda_l1_normals * l1_normals
        + weights.lambda_style * style
    )
    return LossBreakdown(
        adv=adv,
        l1_albedo=l1_albedo,
        l1_normals=l1_normals,
        style=style,
        total=weights.lambda_adv * adv + non_adv,
        non_adversarial=non_adv,
    )
