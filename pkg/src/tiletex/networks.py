"""Fully-convolutional generator and patch discriminator.

The generator is an encoder (stride-2, half resolution), a chain of residual
blocks at the latent resolution, and one or two transposed-convolution decoder
heads with a total x4 upsampling, so a k x k input becomes a 2k x 2k output.
Tiling the latent 2x2 before the remaining blocks yields a 4k x 4k output whose
center crop tiles seamlessly.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from . import stacks
from .errors import InputTooSmall, InvalidConfig, InvalidSplitLevel, SizeNotDivisible
from .stacks import TextureStack

JOINT = "joint"
SPLIT = "split"

CHECKPOINT_VERSION = 1

LEAKY_SLOPE = 0.2
IN_EPS = 1e-5


@dataclass(frozen=True)
class GeneratorConfig:
    input_size: int = 128           # training crop side k
    num_residual_blocks: int = 5
    base_channels: int = 64
    decoder_mode: str = SPLIT       # "joint" (single 6-channel head) or "split"
    split_level: int = 0            # latent level tiled by generate_seamless
    padding_mode: str = "zeros"     # "zeros" or "reflect"

    def validate(self):
        if self.input_size < 4 or self.input_size % 4 != 0:
            raise InvalidConfig(f"input_size must be a multiple of 4, got {self.input_size}")
        if self.num_residual_blocks < 1:
            raise InvalidConfig("need at least one residual block")
        if self.base_channels < 1:
            raise InvalidConfig("base_channels must be positive")
        if self.decoder_mode not in (JOINT, SPLIT):
            raise InvalidConfig(f"decoder_mode must be '{JOINT}' or '{SPLIT}'")
        if not 0 <= self.split_level <= self.num_residual_blocks:
            raise InvalidConfig(
                f"split_level must be in [0, {self.num_residual_blocks}], got {self.split_level}"
            )
        if self.padding_mode not in ("zeros", "reflect"):
            raise InvalidConfig(f"padding_mode must be 'zeros' or 'reflect'")


@dataclass
class LatentField:
    """Spatial feature tensor at some residual-block level, possibly 2x2 tiled."""

    features: torch.Tensor  # 1 x C x h x w
    level: int
    tiled: bool


@dataclass
class ProbabilityMap:
    """Per-patch realness scores in [0, 1] from the discriminator."""

    scores: np.ndarray       # h_d x w_d
    downsample_factor: int   # input pixels per score cell


def _norm(ch):
    return nn.InstanceNorm2d(ch, eps=IN_EPS, affine=False, track_running_stats=False)


class ResidualBlock(nn.Module):
    def __init__(self, channels, padding_mode):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1, padding_mode=padding_mode),
            _norm(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1, padding_mode=padding_mode),
            _norm(channels),
        )

    def forward(self, x):
        return self.body(x) + x


class DecoderHead(nn.Module):
    """x4 upsampling decoder: two stride-2 transposed convs plus an output conv."""

    def __init__(self, in_ch, base_ch, out_ch):
        super().__init__()
        mid = base_ch
        self.body = nn.Sequential(
            nn.ConvTranspose2d(in_ch, mid, 4, 2, 1),
            _norm(mid),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(mid, mid // 2, 4, 2, 1),
            _norm(mid // 2),
            nn.ReLU(inplace=True),
            nn.Conv2d(mid // 2, out_ch, 3, 1, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return self.body(x)


class Generator(nn.Module):
    """Encoder -> residual blocks -> decoder head(s); 6 channels in, 6 out."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        config.validate()
        self.config = config
        ch = config.base_channels
        lat = 2 * ch
        pm = config.padding_mode
        self.encoder = nn.Sequential(
            nn.Conv2d(6, ch, 3, 1, 1, padding_mode=pm),
            _norm(ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(ch, lat, 3, 2, 1, padding_mode=pm),
            _norm(lat),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.ModuleList(
            ResidualBlock(lat, pm) for _ in range(config.num_residual_blocks)
        )
        if config.decoder_mode == JOINT:
            self.heads = nn.ModuleDict({"stack": DecoderHead(lat, ch, 6)})
        else:
            self.heads = nn.ModuleDict(
                {"albedo": DecoderHead(lat, ch, 3), "normals": DecoderHead(lat, ch, 3)}
            )

    def encode(self, x):
        return self.encoder(x)

    def run_blocks(self, x, start=0, stop=None):
        stop = len(self.blocks) if stop is None else stop
        for block in self.blocks[start:stop]:
            x = block(x)
        return x

    def decode(self, x):
        if self.config.decoder_mode == JOINT:
            return self.heads["stack"](x)
        return torch.cat([self.heads["albedo"](x), self.heads["normals"](x)], dim=1)

    def forward(self, x):
        return self.decode(self.run_blocks(self.encode(x)))


class Discriminator(nn.Module):
    """5-layer strided patch discriminator with a sigmoid score head.

    Strides (2, 2, 2, 1, 1) give one score cell per 8 input pixels; the two
    stride-1 layers use 3x3 kernels so the map side stays at ceil(side / 8).
    """

    downsample_factor = 8
    receptive_field = 54

    def __init__(self, base_channels=64):
        super().__init__()
        ch = base_channels
        self.body = nn.Sequential(
            nn.Conv2d(6, ch, 4, 2, 1),
            _norm(ch),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(ch, ch * 2, 4, 2, 1),
            _norm(ch * 2),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(ch * 2, ch * 4, 4, 2, 1),
            _norm(ch * 4),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(ch * 4, ch * 8, 3, 1, 1),
            _norm(ch * 8),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(ch * 8, 1, 3, 1, 1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return self.body(x)


def init_weights(model: nn.Module, seed: int) -> None:
    """Draw every conv weight i.i.d. from Normal(0, 0.02^2), biases zero."""
    gen = torch.Generator().manual_seed(seed)
    for module in model.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
            with torch.no_grad():
                module.weight.normal_(0.0, 0.02, generator=gen)
                if module.bias is not None:
                    module.bias.zero_()


def build_generator(config: GeneratorConfig, seed: int) -> Generator:
    model = Generator(config)
    init_weights(model, seed)
    model.eval()
    return model


def build_discriminator(seed: int, base_channels: int = 64) -> Discriminator:
    model = Discriminator(base_channels=base_channels)
    init_weights(model, seed)
    model.eval()
    return model


def stack_to_tensor(stack: TextureStack) -> torch.Tensor:
    """Pack albedo+normals into a 1 x 6 x H x W float tensor."""
    arr = np.concatenate([stack.albedo, stack.normals], axis=2)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def tensor_to_stack(t: torch.Tensor) -> TextureStack:
    arr = t.detach().squeeze(0).clamp(0.0, 1.0).cpu().numpy().transpose(1, 2, 0)
    return TextureStack(
        albedo=np.ascontiguousarray(arr[:, :, :3]),
        normals=np.ascontiguousarray(arr[:, :, 3:]),
    )


def _check_divisible(stack: TextureStack):
    if stack.height % 4 != 0 or stack.width % 4 != 0:
        raise SizeNotDivisible(
            f"input sides must be divisible by 4, got {stack.height}x{stack.width}"
        )


def generator_forward(model: Generator, stack: TextureStack) -> TextureStack:
    """Expand the input stack to twice its resolution."""
    _check_divisible(stack)
    with torch.no_grad():
        out = model(stack_to_tensor(stack))
    return tensor_to_stack(out)


def tile_latent(x: torch.Tensor) -> torch.Tensor:
    """2x2 spatial repetition of a latent tensor."""
    return torch.cat([torch.cat([x, x], dim=3)] * 2, dim=2)


def generate_seamless(
    model: Generator, stack: TextureStack, split_level: int | None = None
) -> tuple[TextureStack, TextureStack]:
    """Expand the input with a 2x2-tiled latent field.

    Returns (pre_crop, tileable): pre_crop has 4x the input resolution and is
    periodic in its interior; tileable is its centered half-size crop (2x the
    input) with seams closed at the borders.
    """
    _check_divisible(stack)
    if split_level is None:
        split_level = model.config.split_level
    if not 0 <= split_level <= len(model.blocks):
        raise InvalidSplitLevel(
            f"split_level must be in [0, {len(model.blocks)}], got {split_level}"
        )
    with torch.no_grad():
        x = model.encode(stack_to_tensor(stack))
        x = model.run_blocks(x, 0, split_level)
        field = tile_latent(x)
        field = model.run_blocks(field, split_level)
        out = model.decode(field)
    pre_crop = tensor_to_stack(out)
    tileable = stacks.center_crop(pre_crop, 0.5)
    return pre_crop, tileable


def periodic_interior_margin(config: GeneratorConfig, split_level: int | None = None) -> int:
    """Conservative border width (output pixels) contaminated by field-edge padding.

    Pixels farther than this from the pre-crop border have receptive fields
    that avoid the tiled latent field's outer edge, so periodicity is exact
    there (up to float accumulation).
    """
    if split_level is None:
        split_level = config.split_level
    post_blocks = config.num_residual_blocks - split_level
    # resblock radius = 2 latent cells; decoder ~2 latent cells; 4 px per cell
    return 4 * (2 * post_blocks + 2) + 4


def discriminate(model: Discriminator, stack: TextureStack) -> ProbabilityMap:
    """Per-patch realness scores for the stack."""
    if stack.min_side < model.receptive_field:
        raise InputTooSmall(
            f"input side {stack.min_side} < receptive field {model.receptive_field}"
        )
    with torch.no_grad():
        scores = model(stack_to_tensor(stack))
    return ProbabilityMap(
        scores=scores.squeeze(0).squeeze(0).cpu().numpy(),
        downsample_factor=model.downsample_factor,
    )


# ---- checkpoint container: named weight arrays + a JSON manifest ----

def save_models(
    path,
    generator: Generator,
    discriminator: Discriminator,
    extra: dict | None = None,
) -> None:
    """Serialize both models into a single .npz with a version-stamped manifest."""
    arrays = {}
    for name, param in generator.state_dict().items():
        arrays[f"g.{name}"] = param.cpu().numpy()
    for name, param in discriminator.state_dict().items():
        arrays[f"d.{name}"] = param.cpu().numpy()
    manifest = {
        "version": CHECKPOINT_VERSION,
        "generator_config": asdict(generator.config),
        "discriminator_base_channels": discriminator.body[0].out_channels,
    }
    if extra:
        manifest.update(extra)
    arrays["manifest"] = np.frombuffer(
        json.dumps(manifest).encode("utf-8"), dtype=np.uint8
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)


def load_models(path) -> tuple[Generator, Discriminator, dict]:
    """Load a checkpoint written by save_models."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    data = np.load(path)
    manifest = json.loads(bytes(data["manifest"]).decode("utf-8"))
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise InvalidConfig(f"unsupported checkpoint version: {manifest.get('version')}")
    config = GeneratorConfig(**manifest["generator_config"])
    generator = Generator(config)
    discriminator = Discriminator(base_channels=manifest["discriminator_base_channels"])
    g_state = {k[2:]: torch.from_numpy(data[k]) for k in data.files if k.startswith("g.")}
    d_state = {k[2:]: torch.from_numpy(data[k]) for k in data.files if k.startswith("d.")}
    generator.load_state_dict(g_state)
    discriminator.load_state_dict(d_state)
    generator.eval()
    discriminator.eval()
    return generator, discriminator, manifest
