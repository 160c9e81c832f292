"""Self-supervised adversarial-expansion training loop.

Each iteration crops a 2k target from the exemplar and a k source from inside
the target, updates the discriminator on (target, expanded source), then the
generator on the full weighted objective.  The returned checkpoint is the one
with the lowest moving-average non-adversarial score, not the last one.
"""

from __future__ import annotations

import copy
import csv
import math
from collections import deque
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import torch

from . import losses, networks, stacks
from .errors import StackTooSmall
from .losses import FeatureExtractor, LossBreakdown, LossWeights
from .networks import Discriminator, Generator, GeneratorConfig
from .stacks import TextureStack

ALL_TERMS = frozenset({"adv", "l1_albedo", "l1_normals", "style"})

ADAM_BETAS = (0.5, 0.999)


@dataclass
class TrainConfig:
    k: int = 128
    iterations: int = 50_000
    lr: float = 2e-4
    lr_drops: tuple = ((30_000, 5.0), (40_000, 5.0))
    batch_size: int = 1
    seed: int = 0
    loss_weights: LossWeights = dc_field(default_factory=LossWeights)
    ablation_mask: frozenset = ALL_TERMS
    eval_interval: int = 500
    ma_window: int = 100
    generator: GeneratorConfig | None = None
    discriminator_channels: int = 64

    def __post_init__(self):
        if self.k < 16 or self.k % 4 != 0:
            raise ValueError(f"k must be >= 16 and divisible by 4, got {self.k}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        self.ablation_mask = frozenset(self.ablation_mask)
        unknown = self.ablation_mask - ALL_TERMS
        if unknown:
            raise ValueError(f"unknown loss terms in ablation_mask: {sorted(unknown)}")
        if self.generator is None:
            self.generator = GeneratorConfig(input_size=self.k)


@dataclass
class Checkpoint:
    iteration: int
    generator_state: dict
    discriminator_state: dict
    non_adversarial_score: float


@dataclass
class TrainState:
    config: TrainConfig
    generator: Generator
    discriminator: Discriminator
    g_opt: torch.optim.Adam
    d_opt: torch.optim.Adam
    extractor: FeatureExtractor
    rng: np.random.Generator
    iteration: int = 0


def learning_rate(config: TrainConfig, iteration: int) -> float:
    """Piecewise-constant schedule: base lr divided at each drop boundary."""
    lr = config.lr
    for drop_iter, divisor in config.lr_drops:
        if iteration > drop_iter:
            lr /= divisor
    return lr


def setup_training(config: TrainConfig, extractor: FeatureExtractor | None = None) -> TrainState:
    generator = networks.build_generator(config.generator, config.seed)
    discriminator = networks.build_discriminator(
        config.seed + 1, base_channels=config.discriminator_channels
    )
    generator.train()
    discriminator.train()
    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        g_opt=torch.optim.Adam(generator.parameters(), lr=config.lr, betas=ADAM_BETAS),
        d_opt=torch.optim.Adam(discriminator.parameters(), lr=config.lr, betas=ADAM_BETAS),
        extractor=extractor if extractor is not None else losses.default_extractor(config.seed),
        rng=np.random.default_rng(config.seed + 2),
    )


def _set_lr(opt, lr):
    for group in opt.param_groups:
        group["lr"] = lr


def _split_maps(t: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    return t[:, :3], t[:, 3:]


def training_step(state: TrainState, stack: TextureStack) -> LossBreakdown:
    """One D-then-G update on a fresh (target, source) crop pair."""
    config = state.config
    k = config.k
    if stack.min_side < 2 * k:
        raise StackTooSmall(f"stack min side {stack.min_side} < 2k = {2 * k}")
    state.iteration += 1
    lr = learning_rate(config, state.iteration)
    _set_lr(state.g_opt, lr)
    _set_lr(state.d_opt, lr)

    target, _ = stacks.random_crop_rng(stack, 2 * k, state.rng)
    # the source is the center of the target: a deterministic placement is
    # what makes the pixel-wise expansion objective learnable
    source = stacks.crop(target, stacks.CropSpec(top=k // 2, left=k // 2, size=k))
    real = networks.stack_to_tensor(target)
    src = networks.stack_to_tensor(source)

    mask = config.ablation_mask
    weights = config.loss_weights
    fake = state.generator(src)

    if "adv" in mask:
        state.d_opt.zero_grad()
        d_real = state.discriminator(real)
        d_fake = state.discriminator(fake.detach())
        d_loss, _ = losses.adversarial_losses(d_real, d_fake)
        d_loss.backward()
        state.d_opt.step()

    state.g_opt.zero_grad()
    zero = torch.zeros((), dtype=fake.dtype)
    if "adv" in mask:
        adv = losses.generator_adversarial_loss(state.discriminator(fake))
    else:
        adv = zero
    fake_a, fake_n = _split_maps(fake)
    real_a, real_n = _split_maps(real)
    l1_a = losses.l1_loss(fake_a, real_a) if "l1_albedo" in mask else zero
    l1_n = losses.l1_loss(fake_n, real_n) if "l1_normals" in mask else zero
    style = (
        losses.style_loss([fake_a, fake_n], [real_a, real_n], state.extractor)
        if "style" in mask
        else zero
    )
    g_total = (
        weights.lambda_adv * adv
        + weights.lambda_l1_albedo * l1_a
        + weights.lambda_l1_normals * l1_n
        + weights.lambda_style * style
    )
    g_total.backward()
    state.g_opt.step()

    return losses.total_loss(
        float(adv.detach()),
        float(l1_a.detach()),
        float(l1_n.detach()),
        float(style.detach()),
        weights,
    )


def snapshot(state: TrainState, score: float) -> Checkpoint:
    """Deep-copied weight snapshot, safe to hand to other threads."""
    return Checkpoint(
        iteration=state.iteration,
        generator_state=copy.deepcopy(state.generator.state_dict()),
        discriminator_state=copy.deepcopy(state.discriminator.state_dict()),
        non_adversarial_score=score,
    )


def select_best(checkpoints: list[Checkpoint]) -> Checkpoint:
    """Checkpoint with minimal recorded non-adversarial score."""
    return min(checkpoints, key=lambda c: c.non_adversarial_score)


def train(
    stack: TextureStack,
    config: TrainConfig,
    extractor: FeatureExtractor | None = None,
    log_path=None,
    progress_every: int = 0,
) -> tuple[Checkpoint, list[LossBreakdown]]:
    """Run the full loop, returning (best checkpoint, loss history).

    The best checkpoint minimizes the moving-average (last ``ma_window`` steps)
    non-adversarial score, sampled every ``eval_interval`` iterations.
    """
    if stack.min_side < 2 * config.k:
        raise StackTooSmall(f"stack min side {stack.min_side} < 2k = {2 * config.k}")
    state = setup_training(config, extractor)
    history: list[LossBreakdown] = []
    recent = deque(maxlen=config.ma_window)
    checkpoints = [snapshot(state, math.inf)]

    log_writer = None
    log_file = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w", newline="")
        log_writer = csv.writer(log_file)
        log_writer.writerow(
            ["iteration", "adv", "l1_albedo", "l1_normals", "style", "total",
             "non_adversarial_ma", "lr"]
        )
    try:
        for i in range(1, config.iterations + 1):
            breakdown = training_step(state, stack)
            history.append(breakdown)
            recent.append(breakdown.non_adversarial)
            if i % config.eval_interval == 0 or i == config.iterations:
                score = float(np.mean(recent))
                if checkpoints[-1].iteration != i:
                    checkpoints.append(snapshot(state, score))
                if log_writer is not None:
                    log_writer.writerow(
                        [i, breakdown.adv, breakdown.l1_albedo, breakdown.l1_normals,
                         breakdown.style, breakdown.total, score,
                         learning_rate(config, i)]
                    )
                    log_file.flush()
            if progress_every and i % progress_every == 0:
                print(
                    f"iter {i}/{config.iterations}  total={breakdown.total:.4f}  "
                    f"non_adv={float(np.mean(recent)):.4f}  lr={learning_rate(config, i):.2e}"
                )
    finally:
        if log_file is not None:
            log_file.close()

    return select_best(checkpoints), history


def restore(checkpoint: Checkpoint, config: TrainConfig) -> tuple[Generator, Discriminator]:
    """Rebuild eval-mode models from a checkpoint's weight snapshots."""
    generator = Generator(config.generator)
    generator.load_state_dict(checkpoint.generator_state)
    discriminator = Discriminator(base_channels=config.discriminator_channels)
    discriminator.load_state_dict(checkpoint.discriminator_state)
    generator.eval()
    discriminator.eval()
    return generator, discriminator
