"""Decreasing-crop-size search for tileable texture stacks.

Starting at the largest crop of the exemplar, draw candidate crops, expand
each with a tiled latent field, and keep the ones the discriminator-based
quality test accepts.  The search walks down to a minimum crop size and is
capped so it always terminates even when nothing is tileable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import networks, stacks, tileability
from .errors import CropRangeInvalid
from .networks import Discriminator, Generator
from .stacks import CropSpec, TextureStack
from .tileability import TileabilityConfig, TileabilityVerdict

FOUND_N = "FOUND_N"
EXHAUSTED = "EXHAUSTED"
CAP = "CAP"


@dataclass
class SamplerConfig:
    n: int = 1
    c_min: int = 100
    c_max: int | None = None      # defaults to the exemplar's min side
    m: int = 3                    # candidates per size below c_max
    size_step: int = 1
    seed: int = 0
    max_candidates: int = 10_000

    def validate(self):
        if self.n < 1 or self.m < 1 or self.size_step < 1:
            raise CropRangeInvalid("n, m and size_step must all be >= 1")
        if self.c_max is not None and self.c_min > self.c_max:
            raise CropRangeInvalid(f"c_min {self.c_min} > c_max {self.c_max}")


@dataclass
class Attempt:
    spec: CropSpec
    verdict: TileabilityVerdict


@dataclass
class SamplerReport:
    attempts: list[Attempt] = field(default_factory=list)
    accepted: list[tuple[TextureStack, CropSpec]] = field(default_factory=list)
    stopped_reason: str = EXHAUSTED


def _round_down_4(c: int) -> int:
    return c - (c % 4)


def sample_textures(
    stack: TextureStack,
    generator: Generator,
    discriminator: Discriminator,
    sampler_cfg: SamplerConfig,
    tile_cfg: TileabilityConfig,
    split_level: int | None = None,
) -> SamplerReport:
    """Search crops from c_max down to c_min, collecting n accepted tiles.

    At c_max only one crop exists; below it, up to m random crops per size.
    Crop sides are rounded down to a multiple of 4 for the generator.
    """
    sampler_cfg.validate()
    c_max = sampler_cfg.c_max if sampler_cfg.c_max is not None else stack.min_side
    if sampler_cfg.c_min > c_max:
        raise CropRangeInvalid(f"c_min {sampler_cfg.c_min} > c_max {c_max}")
    if sampler_cfg.c_min > stack.min_side:
        raise CropRangeInvalid(
            f"c_min {sampler_cfg.c_min} > exemplar min side {stack.min_side}"
        )
    c_max = min(c_max, stack.min_side)

    rng = np.random.default_rng(sampler_cfg.seed)
    report = SamplerReport()
    total = 0
    for c in range(c_max, sampler_cfg.c_min - 1, -sampler_cfg.size_step):
        candidates = 1 if c == c_max else sampler_cfg.m
        side = _round_down_4(c)
        if side < 4:
            break
        for _ in range(candidates):
            if total >= sampler_cfg.max_candidates:
                report.stopped_reason = CAP
                return report
            crop_stack, spec = stacks.random_crop_rng(stack, side, rng)
            _, tile = networks.generate_seamless(generator, crop_stack, split_level)
            verdict = tileability.evaluate_candidate(discriminator, tile, tile_cfg)
            report.attempts.append(Attempt(spec=spec, verdict=verdict))
            total += 1
            if verdict.tileable:
                report.accepted.append((tile, spec))
                if len(report.accepted) >= sampler_cfg.n:
                    report.stopped_reason = FOUND_N
                    return report
    report.stopped_reason = EXHAUSTED
    return report


def write_report(report: SamplerReport, out_dir, bit_depth: int = 8) -> None:
    """Persist the attempt log (CSV + JSON summary) and accepted tile PNG pairs.

    Tile files are named tile_<index>_s<size>_y<top>_x<left>_{albedo,normals}.png.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "attempts.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "size", "top", "left", "tileable", "m_v", "m_h", "m_d", "tau"])
        for i, attempt in enumerate(report.attempts):
            row = tileability.verdict_row(attempt.verdict)
            writer.writerow(
                [i, attempt.spec.size, attempt.spec.top, attempt.spec.left,
                 row["tileable"], row["m_v"], row["m_h"], row["m_d"], row["tau"]]
            )
    summary = {
        "stopped_reason": report.stopped_reason,
        "num_attempts": len(report.attempts),
        "num_accepted": len(report.accepted),
        "accepted": [
            {"size": spec.size, "top": spec.top, "left": spec.left}
            for _, spec in report.accepted
        ],
    }
    (out_dir / "report.json").write_text(json.dumps(summary, indent=2))
    for i, (tile, spec) in enumerate(report.accepted):
        base = f"tile_{i:03d}_s{spec.size}_y{spec.top}_x{spec.left}"
        stacks.save_stack(
            tile,
            out_dir / f"{base}_albedo.png",
            out_dir / f"{base}_normals.png",
            bit_depth=bit_depth,
        )
