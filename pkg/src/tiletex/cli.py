"""Command-line entry point: train, sample, evaluate, probe, preview.

Exit codes: 0 ok, 2 usage/config error, 3 missing artifact, 4 runtime failure.
Configuration is a JSON file of per-command defaults; command-line flags
override it.  Report paths write matplotlib figures next to the CSV output.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click

from . import losses, metrics, networks, report, sampling, stacks, tileability, training
from .errors import (
    CropRangeInvalid,
    FileMissing,
    TiletexError,
)
from .losses import LossWeights
from .networks import GeneratorConfig
from .sampling import SamplerConfig
from .tileability import TileabilityConfig
from .training import ALL_TERMS, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_RUNTIME = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(config_path, command: str) -> dict:
    if config_path is None:
        return {}
    path = Path(config_path)
    if not path.exists():
        _fail(EXIT_USAGE, f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        _fail(EXIT_USAGE, f"config file {path} is not valid JSON: {exc}")
    section = data.get(command, {})
    if not isinstance(section, dict):
        _fail(EXIT_USAGE, f"config section '{command}' must be an object")
    return section


def _merge(defaults: dict, **flags):
    """Config-file defaults overridden by any flag the user actually set."""
    merged = dict(defaults)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _load_input_stack(albedo, normals):
    try:
        return stacks.load_stack(albedo, normals)
    except FileMissing as exc:
        _fail(EXIT_MISSING, str(exc))
    except TiletexError as exc:
        _fail(EXIT_USAGE, str(exc))


def _load_checkpoint(path):
    path = Path(path)
    if path.is_dir():
        path = path / "best.npz"
    if not path.exists():
        _fail(EXIT_MISSING, f"checkpoint not found: {path}")
    return networks.load_models(path)


@click.group()
def main():
    """Per-exemplar tileable texture stack synthesis."""


@main.command()
@click.option("--albedo", required=True, type=click.Path())
@click.option("--normals", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--iterations", type=int)
@click.option("--k", type=int)
@click.option("--lr", type=float)
@click.option("--seed", type=int)
@click.option("--eval-interval", type=int)
@click.option("--decoder-mode", type=click.Choice(["joint", "split"]))
@click.option("--split-level", type=int)
@click.option("--padding-mode", type=click.Choice(["zeros", "reflect"]))
@click.option("--ablate", help="comma-separated loss terms to disable, e.g. adv,style")
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default=None)
def train(albedo, normals, out, config_path, **flags):
    """Train the expansion GAN on one exemplar stack and keep the best checkpoint."""
    opts = _merge(_load_config(config_path, "train"), **flags)
    stack = _load_input_stack(albedo, normals)
    try:
        ablate = {t for t in str(opts.get("ablate", "")).split(",") if t}
        unknown = ablate - ALL_TERMS
        if unknown:
            _fail(EXIT_USAGE, f"unknown loss terms: {sorted(unknown)}")
        k = int(opts.get("k", 128))
        gen_config = GeneratorConfig(
            input_size=k,
            decoder_mode=opts.get("decoder_mode", "split"),
            split_level=int(opts.get("split_level", 0)),
            padding_mode=opts.get("padding_mode", "zeros"),
        )
        config = TrainConfig(
            k=k,
            iterations=int(opts.get("iterations", 50_000)),
            lr=float(opts.get("lr", 2e-4)),
            seed=int(opts.get("seed", 0)),
            eval_interval=int(opts.get("eval_interval", 500)),
            ablation_mask=ALL_TERMS - ablate,
            loss_weights=LossWeights(),
            generator=gen_config,
        )
    except (ValueError, TiletexError) as exc:
        _fail(EXIT_USAGE, str(exc))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "loss_log.csv"
    try:
        best, _history = training.train(
            stack, config, log_path=log_path, progress_every=config.eval_interval
        )
        generator, discriminator = training.restore(best, config)
        networks.save_models(
            out_dir / "best.npz",
            generator,
            discriminator,
            extra={"iteration": best.iteration, "score": best.non_adversarial_score},
        )
        (out_dir / "best.json").write_text(
            json.dumps(
                {
                    "checkpoint": "best.npz",
                    "iteration": best.iteration,
                    "non_adversarial_score": best.non_adversarial_score,
                },
                indent=2,
            )
        )
        if log_path.exists():
            report.render_loss_curves(log_path, out_dir / "loss_curves.png")
    except TiletexError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    click.echo(f"best checkpoint: iteration {best.iteration} -> {out_dir / 'best.npz'}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--albedo", required=True, type=click.Path())
@click.option("--normals", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--n", type=int)
@click.option("--c-min", type=int)
@click.option("--c-max", type=int)
@click.option("--m", type=int)
@click.option("--size-step", type=int)
@click.option("--seed", type=int)
@click.option("--max-candidates", type=int)
@click.option("--gamma", type=float)
@click.option("--band-fraction", type=float)
@click.option("--split-level", type=int)
@click.option("--heatmaps/--no-heatmaps", default=None)
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default=None)
def sample(checkpoint, albedo, normals, out, config_path, **flags):
    """Search exemplar crops for tileable textures using the trained models."""
    opts = _merge(_load_config(config_path, "sample"), **flags)
    generator, discriminator, _manifest = _load_checkpoint(checkpoint)
    stack = _load_input_stack(albedo, normals)
    try:
        sampler_cfg = SamplerConfig(
            n=int(opts.get("n", 1)),
            c_min=int(opts.get("c_min", 100)),
            c_max=int(opts["c_max"]) if opts.get("c_max") is not None else None,
            m=int(opts.get("m", 3)),
            size_step=int(opts.get("size_step", 1)),
            seed=int(opts.get("seed", 0)),
            max_candidates=int(opts.get("max_candidates", 10_000)),
        )
        tile_cfg = TileabilityConfig(
            band_fraction=float(opts.get("band_fraction", 0.20)),
            gamma=float(opts.get("gamma", 1.0)),
        )
        sampler_cfg.validate()
        tile_cfg.validate()
        result = sampling.sample_textures(
            stack,
            generator,
            discriminator,
            sampler_cfg,
            tile_cfg,
            split_level=opts.get("split_level"),
        )
    except (CropRangeInvalid, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))
    except TiletexError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    out_dir = Path(out)
    bit_depth = int(opts.get("bit_depth", 8))
    sampling.write_report(result, out_dir, bit_depth=bit_depth)
    if opts.get("heatmaps"):
        for i, attempt in enumerate(result.attempts):
            report.render_probability_heatmap(
                attempt.verdict, tile_cfg.band_fraction,
                out_dir / f"heatmap_{i:03d}.png",
            )
    click.echo(
        f"{len(result.accepted)} tile(s) accepted after {len(result.attempts)} "
        f"attempt(s); stopped: {result.stopped_reason}"
    )


def _optional_backbone():
    if os.environ.get(losses.BACKBONE_ENV):
        return losses.PretrainedFeatureExtractor(os.environ[losses.BACKBONE_ENV])
    return None


@main.command()
@click.option("--albedo", required=True, type=click.Path())
@click.option("--normals", required=True, type=click.Path())
@click.option("--exemplar-albedo", required=True, type=click.Path())
@click.option("--exemplar-normals", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def evaluate(albedo, normals, exemplar_albedo, exemplar_normals, out):
    """Tile the output to the exemplar's size and report similarity metrics."""
    output = _load_input_stack(albedo, normals)
    exemplar = _load_input_stack(exemplar_albedo, exemplar_normals)
    try:
        result = metrics.compare_to_exemplar(output, exemplar, _optional_backbone())
    except TiletexError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        ("ssim", result.ssim),
        ("ssim_albedo", result.ssim_albedo),
        ("ssim_normals", result.ssim_normals),
        ("lpips", result.lpips if result.lpips is not None else "unavailable"),
        ("si_fid", result.si_fid if result.si_fid is not None else "unavailable"),
        ("protocol", result.protocol),
    ]
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerows(rows)
    for name, value in rows:
        click.echo(f"{name}: {value}")
    click.echo(result.notes)


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--albedo", required=True, type=click.Path())
@click.option("--normals", required=True, type=click.Path())
@click.option("--shifts", default="0,5,100", show_default=True)
@click.option("--out", required=True, type=click.Path())
def probe(checkpoint, albedo, normals, shifts, out):
    """Check that the discriminator penalizes misaligned albedo/normal pairs."""
    _generator, discriminator, _manifest = _load_checkpoint(checkpoint)
    stack = _load_input_stack(albedo, normals)
    try:
        shift_list = [int(s) for s in shifts.split(",") if s != ""]
    except ValueError:
        _fail(EXIT_USAGE, f"bad --shifts value: {shifts}")
    try:
        results = metrics.consistency_probe(discriminator, stack, shift_list)
    except TiletexError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "probe.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shift_px", "mean_score"])
        writer.writerows(results)
    report.render_probe_bars(results, out_dir / "probe.png")
    for delta, score in results:
        click.echo(f"shift {delta:4d} px -> mean score {score:.4f}")
    values = [v for _, v in results]
    monotone = all(a >= b for a, b in zip(values, values[1:]))
    click.echo(f"monotone non-increasing: {monotone}")


@main.command()
@click.option("--albedo", required=True, type=click.Path())
@click.option("--normals", required=True, type=click.Path())
@click.option("--grid", default="2x2", show_default=True, help="ROWSxCOLS tiling")
@click.option("--out", required=True, type=click.Path())
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default="8")
def preview(albedo, normals, grid, out, bit_depth):
    """Emit tiled preview PNGs of a tile pair plus the seam-gradient statistic."""
    try:
        ny, nx = (int(v) for v in grid.lower().split("x"))
        if ny < 1 or nx < 1:
            raise ValueError
    except ValueError:
        _fail(EXIT_USAGE, f"bad --grid value: {grid} (expected e.g. 2x2)")
    stack = _load_input_stack(albedo, normals)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tiled = stacks.tile_stack(stack, ny, nx)
    stacks.save_stack(
        tiled,
        out_dir / "preview_albedo.png",
        out_dir / "preview_normals.png",
        bit_depth=int(bit_depth),
    )
    report.render_tiled_preview(stack, ny, nx, out_dir / "preview.png")
    cross, interior, ratio = metrics.seam_gradient_stats(stack.albedo)
    click.echo(
        f"seam gradient: cross={cross:.4f} interior={interior:.4f} ratio={ratio:.3f}"
    )


if __name__ == "__main__":
    main()
