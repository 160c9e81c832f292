"""Per-exemplar tileable texture stack synthesis toolkit."""

from .stacks import CropSpec, TextureStack, center_crop, load_stack, random_crop, save_stack, tile_stack
from .networks import (
    Discriminator,
    Generator,
    GeneratorConfig,
    LatentField,
    ProbabilityMap,
    build_discriminator,
    build_generator,
    discriminate,
    generate_seamless,
    generator_forward,
)
from .losses import LossBreakdown, LossWeights
from .training import Checkpoint, TrainConfig, train, training_step
from .tileability import TileabilityConfig, TileabilityVerdict, evaluate_candidate, is_tileable
from .sampling import SamplerConfig, SamplerReport, sample_textures
from .metrics import MetricReport, compare_to_exemplar, consistency_probe, ssim, tile_to_match

__version__ = "0.1.0"
