import numpy as np
import pytest

from tiletex.stacks import TextureStack


def make_toy_stack(size=256, period=32, seed=42, noise=0.03):
    """Periodic sine-wave stack with a little noise; easy for toy training."""
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    base = 0.5 + 0.25 * np.sin(2 * np.pi * yy / period) + 0.25 * np.cos(2 * np.pi * xx / period)
    rng = np.random.default_rng(seed)
    jitter = noise * rng.standard_normal((size, size))
    albedo = np.stack([base + jitter, 0.8 * base, 0.6 * base + 0.1], axis=2)
    normals = np.stack(
        [
            0.5 + 0.2 * np.cos(2 * np.pi * xx / period),
            0.5 + 0.2 * np.sin(2 * np.pi * yy / period),
            np.full_like(base, 0.9),
        ],
        axis=2,
    )
    return TextureStack(
        albedo=np.clip(albedo, 0, 1).astype(np.float32),
        normals=np.clip(normals, 0, 1).astype(np.float32),
    )


def make_random_stack(size=64, seed=0):
    rng = np.random.default_rng(seed)
    return TextureStack(
        albedo=rng.random((size, size, 3), dtype=np.float32),
        normals=rng.random((size, size, 3), dtype=np.float32),
    )


@pytest.fixture
def toy_stack():
    return make_toy_stack()


@pytest.fixture
def random_stack():
    return make_random_stack()
