import numpy as np
import pytest

from tiletex import networks, sampling, tileability
from tiletex.errors import CropRangeInvalid
from tiletex.networks import ProbabilityMap
from tiletex.sampling import CAP, EXHAUSTED, FOUND_N, SamplerConfig
from tiletex.tileability import TileabilityConfig, TileabilityVerdict

from conftest import make_random_stack


def _stub_pipeline(monkeypatch, accept):
    """Replace the generator/discriminator path with a cheap verdict stub.

    ``accept`` maps a crop side to a boolean (or is a callable).
    """
    def fake_generate(generator, crop_stack, split_level=None):
        return crop_stack, crop_stack

    def fake_evaluate(discriminator, candidate, config):
        ok = accept(candidate.height) if callable(accept) else accept
        pmap = ProbabilityMap(scores=np.full((8, 8), 0.9), downsample_factor=8)
        return TileabilityVerdict(
            tileable=ok, m_v=0.9, m_h=0.9, m_d=0.9, tau=0.9, map=pmap
        )

    monkeypatch.setattr(sampling.networks, "generate_seamless", fake_generate)
    monkeypatch.setattr(sampling.tileability, "evaluate_candidate", fake_evaluate)


class TestSampleTextures:
    def test_always_true_accepts_at_cmax(self, monkeypatch):
        _stub_pipeline(monkeypatch, True)
        stack = make_random_stack(256)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=2, c_min=100, c_max=256, m=3, seed=0),
            TileabilityConfig(),
        )
        assert report.stopped_reason == FOUND_N
        assert len(report.accepted) == 2
        assert report.accepted[0][1].size == 256
        sizes = [a.spec.size for a in report.attempts]
        assert sizes == sorted(sizes, reverse=True)

    def test_exhausted_attempt_count(self, monkeypatch):
        # 1 attempt at c_max plus m=3 for each of the 8 smaller sizes
        _stub_pipeline(monkeypatch, False)
        stack = make_random_stack(128)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=1, c_min=100, c_max=108, m=3, size_step=1, seed=0),
            TileabilityConfig(),
        )
        assert report.stopped_reason == EXHAUSTED
        assert len(report.attempts) == 25
        assert len(report.accepted) == 0

    def test_accepts_largest_size_below_threshold(self, monkeypatch):
        _stub_pipeline(monkeypatch, lambda side: side <= 200)
        stack = make_random_stack(256)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=1, c_min=100, c_max=256, m=1, seed=0),
            TileabilityConfig(),
        )
        assert report.stopped_reason == FOUND_N
        # crop sides are rounded down to a multiple of 4
        assert report.accepted[0][1].size == 200

    def test_determinism(self, monkeypatch):
        _stub_pipeline(monkeypatch, False)
        stack = make_random_stack(128)
        config = SamplerConfig(n=1, c_min=110, c_max=120, m=2, seed=9)
        r1 = sampling.sample_textures(stack, None, None, config, TileabilityConfig())
        r2 = sampling.sample_textures(stack, None, None, config, TileabilityConfig())
        assert [a.spec for a in r1.attempts] == [a.spec for a in r2.attempts]

    def test_cap(self, monkeypatch):
        _stub_pipeline(monkeypatch, False)
        stack = make_random_stack(256)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=1, c_min=100, c_max=256, m=3, max_candidates=10, seed=0),
            TileabilityConfig(),
        )
        assert report.stopped_reason == CAP
        assert len(report.attempts) == 10

    def test_crop_range_invalid(self):
        stack = make_random_stack(128)
        with pytest.raises(CropRangeInvalid):
            sampling.sample_textures(
                stack, None, None,
                SamplerConfig(n=1, c_min=100, c_max=90),
                TileabilityConfig(),
            )

    def test_c_min_exceeds_stack(self):
        stack = make_random_stack(64)
        with pytest.raises(CropRangeInvalid):
            sampling.sample_textures(
                stack, None, None,
                SamplerConfig(n=1, c_min=100),
                TileabilityConfig(),
            )

    def test_sizes_never_revisited(self, monkeypatch):
        _stub_pipeline(monkeypatch, False)
        stack = make_random_stack(128)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=1, c_min=100, c_max=128, m=1, size_step=4, seed=0),
            TileabilityConfig(),
        )
        sizes = [a.spec.size for a in report.attempts]
        assert sizes == sorted(set(sizes), reverse=True)

    def test_real_models_end_to_end(self):
        # no stubs: random-weight models, gamma 0 accepts the first candidate
        gen = networks.build_generator(
            networks.GeneratorConfig(input_size=64, base_channels=16), seed=0
        )
        disc = networks.build_discriminator(1, base_channels=16)
        stack = make_random_stack(128)
        report = sampling.sample_textures(
            stack, gen, disc,
            SamplerConfig(n=1, c_min=100, c_max=128, m=1, seed=0),
            TileabilityConfig(gamma=0.0),
        )
        assert report.stopped_reason == FOUND_N
        tile, spec = report.accepted[0]
        assert tile.height == 2 * spec.size


class TestWriteReport:
    def test_writes_files(self, monkeypatch, tmp_path):
        _stub_pipeline(monkeypatch, True)
        stack = make_random_stack(128)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=1, c_min=100, c_max=128, seed=0),
            TileabilityConfig(),
        )
        sampling.write_report(report, tmp_path)
        assert (tmp_path / "attempts.csv").exists()
        assert (tmp_path / "report.json").exists()
        pngs = sorted(p.name for p in tmp_path.glob("tile_*.png"))
        assert len(pngs) == 2
        assert any("albedo" in n for n in pngs) and any("normals" in n for n in pngs)

    def test_accepted_verdicts_are_tileable(self, monkeypatch):
        _stub_pipeline(monkeypatch, lambda side: side % 8 == 0)
        stack = make_random_stack(128)
        report = sampling.sample_textures(
            stack, None, None,
            SamplerConfig(n=3, c_min=100, c_max=128, m=2, seed=1),
            TileabilityConfig(),
        )
        assert len(report.accepted) <= 3
        accepted_sizes = {spec.size for _, spec in report.accepted}
        for attempt in report.attempts:
            if attempt.spec.size in accepted_sizes and attempt.verdict.tileable:
                assert attempt.verdict.tileable
