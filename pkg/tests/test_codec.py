"""Codec stages, shape bookkeeping, power normalization, checkpoints."""

from fractions import Fraction

import numpy as np
import pytest

from gssmjscc.codec import (CheckpointError, Codec, ConfigError, ModelConfig,
                            depth_to_space, desk_config, load_checkpoint,
                            full_scale_config, pack_symbols, power_normalize,
                            save_checkpoint, space_to_depth, unpack_symbols)
from gssmjscc.gssm import CsiRestConfig
from gssmjscc.tensor import Rng, Tensor, no_grad


@pytest.fixture
def rng():
    return Rng(91)


def tiny_config(seed=0, **kw):
    args = dict(stages=2, blocks=(1, 1), widths=(4, 6), image_size=(16, 16),
                cbr=Fraction(1, 8), state_dim=3,
                csi=CsiRestConfig(refresh_interval=4), seed=seed)
    args.update(kw)
    return ModelConfig(**args)


class TestModelConfig:
    def test_full_scale_shape_trace(self):
        cfg = full_scale_config(image=128)
        assert cfg.stage_shapes() == [
            (128, 32, 32), (192, 16, 16), (256, 8, 8), (320, 8, 8)]
        assert cfg.k_uses == 3 * 128 * 128 // 48 == 1024
        assert cfg.signal_channels == 32  # 16 complex channels on 8x8

    def test_final_stage_downsample_knob(self):
        cfg = full_scale_config(image=128)
        cfg.stage4_downsample = True
        assert cfg.stage_shapes()[-1] == (320, 4, 4)

    def test_desk_trace(self):
        cfg = desk_config()
        assert cfg.stage_shapes() == [(32, 8, 8), (48, 4, 4)]
        assert cfg.k_uses == 256
        assert cfg.signal_channels == 32

    def test_divisibility_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(image_size=(18, 18)).validate()

    def test_fractional_channel_uses_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(cbr=Fraction(1, 7)).validate()

    def test_mismatched_stage_lists_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(widths=(4, 6, 8)).validate()

    def test_lines_round_trip(self):
        cfg = tiny_config(seed=9)
        back = ModelConfig.from_lines(cfg.to_lines())
        assert back == cfg

    def test_cbr_accounting_exact(self):
        cfg = desk_config()
        assert Fraction(cfg.k_uses, 3 * 32 * 32) == cfg.cbr


class TestSpatialRearrangement:
    def test_pixel_shuffle_ordering(self):
        x = Tensor(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1))
        out = depth_to_space(x, 2).data
        assert np.array_equal(out[0, 0], [[1.0, 2.0], [3.0, 4.0]])

    def test_space_depth_round_trip(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 3, 8, 8)))
        back = depth_to_space(space_to_depth(x, 4), 4)
        assert np.array_equal(back.data, x.data)

    def test_pack_unpack_round_trip(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 6, 4, 4)))
        back = unpack_symbols(pack_symbols(x), 6, 4, 4)
        assert np.array_equal(back.data, x.data)


class TestPatchOps:
    def test_embed_shapes_at_full_size_widths(self):
        cfg = full_scale_config(image=128)
        p, w = cfg.stage_shapes()[0][1:]
        assert (cfg.widths[0], p, w) == (128, 32, 32)

    def test_embed_zero_image_zero_bias(self):
        codec = Codec(tiny_config())
        with no_grad():
            out = codec.patch_embed(Tensor(np.zeros((1, 3, 16, 16))))
        assert np.all(out.data == 0.0)

    def test_embed_equals_flattened_fc(self, rng):
        codec = Codec(tiny_config(image_size=(16, 16)))
        img = rng.uniform(0, 1, (1, 3, 16, 16))
        with no_grad():
            out = codec.patch_embed(Tensor(img)).data
            gathered = space_to_depth(Tensor(img), 4)
        tokens = gathered.data[0].reshape(48, 16).T
        want = tokens @ codec.embed.w.data + codec.embed.b.data
        assert np.allclose(out[0].reshape(4, -1).T, want, atol=1e-12)

    def test_merge_constant_input_is_spatially_constant(self, rng):
        codec = Codec(tiny_config())
        x = Tensor(np.full((1, 4, 8, 8), 0.37))
        with no_grad():
            out = codec.enc_merges[0](x).data
        assert out.shape == (1, 6, 4, 4)
        for c in range(6):
            assert np.allclose(out[0, c], out[0, c, 0, 0], atol=1e-12)

    def test_merge_recovers_gathered_values_with_inverse_affine(self):
        """With the norm affine undoing the statistics and an identity FC,
        a merge returns exactly the four gathered values."""
        from gssmjscc.codec import _MergeOp
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        op = _MergeOp(Rng(0), c_in=1, c_out=4, down=True)
        op.fc.w.data = np.eye(4)
        op.fc.b.data[:] = 0.0
        eps = op.norm.eps
        op.norm.gamma.data = np.full(4, np.sqrt(vals.var() + eps))
        op.norm.beta.data = np.full(4, vals.mean())
        x = Tensor(vals.reshape(1, 1, 2, 2))
        with no_grad():
            out = op(x).data
        assert np.allclose(out[0, :, 0, 0], vals, atol=1e-9)

    def test_divide_shuffles_identity_fc(self):
        from gssmjscc.codec import _DivideOp
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        op = _DivideOp(Rng(0), c_in=4, c_out=1, down=True)
        op.fc.w.data = np.eye(4)
        op.fc.b.data[:] = 0.0
        eps = op.norm.eps
        op.norm.gamma.data = np.full(4, np.sqrt(vals.var() + eps))
        op.norm.beta.data = np.full(4, vals.mean())
        x = Tensor(vals.reshape(1, 4, 1, 1))
        with no_grad():
            out = op(x).data
        assert np.allclose(out[0, 0], [[1.0, 2.0], [3.0, 4.0]], atol=1e-9)

    def test_divide_inverts_merge_shapes(self, rng):
        codec = Codec(tiny_config())
        x = Tensor(rng.uniform(-1, 1, (1, 6, 4, 4)))
        with no_grad():
            out = codec.dec_divides[0](x)
        assert out.shape == (1, 4, 8, 8)

    def test_divide_zero_in_zero_out(self):
        codec = Codec(tiny_config())
        with no_grad():
            out = codec.dec_divides[0](Tensor(np.zeros((1, 6, 4, 4))))
        assert np.all(out.data == 0.0)


class TestSignalPath:
    def test_power_normalized_to_unit(self, rng):
        x = Tensor(rng.uniform(-3, 3, (2, 8, 4, 4)))
        sig = power_normalize(pack_symbols(x))
        assert np.all(np.abs(sig.power - 1.0) <= 1e-9)

    def test_all_equal_symbols_become_unit_modulus(self):
        x = Tensor(np.full((1, 2, 2, 2), 0.7))
        sig = power_normalize(pack_symbols(x))
        mags = np.sqrt(np.sum(sig.symbols.data ** 2, axis=-1))
        assert np.allclose(mags, 1.0, atol=1e-12)

    def test_compress_expand_shape_round_trip(self, rng):
        codec = Codec(tiny_config())
        x = Tensor(rng.uniform(-1, 1, (2, 6, 2, 2)))
        with no_grad():
            sig = codec.conv_compress(x)
            back = codec.conv_expand(sig, 2)
        assert sig.symbols.shape == (2, codec.cfg.k_uses, 2)
        assert back.shape == x.shape

    def test_compress_rejects_wrong_grid(self, rng):
        codec = Codec(tiny_config())
        with pytest.raises(ConfigError):
            codec.conv_compress(Tensor(rng.uniform(-1, 1, (2, 6, 4, 4))))

    def test_expand_identity_weights_pass_through(self, rng):
        # config where signal channels equal the final stage width
        cfg = tiny_config(stages=1, blocks=(1,), widths=(8,),
                          cbr=Fraction(1, 12))
        assert cfg.signal_channels == 8
        codec = Codec(cfg)
        codec.expand.w.data = np.eye(8)
        codec.expand.b.data[:] = 0.0
        x = Tensor(rng.uniform(-1, 1, (1, 8, 4, 4)))
        with no_grad():
            sig = codec.conv_compress(x)
            back = codec.conv_expand(sig, 1)
        _, p, w = cfg.stage_shapes()[-1]
        want = unpack_symbols(sig.symbols, 8, p, w).data
        assert np.allclose(back.data, want, atol=1e-12)

    def test_zero_signal_zero_bias_zero_patches(self):
        codec = Codec(tiny_config())
        sig = Tensor(np.zeros((1, codec.cfg.k_uses, 2)))
        with no_grad():
            out = codec.conv_expand(sig, 1)
        assert np.all(out.data == 0.0)


class TestEndToEnd:
    def test_random_model_round_trip_finite(self, rng):
        codec = Codec(tiny_config(seed=4))
        x = Tensor(rng.uniform(0, 1, (2, 3, 16, 16)))
        with no_grad():
            sig = codec.encode(x, 10.0)
            out = codec.decode(sig, 10.0)
        assert out.shape == (2, 3, 16, 16)
        assert np.all(np.isfinite(out.data))

    @pytest.mark.parametrize("cfg_kw", [
        dict(stages=1, blocks=(1,), widths=(4,), cbr=Fraction(1, 24)),
        dict(stages=2, blocks=(1, 1), widths=(4, 6), cbr=Fraction(1, 8)),
        dict(stages=3, blocks=(1, 0, 1), widths=(4, 6, 8),
             image_size=(32, 32), cbr=Fraction(1, 16)),
    ], ids=["one-stage", "two-stage", "three-stage"])
    def test_decoder_mirrors_encoder_shapes(self, rng, cfg_kw):
        cfg = tiny_config(**cfg_kw)
        codec = Codec(cfg)
        P, W = cfg.image_size
        x = Tensor(rng.uniform(0, 1, (1, 3, P, W)))
        with no_grad():
            out = codec.decode(codec.encode(x, 5.0), 5.0)
        assert out.shape == (1, 3, P, W)

    def test_decoder_mirrors_encoder_on_random_configs(self):
        rng = Rng(331)
        built = 0
        attempts = 0
        while built < 4 and attempts < 60:
            attempts += 1
            stages = int(rng.integers(1, 4))
            widths = tuple(int(rng.integers(2, 5)) * 2
                           for _ in range(stages))
            blocks = tuple(int(rng.integers(0, 2)) for _ in range(stages))
            size = int(rng.integers(1, 3)) * 16
            cfg = ModelConfig(stages=stages, blocks=blocks, widths=widths,
                              image_size=(size, size), cbr=Fraction(1, 16),
                              state_dim=int(rng.integers(2, 5)),
                              csi=CsiRestConfig(refresh_interval=4),
                              seed=int(rng.integers(0, 100)))
            try:
                cfg.validate()
            except ConfigError:
                continue
            codec = Codec(cfg)
            x = Tensor(Rng(built).uniform(0, 1, (1, 3, size, size)))
            with no_grad():
                out = codec.decode(codec.encode(x, 5.0), 5.0)
            assert out.shape == (1, 3, size, size)
            assert np.all(np.isfinite(out.data))
            built += 1
        assert built == 4

    def test_unbatched_input_rejected(self):
        codec = Codec(tiny_config())
        with pytest.raises(ValueError):
            codec.encode(Tensor(np.zeros((3, 16, 16))), 10.0)

    def test_invalid_config_fails_before_compute(self):
        with pytest.raises(ConfigError):
            Codec(tiny_config(cbr=Fraction(1, 7)))


class TestCheckpoint:
    def test_round_trip_bytes_and_values(self, tmp_path):
        codec = Codec(tiny_config(seed=8))
        path = tmp_path / "model.mjsc"
        save_checkpoint(path, codec, step=17)
        loaded, step = load_checkpoint(path)
        assert step == 17
        for (n1, p1), (n2, p2) in zip(codec.named_params(),
                                      loaded.named_params()):
            assert n1 == n2
            assert np.array_equal(p1.data, p2.data)
        path2 = tmp_path / "again.mjsc"
        save_checkpoint(path2, loaded, step=17)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.mjsc"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_version_rejected(self, tmp_path):
        codec = Codec(tiny_config())
        path = tmp_path / "model.mjsc"
        save_checkpoint(path, codec)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_mutated_params_survive_round_trip(self, tmp_path):
        codec = Codec(tiny_config(seed=2))
        name, p = codec.named_params()[5]
        p.data = p.data + 0.5
        path = tmp_path / "model.mjsc"
        save_checkpoint(path, codec, step=1)
        loaded, _ = load_checkpoint(path)
        got = dict(loaded.named_params())[name]
        assert np.array_equal(got.data, p.data)
