import numpy as np
import pytest

from alice import autodiff as ad
from alice.autodiff import ShapeError, Tape, Tensor
from alice.nets import (Discriminator, Mlp, MlpConfig, StochasticMap, dae_forward, discriminate,
                        load_checkpoint, sample_map, save_checkpoint)


def zeroed(model):
    model.zero_()
    return model


def test_config_validation():
    with pytest.raises(ValueError):
        MlpConfig(2, 2, hidden_widths=[])
    with pytest.raises(ValueError):
        MlpConfig(2, 2, activation="gelu")
    with pytest.raises(ValueError):
        MlpConfig(2, 2, output_head="mixture")
    assert MlpConfig(2, 3, [4, 5], noise_dim=2).layer_sizes == [4, 4, 5, 3]


def test_zero_net_outputs_zero():
    m = zeroed(StochasticMap(MlpConfig(2, 3, [8]), "decoder"))
    out = sample_map(m, np.random.default_rng(0).normal(size=(5, 2)), np.random.default_rng(1))
    np.testing.assert_array_equal(out.data, np.zeros((5, 3)))


def test_deterministic_map_is_repeatable():
    m = StochasticMap(MlpConfig(2, 2, [8], noise_dim=0, seed=3), "encoder")
    assert m.deterministic
    x = np.ones((4, 2))
    a = sample_map(m, x, np.random.default_rng(0)).data
    b = sample_map(m, x, np.random.default_rng(99)).data
    np.testing.assert_array_equal(a, b)


def test_same_seed_same_output():
    x = np.ones((3, 2))
    outs = [sample_map(StochasticMap(MlpConfig(2, 2, [8], noise_dim=2, seed=4)), x,
                       np.random.default_rng(10)).data for _ in range(2)]
    np.testing.assert_array_equal(*outs)


def test_noise_gives_output_variance():
    m = StochasticMap(MlpConfig(2, 2, [16], noise_dim=2, seed=1))
    out = sample_map(m, np.zeros((10_000, 2)), np.random.default_rng(0)).data
    assert np.all(out.var(axis=0) > 0)


def test_input_dim_mismatch_rejected():
    m = StochasticMap(MlpConfig(2, 2, [4]))
    with pytest.raises(ShapeError):
        sample_map(m, np.ones((3, 3)), np.random.default_rng(0))


def test_zero_discriminator_gives_half():
    d = zeroed(Discriminator(MlpConfig(4, 1, [8]), "joint"))
    logit, feat = discriminate(d, np.ones((6, 2)), np.ones((6, 2)))
    assert logit.shape == (6, 1)
    np.testing.assert_allclose(ad.sigmoid(logit).data, 0.5)
    assert feat.shape == (6, 8)


def test_discriminator_permutation_equivariant():
    rng = np.random.default_rng(2)
    d = Discriminator(MlpConfig(4, 1, [8, 8], activation="relu", seed=5))
    a, b = rng.normal(size=(9, 2)), rng.normal(size=(9, 2))
    perm = rng.permutation(9)
    full, _ = discriminate(d, a, b)
    permuted, _ = discriminate(d, a[perm], b[perm])
    np.testing.assert_allclose(full.data[perm], permuted.data, rtol=0, atol=1e-12)


def test_discriminator_shape_errors():
    d = Discriminator(MlpConfig(4, 1, [8]))
    with pytest.raises(ShapeError):
        discriminate(d, np.ones((3, 2)), np.ones((4, 2)))
    with pytest.raises(ShapeError):
        discriminate(d, np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(ValueError):
        Discriminator(MlpConfig(4, 2, [8]))


@pytest.mark.parametrize("width", [8, 64, 256, 512])
@pytest.mark.parametrize("fan_in", [2, 4, 64])
def test_init_preactivation_scale(width, fan_in):
    m = Mlp(MlpConfig(fan_in, 1, [width], seed=width + fan_in))
    x = np.random.default_rng(0).standard_normal((4096, fan_in))
    pre = x @ m.params["W0"] + m.params["b0"]
    assert 0.5 <= pre.std() <= 2.0


def test_watched_run_produces_gradients_unwatched_does_not():
    m = Mlp(MlpConfig(2, 1, [4], seed=0))
    tape = Tape()
    out, _ = m.run(Tensor(np.ones((2, 2))), tape)
    assert not out.tracked
    tape.watch(m)
    out, _ = m.run(Tensor(np.ones((2, 2))), tape)
    tape.backward(ad.total(out))
    assert set(tape.grads(m)) == set(m.params)


def test_dae_forward_zero_nets():
    enc = zeroed(StochasticMap(MlpConfig(2, 2, [4]), "encoder"))
    dec = zeroed(StochasticMap(MlpConfig(2, 2, [4]), "decoder"))
    out = dae_forward(enc, dec, np.ones((3, 2)), 0.1, np.random.default_rng(0))
    np.testing.assert_array_equal(out.data, 0.0)
    with pytest.raises(ValueError):
        dae_forward(enc, dec, np.ones((3, 2)), -1.0, np.random.default_rng(0))


def test_checkpoint_round_trip(tmp_path):
    models = {
        "decoder": StochasticMap(MlpConfig(2, 2, [5, 3], noise_dim=2, seed=1), "decoder"),
        "joint": Discriminator(MlpConfig(4, 1, [6], activation="relu", seed=2), "joint",
                               feature_layer=0),
        "classifier": Mlp(MlpConfig(2, 5, [7], seed=3), name="classifier"),
    }
    path = tmp_path / "ck.json"
    save_checkpoint(path, models)
    loaded = load_checkpoint(path)
    assert type(loaded["decoder"]) is StochasticMap
    assert loaded["joint"].feature_layer == 0
    for key, m in models.items():
        assert loaded[key].config == m.config
        for k, v in m.params.items():
            assert np.array_equal(loaded[key].params[k], v)


def test_checkpoint_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(p)
