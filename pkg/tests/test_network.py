import numpy as np
import pytest

from dcmix import ops
from dcmix.gradcheck import grad_check
from dcmix.mixing import MixingWeights, blend
from dcmix.models import DcmixModel, PlainModel, build_model
from dcmix.network import (
    ConfigError,
    NetworkConfig,
    StageConfig,
    blend_flops,
    build_network,
    count_parameters,
    default_mnist_config,
    estimate_flops,
    network_flops,
)
from dcmix.tensor import Tensor


TOY = NetworkConfig(
    stages=(StageConfig(4, 3, 1), StageConfig(8, 3, 2)),
    class_count=4,
    input_size=8,
    input_channels=1,
)


class TestBuild:
    def test_same_seed_bitwise_identical(self):
        n1 = build_network(TOY, seed=5)
        n2 = build_network(TOY, seed=5)
        for k in n1.params:
            assert np.array_equal(n1.params[k].data, n2.params[k].data)

    def test_different_seed_differs(self):
        n1 = build_network(TOY, seed=5)
        n2 = build_network(TOY, seed=6)
        assert not np.array_equal(n1.params["stage0.kernel"].data, n2.params["stage0.kernel"].data)

    def test_default_config_parameter_budget(self):
        net = build_network(default_mnist_config(), seed=0)
        assert count_parameters(net) <= 300_000

    def test_zero_stage_head_analytic_count(self):
        cfg = NetworkConfig(stages=(), class_count=5, input_size=4, input_channels=3)
        net = build_network(cfg, seed=0)
        # pooled 3 features -> dense (3+1)*5
        assert count_parameters(net) == (3 + 1) * 5

    def test_spatial_collapse_rejected(self):
        cfg = NetworkConfig(
            stages=tuple(StageConfig(4, 3, 4) for _ in range(4)),
            class_count=2,
            input_size=8,
        )
        with pytest.raises(ConfigError, match="collapses"):
            build_network(cfg, seed=0)


class TestForward:
    def test_batch_of_one_shape(self):
        net = build_network(default_mnist_config(), seed=0)
        out = net.forward(Tensor(np.zeros((1, 28, 28, 1), dtype=np.float32)))
        assert out.shape == (1, 10)

    def test_identical_rows_for_identical_inputs(self):
        net = build_network(TOY, seed=1)
        x = np.random.default_rng(0).uniform(size=(1, 8, 8, 1)).astype(np.float32)
        batch = np.concatenate([x, x], axis=0)
        out = net.forward(Tensor(batch))
        np.testing.assert_array_equal(out.data[0], out.data[1])

    def test_frozen_network_bitwise_stable(self):
        net = build_network(TOY, seed=2)
        x = np.random.default_rng(1).uniform(size=(3, 8, 8, 1)).astype(np.float32)
        out1 = net.forward(Tensor(x))
        out2 = net.forward(Tensor(x.copy()))
        assert np.array_equal(out1.data, out2.data)

    def test_retains_feature_maps_on_request(self):
        net = build_network(TOY, seed=0)
        net.forward(Tensor(np.zeros((1, 8, 8, 1), dtype=np.float32)), retain_maps=True)
        assert set(net.feature_maps) == {"stage0", "stage1"}


class TestCountParameters:
    def test_empty_network(self):
        class Empty:
            def parameters(self):
                return []

        assert count_parameters(Empty()) == 0

    def test_single_conv_by_hand(self):
        cfg = NetworkConfig(stages=(StageConfig(8, 3, 1),), class_count=2, input_size=6)
        net = build_network(cfg, seed=0)
        conv = net.params["stage0.kernel"].size + net.params["stage0.bias"].size
        assert conv == 3 * 3 * 1 * 8 + 8 == 80

    @pytest.mark.parametrize("c", [1, 3, 6, 16])
    def test_wrapped_minus_plain_is_channel_count(self, c):
        plain_cfg = NetworkConfig(stages=TOY.stages, class_count=4, input_size=8, input_channels=c)
        plain = PlainModel.build(plain_cfg, c, seed=0)
        wrapped = DcmixModel.build(TOY, c, seed=0)
        # same backbone shape apart from the first kernel's input channels
        first_kernel_delta = 3 * 3 * (c - 1) * 4
        assert count_parameters(wrapped) - (count_parameters(plain) - first_kernel_delta) == c

    @pytest.mark.parametrize("c", [1, 3, 6, 16])
    def test_mixing_overhead_identity_same_backbone(self, c):
        plain = PlainModel.build(TOY, 1, seed=0)
        wrapped = DcmixModel.build(TOY, c, seed=0)
        assert count_parameters(wrapped) - count_parameters(plain) == c


class TestFlops:
    def test_dense_8_to_3(self):
        cfg = NetworkConfig(stages=(), class_count=3, input_size=1, input_channels=8)
        # pool of 1x1x8 costs 8; head dense 2*8*3
        assert network_flops(cfg) == 8 + 48

    def test_blend_28x28x3(self):
        assert blend_flops(28, 28, 3) == (2 * 3 - 1) * 28 * 28 == 3920

    def test_wrapped_vs_plain_differ_by_blend_term(self):
        c = 3
        wrapped = DcmixModel.build(TOY, c, seed=0)
        plain = PlainModel.build(TOY, 1, seed=0)
        diff = estimate_flops(wrapped, (8, 8, c)) - estimate_flops(plain, (8, 8, 1))
        assert diff == blend_flops(8, 8, c)

    def test_additive_over_layers(self):
        one = NetworkConfig(stages=(StageConfig(4, 3, 1),), class_count=4, input_size=8)
        two = NetworkConfig(stages=(StageConfig(4, 3, 1), StageConfig(8, 3, 1)), class_count=4, input_size=8)
        stage2_cost = 2 * 3 * 3 * 4 * 8 * 8 * 8 + 8 * 8 * 8
        pool_delta = 8 * 8 * 8 - 8 * 8 * 4
        head_delta = 2 * 8 * 4 - 2 * 4 * 4
        assert network_flops(two) - network_flops(one) == stage2_cost + pool_delta + head_delta


def _swap_param(model, name, tensor):
    """Replace one named parameter object; returns the original."""
    if name == "mixing.alphas":
        original = model.mixing.alphas
        model.mixing.alphas = tensor
        return original
    key = name.removeprefix("network.")
    original = model.network.params[key]
    model.network.params[key] = tensor
    return original


def _param_check(model, name, image, labels):
    param = dict(model.named_tensors())[name]

    def f(t: Tensor) -> Tensor:
        original = _swap_param(model, name, t)
        try:
            return ops.softmax_cross_entropy(model.forward(image), labels)
        finally:
            _swap_param(model, name, original)

    return grad_check(f, Tensor(param.data.copy(), dtype=np.float64))


class TestGradients:
    def test_full_model_gradcheck_on_toy_config(self):
        rng = np.random.default_rng(0)
        image = Tensor(rng.uniform(size=(2, 8, 8, 3)), dtype=np.float64)
        labels = rng.integers(0, 4, size=2)
        model = build_model("dcmix", TOY, 3, seed=0, dtype=np.float64)
        for name in model.named_tensors():
            err = _param_check(model, name, image, labels)
            assert err < 1e-4, f"{name}: {err}"
