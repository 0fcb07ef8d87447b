import numpy as np
import pytest

from figsep.nn import (
    BatchNorm2D,
    Conv2D,
    LeakyReLU,
    MaxPool2D,
    OptimizerState,
    Sequential,
    ShapeMismatch,
    WeightFormatError,
    conv2d_backward,
    conv2d_forward,
    grad_check,
    leaky_relu,
    leaky_relu_backward,
    load_weights,
    lr_at_epoch,
    maxpool2d_backward,
    maxpool2d_forward,
    save_weights,
    sgd_step,
    sigmoid,
    sigmoid_backward,
)
from figsep.nn.serialize import MAGIC, dumps, loads


def _conv_check(x, w, b, stride, pad, r):
    def f(inputs):
        out, cache = conv2d_forward(inputs[0], inputs[1], inputs[2], stride, pad)
        dx, dw, db = conv2d_backward(r, cache)
        return float(np.sum(out * r)), [dx, dw, db]
    return f


class TestConv2D:
    def test_identity_kernel(self):
        x = np.random.default_rng(0).standard_normal((2, 1, 5, 4))
        out, _ = conv2d_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1))
        np.testing.assert_array_equal(out, x)

    def test_zero_input_gives_bias(self):
        out, _ = conv2d_forward(np.zeros((1, 3, 6, 6)), np.ones((4, 3, 3, 3)), np.arange(4.0), 1, 1)
        np.testing.assert_array_equal(out, np.broadcast_to(np.arange(4.0)[None, :, None, None], (1, 4, 6, 6)))

    def test_hand_convolution(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        out, _ = conv2d_forward(x, np.ones((1, 1, 2, 2)), np.zeros(1))
        np.testing.assert_array_equal(out, [[[[10.0]]]])

    def test_matches_direct_loops(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 3, 7, 6))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        out, _ = conv2d_forward(x, w, b, stride=2, pad=1)
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        ref = np.zeros_like(out)
        for n in range(2):
            for o in range(4):
                for i in range(out.shape[2]):
                    for j in range(out.shape[3]):
                        ref[n, o, i, j] = np.sum(xp[n, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3] * w[o]) + b[o]
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)

    def test_linear_in_input_and_weight(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        zero = np.zeros(3)
        base, _ = conv2d_forward(x, w, zero, 1, 1)
        np.testing.assert_allclose(conv2d_forward(2.5 * x, w, zero, 1, 1)[0], 2.5 * base, rtol=1e-12)
        np.testing.assert_allclose(conv2d_forward(x, -3.0 * w, zero, 1, 1)[0], -3.0 * base, rtol=1e-12)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1)])
    def test_gradients(self, stride, pad):
        rng = np.random.default_rng(stride * 10 + pad)
        x = rng.standard_normal((2, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out, _ = conv2d_forward(x, w, b, stride, pad)
        r = rng.standard_normal(out.shape)
        assert grad_check(_conv_check(x, w, b, stride, pad, r), [x, w, b], 1e-6) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))
        with pytest.raises(ShapeMismatch):
            conv2d_forward(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)), np.zeros(1))
        with pytest.raises(ShapeMismatch):
            conv2d_forward(np.zeros((1, 1, 4, 4)), np.zeros((2, 1, 3, 3)), np.zeros(1))


class TestMaxPool:
    def test_constant_input(self):
        out, _ = maxpool2d_forward(np.full((1, 2, 4, 6), 3.0))
        np.testing.assert_array_equal(out, np.full((1, 2, 2, 3), 3.0))

    def test_window_max_and_backward(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        out, cache = maxpool2d_forward(x)
        np.testing.assert_array_equal(out, [[[[4.0]]]])
        np.testing.assert_array_equal(maxpool2d_backward(np.ones((1, 1, 1, 1)), cache), [[[[0, 0], [0, 1.0]]]])

    def test_tie_goes_to_first_index(self):
        x = np.array([[[[5.0, 5.0], [5.0, 5.0]]]])
        _, cache = maxpool2d_forward(x)
        np.testing.assert_array_equal(maxpool2d_backward(np.ones((1, 1, 1, 1)), cache), [[[[1.0, 0], [0, 0]]]])

    def test_odd_sides_replicate(self):
        x = np.arange(9.0).reshape(1, 1, 3, 3)
        out, cache = maxpool2d_forward(x)
        np.testing.assert_array_equal(out, [[[[4.0, 5.0], [7.0, 8.0]]]])
        dx = maxpool2d_backward(np.ones_like(out), cache)
        assert dx.shape == x.shape
        assert dx.sum() == 4.0

    def test_gradient_untied(self):
        rng = np.random.default_rng(5)
        x = rng.permutation(64).astype(np.float64).reshape(1, 1, 8, 8) / 7.0
        r = rng.standard_normal((1, 1, 4, 4))

        def f(inputs):
            out, cache = maxpool2d_forward(inputs[0])
            return float(np.sum(out * r)), [maxpool2d_backward(r, cache)]
        assert grad_check(f, [x], 1e-3) < 1e-4


class TestActivations:
    def test_leaky_relu_values(self):
        assert leaky_relu(np.array(-1.0), 0.1) == pytest.approx(-0.1)
        assert leaky_relu(np.array(2.0), 0.1) == 2.0

    def test_sigmoid_values(self):
        assert float(sigmoid(0.0)) == 0.5
        y = sigmoid(np.array([0.0]))
        assert float(sigmoid_backward(np.ones(1), y)[0]) == 0.25
        big = sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(big)) and big[0] == 0.0 and big[1] == 1.0

    def test_activation_gradients(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(20)
        x[np.abs(x) < 1e-2] += 0.1
        r = rng.standard_normal(20)

        def f_leaky(inputs):
            return float(np.sum(leaky_relu(inputs[0]) * r)), [leaky_relu_backward(r, inputs[0])]

        def f_sig(inputs):
            y = sigmoid(inputs[0])
            return float(np.sum(y * r)), [sigmoid_backward(r, y)]
        assert grad_check(f_leaky, [x], 1e-4) < 1e-6
        assert grad_check(f_sig, [x], 1e-5) < 1e-6


class TestBatchNorm:
    def test_gradient(self):
        rng = np.random.default_rng(7)
        bn = BatchNorm2D(3, dtype=np.float64)
        x = rng.standard_normal((2, 3, 4, 4))
        bn.gamma[:] = rng.uniform(0.5, 1.5, 3)
        bn.beta[:] = rng.standard_normal(3)
        r = rng.standard_normal(x.shape)

        def f(inputs):
            bn.gamma, bn.beta = inputs[1], inputs[2]
            out = bn.forward(inputs[0])
            dx = bn.backward(r)
            return float(np.sum(out * r)), [dx, bn.grad_gamma, bn.grad_beta]
        assert grad_check(f, [x, bn.gamma, bn.beta], 1e-5) < 1e-5

    def test_eval_mode_uses_running_stats(self):
        bn = BatchNorm2D(2)
        x = np.random.default_rng(8).standard_normal((4, 2, 3, 3)).astype(np.float32)
        bn.training = False
        np.testing.assert_allclose(bn.forward(x), x / np.sqrt(1 + bn.eps), rtol=1e-6)


class TestSGD:
    def test_plain_step(self):
        p = {"w": np.array([1.0])}
        sgd_step(p, {"w": np.array([1.0])}, OptimizerState(0.1, 0.0, 0.0))
        assert p["w"][0] == pytest.approx(0.9)

    def test_zero_grad_decays_velocity(self):
        p = {"w": np.array([2.0])}
        state = OptimizerState(0.1, 0.9, 0.0, velocity={"w": np.array([1.0])})
        sgd_step(p, {"w": np.array([0.0])}, state)
        assert state.velocity["w"][0] == pytest.approx(0.9)
        assert p["w"][0] == pytest.approx(2.9)
        p2 = {"w": np.array([2.0])}
        sgd_step(p2, {"w": np.array([0.0])}, OptimizerState(0.1, 0.9, 0.0))
        assert p2["w"][0] == 2.0

    def test_two_momentum_steps(self):
        p = {"w": np.array([1.0])}
        state = OptimizerState(0.001, 0.9, 0.0)
        sgd_step(p, {"w": np.array([1.0])}, state)
        assert 1.0 - p["w"][0] == pytest.approx(0.001)
        before = p["w"][0]
        sgd_step(p, {"w": np.array([1.0])}, state)
        assert before - p["w"][0] == pytest.approx(0.0019)

    def test_weight_decay_and_zero_lr(self):
        p = {"w": np.array([1.0, -2.0])}
        sgd_step(p, {"w": np.zeros(2)}, OptimizerState(0.1, 0.0, 0.5))
        np.testing.assert_allclose(p["w"], [0.95, -1.9])
        q = {"w": np.array([3.0, 4.0])}
        sgd_step(q, {"w": np.array([100.0, -7.0])}, OptimizerState(0.0, 0.9, 0.0005))
        np.testing.assert_array_equal(q["w"], [3.0, 4.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            sgd_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, OptimizerState())

    def test_milestone_schedule(self):
        assert lr_at_epoch(1e-3, 0, (60, 90)) == 1e-3
        assert lr_at_epoch(1e-3, 60, (60, 90)) == pytest.approx(1e-4)
        assert lr_at_epoch(1e-3, 159, (60, 90)) == pytest.approx(1e-5)


class TestGradCheck:
    def test_linear_function(self):
        a = np.array([1.5, -2.0, 0.25])

        def f(inputs):
            return float(a @ inputs[0]), [a.copy()]
        assert grad_check(f, [np.array([0.3, 0.1, -4.0])], 1e-3) < 1e-6

    def test_detects_wrong_gradient(self):
        def f(inputs):
            return float(np.sum(inputs[0] ** 2)), [inputs[0].copy()]  # missing factor 2
        assert grad_check(f, [np.array([1.0, 2.0])], 1e-4) > 0.4

    @pytest.mark.parametrize("seed", range(5))
    def test_conv_leaky_composite(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        r = rng.standard_normal((1, 3, 6, 6))
        # redraw until no pre-activation sits within finite-difference reach of the kink
        while True:
            x = rng.standard_normal((1, 2, 6, 6))
            if np.abs(conv2d_forward(x, w, b, 1, 1)[0]).min() > 0.02:
                break

        def f(inputs):
            z, cache = conv2d_forward(inputs[0], inputs[1], inputs[2], 1, 1)
            out = leaky_relu(z)
            dz = leaky_relu_backward(r, z)
            dx, dw, db = conv2d_backward(dz, cache)
            return float(np.sum(out * r)), [dx, dw, db]
        assert grad_check(f, [x, w, b], 1e-5) < 1e-3


def _tiny_net(seed=0):
    rng = np.random.default_rng(seed)
    return Sequential([Conv2D(3, 4, 3, rng=rng), LeakyReLU(), MaxPool2D(), Conv2D(4, 2, 1, rng=rng)])


def test_sequential_deterministic():
    x = np.random.default_rng(9).random((2, 3, 8, 8)).astype(np.float32)
    a, b = _tiny_net(), _tiny_net()
    np.testing.assert_array_equal(a(x), b(x))
    ga = a.backward(np.ones((2, 2, 4, 4), np.float32))
    gb = b.backward(np.ones((2, 2, 4, 4), np.float32))
    np.testing.assert_array_equal(ga, gb)


class TestSerialization:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        tensors = {
            "layer0.weight": rng.standard_normal((4, 3, 3, 3)).astype(np.float32),
            "layer0.bias": np.array([np.float32(1e-38), -0.0, np.inf, 3.5], dtype=np.float32),
            "ünïcode": np.float32(rng.standard_normal((2, 1))),
        }
        path = tmp_path / "w.bin"
        save_weights(path, tensors)
        back = load_weights(path)
        assert list(back) == list(tensors)
        for k in tensors:
            assert back[k].shape == tensors[k].shape
            assert back[k].tobytes() == tensors[k].tobytes()
        assert dumps(back) == path.read_bytes()

    def test_layout(self):
        data = dumps({"ab": np.array([[1.0, 2.0]], dtype=np.float32)})
        assert data[:8] == MAGIC
        assert data[8:] == (b"\x02\x00\x00\x00ab\x02\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00"
                            + np.array([1.0, 2.0], dtype="<f4").tobytes())

    def test_bad_magic_and_truncation(self):
        with pytest.raises(WeightFormatError):
            loads(b"NOTMAGIC")
        data = dumps({"w": np.ones(4, np.float32)})
        with pytest.raises(WeightFormatError):
            loads(data[:-3])

    def test_sequential_load_params(self):
        a, b = _tiny_net(0), _tiny_net(1)
        b.load_params(loads(dumps(a.named_params())))
        x = np.random.default_rng(11).random((1, 3, 8, 8)).astype(np.float32)
        np.testing.assert_array_equal(a(x), b(x))
