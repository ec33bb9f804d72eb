import numpy as np
import pytest

from caan.exceptions import ContractError
from caan.exceptions import ShapeError
from caan.tensor import ops
from caan.tensor.models import Tensor
from caan.tensor.models import precision


def _conv_oracle(x, kernel, bias, dilation):
    c_out, _, k_h, k_w = kernel.shape
    pad_h, pad_w = dilation * (k_h - 1) // 2, dilation * (k_w - 1) // 2
    padded = np.pad(x, ((0, 0), (pad_h, pad_h), (pad_w, pad_w)))
    rows, cols = x.shape[1], x.shape[2]
    out = np.zeros((c_out, rows, cols))
    for o in range(c_out):
        for p in range(rows):
            for q in range(cols):
                rows_span = slice(p, p + dilation * (k_h - 1) + 1, dilation)
                cols_span = slice(q, q + dilation * (k_w - 1) + 1, dilation)
                window = padded[:, rows_span, cols_span]
                out[o, p, q] = np.sum(window * kernel[o]) + bias[o]
    return out


def test_conv2d_identity_kernel(rng):
    x = Tensor(rng.normal(size=(1, 3, 3)))
    out = ops.conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(out.data, x.data)


@pytest.mark.parametrize("dilation", [1, 2, 3])
def test_conv2d_matches_loop_oracle(rng, dilation):
    with precision(np.float64):
        x = rng.normal(size=(2, 7, 9))
        kernel = rng.normal(size=(3, 2, 3, 3))
        bias = rng.normal(size=3)
        out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(bias), dilation=dilation)
    np.testing.assert_allclose(out.data, _conv_oracle(x, kernel, bias, dilation), atol=1e-10)


@pytest.mark.parametrize("dilation", [2, 4, 8])
def test_dilated_kernel_equals_zero_upsampled_kernel(rng, dilation):
    x = Tensor(rng.normal(size=(2, 7, 9)))
    kernel = rng.normal(size=(2, 2, 3, 3)).astype(np.float32)
    dilated = ops.conv2d(x, Tensor(kernel), dilation=dilation)
    upsampled = ops.conv2d(x, Tensor(ops.upsample_kernel(kernel, dilation)))
    assert dilated.data.tobytes() == upsampled.data.tobytes()


def test_dilated_valid_convolution_equals_upsampled(rng):
    x = Tensor(rng.normal(size=(2, 7, 9)))
    kernel = rng.normal(size=(1, 2, 3, 3)).astype(np.float32)
    dilated = ops.conv2d(x, Tensor(kernel), dilation=2, padding="valid")
    upsampled = ops.conv2d(x, Tensor(ops.upsample_kernel(kernel, 2)), padding="valid")
    assert dilated.shape == (1, 3, 5)
    assert dilated.data.tobytes() == upsampled.data.tobytes()


def test_same_padding_preserves_spectrogram_size():
    x = ops.zeros((1, 64, 320))
    out = ops.conv2d(x, Tensor(np.ones((2, 1, 3, 3))), dilation=8)
    assert out.shape == (2, 64, 320)


@pytest.mark.parametrize(("kernel_size", "dilation"), [(1, 1), (3, 1), (3, 5), (5, 2), (7, 3)])
def test_same_padding_any_odd_kernel(rng, kernel_size, dilation):
    x = Tensor(rng.normal(size=(1, 12, 10)))
    out = ops.conv2d(x, Tensor(np.ones((1, 1, kernel_size, kernel_size))), dilation=dilation)
    assert out.shape == (1, 12, 10)


def test_valid_padding_shrinks():
    out = ops.conv2d(ops.zeros((1, 10, 12)), Tensor(np.ones((1, 1, 3, 3))), dilation=2, padding="valid")
    assert out.shape == (1, 6, 8)


def test_conv2d_channel_mismatch():
    with pytest.raises(ShapeError):
        ops.conv2d(ops.zeros((2, 5, 5)), Tensor(np.ones((1, 3, 3, 3))))


def test_conv2d_empty_valid_output():
    with pytest.raises(ShapeError):
        ops.conv2d(ops.zeros((1, 4, 4)), Tensor(np.ones((1, 1, 3, 3))), dilation=2, padding="valid")


def test_conv2d_even_kernel_rejected_for_same_padding():
    with pytest.raises(ContractError):
        ops.conv2d(ops.zeros((1, 4, 4)), Tensor(np.ones((1, 1, 2, 2))))


def test_local_max_pool_small():
    out = ops.local_max_pool2d(Tensor([[[1, 2], [3, 0]]]))
    assert out.shape == (1, 1, 1)
    assert out.data[0, 0, 0] == 3  # noqa: PLR2004


def test_local_max_pool_constant():
    out = ops.local_max_pool2d(Tensor(np.full((2, 4, 6), 1.5)))
    np.testing.assert_array_equal(out.data, np.full((2, 2, 3), 1.5))


def test_local_max_pool_matches_loop_oracle(rng):
    x = rng.normal(size=(2, 8, 8)).astype(np.float32)
    out = ops.local_max_pool2d(Tensor(x))
    expected = np.zeros((2, 4, 4), dtype=np.float32)
    for c in range(2):
        for i in range(4):
            for j in range(4):
                expected[c, i, j] = max(x[c, 2 * i + a, 2 * j + b] for a in range(2) for b in range(2))
    np.testing.assert_array_equal(out.data, expected)


def test_local_max_pool_odd_dimension():
    with pytest.raises(ShapeError):
        ops.local_max_pool2d(ops.zeros((1, 3, 4)))


def test_relu_values():
    np.testing.assert_array_equal(ops.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])


def test_sigmoid_symmetry_point_and_open_interval():
    assert ops.sigmoid(Tensor(0.0)).item() == 0.5  # noqa: PLR2004
    out = ops.sigmoid(Tensor([-200.0, 200.0])).data
    assert np.all(out > 0)
    assert np.all(out < 1)


def test_softmax_sums_to_one(rng):
    x = rng.normal(size=10)
    out = ops.activation(Tensor(x), "softmax").data
    assert abs(out.sum() - 1.0) < 1e-6  # noqa: PLR2004
    np.testing.assert_allclose(out, np.exp(x) / np.exp(x).sum(), rtol=1e-5)


def test_softmax_over_channel_axis(rng):
    out = ops.softmax(Tensor(rng.normal(size=(4, 3, 5))), axis=0).data
    np.testing.assert_allclose(out.sum(axis=0), np.ones((3, 5)), atol=1e-6)


def test_softmax_invalid_axis():
    with pytest.raises(ContractError):
        ops.softmax(Tensor([1.0, 2.0]), axis=3)


def test_backward_sum_gives_ones(rng):
    x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    ops.backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))


def test_backward_relu_subgradient():
    x = Tensor([-1.0, 2.0], requires_grad=True)
    ops.backward(ops.sum(ops.relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_backward_leaves_other_tensors_untouched():
    x = Tensor([1.0, 2.0], requires_grad=True)
    frozen = Tensor([3.0, 4.0])
    ops.backward(ops.sum(x * frozen))
    assert frozen.grad is None
    np.testing.assert_array_equal(x.grad, [3.0, 4.0])


def test_backward_needs_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        ops.backward(x * 2.0)


def test_tape_is_topological_and_visits_once():
    x = Tensor([1.0, -2.0], requires_grad=True)
    hidden = ops.relu(x)
    loss = ops.sum(hidden * hidden + hidden)
    tape = ops.backward(loss)
    outputs = [id(record.output) for record in tape.records]
    assert len(outputs) == len(set(outputs))
    position = {key: index for index, key in enumerate(outputs)}
    for record in tape.records:
        for tensor in record.inputs:
            if not tensor.is_leaf:
                assert position[id(tensor)] < position[id(record.output)]
    np.testing.assert_array_equal(x.grad, [3.0, 0.0])


def test_block_max_first_maximum_wins_ties():
    x = Tensor(np.ones((1, 2, 2)), requires_grad=True)
    ops.backward(ops.sum(ops.block_max(x, 2)))
    np.testing.assert_array_equal(x.grad, [[[1.0, 0.0], [0.0, 0.0]]])


def test_forward_is_deterministic(rng):
    x = rng.normal(size=(2, 6, 6)).astype(np.float32)
    kernel = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
    first = ops.sigmoid(ops.conv2d(Tensor(x), Tensor(kernel), dilation=2)).data
    second = ops.sigmoid(ops.conv2d(Tensor(x), Tensor(kernel), dilation=2)).data
    assert first.tobytes() == second.tobytes()


def test_tensor_rejects_empty_dimension():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((0, 3)))
