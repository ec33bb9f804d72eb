import numpy as np
import pytest

from caan.exceptions import ConfigError
from caan.exceptions import ShapeError
from caan.poolheads.models import AffineHead
from caan.poolheads.models import AttentionHead
from caan.poolheads.models import Head
from caan.poolheads.models import HeadKind
from caan.poolheads.services import apply_head
from caan.poolheads.services import attention_pool
from caan.poolheads.services import build_head
from caan.poolheads.services import classify_from_pooled
from caan.poolheads.services import global_avg
from caan.poolheads.services import global_max
from caan.poolheads.services import pooled_size
from caan.poolheads.services import roi_pool
from caan.tensor.models import Tensor
from caan.tensor.models import precision

INSTANCES = range(50)


def _random_shape(rng) -> tuple[int, int, int]:
    return int(rng.integers(1, 5)), int(rng.integers(1, 17)), int(rng.integers(1, 21))


def _attention_head(rng, classes: int, channels: int) -> AttentionHead:
    return AttentionHead(
        cls_weight=Tensor(rng.normal(size=(classes, channels, 1, 1))),
        cls_bias=Tensor(rng.normal(size=classes)),
        att_weight=Tensor(rng.normal(size=(classes, channels, 1, 1))),
        att_bias=Tensor(rng.normal(size=classes)),
    )


def _attention_oracle(m, head):
    channels, rows, cols = m.shape
    classes = head.classes
    wc, bc = head.cls_weight.data[:, :, 0, 0], head.cls_bias.data
    wa, ba = head.att_weight.data[:, :, 0, 0], head.att_bias.data
    c = np.zeros((classes, rows, cols))
    a = np.zeros((classes, rows, cols))
    for p in range(rows):
        for q in range(cols):
            logits = [sum(wc[k, h] * m[h, p, q] for h in range(channels)) + bc[k] for k in range(classes)]
            top = max(logits)
            exps = [np.exp(z - top) for z in logits]
            for k in range(classes):
                c[k, p, q] = exps[k] / sum(exps)
                z = sum(wa[k, h] * m[h, p, q] for h in range(channels)) + ba[k]
                a[k, p, q] = 1.0 / (1.0 + np.exp(-z))
    normalised = np.zeros_like(a)
    scores = np.zeros(classes)
    for k in range(classes):
        total = sum(a[k, p, q] for p in range(rows) for q in range(cols))
        for p in range(rows):
            for q in range(cols):
                normalised[k, p, q] = a[k, p, q] / total
                scores[k] += normalised[k, p, q] * c[k, p, q]
    return scores, normalised


@pytest.mark.parametrize("instance", INSTANCES)
def test_attention_pool_matches_loops(instance):
    rng = np.random.default_rng(instance)
    shape = _random_shape(rng)
    classes = int(rng.integers(2, 6))
    with precision(np.float64):
        m = rng.normal(size=shape)
        head = _attention_head(rng, classes, shape[0])
        scores, normalised = attention_pool(Tensor(m), head)
    expected_scores, expected_attention = _attention_oracle(m, head)
    np.testing.assert_allclose(scores.data, expected_scores, atol=1e-6)
    np.testing.assert_allclose(normalised.data, expected_attention, atol=1e-6)


@pytest.mark.parametrize("instance", INSTANCES)
def test_global_pools_match_loops(instance):
    rng = np.random.default_rng(instance)
    shape = _random_shape(rng)
    with precision(np.float64):
        m = rng.normal(size=shape)
        maxima = global_max(Tensor(m)).values.data
        means = global_avg(Tensor(m)).values.data
    for h in range(shape[0]):
        cells = [m[h, p, q] for p in range(shape[1]) for q in range(shape[2])]
        assert maxima[h] == max(cells)
        assert means[h] == pytest.approx(sum(cells) / len(cells), abs=1e-6)


@pytest.mark.parametrize("instance", INSTANCES)
def test_affine_softmax_matches_loops(instance):
    rng = np.random.default_rng(instance)
    size, classes = int(rng.integers(1, 12)), int(rng.integers(2, 8))
    with precision(np.float64):
        r = rng.normal(size=size)
        affine = AffineHead(Tensor(rng.normal(size=(classes, size))), Tensor(rng.normal(size=classes)))
        y = classify_from_pooled(Tensor(r), affine).data
    logits = [sum(affine.weight.data[k, i] * r[i] for i in range(size)) + affine.bias.data[k] for k in range(classes)]
    exps = np.exp(np.array(logits) - max(logits))
    np.testing.assert_allclose(y, exps / exps.sum(), atol=1e-6)


@pytest.mark.parametrize("instance", range(10))
def test_roi_pool_matches_loops(instance):
    rng = np.random.default_rng(instance)
    channels, rows, cols = int(rng.integers(1, 4)), 16 * int(rng.integers(1, 3)), 16 * int(rng.integers(1, 3))
    m = rng.normal(size=(channels, rows, cols))
    pooled = roi_pool(Tensor(m, dtype=np.float64)).data
    assert pooled.shape == (channels, rows // 16, cols // 16)
    for h in range(channels):
        for i in range(rows // 16):
            for j in range(cols // 16):
                assert pooled[h, i, j] == m[h, 16 * i : 16 * i + 16, 16 * j : 16 * j + 16].max()


def test_roi_shape_for_full_resolution_map():
    pooled = roi_pool(Tensor(np.zeros((3, 64, 320))))
    assert pooled.shape == (3, 4, 20)


def test_roi_of_single_block_is_global_max(rng):
    m = Tensor(rng.normal(size=(5, 16, 16)))
    np.testing.assert_array_equal(roi_pool(m).data.reshape(-1), global_max(m).values.data)


def test_roi_rejects_indivisible_map():
    with pytest.raises(ShapeError):
        roi_pool(Tensor(np.zeros((2, 4, 20))))


@pytest.mark.parametrize("instance", range(20))
def test_attention_sums_to_one(instance):
    rng = np.random.default_rng(instance)
    shape = _random_shape(rng)
    _, normalised = attention_pool(Tensor(rng.normal(size=shape)), _attention_head(rng, 4, shape[0]))
    np.testing.assert_allclose(normalised.data.sum(axis=(1, 2)), np.ones(4), atol=1e-5)


def test_uniform_attention_is_average_of_class_maps(rng):
    with precision(np.float64):
        m = Tensor(rng.normal(size=(3, 8, 10)))
        head = _attention_head(rng, 4, 3)
        head.att_weight.data[:] = 0.0
        head.att_bias.data[:] = 0.0
        scores, normalised = attention_pool(m, head)
    np.testing.assert_allclose(normalised.data, np.full((4, 8, 10), 1 / 80))
    logits = np.einsum("kh,hpq->kpq", head.cls_weight.data[:, :, 0, 0], m.data) + head.cls_bias.data[:, None, None]
    probabilities = np.exp(logits) / np.exp(logits).sum(axis=0)
    np.testing.assert_allclose(scores.data, probabilities.mean(axis=(1, 2)), atol=1e-6)


def test_dominant_bin_takes_over_the_score(rng):
    with precision(np.float64):
        m = np.zeros((1, 4, 4))
        m[0, 2, 3] = 1.0
        head = _attention_head(rng, 3, 1)
        head.att_weight.data[:] = 60.0
        head.att_bias.data[:] = -30.0
        scores, normalised = attention_pool(Tensor(m), head)
    assert np.all(normalised.data[:, 2, 3] > 0.999)  # noqa: PLR2004
    logits = head.cls_weight.data[:, 0, 0] + head.cls_bias.data
    np.testing.assert_allclose(scores.data, np.exp(logits) / np.exp(logits).sum(), atol=1e-3)


@pytest.mark.parametrize(
    ("kind", "final_shape", "expected"),
    [
        (HeadKind.MAX, (512, 64, 320), 512),
        (HeadKind.AVG, (512, 4, 20), 512),
        (HeadKind.FLATTEN, (512, 4, 20), 512 * 80),
        (HeadKind.ROI, (512, 64, 320), 512 * 80),
    ],
)
def test_pooled_size(kind, final_shape, expected):
    assert pooled_size(kind, final_shape) == expected


@pytest.mark.parametrize("kind", [HeadKind.ROI, HeadKind.ROI_ATT])
def test_roi_heads_rejected_on_pooled_maps(kind):
    with pytest.raises(ConfigError, match="cannot be used"):
        build_head(kind, (512, 4, 20), 10, seed=0)


def test_unknown_head_kind():
    with pytest.raises(ConfigError, match="unknown head kind"):
        build_head("median", (8, 16, 16), 10, seed=0)


def test_flatten_warns_about_memory(caplog):
    build_head(HeadKind.FLATTEN, (64, 128, 128), 2, seed=0)
    assert "heavy memory use" in caplog.text


@pytest.mark.parametrize("kind", list(HeadKind))
def test_every_head_gives_a_class_distribution(kind, rng):
    head = build_head(kind, (4, 16, 32), 5, seed=1)
    out = apply_head(head, Tensor(rng.normal(size=(4, 16, 32))))
    assert out.scores.shape == (5,)
    assert np.all(out.scores.data > 0)
    assert np.all(out.scores.data < 1)
    assert (out.attention is not None) == kind.uses_attention
    if not kind.uses_attention:
        assert out.scores.data.sum() == pytest.approx(1.0, abs=1e-5)


def test_roi_att_attention_covers_blocks(rng):
    head = build_head(HeadKind.ROI_ATT, (4, 32, 64), 3, seed=0)
    out = apply_head(head, Tensor(rng.normal(size=(4, 32, 64))))
    assert out.attention.shape == (3, 2, 4)


def test_head_parameter_names():
    attention = build_head(HeadKind.ATT, (8, 16, 16), 10, seed=0)
    affine = build_head(HeadKind.MAX, (8, 16, 16), 10, seed=0)
    assert set(attention.parameters()) == {"cls.weight", "cls.bias", "att.weight", "att.bias"}
    assert set(affine.parameters()) == {"fc.weight", "fc.bias"}
    assert attention.parameters()["cls.weight"].shape == (10, 8, 1, 1)


def test_same_seed_same_head():
    first = build_head(HeadKind.ATT, (8, 16, 16), 10, seed=4).parameters()
    second = build_head(HeadKind.ATT, (8, 16, 16), 10, seed=4).parameters()
    for name, tensor in first.items():
        np.testing.assert_array_equal(tensor.data, second[name].data)


def test_affine_size_mismatch(rng):
    head = Head(HeadKind.MAX, affine=AffineHead(Tensor(rng.normal(size=(3, 5))), Tensor(np.zeros(3))))
    with pytest.raises(ShapeError, match="expects 5 inputs"):
        apply_head(head, Tensor(rng.normal(size=(4, 2, 2))))
