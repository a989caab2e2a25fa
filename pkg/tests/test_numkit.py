import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from medner.errors import NonFiniteValue, ShapeMismatch
from medner.numkit import (
    GRUCell,
    LSTMCell,
    ParamStore,
    Tape,
    Tensor,
    adam_step,
    clip_gradients,
    finite_diff_check,
    lr_schedule,
    ops,
    precision,
    read_params,
    save_params,
)
from medner.numkit.checkpoint import load_params


def test_softmax_symmetric():
    np.testing.assert_allclose(ops.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])


def test_sigmoid_zero():
    assert ops.sigmoid(Tensor(0.0)).item() == pytest.approx(0.5)


def test_cross_entropy_of_probabilities():
    logits = Tensor([math.log(0.9), math.log(0.1)])
    loss = ops.cross_entropy(logits, np.array(0))
    assert loss.item() == pytest.approx(-math.log(0.9), abs=1e-6)
    assert loss.item() == pytest.approx(0.10536, abs=1e-5)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeMismatch):
        ops.add(Tensor(np.ones(3)), Tensor(np.ones(4)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_trips():
    with pytest.raises(NonFiniteValue):
        ops.log(Tensor([0.0]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 7)),
              elements=st.floats(-80, 80)))
def test_softmax_is_distribution(x):
    with precision(64):
        y = ops.softmax(Tensor(x), axis=-1).data
    assert (y >= 0).all()
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-6)


# --- finite-difference checks of every registered op -----------------------

def _op_cases(rng):
    """(name, inputs, scalar loss builder) at random small shapes."""
    B, D, K = rng.integers(1, 4), rng.integers(2, 5), rng.integers(2, 5)
    x = rng.normal(size=(B, D))
    W = rng.normal(size=(D, K))
    b = rng.normal(size=K)
    y = rng.normal(size=(B, D))
    w = rng.normal(size=(B, K))
    tgt = rng.integers(0, K, size=B)
    ids = rng.integers(0, 5, size=(B, 3))
    table = rng.normal(size=(5, D))
    pos = np.abs(rng.normal(size=(B, D))) + 0.5
    return [
        ("affine", {"x": x, "W": W, "b": b}, lambda p: ops.sum(ops.mul(ops.affine(p["x"], p["W"], p["b"]), w))),
        ("matmul", {"x": x, "W": W}, lambda p: ops.sum(ops.mul(ops.matmul(p["x"], p["W"]), w))),
        ("add_sub_mul", {"x": x, "y": y, "b": b[:1]},
         lambda p: ops.sum(ops.mul(ops.sub(ops.add(p["x"], p["b"]), p["y"]), p["x"]))),
        ("sigmoid", {"x": x}, lambda p: ops.sum(ops.mul(ops.sigmoid(p["x"]), y))),
        ("tanh", {"x": x}, lambda p: ops.sum(ops.mul(ops.tanh(p["x"]), y))),
        ("relu", {"x": x}, lambda p: ops.sum(ops.mul(ops.relu(p["x"]), y))),
        ("softmax", {"x": x}, lambda p: ops.sum(ops.mul(ops.softmax(p["x"]), y))),
        ("log_softmax", {"x": x}, lambda p: ops.sum(ops.mul(ops.log_softmax(p["x"]), y))),
        ("exp_log", {"x": pos}, lambda p: ops.sum(ops.mul(ops.log(p["x"]), ops.exp(ops.mul(p["x"], 0.1))))),
        ("concat", {"x": x, "y": y},
         lambda p: ops.sum(ops.mul(ops.concat([p["x"], p["y"]], axis=1), np.concatenate([y, x], axis=1)))),
        ("stack", {"x": x, "y": y}, lambda p: ops.sum(ops.mul(ops.stack([p["x"], p["y"]], axis=1), np.stack([y, x], 1)))),
        ("index", {"x": x}, lambda p: ops.sum(ops.mul(p["x"][:, 1:], y[:, 1:]))),
        ("reshape_mean", {"x": x}, lambda p: ops.mean(ops.mul(ops.reshape(p["x"], (-1,)), y.reshape(-1)))),
        ("embedding_lookup", {"t": table},
         lambda p: ops.sum(ops.mul(ops.embedding_lookup(p["t"], ids), rng_fixed(ids.shape + (D,))))),
        ("cross_entropy", {"x": W.T[:B] if B <= K else w}, lambda p: ops.cross_entropy(p["x"], tgt[: p["x"].shape[0]] % p["x"].shape[1])),
        ("dropout_eval", {"x": x}, lambda p: ops.sum(ops.mul(ops.dropout(p["x"], 0.3, train=False), y))),
    ]


def rng_fixed(shape):
    return np.linspace(-1.0, 1.0, int(np.prod(shape))).reshape(shape)


@pytest.mark.parametrize("seed", range(20))
def test_every_op_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    with precision(64):
        for name, inputs, build in _op_cases(rng):
            params = {k: Tensor(v.copy(), requires_grad=True) for k, v in inputs.items()}
            err = finite_diff_check(lambda: build(params), params)
            assert err < 1e-4, (name, err)


def test_dropout_with_train_mask_matches_fd():
    with precision(64):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)

        def loss():
            # a fresh generator per call keeps the mask fixed
            return ops.sum(ops.mul(ops.dropout(x, 0.4, True, np.random.default_rng(7)), 2.0))

        assert finite_diff_check(loss, {"x": x}) < 1e-4


def test_dropout_inference_identity_and_unbiased():
    x = Tensor(np.arange(1.0, 6.0))
    assert ops.dropout(x, 0.4, train=False) is x
    rng = np.random.default_rng(0)
    with precision(64):
        total = np.zeros(5)
        n = 20000
        for _ in range(n):
            total += ops.dropout(Tensor(np.arange(1.0, 6.0)), 0.4, True, rng).data
    np.testing.assert_allclose(total / n, np.arange(1.0, 6.0), rtol=0.01)


def test_finite_diff_linear_hand_case():
    with precision(64):
        w = Tensor(1.0, requires_grad=True)
        x = 2.0

        def loss():
            y = ops.mul(w, x)
            return ops.mul(y, y)

        with Tape() as tape:
            out = loss()
            tape.backward(out)
        assert w.grad == pytest.approx(8.0)
        assert finite_diff_check(loss, {"w": w}) < 1e-8


def test_finite_diff_flat_surface_is_zero():
    with precision(64):
        w = Tensor(np.ones(3), requires_grad=True)
        assert finite_diff_check(lambda: ops.mul(ops.sum(w), 0.0), {"w": w}) == 0.0


def test_finite_diff_requires_float64():
    w = Tensor(np.ones(3), requires_grad=True, dtype=np.float32)
    with pytest.raises(ValueError):
        finite_diff_check(lambda: ops.sum(w), {"w": w})


# --- recurrent cells --------------------------------------------------------

def test_lstm_zero_weights_give_zero_state():
    store = ParamStore()
    cell = LSTMCell(store, "lstm", 3, 4, np.random.default_rng(0))
    for t in store.params.values():
        t.data[...] = 0.0
    h, c = cell.step(np.random.default_rng(1).normal(size=(2, 3)), np.zeros((2, 4)), np.zeros((2, 4)))
    np.testing.assert_array_equal(h.data, 0.0)


def test_gru_saturated_update_gate_carries_state():
    store = ParamStore()
    cell = GRUCell(store, "gru", 3, 4, np.random.default_rng(0))
    cell.b.data[:4] = 50.0
    h0 = np.random.default_rng(2).normal(size=(2, 4))
    h1 = cell.step(np.random.default_rng(3).normal(size=(2, 3)), h0)
    np.testing.assert_allclose(h1.data, h0, atol=1e-6)


@pytest.mark.parametrize("kind", ["lstm", "gru"])
@pytest.mark.parametrize("seed", range(5))
def test_cell_gradients_match_finite_differences(kind, seed):
    rng = np.random.default_rng(seed)
    with precision(64):
        store = ParamStore()
        cell = (LSTMCell if kind == "lstm" else GRUCell)(store, kind, 3, 4, rng)
        for t in store.params.values():
            t.data += rng.normal(scale=0.1, size=t.shape)
        xs = Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
        mask = np.array([[1, 1, 1, 1], [1, 1, 0, 0]])
        probe = rng.normal(size=(2, 4))

        def loss():
            if kind == "lstm":
                outs, (h, c) = cell.run(xs, np.zeros((2, 4)), np.zeros((2, 4)), mask=mask)
                final = ops.add(h, c)
            else:
                outs, final = cell.run(xs, np.zeros((2, 4)), mask=mask, reverse=True)
            total = ops.sum(ops.mul(final, probe))
            for o in outs:
                total = ops.add(total, ops.sum(ops.tanh(o)))
            return total

        params = dict(store.items())
        params["xs"] = xs
        assert finite_diff_check(loss, params) < 1e-4


def test_masked_steps_carry_state():
    store = ParamStore()
    cell = LSTMCell(store, "lstm", 2, 3, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(1, 4, 2))
    _, (h_short, _) = cell.run(x[:, :2], np.zeros((1, 3)), np.zeros((1, 3)))
    _, (h_masked, _) = cell.run(x, np.zeros((1, 3)), np.zeros((1, 3)), mask=np.array([[1, 1, 0, 0]]))
    np.testing.assert_allclose(h_short.data, h_masked.data)


# --- optimiser --------------------------------------------------------------

def test_adam_zero_gradient_is_identity():
    store = ParamStore()
    store.add("w", np.array([1.0, -2.0, 3.0]))
    before = store["w"].data.copy()
    adam_step(store, {"w": np.zeros(3)}, lr=0.1)
    np.testing.assert_array_equal(store["w"].data, before)


def test_adam_first_step():
    with precision(64):
        store = ParamStore()
        store.add("w", np.array(0.0))
        adam_step(store, {"w": np.array(1.0)}, lr=0.001)
        assert store["w"].item() == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)


def _adam_by_hand(grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    theta, m, v = 0.0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return theta


@pytest.mark.parametrize("grads", [[1.0, 1.0], [1.0, 2.0], [0.5, -3.0]])
def test_adam_two_steps_match_hand_computation(grads):
    with precision(64):
        store = ParamStore()
        store.add("w", np.array(0.0))
        for g in grads:
            adam_step(store, {"w": np.array(g)}, lr=0.001)
        assert store["w"].item() == pytest.approx(_adam_by_hand(grads, 0.001), rel=1e-12)
    # identical gradients: both steps move by lr / (1 + eps)
    assert _adam_by_hand([1.0, 1.0], 0.001) == pytest.approx(-0.002 / (1 + 1e-8))


def test_adam_shape_mismatch():
    store = ParamStore()
    store.add("w", np.zeros(3))
    with pytest.raises(ShapeMismatch):
        adam_step(store, {"w": np.zeros(2)}, lr=0.1)


def test_lr_schedule():
    assert lr_schedule(0.01, 0.0, 37) == 0.01
    assert lr_schedule(0.001, 1e-5, 100) == pytest.approx(0.001 / 1.001)
    assert lr_schedule(0.001, 1e-5, 100) == pytest.approx(0.000999001, abs=1e-12)
    assert lr_schedule(0.01, 0.002, 5) == pytest.approx(0.01 / 1.01)


def test_clip_examples():
    out = clip_gradients({"a": np.array([7.2, -3.0, -12.0])}, 5.0)["a"]
    np.testing.assert_array_equal(out, [5.0, -3.0, -5.0])


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
def test_clip_property(g):
    out = clip_gradients({"g": g}, 5.0)["g"]
    assert (np.abs(out) <= 5.0).all()
    inside = np.abs(g) <= 5.0
    np.testing.assert_array_equal(out[inside], g[inside])


def test_checkpoint_round_trip(tmp_path):
    store = ParamStore()
    store.add("layer.W", np.random.default_rng(0).normal(size=(3, 2)))
    store.add("layer.b", np.arange(2.0))
    store.step = 17
    path = tmp_path / "model.bin"
    save_params(path, store, seed=3, meta={"arch": "test"})
    raw = read_params(path)
    np.testing.assert_array_equal(raw["layer.W"], store["layer.W"].data.astype(np.float32))
    fresh = ParamStore()
    fresh.add("layer.W", np.zeros((3, 2)))
    fresh.add("layer.b", np.zeros(2))
    manifest = load_params(path, fresh)
    assert manifest["seed"] == 3 and manifest["meta"]["arch"] == "test"
    assert fresh.step == 17
    np.testing.assert_array_equal(fresh["layer.b"].data, [0.0, 1.0])
