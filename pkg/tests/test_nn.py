"""Gradient checks for every op, optimizer oracles, and checkpoint format."""

import numpy as np
import pytest

from sheetsuggest import nn


def scalarize(tape, out, weights):
    """Reduce ``out`` to a scalar via a fixed weighting, through the tape."""
    prod = nn.mul(tape, out, nn.Tensor(weights))
    n = prod.data.size
    flat = nn.reshape(tape, prod, (1, n))
    total = nn.matmul(tape, flat, nn.Tensor(np.ones((n, 1))))
    return nn.reshape(tape, total, ())


def check_grads(build, tensors, h=1e-5, rtol=1e-5, atol=1e-7):
    """Compare tape gradients against central differences, every element."""
    for t in tensors:
        t.grad = None
    tape = nn.Tape()
    loss = build(tape)
    tape.backward(loss)
    analytic = [
        (t.grad if t.grad is not None else np.zeros_like(t.data)).copy() for t in tensors
    ]
    for t, grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(build(None).data)
            flat[i] = orig - h
            down = float(build(None).data)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            assert flat_grad[i] == pytest.approx(fd, rel=rtol, abs=atol), (
                f"{t.name or 'tensor'}[{i}]: analytic {flat_grad[i]} vs fd {fd}"
            )


class TestElementwiseArithmetic:
    @pytest.mark.parametrize("b_shape", [(2, 3), (3,), (2, 1), ()])
    def test_add_broadcast(self, b_shape):
        rng = np.random.default_rng(0)
        a = nn.Tensor(rng.normal(size=(2, 3)), name="a")
        b = nn.Tensor(rng.normal(size=b_shape), name="b")
        w = rng.normal(size=(2, 3))
        check_grads(lambda tape: scalarize(tape, nn.add(tape, a, b), w), [a, b])

    @pytest.mark.parametrize("b_shape", [(2, 3), (3,), (2, 1)])
    def test_sub_and_mul_broadcast(self, b_shape):
        rng = np.random.default_rng(1)
        a = nn.Tensor(rng.normal(size=(2, 3)), name="a")
        b = nn.Tensor(rng.normal(size=b_shape), name="b")
        w = rng.normal(size=(2, 3))
        check_grads(lambda tape: scalarize(tape, nn.sub(tape, a, b), w), [a, b])
        check_grads(lambda tape: scalarize(tape, nn.mul(tape, a, b), w), [a, b])

    def test_scale(self):
        rng = np.random.default_rng(2)
        a = nn.Tensor(rng.normal(size=(3, 2)))
        w = rng.normal(size=(3, 2))
        check_grads(lambda tape: scalarize(tape, nn.scale(tape, a, -1.7), w), [a])


class TestMatmul:
    @pytest.mark.parametrize(
        "a_shape,b_shape",
        [((2, 3), (3, 4)), ((2, 3, 4), (4, 5)), ((2, 3, 4), (2, 4, 5)), ((1, 3, 4), (2, 4, 5))],
    )
    def test_matmul_grads(self, a_shape, b_shape):
        rng = np.random.default_rng(3)
        a = nn.Tensor(rng.normal(size=a_shape), name="a")
        b = nn.Tensor(rng.normal(size=b_shape), name="b")
        out_shape = np.matmul(np.zeros(a_shape), np.zeros(b_shape)).shape
        w = rng.normal(size=out_shape)
        check_grads(lambda tape: scalarize(tape, nn.matmul(tape, a, b), w), [a, b])

    def test_matmul_rejects_vectors(self):
        with pytest.raises(nn.TapeError):
            nn.matmul(None, nn.Tensor(np.ones(3)), nn.Tensor(np.ones((3, 2))))


class TestShapeOps:
    @pytest.mark.parametrize("axis", [0, 1, -1])
    def test_concat(self, axis):
        rng = np.random.default_rng(4)
        a = nn.Tensor(rng.normal(size=(2, 3)))
        b = nn.Tensor(rng.normal(size=(2, 3)))
        c = nn.Tensor(rng.normal(size=(2, 3)))
        out_shape = np.concatenate([a.data, b.data, c.data], axis=axis).shape
        w = rng.normal(size=out_shape)
        check_grads(
            lambda tape: scalarize(tape, nn.concat(tape, [a, b, c], axis=axis), w), [a, b, c]
        )

    @pytest.mark.parametrize(
        "key",
        [
            (slice(1, 3),),
            (0,),
            (slice(None), slice(1, 2)),
            (slice(None, None, 2), 1),
        ],
    )
    def test_slice(self, key):
        rng = np.random.default_rng(5)
        x = nn.Tensor(rng.normal(size=(4, 3)))
        w = rng.normal(size=x.data[key].shape)
        check_grads(lambda tape: scalarize(tape, nn.slice_t(tape, x, key), w), [x])

    def test_reshape_and_transpose(self):
        rng = np.random.default_rng(6)
        x = nn.Tensor(rng.normal(size=(2, 3, 4)))
        w = rng.normal(size=(4, 6))
        check_grads(lambda tape: scalarize(tape, nn.reshape(tape, x, (4, 6)), w), [x])
        w2 = rng.normal(size=(4, 2, 3))
        check_grads(
            lambda tape: scalarize(tape, nn.transpose(tape, x, (2, 0, 1)), w2), [x]
        )

    def test_embedding_lookup_accumulates_repeats(self):
        table = nn.Tensor(np.arange(12, dtype=float).reshape(4, 3), name="table")
        ids = np.array([1, 1, 3, 0])
        tape = nn.Tape()
        out = nn.embedding_lookup(tape, table, ids)
        assert out.data.shape == (4, 3)
        loss = scalarize(tape, out, np.ones((4, 3)))
        tape.backward(loss)
        expected = np.zeros((4, 3))
        for row in ids:
            expected[row] += 1.0
        np.testing.assert_array_equal(table.grad, expected)

    def test_embedding_lookup_fd(self):
        rng = np.random.default_rng(7)
        table = nn.Tensor(rng.normal(size=(5, 3)), name="table")
        ids = np.array([[0, 2], [2, 4]])
        w = rng.normal(size=(2, 2, 3))
        check_grads(
            lambda tape: scalarize(tape, nn.embedding_lookup(tape, table, ids), w), [table]
        )


class TestNonlinearities:
    @pytest.mark.parametrize("op", [nn.sigmoid, nn.tanh, nn.gelu])
    def test_smooth_activations(self, op):
        rng = np.random.default_rng(8)
        x = nn.Tensor(rng.normal(size=(3, 4)))
        w = rng.normal(size=(3, 4))
        check_grads(lambda tape: scalarize(tape, op(tape, x), w), [x])

    def test_relu_away_from_kink(self):
        x = nn.Tensor(np.array([[-2.0, -0.5, 0.5, 2.0]]))
        w = np.array([[1.0, -2.0, 3.0, -4.0]])
        check_grads(lambda tape: scalarize(tape, nn.relu(tape, x), w), [x])

    def test_dropout_mask_and_grad(self):
        x = nn.Tensor(np.ones((4, 8)))
        tape = nn.Tape()
        out = nn.dropout(tape, x, 0.5, np.random.default_rng(9))
        kept = out.data != 0.0
        assert 0 < kept.sum() < out.data.size
        np.testing.assert_allclose(out.data[kept], 2.0)
        loss = scalarize(tape, out, np.ones((4, 8)))
        tape.backward(loss)
        np.testing.assert_allclose(x.grad[kept], 2.0)
        np.testing.assert_allclose(x.grad[~kept], 0.0)

    def test_dropout_rate_zero_is_identity(self):
        x = nn.Tensor(np.ones((2, 2)))
        out = nn.dropout(None, x, 0.0, np.random.default_rng(0))
        assert out is x

    def test_dropout_rejects_rate_one(self):
        with pytest.raises(nn.TapeError):
            nn.dropout(None, nn.Tensor(np.ones(2)), 1.0, np.random.default_rng(0))


class TestLayerNorm:
    def test_grads(self):
        rng = np.random.default_rng(10)
        x = nn.Tensor(rng.normal(size=(3, 5)), name="x")
        gamma = nn.Tensor(rng.normal(size=(5,)), name="gamma")
        beta = nn.Tensor(rng.normal(size=(5,)), name="beta")
        w = rng.normal(size=(3, 5))
        check_grads(
            lambda tape: scalarize(tape, nn.layer_norm(tape, x, gamma, beta), w),
            [x, gamma, beta],
            rtol=1e-4,
        )

    def test_output_is_normalized(self):
        rng = np.random.default_rng(11)
        x = nn.Tensor(rng.normal(size=(4, 16)) * 5 + 3)
        out = nn.layer_norm(None, x, nn.Tensor(np.ones(16)), nn.Tensor(np.zeros(16)))
        np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.data.std(axis=-1), 1.0, atol=1e-3)


class TestMaskedSoftmax:
    def test_matches_plain_softmax_when_unmasked(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(3, 5))
        out = nn.softmax(None, nn.Tensor(x))
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        np.testing.assert_allclose(out.data, e / e.sum(axis=-1, keepdims=True))

    def test_masked_positions_are_exact_zeros(self):
        x = nn.Tensor(np.array([[1.0, 100.0, 2.0]]))
        mask = np.array([[True, False, True]])
        out = nn.masked_softmax(None, x, mask)
        assert out.data[0, 1] == 0.0
        assert out.data.sum() == pytest.approx(1.0)

    def test_fully_masked_row_is_zero_with_zero_grad(self):
        x = nn.Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        mask = np.array([[False, False], [True, True]])
        tape = nn.Tape()
        out = nn.masked_softmax(tape, x, mask)
        np.testing.assert_array_equal(out.data[0], [0.0, 0.0])
        loss = scalarize(tape, out, np.ones((2, 2)))
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad[0], [0.0, 0.0])

    def test_grads_under_mask(self):
        rng = np.random.default_rng(13)
        x = nn.Tensor(rng.normal(size=(2, 4)))
        mask = np.array([[True, False, True, True], [True, True, True, False]])
        w = rng.normal(size=(2, 4))
        check_grads(
            lambda tape: scalarize(tape, nn.masked_softmax(tape, x, mask), w), [x]
        )


class TestCrossEntropy:
    def test_gradient_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(14)
        logits = nn.Tensor(rng.normal(size=(4, 6)))
        targets = np.array([0, 5, 2, 2])
        tape = nn.Tape()
        loss = nn.cross_entropy(tape, logits, targets)
        tape.backward(loss)
        e = np.exp(logits.data - logits.data.max(axis=-1, keepdims=True))
        p = e / e.sum(axis=-1, keepdims=True)
        p[np.arange(4), targets] -= 1.0
        np.testing.assert_allclose(logits.grad, p / 4.0, atol=1e-12)

    def test_fd(self):
        rng = np.random.default_rng(15)
        logits = nn.Tensor(rng.normal(size=(3, 5)))
        targets = np.array([1, 4, 0])
        check_grads(lambda tape: nn.cross_entropy(tape, logits, targets), [logits])
        check_grads(
            lambda tape: nn.cross_entropy(tape, logits, targets, reduction="sum"), [logits]
        )

    def test_uniform_logits_give_log_vocab(self):
        logits = nn.Tensor(np.zeros((7, 13)))
        loss = nn.cross_entropy(None, logits, np.arange(7) % 13)
        assert float(loss.data) == pytest.approx(np.log(13.0))

    def test_rejects_bad_shapes(self):
        with pytest.raises(nn.TapeError):
            nn.cross_entropy(None, nn.Tensor(np.zeros((2, 3, 4))), np.array([0, 1]))
        with pytest.raises(nn.TapeError):
            nn.cross_entropy(None, nn.Tensor(np.zeros((2, 3))), np.array([0, 1, 2]))


class TestWindowConvolutions:
    def test_conv_1xL_shape_and_grads(self):
        rng = np.random.default_rng(16)
        x = nn.Tensor(rng.normal(size=(4, 3, 5)), name="x")
        w = nn.Tensor(rng.normal(size=(3, 5, 6)), name="w")
        b = nn.Tensor(rng.normal(size=(6,)), name="b")
        out = nn.conv_1xL(None, x, w, b)
        assert out.data.shape == (4, 1, 6)
        weights = rng.normal(size=(4, 1, 6))
        check_grads(lambda tape: scalarize(tape, nn.conv_1xL(tape, x, w, b), weights), [x, w, b])

    def test_conv_Kx1_shape_and_grads(self):
        rng = np.random.default_rng(17)
        x = nn.Tensor(rng.normal(size=(4, 3, 5)), name="x")
        w = nn.Tensor(rng.normal(size=(4, 5, 6)), name="w")
        b = nn.Tensor(rng.normal(size=(6,)), name="b")
        out = nn.conv_Kx1(None, x, w, b)
        assert out.data.shape == (1, 3, 6)
        weights = rng.normal(size=(1, 3, 6))
        check_grads(lambda tape: scalarize(tape, nn.conv_Kx1(tape, x, w, b), weights), [x, w, b])

    def test_conv_1xL_matches_manual_sum(self):
        x = np.arange(2 * 3 * 2, dtype=float).reshape(2, 3, 2)
        w = np.ones((3, 2, 1))
        out = nn.conv_1xL(None, nn.Tensor(x), nn.Tensor(w), nn.Tensor(np.zeros(1)))
        np.testing.assert_allclose(out.data[:, 0, 0], x.reshape(2, -1).sum(axis=1))


class TestAttentionAndLstm:
    def test_scaled_dot_attention_grads(self):
        rng = np.random.default_rng(18)
        q = nn.Tensor(rng.normal(size=(2, 3, 4)), name="q")
        k = nn.Tensor(rng.normal(size=(2, 5, 4)), name="k")
        v = nn.Tensor(rng.normal(size=(2, 5, 4)), name="v")
        mask = np.array([[True, True, False, True, True], [True, False, True, True, False]])
        w = rng.normal(size=(2, 3, 4))
        check_grads(
            lambda tape: scalarize(tape, nn.scaled_dot_attention(tape, q, k, v, mask), w),
            [q, k, v],
            rtol=1e-4,
        )

    def test_attention_with_all_keys_masked_is_zero(self):
        rng = np.random.default_rng(19)
        q = nn.Tensor(rng.normal(size=(1, 2, 4)))
        k = nn.Tensor(rng.normal(size=(1, 3, 4)))
        v = nn.Tensor(rng.normal(size=(1, 3, 4)))
        out = nn.scaled_dot_attention(None, q, k, v, np.zeros((1, 3), dtype=bool))
        np.testing.assert_array_equal(out.data, np.zeros((1, 2, 4)))

    def test_lstm_step_grads(self):
        rng = np.random.default_rng(20)
        x = nn.Tensor(rng.normal(size=(1, 3)), name="x")
        h = nn.Tensor(rng.normal(size=(1, 4)), name="h")
        c = nn.Tensor(rng.normal(size=(1, 4)), name="c")
        w = nn.Tensor(rng.normal(size=(7, 16)) * 0.4, name="w")
        b = nn.Tensor(rng.normal(size=(16,)) * 0.4, name="b")
        weights = rng.normal(size=(1, 4))

        def build(tape):
            h2, c2 = nn.lstm_step(tape, x, h, c, w, b)
            return scalarize(tape, nn.add(tape, h2, c2), weights)

        check_grads(build, [x, h, c, w, b], rtol=1e-4)

    def test_lstm_step_forget_gate_saturated_keeps_cell(self):
        hidden = 3
        w = np.zeros((2 + hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 100.0  # forget gate pinned open
        b[:hidden] = -100.0  # input gate pinned shut
        c0 = np.array([[0.3, -0.7, 1.1]])
        _, c1 = nn.lstm_step(
            None,
            nn.Tensor(np.zeros((1, 2))),
            nn.Tensor(np.zeros((1, hidden))),
            nn.Tensor(c0),
            nn.Tensor(w),
            nn.Tensor(b),
        )
        np.testing.assert_allclose(c1.data, c0, atol=1e-12)


class TestTapeMechanics:
    def test_backward_before_forward_raises(self):
        with pytest.raises(nn.TapeError, match="before"):
            nn.Tape().backward(nn.Tensor(np.zeros(())))

    def test_backward_requires_scalar(self):
        tape = nn.Tape()
        x = nn.Tensor(np.ones((2, 2)))
        out = nn.add(tape, x, x)
        with pytest.raises(nn.TapeError, match="scalar"):
            tape.backward(out)

    def test_grads_accumulate_across_reuse(self):
        x = nn.Tensor(np.array([[2.0]]))
        tape = nn.Tape()
        out = nn.add(tape, x, x)
        loss = nn.reshape(tape, out, ())
        tape.backward(loss)
        assert x.grad[0, 0] == 2.0

    def test_inference_mode_records_nothing(self):
        tape = nn.Tape()
        x = nn.Tensor(np.ones((2, 2)))
        nn.add(None, x, x)
        assert len(tape) == 0


class TestOptim:
    def test_first_adam_step_is_signed_lr(self):
        store = nn.ParamStore()
        p = store.add("p", np.array([1.0, -2.0, 3.0]))
        p.grad = np.array([0.5, -1.0, 2.0])
        nn.adam_step(store, lr=0.1)
        expected = np.array([1.0, -2.0, 3.0]) - 0.1 * np.array([0.5, -1.0, 2.0]) / (
            np.abs([0.5, -1.0, 2.0]) + 1e-8
        )
        np.testing.assert_allclose(p.data, expected)

    def test_adam_minimizes_quadratic(self):
        store = nn.ParamStore()
        p = store.add("p", np.array([5.0, -3.0, 8.0]))
        for _ in range(400):
            store.zero_grads()
            p.grad = p.data.copy()
            nn.adam_step(store, lr=0.1)
        np.testing.assert_allclose(p.data, 0.0, atol=1e-3)

    def test_missing_grad_counts_as_zero(self):
        store = nn.ParamStore()
        p = store.add("p", np.array([1.0]))
        q = store.add("q", np.array([1.0]))
        p.grad = np.array([1.0])
        nn.adam_step(store, lr=0.1)
        assert q.data[0] == 1.0
        assert store.step == 1

    def test_clip_global_norm_scales_jointly(self):
        store = nn.ParamStore()
        a = store.add("a", np.zeros(2))
        b = store.add("b", np.zeros(2))
        a.grad = np.array([3.0, 0.0])
        b.grad = np.array([0.0, 4.0])
        norm = nn.clip_global_norm(store, 1.0)
        assert norm == pytest.approx(5.0)
        joint = np.sqrt((a.grad**2).sum() + (b.grad**2).sum())
        assert joint == pytest.approx(1.0)
        np.testing.assert_allclose(a.grad, [0.6, 0.0])

    def test_clip_below_threshold_is_identity(self):
        store = nn.ParamStore()
        a = store.add("a", np.zeros(2))
        a.grad = np.array([0.3, 0.4])
        norm = nn.clip_global_norm(store, 1.0)
        assert norm == pytest.approx(0.5)
        np.testing.assert_allclose(a.grad, [0.3, 0.4])

    def test_duplicate_param_name_rejected(self):
        store = nn.ParamStore()
        store.add("p", np.zeros(1))
        with pytest.raises(ValueError):
            store.add("p", np.zeros(1))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(21)
        tensors = {
            "enc/w": rng.normal(size=(3, 4)),
            "dec/b": rng.normal(size=(5,)),
            "scalar": np.array(2.5),
        }
        config = {"hidden": 4, "layers": 2}
        extras = {"step": 17, "note": "x"}
        path = tmp_path / "model.ckpt"
        nn.save_checkpoint(path, tensors, config, extras)
        loaded, got_config, got_extras = nn.load_checkpoint(path)
        assert got_config == config
        assert got_extras == extras
        assert list(loaded) == list(tensors)
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])

    def test_save_is_byte_deterministic(self, tmp_path):
        tensors = {"w": np.arange(6, dtype=float).reshape(2, 3)}
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        nn.save_checkpoint(a, tensors, {"hidden": 1}, {"step": 0})
        nn.save_checkpoint(b, tensors, {"hidden": 1}, {"step": 0})
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(nn.CheckpointError, match="not a checkpoint"):
            nn.load_checkpoint(path)

    def test_rejects_truncated_data(self, tmp_path):
        path = tmp_path / "model.ckpt"
        nn.save_checkpoint(path, {"w": np.ones((4, 4))}, {}, {})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(nn.CheckpointError, match="truncated"):
            nn.load_checkpoint(path)

    def test_rejects_trailing_bytes(self, tmp_path):
        path = tmp_path / "model.ckpt"
        nn.save_checkpoint(path, {"w": np.ones(2)}, {}, {})
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(nn.CheckpointError, match="trailing"):
            nn.load_checkpoint(path)
