import numpy as np
import pytest

import pivnav.autodiff as ad
from pivnav.autodiff import Tape, Tensor, backward


def fd_gradient(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor(np.eye(2)), Tensor([[3.0, 4.0], [5.0, 6.0]]))
        assert np.array_equal(out.data, [[3.0, 4.0], [5.0, 6.0]])

    def test_hand_computed(self):
        out = ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[11.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        a = ad.param(rng.standard_normal((4, 5)))
        b = ad.param(rng.standard_normal((5, 3)))
        w = rng.standard_normal((4, 3))  # projection makes the loss scalar

        with Tape():
            loss = ad.sum_all(ad.mul(ad.matmul(a, b), Tensor(w)))
            grads = backward(loss, wrt=[a, b])

        fa = fd_gradient(lambda x: float((x @ b.data * w).sum()), a.data.copy())
        fb = fd_gradient(lambda x: float((a.data @ x * w).sum()), b.data.copy())
        assert rel_err(grads[a].data, fa) < 1e-6
        assert rel_err(grads[b].data, fb) < 1e-6


class TestSwish:
    def test_zero(self):
        assert ad.swish(Tensor(0.0)).item() == 0.0

    def test_large_positive_approaches_identity(self):
        x = 40.0
        assert abs(ad.swish(Tensor(x)).item() - x) < 1e-12

    def test_gradient_at_one(self):
        x = ad.param(np.array(1.0))
        with Tape():
            grads = backward(ad.swish(x), wrt=[x])
        numeric = fd_gradient(lambda v: float(v * (1 / (1 + np.exp(-v)))), np.array(1.0))
        assert rel_err(grads[x].data, numeric) < 1e-6

    def test_backward_formula(self):
        # sigma(x) * (1 + x * (1 - sigma(x)))
        for v in [-3.0, -0.5, 0.0, 0.7, 2.2]:
            x = ad.param(np.array(v))
            with Tape():
                grads = backward(ad.swish(x), wrt=[x])
            s = 1 / (1 + np.exp(-v))
            assert abs(grads[x].item() - s * (1 + v * (1 - s))) < 1e-12


class TestHuber:
    def test_zero_residual(self):
        x = Tensor([1.0, -2.0, 3.0])
        assert ad.huber(x, x, 1.0).item() == 0.0

    def test_quadratic_branch(self):
        assert ad.huber(Tensor([0.5]), Tensor([0.0]), 1.0).item() == pytest.approx(0.125)

    def test_linear_branch(self):
        assert ad.huber(Tensor([3.0]), Tensor([0.0]), 1.0).item() == pytest.approx(2.5)

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeError):
            ad.huber(Tensor([1.0, 2.0]), Tensor([1.0]), 1.0)

    def test_bad_delta(self):
        with pytest.raises(ValueError):
            ad.huber(Tensor([1.0]), Tensor([1.0]), 0.0)

    def test_gradient_both_branches(self):
        rng = np.random.default_rng(3)
        p = ad.param(np.array([0.3, -0.2, 2.5, -4.0]))
        t = Tensor(np.zeros(4))
        with Tape():
            grads = backward(ad.huber(p, t, 1.0), wrt=[p])

        def f(x):
            e = np.abs(x)
            return float(np.where(e <= 1.0, 0.5 * x * x, e - 0.5).mean())

        numeric = fd_gradient(f, p.data.copy())
        assert rel_err(grads[p].data, numeric) < 1e-6


class TestCrossEntropy:
    def test_uniform_logits(self):
        logits = Tensor(np.zeros((3, 5)))
        loss = ad.cross_entropy(logits, [0, 2, 4])
        assert loss.item() == pytest.approx(np.log(5.0), abs=1e-12)

    def test_dominant_logits_drive_loss_to_zero(self):
        prev = np.inf
        for gap in [2.0, 5.0, 10.0, 20.0]:
            logits = np.zeros((2, 5))
            logits[0, 1] = gap
            logits[1, 3] = gap
            loss = ad.cross_entropy(Tensor(logits), [1, 3]).item()
            assert loss < prev
            prev = loss
        assert prev < 1e-6

    def test_all_zero_mask_rejected(self):
        with pytest.raises(ValueError):
            ad.cross_entropy(Tensor(np.zeros((2, 5))), [0, 1], mask=[0, 0])

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            ad.cross_entropy(Tensor(np.zeros((2, 5))), [0, 5])

    def test_masked_rows_have_zero_gradient(self):
        rng = np.random.default_rng(11)
        logits = ad.param(rng.standard_normal((4, 5)))
        labels = [1, 0, 3, 2]
        with Tape():
            grads = backward(ad.cross_entropy(logits, labels, mask=[1, 0, 1, 0]), wrt=[logits])
        g = grads[logits].data
        assert np.all(g[1] == 0.0)
        assert np.all(g[3] == 0.0)
        assert np.any(g[0] != 0.0)

        # and the unmasked rows agree with finite differences
        def f(x):
            sh = x - x.max(axis=1, keepdims=True)
            lp = sh - np.log(np.exp(sh).sum(axis=1, keepdims=True))
            picked = lp[np.arange(4), labels] * np.array([1.0, 0.0, 1.0, 0.0])
            return float(-picked.sum() / 2.0)

        numeric = fd_gradient(f, logits.data.copy())
        assert rel_err(g, numeric) < 1e-6


class TestBackward:
    def test_quadratic_form(self):
        x = ad.param(np.array([1.0, 2.0, 3.0]))
        with Tape():
            grads = backward(ad.sum_all(ad.mul(x, x)), wrt=[x])
        assert np.allclose(grads[x].data, [2.0, 4.0, 6.0])

    def test_non_scalar_loss_rejected(self):
        x = ad.param(np.array([1.0, 2.0]))
        with Tape():
            y = ad.mul(x, x)
            with pytest.raises(ValueError):
                backward(y)

    def test_second_derivative_of_x_fourth(self):
        x = ad.param(np.array(2.0))
        with Tape():
            y = x**4
            g1 = backward(y, wrt=[x], higher_order=True)[x]
            g2 = backward(g1, wrt=[x])[x]
        assert g2.item() == pytest.approx(48.0, rel=1e-12)

    def test_unrolled_sgd_on_quadratic_matches_contraction(self):
        # inner loss w^2 has gradient 2w, so k plain-SGD steps scale w by (1 - 2*eta)^k
        eta, k = 0.1, 5
        w0 = ad.param(np.array(1.7))
        with Tape():
            w = w0
            for _ in range(k):
                g = backward(ad.mul(w, w), wrt=[w], higher_order=True)[w]
                w = ad.sub(w, ad.mul(g, eta))
            grads = backward(w, wrt=[w0])
        assert grads[w0].item() == pytest.approx((1 - 2 * eta) ** k, rel=1e-12)

    def test_grad_of_grad_is_differentiable_tensor(self):
        x = ad.param(np.array(1.5))
        with Tape():
            y = x**3
            g = backward(y, wrt=[x], higher_order=True)[x]
            assert g.node_id is not None
            gg = backward(g, wrt=[x])[x]
        assert gg.item() == pytest.approx(6 * 1.5)

    def test_unreachable_leaf_gets_none(self):
        x = ad.param(np.array(1.0))
        z = ad.param(np.array(5.0))
        with Tape():
            grads = backward(ad.mul(x, x), wrt=[x, z])
        assert grads[z] is None
        assert grads[x] is not None


def _primitive_cases(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4)) + 3.0  # keep div/log/sqrt away from 0
    m = rng.standard_normal((3, 4))
    v = rng.standard_normal((4, 2))
    return [
        ("add", lambda x: ad.mean(ad.add(x, Tensor(b))), a),
        ("sub", lambda x: ad.mean(ad.sub(Tensor(b), x)), a),
        ("mul", lambda x: ad.mean(ad.mul(x, Tensor(b))), a),
        ("div", lambda x: ad.mean(ad.div(x, Tensor(b))), a),
        ("div_denom", lambda x: ad.mean(ad.div(Tensor(m), x)), b),
        ("neg", lambda x: ad.mean(ad.neg(x)), a),
        ("matmul", lambda x: ad.mean(ad.matmul(x, Tensor(v))), a),
        ("transpose", lambda x: ad.mean(ad.mul(ad.transpose(x), Tensor(v @ np.ones((2, 3))))), a),
        ("reshape", lambda x: ad.mean(ad.mul(ad.reshape(x, (4, 3)), 2.0)), a),
        ("broadcast", lambda x: ad.mean(ad.mul(ad.broadcast_to(x, (5, 3, 4)), 0.7)), a),
        ("concat0", lambda x: ad.mean(ad.concat([x, ad.mul(x, 2.0)], axis=0)), a),
        ("concat1", lambda x: ad.mean(ad.mul(ad.concat([x, Tensor(b)], axis=1), Tensor(np.concatenate([m, b], axis=1)))), a),
        ("narrow", lambda x: ad.mean(ad.narrow(x, 1, 1, 2)), a),
        ("sum_axis", lambda x: ad.mean(ad.mul(ad.sum_axis(x, 1, keepdims=True), 3.0)), a),
        ("exp", lambda x: ad.mean(ad.exp(x)), a),
        ("log", lambda x: ad.mean(ad.log(x)), b),
        ("sqrt", lambda x: ad.mean(ad.sqrt(x)), b),
        ("abs", lambda x: ad.mean(ad.abs_(x)), a),
        ("relu", lambda x: ad.mean(ad.relu(x)), a),
        ("clip", lambda x: ad.mean(ad.clip_const(x, -0.4, 0.9)), a),
        ("sigmoid", lambda x: ad.mean(ad.sigmoid(x)), a),
        ("swish", lambda x: ad.mean(ad.swish(x)), a),
        ("softmax", lambda x: ad.mean(ad.mul(ad.softmax(x, axis=1), Tensor(m))), a),
        ("gather", lambda x: ad.mean(ad.gather_pairs(x, [0, 1, 2], [3, 0, 2])), a),
        ("huber", lambda x: ad.huber(x, Tensor(m), 1.0), a),
        ("xent", lambda x: ad.cross_entropy(x, [1, 3, 0], mask=[1, 1, 0]), a),
    ]


class TestPrimitiveGradients:
    @pytest.mark.parametrize("point", range(10))
    def test_all_primitives_match_finite_differences(self, point):
        rng = np.random.default_rng(100 + point)
        for name, fn, x0 in _primitive_cases(rng):
            p = ad.param(x0.copy())
            with Tape():
                grads = backward(fn(p), wrt=[p])
            analytic = np.zeros_like(x0) if grads[p] is None else grads[p].data

            def scalar(x, fn=fn):
                return fn(Tensor(x)).item()

            numeric = fd_gradient(scalar, x0.copy())
            assert rel_err(analytic, numeric) < 1e-4, f"{name} gradient mismatch"

    @pytest.mark.parametrize("seed", range(4))
    def test_double_backward_matches_fd_of_analytic_gradient(self, seed):
        # d/dx of (sum of grad * c) should match finite differences of the
        # analytic first gradient for a deep composition of primitives.
        rng = np.random.default_rng(200 + seed)
        x0 = rng.standard_normal((3, 3))
        c = rng.standard_normal((3, 3))
        w = rng.standard_normal((3, 3))

        def build(x: Tensor) -> Tensor:
            h = ad.swish(ad.matmul(x, Tensor(w)))
            z = ad.sigmoid(ad.mul(h, h))
            return ad.huber(z, Tensor(np.zeros((3, 3))), 0.7)

        def analytic_grad(xv: np.ndarray) -> np.ndarray:
            p = ad.param(xv.copy())
            with Tape():
                g = backward(build(p), wrt=[p])[p]
            return g.data

        p = ad.param(x0.copy())
        with Tape():
            g1 = backward(build(p), wrt=[p], higher_order=True)[p]
            projected = ad.sum_all(ad.mul(g1, Tensor(c)))
            g2 = backward(projected, wrt=[p])[p]

        numeric = fd_gradient(lambda x: float((analytic_grad(x) * c).sum()), x0.copy())
        assert rel_err(g2.data, numeric) < 1e-3


class TestEngineBehavior:
    def test_replay_determinism_bit_identical(self):
        def run():
            rng = np.random.default_rng(42)
            x = ad.param(rng.standard_normal((6, 6)))
            w = Tensor(rng.standard_normal((6, 6)))
            with Tape():
                loss = ad.huber(ad.swish(ad.matmul(x, w)), Tensor(np.ones((6, 6))), 1.0)
                g = backward(loss, wrt=[x])[x]
            return loss.item(), g.data.copy()

        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert np.array_equal(g1, g2)

    def test_finite_check_raises_instead_of_propagating(self):
        with pytest.raises(ad.NumericsError, match="exp"):
            ad.exp(Tensor(800.0))

    def test_finite_check_toggle(self):
        prev = ad.set_finite_checks(False)
        try:
            out = ad.exp(Tensor(800.0))
            assert np.isinf(out.data)
        finally:
            ad.set_finite_checks(prev)

    def test_ops_without_tape_are_untracked(self):
        x = ad.param(np.array([1.0, 2.0]))
        y = ad.mul(x, x)
        assert y.node_id is None

    def test_tape_records_in_append_order(self):
        x = ad.param(np.array(2.0))
        with Tape() as tape:
            y = ad.mul(x, x)
            z = ad.add(y, 1.0)
        names = [n.op for n in tape.nodes]
        assert names == ["leaf", "mul", "add"]
        assert z.node_id == len(tape.nodes) - 1


class TestGradCheck:
    def test_linear_map_near_machine_eps(self):
        w = np.array([[2.0, -1.0], [0.5, 3.0]])
        report = ad.grad_check(
            lambda x: ad.sum_all(ad.matmul(x, Tensor(w))),
            [ad.param(np.array([[0.3, -0.7]]))],
        )
        assert report.passed
        assert report.max_rel_err < 1e-8

    def test_reports_failure_for_wrong_gradient(self):
        # abs has a kink at 0; finite differences straddling it disagree
        report = ad.grad_check(lambda x: ad.sum_all(ad.abs_(x)), [ad.param(np.array([1e-9]))], eps=1e-5)
        assert not report.passed

    def test_subsampled_entries(self):
        rng = np.random.default_rng(5)
        p = ad.param(rng.standard_normal((10, 10)))
        report = ad.grad_check(
            lambda x: ad.mean(ad.swish(x)),
            [p],
            max_entries=20,
            rng=np.random.default_rng(0),
        )
        assert report.passed
