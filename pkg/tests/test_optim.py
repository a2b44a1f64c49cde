import numpy as np

import pivnav.autodiff as ad
from pivnav.optim import DEFAULT_BATCH, DEFAULT_LR, Adam


def test_zero_gradient_is_identity():
    p = ad.param(np.array([1.0, -2.0, 3.0]))
    before = p.data.copy()
    opt = Adam([p], lr=0.01)
    opt.step({p: ad.Tensor(np.zeros(3))})
    assert np.array_equal(p.data, before)
    assert opt.state.step_count == 1


def test_missing_gradient_treated_as_zero():
    p = ad.param(np.array([4.0]))
    opt = Adam([p])
    opt.step({})
    assert p.data[0] == 4.0


def test_constant_gradient_update_magnitude_approaches_lr():
    # Adam's per-step displacement is bounded by ~lr; with a constant gradient
    # the bias-corrected ratio converges so |delta| -> lr.
    lr = 0.01
    p = ad.param(np.array([0.0]))
    opt = Adam([p], lr=lr)
    g = ad.Tensor(np.array([3.7]))
    delta = None
    for _ in range(1000):
        before = p.data.copy()
        opt.step({p: g})
        delta = np.abs(p.data - before)
    assert abs(delta[0] - lr) / lr < 0.01


def test_moment_shapes_match_parameters():
    p = ad.param(np.zeros((3, 4)))
    q = ad.param(np.zeros(7))
    opt = Adam([p, q])
    assert opt.state.m[0].shape == (3, 4)
    assert opt.state.v[1].shape == (7,)


def test_shipped_defaults():
    assert DEFAULT_LR == 0.0035
    assert DEFAULT_BATCH == 32
    opt = Adam([ad.param(np.zeros(1))])
    assert opt.state.lr == 0.0035
    assert opt.state.beta1 == 0.9
    assert opt.state.beta2 == 0.999
