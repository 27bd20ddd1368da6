"""Finite-difference validation of the reverse-mode tape."""

import numpy as np
import pytest

from ngm import autodiff as ad


def numeric_grad(f, arrays, eps=1e-6):
    """Central-difference gradient of scalar f(arrays) per coordinate."""
    grads = []
    for k, base in enumerate(arrays):
        g = np.zeros_like(base)
        flat = base.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = f(arrays)
            flat[i] = keep - eps
            lo = f(arrays)
            flat[i] = keep
            gflat[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def check(build, shapes, seed):
    """build(tensors) must return a scalar Tensor."""
    rng = np.random.default_rng(seed)
    arrays = [rng.uniform(-0.7, 0.7, s) for s in shapes]
    leaves = [ad.param(a.copy()) for a in arrays]
    out = build(leaves)
    out.backward()
    exact = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in leaves]

    def f(arrs):
        ts = [ad.param(a) for a in arrs]
        return float(build(ts).data)

    approx = numeric_grad(f, arrays)
    for e, a in zip(exact, approx):
        scale = max(np.abs(e).max(), np.abs(a).max(), 1e-8)
        assert np.abs(e - a).max() / scale < 1e-6


def test_add_mul_broadcast():
    check(lambda t: ad.total(ad.mul(ad.add(t[0], t[1]), t[2])),
          [(3, 4), (4,), (3, 1)], seed=0)


def test_dot_2d_and_3d():
    check(lambda t: ad.total(ad.dot(t[0], t[1])), [(3, 4), (4, 2)], seed=1)
    check(lambda t: ad.total(ad.dot(t[0], t[1])), [(2, 3, 4), (4, 2)], seed=2)


def test_bmm():
    check(lambda t: ad.total(ad.bmm(t[0], t[1])), [(2, 3, 4), (2, 4, 2)], seed=3)


def test_elementwise_nonlinearities():
    check(lambda t: ad.total(ad.sigmoid(t[0])), [(3, 3)], seed=4)
    check(lambda t: ad.total(ad.tanh(t[0])), [(3, 3)], seed=5)
    check(lambda t: ad.total(ad.log(ad.add_const(ad.sigmoid(t[0]), 0.5))),
          [(3, 3)], seed=6)
    check(lambda t: ad.total(ad.one_minus(ad.mul_const(t[0], 2.5))), [(4,)], seed=7)


def test_softmax():
    check(lambda t: ad.total(ad.mul(ad.softmax(t[0]), t[1])), [(3, 5), (3, 5)], seed=8)


def test_embed_accumulates_repeated_rows():
    ids = np.array([0, 2, 2, 1])
    check(lambda t: ad.total(ad.mul(ad.embed(t[0], ids), t[1])),
          [(3, 4), (4, 4)], seed=9)


def test_pick_and_scatter():
    ids = np.array([1, 0, 3])
    check(lambda t: ad.total(ad.pick(ad.softmax(t[0]), ids)), [(3, 4)], seed=10)
    sids = np.array([[0, 1, 1], [2, 2, 0]])
    check(lambda t: ad.total(ad.mul(ad.scatter_probs(ad.softmax(t[0]), sids, 4), t[1])),
          [(2, 3), (2, 4)], seed=11)


def test_shape_ops():
    check(lambda t: ad.total(ad.reshape(t[0], (6, 2))), [(3, 4)], seed=12)
    check(lambda t: ad.total(ad.cols(t[0], 1, 3)), [(3, 4)], seed=13)
    check(lambda t: ad.total(ad.concat([t[0], t[1]], axis=-1)), [(3, 2), (3, 3)], seed=14)
    check(lambda t: ad.total(ad.slice_time(t[0], 1)), [(2, 3, 4)], seed=15)
    check(lambda t: ad.total(ad.stack_time([t[0], t[1]])), [(2, 4), (2, 4)], seed=16)
    ts = np.array([2, 0])
    check(lambda t: ad.total(ad.gather_time(t[0], ts)), [(2, 3, 4)], seed=17)


def test_weighted_sum():
    w = np.array([0.3, -1.2, 2.0])
    check(lambda t: ad.weighted_sum(t[0], w), [(3,)], seed=18)


def test_gru_step_matches_unfused_composition():
    rng = np.random.default_rng(19)
    b, h = 3, 4
    xp = rng.uniform(-1, 1, (b, 3 * h))
    h0 = rng.uniform(-1, 1, (b, h))
    wh = rng.uniform(-1, 1, (h, 3 * h))

    def unfused(t):
        xpv, hv, whv = t
        rec = ad.dot(hv, whv)
        z = ad.sigmoid(ad.add(ad.cols(xpv, 0, h), ad.cols(rec, 0, h)))
        r = ad.sigmoid(ad.add(ad.cols(xpv, h, 2 * h), ad.cols(rec, h, 2 * h)))
        c = ad.tanh(ad.add(ad.cols(xpv, 2 * h, 3 * h),
                           ad.mul(r, ad.cols(rec, 2 * h, 3 * h))))
        return ad.add(ad.mul(z, hv), ad.mul(ad.one_minus(z), c))

    fused_out = ad.gru_step(ad.param(xp), ad.param(h0), ad.param(wh))
    unfused_out = unfused([ad.param(xp), ad.param(h0), ad.param(wh)])
    assert np.allclose(fused_out.data, unfused_out.data, atol=1e-12)


def test_gru_step_gradients():
    check(lambda t: ad.total(ad.gru_step(t[0], t[1], t[2])),
          [(2, 9), (2, 3), (3, 9)], seed=20)
    # Two chained steps exercise state reuse.
    check(lambda t: ad.total(ad.gru_step(t[0], ad.gru_step(t[0], t[1], t[2]), t[2])),
          [(2, 9), (2, 3), (3, 9)], seed=21)


def test_grad_accumulates_across_backward_calls():
    p = ad.param(np.ones(3))
    ad.total(p).backward()
    ad.total(ad.mul_const(p, 2.0)).backward()
    assert np.allclose(p.grad, np.full(3, 3.0))
    p.zero_grad()
    assert p.grad is None


def test_constants_collect_no_gradient():
    c = ad.constant(np.ones((2, 2)))
    p = ad.param(np.ones((2, 2)))
    ad.total(ad.mul(c, p)).backward()
    assert c.grad is None and p.grad is not None
