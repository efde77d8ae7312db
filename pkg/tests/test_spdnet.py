import numpy as np
import pytest

from spdddpm import verify
from spdddpm.errors import BadConditionLength, ShapeMismatch
from spdddpm.spd import dist_affine, random_spd
from spdddpm.spdnet import (
    AdamState,
    SPDUNet,
    Tape,
    UNetSpec,
    adam_step,
    cosine_lr,
    embed_identity,
    reeig_forward,
    sinusoidal_embedding,
)


def test_grad_suite_passes():
    checks = verify.grad_checks(dim=3, seed=1)
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]


def test_reeig_clamps():
    X = np.diag([1e-6, 2.0])
    Y, _ = reeig_forward(X, 1e-4)
    np.testing.assert_allclose(np.linalg.eigvalsh(Y), [1e-4, 2.0])


def test_embed_identity():
    out = embed_identity(2 * np.eye(2)[None], 3)[0]
    np.testing.assert_array_equal(out, np.diag([2.0, 2.0, 1.0]))
    with pytest.raises(ShapeMismatch):
        embed_identity(np.eye(3), 2)


def test_sinusoidal_embedding_shape_and_range():
    e = sinusoidal_embedding(np.arange(1, 6), 9)
    assert e.shape == (5, 9)
    assert np.abs(e).max() <= 1.0


def test_unet_output_is_spd(rng):
    net = SPDUNet(UNetSpec(5), rng=rng)
    X = random_spd(5, rng, size=3)
    Y = net(X, np.array([1, 10, 100]))
    assert Y.shape == (3, 5, 5)
    assert np.all(np.linalg.eigvalsh(Y) > 0)
    assert net(X[0], 3).shape == (5, 5)


def test_unet_dims():
    assert UNetSpec(4).dims == (4, 3, 2)
    assert UNetSpec(1).dims == (1, 1, 1)
    with pytest.raises(ValueError):
        UNetSpec(4, dims=(4, 5, 2))


def test_fresh_net_ignores_time(rng):
    # injector output layers start at zero, so every E is the identity
    net = SPDUNet(UNetSpec(3), rng=rng)
    X = random_spd(3, rng, size=4)
    np.testing.assert_allclose(net(X, np.full(4, 5)), net(X, np.full(4, 150)), atol=1e-14)


def test_same_seed_same_params():
    a = SPDUNet(UNetSpec(4), rng=np.random.default_rng(3))
    b = SPDUNet(UNetSpec(4), rng=np.random.default_rng(3))
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_condition_validation(rng):
    net = SPDUNet(UNetSpec(3, cond_dim=2), rng=rng)
    X = random_spd(3, rng)
    with pytest.raises(BadConditionLength):
        net(X, 1, np.ones(3))
    uncond = SPDUNet(UNetSpec(3), rng=rng)
    with pytest.raises(BadConditionLength):
        uncond(X, 1, np.ones(2))


def test_wrong_input_dim(rng):
    net = SPDUNet(UNetSpec(3), rng=rng)
    with pytest.raises(ShapeMismatch):
        net(np.eye(4), 1)


def test_spec_roundtrip():
    spec = UNetSpec(4, cond_dim=2, emb_width=16)
    assert UNetSpec.from_dict(spec.to_dict()) == spec


def test_tape_reverse_order_accumulates():
    tape = Tape()
    x = tape.variable(np.array([[1.0, 2.0]]))
    h = tape.tanh(tape.add(x, x))
    out = tape.dense(h, tape.constant(np.ones((1, 2))), tape.constant(np.zeros(1)))
    g = tape.backward(tape.mean(out))
    np.testing.assert_allclose(g[x], 2 * (1 - np.tanh(2 * x.value) ** 2))


def test_tape_unused_variable_gets_zero_grad():
    tape = Tape()
    a = tape.variable(np.ones((1, 2)))
    b = tape.variable(np.ones((1, 2)))
    out = tape.dense(a, tape.constant(np.ones((1, 2))), tape.constant(np.zeros(1)))
    g = tape.backward(tape.mean(out))
    np.testing.assert_array_equal(g[b], np.zeros((1, 2)))


def test_adam_decreases_quadratic():
    p = {"w": np.array([3.0, -2.0])}
    state = AdamState()
    for _ in range(500):
        adam_step(p, {"w": 2 * p["w"]}, state, 0.05)
    assert np.abs(p["w"]).max() < 1e-2


def test_adam_shape_check():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), 0.1)


def test_cosine_lr():
    assert cosine_lr(1.0, 0, 100) == 1.0
    assert cosine_lr(1.0, 50, 100) == pytest.approx(0.5)
    assert cosine_lr(1.0, 100, 100) == pytest.approx(0.0)


def test_one_training_step_reduces_loss(rng):
    net = SPDUNet(UNetSpec(3), rng=rng, init_noise=0.05)
    X = random_spd(3, rng, size=16)
    eps = random_spd(3, rng, size=16)
    t = np.full(16, 7)
    loss0, grads, per = net.loss_and_grads(X, t, eps)
    assert per.shape == (16,)
    np.testing.assert_allclose(per, dist_affine(net(X, t), eps) ** 2, rtol=1e-10)
    for k in net.params:
        net.params[k] -= 1e-3 * grads[k]
    assert net.loss_and_grads(X, t, eps)[0] < loss0
