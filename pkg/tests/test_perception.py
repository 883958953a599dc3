import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from activeevent.errors import ConfigError, ShapeError
from activeevent.perception import (
    Encoder,
    Perception,
    PerceptionConfig,
    init_predictor,
    prediction_error,
    predictor_backward,
    predictor_forward,
    predictor_loss,
    uncertainty_map,
)

SOFTMAX_0001 = (0.1748777045271094363, 0.4753668864186716911)  # 1/(3+e), e/(3+e)


def toy_config(d=2, hd=2, lr=2e-3, hw=1):
    return PerceptionConfig(feat_h=hw, feat_w=hw, feat_d=d, hidden_dim=hd, learn_rate=lr)


def test_prediction_error_identity():
    f = np.random.default_rng(0).normal(size=(7, 7, 16))
    err = prediction_error(f, f.copy())
    assert err.total == 0.0 and not err.e.any()


def test_prediction_error_plugin():
    err = prediction_error(np.array([[[1.0, 2.0]]]), np.zeros((1, 1, 2)))
    assert err.e[0, 0] == 5.0 and err.total == 5.0


def test_prediction_error_matches_resummation(rng):
    for _ in range(20):
        f, g = rng.normal(size=(2, 7, 7, 16))
        total = 0.0
        for i in range(7):
            for j in range(7):
                for k in range(16):
                    total += (float(f[i, j, k]) - float(g[i, j, k])) ** 2
        assert prediction_error(f, g).total == pytest.approx(total, rel=1e-9)


def test_prediction_error_shape_mismatch():
    with pytest.raises(ShapeError):
        prediction_error(np.zeros((7, 7, 16)), np.zeros((7, 7, 8)))


def test_uncertainty_uniform():
    alpha = uncertainty_map(np.full((7, 7), 0.3), 1.0)
    assert np.allclose(alpha, 1 / 49, atol=1e-15)


def test_uncertainty_two_by_two():
    alpha = uncertainty_map(np.array([[0.0, 0.0], [0.0, 1.0]]), 1.0)
    lo, hi = SOFTMAX_0001
    assert np.allclose(alpha.ravel(), [lo, lo, lo, hi], atol=1e-12)


def test_uncertainty_high_temperature(rng):
    e = rng.uniform(0, 50, size=(7, 7))
    assert np.abs(uncertainty_map(e, 1e6) - 1 / 49).max() < 1e-6


def test_uncertainty_bad_tau():
    with pytest.raises(ConfigError):
        uncertainty_map(np.zeros((2, 2)), 0.0)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=4, max_size=4),
       st.floats(1e-3, 1e3))
def test_uncertainty_normalized(vals, tau):
    alpha = uncertainty_map(np.array(vals).reshape(2, 2), tau)
    assert abs(alpha.sum() - 1) <= 1e-9 and (alpha >= 0).all()


def test_encoder_constant_frame_gives_constant_map():
    enc = Encoder(PerceptionConfig(), 56)
    f = enc(np.zeros((56, 56)))
    assert f.shape == (7, 7, 16)
    assert np.allclose(f, f[0, 0], atol=1e-15)


def test_encoder_deterministic(rng):
    enc = Encoder(PerceptionConfig(), 56)
    x = rng.uniform(size=(56, 56))
    assert np.array_equal(enc(x), enc(x.copy()))


@pytest.mark.parametrize("src,dst", [((3, 3), (50, 41)), ((0, 55), (27, 28)), ((12, 20), (12, 21))])
def test_encoder_receptive_field(rng, src, dst):
    enc = Encoder(PerceptionConfig(), 56)
    x = rng.uniform(0, 0.5, size=(56, 56))
    a, b = x.copy(), x.copy()
    a[src] = 1.0
    b[dst] = 1.0
    diff = np.abs(enc(a) - enc(b)).sum(axis=2) > 0
    # each output cell sees exactly one 8x8 pixel block
    expect = np.zeros((7, 7), bool)
    for r, c in (src, dst):
        expect[r // 8, c // 8] = True
    if src[0] // 8 == dst[0] // 8 and src[1] // 8 == dst[1] // 8:
        expect[src[0] // 8, src[1] // 8] = diff[src[0] // 8, src[1] // 8]
    assert np.array_equal(diff, expect)


def test_encoder_shape_error():
    with pytest.raises(ShapeError):
        Encoder(PerceptionConfig(), 56)(np.zeros((32, 32)))


def test_predictor_zero_state_zero_input():
    params = init_predictor(PerceptionConfig(), np.random.default_rng(0))
    y, _, _ = predictor_forward(params, np.zeros((7, 7, 16)), np.zeros((7, 7, 16)))
    assert not y.any()


def test_predict_next_is_pure(rng):
    per = Perception(PerceptionConfig(), 56, seed=3)
    f = rng.normal(size=(7, 7, 16))
    h = rng.normal(size=(7, 7, 16))
    y1, h1 = per.predict_next(f, h)
    y2, h2 = per.predict_next(f, h)
    assert np.array_equal(y1, y2) and np.array_equal(h1, h2)


def test_zero_learn_rate_leaves_params(rng):
    per = Perception(PerceptionConfig(learn_rate=0.0), 56, seed=3)
    before = {k: v.copy() for k, v in per.params.items()}
    f, g = rng.normal(size=(2, 7, 7, 16))
    f_hat, _ = per.predict_next(f)
    loss, _, _ = per.train_step(f, g)
    assert all(np.array_equal(before[k], per.params[k]) for k in before)
    assert loss == prediction_error(g, f_hat).total


def _fd_grads(params, hidden, f, g, eps=1e-6):
    out = {}
    for k, v in params.items():
        d = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            old = v[idx]
            v[idx] = old + eps
            up = predictor_loss(params, hidden, f, g)
            v[idx] = old - eps
            dn = predictor_loss(params, hidden, f, g)
            v[idx] = old
            d[idx] = (up - dn) / (2 * eps)
        out[k] = d
    return out


def _analytic(params, hidden, f, g):
    y, _, cache = predictor_forward(params, hidden, f)
    return predictor_backward(params, cache, 2 * (y - g))


def test_scalar_toy_gradient():
    rng = np.random.default_rng(1)
    cfg = toy_config(d=1, hd=1)
    params = init_predictor(cfg, rng)
    params["b"] = rng.normal(size=3) * 0.3
    hidden = rng.normal(size=(1, 1, 1)) * 0.5
    f, g = rng.normal(size=(2, 1, 1, 1))
    ga, gn = _analytic(params, hidden, f, g), _fd_grads(params, hidden, f, g)
    for k in ga:
        assert np.allclose(ga[k], gn[k], rtol=1e-4, atol=1e-9), k


def test_train_step_applies_sgd(rng):
    cfg = toy_config(d=2, hd=3, lr=0.05, hw=2)
    per = Perception(cfg, 16, seed=2)
    per.hidden = rng.normal(size=per.hidden.shape) * 0.5
    f, g = rng.normal(size=(2, 2, 2, 2))
    before = {k: v.copy() for k, v in per.params.items()}
    grads = _analytic(before, per.hidden.copy(), f, g)
    per.train_step(f, g)
    for k in before:
        assert np.allclose(per.params[k], before[k] - 0.05 * grads[k], atol=1e-14)


def test_loss_decreases_on_constant_input(rng):
    per = Perception(PerceptionConfig(), 56, seed=0)
    f = per.encode(rng.uniform(size=(56, 56)))
    g = per.encode(rng.uniform(size=(56, 56)))
    losses = [per.train_step(f, g)[0] for _ in range(500)]
    assert losses[-1] < losses[0]


def test_static_scene_loss_trend():
    from activeevent.env import Action, ArenaEnv, EnvConfig

    env = ArenaEnv(EnvConfig(seed=0, target_present=False))
    per = Perception(PerceptionConfig(), 56, seed=0)
    f = per.encode(env.render())
    losses = []
    for _ in range(100):
        obs, _ = env.step(Action.STOP)
        f2 = per.encode(obs)
        losses.append(per.train_step(f, f2)[0])
        f = f2
    slope = np.polyfit(np.arange(100), np.log(np.asarray(losses) + 1e-300), 1)[0]
    assert slope < 0


def test_blocks_round_trip(rng):
    a = Perception(PerceptionConfig(), 56, seed=1)
    b = Perception(PerceptionConfig(encoder_seed=9), 56, seed=2)
    b.load_blocks(a.blocks())
    x = rng.uniform(size=(56, 56))
    fa, fb = a.encode(x), b.encode(x)
    assert np.array_equal(fa, fb)
    assert np.array_equal(a.predict_next(fa)[0], b.predict_next(fb)[0])
