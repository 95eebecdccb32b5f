import copy
import math

import numpy as np
import pytest
import sympy as sp

from infomax.checks import small_p_tracks_log_odds, squash_contracts
from infomax.environments import sample_event, two_state_world
from infomax.spiking import (SpikingNetwork, SpikingNetworkConfig, SpikingNeuron,
                             alpha_direction, alpha_learn, evaluate_mi, lateral_predict,
                             make_neuron, predictor_learn, reference_log_alpha, run_event,
                             sample_spikes, simulate_frozen, spike_count_mi, squash, train,
                             update)


@pytest.fixture
def cfg():
    return SpikingNetworkConfig(n=2, seed=3)


def test_update_adds_log_ratio(cfg):
    nrn = make_neuron(cfg, 3)
    nrn.log_alpha = np.log([2.0, 0.5, 1.0])
    update(nrn, 0)
    assert nrn.p == pytest.approx(2 * cfg.prior_rate * cfg.dt, rel=1e-14)
    update(nrn, 1)
    assert nrn.p == pytest.approx(cfg.prior_rate * cfg.dt, rel=1e-14)


def test_squash_decays_geometrically_and_clamps():
    ok, detail = squash_contracts()
    assert ok, detail
    cfg = SpikingNetworkConfig(n=1, gamma=0.5)
    nrn = make_neuron(cfg, 1)
    nrn.log_p = cfg.prior_log_p - 0.8
    squash(nrn)
    assert nrn.log_p - cfg.prior_log_p == pytest.approx(-0.4, abs=1e-15)
    # the prior is the fixed point
    nrn.reset()
    squash(nrn)
    assert nrn.log_p == cfg.prior_log_p


def test_constant_rate_counts_within_binomial_band():
    cfg = SpikingNetworkConfig(n=1, gamma=1.0, prior_rate=20.0)
    xs = np.zeros((10_000, 100), dtype=int)
    probs, spikes = simulate_frozen(np.zeros((1, 1)), cfg, xs, np.random.default_rng(0))
    p = cfg.prior_rate * cfg.dt
    np.testing.assert_allclose(probs, p, rtol=1e-14)
    N = spikes.size
    assert abs(spikes.sum() - N * p) <= 3 * math.sqrt(N * p * (1 - p))


def test_coincidences_match_independent_product():
    rng = np.random.default_rng(1)
    p = np.array([0.05, 0.08])
    s = sample_spikes(np.broadcast_to(p, (1_000_000, 2)), rng)
    both = int((s[:, 0] & s[:, 1]).sum())
    pc = p[0] * p[1]
    assert abs(both - 1e6 * pc) <= 3 * math.sqrt(1e6 * pc * (1 - pc))
    assert s.dtype == np.int8 and s.max() <= 1


def test_alpha_direction_is_gradient_of_small_p_objective():
    # small-p per-step objective p log(p/q) - p + q, with p = p_prev * alpha
    p_prev, alpha, q = sp.symbols("p_prev alpha q", positive=True)
    p_now = p_prev * alpha
    obj = p_now * sp.log(p_now / q) - p_now + q
    grad = sp.simplify(sp.diff(obj, alpha))
    assert sp.simplify(grad - p_prev * sp.log(p_now / q)) == 0
    f = sp.lambdify((p_prev, alpha, q), grad)
    for a, b, c in [(0.01, 1.3, 0.02), (0.003, 0.7, 0.001), (0.05, 2.0, 0.05)]:
        assert alpha_direction(a, a * b, c) == pytest.approx(f(a, b, c), rel=1e-12)


def test_alpha_learn_modes(cfg):
    nrn = make_neuron(cfg, 2)
    alpha_learn(nrn, 1, 0.01, 0.02, 0.01, 0.5)
    assert nrn.log_alpha[1] == pytest.approx(0.5 * 0.01 * math.log(2))
    before = nrn.log_alpha.copy()
    alpha_learn(nrn, 1, 0.01, 0.02, 0.01, 0.5, spike_prev=0)
    np.testing.assert_array_equal(nrn.log_alpha, before)
    alpha_learn(nrn, 0, 0.01, 0.02, 0.01, 0.5, spike_prev=1)
    assert nrn.log_alpha[0] == pytest.approx(0.5 * math.log(2))


def test_gated_update_unbiased_paired():
    rng = np.random.default_rng(2)
    N = 200_000
    p_prev = rng.uniform(0.001, 0.1, N)
    p_now = p_prev * np.exp(rng.normal(0, 0.3, N))
    q = rng.uniform(0.001, 0.1, N)
    spikes = rng.random(N) < p_prev
    exact = np.array([alpha_direction(a, b, c) for a, b, c in zip(p_prev, p_now, q)])
    gated = np.array([alpha_direction(float(s), b, c) for s, b, c in zip(spikes, p_now, q)])
    d = gated - exact
    assert abs(d.mean()) <= 3 * d.std() / math.sqrt(N)


def test_predictor_learn_is_delta_rule(cfg):
    nrn = make_neuron(cfg, 2)
    nrn.w[:] = [3.0]
    q = lateral_predict(nrn, [1])
    assert q == pytest.approx((3.0 + cfg.prior_rate) * cfg.dt)
    predictor_learn(nrn, [1], 0.02, eta_w=100.0)
    step = 100.0 * (q - 0.02) * cfg.dt
    assert nrn.w[0] == pytest.approx(3.0 - step)
    assert nrn.b == pytest.approx(cfg.prior_rate - step)
    # inactive inputs are untouched
    w0 = nrn.w.copy()
    predictor_learn(nrn, [0], 0.02, eta_w=100.0)
    np.testing.assert_array_equal(nrn.w, w0)
    # the prediction is floored
    nrn.b = -1e6
    assert lateral_predict(nrn, [0]) > 0


def _design(spikes, i):
    others = np.delete(spikes, i, axis=-1).reshape(-1, spikes.shape[-1] - 1)
    return np.column_stack([others, np.ones(len(others))])


def test_predictor_normal_equations_fixed_point():
    # at the least-squares fit the summed delta-rule increments vanish
    rng = np.random.default_rng(3)
    env = two_state_world(4, T=30)
    cfg = SpikingNetworkConfig(n=3, gamma=0.95)
    xs = np.array([sample_event(env, rng)[1] for _ in range(300)])
    probs, spikes = simulate_frozen(reference_log_alpha(env, 3), cfg, xs, rng)
    i = 0
    X = _design(spikes, i)
    y = probs[..., i].reshape(-1)
    coef, *_ = np.linalg.lstsq(X * cfg.dt, y, rcond=None)
    nrn = make_neuron(cfg, 4)
    nrn.w, nrn.b = coef[:-1].copy(), float(coef[-1])
    total, mass = np.zeros(3), np.zeros(3)
    for row, target in zip(X, y):
        probe = nrn.copy()
        predictor_learn(probe, row[:-1].astype(int), float(target), eta_w=1.0)
        inc = np.append(probe.w - nrn.w, probe.b - nrn.b)
        total += inc
        mass += np.abs(inc)
    assert np.all(np.abs(total) < 1e-6 * mass)
    # away from the fit the increments do not cancel
    nrn.b += 5.0
    probe = nrn.copy()
    for row, target in zip(X, y):
        predictor_learn(probe, row[:-1].astype(int), float(target), eta_w=1.0)
    assert probe.b < nrn.b - 1e-3 * mass[-1]


def test_lateral_predictor_approaches_least_squares():
    # predictor-only learning (alpha frozen) on a 3-neuron network, 10^6 steps
    env = two_state_world(4, T=30)
    cfg = SpikingNetworkConfig(n=3, gamma=0.95, eta_alpha=0.0, seed=4)
    net = SpikingNetwork.create(cfg, 4, log_alpha=reference_log_alpha(env, 3))
    rng = np.random.default_rng(4)
    for _ in range(1_000_000 // env.T):
        run_event(net, sample_event(env, rng)[1])
    frozen = net.log_alpha().copy()
    traces = [run_event(net, sample_event(env, rng)[1], learn=False) for _ in range(2000)]
    np.testing.assert_array_equal(net.log_alpha(), frozen)
    spikes = np.array([t.spikes for t in traces])
    probs = np.array([t.probs for t in traces])
    gaps = np.array([t.gaps for t in traces])
    for i in range(3):
        X = _design(spikes, i)
        y = probs[..., i].reshape(-1)
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        best = np.mean((X @ coef - y) ** 2)
        learned = np.mean(gaps[..., i] ** 2)
        assert learned < 10 * best, (i, learned, best)


def test_network_locality_against_solo_replay():
    # neuron i's event is reproduced from x, its own state and the others' spikes alone
    env = two_state_world(4, T=30)
    cfg = SpikingNetworkConfig(n=3, seed=5, eta_alpha=0.05)
    net = SpikingNetwork.create(cfg, 4)
    rng = np.random.default_rng(5)
    for _ in range(20):
        run_event(net, sample_event(env, rng)[1])
    i = 1
    solo = net.neurons[i].copy()
    solo_rng = copy.deepcopy(net.rngs[i])
    xs = sample_event(env, rng)[1]
    trace = run_event(net, xs)

    us = solo_rng.random(len(xs) + 1)
    solo.reset()
    solo.spike_prev = int(us[0] < solo.p)
    for t, x in enumerate(xs):
        p_prev = solo.p
        squash(update(solo, int(x)))
        clamped = solo.log_p in (solo.log_p_min, solo.log_p_max)
        spike = int(us[t + 1] < solo.p)
        assert spike == trace.spikes[t, i]
        ctx = [int(s) for j, s in enumerate(trace.spikes[t]) if j != i]
        q = lateral_predict(solo, ctx)
        predictor_learn(solo, ctx, solo.p, cfg.eta_w)
        if not clamped:
            alpha_learn(solo, int(x), p_prev, solo.p, q, cfg.eta_alpha, solo.spike_prev)
        solo.spike_prev = spike
    got = net.neurons[i]
    np.testing.assert_array_equal(solo.log_alpha, got.log_alpha)
    np.testing.assert_array_equal(solo.w, got.w)
    assert solo.b == got.b


class LoggedNeuron(SpikingNeuron):
    def __getattribute__(self, name):
        if not name.startswith("__"):
            object.__getattribute__(self, "_log").append(object.__getattribute__(self, "tag"))
        return object.__getattribute__(self, name)


def test_per_neuron_ops_touch_only_their_neuron(cfg):
    log = []
    neurons = []
    for tag in range(3):
        base = make_neuron(SpikingNetworkConfig(n=3), 4)
        nrn = LoggedNeuron(**{k: getattr(base, k) for k in base.__dataclass_fields__})
        object.__setattr__(nrn, "tag", tag)
        object.__setattr__(nrn, "_log", log)
        neurons.append(nrn)
    nrn = neurons[1]
    ops = [lambda: update(nrn, 2), lambda: squash(nrn), lambda: lateral_predict(nrn, [1, 0]),
           lambda: predictor_learn(nrn, [1, 0], 0.01, 1e4),
           lambda: alpha_learn(nrn, 2, 0.01, 0.012, 0.009, 0.1, 1)]
    for op in ops:
        log.clear()
        op()
        assert log and set(log) == {1}


def test_rates_stay_in_bounds():
    env = two_state_world(4, T=50)
    cfg = SpikingNetworkConfig(n=2, gamma=1.0, eta_alpha=0.5, seed=6)
    big = np.array([[3.0, -3.0, 3.0, -3.0], [-3.0, 3.0, -3.0, 3.0]])
    net = SpikingNetwork.create(cfg, 4, log_alpha=big)
    rng = np.random.default_rng(6)
    lo, hi = cfg.r_min * cfg.dt, cfg.r_max * cfg.dt
    for _ in range(50):
        tr = run_event(net, sample_event(env, rng)[1])
        assert tr.probs.min() >= lo * (1 - 1e-12) and tr.probs.max() <= hi * (1 + 1e-12)
    probs, _ = simulate_frozen(big, cfg, rng.integers(0, 4, size=(500, 50)), rng)
    assert probs.min() >= lo * (1 - 1e-12) and probs.max() <= hi * (1 + 1e-12)


def test_small_p_tracks_filter_log_odds():
    for seed in range(5):
        ok, detail = small_p_tracks_log_odds(seed=seed)
        assert ok, detail


def test_no_learning_leaves_parameters_bit_identical(cfg):
    env = two_state_world(4, T=30)
    net = SpikingNetwork.create(cfg, 4)
    before = copy.deepcopy(net.snapshot())
    rng = np.random.default_rng(7)
    for _ in range(20):
        run_event(net, sample_event(env, rng)[1], learn=False)
    assert net.snapshot() == before


def test_same_seed_same_trace(cfg):
    env = two_state_world(4, T=30)
    xs = sample_event(env, np.random.default_rng(8))[1]
    a = run_event(SpikingNetwork.create(cfg, 4), xs).to_csv()
    b = run_event(SpikingNetwork.create(cfg, 4), xs).to_csv()
    assert a == b
    assert a.splitlines()[0] == "t,x_t,prob_0,spike_0,prob_1,spike_1"


def test_spike_count_mi_plugin():
    zs = np.array([0, 0, 1, 1])
    counts = np.array([[0], [0], [2], [2]])
    assert spike_count_mi(zs, counts) == pytest.approx(math.log(2))
    assert spike_count_mi(zs, np.zeros((4, 2))) == 0.0


def test_reference_ratios():
    env = two_state_world(4, T=30)
    ref = reference_log_alpha(env, 2)
    np.testing.assert_allclose(ref[0], np.log(env.emission[0] / env.emission[1]))
    np.testing.assert_allclose(ref[1], -ref[0])


def test_train_log(cfg):
    env = two_state_world(4, T=20)
    tl = train(SpikingNetwork.create(cfg, 4), env, 300, log_every=100)
    assert tl.column("event") == [0, 100, 200, 300]
    assert tl[0]["mi_plugin_nats"] == pytest.approx(
        evaluate_mi(SpikingNetwork.create(cfg, 4).log_alpha(), cfg, env, n_events=100))
    again = train(SpikingNetwork.create(cfg, 4), env, 300, log_every=100)
    assert again.to_csv() == tl.to_csv()


def test_config_validation():
    with pytest.raises(ValueError):
        SpikingNetworkConfig(r_max=500.0)
    with pytest.raises(ValueError):
        SpikingNetworkConfig(gamma=0.0)
    with pytest.raises(ValueError):
        SpikingNetworkConfig(prior_rate=1000.0)
    with pytest.raises(ValueError):
        SpikingNetworkConfig(n=0)
