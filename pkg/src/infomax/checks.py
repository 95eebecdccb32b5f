"""Executable invariant checks run by ``infomax validate``.

Each check returns ``(ok, detail)``. They are deterministic and exact or
finite-difference based; none of them trains anything.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .bayes_filter import (FactorizedLikelihood, LikelihoodModel, PosteriorState,
                           batch_posterior, factorized_filter_update, filter_update,
                           joint_marginals, log_odds, run_filter)
from .chase import ChaseState, p_direction, p_step, q_direction, score_step
from .environments import build_factorized_env, neuron_likelihoods, sequence_log_prob
from .meanfield import (FactorizedCode, composite_perturbation, factorized_variation,
                        joint_table, lateral_conditionals, outcomes)
from .prob_core import marginal, mi_variation, mutual_information
from .spiking import SpikingNetworkConfig, make_neuron, squash, update


def random_channel(rng, nx, ny, floor=0.02):
    t = rng.dirichlet(np.ones(ny), size=nx) + floor
    return t / t.sum(axis=1, keepdims=True)


def random_perturbation(rng, nx, ny, scale=1.0):
    d = rng.standard_normal((nx, ny))
    return scale * (d - d.mean(axis=1, keepdims=True))


def mi_variation_fd(instances=100, seed=0, h=1e-5, rel=1e-4, abs_tol=1e-10):
    """Analytic first variation against central finite differences of MI."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        nx, ny = rng.integers(2, 6, size=2)
        px = rng.dirichlet(np.ones(nx))
        pyx = random_channel(rng, nx, ny)
        dp = random_perturbation(rng, nx, ny)
        fd = (mutual_information(px, pyx + h * dp) - mutual_information(px, pyx - h * dp)) / (2 * h)
        an = mi_variation(px, pyx, dp)
        err = abs(fd - an)
        if err > max(rel * abs(fd), abs_tol):
            return False, f"mismatch {an!r} vs {fd!r}"
        worst = max(worst, err / max(abs(fd), 1e-300))
    return True, f"{instances} instances, worst relative error {worst:.2e}"


def marginal_fixed_point(seed=1):
    """Expected auxiliary step vanishes exactly at ``q = p(y)`` and points toward it elsewhere."""
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(4))
    pyx = random_channel(rng, 4, 4)
    py = marginal(px, pyx)

    def expected_dir(aux):
        st = ChaseState.from_probs(pyx, aux)
        return sum(px[x] * q_direction(st, x) for x in range(4))

    at_fixed = np.abs(expected_dir(py)).max()
    other = rng.dirichlet(np.ones(4))
    toward = float(expected_dir(other) @ (py - other))
    ok = at_fixed < 1e-15 and toward > 0
    return ok, f"|E dq| at p(y) = {at_fixed:.1e}; alignment elsewhere {toward:.3g}"


def code_step_ascends(seed=2):
    """With the exact marginal, a code row step changes MI by ``p(x) Var_p(log p/q)`` to first order."""
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(3))
    pyx = random_channel(rng, 3, 3)
    st = ChaseState.from_probs(pyx, marginal(px, pyx))
    worst = 0.0
    for x in range(3):
        g = p_direction(st, x)
        dp = np.zeros_like(pyx)
        dp[x] = score_step(pyx[x], g)
        var = pyx[x] @ g**2 - (pyx[x] @ g) ** 2
        worst = max(worst, abs(mi_variation(px, pyx, dp) - px[x] * var))
        if var < 0:
            return False, "negative variance"
    # an actual small step raises MI
    before = mutual_information(px, pyx)
    after = mutual_information(px, p_step(st, 0, 1e-3).code)
    ok = worst < 1e-12 and after > before
    return ok, f"first-order gain error {worst:.1e}; MI {before:.6f} -> {after:.6f}"


def independent_perturbation_needs_factorization():
    """A neuron-local perturbation leaves the other conditional unchanged only for product tables."""
    delta = np.array([0.01, -0.01])

    def other_change(joint):
        pb = joint.sum(axis=0)                  # joint[a, b]
        pa_b = joint / pb[None, :]
        moved = (pa_b + delta[:, None]) * pb[None, :]
        pb_a = joint / joint.sum(axis=1, keepdims=True)
        return float(np.abs(moved / moved.sum(axis=1, keepdims=True) - pb_a).max())

    product = np.outer([0.3, 0.7], [0.6, 0.4])
    correlated = np.array([[0.4, 0.1], [0.1, 0.4]])
    a, b = other_change(product), other_change(correlated)
    ok = a < 1e-15 and b > 1e-3
    return ok, f"product table change {a:.1e}; correlated table change {b:.2e}"


def factorized_variation_additive(seed=3, tol=1e-10):
    """Per-neuron variations sum to the joint variation of the composite perturbation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(5):
            nx = int(rng.integers(2, 5))
            px = rng.dirichlet(np.ones(nx))
            code = FactorizedCode.from_probs(rng.uniform(0.1, 0.9, size=(n, nx)))
            dps = 0.05 * rng.uniform(-1, 1, size=(n, nx))
            parts = sum(factorized_variation(px, code, i, dps[i]) for i in range(n))
            joint = mi_variation(px, joint_table(code), composite_perturbation(code, dps))
            worst = max(worst, abs(parts - joint))
    return worst < tol, f"worst |sum - joint| = {worst:.1e}"


def lateral_fixed_point(seed=4):
    """The exact lateral conditional is the fixed point of the expected predictor update."""
    rng = np.random.default_rng(seed)
    n, nx = 3, 4
    px = rng.dirichlet(np.ones(nx))
    code = FactorizedCode.from_probs(rng.uniform(0.1, 0.9, size=(n, nx)))
    p1 = code.probs
    jt = joint_table(code)
    lat = lateral_conditionals(px, code)
    ys = outcomes(n)
    worst = 0.0
    for i in range(n):
        ctxs = outcomes(n - 1)
        for c, ctx in enumerate(ctxs):
            mask = np.all(np.delete(ys, i, axis=1) == ctx, axis=1)
            w = px * jt[:, mask].sum(axis=1)    # p(x, y_-i)
            target = w @ p1[i] / w.sum()
            worst = max(worst, abs(target - lat[i, c]))
    return worst < 1e-12, f"max |E[target] - q*| = {worst:.1e}"


def recursion_matches_batch(seed=5, T=200):
    rng = np.random.default_rng(seed)
    ny, nx = 3, 5
    lik = LikelihoodModel(random_channel(rng, ny, nx))
    prior = rng.dirichlet(np.ones(ny))
    xs = rng.integers(0, nx, size=T)
    states = run_filter(prior, lik, xs)
    worst = max(np.abs(states[t].belief - batch_posterior(prior, lik, xs[:t]).probs).max()
                for t in range(T + 1))
    return worst < 1e-12, f"T={T}, max difference {worst:.1e}"


def posterior_exchangeable(seed=6, T=6):
    rng = np.random.default_rng(seed)
    lik = LikelihoodModel(random_channel(rng, 2, 4))
    prior = np.array([0.3, 0.7])
    xs = rng.integers(0, 4, size=T)
    ref = run_filter(prior, lik, xs)[-1].belief
    worst = 0.0
    for perm in itertools.permutations(range(T)):
        st = PosteriorState(prior)
        for k in perm:
            st = filter_update(st, lik, int(xs[k]))
        worst = max(worst, np.abs(st.belief - ref).max())
    # orderings differ only by float summation order
    batch_same = all(np.array_equal(batch_posterior(prior, lik, xs[list(p)]).probs,
                                    batch_posterior(prior, lik, xs).probs)
                     for p in itertools.permutations(range(T)))
    return batch_same and worst < 1e-14, f"{math.factorial(T)} orderings, max difference {worst:.1e}"


def density_exchangeable(seed=7):
    env = build_factorized_env(2, seed, T=8)
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, env.n_stimuli, size=env.T)
    base = sequence_log_prob(env, xs)
    worst = max(abs(sequence_log_prob(env, rng.permutation(xs)) - base) for _ in range(50))
    return worst < 1e-12, f"max log-density change under shuffling {worst:.1e}"


def factorized_filter_matches_joint(seed=8, T=30):
    worst = 0.0
    for n in (1, 2, 3):
        env = build_factorized_env(n, seed + n, T=T)
        lik = LikelihoodModel(env.emission)
        flik = FactorizedLikelihood(neuron_likelihoods(env))
        rng = np.random.default_rng(seed)
        xs = rng.integers(0, env.n_stimuli, size=T)
        st = PosteriorState(env.latent_prior)
        probs = env.factorized.neuron_priors.copy()
        for x in xs:
            st = filter_update(st, lik, int(x))
            probs = factorized_filter_update(probs, flik, int(x))
            worst = max(worst, np.abs(joint_marginals(st.belief, n) - probs).max())
    return worst < 1e-10, f"n = 1..3, max marginal difference {worst:.1e}"


def squash_contracts():
    """Repeated squashing without evidence decays the log-distance to the prior geometrically."""
    cfg = SpikingNetworkConfig(n=1, gamma=0.9, r_max=100.0)
    nrn = make_neuron(cfg, 1)
    nrn.log_p = cfg.prior_log_p + 1.0
    worst = 0.0
    for k in range(1, 40):
        squash(nrn)
        worst = max(worst, abs((nrn.log_p - cfg.prior_log_p) - 0.9**k))
    # pushing far out must clamp
    nrn.log_p = 10.0
    squash(nrn)
    hi = nrn.log_p
    nrn.log_p = -50.0
    squash(nrn)
    lo = nrn.log_p
    ok = worst < 1e-12 and hi == cfg.log_p_max and lo == cfg.log_p_min
    return ok, f"decay error {worst:.1e}; clamps at [{math.exp(lo):.1e}, {math.exp(hi):.1e}]"


def small_p_tracks_log_odds(seed=9, T=20, p_max=0.01):
    """Without squashing, spiking log-probability stays within ``T * p_max`` of filter log-odds."""
    rng = np.random.default_rng(seed)
    cfg = SpikingNetworkConfig(n=1, dt=1e-3, r_min=1e-3, r_max=100.0, prior_rate=1.0, gamma=1.0)
    nx = 4
    # |log alpha| <= 0.1 keeps p below prior * e^(0.1 T) = 0.0074 < p_max
    la = rng.uniform(-0.1, 0.1, size=nx)
    la[0] = 0.1
    nrn = make_neuron(cfg, nx)
    nrn.log_alpha = la
    lik = FactorizedLikelihood(np.stack([np.stack([np.full(nx, 1.0), np.exp(la)])]))
    prob = np.array([nrn.p])
    worst, peak = 0.0, 0.0
    for x in rng.integers(0, nx, size=T):
        squash(update(nrn, int(x)))
        prob = factorized_filter_update(prob, lik, int(x))
        peak = max(peak, prob[0])
        worst = max(worst, abs(nrn.log_p - float(log_odds(prob)[0])))
    ok = peak <= p_max and worst <= T * p_max
    return ok, f"max |log p - log odds| = {worst:.2e} (bound {T * p_max}), peak p {peak:.4f}"


CHECKS = [
    ("mutual-information first variation", mi_variation_fd),
    ("auxiliary marginal fixed point", marginal_fixed_point),
    ("code step ascends", code_step_ascends),
    ("neuron-local perturbation requires factorization", independent_perturbation_needs_factorization),
    ("per-neuron variations add up", factorized_variation_additive),
    ("lateral predictor fixed point", lateral_fixed_point),
    ("recursive filter equals batch posterior", recursion_matches_batch),
    ("posterior invariant to stimulus order", posterior_exchangeable),
    ("event density exchangeable", density_exchangeable),
    ("factorized filter matches joint marginals", factorized_filter_matches_joint),
    ("squash contraction and clamps", squash_contracts),
    ("small-probability log-odds tracking", small_p_tracks_log_odds),
]


def run_all(write=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as e:  # a crashing check is a failing check
            ok, detail = False, f"{type(e).__name__}: {e}"
        ok_all &= bool(ok)
        write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
