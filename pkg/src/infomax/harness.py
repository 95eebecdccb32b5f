"""Experiment runners behind the CLI subcommands.

Each runner takes a checked config record and returns ``(TrainLog, summary)``
where ``summary`` holds the final metrics. Nothing here reads the clock or
global random state; all randomness comes from ``cfg.seed``.
"""
from __future__ import annotations

import logging

import numpy as np

from . import config as C
from .bayes_filter import (FactorizedLikelihood, LikelihoodModel, PosteriorState,
                           batch_posterior, factorized_filter_update, filter_update,
                           joint_marginals)
from .chase import ChaseConfig, run_chase
from .environments import (EnvironmentSpec, build_factorized_env, neuron_likelihoods,
                           sample_event, sequence_log_prob, two_state_world)
from .meanfield import MeanFieldConfig, run_meanfield
from .prob_core import CAPACITY_MAX_SIZE, capacity_oracle, entropy, marginal
from .spiking import (SpikingNetwork, SpikingNetworkConfig, evaluate_mi,
                      reference_log_alpha, train)
from .trainlog import TrainLog

log = logging.getLogger("infomax")


def _px(cfg) -> np.ndarray:
    if cfg.px is None:
        return np.full(cfg.nx, 1.0 / cfg.nx)
    return np.asarray(cfg.px, dtype=float)


def chase(cfg: C.ChaseRun):
    px = _px(cfg)
    tl = run_chase(px, ChaseConfig(eta_p=cfg.eta_p, eta_q=cfg.eta_q, steps=cfg.steps,
                                   seed=cfg.seed, log_every=cfg.log_every), ny=cfg.ny)
    last = tl.last()
    summary = {"final_mi_nats": last["mi_nats"], "final_q_gap_max": last["q_gap_max"]}
    if max(cfg.nx, cfg.ny) <= CAPACITY_MAX_SIZE:
        cap, _ = capacity_oracle(px, cfg.ny)
        summary["capacity_nats"] = cap
        summary["fraction_of_capacity"] = last["mi_nats"] / cap if cap > 0 else 1.0
    return tl, summary


def meanfield(cfg: C.MeanFieldRun):
    px = _px(cfg)
    tl = run_meanfield(px, cfg.n, MeanFieldConfig(eta_code=cfg.eta_code,
                                                  eta_pred=cfg.eta_pred, steps=cfg.steps,
                                                  seed=cfg.seed, log_every=cfg.log_every))
    last = tl.last()
    return tl, {"final_mi_nats": last["mi_nats"],
                "final_mean_predictor_gap": last["mean_predictor_gap"]}


def _load_env(path, fallback) -> EnvironmentSpec:
    if path is None:
        return fallback()
    try:
        return EnvironmentSpec.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise C.ConfigError(f"environment {path}: {e}") from None


def filter_run(cfg: C.FilterRun):
    """Filter sampled events; checks batch agreement and, if available, the factorized form."""
    env = _load_env(cfg.env, lambda: build_factorized_env(cfg.n, cfg.seed, T=cfg.T))
    lik = LikelihoodModel(env.emission)
    flik = FactorizedLikelihood(neuron_likelihoods(env)) if env.factorized else None
    rng = np.random.default_rng(cfg.seed)
    cols = ["event", "z", "posterior_entropy", "truth_posterior", "log_evidence",
            "batch_gap", "factorized_gap"]
    tl = TrainLog(cols)
    for k in range(cfg.events):
        z, xs = sample_event(env, rng)
        st = PosteriorState(env.latent_prior)
        probs = None if flik is None else np.asarray(env.factorized.neuron_priors, dtype=float)
        for x in xs:
            st = filter_update(st, lik, int(x))
            if flik is not None:
                probs = factorized_filter_update(probs, flik, int(x))
        batch = batch_posterior(env.latent_prior, lik, xs).probs
        fgap = 0.0
        if flik is not None:
            fgap = float(np.max(np.abs(joint_marginals(st.belief, flik.table.shape[0]) - probs)))
        tl.append(event=k, z=int(z), posterior_entropy=entropy(st.belief),
                  truth_posterior=float(st.belief[z]),
                  log_evidence=sequence_log_prob(env, xs),
                  batch_gap=float(np.max(np.abs(batch - st.belief))), factorized_gap=fgap)
    summary = {"events": cfg.events}
    if cfg.events:
        summary.update(
            mean_truth_posterior=float(np.mean(tl.column("truth_posterior"))),
            max_batch_gap=float(np.max(tl.column("batch_gap"))),
            max_factorized_gap=float(np.max(tl.column("factorized_gap"))))
    return tl, summary


def spiking(cfg: C.SpikingRun):
    env = _load_env(cfg.env, lambda: two_state_world(cfg.n_stimuli, T=cfg.T))
    net_cfg = SpikingNetworkConfig(
        n=cfg.n, dt=cfg.dt, r_min=cfg.r_min, r_max=cfg.r_max, prior_rate=cfg.prior_rate,
        gamma=cfg.gamma, eta_alpha=cfg.eta_alpha, eta_w=cfg.eta_w,
        spike_gated=cfg.spike_gated, clamp_gate=cfg.clamp_gate,
        init_noise=cfg.init_noise, seed=cfg.seed)
    net = SpikingNetwork.create(net_cfg, env.n_stimuli)
    init_alpha = net.log_alpha()
    tl = train(net, env, cfg.events, log_every=cfg.log_every)
    ev = cfg.eval_events
    mi0 = evaluate_mi(init_alpha, net_cfg, env, ev)
    mi1 = evaluate_mi(net.log_alpha(), net_cfg, env, ev)
    ref = evaluate_mi(reference_log_alpha(env, cfg.n), net_cfg, env, ev)
    summary = {"initial_mi_nats": mi0, "trained_mi_nats": mi1, "reference_mi_nats": ref,
               "fraction_of_reference": mi1 / ref if ref > 0 else float("nan"),
               "final_mean_predictor_gap": tl.last()["mean_predictor_gap"],
               "parameters": net.snapshot()}
    return tl, summary


def capacity(cfg: C.CapacityRun):
    if cfg.env is not None:
        env = _load_env(cfg.env, None)
        px = env.stimulus_marginal()
        ny = cfg.ny if cfg.ny is not None else env.n_stimuli
    else:
        px = np.asarray(cfg.px, dtype=float)
        ny = cfg.ny if cfg.ny is not None else px.size
    try:
        value, table = capacity_oracle(px, ny)
    except ValueError as e:
        raise C.ConfigError(str(e)) from None
    return None, {"capacity_nats": value, "px": px.tolist(), "ny": ny,
                  "argmax_table": table.rows.tolist(),
                  "output_marginal": marginal(px, table).tolist()}


RUNNERS = {
    "run-chase": chase,
    "run-meanfield": meanfield,
    "run-filter": filter_run,
    "run-spiking": spiking,
    "capacity": capacity,
}
