"""Discrete-time Bernoulli spiking network trained by a local infomax rule.

Each neuron carries its current spike log-probability and, per time step:

1. ``update``: multiplies the probability by a learned likelihood ratio
   ``alpha(x_t)`` (an addition in log space);
2. ``squash``: contracts the log-probability toward the prior and clamps it
   into ``[r_min*dt, r_max*dt]``;
3. samples a spike, predicts its own probability linearly from the other
   neurons' spikes, and learns: a delta rule for the predictor and a
   log-ratio ascent for ``log alpha``, gated by the previous step.

Neuron-level operations read and write a single :class:`SpikingNeuron`; the
only shared quantity is the spike vector of the current step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import EnvironmentSpec, sample_event
from .prob_core import EPS, mi_from_joint
from .trainlog import TrainLog


@dataclass
class SpikingNetworkConfig:
    n: int = 2
    dt: float = 1e-3
    r_min: float = 0.5
    r_max: float = 100.0
    prior_rate: float = 5.0
    gamma: float = 0.99
    eta_alpha: float = 0.01
    eta_w: float = 1e4
    spike_gated: bool = True
    clamp_gate: bool = True
    init_noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.r_max * self.dt > 0.1:
            raise ValueError("r_max * dt must stay <= 0.1 (small spike probability)")
        if not self.r_min <= self.prior_rate <= self.r_max:
            raise ValueError("prior_rate must lie within [r_min, r_max]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.eta_alpha < 0 or self.eta_w < 0:
            raise ValueError("learning rates must be >= 0")

    @property
    def log_p_min(self) -> float:
        return math.log(self.r_min * self.dt)

    @property
    def log_p_max(self) -> float:
        return math.log(self.r_max * self.dt)

    @property
    def prior_log_p(self) -> float:
        return math.log(self.prior_rate * self.dt)


@dataclass
class SpikingNeuron:
    log_p: float
    log_alpha: np.ndarray
    w: np.ndarray
    b: float
    prior_log_p: float
    log_p_min: float = -math.inf
    log_p_max: float = 0.0
    gamma: float = 1.0
    dt: float = 1e-3
    spike_prev: int = 0

    @property
    def p(self) -> float:
        return math.exp(self.log_p)

    def reset(self):
        self.log_p = self.prior_log_p
        return self

    def copy(self) -> "SpikingNeuron":
        return SpikingNeuron(self.log_p, self.log_alpha.copy(), self.w.copy(), self.b,
                             self.prior_log_p, self.log_p_min, self.log_p_max, self.gamma,
                             self.dt, self.spike_prev)


def make_neuron(cfg: SpikingNetworkConfig, n_stimuli: int,
                rng: np.random.Generator | None = None) -> SpikingNeuron:
    noise = 0.0 if rng is None else cfg.init_noise
    log_alpha = np.zeros(n_stimuli) if rng is None else noise * rng.standard_normal(n_stimuli)
    return SpikingNeuron(cfg.prior_log_p, log_alpha, np.zeros(cfg.n - 1), cfg.prior_rate,
                         cfg.prior_log_p, cfg.log_p_min, cfg.log_p_max, cfg.gamma, cfg.dt)


# -- per-neuron operations --------------------------------------------------

def update(neuron: SpikingNeuron, x: int) -> SpikingNeuron:
    """Evidence step: ``log p += log alpha[x]``."""
    neuron.log_p += neuron.log_alpha[x]
    return neuron


def squash(neuron: SpikingNeuron) -> SpikingNeuron:
    """Contract toward the prior by ``gamma`` in log space, then clamp to the rate bounds."""
    prior = neuron.prior_log_p
    v = prior + neuron.gamma * (neuron.log_p - prior)
    neuron.log_p = min(max(v, neuron.log_p_min), neuron.log_p_max)
    return neuron


def sample_spikes(probs, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, at most one spike per neuron per step."""
    p = np.asarray(probs, dtype=float)
    return (rng.random(p.shape) < p).astype(np.int8)


def lateral_predict(neuron: SpikingNeuron, y_minus_i, dt: float | None = None) -> float:
    """``q_i = max((w . y_-i + b) dt, eps)``."""
    dt = neuron.dt if dt is None else dt
    return max((_dot(neuron.w, y_minus_i) + neuron.b) * dt, EPS)


def predictor_learn(neuron: SpikingNeuron, y_minus_i, p_now: float,
                    eta_w: float) -> SpikingNeuron:
    """Delta rule on the linear predictor toward this step's probability."""
    dt = neuron.dt
    err = (_dot(neuron.w, y_minus_i) + neuron.b) * dt - p_now
    step = eta_w * err * dt
    if step != 0.0:
        for j, y in enumerate(y_minus_i):
            if y:
                neuron.w[j] -= step
        neuron.b -= step
    return neuron


def alpha_direction(p_prev: float, p_now: float, q: float) -> float:
    """Per-sample ascent direction ``p_prev * log(p_now / q)`` for ``alpha(x_t)``."""
    return p_prev * (math.log(p_now) - math.log(max(q, EPS)))


def alpha_learn(neuron: SpikingNeuron, x: int, p_prev: float, p_now: float, q: float,
                eta_alpha: float, spike_prev: int | None = None) -> SpikingNeuron:
    """Raise ``log alpha[x]`` by ``eta * gate * log(p_now / q)``.

    ``gate`` is ``p_prev`` when ``spike_prev`` is None, else the previous
    step's spike bit, a one-sample unbiased estimate of ``p_prev``.
    """
    gate = p_prev if spike_prev is None else float(spike_prev)
    if gate:
        neuron.log_alpha[x] += eta_alpha * alpha_direction(gate, p_now, q)
    return neuron


def _dot(w, y) -> float:
    s = 0.0
    for a, b in zip(w, y):
        if b:
            s += a
    return s


# -- network ----------------------------------------------------------------

@dataclass
class SpikingNetwork:
    neurons: list
    cfg: SpikingNetworkConfig
    rngs: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return len(self.neurons)

    @classmethod
    def create(cls, cfg: SpikingNetworkConfig, n_stimuli: int,
               log_alpha: np.ndarray | None = None) -> "SpikingNetwork":
        """Fresh network with one random stream per neuron derived from ``cfg.seed``."""
        seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.n + 1)
        init = np.random.default_rng(seqs[0])
        neurons = [make_neuron(cfg, n_stimuli, init) for _ in range(cfg.n)]
        if log_alpha is not None:
            for nrn, la in zip(neurons, np.asarray(log_alpha, dtype=float)):
                nrn.log_alpha = la.copy()
        return cls(neurons, cfg, [np.random.default_rng(s) for s in seqs[1:]])

    def log_alpha(self) -> np.ndarray:
        return np.array([nrn.log_alpha for nrn in self.neurons])

    def snapshot(self) -> dict:
        return {
            "log_alpha": self.log_alpha().tolist(),
            "w": [nrn.w.tolist() for nrn in self.neurons],
            "b": [nrn.b for nrn in self.neurons],
        }


@dataclass
class EventTrace:
    z: int
    stimuli: np.ndarray
    spikes: np.ndarray
    probs: np.ndarray
    gaps: np.ndarray = field(repr=False, default=None)

    def to_csv(self, fh=None) -> str | None:
        import csv
        import io
        out = io.StringIO() if fh is None else fh
        wr = csv.writer(out, lineterminator="\n")
        n = self.spikes.shape[1]
        header = ["t", "x_t"]
        for i in range(n):
            header += [f"prob_{i}", f"spike_{i}"]
        wr.writerow(header)
        for t in range(self.stimuli.size):
            row = [t + 1, int(self.stimuli[t])]
            for i in range(n):
                row += [format(float(self.probs[t, i]), ".17g"), int(self.spikes[t, i])]
            wr.writerow(row)
        return out.getvalue() if fh is None else None


def _others(spikes, i):
    return spikes[:i] + spikes[i + 1:]


def run_event(net: SpikingNetwork, xs, z: int = -1, learn: bool = True) -> EventTrace:
    """Simulate one perceptual event, learning online at every step.

    Per step and neuron, in order: update, squash, sample, lateral predict,
    predictor learning, alpha learning. Neuron ``i`` sees ``x_t``, its own
    fields and the other neurons' spike bits of the same step. With
    ``cfg.clamp_gate`` the alpha step is skipped while the squash clamp binds.
    """
    cfg = net.cfg
    neurons = net.neurons
    n = len(neurons)
    T = len(xs)
    # one uniform for the spontaneous pre-event spike, then one per step
    us = [rng.random(T + 1) for rng in net.rngs]
    probs = np.empty((T, n))
    spikes_out = np.zeros((T, n), dtype=np.int8)
    gaps = np.empty((T, n))
    for i, nrn in enumerate(neurons):
        nrn.reset()
        nrn.spike_prev = int(us[i][0] < nrn.p)
    eta_a = cfg.eta_alpha if learn else 0.0
    eta_w = cfg.eta_w if learn else 0.0
    gated = cfg.spike_gated
    clamp_gate = cfg.clamp_gate
    for t in range(T):
        x = int(xs[t])
        p_prev = [0.0] * n
        p_now = [0.0] * n
        spikes = [0] * n
        clamped = [False] * n
        for i, nrn in enumerate(neurons):
            p_prev[i] = nrn.p
            squash(update(nrn, x))
            p_now[i] = nrn.p
            clamped[i] = nrn.log_p in (nrn.log_p_min, nrn.log_p_max)
            spikes[i] = int(us[i][t + 1] < p_now[i])
        for i, nrn in enumerate(neurons):
            ctx = _others(spikes, i)
            q = lateral_predict(nrn, ctx)
            gaps[t, i] = q - p_now[i]
            if learn:
                predictor_learn(nrn, ctx, p_now[i], eta_w)
                # a binding clamp has zero derivative w.r.t. alpha
                if not (clamp_gate and clamped[i]):
                    alpha_learn(nrn, x, p_prev[i], p_now[i], q, eta_a,
                                nrn.spike_prev if gated else None)
            nrn.spike_prev = spikes[i]
        probs[t] = p_now
        spikes_out[t] = spikes
    return EventTrace(z, np.asarray(xs), spikes_out, probs, gaps)


def spike_count_mi(zs, counts) -> float:
    """Plug-in MI between latent labels and per-event spike-count vectors."""
    zs = np.asarray(zs)
    counts = np.asarray(counts)
    keys, inv = np.unique(counts.reshape(len(zs), -1), axis=0, return_inverse=True)
    zk, zinv = np.unique(zs, return_inverse=True)
    joint = np.zeros((zk.size, keys.shape[0]))
    np.add.at(joint, (zinv, inv.reshape(-1)), 1.0)
    return mi_from_joint(joint)


def simulate_frozen(log_alpha, cfg: SpikingNetworkConfig, xs: np.ndarray,
                    rng: np.random.Generator):
    """Vectorized no-learning simulation of many events; returns (probs, spikes).

    ``xs`` has shape ``(events, T)``; outputs have shape ``(events, T, n)``.
    """
    log_alpha = np.asarray(log_alpha, dtype=float)
    E, T = xs.shape
    n = log_alpha.shape[0]
    prior = cfg.prior_log_p
    log_p = np.full((E, n), prior)
    probs = np.empty((E, T, n))
    spikes = np.empty((E, T, n), dtype=np.int8)
    for t in range(T):
        log_p = log_p + log_alpha[:, xs[:, t]].T
        log_p = np.clip(prior + cfg.gamma * (log_p - prior), cfg.log_p_min, cfg.log_p_max)
        p = np.exp(log_p)
        probs[:, t] = p
        spikes[:, t] = rng.random((E, n)) < p
    return probs, spikes


def evaluate_mi(log_alpha, cfg: SpikingNetworkConfig, env: EnvironmentSpec,
                n_events: int = 20_000, seed: int = 12345) -> float:
    """Plug-in ``I(z; spike counts)`` of a frozen network on fresh events."""
    rng = np.random.default_rng(seed)
    zs = rng.choice(env.n_latent, size=n_events, p=env.latent_prior)
    cum = np.cumsum(env.emission, axis=1)
    u = rng.random((n_events, env.T))
    xs = (u[:, :, None] > cum[zs][:, None, :]).sum(axis=2)
    xs = np.minimum(xs, env.n_stimuli - 1)
    _, spikes = simulate_frozen(log_alpha, cfg, xs, rng)
    return spike_count_mi(zs, spikes.sum(axis=1))


def reference_log_alpha(env: EnvironmentSpec, n: int) -> np.ndarray:
    """Log likelihood ratios from the true emission table.

    Neuron ``i`` reports latent state ``i mod n_latent`` against the rest:
    ``log p(x | z = k) - log p(x | z != k)``.
    """
    out = np.empty((n, env.n_stimuli))
    for i in range(n):
        k = i % env.n_latent
        rest = np.delete(np.arange(env.n_latent), k)
        w = env.latent_prior[rest] / env.latent_prior[rest].sum()
        out[i] = np.log(env.emission[k]) - np.log(w @ env.emission[rest])
    return out


def train(net: SpikingNetwork, env: EnvironmentSpec, events: int, log_every: int = 1000,
          env_seed: int | None = None) -> TrainLog:
    """Train on ``events`` sampled events, resetting every neuron to its prior between events.

    Every ``log_every`` events a row is logged with the plug-in MI between
    latent and spike counts over that window, the mean absolute predictor
    residual and the mean firing rate.
    """
    cfg = net.cfg
    seed = cfg.seed if env_seed is None else env_seed
    env_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE1]))
    log = TrainLog(["event", "mi_plugin_nats", "mean_predictor_gap", "mean_rate_hz"])
    zs, counts, gaps, rates = [], [], [], []
    # initial row: the untrained network, frozen, on one window of independent events
    log.append(event=0,
               mi_plugin_nats=evaluate_mi(net.log_alpha(), cfg, env, n_events=log_every),
               mean_predictor_gap=0.0, mean_rate_hz=cfg.prior_rate)
    for k in range(1, events + 1):
        z, xs = sample_event(env, env_rng)
        tr = run_event(net, xs, z)
        zs.append(z)
        counts.append(tr.spikes.sum(axis=0))
        gaps.append(float(np.abs(tr.gaps).mean()))
        rates.append(float(tr.probs.mean()) / cfg.dt)
        if k % log_every == 0 or k == events:
            log.append(event=k, mi_plugin_nats=spike_count_mi(zs, counts),
                       mean_predictor_gap=float(np.mean(gaps)),
                       mean_rate_hz=float(np.mean(rates)))
            zs, counts, gaps, rates = [], [], [], []
    log.final_state = net
    return log
