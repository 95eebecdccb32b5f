"""Synthetic latent-variable worlds emitting exchangeable stimulus streams."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .prob_core import ConditionalTable, FiniteDistribution

MAX_FACTORIZED_NEURONS = 4


@dataclass
class FactorizedEmission:
    """``p(x | y) = base[x] * prod_i g[i, x, y_i]`` for binary ``y``.

    ``neuron_priors[i]`` is ``p(y_i = 1)``; latent states are the ``2**n``
    binary vectors in MSB-first order.
    """

    base: np.ndarray
    g: np.ndarray
    neuron_priors: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[0]


@dataclass
class EnvironmentSpec:
    latent_prior: np.ndarray
    emission: np.ndarray
    T: int
    factorized: FactorizedEmission | None = field(default=None, repr=False)

    def __post_init__(self):
        self.latent_prior = FiniteDistribution(self.latent_prior).probs
        self.emission = ConditionalTable(self.emission, tol=1e-10).rows
        if self.emission.shape[0] != self.latent_prior.size:
            raise ValueError("emission needs one row per latent state")
        if int(self.T) < 1:
            raise ValueError("event length T must be >= 1")
        self.T = int(self.T)

    @property
    def n_latent(self) -> int:
        return self.latent_prior.size

    @property
    def n_stimuli(self) -> int:
        return self.emission.shape[1]

    def stimulus_marginal(self) -> np.ndarray:
        return self.latent_prior @ self.emission

    def to_dict(self) -> dict:
        d = {
            "latent_prior": self.latent_prior.tolist(),
            "emission": self.emission.tolist(),
            "T": self.T,
        }
        if self.factorized is not None:
            d["factorized_emission"] = {
                "base": self.factorized.base.tolist(),
                "g": self.factorized.g.tolist(),
                "neuron_priors": self.factorized.neuron_priors.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        unknown = set(d) - {"latent_prior", "emission", "T", "factorized_emission"}
        if unknown:
            raise ValueError(f"unknown environment keys: {sorted(unknown)}")
        fe = d.get("factorized_emission")
        fact = None
        if fe is not None:
            fact = FactorizedEmission(np.asarray(fe["base"], float), np.asarray(fe["g"], float),
                                      np.asarray(fe["neuron_priors"], float))
        return cls(np.asarray(d["latent_prior"], float), np.asarray(d["emission"], float),
                   int(d["T"]), fact)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "EnvironmentSpec":
        with open(path) as fh:
            return cls.from_json(fh.read())


def sample_event(spec: EnvironmentSpec, rng: np.random.Generator, z: int | None = None):
    """Draw ``z ~ latent_prior`` (unless given) and ``T`` i.i.d. stimuli from ``p(x|z)``."""
    if z is None:
        z = int(rng.choice(spec.n_latent, p=spec.latent_prior))
    xs = rng.choice(spec.n_stimuli, size=spec.T, p=spec.emission[z])
    return z, xs


def sample_events(spec: EnvironmentSpec, rng: np.random.Generator, count: int,
                  persistence: float = 0.0):
    """``count`` events; with probability ``persistence`` an event keeps the previous latent."""
    zs = np.empty(count, dtype=int)
    xs = np.empty((count, spec.T), dtype=int)
    z = None
    for k in range(count):
        keep = z is not None and persistence > 0 and rng.random() < persistence
        zs[k], xs[k] = sample_event(spec, rng, z if keep else None)
        z = zs[k]
    return zs, xs


def sequence_log_prob(spec: EnvironmentSpec, xs) -> float:
    """``log p(x_1:T)`` under the mixture over latent states."""
    logs = np.log(spec.latent_prior) + np.log(spec.emission[:, np.asarray(xs)]).sum(axis=1)
    m = logs.max()
    return float(m + np.log(np.exp(logs - m).sum()))


def binary_states(n: int) -> np.ndarray:
    return ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(int)


def factorized_emission_table(fe: FactorizedEmission) -> np.ndarray:
    ys = binary_states(fe.n)
    rows = np.tile(fe.base, (ys.shape[0], 1))
    for i in range(fe.n):
        rows *= fe.g[i][:, ys[:, i]].T
    return rows


def build_factorized_env(n: int, seed: int, n_stimuli: int | None = None, T: int = 20,
                         max_tries: int = 1000) -> EnvironmentSpec:
    """World whose likelihood factorizes as ``f(x) prod_i g_i(x, y_i)``.

    ``g`` is drawn at random and ``f`` is the positive solution of the
    normalization constraints closest to a random positive draw; draws with
    no positive solution are resampled.
    """
    if not 1 <= n <= MAX_FACTORIZED_NEURONS:
        raise ValueError(f"n must be in 1..{MAX_FACTORIZED_NEURONS}")
    nx = n_stimuli if n_stimuli is not None else 2 ** (n + 1)
    if nx < max(2, 2**n):
        raise ValueError("need at least 2**n stimulus symbols")
    rng = np.random.default_rng(seed)
    ys = binary_states(n)
    for _ in range(max_tries):
        g = rng.uniform(0.3, 1.0, size=(n, nx, 2))
        priors = rng.uniform(0.2, 0.8, size=n)
        # G[x, k] = prod_i g_i(x, y_i) for latent state k
        G = np.ones((nx, ys.shape[0]))
        for i in range(n):
            G *= g[i][:, ys[:, i]]
        f0 = rng.uniform(0.5, 1.5, size=nx)
        f0 /= (G.T @ f0).mean()
        f = f0 + G @ np.linalg.solve(G.T @ G, 1.0 - G.T @ f0)
        if np.any(f <= 1e-6):
            continue
        fe = FactorizedEmission(f, g, priors)
        emission = factorized_emission_table(fe)
        if np.max(np.abs(emission.sum(axis=1) - 1.0)) > 1e-12:
            continue
        emission /= emission.sum(axis=1, keepdims=True)
        prior = np.prod(np.where(ys == 1, priors, 1.0 - priors), axis=1)
        return EnvironmentSpec(prior, emission, T, fe)
    raise RuntimeError("could not draw a normalizable factorized likelihood")


def neuron_likelihoods(spec: EnvironmentSpec) -> np.ndarray:
    """Per-neuron ``p(x_1 = x | y_i)`` as an ``(n, 2, nx)`` array.

    Computed by marginalizing the joint emission over the other neurons under
    the (product) latent prior.
    """
    if spec.factorized is None:
        raise ValueError("environment has no factorized emission")
    n = spec.factorized.n
    ys = binary_states(n)
    out = np.empty((n, 2, spec.n_stimuli))
    for i in range(n):
        for b in (0, 1):
            mask = ys[:, i] == b
            w = spec.latent_prior[mask]
            out[i, b] = (w / w.sum()) @ spec.emission[mask]
    return out


def two_state_world(n_stimuli: int = 4, T: int = 30, seed: int | None = None,
                    sharpness: float = 1.0) -> EnvironmentSpec:
    """Two equiprobable latent states with mirrored emission tables."""
    if seed is None:
        base = np.linspace(1.0, 0.2, n_stimuli) ** sharpness
    else:
        base = np.random.default_rng(seed).uniform(0.1, 1.0, size=n_stimuli)
    row0 = base / base.sum()
    return EnvironmentSpec([0.5, 0.5], np.vstack([row0, row0[::-1]]), T)
