"""Mean-field population code of binary neurons with lateral predictors.

Neuron ``i`` holds its own Bernoulli table ``p(y_i=1|x)`` (as logits) and a
tabular predictor ``q(y_i=1|y_-i)`` over the ``2**(n-1)`` contexts of the
other neurons. Its updates read only ``x``, ``y_-i`` and its own rows.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .prob_core import EPS, FiniteDistribution, entropy, mutual_information
from .trainlog import TrainLog

MAX_ENUM_NEURONS = 12


def outcomes(n: int) -> np.ndarray:
    """All binary vectors of length ``n``; row ``k`` is ``k`` written MSB-first."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=int).reshape(2**n, n)


def context_index(y_minus_i) -> int:
    """Index of a context vector in :func:`outcomes` ordering."""
    k = 0
    for b in y_minus_i:
        k = 2 * k + int(b)
    return k


def drop(y, i: int) -> np.ndarray:
    y = np.asarray(y)
    return np.concatenate([y[:i], y[i + 1:]])


def _clip(p):
    return np.clip(p, EPS, 1.0 - EPS)


@dataclass
class FactorizedCode:
    """``logits[i, x]`` parameterizes ``p(y_i = 1 | x)``."""

    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.atleast_2d(np.asarray(self.logits, dtype=float))

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return _clip(expit(self.logits))

    @classmethod
    def from_probs(cls, probs) -> "FactorizedCode":
        return cls(logit(_clip(np.asarray(probs, dtype=float))))

    @classmethod
    def initial(cls, n: int, nx: int, rng: np.random.Generator, noise: float = 0.01):
        return cls.from_probs(0.5 + noise * rng.uniform(-1.0, 1.0, size=(n, nx)))


@dataclass
class LateralPredictor:
    """``table[i, c] = q(y_i = 1 | y_-i = context c)``."""

    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float).reshape(-1, self.table.shape[-1])

    @classmethod
    def uniform(cls, n: int) -> "LateralPredictor":
        return cls(np.full((n, 2 ** max(n - 1, 0)), 0.5))


def joint_from_factors(code: FactorizedCode, x: int) -> FiniteDistribution:
    """Product distribution over ``{0,1}^n`` for stimulus ``x``."""
    return FiniteDistribution(joint_table(code)[x])


def joint_table(code: FactorizedCode) -> np.ndarray:
    """``p(y|x)`` for every ``x``: shape ``(nx, 2**n)``."""
    n = code.n
    if n > MAX_ENUM_NEURONS:
        raise ValueError(f"enumeration is capped at n={MAX_ENUM_NEURONS}")
    p1 = code.probs.T  # (nx, n)
    ys = outcomes(n)
    # (nx, 2**n, n) -> product over neurons
    per = np.where(ys[None, :, :] == 1, p1[:, None, :], 1.0 - p1[:, None, :])
    return per.prod(axis=2)


def joint_mi(px, code: FactorizedCode) -> float:
    if code.n == 0:
        return 0.0
    return mutual_information(px, joint_table(code))


def lateral_conditionals(px, code: FactorizedCode) -> np.ndarray:
    """Exact ``p(y_i = 1 | y_-i)`` for every neuron and context, by enumeration."""
    px = np.asarray(px, dtype=float)
    n = code.n
    py = px @ joint_table(code)
    ys = outcomes(n)
    out = np.empty((n, 2 ** (n - 1)))
    for i in range(n):
        num = np.zeros(2 ** (n - 1))
        den = np.zeros(2 ** (n - 1))
        for k, y in enumerate(ys):
            c = context_index(drop(y, i))
            den[c] += py[k]
            if y[i] == 1:
                num[c] += py[k]
        out[i] = num / np.maximum(den, 1e-300)
    return out


def composite_perturbation(code: FactorizedCode, dps) -> np.ndarray:
    """Joint ``dp(y|x) = sum_i p(y_-i|x) dp(y_i|x)`` for per-neuron ``dps[i, x]``."""
    n = code.n
    p1 = code.probs  # (n, nx)
    ys = outcomes(n)
    dps = np.asarray(dps, dtype=float).reshape(n, -1)
    out = np.zeros((p1.shape[1], ys.shape[0]))
    for i in range(n):
        rest = np.ones((p1.shape[1], ys.shape[0]))
        for j in range(n):
            if j != i:
                rest *= np.where(ys[None, :, j] == 1, p1[j][:, None], 1.0 - p1[j][:, None])
        sign = np.where(ys[:, i] == 1, 1.0, -1.0)
        out += rest * sign[None, :] * dps[i][:, None]
    return out


def factorized_variation(px, code: FactorizedCode, i: int, dp_i) -> float:
    """Variation of the joint MI when only neuron ``i``'s table moves by ``dp_i``.

    ``E_{x, y_-i} sum_{y_i} log(p(y_i|x) / p(y_i|y_-i)) dp(y_i|x)`` with
    ``dp(y_i=0|x) = -dp_i[x]`` and the lateral conditional computed exactly.
    """
    px = np.asarray(px, dtype=float)
    dp_i = np.asarray(dp_i, dtype=float)
    p1 = code.probs
    moved = p1[i] + dp_i
    if np.any(moved <= 0.0) or np.any(moved >= 1.0):
        raise ValueError("perturbed Bernoulli parameters must stay inside (0, 1)")
    n = code.n
    lat = lateral_conditionals(px, code)[i]
    ctxs = outcomes(n - 1)
    # p(y_-i | x) for each context
    rest = np.ones((px.size, ctxs.shape[0]))
    others = [j for j in range(n) if j != i]
    for col, j in enumerate(others):
        rest *= np.where(ctxs[None, :, col] == 1, p1[j][:, None], 1.0 - p1[j][:, None])
    # sum over y_i of log-ratio * dp: (logit p - logit q) dp, written out
    log_ratio_1 = np.log(p1[i])[:, None] - np.log(np.maximum(lat, EPS))[None, :]
    log_ratio_0 = np.log(1 - p1[i])[:, None] - np.log(np.maximum(1 - lat, EPS))[None, :]
    integrand = (log_ratio_1 - log_ratio_0) * dp_i[:, None]
    return float((px[:, None] * rest * integrand).sum())


def predictor_step(pred: LateralPredictor, i: int, y_minus_i, target: float,
                   eta: float) -> LateralPredictor:
    """Move ``q(y_i=1|y_-i)`` toward this sample's ``p(y_i=1|x)``."""
    table = pred.table.copy()
    c = context_index(y_minus_i)
    table[i, c] = predictor_value(table[i, c], target, eta)
    return LateralPredictor(table)


def predictor_value(q: float, target: float, eta: float) -> float:
    return min(max(q - eta * (q - target), EPS), 1.0 - EPS)


def neuron_logit_delta(p: float, q: float, eta: float) -> float:
    """Logit step for one neuron's Bernoulli ascending ``log(p(y_i|x)/q(y_i|y_-i))``.

    Written as the two-symbol softmax row step, so ``n = 1`` coincides with
    the single-channel chase.
    """
    p = min(max(p, EPS), 1.0 - EPS)
    q = min(max(q, EPS), 1.0 - EPS)
    g = (np.log(p) - np.log(q)) - (np.log1p(-p) - np.log1p(-q))
    return float(2.0 * eta * p * (1.0 - p) * g)


def code_step(code: FactorizedCode, i: int, x: int, y_minus_i,
              pred: LateralPredictor, eta: float) -> FactorizedCode:
    logits = code.logits.copy()
    p = float(expit(code.logits[i, x]))
    q = float(pred.table[i, context_index(y_minus_i)])
    logits[i, x] += neuron_logit_delta(p, q, eta)
    return FactorizedCode(logits)


@dataclass
class MeanFieldConfig:
    eta_code: float = 0.05
    eta_pred: float = 0.5
    steps: int = 200_000
    seed: int = 0
    log_every: int = 1000

    def __post_init__(self):
        if self.eta_code <= 0 or self.eta_pred <= 0:
            raise ValueError("learning rates must be positive")
        if self.eta_pred <= self.eta_code:
            raise ValueError(
                "eta_pred must exceed eta_code: the predictor has to run on the faster timescale")
        if self.steps < 0 or self.log_every < 1:
            raise ValueError("steps must be >= 0 and log_every >= 1")


def run_meanfield(px, n: int, cfg: MeanFieldConfig, code: FactorizedCode | None = None,
                  pred: LateralPredictor | None = None) -> TrainLog:
    """Distributed online training of the factorized code.

    Each step samples ``x`` and a full response ``y`` from the current code;
    every neuron then updates its predictor entry and its own Bernoulli from
    the pre-step snapshot, and all updates are committed together.
    """
    px = np.asarray(px, dtype=float)
    nx = px.size
    rng = np.random.default_rng(cfg.seed)
    cols = ["step", "mi_nats", "mean_predictor_gap"] + [f"entropy_{i}" for i in range(n)]
    log = TrainLog(cols)
    if n == 0:
        for k in [0] + ([cfg.steps] if cfg.steps else []):
            log.append(step=k, mi_nats=0.0, mean_predictor_gap=0.0)
        return log
    if code is None:
        code = FactorizedCode.initial(n, nx, rng)
    if pred is None:
        pred = LateralPredictor.uniform(n)
    logits = code.logits.copy()
    table = pred.table.copy()

    def record(step):
        c = FactorizedCode(logits)
        gap = float(np.abs(table - lateral_conditionals(px, c)).mean())
        marg = px @ c.probs.T
        ent = {f"entropy_{i}": entropy([1 - marg[i], marg[i]]) for i in range(n)}
        log.append(step=step, mi_nats=joint_mi(px, c), mean_predictor_gap=gap, **ent)

    record(0)
    xs = rng.choice(nx, size=cfg.steps, p=px)
    us = rng.random(size=(cfg.steps, n))
    pow2 = 2 ** np.arange(n - 2, -1, -1) if n > 1 else np.zeros(0, dtype=int)
    for k in range(cfg.steps):
        x = xs[k]
        p_col = expit(logits[:, x])
        y = (us[k] < p_col).astype(int)
        new_logits_col = logits[:, x].copy()
        for i in range(n):
            c = int(drop(y, i) @ pow2) if n > 1 else 0
            q = table[i, c]
            p = min(max(p_col[i], EPS), 1.0 - EPS)
            new_logits_col[i] += neuron_logit_delta(p, q, cfg.eta_code)
            table[i, c] = predictor_value(q, p, cfg.eta_pred)
        logits[:, x] = new_logits_col
        if (k + 1) % cfg.log_every == 0 or k + 1 == cfg.steps:
            record(k + 1)
    log.final_state = (FactorizedCode(logits), LateralPredictor(table))
    return log


def factorized_grid_optimum(px, n: int, resolution: float = 1e-2, restarts: int = 8,
                            seed: int = 0):
    """Best joint MI over factorized codes on a grid of Bernoulli parameters.

    Every grid vertex code (all parameters in {0, 1}) is enumerated, then
    coordinate sweeps over the full ``resolution`` grid run from the best
    vertex and from random grid points. MI is convex in any one neuron's
    table with the others fixed, so vertices already contain a maximizer;
    the sweeps confirm no grid neighbour beats it. Returns ``(value, probs)``.
    """
    px = np.asarray(px, dtype=float)
    nx = px.size
    if n * nx > 16:
        raise ValueError("grid oracle is capped at n * |x| <= 16")
    levels = np.round(np.arange(0.0, 1.0 + resolution / 2, resolution), 12)

    def mi_of(probs):
        return mutual_information(px, _product_table(probs))

    best_val, best = -np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n * nx):
        probs = np.array(bits).reshape(n, nx)
        v = mi_of(probs)
        if v > best_val + 1e-15:
            best_val, best = v, probs

    rng = np.random.default_rng(seed)
    starts = [best] + [rng.choice(levels, size=(n, nx)) for _ in range(restarts)]
    for probs in starts:
        probs = probs.copy()
        val = mi_of(probs)
        for _ in range(50):
            improved = False
            for i in range(n):
                for x in range(nx):
                    cand = np.repeat(probs[None], levels.size, axis=0)
                    cand[:, i, x] = levels
                    vals = np.array([mi_of(c) for c in cand])
                    j = int(np.argmax(vals))
                    if vals[j] > val + 1e-15:
                        val, probs, improved = float(vals[j]), cand[j].copy(), True
            if not improved:
                break
        if val > best_val + 1e-15:
            best_val, best = val, probs
    return float(best_val), best


def _product_table(probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    ys = outcomes(probs.shape[0])
    p1 = probs.T
    return np.where(ys[None] == 1, p1[:, None, :], 1.0 - p1[:, None, :]).prod(axis=2)
