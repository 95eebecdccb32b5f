"""Tabular MI maximization by the chase between a channel and its marginal.

The channel ``p(y|x)`` climbs along ``log(p(y|x) / q(y))`` while an
auxiliary marginal ``q(y)`` descends along ``q(y) - p(y|x)``. Both live on
per-row softmax scores so no step can leave the simplex.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .prob_core import EPS, mutual_information, marginal
from .trainlog import TrainLog


def softmax(scores: np.ndarray) -> np.ndarray:
    z = np.exp(scores - scores.max(axis=-1, keepdims=True))
    p = z / z.sum(axis=-1, keepdims=True)
    p = np.maximum(p, EPS)
    return p / p.sum(axis=-1, keepdims=True)


def score_step(probs: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Pull a probability-space direction back to softmax scores.

    Multiplies by the softmax Jacobian ``diag(p) - p p^T``; the result is the
    score gradient of ``direction . p`` and is orthogonal to the all-ones
    vector, so a zero-mean-under-p direction leaves the row unchanged.
    """
    return probs * (direction - probs @ direction)


@dataclass
class ChaseConfig:
    eta_p: float = 0.05
    eta_q: float = 0.5
    steps: int = 100_000
    seed: int = 0
    log_every: int = 1000

    def __post_init__(self):
        if self.eta_p <= 0 or self.eta_q <= 0:
            raise ValueError("learning rates must be positive")
        if self.eta_q <= self.eta_p:
            raise ValueError(
                "eta_q must exceed eta_p: the marginal has to run on the faster timescale")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


@dataclass
class ChaseState:
    """Channel scores (``nx x ny``) and auxiliary-marginal scores (``ny``)."""

    code_scores: np.ndarray
    aux_scores: np.ndarray
    step_count: int = 0
    code: np.ndarray = field(init=False, repr=False)
    aux: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.code_scores = np.asarray(self.code_scores, dtype=float)
        self.aux_scores = np.asarray(self.aux_scores, dtype=float)
        self.code = softmax(self.code_scores)
        self.aux = softmax(self.aux_scores)

    @classmethod
    def from_probs(cls, code, aux, step_count: int = 0) -> "ChaseState":
        code = np.maximum(np.asarray(code, dtype=float), EPS)
        aux = np.maximum(np.asarray(aux, dtype=float), EPS)
        return cls(np.log(code), np.log(aux), step_count)

    @classmethod
    def initial(cls, nx: int, ny: int, rng: np.random.Generator,
                noise: float = 0.01) -> "ChaseState":
        # uniform is a saddle of MI, so break the symmetry
        code = 1.0 / ny + noise * rng.uniform(-1.0, 1.0, size=(nx, ny))
        code /= code.sum(axis=1, keepdims=True)
        return cls.from_probs(code, np.full(ny, 1.0 / ny))


def q_direction(state: ChaseState, x: int) -> np.ndarray:
    """Descent direction ``-(q(y) - p(y|x))`` in probability space."""
    return -(state.aux - state.code[x])


def p_direction(state: ChaseState, x: int) -> np.ndarray:
    """Ascent direction ``log(p(y|x) / q(y))`` in probability space."""
    return np.log(state.code[x]) - np.log(np.maximum(state.aux, EPS))


def q_step(state: ChaseState, x: int, eta_q: float) -> ChaseState:
    aux_scores = state.aux_scores + eta_q * score_step(state.aux, q_direction(state, x))
    return replace(state, aux_scores=aux_scores, step_count=state.step_count + 1)


def p_step(state: ChaseState, x: int, eta_p: float) -> ChaseState:
    code_scores = state.code_scores.copy()
    code_scores[x] += eta_p * score_step(state.code[x], p_direction(state, x))
    return replace(state, code_scores=code_scores)


def run_chase(px, cfg: ChaseConfig, ny: int | None = None,
              state: ChaseState | None = None) -> TrainLog:
    """Online chase on samples ``x ~ px``.

    Each step draws one ``x`` and applies ``q_step`` then ``p_step`` on the
    same sample. Rows are logged at step 0, every ``cfg.log_every`` steps and
    at the final step.
    """
    px = np.asarray(px, dtype=float)
    nx = px.size
    ny = nx if ny is None else ny
    rng = np.random.default_rng(cfg.seed)
    if state is None:
        state = ChaseState.initial(nx, ny, rng)
    xs = rng.choice(nx, size=cfg.steps, p=px)

    log = TrainLog(["step", "mi_nats", "q_gap_max", "eta_p", "eta_q"])

    def record(step, st):
        gap = np.abs(st.aux - marginal(px, st.code)).max()
        log.append(step=step, mi_nats=mutual_information(px, st.code), q_gap_max=gap,
                   eta_p=cfg.eta_p, eta_q=cfg.eta_q)

    record(0, state)
    for k, x in enumerate(xs, start=1):
        state = q_step(state, x, cfg.eta_q)
        state = p_step(state, x, cfg.eta_p)
        if k % cfg.log_every == 0 or k == cfg.steps:
            record(k, state)
    log.final_state = state
    return log
