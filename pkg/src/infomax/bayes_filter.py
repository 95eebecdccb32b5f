"""Recursive Bayesian filtering of a static latent over an exchangeable stream."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .prob_core import ConditionalTable, FiniteDistribution


class ContradictoryEvidence(ValueError):
    """All posterior mass vanished."""


@dataclass(frozen=True)
class PosteriorState:
    belief: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class LikelihoodModel:
    """Time-invariant ``table[y, x] = p(x_1 = x | y)``."""

    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", ConditionalTable(self.table, tol=1e-10).rows)


@dataclass(frozen=True)
class FactorizedLikelihood:
    """Per-neuron ``table[i, b, x] = p(x_1 = x | y_i = b)``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 3 or t.shape[1] != 2:
            raise ValueError("factorized likelihood must have shape (n, 2, n_stimuli)")
        object.__setattr__(self, "table", t)

    def ratio(self, x: int) -> np.ndarray:
        """``alpha_i(x) = p(x|y_i=1) / p(x|y_i=0)`` for every neuron."""
        den = self.table[:, 0, x]
        if np.any(den == 0):
            raise ZeroDivisionError(f"p(x={x} | y_i=0) is zero for some neuron")
        return self.table[:, 1, x] / den


def _normalize_log(logb: np.ndarray) -> np.ndarray:
    total = logsumexp(logb)
    if not np.isfinite(total):
        raise ContradictoryEvidence("posterior has zero total mass")
    return np.exp(logb - total)


def _log(a) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(a, dtype=float))


def filter_update(state: PosteriorState, lik: LikelihoodModel, x: int) -> PosteriorState:
    """One Bayes step: belief times ``p(x|y)``, renormalized."""
    belief = _normalize_log(_log(state.belief) + _log(lik.table[:, x]))
    return PosteriorState(belief, state.t + 1)


def batch_posterior(prior, lik: LikelihoodModel, xs) -> FiniteDistribution:
    """Normalized ``p(y) prod_t p(x_t|y)`` computed in log space."""
    prior = np.asarray(prior, dtype=float)
    xs = np.asarray(xs, dtype=int)
    if xs.size == 0:
        return FiniteDistribution(prior)
    counts = np.bincount(xs, minlength=lik.table.shape[1])
    loglik = _log(lik.table)
    # count-weighted sum; 0 * -inf for unseen symbols must stay 0
    terms = np.where(counts[None, :] > 0, loglik * counts[None, :], 0.0)
    return FiniteDistribution(_normalize_log(_log(prior) + terms.sum(axis=1)), tol=1e-10)


def run_filter(prior, lik: LikelihoodModel, xs) -> list[PosteriorState]:
    """Posterior trajectory ``[p(y), p(y|x_1), ..., p(y|x_1:T)]``."""
    states = [PosteriorState(np.asarray(prior, dtype=float))]
    for x in xs:
        states.append(filter_update(states[-1], lik, int(x)))
    return states


def factorized_filter_update(probs, lik: FactorizedLikelihood, x: int) -> np.ndarray:
    """Per-neuron odds update ``odds_i <- odds_i * alpha_i(x)``."""
    p = np.asarray(probs, dtype=float)
    a = lik.ratio(x)
    num = p * a
    return num / (num + (1.0 - p))


def joint_marginals(belief, n: int) -> np.ndarray:
    """``p(y_i = 1)`` from a belief over the ``2**n`` MSB-first binary states."""
    ys = ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1)
    return np.asarray(belief) @ ys


def product_belief(probs) -> np.ndarray:
    """Joint belief over binary states from independent per-neuron Bernoullis."""
    p = np.asarray(probs, dtype=float)
    n = p.size
    ys = ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1)
    return np.prod(np.where(ys == 1, p, 1.0 - p), axis=1)


def log_odds(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)
