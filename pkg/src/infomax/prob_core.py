"""Exact finite-alphabet information calculus.

Everything here works on small tables held as numpy arrays. All
information quantities are in nats.
"""
from __future__ import annotations

import itertools

import numpy as np

EPS = 1e-9
NORM_TOL = 1e-12
CAPACITY_MAX_SIZE = 6


class FiniteDistribution:
    """Probability vector over ``range(K)``."""

    def __init__(self, probs, tol: float = NORM_TOL):
        p = np.array(probs, dtype=float).reshape(-1)
        if p.size < 1:
            raise ValueError("alphabet size must be >= 1")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > tol:
            raise ValueError(f"probabilities sum to {p.sum():.17g}, not 1")
        p.setflags(write=False)
        self.probs = p

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return self.probs.size

    def __repr__(self):
        return f"FiniteDistribution({self.probs.tolist()})"

    @classmethod
    def uniform(cls, k: int) -> "FiniteDistribution":
        return cls(np.full(k, 1.0 / k))


class ConditionalTable:
    """Row-stochastic table ``rows[c, o] = p(o | c)``."""

    def __init__(self, rows, tol: float = NORM_TOL):
        t = np.array(rows, dtype=float)
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
            raise ValueError("conditional table must be a non-empty 2-d array")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("table entries must be finite and non-negative")
        bad = np.abs(t.sum(axis=1) - 1.0) > tol
        if np.any(bad):
            raise ValueError(f"rows {np.flatnonzero(bad).tolist()} are not normalized")
        t.setflags(write=False)
        self.rows = t

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    @property
    def shape(self):
        return self.rows.shape

    def __repr__(self):
        return f"ConditionalTable({self.rows.tolist()})"


class TablePerturbation:
    """Zero-row-sum perturbation of a :class:`ConditionalTable`."""

    def __init__(self, deltas, tol: float = NORM_TOL):
        d = np.array(deltas, dtype=float)
        if d.ndim != 2:
            raise ValueError("perturbation must be 2-d")
        if np.any(np.abs(d.sum(axis=1)) > tol):
            raise ValueError("perturbation rows must sum to zero")
        d.setflags(write=False)
        self.deltas = d

    def __array__(self, dtype=None, copy=None):
        return self.deltas if dtype is None else self.deltas.astype(dtype)


def _vec(d) -> np.ndarray:
    return np.asarray(d, dtype=float).reshape(-1)


def _table(t) -> np.ndarray:
    return np.atleast_2d(np.asarray(t, dtype=float))


def _plogp(p: np.ndarray) -> np.ndarray:
    # 0 log 0 := 0; logs evaluated on max(p, EPS)
    return p * np.log(np.maximum(p, EPS))


def entropy(d) -> float:
    """Shannon entropy ``-sum p log p``."""
    p = _vec(d)
    return float(max(-_plogp(p).sum(), 0.0))


def marginal(px, pyx) -> np.ndarray:
    """``p(y) = sum_x p(x) p(y|x)``."""
    px, pyx = _vec(px), _table(pyx)
    if pyx.shape[0] != px.size:
        raise ValueError(
            f"table has {pyx.shape[0]} rows but input alphabet has {px.size} symbols")
    return px @ pyx


def conditional_entropy(px, pyx) -> float:
    px, pyx = _vec(px), _table(pyx)
    return float(-(px[:, None] * _plogp(pyx)).sum())


def mutual_information(px, pyx) -> float:
    """``I(x;y) = H(y) - H(y|x)`` for input ``px`` and channel ``pyx``."""
    py = marginal(px, pyx)
    return entropy(py) - conditional_entropy(px, pyx)


def mi_variation(px, pyx, dp) -> float:
    """First variation of ``I(x;y)`` along a channel perturbation ``dp``.

    Returns ``E_x sum_y log(p(y|x)/p(y)) dp(y|x)``, which is linear in ``dp``.
    """
    px, pyx, dp = _vec(px), _table(pyx), _table(dp)
    if dp.shape != pyx.shape:
        raise ValueError(f"perturbation shape {dp.shape} != table shape {pyx.shape}")
    py = marginal(px, pyx)
    weighted = px[:, None] * dp
    touched = np.any(weighted != 0, axis=0)
    if np.any(touched & (py <= 0)):
        raise ValueError("perturbation touches an output with zero marginal probability")
    log_ratio = np.log(np.maximum(pyx, EPS)) - np.log(np.maximum(py, EPS))
    return float((weighted * log_ratio).sum())


def _simplex_grid(k: int, m: int) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates in ``{0, 1/m, ..., 1}``."""
    pts = [c for c in itertools.product(range(m + 1), repeat=k - 1) if sum(c) <= m]
    a = np.array(pts, dtype=float).reshape(len(pts), k - 1)
    return np.column_stack([a, m - a.sum(axis=1)]) / m


def _batch_mi(px: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """MI for a stack of channels, shape (B, nx, ny)."""
    py = np.einsum("x,bxy->by", px, tables)
    hy = -_plogp(py).sum(axis=1)
    hyx = -np.einsum("x,bxy->b", px, _plogp(tables))
    return hy - hyx


def capacity_oracle(px, y_alphabet_size: int, tol: float = 1e-6,
                    max_points: int = 200_000):
    """Brute-force maximum of ``I(x;y)`` over all channels for a fixed ``px``.

    The product of per-row simplex grids is enumerated exhaustively, halving
    the grid step until the best value improves by less than ``tol``. Once a
    full product grid would exceed ``max_points`` the refinement continues as
    row-by-row sweeps over the finer grid. Returns ``(value, table)``.
    """
    px = _vec(px)
    nx, ny = px.size, int(y_alphabet_size)
    if nx > CAPACITY_MAX_SIZE or ny > CAPACITY_MAX_SIZE:
        raise ValueError(f"capacity_oracle is capped at alphabet size {CAPACITY_MAX_SIZE}")
    if ny < 1:
        raise ValueError("output alphabet must be non-empty")
    if ny == 1:
        return 0.0, ConditionalTable(np.ones((nx, 1)))

    best_val, best = -np.inf, None
    m = 1
    while True:
        grid = _simplex_grid(ny, m)
        if grid.shape[0] ** nx > max_points:
            break
        val, tab = _exhaustive(px, grid)
        improvement = val - best_val
        if val > best_val:
            best_val, best = val, tab
        if improvement < tol:
            break
        m *= 2

    # row-wise sweeps on successively finer grids
    while True:
        m *= 2
        if _grid_size(ny, m) > max_points // 4:
            break
        grid = _simplex_grid(ny, m)
        start = best_val
        for _ in range(20):
            changed = False
            for x in range(nx):
                cand = np.repeat(best[None], grid.shape[0], axis=0)
                cand[:, x, :] = grid
                vals = _batch_mi(px, cand)
                j = int(np.argmax(vals))
                if vals[j] > best_val + 1e-15:
                    best_val, best, changed = float(vals[j]), cand[j].copy(), True
            if not changed:
                break
        if best_val - start < tol:
            break
    return float(best_val), ConditionalTable(best)


def _exhaustive(px, grid):
    nx = px.size
    n = grid.shape[0]
    best_val, best = -np.inf, None
    idx = np.array(list(itertools.product(range(n), repeat=nx)), dtype=int)
    for chunk in np.array_split(idx, max(1, idx.shape[0] // 20_000)):
        tables = grid[chunk]
        vals = _batch_mi(px, tables)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best = float(vals[j]), tables[j].copy()
    return best_val, best


def _grid_size(k: int, m: int) -> int:
    from math import comb
    return comb(m + k - 1, k - 1)


def joint_table(px, pyx) -> np.ndarray:
    """``p(x, y)`` as an ``(nx, ny)`` array."""
    return _vec(px)[:, None] * _table(pyx)


def mi_from_joint(pxy) -> float:
    """MI of a joint table (rows x, columns y); plug-in when fed counts."""
    j = np.asarray(pxy, dtype=float)
    total = j.sum()
    if total <= 0:
        return 0.0
    j = j / total
    px, py = j.sum(axis=1), j.sum(axis=0)
    return max(entropy(px) + entropy(py) - entropy(j.reshape(-1)), 0.0)
