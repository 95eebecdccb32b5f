import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infomax.checks import mi_variation_fd, random_channel, random_perturbation
from infomax.prob_core import (ConditionalTable, FiniteDistribution, TablePerturbation,
                               capacity_oracle, conditional_entropy, entropy, joint_table,
                               marginal, mi_from_joint, mi_variation, mutual_information)


def h2(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def test_entropy_values():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy([0.25, 0.75]) == pytest.approx(0.5623351446188083, abs=1e-15)
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy(np.full(6, 1 / 6)) == pytest.approx(math.log(6), abs=1e-14)


def test_mi_of_known_channels():
    px = [0.5, 0.5]
    assert mutual_information(px, np.eye(2)) == pytest.approx(math.log(2), abs=1e-15)
    bsc = [[0.9, 0.1], [0.1, 0.9]]
    assert mutual_information(px, bsc) == pytest.approx(math.log(2) - h2(0.1), abs=1e-15)
    assert mutual_information(px, bsc) == pytest.approx(0.3680642071684971, abs=1e-15)
    # output independent of input
    assert mutual_information([0.2, 0.3, 0.5], [[0.4, 0.6]] * 3) == pytest.approx(0.0, abs=1e-15)


def test_mi_is_entropy_difference():
    rng = np.random.default_rng(0)
    px = rng.dirichlet(np.ones(4))
    pyx = random_channel(rng, 4, 3)
    py = marginal(px, pyx)
    np.testing.assert_allclose(py, px @ pyx, atol=1e-15)
    assert mutual_information(px, pyx) == pytest.approx(entropy(py) - conditional_entropy(px, pyx))


def test_mi_from_joint_matches_channel_form():
    rng = np.random.default_rng(1)
    px = rng.dirichlet(np.ones(3))
    pyx = random_channel(rng, 3, 4)
    assert mi_from_joint(joint_table(px, pyx)) == pytest.approx(mutual_information(px, pyx),
                                                                abs=1e-14)
    # counts are normalized internally
    assert mi_from_joint(1000 * joint_table(px, pyx)) == pytest.approx(
        mutual_information(px, pyx), abs=1e-14)
    assert mi_from_joint(np.zeros((2, 2))) == 0.0


def test_variation_matches_finite_differences():
    ok, detail = mi_variation_fd(instances=100, seed=11)
    assert ok, detail


def test_variation_is_linear():
    rng = np.random.default_rng(2)
    px = rng.dirichlet(np.ones(3))
    pyx = random_channel(rng, 3, 3)
    a, b = random_perturbation(rng, 3, 3), random_perturbation(rng, 3, 3)
    lhs = mi_variation(px, pyx, 2 * a - 3 * b)
    rhs = 2 * mi_variation(px, pyx, a) - 3 * mi_variation(px, pyx, b)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_variation_rejects_zero_marginal_output():
    px = [0.5, 0.5]
    pyx = [[1.0, 0.0], [1.0, 0.0]]
    with pytest.raises(ValueError):
        mi_variation(px, pyx, [[-0.1, 0.1], [0.0, 0.0]])
    with pytest.raises(ValueError):
        mi_variation(px, pyx, np.zeros((3, 2)))


def test_validation_errors():
    with pytest.raises(ValueError):
        FiniteDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteDistribution([1.5, -0.5])
    with pytest.raises(ValueError):
        ConditionalTable([[0.5, 0.4]])
    with pytest.raises(ValueError):
        TablePerturbation([[0.1, 0.1]])
    with pytest.raises(ValueError):
        marginal([0.5, 0.5], np.eye(3))
    d = FiniteDistribution([0.25, 0.75])
    with pytest.raises(ValueError):
        d.probs[0] = 1.0


# -- properties ---------------------------------------------------------------

@st.composite
def channels(draw, max_size=4):
    nx = draw(st.integers(1, max_size))
    ny = draw(st.integers(1, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(nx))
    alpha = draw(st.sampled_from([0.1, 1.0, 10.0]))
    pyx = rng.dirichlet(np.full(ny, alpha), size=nx)
    return px, pyx, rng


@settings(max_examples=200, deadline=None)
@given(channels())
def test_mi_bounds(ch):
    px, pyx, _ = ch
    mi = mutual_information(px, pyx)
    assert mi >= -1e-12
    assert mi <= min(entropy(px), math.log(pyx.shape[1])) + 1e-9


@settings(max_examples=200, deadline=None)
@given(channels())
def test_mi_invariant_under_relabeling(ch):
    px, pyx, rng = ch
    ix = rng.permutation(px.size)
    iy = rng.permutation(pyx.shape[1])
    assert mutual_information(px[ix], pyx[ix][:, iy]) == pytest.approx(
        mutual_information(px, pyx), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(channels(), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_data_processing_inequality(ch, nz, seed):
    px, pyx, _ = ch
    pzy = np.random.default_rng(seed).dirichlet(np.ones(nz), size=pyx.shape[1])
    assert mutual_information(px, pyx @ pzy) <= mutual_information(px, pyx) + 1e-12


# -- capacity oracle ------------------------------------------------------------

def deterministic_best(px, ny):
    """Best MI over deterministic channels: MI is convex in the channel, so a vertex wins."""
    nx = len(px)
    best = 0.0
    for f in itertools.product(range(ny), repeat=nx):
        best = max(best, mutual_information(px, np.eye(ny)[list(f)]))
    return best


@pytest.mark.parametrize("px,ny", [
    ([0.5, 0.5], 2),
    ([0.2, 0.3, 0.5], 2),
    ([1 / 3] * 3, 3),
    ([0.1, 0.2, 0.3, 0.4], 3),
    ([0.25] * 4, 4),
])
def test_capacity_matches_vertex_search(px, ny):
    value, table = capacity_oracle(px, ny)
    assert value == pytest.approx(deterministic_best(px, ny), abs=1e-3)
    assert mutual_information(px, table) == pytest.approx(value, abs=1e-12)


def test_capacity_dominates_random_search():
    rng = np.random.default_rng(3)
    px = np.array([0.2, 0.3, 0.5])
    value, _ = capacity_oracle(px, 3)
    tables = rng.dirichlet(np.full(3, 0.3), size=(20000, 3))
    best = max(mutual_information(px, t) for t in tables)
    assert best <= value + 1e-12


def test_capacity_known_values():
    assert capacity_oracle([0.5, 0.5], 2)[0] == pytest.approx(math.log(2), abs=1e-12)
    assert capacity_oracle([1 / 6] * 6, 6)[0] == pytest.approx(math.log(6), abs=1e-12)
    assert capacity_oracle([0.3, 0.7], 1)[0] == 0.0
    with pytest.raises(ValueError):
        capacity_oracle(np.full(7, 1 / 7), 2)
