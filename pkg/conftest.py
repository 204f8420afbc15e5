"""Shared flow factories for the test modules."""

import math

import numpy as np
import pytest
from hypothesis import strategies as st

from irrigation.measure_core import PolygonalFlow

TAU_STAR = 1.0 / math.sqrt(math.sqrt(2.0) - 1.0)
I_STAR = 2.0 * math.sqrt(math.sqrt(2.0) - 1.0)


def v_flow(tau: float = 1.0, T: float = 2.0, d: float = 1.0, eps: float = 0.0,
           merge_x=(0.0, 0.0)) -> PolygonalFlow:
    """Two leaves (±d, 0) of mass 1/2 merging at time tau, static root at the origin."""
    nodes = [(0, (-d, 0.0), 0.0), (1, (d, 0.0), 0.0), (2, merge_x, tau), (3, (0.0, 0.0), T)]
    edges = [(0, 2, 0.5), (1, 2, 0.5), (2, 3, 1.0)]
    return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=True)


def static_atom(T: float = 1.0, mass: float = 1.0, eps: float = 0.0) -> PolygonalFlow:
    return PolygonalFlow.from_records([(0, (0.0, 0.0), 0.0), (1, (0.0, 0.0), T)],
                                      [(0, 1, mass)], eps=eps, rooted=True)


def square_four_leaf(T: float = 2.0, eps: float = 0.0, tau1: float = 0.6,
                     tau2: float = 1.2) -> PolygonalFlow:
    """Leaves at the corners of [-1, 1]², pairwise merges then a final merge."""
    nodes = [(0, (-1.0, -1.0), 0.0), (1, (-1.0, 1.0), 0.0),
             (2, (1.0, -1.0), 0.0), (3, (1.0, 1.0), 0.0),
             (4, (-0.5, 0.0), tau1), (5, (0.5, 0.0), tau1),
             (6, (0.0, 0.0), tau2), (7, (0.0, 0.0), T)]
    edges = [(0, 4, 0.25), (1, 4, 0.25), (2, 5, 0.25), (3, 5, 0.25),
             (4, 6, 0.5), (5, 6, 0.5), (6, 7, 1.0)]
    return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=True)


def random_in_tree(seed: int, n_leaves: int = 6, T: float = 1.0, eps: float = 0.0,
                   spread: float = 1.0, mass: float = 1.0) -> PolygonalFlow:
    """
    Random rooted in-tree: random groups of two or three clusters merge at
    increasing times until one remains, which travels to a root at time T.
    """
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.5, 1.5, n_leaves)
    weights *= mass / weights.sum()
    nodes = [(k, tuple(rng.uniform(-spread, spread, 2)), 0.0) for k in range(n_leaves)]
    clusters = [(k, weights[k]) for k in range(n_leaves)]
    edges = []
    next_id = n_leaves
    t = 0.0
    while len(clusters) > 1:
        t += rng.uniform(0.3, 1.0) * T / (n_leaves + 1)
        size = min(len(clusters), int(rng.integers(2, 4)))
        picks = sorted(rng.choice(len(clusters), size=size, replace=False), reverse=True)
        merged = [clusters.pop(p) for p in picks]
        node = next_id
        next_id += 1
        nodes.append((node, tuple(rng.uniform(-spread, spread, 2)), t))
        edges += [(child, node, w) for child, w in merged]
        clusters.append((node, sum(w for _, w in merged)))
    root = next_id
    nodes.append((root, tuple(rng.uniform(-spread, spread, 2)), T))
    edges.append((clusters[0][0], root, clusters[0][1]))
    return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=True)


flow_seeds = st.integers(min_value=0, max_value=2 ** 31 - 1)
leaf_counts = st.integers(min_value=1, max_value=12)


@pytest.fixture
def vflow():
    return v_flow()


@pytest.fixture
def four_leaf():
    return square_four_leaf()


@pytest.fixture
def random_flows():
    return [random_in_tree(seed, n_leaves=3 + seed % 6) for seed in range(5)]
