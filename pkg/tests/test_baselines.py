"""Tests for MPR selection, game-based tree construction, and the oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtbsim.baselines import (
    BroadcastTree,
    TreeConstructionError,
    best_response_stable,
    dump_tree_csv,
    gbbtc_construct,
    hop_counts,
    mpr_select,
    optimal_tree_oracle,
)
from rtbsim.topology import Topology, two_hop_sets


def graph(neighbors):
    """Topology from an explicit adjacency list (positions are irrelevant)."""
    nbrs = tuple(tuple(sorted(x)) for x in neighbors)
    n = len(nbrs)
    return Topology(
        positions=np.zeros((n, 2)),
        side=float(n),
        radius=1.0,
        neighbors=nbrs,
        two_hop=two_hop_sets(nbrs),
    )


def random_connected_graph(rng, n):
    """Random spanning tree plus random extra edges: always connected."""
    adj = [set() for _ in range(n)]
    for v in range(1, n):
        p = int(rng.integers(0, v))
        adj[v].add(p)
        adj[p].add(v)
    for _ in range(int(rng.integers(0, n))):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            adj[int(a)].add(int(b))
            adj[int(b)].add(int(a))
    return graph(adj)


def uniform_links(topology, rng, low=0.3, high=1.0):
    out = {}
    for i, nbrs in enumerate(topology.neighbors):
        for j in nbrs:
            out[(i, j)] = float(rng.uniform(low, high))
    return out


class TestMprSelect:
    def test_star_center_needs_no_relays(self):
        topo = graph([(1, 2, 3), (0,), (0,), (0,)])
        assert mpr_select(topo, 0) == ()

    def test_path_unique_coverer_is_mandatory(self):
        topo = graph([(1,), (0, 2), (1,)])
        assert mpr_select(topo, 0) == (1,)

    def test_mandatory_then_greedy(self):
        # two-hop targets of 0 are {3, 4, 5}; 5 forces relay 2 (unique
        # coverer), the leftover target 4 is then picked up greedily via 1
        topo = graph([(1, 2), (0, 3, 4), (0, 3, 5), (1, 2), (1,), (2,)])
        assert mpr_select(topo, 0) == (1, 2)

    def test_greedy_tie_breaks_low_index(self):
        # both neighbors cover both targets; greedy takes the lower index
        topo = graph([(1, 2), (0, 3, 4), (0, 3, 4), (1, 2), (1, 2)])
        assert mpr_select(topo, 0) == (1,)

    def test_redundant_neighbor_not_selected(self):
        # neighbor 1 covers everything; neighbor 2 adds nothing
        topo = graph([(1, 2), (0, 3, 4), (0, 3), (1, 2), (1,)])
        assert mpr_select(topo, 0) == (1,)

    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n=st.integers(min_value=3, max_value=12),
    )
    @settings(max_examples=1000, deadline=None)
    def test_two_hop_coverage_property(self, seed, n):
        rng = np.random.default_rng(seed)
        topo = random_connected_graph(rng, n)
        sender = int(rng.integers(0, n))
        relays = mpr_select(topo, sender)
        covered = set()
        for r in relays:
            assert r in topo.neighbors[sender]
            covered.update(topo.neighbors[r])
        assert covered >= set(topo.two_hop[sender])


class TestHopCounts:
    def test_path(self):
        topo = graph([(1,), (0, 2), (1,)])
        assert hop_counts(topo, 0) == [0, 1, 2]

    def test_unreachable_marked(self):
        topo = graph([(1,), (0,), (3,), (2,)])
        assert hop_counts(topo, 0) == [0, 1, -1, -1]


class TestGbbtc:
    def test_path_tree(self):
        topo = graph([(1,), (0, 2), (1,)])
        ls = {(0, 1): 0.5, (1, 0): 0.5, (1, 2): 0.5, (2, 1): 0.5}
        tree = gbbtc_construct(topo, ls)
        assert tree.parent == (None, 0, 1)
        assert tree.internal == {0, 1}
        assert tree.expected_transmissions(ls) == pytest.approx(4.0)

    def test_diamond_picks_better_link(self):
        topo = graph([(1, 2), (0, 3), (0, 3), (1, 2)])
        ls = {
            (0, 1): 1.0, (1, 0): 1.0, (0, 2): 1.0, (2, 0): 1.0,
            (1, 3): 0.4, (3, 1): 0.4, (2, 3): 0.5, (3, 2): 0.5,
        }
        tree = gbbtc_construct(topo, ls)
        assert tree.parent[3] == 2
        assert tree.internal == {0, 2}
        assert tree.expected_transmissions(ls) == pytest.approx(3.0)

    def test_cost_sharing_attracts_siblings(self):
        # node 3's own best link is to 2, but sharing node 4's parent 1
        # halves the shared component and beats the lone better link
        topo = graph([(1, 2), (0, 3, 4), (0, 3), (1, 2), (1,)])
        ls = {
            (0, 1): 1.0, (1, 0): 1.0, (0, 2): 1.0, (2, 0): 1.0,
            (1, 3): 0.5, (3, 1): 0.5, (1, 4): 0.5, (4, 1): 0.5,
            (2, 3): 0.6, (3, 2): 0.6,
        }
        tree = gbbtc_construct(topo, ls)
        assert tree.parent[3] == 1
        assert tree.parent[4] == 1
        assert tree.internal == {0, 1}
        assert best_response_stable(topo, tree, ls)

    def test_result_is_best_response_stable(self):
        rng = np.random.default_rng(5)
        topo = random_connected_graph(rng, 8)
        ls = uniform_links(topo, rng)
        tree = gbbtc_construct(topo, ls)
        assert best_response_stable(topo, tree, ls)

    def test_disconnected_raises(self):
        topo = graph([(1,), (0,), (3,), (2,)])
        ls = {(0, 1): 0.5, (1, 0): 0.5, (2, 3): 0.5, (3, 2): 0.5}
        with pytest.raises(TreeConstructionError):
            gbbtc_construct(topo, ls)

    def test_zero_success_candidate_raises(self):
        topo = graph([(1,), (0, 2), (1,)])
        ls = {(0, 1): 0.0, (1, 0): 0.0, (1, 2): 0.5, (2, 1): 0.5}
        with pytest.raises(TreeConstructionError):
            gbbtc_construct(topo, ls)

    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n=st.integers(min_value=2, max_value=8),
    )
    @settings(max_examples=1000, deadline=None)
    def test_stability_property(self, seed, n):
        rng = np.random.default_rng(seed)
        topo = random_connected_graph(rng, n)
        ls = uniform_links(topo, rng, low=0.1)
        tree = gbbtc_construct(topo, ls)
        # spanning arborescence: every non-source node has a closer parent
        dist = hop_counts(topo, 0)
        for v in range(n):
            if v == 0:
                assert tree.parent[v] is None
            else:
                p = tree.parent[v]
                assert p in topo.neighbors[v]
                assert dist[p] == dist[v] - 1
        assert best_response_stable(topo, tree, ls)


class TestOracle:
    def test_two_nodes_half_link(self):
        topo = graph([(1,), (0,)])
        cost, tree = optimal_tree_oracle(topo, {(0, 1): 0.5, (1, 0): 0.5})
        assert cost == pytest.approx(2.0)
        assert tree.parent == (None, 0)

    def test_triangle_perfect_links_single_broadcast(self):
        topo = graph([(1, 2), (0, 2), (0, 1)])
        ls = {(i, j): 1.0 for i in range(3) for j in range(3) if i != j}
        cost, tree = optimal_tree_oracle(topo, ls)
        assert cost == pytest.approx(1.0)
        assert tree.internal == {0}

    def test_prefers_relay_over_weak_direct_link(self):
        # direct 0->2 link is weak; relaying through 1 costs 2 < 10
        topo = graph([(1, 2), (0, 2), (0, 1)])
        ls = {
            (0, 1): 1.0, (1, 0): 1.0, (0, 2): 0.1, (2, 0): 0.1,
            (1, 2): 1.0, (2, 1): 1.0,
        }
        cost, tree = optimal_tree_oracle(topo, ls)
        assert cost == pytest.approx(2.0)
        assert tree.parent == (None, 0, 1)

    def test_too_many_nodes_rejected(self):
        topo = graph([tuple(j for j in range(9) if j != i) for i in range(9)])
        with pytest.raises(ValueError):
            optimal_tree_oracle(topo, {})

    def test_no_spanning_tree_raises(self):
        topo = graph([(1,), (0,), (3,), (2,)])
        with pytest.raises(ValueError):
            optimal_tree_oracle(topo, {(0, 1): 0.5, (1, 0): 0.5,
                                       (2, 3): 0.5, (3, 2): 0.5})

    def test_never_above_gbbtc(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = int(rng.integers(3, 7))
            topo = random_connected_graph(rng, n)
            ls = uniform_links(topo, rng)
            oracle_cost, _ = optimal_tree_oracle(topo, ls)
            gb = gbbtc_construct(topo, ls)
            assert oracle_cost <= gb.expected_transmissions(ls) + 1e-9


class TestTreeCsv:
    def test_format(self):
        tree = BroadcastTree(source=0, parent=(None, 0, 1), internal=frozenset({0, 1}))
        text = dump_tree_csv(tree)
        assert text == "node,parent,internal_flag\n0,,1\n1,0,1\n2,1,0\n"
