"""Structural statistics against brute-force recomputation."""

import math
from fractions import Fraction

import numpy as np
import pytest

import oracles
from helpers import network_from_triples, random_triples
from torquenet import (SimpleGraph, UndefinedStatisticError, clustering,
                       edge_betweenness, layer_mean_betweenness, layer_stats,
                       monoplexity, prevalence, reachability, transitivity)


def _ring(n):
    return SimpleGraph(n, [(i, (i + 1) % n) for i in range(n)])


def test_triangle_is_fully_clustered():
    k3 = SimpleGraph(3, [(0, 1), (1, 2), (0, 2)])
    assert clustering(k3) == 1.0
    assert transitivity(k3) == 1.0


def test_star_has_zero_clustering():
    star = SimpleGraph(4, [(0, 1), (0, 2), (0, 3)])
    assert clustering(star) == 0.0
    assert transitivity(star) == 0.0


def test_low_degree_handling():
    # triangle plus a pendant: the pendant contributes 0 unless skipped
    g = SimpleGraph(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    base = (1.0 + 1.0 + 1.0 / 3.0) / 4.0
    skipped = (1.0 + 1.0 + 1.0 / 3.0) / 3.0
    assert math.isclose(clustering(g), base)
    assert math.isclose(clustering(g, skip_low_degree=True), skipped)


def test_clustering_and_transitivity_match_census():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(2, 11))
        triples = random_triples(rng, n, 1)
        edges = {(min(e, a), max(e, a)) for e, a, _ in triples}
        g = SimpleGraph(n, edges)
        assert math.isclose(clustering(g),
                            oracles.clustering_by_census(n, edges))
        assert math.isclose(clustering(g, skip_low_degree=True),
                            oracles.clustering_by_census(n, edges, True))
        assert math.isclose(transitivity(g),
                            oracles.transitivity_by_census(n, edges))


def test_reachability_two_components():
    g = SimpleGraph(5, [(0, 1), (1, 2), (3, 4)])
    assert reachability(g) == 0.4


def test_reachability_matches_bfs_counts():
    rng = np.random.default_rng(12)
    for _ in range(25):
        n = int(rng.integers(2, 11))
        triples = random_triples(rng, n, 1, density=0.15)
        edges = {(min(e, a), max(e, a)) for e, a, _ in triples}
        g = SimpleGraph(n, edges)
        assert math.isclose(reachability(g),
                            oracles.reachability_by_bfs(n, edges))


def test_reachability_needs_two_nodes():
    with pytest.raises(UndefinedStatisticError):
        reachability(SimpleGraph(1, []))


def test_prevalence_sums_to_one():
    rng = np.random.default_rng(13)
    triples = random_triples(rng, 8, 3, density=0.2)
    net = network_from_triples(triples, 8, 3)
    shares = [prevalence(net, l) for l in range(3)]
    assert math.isclose(sum(shares), 1.0)
    counts = [0, 0, 0]
    for _, _, layer in set(triples):
        counts[layer] += 1
    for l in range(3):
        assert math.isclose(shares[l], counts[l] / len(set(triples)))


def test_prevalence_undefined_on_empty_network():
    net = network_from_triples([], 3, 2)
    with pytest.raises(UndefinedStatisticError):
        prevalence(net, 0)


def test_monoplexity_counts_single_support():
    net = network_from_triples(
        [(0, 1, 0), (1, 2, 0), (0, 1, 1)], 3, 2)
    assert monoplexity(net, 0) == 0.5
    assert monoplexity(net, 1) == 0.0
    empty = network_from_triples([(0, 1, 0)], 2, 2)
    with pytest.raises(UndefinedStatisticError):
        monoplexity(empty, 1)


def test_path_graph_edge_betweenness():
    p4 = SimpleGraph(4, [(0, 1), (1, 2), (2, 3)])
    scores = edge_betweenness(p4)
    assert scores == {(0, 1): 3.0, (1, 2): 4.0, (2, 3): 3.0}


def test_betweenness_matches_geodesic_enumeration():
    rng = np.random.default_rng(14)
    for _ in range(25):
        n = int(rng.integers(2, 10))
        triples = random_triples(rng, n, 1)
        edges = sorted({(min(e, a), max(e, a)) for e, a, _ in triples})
        want = oracles.betweenness_by_enumeration(n, edges)
        got = edge_betweenness(SimpleGraph(n, edges), exact=True)
        assert got == want


def test_betweenness_pair_sum_identity():
    # total edge score equals the sum of pairwise distances, exactly
    rng = np.random.default_rng(15)
    for _ in range(25):
        n = int(rng.integers(2, 11))
        triples = random_triples(rng, n, 1)
        edges = sorted({(min(e, a), max(e, a)) for e, a, _ in triples})
        scores = edge_betweenness(SimpleGraph(n, edges), exact=True)
        dist = oracles.all_pairs_by_bfs(n, edges)
        want = sum(Fraction(int(dist[i][j]))
                   for i in range(n) for j in range(i + 1, n)
                   if dist[i][j] < oracles.INF)
        assert sum(scores.values(), Fraction(0)) == want


def test_layer_mean_betweenness_uses_composite_scores():
    net = network_from_triples(
        [(0, 1, 0), (1, 2, 0), (2, 3, 1)], 4, 2)
    scores = edge_betweenness(net.composite())
    want = (scores[(0, 1)] + scores[(1, 2)]) / 2.0
    assert math.isclose(layer_mean_betweenness(net, 0), want)
    assert math.isclose(layer_mean_betweenness(net, 0, scores), want)


def test_layer_stats_bundles_and_nan_fallbacks():
    net = network_from_triples([(0, 1, 0), (1, 2, 0)], 3, 2)
    st = layer_stats(net, 0)
    assert st.layer == "L0"
    assert st.prevalence == 1.0
    assert st.monoplexity == 1.0
    assert st.dyads == 2
    assert st.nominations == 2
    empty = layer_stats(net, 1)
    assert math.isnan(empty.monoplexity)
    assert math.isnan(empty.mean_edge_betweenness)
    assert empty.prevalence == 0.0
    assert empty.dyads == 0
