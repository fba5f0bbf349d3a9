"""Pairwise layer criticality and per-layer network torque.

A composite-connected unordered pair {i, j} is critical for layer L when
its shortest distance strictly increases (possibly to INFINITE) once L's
support is removed from every dyad. Torque t_L is the critical-pair count
over the composite-connected pair count; disconnected pairs sit outside
both sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import DisconnectedPairError, UndefinedStatisticError
from .graph import MultiplexNetwork, SimpleGraph

# Sentinel strictly greater than any finite hop count at village scale.
INFINITE = np.uint16(65535)


def all_pairs_distances(g: SimpleGraph) -> np.ndarray:
    """Exact unweighted geodesic distances; unreachable pairs get INFINITE.

    Returned as uint16: distances are < n <= a few thousand here, and the
    compact dtype keeps the per-layer matrices cheap.
    """
    n = g.n
    if n == 0:
        return np.zeros((0, 0), dtype=np.uint16)
    if not g.edges:
        d = np.full((n, n), INFINITE, dtype=np.uint16)
        np.fill_diagonal(d, 0)
        return d
    rows = np.fromiter((u for u, _ in g.edges), dtype=np.int32, count=len(g.edges))
    cols = np.fromiter((v for _, v in g.edges), dtype=np.int32, count=len(g.edges))
    data = np.ones(len(g.edges), dtype=np.int8)
    adj = csr_matrix((data, (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", directed=False, unweighted=True)
    out = np.full((n, n), INFINITE, dtype=np.uint16)
    finite = np.isfinite(dist)
    out[finite] = dist[finite].astype(np.uint16)
    return out


@dataclass(frozen=True)
class TorqueReport:
    """Per-layer torque for one village, sharing one composite denominator."""

    layers: tuple[str, ...]
    torque: tuple[float, ...]
    critical_pairs: tuple[int, ...]
    connected_pairs: int

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.layers, self.torque))


def criticality(net: MultiplexNetwork, layer: int, i: int, j: int,
                base: np.ndarray | None = None,
                removed: np.ndarray | None = None) -> int:
    """1 iff removing the layer strictly lengthens the i-j geodesic.

    Optional precomputed distance matrices avoid repeated sweeps when many
    pairs of the same village are queried.
    """
    if i == j:
        raise DisconnectedPairError("criticality needs two distinct nodes")
    if base is None:
        base = all_pairs_distances(net.composite())
    if base[i, j] == INFINITE:
        raise DisconnectedPairError(
            f"nodes {i} and {j} are not composite-connected; pair excluded from torque")
    if removed is None:
        removed = all_pairs_distances(net.composite_minus_layer(layer))
    return int(removed[i, j] > base[i, j])


def network_torque(net: MultiplexNetwork, layer: int,
                   base: np.ndarray | None = None) -> float:
    """Fraction of composite-connected unordered pairs critical for the layer."""
    if base is None:
        base = all_pairs_distances(net.composite())
    critical, connected = _layer_counts(net, layer, base)
    if connected == 0:
        raise UndefinedStatisticError("torque undefined: no composite-connected pairs")
    return critical / connected


def torque_all_layers(net: MultiplexNetwork) -> TorqueReport:
    """One torque per registered layer, one composite sweep shared by all."""
    base = all_pairs_distances(net.composite())
    iu = np.triu_indices(net.n, k=1)
    connected = int(np.count_nonzero(base[iu] != INFINITE))
    if connected == 0:
        raise UndefinedStatisticError("torque undefined: no composite-connected pairs")
    crit = []
    tq = []
    for layer in range(len(net.registry)):
        c, _ = _layer_counts(net, layer, base, iu=iu)
        crit.append(c)
        tq.append(c / connected)
    return TorqueReport(
        layers=net.registry.names,
        torque=tuple(tq),
        critical_pairs=tuple(crit),
        connected_pairs=connected,
    )


def _layer_counts(net: MultiplexNetwork, layer: int, base: np.ndarray,
                  iu=None) -> tuple[int, int]:
    """(critical pairs, composite-connected pairs) for one layer."""
    if iu is None:
        iu = np.triu_indices(net.n, k=1)
    removed = all_pairs_distances(net.composite_minus_layer(layer))
    b = base[iu]
    connected = b != INFINITE
    critical = int(np.count_nonzero(connected & (removed[iu] > b)))
    return critical, int(np.count_nonzero(connected))
