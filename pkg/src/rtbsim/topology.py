"""Random node placement and neighborhood structure on a unit-disk graph."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np


class TopologyGenerationError(RuntimeError):
    """Connectivity could not be achieved within the retry budget."""


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray  # (n, 2) meters
    side: float  # square side, meters
    radius: float  # communication radius, meters
    neighbors: tuple[tuple[int, ...], ...]
    two_hop: tuple[tuple[int, ...], ...]

    @property
    def num_nodes(self) -> int:
        return len(self.neighbors)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])


def _neighbor_lists(positions: np.ndarray, radius: float) -> tuple[tuple[int, ...], ...]:
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    # ties at exactly the radius count as neighbors
    adj = dist <= radius
    np.fill_diagonal(adj, False)
    return tuple(tuple(np.flatnonzero(row)) for row in adj)


def two_hop_sets(neighbors: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...]:
    """Nodes reachable in exactly two hops, excluding self and one-hop."""
    out = []
    for i, nbrs in enumerate(neighbors):
        reach: set[int] = set()
        for j in nbrs:
            reach.update(neighbors[j])
        reach.discard(i)
        reach.difference_update(nbrs)
        out.append(tuple(sorted(reach)))
    return tuple(out)


def _is_connected(neighbors: tuple[tuple[int, ...], ...]) -> bool:
    n = len(neighbors)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in neighbors[i]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def build_topology(positions: np.ndarray, side: float, radius: float) -> Topology:
    nbrs = _neighbor_lists(np.asarray(positions, dtype=float), radius)
    return Topology(
        positions=np.asarray(positions, dtype=float),
        side=side,
        radius=radius,
        neighbors=nbrs,
        two_hop=two_hop_sets(nbrs),
    )


def generate_topology(
    n: int,
    density: float,
    radius: float,
    rng: np.random.Generator,
    require_connected: bool = True,
    max_retries: int = 1000,
) -> Topology:
    """Uniform placement of n nodes at `density` nodes per square km.

    The square side is sqrt(n / density) km; connectivity of the unit-disk
    graph is rejection-sampled when requested.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if density <= 0 or radius <= 0:
        raise ValueError("density and radius must be positive")
    side = math.sqrt(n / density) * 1000.0
    for _ in range(max_retries):
        positions = rng.random((n, 2)) * side
        topo = build_topology(positions, side, radius)
        if not require_connected or _is_connected(topo.neighbors):
            return topo
    raise TopologyGenerationError(
        f"no connected placement of {n} nodes found in {max_retries} tries"
    )


def player_ensemble(topology: Topology, i: int) -> tuple[int, ...]:
    """The node itself plus every node whose neighborhood overlaps its own."""
    own = set(topology.neighbors[i])
    members = {i}
    for other in range(topology.num_nodes):
        if other != i and own.intersection(topology.neighbors[other]):
            members.add(other)
    return tuple(sorted(members))


def dump_topology_csv(topology: Topology) -> str:
    """Positions plus a header line with side and radius, for reproduction."""
    buf = io.StringIO()
    buf.write(
        f"# side_m={float(topology.side)!r} radius_m={float(topology.radius)!r}\n"
    )
    buf.write("node,x_m,y_m\n")
    for i, (x, y) in enumerate(topology.positions):
        buf.write(f"{i},{float(x)!r},{float(y)!r}\n")
    return buf.getvalue()


def load_topology_csv(text: str) -> Topology:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0]
    if not header.startswith("#"):
        raise ValueError("missing '# side_m=... radius_m=...' header line")
    fields = dict(part.split("=", 1) for part in header[1:].split())
    side = float(fields["side_m"])
    radius = float(fields["radius_m"])
    rows = []
    for ln in lines[2:]:
        _, x, y = ln.split(",")
        rows.append((float(x), float(y)))
    return build_topology(np.array(rows), side, radius)
