"""Comparison forwarding schemes: MPR relay selection, the game-based
broadcast tree, and an exhaustive minimum-expected-transmission tree oracle
for small instances.  Flooding needs no construction step; the simulator
simply forces the forward action."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Optional, Sequence

from .channel import expected_retransmissions
from .topology import Topology


class TreeConstructionError(RuntimeError):
    """Best-response parent selection failed to reach a fixed point."""


@dataclass(frozen=True)
class BroadcastTree:
    """Spanning tree rooted at the source; internal nodes do the forwarding."""

    source: int
    parent: tuple[Optional[int], ...]
    internal: frozenset[int]

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(v for v, p in enumerate(self.parent) if p == i)

    def expected_transmissions(
        self, link_success: Mapping[tuple[int, int], float]
    ) -> float:
        """Total expected attempt count: each internal node pays for covering
        its own children simultaneously."""
        total = 0.0
        for i in self.internal:
            probs = [link_success[(i, v)] for v in self.children(i)]
            total += expected_retransmissions(probs)
        return total


def mpr_select(topology: Topology, sender: int) -> tuple[int, ...]:
    """Greedy multipoint relay set of a sender.

    Mandatory relays (unique coverers of some two-hop node) first, then the
    neighbor covering the most uncovered two-hop nodes, ties broken by
    lowest index.
    """
    one_hop = topology.neighbors[sender]
    uncovered = set(topology.two_hop[sender])
    if not uncovered:
        return ()
    cover = {j: set(topology.neighbors[j]) & uncovered for j in one_hop}
    selected: list[int] = []
    for target in sorted(uncovered):
        coverers = [j for j in one_hop if target in cover[j]]
        if not coverers:
            raise ValueError(
                f"two-hop node {target} of {sender} has no one-hop coverer"
            )
        if len(coverers) == 1 and coverers[0] not in selected:
            selected.append(coverers[0])
    for j in selected:
        uncovered -= cover[j]
    while uncovered:
        best = max(sorted(cover), key=lambda j: len(cover[j] & uncovered))
        if not cover[best] & uncovered:
            raise ValueError(f"two-hop nodes {uncovered} of {sender} uncoverable")
        selected.append(best)
        uncovered -= cover[best]
    return tuple(sorted(selected))


def hop_counts(topology: Topology, source: int) -> list[int]:
    """BFS hop distance from the source (unreached nodes get -1)."""
    dist = [-1] * topology.num_nodes
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for i in frontier:
            for j in topology.neighbors[i]:
                if dist[j] < 0:
                    dist[j] = dist[i] + 1
                    nxt.append(j)
        frontier = nxt
    return dist


def gbbtc_construct(
    topology: Topology,
    link_success: Mapping[tuple[int, int], float],
    source: int = 0,
    max_rounds: int = 1000,
) -> BroadcastTree:
    """Round-robin best-response parent selection with even cost sharing.

    A node may only pick a parent strictly closer to the source in hop
    count, which keeps the parent map a tree.  A node's cost for parent p is
    link_cost(p->v) / (children currently at p, counting itself) plus
    link_cost(p->v), with link cost the expected transmissions 1/p_succ.
    """
    n = topology.num_nodes
    dist = hop_counts(topology, source)
    if any(d < 0 for d in dist):
        raise TreeConstructionError("topology is not connected from the source")

    def link_cost(p: int, v: int) -> float:
        success = link_success[(p, v)]
        if success <= 0.0:
            raise TreeConstructionError(f"link {p}->{v} has zero success probability")
        return 1.0 / success

    candidates: dict[int, list[int]] = {}
    parent: list[Optional[int]] = [None] * n
    child_count = [0] * n
    for v in range(n):
        if v == source:
            continue
        cands = [p for p in topology.neighbors[v] if dist[p] == dist[v] - 1]
        if not cands:
            raise TreeConstructionError(f"node {v} has no closer neighbor")
        candidates[v] = cands
        parent[v] = min(cands, key=lambda p: (link_cost(p, v), p))
        child_count[parent[v]] += 1

    def cost(v: int, p: int) -> float:
        sharers = child_count[p] + (0 if parent[v] == p else 1)
        lc = link_cost(p, v)
        return lc / sharers + lc

    for _ in range(max_rounds):
        changed = False
        for v in range(n):
            if v == source:
                continue
            best = min(candidates[v], key=lambda p: (cost(v, p), p))
            if best != parent[v] and cost(v, best) < cost(v, parent[v]):
                child_count[parent[v]] -= 1
                child_count[best] += 1
                parent[v] = best
                changed = True
        if not changed:
            internal = frozenset(p for p in range(n) if child_count[p] > 0)
            return BroadcastTree(source=source, parent=tuple(parent), internal=internal)
    raise TreeConstructionError(f"no best-response fixed point in {max_rounds} rounds")


def best_response_stable(
    topology: Topology,
    tree: BroadcastTree,
    link_success: Mapping[tuple[int, int], float],
) -> bool:
    """True when no node can strictly lower its cost by switching parents."""
    dist = hop_counts(topology, tree.source)
    child_count = [0] * topology.num_nodes
    for p in tree.parent:
        if p is not None:
            child_count[p] += 1

    def cost(v: int, p: int) -> float:
        sharers = child_count[p] + (0 if tree.parent[v] == p else 1)
        lc = 1.0 / link_success[(p, v)]
        return lc / sharers + lc

    for v in range(topology.num_nodes):
        if v == tree.source:
            continue
        current = cost(v, tree.parent[v])
        for p in topology.neighbors[v]:
            if dist[p] == dist[v] - 1 and cost(v, p) < current - 1e-12:
                return False
    return True


MAX_ORACLE_NODES = 8


def optimal_tree_oracle(
    topology: Topology,
    link_success: Mapping[tuple[int, int], float],
    source: int = 0,
) -> tuple[float, BroadcastTree]:
    """Exhaustive minimum expected-transmission spanning tree (n <= 8).

    Enumerates every parent assignment respecting the neighbor relation,
    keeps those forming an arborescence rooted at the source, and scores
    each internal node by its expected attempts to cover its children.
    """
    n = topology.num_nodes
    if n > MAX_ORACLE_NODES:
        raise ValueError(f"oracle limited to {MAX_ORACLE_NODES} nodes, got {n}")
    others = [v for v in range(n) if v != source]
    best_cost = None
    best_parent = None
    for assignment in product(*(topology.neighbors[v] for v in others)):
        parent: list[Optional[int]] = [None] * n
        for v, p in zip(others, assignment):
            parent[v] = p
        # reachability from the source decides whether this is a tree
        reached = {source}
        frontier = [source]
        while frontier:
            i = frontier.pop()
            for v in others:
                if parent[v] == i and v not in reached:
                    reached.add(v)
                    frontier.append(v)
        if len(reached) != n:
            continue
        cost = 0.0
        for i in range(n):
            children = [v for v in others if parent[v] == i]
            if children:
                cost += expected_retransmissions(
                    [link_success[(i, v)] for v in children]
                )
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_parent = tuple(parent)
    if best_cost is None:
        raise ValueError("no spanning tree rooted at the source exists")
    internal = frozenset(p for p in best_parent if p is not None)
    return best_cost, BroadcastTree(
        source=source, parent=best_parent, internal=internal
    )


def dump_tree_csv(tree: BroadcastTree) -> str:
    lines = ["node,parent,internal_flag"]
    for v, p in enumerate(tree.parent):
        lines.append(f"{v},{'' if p is None else p},{int(v in tree.internal)}")
    return "\n".join(lines) + "\n"
