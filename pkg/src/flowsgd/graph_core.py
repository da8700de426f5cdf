"""Communication graphs, cuts, and Gomory-Hu machinery.

This module owns the static description of a compute cluster: a set of
nodes with per-gradient computation times ``h_i`` (``inf`` marks a relay
switch that cannot compute) joined by full-duplex links with symmetric
bandwidth.  On top of that it provides the cut toolbox everything else is
built on:

==================  =========================================================
``max_flow_min_cut``  exact min s-t cut on the undirected bandwidth view
``gomory_hu_tree``    all-pairs min cuts compressed into n-1 tree edges
``min_S_cut``         smallest cut separating at least two nodes of a set
``unit_multigraph``   integral rescaling into unit-capacity parallel edges
``leaf_branch_peeling``  logarithmic-depth decomposition of a tree
==================  =========================================================

Bandwidths are coordinates per second, computation times are seconds per
gradient, and latencies are seconds per hop.  All structures are plain
frozen dataclasses; treat their dict fields as read-only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

INFINITY = math.inf

# Residual capacities below this fraction of the largest capacity are
# considered exhausted.  Integer bandwidths are handled exactly.
_FLOW_EPS = 1e-12


def _as_h(value):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return INFINITY
        raise ValueError(f"bad computation time: {value!r}")
    h = float(value)
    if not h > 0:
        raise ValueError(f"computation time must be positive, got {h}")
    return h


@dataclass(frozen=True)
class WeightedGraph:
    """A cluster: nodes with compute times and symmetric full-duplex links.

    ``bandwidth`` and ``latency`` are keyed by directed pairs ``(i, j)``;
    both orientations are always present and carry equal values.
    """

    nodes: tuple
    h: dict
    bandwidth: dict
    latency: dict

    def workers(self):
        """Nodes that can compute gradients (finite ``h``)."""
        return tuple(v for v in self.nodes if math.isfinite(self.h[v]))

    def neighbors(self, v):
        return tuple(sorted(j for (i, j) in self.bandwidth if i == v))

    def undirected(self):
        """Collapse the directed pairs into one weighted edge per link."""
        weight = {}
        lat = {}
        for (i, j), b in self.bandwidth.items():
            key = (i, j) if i < j else (j, i)
            weight[key] = b
            lat[key] = self.latency[(i, j)]
        return UndirectedView(self.nodes, weight, lat)


@dataclass(frozen=True)
class UndirectedView:
    """Undirected bandwidth view used by all cut computations."""

    nodes: tuple
    weight: dict
    latency: dict

    def adjacency(self):
        adj = {v: [] for v in self.nodes}
        for (u, v), w in self.weight.items():
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj


@dataclass(frozen=True)
class CutResult:
    """Value and source side of a minimum cut.

    When ``value`` is infinite no separating side exists and ``side``
    degenerates to all nodes.
    """

    value: float
    side: frozenset


def build_graph(spec):
    """Construct a :class:`WeightedGraph` from a topology description.

    ``spec`` is a mapping with two entries: ``nodes``, a list of
    ``{"id": int, "h": number | "inf"}``, and ``links``, a list of
    ``{"a": id, "b": id, "bandwidth": number, "latency": number}`` with
    ``latency`` optional (default 0).  Unknown fields anywhere are
    rejected so that typos fail loudly.
    """
    if not isinstance(spec, dict):
        raise ValueError("topology must be a mapping")
    unknown = set(spec) - {"nodes", "links"}
    if unknown:
        raise ValueError(f"unknown topology fields: {sorted(unknown)}")
    node_specs = spec.get("nodes")
    link_specs = spec.get("links")
    if not node_specs:
        raise ValueError("topology needs at least one node")

    h = {}
    for ns in node_specs:
        extra = set(ns) - {"id", "h"}
        if extra:
            raise ValueError(f"unknown node fields: {sorted(extra)}")
        nid = ns["id"]
        if not isinstance(nid, int):
            raise ValueError(f"node id must be an integer, got {nid!r}")
        if nid in h:
            raise ValueError(f"duplicate node id {nid}")
        h[nid] = _as_h(ns["h"])
    nodes = tuple(sorted(h))

    bandwidth = {}
    latency = {}
    for ls in link_specs or ():
        extra = set(ls) - {"a", "b", "bandwidth", "latency"}
        if extra:
            raise ValueError(f"unknown link fields: {sorted(extra)}")
        a, b = ls["a"], ls["b"]
        if a == b:
            raise ValueError(f"self-link at node {a}")
        if a not in h or b not in h:
            raise ValueError(f"link {a}-{b} references unknown node")
        if (a, b) in bandwidth:
            raise ValueError(f"duplicate link {a}-{b}")
        bw = ls["bandwidth"]
        bw = INFINITY if bw in ("inf", "infinity") else float(bw)
        if not bw > 0:
            raise ValueError(f"bandwidth on {a}-{b} must be positive")
        lat = float(ls.get("latency", 0.0))
        if lat < 0:
            raise ValueError(f"latency on {a}-{b} must be nonnegative")
        for i, j in ((a, b), (b, a)):
            bandwidth[(i, j)] = bw
            latency[(i, j)] = lat

    if len(nodes) > 1:
        reach = {nodes[0]}
        frontier = [nodes[0]]
        while frontier:
            u = frontier.pop()
            for (i, j) in bandwidth:
                if i == u and j not in reach:
                    reach.add(j)
                    frontier.append(j)
        if len(reach) != len(nodes):
            missing = sorted(set(nodes) - reach)
            raise ValueError(f"graph is disconnected: no path to {missing}")
    return WeightedGraph(nodes, h, bandwidth, latency)


def parse_topology(text):
    """Parse a JSON topology document into a :class:`WeightedGraph`."""
    return build_graph(json.loads(text))


def serialize_topology(g):
    """Inverse of :func:`parse_topology`, stable field order."""
    links = []
    for (i, j), b in sorted(g.bandwidth.items()):
        if i < j:
            entry = {"a": i, "b": j,
                     "bandwidth": "inf" if b == INFINITY else b}
            if g.latency[(i, j)]:
                entry["latency"] = g.latency[(i, j)]
            links.append(entry)
    doc = {
        "nodes": [{"id": v, "h": "inf" if g.h[v] == INFINITY else g.h[v]}
                  for v in g.nodes],
        "links": links,
    }
    return json.dumps(doc, indent=2) + "\n"


# == Maximum flow ==

class _Dinic:
    """Blocking-flow max-flow on an explicit residual network."""

    def __init__(self, n):
        self.adj = [[] for _ in range(n)]

    def add_undirected(self, u, v, cap):
        # one undirected edge = two arcs, each the other's residual
        self.adj[u].append([v, cap, len(self.adj[v])])
        self.adj[v].append([u, cap, len(self.adj[u]) - 1])

    def _levels(self, s, t, eps):
        level = [-1] * len(self.adj)
        level[s] = 0
        queue = [s]
        for u in queue:
            for v, cap, _ in self.adj[u]:
                if cap > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _push(self, u, t, limit, level, it, eps):
        if u == t:
            return limit
        while it[u] < len(self.adj[u]):
            v, cap, rev = self.adj[u][it[u]]
            if cap > eps and level[v] == level[u] + 1:
                pushed = self._push(v, t, min(limit, cap), level, it, eps)
                if pushed > 0:
                    self.adj[u][it[u]][1] -= pushed
                    self.adj[v][rev][1] += pushed
                    return pushed
            it[u] += 1
        return 0.0

    def max_flow(self, s, t):
        caps = [cap for row in self.adj for _, cap, _ in row]
        eps = max(caps, default=1.0) * _FLOW_EPS
        total = 0.0
        while True:
            level = self._levels(s, t, eps)
            if level is None:
                return total, eps
            it = [0] * len(self.adj)
            while True:
                pushed = self._push(s, t, INFINITY, level, it, eps)
                if pushed <= 0:
                    break
                total += pushed

    def reachable(self, s, eps):
        seen = {s}
        stack = [s]
        while stack:
            u = stack.pop()
            for v, cap, _ in self.adj[u]:
                if cap > eps and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller id as representative for determinism
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def max_flow_min_cut(g, s, t):
    """Exact minimum s-t cut of the undirected bandwidth view.

    Infinite-bandwidth links are contracted first, so graphs mixing
    finite and infinite capacities are fine; if ``s`` and ``t`` end up
    merged the cut value is infinite and ``side`` covers everything.
    """
    und = g.undirected() if isinstance(g, WeightedGraph) else g
    if s == t or s not in und.nodes or t not in und.nodes:
        raise ValueError(f"bad terminal pair ({s}, {t})")

    uf = _UnionFind(und.nodes)
    for (u, v), w in und.weight.items():
        if w == INFINITY:
            uf.union(u, v)
    if uf.find(s) == uf.find(t):
        return CutResult(INFINITY, frozenset(und.nodes))

    reps = sorted({uf.find(v) for v in und.nodes})
    index = {r: i for i, r in enumerate(reps)}
    merged = {}
    for (u, v), w in und.weight.items():
        if w == INFINITY:
            continue
        ru, rv = uf.find(u), uf.find(v)
        if ru == rv:
            continue
        key = (index[ru], index[rv]) if index[ru] < index[rv] \
            else (index[rv], index[ru])
        merged[key] = merged.get(key, 0.0) + w

    net = _Dinic(len(reps))
    for (iu, iv), w in sorted(merged.items()):
        net.add_undirected(iu, iv, w)
    value, eps = net.max_flow(index[uf.find(s)], index[uf.find(t)])
    reach = net.reachable(index[uf.find(s)], eps)
    side = frozenset(v for v in und.nodes if index[uf.find(v)] in reach)
    return CutResult(value, side)


# == Gomory-Hu tree ==

@dataclass(frozen=True)
class GomoryHuTree:
    """Cut tree: the min u-v cut equals the lightest edge on the tree path."""

    nodes: tuple
    edges: tuple  # ((u, v, weight), ...) with u < v

    def sorted_edges(self):
        """Edges in the removal order used by the subset search: ascending
        weight, then ascending larger endpoint, then smaller endpoint.

        Within a weight class this peels edges attached to low-id hubs
        before edges reaching high-id leaves, which keeps the example
        traces stable; any deterministic order yields the same optimum.
        """
        return sorted(self.edges, key=lambda e: (e[2], e[1], e[0]))

    def weights(self):
        return sorted(w for _, _, w in self.edges)

    def adjacency(self):
        adj = {v: [] for v in self.nodes}
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    def path_min_weight(self, s, t):
        """Min edge weight on the unique s-t path (= min s-t cut value)."""
        adj = self.adjacency()
        best = {s: INFINITY}
        stack = [s]
        while stack:
            u = stack.pop()
            for v, w in adj[u]:
                if v not in best:
                    best[v] = min(best[u], w)
                    stack.append(v)
        if t not in best:
            raise ValueError(f"{t} not reachable from {s} in tree")
        return best[t]


def gomory_hu_tree(g):
    """Build a Gomory-Hu tree with n-1 max-flow calls (no contraction).

    Nodes are processed in ascending id order with the lowest id as the
    initial hub, which makes the resulting tree deterministic.
    """
    und = g.undirected() if isinstance(g, WeightedGraph) else g
    nodes = sorted(und.nodes)
    if len(nodes) == 1:
        return GomoryHuTree(tuple(nodes), ())
    parent = {v: nodes[0] for v in nodes[1:]}
    weight = {}
    for v in nodes[1:]:
        cut = max_flow_min_cut(und, v, parent[v])
        weight[v] = cut.value
        for u in nodes:
            if u != v and u in cut.side and parent.get(u) == parent[v]:
                parent[u] = v
        p = parent[v]
        if p in parent and parent[p] in cut.side:
            parent[v] = parent[p]
            parent[p] = v
            weight[v] = weight[p]
            weight[p] = cut.value
    edges = tuple(sorted((min(v, p), max(v, p), weight[v])
                         for v, p in parent.items()))
    return GomoryHuTree(tuple(nodes), edges)


def min_S_cut(g, S, tree=None):
    """Smallest cut separating at least two members of ``S``.

    Equals the minimum weight among Gomory-Hu tree edges whose removal
    splits ``S``.  By convention a set with fewer than two nodes cannot be
    separated, so the value is infinite.
    """
    S = frozenset(S)
    if len(S) < 2:
        return INFINITY
    if tree is None:
        tree = gomory_hu_tree(g)
    missing = S - set(tree.nodes)
    if missing:
        raise ValueError(f"nodes not in graph: {sorted(missing)}")
    adj = tree.adjacency()
    root = tree.nodes[0]
    order, parent_of = [], {root: None}
    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        for v, w in adj[u]:
            if v not in parent_of:
                parent_of[v] = (u, w)
                stack.append(v)
    below = {v: (1 if v in S else 0) for v in tree.nodes}
    best = INFINITY
    for u in reversed(order):
        if parent_of[u] is None:
            continue
        _, w = parent_of[u]
        if 0 < below[u] < len(S):
            best = min(best, w)
        pu = parent_of[u][0]
        below[pu] += below[u]
    return best


# == Unit-capacity multigraph ==

@dataclass(frozen=True)
class UnitMultigraph:
    """Integral rescaling of a graph into parallel unit-capacity edges.

    A link of bandwidth ``b`` becomes ``round(scale * b)`` parallel unit
    edges; interleaving coordinates over the copies gives each one an
    effective rate of ``1 / scale`` in either direction.
    """

    nodes: tuple
    scale: int
    multiplicity: dict  # (u, v) with u < v -> copies

    @property
    def unit_rate(self):
        return 1.0 / self.scale

    def instances(self):
        """All edge instances as (u, v, copy) triples, sorted."""
        out = []
        for (u, v), m in sorted(self.multiplicity.items()):
            out.extend((u, v, c) for c in range(m))
        return out

    def total_edges(self):
        return sum(self.multiplicity.values())


def unit_multigraph(g, max_scale=10 ** 6):
    """Smallest integer rescaling that makes every bandwidth integral.

    Each bandwidth is matched to a rational with denominator at most
    ``max_scale``; the scale is the lcm of the denominators.  Bandwidths
    further than ``1e-9`` (relative) from that rational, infinite
    bandwidths, or an lcm beyond ``max_scale`` are errors.
    """
    und = g.undirected() if isinstance(g, WeightedGraph) else g
    denoms = []
    fracs = {}
    for key in sorted(und.weight):
        b = und.weight[key]
        if not math.isfinite(b):
            raise ValueError(
                f"infinite bandwidth on {key} cannot be rescaled")
        frac = Fraction(b).limit_denominator(max_scale)
        if abs(float(frac) - b) > 1e-9 * max(1.0, b):
            raise ValueError(
                f"bandwidth {b} on {key} is not rational within 1e-9 "
                f"at scale {max_scale}")
        fracs[key] = frac
        denoms.append(frac.denominator)
    scale = math.lcm(*denoms) if denoms else 1
    if scale > max_scale:
        raise ValueError(
            f"required scale {scale} exceeds max_scale {max_scale}")
    mult = {}
    for key, frac in fracs.items():
        copies = frac * scale
        assert copies.denominator == 1
        if copies.numerator > 0:
            mult[key] = copies.numerator
    return UnitMultigraph(tuple(sorted(und.nodes)), scale, mult)


def finite_bandwidth_proxy(g, factor=16.0):
    """Replace infinite link bandwidths with ``factor`` times the fastest
    finite one, so the tree-packing machinery (which needs rational
    capacities) can run on graphs that mix finite and infinite links.

    An infinite link then admits ``factor`` times as many unit tree
    instances as the widest finite link, which is enough for it never to
    be the packing bottleneck in practice.  Graphs with no infinite link
    are returned unchanged; graphs with *only* infinite links are an
    error -- on those, communication takes no simulated time at all and
    callers should skip the transfer entirely.
    """
    if factor <= 1:
        raise ValueError("factor must exceed 1")
    finite = [b for b in g.bandwidth.values() if math.isfinite(b)]
    if len(finite) == len(g.bandwidth):
        return g
    if not finite:
        raise ValueError("all links are infinite; nothing to scale against")
    cap = max(finite) * factor
    bw = {k: (cap if not math.isfinite(b) else b)
          for k, b in g.bandwidth.items()}
    return replace(g, bandwidth=bw)


# == Leaf/branch peeling ==

@dataclass(frozen=True)
class PeelLayer:
    leaves: frozenset
    branches: frozenset


def leaf_branch_peeling(adjacency):
    """Peel a tree into layers of leaves plus absorbed degree-2 chains.

    Each round removes the current leaves together with every degree-2
    node reachable from them through other degree-2 nodes (degrees taken
    at the start of the round).  The number of rounds — the peeling depth
    — is at most ``floor(log2(n + 2))``.

    ``adjacency`` maps each vertex to its neighbors; vertices may be any
    hashable values (the subset search feeds node-sets through this).
    Returns ``(layers, depth)``.
    """
    adj = {v: set(ns) for v, ns in adjacency.items()}
    for v, ns in adj.items():
        for u in ns:
            if u not in adj or v not in adj[u]:
                raise ValueError("adjacency is not symmetric")
        if v in ns:
            raise ValueError("self loop")
    n = len(adj)
    if n == 0:
        raise ValueError("empty tree")
    edge_count = sum(len(ns) for ns in adj.values()) // 2
    root = next(iter(adj))
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != n or edge_count != n - 1:
        raise ValueError("input is not a tree")

    layers = []
    remaining = {v: set(ns) for v, ns in adj.items()}
    while remaining:
        degree = {v: len(ns) for v, ns in remaining.items()}
        leaves = {v for v, d in degree.items() if d <= 1}
        branches = set()
        frontier = set(leaves)
        while True:
            grown = {
                v for v in remaining
                if v not in leaves and v not in branches
                and degree[v] == 2 and remaining[v] & frontier
            }
            if not grown:
                break
            branches |= grown
            frontier = grown
        gone = leaves | branches
        for v in gone:
            for u in remaining[v]:
                remaining[u].discard(v)
            del remaining[v]
        layers.append(PeelLayer(frozenset(leaves), frozenset(branches)))
    return tuple(layers), len(layers)
