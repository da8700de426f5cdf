"""Built-in topology generators.

Every generator returns a validated :class:`~flowsgd.graph_core.WeightedGraph`
with 1-based integer node ids.  The 2-torus uses row-major ids
(``1 + x + y*side``) so the packing layer recognizes it; K-clusters
elects the lowest id of each cluster as its gateway and joins gateways
in a ring (a single link when there are only two clusters).
"""

from __future__ import annotations

import math

from .graph_core import WeightedGraph, build_graph

INFINITY = math.inf


def _bw(b):
    return "inf" if b == INFINITY else b


def star(n, b=1.0, h=1.0) -> WeightedGraph:
    """Hub-and-spoke on nodes 1..n with node 1 as the hub."""
    if n < 2:
        raise ValueError("star needs n >= 2")
    return build_graph({
        "nodes": [{"id": i, "h": h} for i in range(1, n + 1)],
        "links": [{"a": 1, "b": i, "bandwidth": _bw(b)}
                  for i in range(2, n + 1)],
    })


def ring(n, b=1.0, h=1.0) -> WeightedGraph:
    """Cycle on nodes 1..n."""
    if n < 3:
        raise ValueError("ring needs n >= 3")
    links = [{"a": i, "b": i + 1, "bandwidth": _bw(b)}
             for i in range(1, n)]
    links.append({"a": 1, "b": n, "bandwidth": _bw(b)})
    return build_graph({
        "nodes": [{"id": i, "h": h} for i in range(1, n + 1)],
        "links": links,
    })


def p_torus(side, p=2, b=1.0, h=1.0) -> WeightedGraph:
    """p-dimensional torus with ``side`` nodes per axis.

    Ids are row-major: 1 + Σ coord_i · side^i, so the 2-dimensional case
    matches the layout the specialized AllReduce construction expects.
    Needs side >= 3 (side 2 would fold both wrap-around directions onto
    one physical link).
    """
    if side < 3:
        raise ValueError("torus needs side >= 3")
    if p < 1:
        raise ValueError("torus needs p >= 1")
    n = side ** p
    coords = [tuple((idx // side ** a) % side for a in range(p))
              for idx in range(n)]

    def nid(c):
        return 1 + sum(c[a] * side ** a for a in range(p))

    links, seen = [], set()
    for c in coords:
        for a in range(p):
            nxt = list(c)
            nxt[a] = (nxt[a] + 1) % side
            u, v = nid(c), nid(tuple(nxt))
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                links.append({"a": key[0], "b": key[1],
                              "bandwidth": _bw(b)})
    return build_graph({
        "nodes": [{"id": i, "h": h} for i in range(1, n + 1)],
        "links": links,
    })


def all_to_all(n, b=1.0, h=1.0) -> WeightedGraph:
    """Complete graph on nodes 1..n."""
    if n < 2:
        raise ValueError("all_to_all needs n >= 2")
    return build_graph({
        "nodes": [{"id": i, "h": h} for i in range(1, n + 1)],
        "links": [{"a": i, "b": j, "bandwidth": _bw(b)}
                  for i in range(1, n + 1) for j in range(i + 1, n + 1)],
    })


def k_clusters(n, clusters, b_slow, b_fast=INFINITY, h=1.0) -> WeightedGraph:
    """K clusters of n/K workers: fast all-to-all inside, slow ring between.

    Cluster c owns ids c·(n/K)+1 .. (c+1)·(n/K); its lowest id is the
    gateway carrying the inter-cluster links.  ``h`` may be a scalar or a
    per-cluster sequence.  The default infinite ``b_fast`` suits the
    closed-form analysis; pass a finite value to simulate (streaming
    needs finite unit capacities).
    """
    K = clusters
    if K < 2:
        raise ValueError("need at least two clusters")
    if n % K:
        raise ValueError("cluster size must divide n")
    size = n // K
    if isinstance(h, (int, float)):
        cluster_h = [h] * K
    else:
        cluster_h = list(h)
        if len(cluster_h) != K:
            raise ValueError("need one compute time per cluster")

    nodes = []
    links = []
    for c in range(K):
        members = range(c * size + 1, (c + 1) * size + 1)
        nodes.extend({"id": i, "h": cluster_h[c]} for i in members)
        for i in members:
            for j in members:
                if i < j:
                    links.append({"a": i, "b": j, "bandwidth": _bw(b_fast)})
    gateways = [c * size + 1 for c in range(K)]
    if K == 2:
        links.append({"a": gateways[0], "b": gateways[1],
                      "bandwidth": _bw(b_slow)})
    else:
        for c in range(K):
            a, b_ = gateways[c], gateways[(c + 1) % K]
            links.append({"a": min(a, b_), "b": max(a, b_),
                          "bandwidth": _bw(b_slow)})
    return build_graph({"nodes": nodes, "links": links})
