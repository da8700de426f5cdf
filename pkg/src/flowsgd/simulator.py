"""Deterministic fluid-model simulator for computation and streaming.

Time advances only at completions and rate changes; everything in
between is linear, so flows are described by (start, rate, size) rather
than per-coordinate packets.  Three kinds of activity are modeled:

* back-to-back gradient computation with an arbitrary monotone stopping
  predicate (:func:`run_gradient_computation`);
* pipelined tree streaming for AllReduce schedules and for the naive
  aggregation round — a node forwards a coordinate the moment every
  child has delivered it, so each hop adds one coordinate-slot of
  startup plus its link latency (:func:`run_allreduce`,
  :func:`run_naive_sync_round`);
* point-to-point transfers that contend for links and share them
  max-min fairly, recomputed at every event boundary
  (:func:`run_separate_transfers`, :func:`shared_edge_rates`).

All runs are bit-deterministic: events are ordered by (time, sequence
number) with a 1e-12 comparison tolerance, and equal-time completions
are processed in node-id order.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .graph_core import WeightedGraph, unit_multigraph
from .steiner_packing import TreePacking, orient_to_pivot

INFINITY = math.inf
TIME_TOL = 1e-12


class SimTimeoutError(RuntimeError):
    """Raised when a simulation exceeds its simulated-time or event cap."""


class TraceEvent(NamedTuple):
    time: float
    event_kind: str  # gradient_done | flow_done | phase_done | rate_change
    node: object  # node id or ""
    edge: str  # "u->v" or ""
    flow_id: str
    detail: str


class SimClock:
    """Priority queue of (time, seq, payload) with monotone pops."""

    def __init__(self):
        self.time = 0.0
        self._seq = 0
        self._heap = []

    def push(self, time, payload):
        if time < self.time - TIME_TOL:
            raise ValueError(f"event at {time} precedes clock {self.time}")
        heapq.heappush(self._heap, (time, self._seq, payload))
        self._seq += 1

    def pop(self):
        time, _, payload = heapq.heappop(self._heap)
        self.time = max(self.time, time)
        return time, payload

    def __bool__(self):
        return bool(self._heap)


@dataclass(frozen=True)
class Flow:
    flow_id: str
    path: tuple  # directed (u, v) hops
    size: float  # coordinates
    rate: float  # coordinates per second on every hop
    start: float
    finish: float
    role: str  # reduce | broadcast | transfer


@dataclass(frozen=True)
class SimSchedule:
    pivot: int
    block_size: int
    blocks: tuple  # block index -> tree index (identity here)
    phases: tuple  # ("reduce", "broadcast") or ("reduce",)

    def to_dict(self):
        return {
            "pivot": self.pivot,
            "block_size": self.block_size,
            "blocks": list(self.blocks),
            "phases": list(self.phases),
        }


@dataclass(frozen=True)
class SimTrace:
    events: tuple
    completion_time: float
    utilization: dict

    def to_csv(self, path_or_file):
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["time", "event_kind", "node", "edge", "flow_id", "detail"])
        for ev in self.events:
            writer.writerow([repr(ev.time), ev.event_kind, ev.node,
                             ev.edge, ev.flow_id, ev.detail])

    def csv_bytes(self):
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue().encode()


def _edge_str(u, v):
    return f"{u}->{v}"


def _finish_trace(events, utilization):
    events = tuple(sorted(events, key=lambda e: (e.time, e[1:])))
    completion = max((e.time for e in events), default=0.0)
    return SimTrace(events, completion, utilization)


# == Gradient computation ==

def run_gradient_computation(workers, h, stop, max_seconds=1e9,
                             max_events=10_000_000, record=None):
    """Workers compute gradients back to back until ``stop`` fires.

    ``stop`` sees the dict of completed counts after every single
    completion (simultaneous finishes are processed in node-id order) and
    must be monotone.  Returns ``(counts, elapsed)``.  A predicate that
    never fires trips the simulated-time / event-count guard with
    :class:`SimTimeoutError`.  Pass a list as ``record`` to collect
    ``gradient_done`` trace events.
    """
    workers = sorted(workers)
    counts = {w: 0 for w in workers}
    if stop(dict(counts)):
        return counts, 0.0
    clock = SimClock()
    for w in workers:
        if math.isfinite(h[w]):
            clock.push(h[w], w)
    if not clock:
        raise ValueError("no worker can compute")
    done = 0
    while clock:
        t, w = clock.pop()
        if t > max_seconds:
            raise SimTimeoutError(
                f"stop predicate unsatisfied after {max_seconds} simulated "
                f"seconds")
        counts[w] += 1
        done += 1
        if record is not None:
            record.append(TraceEvent(t, "gradient_done", w, "", "",
                                     f"count={counts[w]}"))
        if stop(dict(counts)):
            return counts, t
        if done >= max_events:
            raise SimTimeoutError(
                f"stop predicate unsatisfied after {max_events} events")
        clock.push(t + h[w], w)
    raise AssertionError("unreachable")


# == Tree streaming ==

def _tree_cascade(oriented, latency, rate, size, reverse=False):
    """Per-edge (offset, finish) for one pipelined streaming phase.

    ``oriented`` lists (child, parent, instance) toward the pivot.  In
    reduce order (default) a stream starts one coordinate-slot plus link
    latency after its slowest child stream; ``reverse=True`` mirrors the
    cascade for the broadcast phase.
    """
    children = {}
    for child, parent, inst in oriented:
        children.setdefault(parent, []).append((child, inst))

    if not reverse:
        offsets = {}

        def offset_of(node):
            best = 0.0
            for child, inst in children.get(node, ()):
                e = (child, node)
                if e not in offsets:
                    key = (min(e), max(e))
                    offsets[e] = offset_of(child) + latency[key] + 1.0 / rate
                best = max(best, offsets[e])
            return best

        flows = []
        for child, parent, inst in oriented:
            start = offset_of(child)
            key = (min(child, parent), max(child, parent))
            finish = start + latency[key] + size / rate
            flows.append(((child, parent), inst, start, finish))
        return flows

    # broadcast: the pivot's outgoing streams start immediately; each
    # deeper stream starts one slot + latency after its parent stream
    flows = []
    child_set = {c for cs in children.values() for c, _ in cs}
    roots = [p for p in children if p not in child_set]
    order = [(r, 0.0) for r in roots]
    while order:
        node, base = order.pop()
        for child, inst in children.get(node, ()):
            key = (min(child, node), max(child, node))
            start = base
            finish = start + latency[key] + size / rate
            flows.append(((node, child), inst, start, finish))
            order.append((child, start + latency[key] + 1.0 / rate))
    return flows


def run_allreduce(g: WeightedGraph, packing: TreePacking, d, mode="streamed"):
    """Execute an AllReduce schedule over packed trees and trace it.

    The vector is zero-padded into ``p`` blocks of ``ceil(d/p)``
    coordinates, block j streaming through tree j.  Every tree edge is an
    instance of the unit multigraph and carries exactly ``1/scale``
    coordinates per second.  The broadcast phase starts after every
    tree's reduce has completed (one barrier, as in the two-phase
    schedule), reusing each tree with reversed orientation — disjointness
    of the reduce arcs then carries over to the broadcast arcs.

    ``mode="streamed"`` pipelines coordinates (per-hop startup of one
    coordinate slot); ``mode="store_and_forward"`` forwards only whole
    blocks, for comparison.
    """
    if mode not in ("streamed", "store_and_forward"):
        raise ValueError(f"unknown mode {mode!r}")
    if d <= 0:
        raise ValueError("vector size must be positive")
    mg = unit_multigraph(g)
    und = g.undirected()
    for ti, tree in enumerate(packing.trees):
        for u, v, c in tree.edges:
            if not (0 <= c < mg.multiplicity.get((u, v), 0)):
                raise ValueError(
                    f"packing/graph mismatch: tree {ti} instance {(u, v, c)}")

    p = packing.p
    if p == 0:
        schedule = SimSchedule(packing.pivot, 0, (), ())
        return _finish_trace([], {}), schedule

    block = math.ceil(d / p)
    rate = mg.unit_rate
    schedule = SimSchedule(packing.pivot, block, tuple(range(p)),
                           ("reduce", "broadcast"))
    contributors = len(packing.terminals)

    events = []
    carried = {}  # directed physical edge -> coordinates
    reduce_done = 0.0
    cascades = []
    for ti, tree in enumerate(packing.trees):
        oriented = orient_to_pivot(tree, packing.pivot)
        cascades.append(oriented)
        if mode == "streamed":
            flows = _tree_cascade(oriented, und.latency, rate, block)
        else:
            flows = _store_forward(oriented, und.latency, rate, block)
        for (a, b), inst, start, finish in flows:
            fid = f"reduce/t{ti}/{inst[0]}-{inst[1]}#{inst[2]}"
            carried[_edge_str(a, b)] = carried.get(_edge_str(a, b), 0.0) \
                + block
            if b == packing.pivot:
                detail = (f"block={ti};size={block};"
                          f"contrib={contributors};rate={rate:.17g};"
                          f"start={start:.17g}")
            else:
                detail = f"block={ti};rate={rate:.17g};start={start:.17g}"
            events.append(TraceEvent(finish, "flow_done", b,
                                     _edge_str(a, b), fid, detail))
            reduce_done = max(reduce_done, finish)
    events.append(TraceEvent(reduce_done, "phase_done", packing.pivot, "",
                             "", "phase=reduce"))

    completion = reduce_done
    for ti, oriented in enumerate(cascades):
        if mode == "streamed":
            flows = _tree_cascade(oriented, und.latency, rate, block,
                                  reverse=True)
        else:
            flows = _store_forward(oriented, und.latency, rate, block,
                                   reverse=True)
        for (a, b), inst, start, finish in flows:
            fid = f"broadcast/t{ti}/{inst[0]}-{inst[1]}#{inst[2]}"
            carried[_edge_str(a, b)] = carried.get(_edge_str(a, b), 0.0) \
                + block
            events.append(TraceEvent(
                reduce_done + finish, "flow_done", b, _edge_str(a, b), fid,
                f"block={ti};rate={rate:.17g};start={reduce_done + start:.17g}"))
            completion = max(completion, reduce_done + finish)
    events.append(TraceEvent(completion, "phase_done", packing.pivot, "",
                             "", "phase=broadcast"))

    util = _utilization(carried, g, completion)
    return _finish_trace(events, util), schedule


def _store_forward(oriented, latency, rate, size, reverse=False):
    children = {}
    for child, parent, inst in oriented:
        children.setdefault(parent, []).append((child, inst))
    if not reverse:
        def done_at(node):
            best = 0.0
            for child, _ in children.get(node, ()):
                key = (min(child, node), max(child, node))
                best = max(best, done_at(child) + latency[key] + size / rate)
            return best

        flows = []
        for child, parent, inst in oriented:
            key = (min(child, parent), max(child, parent))
            start = done_at(child)
            flows.append(((child, parent), inst, start,
                          start + latency[key] + size / rate))
        return flows
    child_set = {c for cs in children.values() for c, _ in cs}
    roots = [p for p in children if p not in child_set]
    flows = []
    order = [(r, 0.0) for r in roots]
    while order:
        node, base = order.pop()
        for child, inst in children.get(node, ()):
            key = (min(child, node), max(child, node))
            finish = base + latency[key] + size / rate
            flows.append(((node, child), inst, base, finish))
            order.append((child, finish))
    return flows


def _utilization(carried, g, completion):
    if completion <= 0:
        return {e: 0.0 for e in carried}
    util = {}
    for edge, coords in sorted(carried.items()):
        u, v = edge.split("->")
        b = g.bandwidth[(int(u), int(v))]
        util[edge] = 0.0 if b == INFINITY else coords / (b * completion)
    return util


# == Naive aggregation round ==

def _bfs_tree(g, pivot):
    """Shortest-path tree by hop count; children visited in id order."""
    parent = {pivot: None}
    order = [pivot]
    frontier = [pivot]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    order.append(v)
                    nxt.append(v)
        frontier = nxt
    children = {}
    for v, par in parent.items():
        if par is not None:
            children.setdefault(par, []).append(v)
    return parent, children, order


def run_naive_sync_round(g: WeightedGraph, pivot, d):
    """One streamed aggregation to the pivot plus a broadcast back.

    Every node streams its vector up a hop-shortest tree; an interior
    node merges children streams coordinate-by-coordinate and forwards
    immediately, so the effective rate into any node is the minimum link
    rate below it and each hop adds one coordinate slot of startup.  The
    broadcast mirrors the tree downward.  Completion of both phases is
    returned in the trace; a single node completes at time zero.
    """
    if pivot not in g.nodes:
        raise ValueError(f"pivot {pivot} not in graph")
    parent, children, order = _bfs_tree(g, pivot)
    if len(order) != len(g.nodes):
        raise ValueError("graph is disconnected")
    if len(g.nodes) == 1:
        return _finish_trace(
            [TraceEvent(0.0, "phase_done", pivot, "", "", "phase=reduce"),
             TraceEvent(0.0, "phase_done", pivot, "", "",
                        "phase=broadcast")], {})

    # effective aggregated-stream rate into each node
    rate_in = {}

    def rate_into(v):
        if v in rate_in:
            return rate_in[v]
        rs = [min(g.bandwidth[(c, v)], rate_into(c))
              for c in children.get(v, ())]
        rate_in[v] = min(rs) if rs else INFINITY
        return rate_in[v]

    offset = {}

    def offset_of(v):
        if v in offset:
            return offset[v]
        best = 0.0
        for c in children.get(v, ()):
            r = min(g.bandwidth[(c, v)], rate_into(c))
            best = max(best,
                       offset_of(c) + g.latency[(c, v)] + 1.0 / r)
        offset[v] = best
        return best

    events = []
    carried = {}
    reduce_done = 0.0
    for v in order:
        for c in children.get(v, ()):
            r = min(g.bandwidth[(c, v)], rate_into(c))
            start = offset_of(c)
            finish = start + g.latency[(c, v)] + d / r
            carried[_edge_str(c, v)] = carried.get(_edge_str(c, v), 0.0) + d
            events.append(TraceEvent(
                finish, "flow_done", v, _edge_str(c, v),
                f"reduce/{c}-{v}",
                f"rate={r:.17g};start={start:.17g}"))
            if v == pivot:
                reduce_done = max(reduce_done, finish)
    reduce_done = max((e.time for e in events), default=0.0)
    events.append(TraceEvent(reduce_done, "phase_done", pivot, "", "",
                             "phase=reduce"))

    # broadcast: pivot streams down; each edge limited by everything above
    completion = reduce_done
    down_rate = {}
    down_off = {pivot: 0.0}
    for v in order:
        for c in children.get(v, ()):
            above = down_rate.get(v, INFINITY)
            r = min(g.bandwidth[(v, c)], above)
            down_rate[c] = r
            start = down_off[v]
            down_off[c] = start + g.latency[(v, c)] + 1.0 / r
            finish = reduce_done + start + g.latency[(v, c)] + d / r
            carried[_edge_str(v, c)] = carried.get(_edge_str(v, c), 0.0) + d
            events.append(TraceEvent(
                finish, "flow_done", c, _edge_str(v, c),
                f"broadcast/{v}-{c}",
                f"rate={r:.17g};start={reduce_done + start:.17g}"))
            completion = max(completion, finish)
    events.append(TraceEvent(completion, "phase_done", pivot, "", "",
                             "phase=broadcast"))
    return _finish_trace(events, _utilization(carried, g, completion))


# == Contending point-to-point transfers ==

def shared_edge_rates(flows, bandwidth):
    """Max-min fair allocation for flows with fixed directed paths.

    ``flows``: mapping flow id -> iterable of directed (u, v) hops (an
    empty path gets infinite rate); ``bandwidth``: directed edge -> cap.
    Progressive filling: repeatedly give every unfrozen flow the largest
    common rate some edge can still support equally, freeze that edge's
    flows, subtract, continue.
    """
    rates = {}
    paths = {fid: tuple(path) for fid, path in flows.items()}
    active = set()
    for fid, path in paths.items():
        if path:
            active.add(fid)
        else:
            rates[fid] = INFINITY
    remaining = dict(bandwidth)
    while active:
        share = INFINITY
        for e, cap in remaining.items():
            users = sum(1 for fid in active if e in paths[fid])
            if users:
                share = min(share, cap / users)
        if share == INFINITY:
            for fid in active:
                rates[fid] = INFINITY
            break
        frozen = set()
        for e in remaining:
            users = [fid for fid in active if e in paths[fid]]
            if users and remaining[e] / len(users) <= share * (1 + 1e-12):
                frozen.update(users)
        for fid in frozen:
            rates[fid] = share
        for e in remaining:
            used = sum(1 for fid in frozen if e in paths[fid])
            if used:
                remaining[e] = max(0.0, remaining[e] - share * used)
        active -= frozen
    return rates


def _shortest_path(g, src, dst):
    parent = {src: None}
    frontier = [src]
    while frontier and dst not in parent:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    nxt.append(v)
        frontier = nxt
    if dst not in parent:
        raise ValueError(f"no path {src} -> {dst}")
    path = []
    v = dst
    while parent[v] is not None:
        path.append((parent[v], v))
        v = parent[v]
    return tuple(reversed(path))


def run_separate_transfers(g: WeightedGraph, sources, dest, d):
    """Each source pushes its own d-coordinate vector to ``dest``.

    Flows follow hop-shortest paths and contend max-min fairly; rates are
    recomputed whenever a flow completes (rate_change events record each
    boundary).  This is the no-aggregation baseline.
    """
    flows = {f"xfer/{s}": _shortest_path(g, s, dest)
             for s in sorted(sources) if s != dest}
    remaining = {fid: float(d) for fid in flows}
    events = []
    carried = {}
    t = 0.0
    while remaining:
        rates = shared_edge_rates(
            {fid: flows[fid] for fid in remaining}, g.bandwidth)
        for fid in sorted(remaining):
            events.append(TraceEvent(
                t, "rate_change", "", "", fid, f"rate={rates[fid]:.17g}"))
        span = min(remaining[fid] / rates[fid] for fid in remaining)
        t += span
        finished = [fid for fid in sorted(remaining)
                    if remaining[fid] - rates[fid] * span
                    <= TIME_TOL * max(1.0, d)]
        for fid in sorted(remaining):
            moved = rates[fid] * span
            remaining[fid] -= moved
            for e in flows[fid]:
                carried[_edge_str(*e)] = carried.get(_edge_str(*e), 0.0) \
                    + moved
        for fid in finished:
            events.append(TraceEvent(
                t, "flow_done", flows[fid][-1][1] if flows[fid] else dest,
                _edge_str(*flows[fid][-1]) if flows[fid] else "", fid,
                "delivered"))
            del remaining[fid]
        if not finished:
            raise AssertionError("no progress in transfer loop")
    events.append(TraceEvent(t, "phase_done", dest, "", "",
                             "phase=transfers"))
    return _finish_trace(events, _utilization(carried, g, t))


def audit_capacity(trace: SimTrace, g: WeightedGraph):
    """Re-check the capacity invariant from a trace's flow events.

    Reconstructs each flow's (start, finish, rate, edge) from the recorded
    details and integrates per-directed-edge rate over time; returns the
    worst ratio of aggregate rate to capacity (≤ 1 + 1e-9 when the run
    respected the fluid constraints).
    """
    intervals = {}
    for ev in trace.events:
        if ev.event_kind != "flow_done" or not ev.edge:
            continue
        fields = dict(kv.split("=") for kv in ev.detail.split(";")
                      if "=" in kv)
        if "rate" not in fields or "start" not in fields:
            continue
        rate = float(fields["rate"])
        start = float(fields["start"])
        intervals.setdefault(ev.edge, []).append((start, ev.time, rate))
    worst = 0.0
    for edge, ivs in intervals.items():
        u, v = edge.split("->")
        key = (int(u), int(v))
        cap = g.bandwidth[key]
        if cap == INFINITY:
            continue
        times = sorted({t for iv in ivs for t in iv[:2]})
        for lo, hi in zip(times, times[1:]):
            mid = (lo + hi) / 2
            total = sum(r for s, f, r in ivs if s <= mid <= f)
            worst = max(worst, total / cap)
    return worst
