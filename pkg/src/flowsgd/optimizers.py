"""Simulated SGD variants over synthetic objectives.

The optimization arithmetic is exact (numpy vectors, seeded noise); the
*clock* comes from the simulator: batch collection is an event walk over
worker compute times, and communication rounds are timed by the
streaming model.  Because the timing model is deterministic, the
per-iteration collection and AllReduce times are computed once per run
and reused — only the gradient draws differ across iterations.

Noise is additive isotropic Gaussian with per-coordinate variance σ²/d,
drawn from a counter-based generator keyed by (seed, worker, iteration)
so a trace never depends on scheduling or thread count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .graph_core import (WeightedGraph, finite_bandwidth_proxy,
                         unit_multigraph)
from .selection import (ProblemParams, find_fastest_subset,
                        grace_target_batch, leon_stop_rule)
from .simulator import (run_allreduce, run_gradient_computation,
                        run_naive_sync_round)
from .steiner_packing import pack_steiner_trees

INFINITY = math.inf


@dataclass(frozen=True)
class Objective:
    """A differentiable target with known smoothness and gap."""

    d: int
    f: object  # x -> float
    grad: object  # x -> ndarray
    L: float
    f_star: float
    x0: np.ndarray
    delta: float


_FSTAR_CACHE = {}


def make_objective(kind, d, n_components=1, seed=0, L=1.0, delta=1.0,
                   n_samples=None, reg=1e-3):
    """Build a synthetic objective (or component list) for experiments.

    ``quadratic``: f(x) = (L/2)‖x−x★‖² with the start placed so the gap
    is exactly ``delta``; with several components each gets its own
    seeded minimizer (equal curvature), the start is placed against the
    averaged function, and a tuple of components is returned.

    ``synthetic_logreg``: seeded Gaussian features with ±1 labels and an
    ℓ2 term; L comes from the design's spectral norm; f* is found by a
    long deterministic gradient-descent run and cached per (d, samples,
    seed).  Several components partition the sample rows, so their
    average is exactly the full-data objective.
    """
    if kind == "quadratic":
        rng = np.random.default_rng(seed)
        radius = math.sqrt(2.0 * delta / L)
        centers = [rng.standard_normal(d) for _ in range(n_components)]
        mean_center = np.mean(centers, axis=0)
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        x0 = mean_center + radius * direction

        def component(c):
            return Objective(
                d=d,
                f=lambda x, c=c: 0.5 * L * float(np.dot(x - c, x - c)),
                grad=lambda x, c=c: L * (x - c),
                L=L, f_star=0.0, x0=x0,
                delta=0.5 * L * float(np.dot(x0 - c, x0 - c)))

        if n_components == 1:
            return component(centers[0])
        return tuple(component(c) for c in centers)

    if kind == "synthetic_logreg":
        rng = np.random.default_rng(seed)
        m = n_samples or max(4 * d, 16)
        if m % n_components:
            raise ValueError("components must partition the samples")
        A = rng.standard_normal((m, d)) / math.sqrt(d)
        w_true = rng.standard_normal(d)
        y = np.sign(A @ w_true + 0.3 * rng.standard_normal(m))
        y[y == 0] = 1.0

        def block_objective(rows):
            Ab, yb = A[rows], y[rows]
            Lb = (np.linalg.norm(Ab, 2) ** 2) / (4.0 * len(rows)) + reg

            def f(x, Ab=Ab, yb=yb):
                z = -yb * (Ab @ x)
                return float(np.mean(np.logaddexp(0.0, z))
                             + 0.5 * reg * np.dot(x, x))

            def grad(x, Ab=Ab, yb=yb):
                z = -yb * (Ab @ x)
                s = 1.0 / (1.0 + np.exp(-z))
                return (Ab.T @ (-yb * s)) / len(yb) + reg * x

            x0 = np.zeros(d)
            key = ("logreg", d, m, seed, tuple(rows[:1]), len(rows))
            if key not in _FSTAR_CACHE:
                _FSTAR_CACHE[key] = _descend(f, grad, x0, Lb)
            f_star = _FSTAR_CACHE[key]
            return Objective(d=d, f=f, grad=grad, L=Lb, f_star=f_star,
                             x0=x0, delta=f(x0) - f_star)

        if n_components == 1:
            return block_objective(range(m))
        size = m // n_components
        return tuple(block_objective(range(c * size, (c + 1) * size))
                     for c in range(n_components))

    raise ValueError(f"unknown objective kind {kind!r}")


def _descend(f, grad, x0, L, steps=100_000):
    """Plain gradient descent; returns the best value reached."""
    x = x0.copy()
    step = 1.0 / L
    for _ in range(steps):
        x -= step * grad(x)
    return f(x)


class StochasticOracle:
    """Seeded noisy-gradient source shared by all methods.

    ``objectives`` is one Objective (homogeneous) or a sequence of
    per-worker components whose uniform average is the target.  Each
    draw adds N(0, σ²/d) noise per coordinate, so E‖g−∇f‖² = σ².  The
    noise stream for a (worker, iteration) pair is an independent
    counter-based generator, making traces reproducible regardless of
    execution order.
    """

    def __init__(self, objectives, sigma2, seed=0):
        if isinstance(objectives, Objective):
            objectives = (objectives,)
        self.components = tuple(objectives)
        if not self.components:
            raise ValueError("need at least one objective")
        if sigma2 < 0:
            raise ValueError("variance must be nonnegative")
        self.sigma2 = float(sigma2)
        self.seed = seed

    @property
    def mode(self):
        return "homogeneous" if len(self.components) == 1 \
            else "heterogeneous"

    def _rng(self, worker, iteration):
        seq = np.random.SeedSequence(entropy=self.seed,
                                     spawn_key=(worker, iteration))
        return np.random.Generator(np.random.Philox(seq))

    def gradient_sum(self, x, worker, iteration, count, component=0):
        """Sum of ``count`` noisy gradients of one component at x."""
        obj = self.components[component]
        total = count * obj.grad(x)
        if self.sigma2 > 0 and count > 0:
            scale = math.sqrt(self.sigma2 / obj.d)
            noise = self._rng(worker, iteration).normal(
                0.0, scale, (count, obj.d))
            total = total + noise.sum(axis=0)
        return total

    def mean_value(self, x):
        return sum(o.f(x) for o in self.components) / len(self.components)

    def mean_gradient(self, x):
        g = sum(o.grad(x) for o in self.components)
        return g / len(self.components)


@dataclass(frozen=True)
class TrainingTrace:
    """Per-iteration record of a simulated run.

    Rows are (iteration, sim_time_s, grad_norm_sq, f_value, total_batch)
    starting with the initial point at time zero; times are strictly
    increasing.  ``comm_seconds`` totals the simulated communication
    time (zero when the run never exchanged vectors).
    """

    method: str
    rows: tuple
    status: str  # "max_iters" | "reached_target"
    comm_seconds: float

    def final_time(self):
        return self.rows[-1][1]

    def min_grad_sq(self):
        return min(r[2] for r in self.rows)

    def time_to_value(self, target_f):
        """First simulated time with f ≤ target, or None."""
        for _, t, _, fv, _ in self.rows:
            if fv <= target_f:
                return t
        return None

    def to_csv(self, path_or_file):
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "sim_time_s", "grad_norm_sq", "f_value",
                    "total_batch"])
        for row in self.rows:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]),
                        row[4]])

    def csv_bytes(self):
        buf = io.StringIO()
        self._write(buf)
        return buf.getvalue().encode()


def _finite_workers(g):
    return [i for i in g.nodes if math.isfinite(g.h[i])]


def _all_infinite_bandwidth(g):
    return all(b == INFINITY for b in g.bandwidth.values())


def _allreduce_seconds(g, terminals, d, mode):
    """Simulated time of one AllReduce among ``terminals`` (0 if alone)."""
    if len(terminals) < 2 or d == 0:
        return 0.0
    if _all_infinite_bandwidth(g):
        return 0.0
    g = finite_bandwidth_proxy(g)
    mg = unit_multigraph(g)
    packing = pack_steiner_trees(mg, tuple(terminals))
    trace, _ = run_allreduce(g, packing, d, mode=mode)
    return trace.completion_time


def _loop(objective_stats, steps, max_iters, target_grad_sq):
    """Shared iteration driver: steps() advances x and returns the cost.

    ``objective_stats`` maps x to (f, ‖∇f‖²); rows follow the trace
    schema.  Returns the finished TrainingTrace.
    """
    f0, g0 = objective_stats()
    rows = [(0, 0.0, g0, f0, 0)]
    t = 0.0
    status = "max_iters"
    comm_total = 0.0
    for k in range(1, max_iters + 1):
        elapsed, comm, batch = steps(k)
        t += elapsed + comm
        comm_total += comm
        fv, gsq = objective_stats()
        rows.append((k, t, gsq, fv, batch))
        if target_grad_sq is not None and gsq <= target_grad_sq:
            status = "reached_target"
            break
    return rows, status, comm_total


def grace_sgd(g: WeightedGraph, objective: Objective,
              oracle: StochasticOracle, params: ProblemParams,
              max_iters, gamma=None, mode="streamed", subset=None,
              target_grad_sq=None):
    """Subset-planned SGD: plan once, then batch + AllReduce per step.

    The worker subset comes from the cut-tree planner unless ``subset``
    overrides it.  Each iteration collects max{⌈σ²/ε⌉, 1} gradients
    across the subset (whoever finishes contributes), reduces the sum
    over the packed trees, and steps with γ/ΣB.  γ defaults to 1/(2L).
    """
    gamma = 1.0 / (2.0 * objective.L) if gamma is None else gamma
    if subset is None:
        choice, _ = find_fastest_subset(g, params)
        subset = choice.subset
    workers = sorted(i for i in subset if math.isfinite(g.h[i]))
    if not workers:
        raise ValueError("subset has no computing node")
    target = grace_target_batch(params)
    counts, elapsed = run_gradient_computation(
        workers, g.h, lambda c: sum(c.values()) >= target)
    comm = _allreduce_seconds(g, workers, objective.d, mode)
    total_batch = sum(counts.values())

    x = objective.x0.copy()

    def stats():
        gr = objective.grad(x)
        return objective.f(x), float(np.dot(gr, gr))

    def step(k):
        nonlocal x
        total = np.zeros(objective.d)
        for w in workers:
            if counts[w]:
                total += oracle.gradient_sum(x, w, k, counts[w])
        x = x - (gamma / total_batch) * total
        return elapsed, comm, total_batch

    rows, status, comm_total = _loop(stats, step, max_iters,
                                     target_grad_sq)
    return TrainingTrace("grace", tuple(rows), status, comm_total)


def leon_sgd(g: WeightedGraph, objectives, oracle: StochasticOracle,
             params: ProblemParams, max_iters, gamma=None,
             mode="streamed", target_grad_sq=None):
    """All-workers SGD with the harmonic-mean batch stopping rule.

    Every worker owns one component; accumulation continues until the
    rule fires, then the batch-averaged gradients are averaged again
    across workers and exchanged over trees spanning all workers.
    """
    workers = sorted(_finite_workers(g))
    n = len(workers)
    components = tuple(objectives) if not isinstance(objectives, Objective) \
        else (objectives,)
    if len(components) != n:
        raise ValueError(f"need one component per worker "
                         f"({n} workers, {len(components)} components)")
    L = max(o.L for o in components)
    gamma = 1.0 / (2.0 * L) if gamma is None else gamma
    d = components[0].d

    counts, elapsed = run_gradient_computation(
        workers, g.h,
        lambda c: leon_stop_rule(tuple(c[w] for w in workers), n, params))
    comm = _allreduce_seconds(g, workers, d, mode)
    total_batch = sum(counts.values())

    x = components[0].x0.copy()

    def stats():
        fv = sum(o.f(x) for o in components) / n
        gr = sum(o.grad(x) for o in components) / n
        return fv, float(np.dot(gr, gr))

    def step(k):
        nonlocal x
        mean = np.zeros(d)
        for ci, w in enumerate(workers):
            mean += oracle.gradient_sum(x, w, k, counts[w],
                                        component=ci) / counts[w]
        x = x - gamma * (mean / n)
        return elapsed, comm, total_batch

    rows, status, comm_total = _loop(stats, step, max_iters,
                                     target_grad_sq)
    return TrainingTrace("leon", tuple(rows), status, comm_total)


def sync_sgd(g: WeightedGraph, objective: Objective,
             oracle: StochasticOracle, params: ProblemParams,
             max_iters, gamma=None, batch_size=1, target_grad_sq=None):
    """Lock-step baseline: everyone computes, one naive round per step.

    Each worker contributes ``batch_size`` gradients (so an iteration
    costs h_max·batch_size of compute), then the sum crosses a
    hop-shortest aggregation tree to the lowest-id worker and back.
    """
    gamma = 1.0 / (2.0 * objective.L) if gamma is None else gamma
    workers = sorted(_finite_workers(g))
    if not workers:
        raise ValueError("no computing node")
    counts, elapsed = run_gradient_computation(
        workers, g.h, lambda c: all(c[w] >= batch_size for w in workers))
    if len(g.nodes) > 1 and not _all_infinite_bandwidth(g):
        comm = run_naive_sync_round(g, workers[0],
                                    objective.d).completion_time
    else:
        comm = 0.0
    total_batch = len(workers) * batch_size

    x = objective.x0.copy()

    def stats():
        gr = objective.grad(x)
        return objective.f(x), float(np.dot(gr, gr))

    def step(k):
        nonlocal x
        total = np.zeros(objective.d)
        for w in workers:
            total += oracle.gradient_sum(x, w, k, batch_size)
        x = x - (gamma / total_batch) * total
        return elapsed, comm, total_batch

    rows, status, comm_total = _loop(stats, step, max_iters,
                                     target_grad_sq)
    return TrainingTrace("sync", tuple(rows), status, comm_total)


def hero_sgd(objective: Objective, oracle: StochasticOracle,
             params: ProblemParams, max_iters, h, gamma=None,
             target_grad_sq=None):
    """Single-machine fallback: the fastest worker does everything."""
    gamma = 1.0 / (2.0 * objective.L) if gamma is None else gamma
    finite = {w: v for w, v in h.items() if math.isfinite(v)}
    if not finite:
        raise ValueError("no computing node")
    worker = min(finite, key=lambda w: (finite[w], w))
    target = grace_target_batch(params)
    counts, elapsed = run_gradient_computation(
        [worker], {worker: finite[worker]},
        lambda c: c[worker] >= target)
    batch = counts[worker]

    x = objective.x0.copy()

    def stats():
        gr = objective.grad(x)
        return objective.f(x), float(np.dot(gr, gr))

    def step(k):
        nonlocal x
        total = oracle.gradient_sum(x, worker, k, batch)
        x = x - (gamma / batch) * total
        return elapsed, 0.0, batch

    rows, status, _ = _loop(stats, step, max_iters,
                            target_grad_sq)
    return TrainingTrace("hero", tuple(rows), status, 0.0)
