import json
import math

import numpy as np
import pytest

from flowsgd import (ProblemParams, StochasticOracle, build_graph,
                     grace_sgd, hero_sgd, leon_sgd, make_objective,
                     run_naive_sync_round, sync_sgd)
from flowsgd import topologies

import oracles
from conftest import LINE_SPEC


def params(d=16.0, sigma2=0.0, epsilon=0.1, L=1.0, delta=1.0):
    return ProblemParams(d=d, sigma2=sigma2, epsilon=epsilon, L=L,
                         delta=delta)


def quadratic(d=16, **kw):
    return make_objective("quadratic", d, **kw)


# == objectives and the oracle ==

def test_quadratic_starts_at_the_requested_gap():
    obj = quadratic(d=12, L=2.0, delta=3.0, seed=5)
    assert obj.f(obj.x0) - obj.f_star == pytest.approx(3.0, rel=1e-12)
    g0 = obj.grad(obj.x0)
    # ||grad||^2 = 2 L delta for a quadratic started delta above the min
    assert float(g0 @ g0) == pytest.approx(2.0 * 2.0 * 3.0, rel=1e-12)


def test_quadratic_components_average_to_mean_center():
    comps = quadratic(d=8, n_components=3, seed=1)
    assert len(comps) == 3
    mean_grad = sum(o.grad(comps[0].x0) for o in comps) / 3
    centers_mean = comps[0].x0 - mean_grad  # L = 1
    for o in comps:
        assert np.allclose(o.x0, comps[0].x0)
    assert np.allclose(sum(o.grad(centers_mean) for o in comps), 0.0,
                       atol=1e-12)


def test_logreg_gradient_matches_central_differences():
    obj = make_objective("synthetic_logreg", 6, seed=3, n_samples=48)
    x = obj.x0 + 0.1
    num = oracles.central_difference_grad(obj.f, x)
    assert np.max(np.abs(num - obj.grad(x))) < 1e-5
    assert obj.delta > 0


def test_logreg_components_partition_the_samples():
    full = make_objective("synthetic_logreg", 5, seed=7, n_samples=30)
    parts = make_objective("synthetic_logreg", 5, seed=7, n_samples=30,
                           n_components=3)
    x = np.linspace(-0.5, 0.5, 5)
    assert sum(o.f(x) for o in parts) / 3 == pytest.approx(full.f(x),
                                                           rel=1e-12)
    assert np.allclose(sum(o.grad(x) for o in parts) / 3, full.grad(x))
    with pytest.raises(ValueError):
        make_objective("synthetic_logreg", 5, n_samples=10, n_components=3)
    with pytest.raises(ValueError):
        make_objective("parabola", 4)


def test_oracle_streams_are_reproducible():
    obj = quadratic(d=10)
    oracle = StochasticOracle(obj, sigma2=2.0, seed=9)
    x = obj.x0
    a = oracle.gradient_sum(x, worker=3, iteration=7, count=2)
    b = oracle.gradient_sum(x, worker=3, iteration=7, count=2)
    c = oracle.gradient_sum(x, worker=3, iteration=8, count=2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_oracle_noise_statistics():
    d = 25
    obj = quadratic(d=d)
    oracle = StochasticOracle(obj, sigma2=2.5, seed=0)
    x = obj.x0
    true = obj.grad(x)
    errs = []
    for k in range(4000):
        g = oracle.gradient_sum(x, worker=1, iteration=k, count=1) - true
        errs.append(g)
    errs = np.array(errs)
    assert np.abs(errs.mean(axis=0)).max() < 0.05
    assert np.mean((errs ** 2).sum(axis=1)) == pytest.approx(2.5, rel=0.10)


def test_oracle_rejects_bad_variance():
    with pytest.raises(ValueError):
        StochasticOracle(quadratic(), sigma2=-1.0)


# == method behaviour on the quadratic ==

def test_noiseless_grace_contracts_geometrically():
    g = topologies.star(4, b=100.0)
    obj = quadratic(d=8, delta=2.0)
    p = params(d=8.0, sigma2=0.0, delta=2.0)
    oracle = StochasticOracle(obj, sigma2=0.0)
    trace = grace_sgd(g, obj, oracle, p, max_iters=60,
                      target_grad_sq=1e-20)
    assert trace.status == "reached_target"
    grads = [r[2] for r in trace.rows]
    assert all(b < a for a, b in zip(grads, grads[1:]))
    fs = [r[3] for r in trace.rows]
    assert all(b <= a for a, b in zip(fs, fs[1:]))


def test_trace_times_strictly_increase():
    g = topologies.star(3, b=1.0)
    obj = quadratic(d=8)
    p = params(d=8.0, sigma2=1.0)
    trace = grace_sgd(g, obj, StochasticOracle(obj, 1.0), p, max_iters=5,
                      subset=g.nodes)
    times = [r[1] for r in trace.rows]
    assert times[0] == 0.0
    assert all(b > a for a, b in zip(times, times[1:]))
    assert trace.final_time() == times[-1]
    assert trace.comm_seconds > 0


def test_single_node_run_never_communicates():
    g = build_graph({"nodes": [{"id": 1, "h": 2.0}], "links": []})
    obj = quadratic(d=4)
    p = params(d=4.0, sigma2=1.0)
    trace = grace_sgd(g, obj, StochasticOracle(obj, 1.0), p, max_iters=3)
    assert trace.comm_seconds == 0.0


def test_grace_on_one_worker_is_hero():
    g = topologies.star(4, b=2.0)  # equal h; hero picks lowest id
    obj = quadratic(d=8)
    p = params(d=8.0, sigma2=2.0)
    oracle = StochasticOracle(obj, 2.0, seed=4)
    alone = grace_sgd(g, obj, oracle, p, max_iters=6, subset={1})
    hero = hero_sgd(obj, oracle, p, max_iters=6, h=g.h)
    assert alone.rows == hero.rows
    assert alone.comm_seconds == hero.comm_seconds == 0.0


def test_grace_subset_must_compute():
    spec = {"nodes": [{"id": 1, "h": 1.0}, {"id": 2, "h": "inf"}],
            "links": [{"a": 1, "b": 2, "bandwidth": 1.0}]}
    g = build_graph(spec)
    obj = quadratic(d=4)
    with pytest.raises(ValueError):
        grace_sgd(g, obj, StochasticOracle(obj, 0.0), params(d=4.0),
                  max_iters=2, subset={2})


def test_leon_matches_grace_with_identical_components():
    g = topologies.all_to_all(2, b=2.0)
    obj = quadratic(d=4)
    p = params(d=4.0, sigma2=0.4, epsilon=0.1)  # target batch 4
    oracle = StochasticOracle(obj, 0.4, seed=2)
    grace = grace_sgd(g, obj, oracle, p, max_iters=5)
    leon = leon_sgd(g, (obj, obj), StochasticOracle((obj, obj), 0.4, seed=2),
                    p, max_iters=5)
    for a, b in zip(grace.rows, leon.rows):
        assert a[0] == b[0]
        assert a[1] == pytest.approx(b[1])
        assert a[2] == pytest.approx(b[2], rel=1e-9)


def test_leon_needs_one_component_per_worker(five_node):
    obj = quadratic(d=4)
    with pytest.raises(ValueError, match="component"):
        leon_sgd(five_node, (obj, obj), StochasticOracle(obj, 0.0),
                 params(d=4.0), max_iters=1)


def test_leon_finds_the_heterogeneous_stationary_point():
    g = topologies.all_to_all(2, b=10.0)
    comps = quadratic(d=6, n_components=2, seed=11)
    p = params(d=6.0, sigma2=0.0)
    trace = leon_sgd(g, comps, StochasticOracle(comps, 0.0), p,
                     max_iters=80, target_grad_sq=1e-18)
    assert trace.status == "reached_target"
    assert trace.min_grad_sq() <= 1e-18


def test_leon_iteration_cost_splits_compute_and_comm():
    g = topologies.all_to_all(2, b=2.0)
    comps = quadratic(d=4, n_components=2, seed=1)
    p = params(d=4.0, sigma2=0.4, epsilon=0.1)  # harmonic target => B=(2,2)
    trace = leon_sgd(g, comps, StochasticOracle(comps, 0.4), p, max_iters=4)
    dts = [b[1] - a[1] for a, b in zip(trace.rows, trace.rows[1:])]
    comm_per_iter = trace.comm_seconds / 4
    assert all(dt == pytest.approx(2.0 + comm_per_iter) for dt in dts)
    assert trace.rows[1][4] == 4  # total batch per iteration


def test_sync_iteration_cost_is_slowest_worker_plus_round():
    spec = {"nodes": [{"id": 1, "h": 1.5}, {"id": 2, "h": 2.0}],
            "links": [{"a": 1, "b": 2, "bandwidth": 1.0}]}
    g = build_graph(spec)
    obj = quadratic(d=64)
    p = params(d=64.0, sigma2=1.0)
    trace = sync_sgd(g, obj, StochasticOracle(obj, 1.0), p, max_iters=3)
    round_time = run_naive_sync_round(g, 1, 64).completion_time
    dt = trace.rows[1][1] - trace.rows[0][1]
    assert dt == pytest.approx(2.0 + round_time)
    assert trace.rows[1][4] == 2


def test_hero_runs_on_the_fastest_worker():
    obj = quadratic(d=4)
    p = params(d=4.0, sigma2=0.4, epsilon=0.1)  # batch target 4
    trace = hero_sgd(obj, StochasticOracle(obj, 0.4), p, max_iters=3,
                     h={1: 3.0, 2: 1.0, 3: 5.0})
    dt = trace.rows[1][1] - trace.rows[0][1]
    assert dt == pytest.approx(4.0)  # 4 gradients at h = 1
    assert trace.comm_seconds == 0.0
    with pytest.raises(ValueError):
        hero_sgd(obj, StochasticOracle(obj, 0.0), p, max_iters=1,
                 h={1: math.inf})


def test_store_and_forward_costs_more_on_a_path():
    g = build_graph(json.loads(json.dumps(LINE_SPEC)))
    obj = quadratic(d=64)
    p = params(d=64.0, sigma2=0.0)
    oracle = StochasticOracle(obj, 0.0)
    fast = grace_sgd(g, obj, oracle, p, max_iters=2, subset=g.nodes)
    slow = grace_sgd(g, obj, oracle, p, max_iters=2, subset=g.nodes,
                     mode="store_and_forward")
    assert slow.comm_seconds > fast.comm_seconds
    assert [r[2] for r in slow.rows] == [r[2] for r in fast.rows]


def test_target_stops_the_run_early():
    g = topologies.star(3, b=5.0)
    obj = quadratic(d=4)
    p = params(d=4.0)
    trace = grace_sgd(g, obj, StochasticOracle(obj, 0.0), p, max_iters=50,
                      target_grad_sq=1e9)
    assert trace.status == "reached_target"
    assert len(trace.rows) == 2  # initial point plus the one checked step


def test_trace_csv_round_trip(tmp_path):
    g = topologies.star(3, b=5.0)
    obj = quadratic(d=4)
    p = params(d=4.0, sigma2=1.0)
    t1 = grace_sgd(g, obj, StochasticOracle(obj, 1.0, seed=8), p, max_iters=4)
    t2 = grace_sgd(g, obj, StochasticOracle(obj, 1.0, seed=8), p, max_iters=4)
    assert t1.csv_bytes() == t2.csv_bytes()
    out = tmp_path / "trace.csv"
    t1.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "iter,sim_time_s,grad_norm_sq,f_value,total_batch"
    assert len(lines) == len(t1.rows) + 1
    assert t1.time_to_value(t1.rows[-1][3]) is not None
    assert t1.time_to_value(-1.0) is None


def test_theoretical_iteration_budget_suffices():
    # smooth case: K = ceil(4 L delta / eps) steps reach 2 eps
    g = topologies.star(8, b=100.0)
    p = params(d=16.0, sigma2=1.6, epsilon=0.1, delta=8.0)
    budget = math.ceil(4 * p.L * p.delta / p.epsilon)
    for seed in range(3):
        obj = quadratic(d=16, delta=8.0, seed=seed)
        trace = grace_sgd(g, obj, StochasticOracle(obj, 1.6, seed=seed), p,
                          max_iters=budget, target_grad_sq=2 * p.epsilon)
        assert trace.status == "reached_target"
