import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from flowsgd import (build_graph, min_S_cut, min_S_cut_multigraph,
                     pack_steiner_trees, unit_multigraph, verify_packing)
from flowsgd.steiner_packing import SteinerTree

import oracles
from conftest import SWITCH_SPEC, random_graph_spec, spec_edges
from flowsgd import topologies


def _pack(g, S, strategy="auto"):
    mg = unit_multigraph(g)
    return pack_steiner_trees(mg, tuple(sorted(S)), strategy=strategy), mg


def test_switch_graph_packs_three_trees(switch_graph):
    packing, mg = _pack(switch_graph, (1, 2, 6))
    report = verify_packing(packing, mg, (1, 2, 6))
    assert report.valid, report.problems
    assert packing.p == 3
    assert packing.alpha == 3
    assert report.ratio == 1.0


def test_switch_graph_multigraph_cut(switch_graph):
    mg = unit_multigraph(switch_graph)
    assert min_S_cut_multigraph(mg, (1, 2, 6)) == 3


def test_multigraph_cut_scales(five_node):
    mg = unit_multigraph(five_node)
    assert min_S_cut_multigraph(mg, five_node.nodes) == 1
    doubled = replace(mg, scale=2 * mg.scale,
                      multiplicity={k: 2 * m
                                    for k, m in mg.multiplicity.items()})
    assert min_S_cut_multigraph(doubled, five_node.nodes) == 2


def test_star_reaches_the_cut_exactly():
    g = topologies.star(6, b=3.0)
    packing, mg = _pack(g, g.nodes)
    assert packing.p == 3 == min_S_cut_multigraph(mg, g.nodes)
    assert verify_packing(packing, mg, g.nodes).valid


def test_torus_packs_four_directional_trees():
    g = topologies.p_torus(5, b=1.0)
    packing, mg = _pack(g, g.nodes)
    assert packing.p == 4
    report = verify_packing(packing, mg, g.nodes)
    assert report.valid, report.problems


def test_singleton_terminal_set_is_empty_packing(five_node):
    packing, mg = _pack(five_node, (3,))
    assert packing.p == 0
    assert packing.trees == ()


def test_verifier_catches_duplicate_instance(switch_graph):
    packing, mg = _pack(switch_graph, (1, 2, 6))
    crooked = replace(packing, trees=packing.trees + (packing.trees[0],))
    report = verify_packing(crooked, mg, (1, 2, 6))
    assert not report.valid
    assert any("twice" in p for p in report.problems)


def test_verifier_catches_missing_terminal(switch_graph):
    packing, mg = _pack(switch_graph, (1, 2, 6))
    pruned = replace(packing, trees=packing.trees[:-1] + (
        SteinerTree(tuple(e for e in packing.trees[-1].edges
                          if 6 not in e[:2])),))
    report = verify_packing(pruned, mg, (1, 2, 6))
    assert not report.valid
    assert any("not covered" in p for p in report.problems)


def test_verifier_catches_alien_instance(switch_graph):
    packing, mg = _pack(switch_graph, (1, 2, 6))
    forged = replace(packing, trees=packing.trees[:-1] + (
        SteinerTree(packing.trees[-1].edges[:-1] + ((1, 6, 99),)),))
    report = verify_packing(forged, mg, (1, 2, 6))
    assert not report.valid
    assert any("not in multigraph" in p for p in report.problems)


def test_removing_a_tree_keeps_the_packing_valid(switch_graph):
    packing, mg = _pack(switch_graph, (1, 2, 6))
    for drop in range(packing.p):
        fewer = replace(packing, trees=tuple(
            t for i, t in enumerate(packing.trees) if i != drop))
        assert verify_packing(fewer, mg, (1, 2, 6)).valid


def test_complete_graph_spanning_regime():
    for n in (4, 5, 6, 7):
        g = topologies.all_to_all(n, b=1.0)
        packing, mg = _pack(g, g.nodes)
        assert packing.p >= n // 2
        assert verify_packing(packing, mg, g.nodes).valid


def test_greedy_strategy_agrees_with_verifier(five_node):
    packing, mg = _pack(five_node, five_node.nodes, strategy="greedy")
    report = verify_packing(packing, mg, five_node.nodes)
    assert report.valid, report.problems
    assert packing.p >= 1


@given(st.integers(min_value=0, max_value=10 ** 6), st.data())
@settings(max_examples=80)
def test_random_packings_verify_and_respect_the_cut(seed, data):
    spec = random_graph_spec(random.Random(seed), n_max=7, w_max=4)
    g = build_graph(spec)
    S = tuple(sorted(data.draw(
        st.sets(st.sampled_from(sorted(g.nodes)), min_size=2))))
    mg = unit_multigraph(g)
    packing = pack_steiner_trees(mg, S)
    report = verify_packing(packing, mg, S)
    assert report.valid, report.problems
    alpha = min_S_cut_multigraph(mg, S)
    assert packing.p <= alpha
    assert packing.p >= 1
    assert packing.p >= math.ceil(alpha / 26)
    # and the multigraph cut really is the scaled bandwidth cut
    ref = oracles.brute_force_min_s_cut(g.nodes, spec_edges(spec), S)
    assert math.isclose(alpha, mg.scale * ref, rel_tol=1e-9)
