import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unfairedge.errors import MismatchedSensitiveSets, NotAParent, OverlappingDoAndTarget, PartialAssignment
from unfairedge.graph import CausalGraph, CausalModel, Cpt, Variable
from unfairedge.inference import (
    direct_effect,
    edge_flow,
    intervene,
    joint,
    marginal,
    total_effect,
)
from unfairedge.synthesis import random_model

import oracle


def test_toy_joint(toy):
    assert joint(toy, {"S": 1, "Y": 1}) == pytest.approx(0.4, abs=1e-15)


def test_toy_marginal(toy):
    assert marginal(toy, {"Y": 1}) == pytest.approx(0.5, abs=1e-15)


def test_toy_intervention(toy):
    assert intervene(toy, {"S": 1}, {"Y": 1}) == pytest.approx(0.8, abs=1e-15)


def test_toy_total_effect(toy):
    assert total_effect(toy, {"Y": 1}, {"S": 1}, {"S": 0}) == pytest.approx(0.6, abs=1e-15)


def test_toy_direct_effect(toy):
    assert direct_effect(toy, {"Y": 1}, {"S": 1}, {"S": 0}) == pytest.approx(0.6, abs=1e-15)


def test_toy_edge_flow(toy):
    flow = edge_flow(toy, "Y", {"S": 1})
    expected = np.exp(0.3) / (np.exp(0.3) + np.exp(-0.3))
    assert flow[1] == pytest.approx(expected, abs=1e-12)
    assert flow[1] == pytest.approx(0.6457, abs=1e-4)


def test_zero_factor_annihilates():
    g = CausalGraph([Variable("A", "01"), Variable("B", "01")], [("A", "B")])
    m = CausalModel(g, {"A": Cpt("A", (), np.array([[0.3, 0.7]])),
                        "B": Cpt("B", ("A",), np.array([[1.0, 0.0], [0.4, 0.6]]))})
    assert joint(m, {"A": 0, "B": 1}) == 0.0


def test_bail_joint_sums_to_one(bail):
    total = sum(joint(bail, dict(zip(bail.names, v)))
                for v in itertools.product(*(range(bail.cards[n]) for n in bail.names)))
    assert total == pytest.approx(1.0, abs=1e-9)
    assert bail.joint_table.size == 288


def test_partial_joint_is_rejected(toy):
    with pytest.raises(PartialAssignment):
        joint(toy, {"S": 1})


def test_full_marginal_equals_joint(bail):
    full = {n: 0 for n in bail.names}
    assert marginal(bail, full) == pytest.approx(joint(bail, full), abs=1e-15)


def test_root_marginal_is_prior(bail):
    assert marginal(bail, {"R": 2}) == pytest.approx(bail.cpts["R"].table[0, 2], abs=1e-15)


def test_intervening_on_sink_leaves_marginal(bail):
    assert intervene(bail, {"J": 1}, {"E": 0}) == pytest.approx(marginal(bail, {"E": 0}), abs=1e-14)


def test_intervening_on_root_is_conditioning(bail):
    cond = marginal(bail, {"R": 1, "J": 1}) / marginal(bail, {"R": 1})
    assert intervene(bail, {"R": 1}, {"J": 1}) == pytest.approx(cond, abs=1e-14)


def test_overlap_is_rejected(toy):
    with pytest.raises(OverlappingDoAndTarget):
        intervene(toy, {"S": 1}, {"S": 1})


def test_total_effect_identity_and_antisymmetry(bail):
    assert total_effect(bail, {"J": 1}, {"R": 1}, {"R": 1}) == 0.0
    a = total_effect(bail, {"J": 1}, {"R": 0}, {"R": 2})
    b = total_effect(bail, {"J": 1}, {"R": 2}, {"R": 0})
    assert a == pytest.approx(-b, abs=1e-15)


def test_total_effect_needs_matching_sets(bail):
    with pytest.raises(MismatchedSensitiveSets):
        total_effect(bail, {"J": 1}, {"R": 0}, {"G": 0})


def test_direct_effect_without_contrast_is_zero(bail):
    assert direct_effect(bail, {"J": 1}, {"R": 1, "G": 0}, {"R": 1, "G": 0}) == pytest.approx(0.0, abs=1e-15)


def test_direct_effect_of_vacuous_edge_is_zero():
    # Y ignores A: both rows of each A block are identical
    g = CausalGraph([Variable(n, "01") for n in "ABY"], [("A", "Y"), ("B", "Y")], ["A"])
    table = np.array([[0.9, 0.1], [0.3, 0.7], [0.9, 0.1], [0.3, 0.7]])
    m = CausalModel(g, {"A": Cpt("A", (), np.array([[0.4, 0.6]])), "B": Cpt("B", (), np.array([[0.2, 0.8]])),
                        "Y": Cpt("Y", ("A", "B"), table)})
    for a, ap in itertools.product(range(2), repeat=2):
        assert direct_effect(m, {"Y": 1}, {"A": a}, {"A": ap}) == pytest.approx(0.0, abs=1e-15)


def test_direct_effect_rejects_non_parent(bail):
    with pytest.raises(NotAParent):
        direct_effect(bail, {"J": 1}, {"A": 0}, {"A": 1})


def test_constant_effects_give_uniform_flow():
    g = CausalGraph([Variable("A", "01"), Variable("Y", "012")], [("A", "Y")], ["A"])
    m = CausalModel(g, {"A": Cpt("A", (), np.array([[0.4, 0.6]])),
                        "Y": Cpt("Y", ("A",), np.array([[0.2, 0.3, 0.5]] * 2))})
    np.testing.assert_allclose(edge_flow(m, "Y", {"A": 0}).probs, 1 / 3, atol=1e-15)


def test_direct_effect_equals_total_effect_on_chain():
    # S -> Y only: all effect is along the direct edge
    rng = np.random.default_rng(7)
    g = CausalGraph([Variable("S", "012"), Variable("Y", "01")], [("S", "Y")], ["S"])
    m = CausalModel(g, {"S": Cpt("S", (), rng.dirichlet(np.ones(3))[None]),
                        "Y": Cpt("Y", ("S",), rng.dirichlet(np.ones(2), size=3))})
    for s, sp in itertools.permutations(range(3), 2):
        assert direct_effect(m, {"Y": 1}, {"S": s}, {"S": sp}) == pytest.approx(
            total_effect(m, {"Y": 1}, {"S": s}, {"S": sp}), abs=1e-15)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_intervention_matches_mutilated_graph(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, max_card=2)
    names = list(m.names)
    do_names = list(rng.choice(names, size=rng.integers(1, len(names)), replace=False))
    do = {n: int(rng.integers(m.cards[n])) for n in do_names}
    rest = [n for n in names if n not in do]
    target = {n: int(rng.integers(m.cards[n])) for n in rest[: rng.integers(1, len(rest) + 1)]}
    assert intervene(m, do, target) == pytest.approx(oracle.intervene(m, do, target), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_interventional_distribution_sums_to_one(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    x = m.names[0]
    y = m.names[-1]
    total = sum(intervene(m, {x: 0}, {y: v}) for v in range(m.cards[y]))
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_edge_flow_is_positive_distribution_and_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, n_nodes=4)
    node = next((n for n in m.names if m.parents(n)), None)
    if node is None:
        return
    pa = m.parents(node)
    sub = list(pa[: rng.integers(1, len(pa) + 1)])
    val = {p: int(rng.integers(m.cards[p])) for p in sub}
    flow = edge_flow(m, node, val).probs
    assert np.all(flow > 0) and flow.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(flow, oracle.edge_flow(m, node, val), atol=1e-12)


def test_results_do_not_depend_on_declaration_order(bail):
    perm = [bail.graph.variable(n) for n in reversed(bail.names)]
    g = CausalGraph(perm, bail.edges, bail.sensitive)
    other = CausalModel(g, bail.cpts)
    for do, target in [({"R": 0}, {"J": 1}), ({"G": 2, "A": 1}, {"E": 0, "J": 0})]:
        assert intervene(other, do, target) == pytest.approx(intervene(bail, do, target), abs=1e-15)
    np.testing.assert_allclose(edge_flow(other, "J", {"L": 1, "E": 0, "C": 1}).probs,
                               edge_flow(bail, "J", {"L": 1, "E": 0, "C": 1}).probs, atol=1e-15)
