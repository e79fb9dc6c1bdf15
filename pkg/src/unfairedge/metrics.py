"""Edge unfairness, cumulative unfairness and its upper bound."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .decomposition import FittedCpt, FlowTables, predict_table
from .errors import IncompleteSensitiveAssignment, MissingMu, NotUnfairEdge
from .graph import Assignment, CausalModel, Edge, _broadcast
from .inference import intervene, marginal_table

ZERO_TOL = 1e-9
EPS = 1e-12


def edge_key(edge: Edge) -> str:
    return f"{edge[0]}->{edge[1]}"


def parse_edge(text: str) -> Edge:
    a, _, b = text.partition("->")
    return a.strip(), b.strip()


def family_marginal(model: CausalModel, node: str) -> np.ndarray:
    """P(x, pa(X)) as a ``(n_rows, card)`` table in CPT row order."""
    names = list(model.parents(node)) + [node]
    return marginal_table(model, names).reshape(-1, model.cards[node])


def edge_unfairness(model: CausalModel, fitted: Mapping[str, FittedCpt],
                    flows: Mapping[str, FlowTables], edge: Edge,
                    weights: np.ndarray | None = None) -> float:
    """Expected per-unit-flow change of f^w when the flow along ``edge`` is removed.

    ``weights`` overrides the P(x, pa) expectation weights.
    """
    k, x = edge
    if k not in model.sensitive or edge not in model.edges:
        raise NotUnfairEdge(f"{edge_key(edge)} is not an unfair edge")
    f, fl = fitted[x], flows[x]
    full = predict_table(f, fl)
    cut = predict_table(f, fl, zeroed=[k])
    p = family_marginal(model, x) if weights is None else weights
    return float(np.sum(p * np.abs(full - cut) / fl.unfair[k]))


def unfairness_vector(model: CausalModel, fitted: Mapping[str, FittedCpt],
                      flows: Mapping[str, FlowTables]) -> dict[Edge, float]:
    return {e: edge_unfairness(model, fitted, flows, e) for e in model.graph.unfair_edges}


def _check_query(model: CausalModel, s: Assignment, y: Assignment) -> tuple[dict, tuple[str, int]]:
    s = model.graph.parse_assignment(s)
    y = model.graph.parse_assignment(y)
    if not s:
        raise IncompleteSensitiveAssignment("s binds no sensitive node")
    outside = [n for n in s if n not in model.sensitive]
    if outside:
        raise IncompleteSensitiveAssignment(f"{outside} are not sensitive nodes")
    if len(y) != 1:
        raise ValueError("y must bind exactly the decision node")
    (yname, yval), = y.items()
    if yname in s:
        raise ValueError("the decision node cannot be sensitive in the query")
    return s, (yname, yval)


def _alternatives(model: CausalModel, s: dict[str, int]):
    """(s', P(s')) over every joint assignment of s's variables other than s."""
    names = list(s)
    p = marginal_table(model, names)
    for values in itertools.product(*(range(model.cards[n]) for n in names)):
        alt = dict(zip(names, values))
        if alt != s:
            yield alt, float(p[values])


def cumulative_unfairness(model: CausalModel, s: Assignment, y: Assignment) -> float:
    """C = sum over s' != s of P(s') TE_y(s, s')."""
    s, (yname, yval) = _check_query(model, s, y)
    target = {yname: yval}
    base = intervene(model, s, target)
    return float(sum(p * (base - intervene(model, alt, target)) for alt, p in _alternatives(model, s)))


@dataclass
class BoundDiagnostics:
    guarded_terms: int = 0


def _node_term(model: CausalModel, flows: FlowTables, mu: Mapping[Edge, float],
               diag: BoundDiagnostics) -> np.ndarray:
    """sum over A in U_V of flow_A(v) mu_{A->V} / P(v, pa(V)), per (row, v)."""
    node = flows.node
    denom = family_marginal(model, node)
    out = np.zeros_like(denom)
    for a in flows.unfair_parents:
        try:
            m = mu[(a, node)]
        except KeyError:
            raise MissingMu(f"no edge unfairness for {a}->{node}") from None
        num = flows.unfair[a] * m
        live = num > EPS
        guarded = live & (denom < EPS)
        diag.guarded_terms += int(guarded.sum())
        out += np.where(live, num / np.maximum(denom, EPS), 0.0)
    return out


def _pin(model: CausalModel, arr: np.ndarray, values: Mapping[str, int]) -> np.ndarray:
    """Slice the named axes of a broadcastable array at ``values`` (kept as size 1)."""
    idx = [slice(None)] * arr.ndim
    for n, v in values.items():
        ax = model.graph.axis[n]
        if arr.shape[ax] > 1:
            idx[ax] = slice(v, v + 1)
    return arr[tuple(idx)]


def upper_bound(model: CausalModel, flows: Mapping[str, FlowTables], mu: Mapping[Edge, float],
                s: Assignment, y: Assignment, diagnostics: BoundDiagnostics | None = None) -> float:
    """C^upper for the query (s, y); linear in each mu coordinate.

    Sum over s' != s of P(s') times the sum, over the free variables with
    the decision pinned to y, of the product of per-node factors. A node
    with unfair parents contributes its flow/marginal term evaluated once
    with the queried sensitive coordinates overridden by s and once by s';
    other nodes contribute 1. With no unfair parent outside s at all the
    bound is 0 (and so is C).
    """
    s, (yname, yval) = _check_query(model, s, y)
    diag = diagnostics if diagnostics is not None else BoundDiagnostics()
    terms = []
    for node in model.names:
        if node in s or node not in flows or not flows[node].unfair_parents:
            continue
        fl = flows[node]
        table = _node_term(model, fl, mu, diag)
        arr = table.reshape([model.cards[p] for p in fl.parents] + [model.cards[node]])
        terms.append(_broadcast(model.graph, fl.parents + (node,), arr))
    if not terms:
        # every edge out of s ends inside s, so nothing outside s depends on it
        return 0.0

    shape = [1 if n in s else model.cards[n] for n in model.names]
    total = 0.0
    for alt, p_alt in _alternatives(model, s):
        prod = np.ones(shape)
        for b in terms:
            prod = prod * (_pin(model, b, s) + _pin(model, b, alt))
        total += p_alt * float(_pin(model, prod, {yname: yval}).sum())
    return total


def sensitivity(model: CausalModel, flows: Mapping[str, FlowTables], mu: Mapping[Edge, float],
                edge: Edge, s: Assignment, y: Assignment, h: float = 1.0) -> float:
    """dC^upper/dmu_e at the current mu, by an exact forward difference."""
    if edge not in mu:
        raise MissingMu(f"no edge unfairness for {edge_key(edge)}")
    base = upper_bound(model, flows, mu, s, y)

    def slope(step):
        bumped = dict(mu)
        bumped[edge] = mu[edge] + step
        return (upper_bound(model, flows, bumped, s, y) - base) / step

    value = slope(h)
    check = slope(h / 2)
    # C^upper is degree one in each coordinate, so the slope cannot depend on h
    assert math.isclose(value, check, rel_tol=1e-6, abs_tol=1e-9 * max(1.0, abs(base))), (value, check)
    return value


def potential(sens: float, c_upper: float) -> float:
    """Potential to mitigate: -|S| when the bound is already 0, S otherwise."""
    return -abs(sens) if c_upper <= ZERO_TOL else sens


@dataclass
class EdgeReport:
    mu: float
    sensitivity: float
    potential: float


@dataclass
class CumulativeReport:
    s: dict[str, int]
    y: dict[str, int]
    c: float
    c_upper: float
    per_edge: dict[Edge, EdgeReport] = field(default_factory=dict)
    guarded_terms: int = 0

    @property
    def bound_holds(self) -> bool:
        return abs(self.c) <= self.c_upper + 1e-9

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "y": self.y,
            "c": self.c,
            "cUpper": self.c_upper,
            "boundHolds": self.bound_holds,
            "guardedTerms": self.guarded_terms,
            "edges": {edge_key(e): vars(r) for e, r in self.per_edge.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["edge", "mu", "sensitivity", "potential"])
        for e, r in self.per_edge.items():
            w.writerow([edge_key(e), repr(r.mu), repr(r.sensitivity), repr(r.potential)])
        return buf.getvalue()


def cumulative_report(model: CausalModel, flows: Mapping[str, FlowTables], mu: Mapping[Edge, float],
                      s: Assignment, y: Assignment) -> CumulativeReport:
    s_idx, (yname, yval) = _check_query(model, s, y)
    diag = BoundDiagnostics()
    c = cumulative_unfairness(model, s_idx, {yname: yval})
    c_up = upper_bound(model, flows, mu, s_idx, {yname: yval}, diag)
    report = CumulativeReport(s_idx, {yname: yval}, c, c_up, guarded_terms=diag.guarded_terms)
    for e in model.graph.unfair_edges:
        sens = sensitivity(model, flows, mu, e, s_idx, {yname: yval})
        report.per_edge[e] = EdgeReport(mu[e], sens, potential(sens, c_up))
    return report
