"""Unfair-edge prioritization and discrimination removal."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .decomposition import FitOptions, FittedCpt, FlowTables, all_flow_tables, fit_all
from .errors import NonConvergence, NotUnfairEdge
from .fitting import Adam, project_simplex
from .graph import Assignment, CausalModel, Edge, _broadcast
from .metrics import cumulative_report, edge_key, family_marginal, unfairness_vector


@dataclass
class PriorityRow:
    edge: Edge
    mu: float
    potential: float
    priority: float


@dataclass
class PriorityList:
    rows: list[PriorityRow]
    w_u: float
    w_p: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["edge", "mu", "potential", "priority"])
        for r in self.rows:
            w.writerow([edge_key(r.edge), repr(r.mu), repr(r.potential), repr(r.priority)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "wu": self.w_u,
            "wp": self.w_p,
            "rows": [{"edge": edge_key(r.edge), "mu": r.mu, "potential": r.potential,
                      "priority": r.priority} for r in self.rows],
        }


def rank_edges(mu: Mapping[Edge, float], potentials: Mapping[Edge, float],
               w_u: float = 0.5, w_p: float = 0.5) -> PriorityList:
    """Weighted score per edge, highest first; ties go to the smaller (from, to)."""
    if w_u < 0 or w_p < 0:
        raise ValueError("priority weights must be nonnegative")
    rows = [PriorityRow(e, mu[e], potentials[e], w_u * mu[e] + w_p * potentials[e]) for e in mu]
    rows.sort(key=lambda r: (-r.priority, r.edge))
    return PriorityList(rows, w_u, w_p)


def compute_priority(model: CausalModel, s: Assignment, y: Assignment, w_u: float = 0.5,
                     w_p: float = 0.5, opts: FitOptions | None = None) -> PriorityList:
    """Fit every non-root node, then rank unfair edges by w_u*mu + w_p*potential."""
    if not model.graph.unfair_edges:
        raise NotUnfairEdge("model has no unfair edges to rank")
    flows = all_flow_tables(model)
    fitted = fit_all(model, opts, flows)
    mu = unfairness_vector(model, fitted, flows)
    report = cumulative_report(model, flows, mu, s, y)
    return rank_edges(mu, {e: r.potential for e, r in report.per_edge.items()}, w_u, w_p)


@dataclass
class RemovalReport:
    new_model: CausalModel
    fitted: dict[str, FittedCpt]
    mu_before: dict[Edge, float]
    mu_after: dict[Edge, float]
    utility_mse: float
    objective: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def sum_mu_before(self) -> float:
        return float(sum(self.mu_before.values()))

    @property
    def sum_mu_after(self) -> float:
        return float(sum(self.mu_after.values()))

    def to_dict(self) -> dict:
        return {
            "sumMuBefore": self.sum_mu_before,
            "sumMuAfter": self.sum_mu_after,
            "muBefore": {edge_key(e): v for e, v in self.mu_before.items()},
            "muAfter": {edge_key(e): v for e, v in self.mu_after.items()},
            "utilityMse": self.utility_mse,
            "converged": self.converged,
            "iterations": len(self.objective) - 1,
            "objective": self.objective,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


class _RemovalProblem:
    """Objective sum_e mu_e(w) + ||P - prod_Z f^w_Z||^2 and its gradient.

    Flows and the mu expectation weights come from the original model and
    stay fixed; only the f^w parameters move. Root CPTs are kept.
    """

    def __init__(self, model: CausalModel, flows: Mapping[str, FlowTables],
                 fitted: Mapping[str, FittedCpt], mu_weight: float, utility_weight: float):
        self.model = model
        self.flows = flows
        self.nets = {n: f.model for n, f in fitted.items()}
        self.nodes = list(self.nets)
        self.inputs = {n: fl.stacked() for n, fl in flows.items()}
        self.cut_inputs = {(a, n): fl.stacked([a]) for n, fl in flows.items() for a in fl.unfair_parents}
        self.weights = {n: family_marginal(model, n) for n in flows}
        self.target = model.joint_table
        self.roots = [n for n in model.names if n not in self.nets]
        self.mu_weight = mu_weight
        self.utility_weight = utility_weight

    def get(self) -> np.ndarray:
        return np.concatenate([self.nets[n].flat for n in self.nodes])

    def set(self, vec: np.ndarray) -> None:
        pos = 0
        for n in self.nodes:
            size = self.nets[n].flat.size
            # in place so any layer views stay bound
            self.nets[n].flat[:] = vec[pos:pos + size]
            pos += size

    def _blocks(self, vec):
        pos = 0
        for n in self.nodes:
            size = self.nets[n].flat.size
            yield n, slice(pos, pos + size)
            pos += size

    def tables(self) -> dict[str, np.ndarray]:
        return {n: self.nets[n].forward(self.inputs[n])[0] for n in self.nodes}

    def broadcast(self, node, table):
        parents = self.model.parents(node)
        arr = table.reshape([self.model.cards[p] for p in parents] + [self.model.cards[node]])
        return _broadcast(self.model.graph, parents + (node,), arr)

    def mu(self) -> dict[Edge, float]:
        out = {}
        for n in self.nodes:
            fl = self.flows[n]
            full = self.nets[n].forward(self.inputs[n])[0]
            for a in fl.unfair_parents:
                cut = self.nets[n].forward(self.cut_inputs[(a, n)])[0]
                out[(a, n)] = float(np.sum(self.weights[n] * np.abs(full - cut) / fl.unfair[a]))
        return out

    def joint(self) -> np.ndarray:
        out = np.ones(self.model.graph.shape)
        for n in self.roots:
            out = out * self.model.broadcast_factor(n)
        for n, t in self.tables().items():
            out = out * self.broadcast(n, t)
        return out

    def value(self) -> float:
        diff = self.target - self.joint()
        return self.mu_weight * sum(self.mu().values()) + self.utility_weight * float(np.sum(diff * diff))

    def gradient(self) -> np.ndarray:
        graph = self.model.graph
        caches, factors = {}, {}
        for n in self.nodes:
            table, caches[n] = self.nets[n].forward(self.inputs[n])
            factors[n] = self.broadcast(n, table)
        base = np.ones(graph.shape)
        for n in self.roots:
            base = base * self.model.broadcast_factor(n)
        p_new = base.copy()
        for f in factors.values():
            p_new = p_new * f
        resid = -2.0 * self.utility_weight * (self.target - p_new)
        grad = np.empty(sum(self.nets[n].flat.size for n in self.nodes))
        for n, sl in self._blocks(grad):
            others = base.copy()
            for m, f in factors.items():
                if m != n:
                    others = others * f
            fam = self.model.parents(n) + (n,)
            keep = {graph.axis[v] for v in fam}
            drop = tuple(i for i in range(len(graph.names)) if i not in keep)
            d_table = (resid * others).sum(axis=drop)
            # summed array has axes in declaration order; reorder to (*parents, node)
            present = sorted(fam, key=graph.axis.__getitem__)
            d_table = np.transpose(d_table, [present.index(v) for v in fam]).reshape(-1, self.model.cards[n])
            net = self.nets[n]
            fl = self.flows[n]
            full = net.forward(self.inputs[n])[0]
            g = np.zeros(net.flat.size)
            for a in fl.unfair_parents:
                cut, cut_cache = net.forward(self.cut_inputs[(a, n)])
                coef = self.mu_weight * self.weights[n] * np.sign(full - cut) / fl.unfair[a]
                d_table = d_table + coef
                g -= net.backward_flat(cut_cache, coef)
            g += net.backward_flat(caches[n], d_table)
            grad[sl] = g
        return grad


def _project(problem: _RemovalProblem, vec: np.ndarray) -> np.ndarray:
    out = vec.copy()
    for _, sl in problem._blocks(vec):
        out[sl] = project_simplex(vec[sl])
    return out


def _solve_linear(problem: _RemovalProblem, opts: FitOptions):
    """Projected gradient with Armijo backtracking on the product of simplices."""
    w = problem.get()
    f = problem.value()
    trace = [f]
    step = 1.0
    for _ in range(opts.removal_iter):
        grad = problem.gradient()
        while True:
            cand = _project(problem, w - step * grad)
            problem.set(cand)
            f_cand = problem.value()
            if f_cand <= f - 1e-4 * float(grad @ (w - cand)) or step < 1e-14:
                break
            step *= 0.5
        if f_cand > f:
            problem.set(w)
            return trace, True
        moved = float(np.max(np.abs(cand - w)))
        w, f = cand, f_cand
        trace.append(f)
        if moved <= opts.tol:
            return trace, True
        step *= 2.0
    return trace, False


def _solve_mlp(problem: _RemovalProblem, opts: FitOptions):
    """Full-batch Adam; the returned trace is the best objective so far.

    The mu terms have kinks, so single Adam steps can go uphill; the best
    iterate is what gets accepted, which keeps the trace non-increasing.
    """
    opt = Adam(lr=opts.step_size)
    best_w = problem.get().copy()
    best = problem.value()
    trace = [best]
    for _ in range(opts.removal_iter):
        problem.set(problem.get() - opt.delta(problem.gradient()))
        f = problem.value()
        if f < best:
            best, best_w = f, problem.get().copy()
        trace.append(best)
    problem.set(best_w)
    return trace, True


def remove_discrimination(model: CausalModel, opts: FitOptions | None = None,
                          mu_weight: float = 1.0, utility_weight: float = 1.0) -> RemovalReport:
    """Jointly refit every f^w to trade total edge unfairness against fidelity to P.

    Starts from the per-node least-squares fits. The new model's CPTs are
    the refitted f^w outputs, so they are normalized by construction.
    """
    opts = opts or FitOptions(kind="mlp")
    if not model.graph.unfair_edges:
        raise NotUnfairEdge("model has no unfair edges to remove")
    flows = all_flow_tables(model)
    fitted = fit_all(model, opts, flows)
    problem = _RemovalProblem(model, flows, fitted, mu_weight, utility_weight)
    mu_before = problem.mu()
    if opts.kind == "linear":
        trace, converged = _solve_linear(problem, opts)
    else:
        trace, converged = _solve_mlp(problem, opts)
    if not converged:
        warnings.warn("removal stopped at the iteration budget", NonConvergence, stacklevel=2)
    tables = problem.tables()
    new_model = model.with_cpts(tables)
    diff = model.joint_table - new_model.joint_table
    return RemovalReport(new_model, dict(fitted), mu_before, problem.mu(),
                         float(np.sum(diff * diff)), trace, converged)
