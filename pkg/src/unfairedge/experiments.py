"""Bail-model experiments: bound vs cumulative unfairness, finite samples,
edge-property stability and linear vs MLP fit quality.

Each experiment returns a ``Table`` whose CSV form is the source of truth;
plots are drawn from the same rows. Randomness is split per task from one
master seed with ``SeedSequence.spawn`` so results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .decomposition import FitOptions, all_flow_tables, fit_all, fit_cpt, flow_tables
from .graph import CausalGraph, CausalModel
from .metrics import cumulative_unfairness, edge_unfairness, unfairness_vector, upper_bound
from .synthesis import (
    ScoreSpec,
    bail_graph,
    cpts_from_scores,
    estimate,
    model_grid,
    random_score_spec,
    sample,
    shipped_score_spec,
    simplex_grid,
)

EXPERIMENTS = ("exp1", "exp2", "edge-property", "model-compare")


@dataclass
class Table:
    name: str
    header: tuple[str, ...]
    rows: list[tuple]

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _run(fn: Callable, tasks: Sequence, jobs: int = 1) -> list:
    """Map ``fn`` over ``tasks`` in order, optionally in a process pool."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _task_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _set_node_theta(graph: CausalGraph, spec: ScoreSpec, node: str,
                    fixed: dict[str, float]) -> ScoreSpec:
    """Pin some parents' theta into ``node``; the rest share what is left
    in proportion to their current values."""
    parents = graph.parents(node)
    free = [p for p in parents if p not in fixed]
    left = 1.0 - sum(fixed.values())
    if left < -1e-12:
        raise ValueError(f"fixed theta into {node!r} exceeds 1")
    updates = {(p, node): float(v) for p, v in fixed.items()}
    if free:
        cur = np.array([spec.theta[(p, node)] for p in free])
        share = cur / cur.sum() if cur.sum() > 0 else np.full(len(free), 1.0 / len(free))
        updates.update({(p, node): float(max(left, 0.0) * s) for p, s in zip(free, share)})
    elif abs(left) > 1e-12:
        raise ValueError(f"theta into {node!r} cannot sum to 1 with every parent pinned")
    return spec.with_theta(updates)


# ----------------------------------------------------------------------
# bound vs cumulative unfairness


def exp1_spec(graph: CausalGraph, spec: ScoreSpec, theta_rj: float,
              theta_re: float = 0.0, theta_gj: float = 0.0) -> ScoreSpec:
    """Every unfair theta is 0 except R->J, R->E and G->J as given.

    L's parents are both sensitive, so zeroing R->L puts all of L's weight
    on A->L; that edge is the one unfair edge that cannot be switched off.
    """
    spec = _set_node_theta(graph, spec, "L", {"R": 0.0, "A": 1.0})
    spec = _set_node_theta(graph, spec, "E", {"R": theta_re, "G": 0.0, "A": 0.0})
    return _set_node_theta(graph, spec, "J", {"R": theta_rj, "G": theta_gj})


def _exp1_point(task):
    panel, other, theta_rj, theta_re, theta_gj, spec_doc, opts = task
    graph = bail_graph()
    spec = exp1_spec(graph, ScoreSpec.from_dict(spec_doc), theta_rj, theta_re, theta_gj)
    model = cpts_from_scores(graph, spec)
    flows = all_flow_tables(model)
    fitted = fit_all(model, opts, flows)
    mu = unfairness_vector(model, fitted, flows)
    s, y = {"R": 0}, {"J": 1}
    c = cumulative_unfairness(model, s, y)
    c_up = upper_bound(model, flows, mu, s, y)
    return (panel, other, theta_rj, c_up, abs(c), mu[("R", "J")])


def exp1(spec: ScoreSpec | None = None, thetas_rj: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
         thetas_re: Sequence[float] = (0.0, 0.1, 0.2, 0.33), thetas_gj: Sequence[float] = (0.0, 0.1, 0.24),
         opts: FitOptions | None = None, jobs: int = 1) -> Table:
    """C^upper and |C| for (R=0, J=1) while sweeping theta_{R->J}.

    Panel ``RE`` varies theta_{R->E} (G->J off), panel ``GJ`` varies
    theta_{G->J} (R->E off).
    """
    spec = spec or shipped_score_spec()
    opts = opts or FitOptions(kind="linear")
    doc = spec.to_dict()
    tasks = []
    for panel, values in (("RE", thetas_re), ("GJ", thetas_gj)):
        for other in values:
            for t in thetas_rj:
                re, gj = (other, 0.0) if panel == "RE" else (0.0, other)
                tasks.append((panel, float(other), float(t), re, gj, doc, opts))
    rows = _run(_exp1_point, tasks, jobs)
    return Table("exp1", ("panel", "theta_other", "theta_rj", "c_upper", "abs_c", "mu_rj"), rows)


# ----------------------------------------------------------------------
# finite samples


def _linear_weights(model: CausalModel, opts: FitOptions) -> np.ndarray:
    fitted = fit_all(model, replace(opts, kind="linear"))
    return np.concatenate([fitted[n].model.weights for n in sorted(fitted)])


def _mu_vector(model: CausalModel, opts: FitOptions) -> np.ndarray:
    flows = all_flow_tables(model)
    fitted = fit_all(model, replace(opts, kind="mlp"), flows)
    mu = unfairness_vector(model, fitted, flows)
    return np.array([mu[e] for e in sorted(mu)])


def _exp2_point(task):
    m, rep, seed, spec_doc, opts, ref_w, ref_mu = task
    graph = bail_graph()
    model = cpts_from_scores(graph, ScoreSpec.from_dict(spec_doc))
    est = estimate(graph, sample(model, m, seed))
    d_l = float(np.linalg.norm(_linear_weights(est, opts) - ref_w))
    d_nl = float(np.linalg.norm(_mu_vector(est, opts) - ref_mu)) if ref_mu is not None else float("nan")
    return (m, rep, d_l, d_nl)


def exp2(spec: ScoreSpec | None = None, sizes: Sequence[int] = (100, 1000, 10000), reps: int = 10,
         seed: int = 0, opts: FitOptions | None = None, nonlinear: bool = True, jobs: int = 1) -> Table:
    """Distance of fitted linear weights (D_L) and MLP edge unfairness (D_NL)
    between the true model and models estimated from m samples."""
    spec = spec or shipped_score_spec()
    opts = opts or FitOptions()
    model = cpts_from_scores(bail_graph(), spec)
    ref_w = _linear_weights(model, opts)
    ref_mu = _mu_vector(model, opts) if nonlinear else None
    seeds = _task_seeds(seed, len(sizes) * reps)
    doc = spec.to_dict()
    tasks = [(int(m), r, seeds[i * reps + r], doc, opts, ref_w, ref_mu)
             for i, m in enumerate(sizes) for r in range(reps)]
    return Table("exp2", ("m", "rep", "d_l", "d_nl"), _run(_exp2_point, tasks, jobs))


def medians_by(table: Table, key: str, value: str) -> dict:
    groups: dict = {}
    for k, v in zip(table.column(key), table.column(value)):
        groups.setdefault(k, []).append(v)
    return {k: float(np.median(v)) for k, v in groups.items()}


# ----------------------------------------------------------------------
# edge-property stability


def _edge_property_point(task):
    parent, theta, draw, seed, opts = task
    graph = bail_graph()
    rng = np.random.default_rng(seed)
    spec = random_score_spec(graph, rng)
    # the other parents of J share the remaining weight at random
    others = [p for p in graph.parents("J") if p != parent]
    rest = rng.dirichlet(np.ones(len(others))) * (1.0 - theta)
    spec = spec.with_theta({(parent, "J"): theta, **{(p, "J"): float(v) for p, v in zip(others, rest)}})
    model = cpts_from_scores(graph, spec)
    fl = {"J": flow_tables(model, "J")}
    lin = fit_cpt(model, "J", replace(opts, kind="linear"), fl["J"])
    mlp = fit_cpt(model, "J", replace(opts, kind="mlp"), fl["J"])
    edge = (parent, "J")
    return (f"{parent}->J", theta, draw, lin.weights[parent],
            edge_unfairness(model, {"J": lin}, fl, edge), edge_unfairness(model, {"J": mlp}, fl, edge))


def edge_property(parents: Sequence[str] = ("R", "G"), thetas: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5),
                  draws: int = 20, seed: int = 0, opts: FitOptions | None = None, jobs: int = 1) -> Table:
    """Fitted w and mu of an edge into J at fixed theta across random lambda draws."""
    opts = opts or FitOptions()
    tasks = [(p, float(t), d) for p in parents for t in thetas for d in range(draws)]
    seeds = _task_seeds(seed, len(tasks))
    tasks = [(p, t, d, s, opts) for (p, t, d), s in zip(tasks, seeds)]
    return Table("edge-property", ("edge", "theta", "draw", "w_linear", "mu_linear", "mu_mlp"),
                 _run(_edge_property_point, tasks, jobs))


# ----------------------------------------------------------------------
# linear vs MLP fit quality


def _compare_point(task):
    index, tj, te, spec_doc, opts = task
    graph = bail_graph()
    (model,) = model_grid(graph, [tj], [te], ScoreSpec.from_dict(spec_doc))
    fl = flow_tables(model, "J")
    lin = fit_cpt(model, "J", replace(opts, kind="linear"), fl)
    mlp = fit_cpt(model, "J", replace(opts, kind="mlp"), fl)
    return (index, lin.fit_mse, mlp.fit_mse)


def model_compare(spec: ScoreSpec | None = None, grid_size: int = 25, seed: int = 0,
                  opts: FitOptions | None = None, jobs: int = 1) -> Table:
    """MSE of the linear and MLP fits of J's CPT over a theta grid for J and E."""
    spec = spec or shipped_score_spec()
    opts = opts or FitOptions()
    graph = bail_graph()
    seed_j, seed_e = _task_seeds(seed, 2)
    grid_j = simplex_grid(graph.parents("J"), grid_size, seed_j)
    grid_e = simplex_grid(graph.parents("E"), grid_size, seed_e)
    doc = spec.to_dict()
    tasks = [(i * grid_size + k, tj, te, doc, opts)
             for i, tj in enumerate(grid_j) for k, te in enumerate(grid_e)]
    return Table("model-compare", ("model", "mse_linear", "mse_mlp"), _run(_compare_point, tasks, jobs))
