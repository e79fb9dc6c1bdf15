"""Synthetic models: the bail graph, score-built CPTs, grids, samples."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyDataset, IncompleteSpec, InvalidGridPoint, MarginalityViolated
from .graph import CausalGraph, CausalModel, Cpt, Edge, Variable

MARGIN_TOL = 1e-9

BAIL_DOMAINS = {
    "R": ("African American", "Hispanic", "White"),
    "A": ("Old", "Young"),
    "G": ("Male", "Female", "Others"),
    "L": ("Literate", "Illiterate"),
    "E": ("Not Employed", "Employed"),
    "C": ("Strong", "Weak"),
    "J": ("Bail granted", "Bail rejected"),
}
BAIL_EDGES = (
    ("R", "L"), ("A", "L"),
    ("R", "E"), ("G", "E"), ("A", "E"), ("L", "E"),
    ("R", "J"), ("G", "J"), ("L", "J"), ("E", "J"), ("C", "J"),
)
BAIL_SENSITIVE = frozenset({"R", "A", "G"})


def bail_graph() -> CausalGraph:
    """The seven-node bail decision skeleton (no CPTs)."""
    variables = [Variable(n, d) for n, d in BAIL_DOMAINS.items()]
    return CausalGraph(variables, BAIL_EDGES, BAIL_SENSITIVE)


def _key(edge: Edge) -> str:
    return f"{edge[0]}->{edge[1]}"


@dataclass
class ScoreSpec:
    """Edge weights theta and value scores lambda; optional priors for roots.

    ``lam[(A, V)]`` has shape ``(card A, card V)``; each row sums to one.
    """

    theta: dict[Edge, float]
    lam: dict[Edge, np.ndarray]
    prior: dict[str, np.ndarray] = field(default_factory=dict)

    def with_theta(self, updates: Mapping[Edge, float]) -> "ScoreSpec":
        theta = dict(self.theta)
        theta.update(updates)
        return ScoreSpec(theta, self.lam, self.prior)

    def to_dict(self) -> dict:
        return {
            "theta": {_key(e): float(v) for e, v in self.theta.items()},
            "lambda": {_key(e): np.asarray(v).tolist() for e, v in self.lam.items()},
            "prior": {n: np.asarray(v).tolist() for n, v in self.prior.items()},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ScoreSpec":
        def edge(k):
            a, _, b = k.partition("->")
            return a.strip(), b.strip()

        return cls(
            {edge(k): float(v) for k, v in doc["theta"].items()},
            {edge(k): np.asarray(v, dtype=float) for k, v in doc["lambda"].items()},
            {n: np.asarray(v, dtype=float) for n, v in doc.get("prior", {}).items()},
        )


def read_score_spec(path: str | Path) -> ScoreSpec:
    return ScoreSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_score_spec(spec: ScoreSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")


def shipped_score_spec() -> ScoreSpec:
    """The fixed seeded lambda/theta spec used by all bail experiments."""
    text = resources.files("unfairedge.data").joinpath("bail_scores.json").read_text(encoding="utf-8")
    return ScoreSpec.from_dict(json.loads(text))


def random_score_spec(graph: CausalGraph, rng: np.random.Generator) -> ScoreSpec:
    theta, lam, prior = {}, {}, {}
    for node in graph.names:
        parents = graph.parents(node)
        if not parents:
            prior[node] = rng.dirichlet(np.ones(graph.cards[node]))
            continue
        for p, w in zip(parents, rng.dirichlet(np.ones(len(parents)))):
            theta[(p, node)] = float(w)
            lam[(p, node)] = rng.dirichlet(np.ones(graph.cards[node]), size=graph.cards[p])
    return ScoreSpec(theta, lam, prior)


def check_spec(graph: CausalGraph, spec: ScoreSpec) -> None:
    for node in graph.names:
        parents = graph.parents(node)
        if not parents:
            continue
        missing = [_key((p, node)) for p in parents if (p, node) not in spec.theta or (p, node) not in spec.lam]
        if missing:
            raise IncompleteSpec(f"score spec does not cover {missing}")
        thetas = np.array([spec.theta[(p, node)] for p in parents])
        if np.any(thetas < -MARGIN_TOL) or abs(thetas.sum() - 1.0) > MARGIN_TOL:
            raise MarginalityViolated(f"theta into {node!r} sums to {thetas.sum():.12g}")
        for p in parents:
            lam = np.asarray(spec.lam[(p, node)])
            if lam.shape != (graph.cards[p], graph.cards[node]):
                raise IncompleteSpec(f"lambda of {_key((p, node))} has shape {lam.shape}")
            if np.any(lam < 0) or np.any(np.abs(lam.sum(axis=1) - 1.0) > MARGIN_TOL):
                raise MarginalityViolated(f"lambda rows of {_key((p, node))} do not sum to 1")


def cpts_from_scores(graph: CausalGraph, spec: ScoreSpec) -> CausalModel:
    """P(v | pa) = sum over parents A of theta_{A->V} lambda_{A=pa_A -> V=v}."""
    check_spec(graph, spec)
    cpts = {}
    for node in graph.names:
        parents = graph.parents(node)
        k = graph.cards[node]
        if not parents:
            prior = spec.prior.get(node, np.full(k, 1.0 / k))
            cpts[node] = Cpt(node, (), np.asarray(prior, dtype=float)[None, :])
            continue
        shape = [graph.cards[p] for p in parents] + [k]
        table = np.zeros(shape)
        for i, p in enumerate(parents):
            lam = np.asarray(spec.lam[(p, node)], dtype=float)
            bshape = [1] * len(parents) + [k]
            bshape[i] = graph.cards[p]
            table = table + spec.theta[(p, node)] * lam.reshape(bshape)
        cpts[node] = Cpt(node, parents, table.reshape(-1, k))
    return CausalModel(graph, cpts)


def simplex_grid(parents: Sequence[str], n: int, seed: int) -> list[dict[str, float]]:
    """``n`` seeded points spread over the simplex of edge weights.

    Points are stratified Dirichlet(1) draws: for each draw the first
    coordinate is forced into its own 1/n-wide quantile stratum.
    """
    rng = np.random.default_rng(seed)
    k = len(parents)
    points = []
    for i in range(n):
        if k == 1:
            w = np.ones(1)
        else:
            # first coordinate of a flat Dirichlet is Beta(1, k-1); invert its CDF
            u = (i + rng.uniform()) / n
            first = 1.0 - (1.0 - u) ** (1.0 / (k - 1))
            rest = rng.dirichlet(np.ones(k - 1)) * (1.0 - first)
            w = np.concatenate([[first], rest])
        points.append(dict(zip(parents, w.tolist())))
    return points


def model_grid(graph: CausalGraph, grid_j: Sequence[Mapping[str, float]],
               grid_e: Sequence[Mapping[str, float]], spec: ScoreSpec,
               node_j: str = "J", node_e: str = "E") -> list[CausalModel]:
    """Cross product of theta settings for two nodes with lambda held fixed."""
    models = []
    for pj in grid_j:
        for pe in grid_e:
            updates = {}
            for node, point in ((node_j, pj), (node_e, pe)):
                parents = graph.parents(node)
                if set(point) != set(parents):
                    raise InvalidGridPoint(f"grid point for {node!r} must cover {list(parents)}")
                vals = np.array([point[p] for p in parents])
                if np.any(vals < -MARGIN_TOL) or abs(vals.sum() - 1.0) > MARGIN_TOL:
                    raise InvalidGridPoint(f"grid point for {node!r} is not on the simplex")
                updates.update({(p, node): float(point[p]) for p in parents})
            models.append(cpts_from_scores(graph, spec.with_theta(updates)))
    return models


@dataclass
class Dataset:
    names: tuple[str, ...]
    rows: np.ndarray
    seed: int | None = None

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.names)
            w.writerows(self.rows.tolist())

    @classmethod
    def from_csv(cls, path: str | Path) -> "Dataset":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            names = tuple(next(reader))
            rows = np.array([[int(v) for v in r] for r in reader], dtype=np.int64).reshape(-1, len(names))
        return cls(names, rows)


def sample(model: CausalModel, m: int, seed: int) -> Dataset:
    """Ancestral sampling in topological order."""
    if m < 1:
        raise EmptyDataset("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    cols = {}
    for node in model.graph.topological_order:
        cpt = model.cpts[node]
        row = np.zeros(m, dtype=np.int64)
        for p in cpt.parents:
            row = row * model.cards[p] + cols[p]
        cdf = np.cumsum(cpt.table, axis=1)
        u = rng.uniform(size=m)
        draws = (u[:, None] >= cdf[row]).sum(axis=1)
        cols[node] = np.minimum(draws, model.cards[node] - 1)
    rows = np.stack([cols[n] for n in model.names], axis=1)
    return Dataset(model.names, rows, seed)


def estimate(graph: CausalGraph, data: Dataset, alpha: float = 1.0) -> CausalModel:
    """Frequency CPTs with additive smoothing; empty rows fall back to uniform."""
    if data.rows.shape[0] == 0:
        raise EmptyDataset("cannot estimate CPTs from an empty dataset")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    col = {n: data.rows[:, data.names.index(n)] for n in graph.names}
    cpts = {}
    for node in graph.names:
        parents = graph.parents(node)
        k = graph.cards[node]
        n_rows = int(np.prod([graph.cards[p] for p in parents], dtype=int))
        row = np.zeros(len(data.rows), dtype=np.int64)
        for p in parents:
            row = row * graph.cards[p] + col[p]
        counts = np.zeros((n_rows, k))
        np.add.at(counts, (row, col[node]), 1.0)
        counts += alpha
        totals = counts.sum(axis=1, keepdims=True)
        table = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / k)
        cpts[node] = Cpt(node, parents, table)
    return CausalModel(graph, cpts)


def random_graph(rng: np.random.Generator, n_nodes: int, max_card: int = 3,
                 edge_prob: float = 0.5, n_sensitive: int | None = None) -> CausalGraph:
    """Random DAG with the last node as a non-sensitive sink-side decision node."""
    names = [f"V{i}" for i in range(n_nodes)]
    cards = rng.integers(2, max_card + 1, size=n_nodes)
    edges = [(names[i], names[j]) for j in range(n_nodes) for i in range(j) if rng.uniform() < edge_prob]
    # keep the decision reachable from the first node so queries are not vacuous
    if n_nodes > 1 and not any(b == names[-1] for _, b in edges):
        edges.append((names[0], names[-1]))
    if n_sensitive is None:
        n_sensitive = int(rng.integers(1, max(2, n_nodes - 1)))
    sensitive = [names[i] for i in sorted(rng.choice(n_nodes - 1, size=min(n_sensitive, n_nodes - 1), replace=False))]
    variables = [Variable(n, [str(v) for v in range(c)]) for n, c in zip(names, cards)]
    return CausalGraph(variables, edges, sensitive)


def random_model(rng: np.random.Generator, n_nodes: int | None = None, max_card: int = 3,
                 edge_prob: float = 0.5) -> CausalModel:
    """Random graph with Dirichlet CPTs."""
    if n_nodes is None:
        n_nodes = int(rng.integers(2, 6))
    graph = random_graph(rng, n_nodes, max_card, edge_prob)
    cpts = {}
    for node in graph.names:
        parents = graph.parents(node)
        n_rows = int(np.prod([graph.cards[p] for p in parents], dtype=int))
        cpts[node] = Cpt(node, parents, rng.dirichlet(np.ones(graph.cards[node]), size=n_rows))
    return CausalModel(graph, cpts)


def toy_model() -> CausalModel:
    """Two binary nodes S -> Y with S sensitive; P(S=1)=0.5, P(Y=1|S) = 0.2 / 0.8."""
    graph = CausalGraph([Variable("S", ("0", "1")), Variable("Y", ("0", "1"))], [("S", "Y")], ["S"])
    return CausalModel(graph, {
        "S": Cpt("S", (), np.array([[0.5, 0.5]])),
        "Y": Cpt("Y", ("S",), np.array([[0.8, 0.2], [0.2, 0.8]])),
    })


def shipped_bail_model() -> CausalModel:
    return cpts_from_scores(bail_graph(), shipped_score_spec())
