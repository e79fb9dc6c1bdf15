"""FairFlow / UnfairFlow tables and the CPT model f^w fitted on them."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import NonConvergence, RootNode, UnknownParent
from .fitting import LinearCombiner, SoftmaxMLP, simplex_least_squares, train_mlp
from .graph import Assignment, CausalModel, parent_partition
from .inference import flow_array

FAIR = "<fair>"
KINDS = ("linear", "mlp")


@dataclass(frozen=True)
class FlowTables:
    """Flow channels of one node, each a ``(n_rows, card)`` table.

    Rows follow the node's CPT row order. ``fair`` is None when the node
    has no fair parents.
    """

    node: str
    parents: tuple[str, ...]
    unfair_parents: tuple[str, ...]
    fair_parents: tuple[str, ...]
    fair: np.ndarray | None
    unfair: Mapping[str, np.ndarray]
    parent_cards: tuple[int, ...] = ()

    def row_index(self, pa: Assignment) -> int:
        """Mixed-radix CPT row of a parent assignment."""
        row = 0
        for p, card in zip(self.parents, self.parent_cards):
            if p not in pa:
                raise UnknownParent(f"parent {p!r} of {self.node!r} is unbound")
            row = row * card + int(pa[p])
        return row

    @property
    def has_fair_channel(self) -> bool:
        return self.fair is not None

    @property
    def channel_names(self) -> tuple[str, ...]:
        return ((FAIR,) if self.fair is not None else ()) + self.unfair_parents

    def stacked(self, zeroed: Iterable[str] = ()) -> np.ndarray:
        """Channels as ``(n_channels, n_rows, card)`` with ``zeroed`` set to 0."""
        zeroed = set(zeroed)
        chans = []
        if self.fair is not None:
            chans.append(self.fair)
        for a in self.unfair_parents:
            chans.append(np.zeros_like(self.unfair[a]) if a in zeroed else self.unfair[a])
        return np.stack(chans)


def _align(arr, group, parents, model, node):
    # arr axes: (*group, node). Permute so group axes follow parent order, then insert singletons.
    order = sorted(range(len(group)), key=lambda i: parents.index(group[i]))
    arr = np.transpose(arr, order + [len(group)])
    shape = [1] * len(parents) + [model.cards[node]]
    for g in group:
        shape[parents.index(g)] = model.cards[g]
    return arr.reshape(shape)


def flow_tables(model: CausalModel, x: str) -> FlowTables:
    parents = model.parents(x)
    if not parents:
        raise RootNode(f"{x!r} has no parents")
    unfair, fair = parent_partition(model, x)
    fair_table = None
    if fair:
        fair_table = np.broadcast_to(
            _align(flow_array(model, x, fair), fair, parents, model, x),
            [model.cards[p] for p in parents] + [model.cards[x]],
        ).reshape(-1, model.cards[x]).copy()
    unfair_tables = {}
    for a in unfair:
        unfair_tables[a] = np.broadcast_to(
            _align(flow_array(model, x, [a]), (a,), parents, model, x),
            [model.cards[p] for p in parents] + [model.cards[x]],
        ).reshape(-1, model.cards[x]).copy()
    return FlowTables(x, parents, unfair, fair, fair_table, unfair_tables,
                      tuple(model.cards[p] for p in parents))


def all_flow_tables(model: CausalModel) -> dict[str, FlowTables]:
    return {n: flow_tables(model, n) for n in model.names if model.parents(n)}


@dataclass(frozen=True)
class FitOptions:
    """How to build and fit f^w.

    ``max_iter``/``tol`` drive the linear solver, ``epochs``/``step_size``
    the MLP. ``removal_iter`` is the budget of the joint removal solve.
    """

    kind: str = "linear"
    hidden: tuple[int, ...] = (16, 16)
    step_size: float = 1e-3
    epochs: int = 5000
    max_iter: int = 10_000
    tol: float = 1e-10
    seed: int = 0
    removal_iter: int = 1500

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.epochs <= 0 or self.max_iter <= 0 or self.removal_iter <= 0:
            raise ValueError("iteration budgets must be positive")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class FittedCpt:
    node: str
    kind: str
    channels: tuple[str, ...]
    model: LinearCombiner | SoftmaxMLP
    fit_mse: float
    seed: int
    converged: bool = True
    n_iter: int = 0

    @property
    def weights(self):
        """Simplex weights per channel (linear) or the layer list (mlp)."""
        if self.kind == "linear":
            return dict(zip(self.channels, self.model.weights.tolist()))
        return self.model.layers

    def to_dict(self) -> dict:
        doc = {
            "node": self.node,
            "kind": self.kind,
            "channels": list(self.channels),
            "fitMse": self.fit_mse,
            "seed": self.seed,
            "converged": self.converged,
        }
        doc.update(self.model.to_dict())
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FittedCpt":
        if doc["kind"] == "linear":
            model = LinearCombiner(doc["weights"])
        else:
            model = SoftmaxMLP([(layer["W"], layer["b"]) for layer in doc["layers"]])
        return cls(doc["node"], doc["kind"], tuple(doc["channels"]), model,
                   float(doc["fitMse"]), int(doc["seed"]), bool(doc.get("converged", True)))


def write_sidecar(fitted: Mapping[str, FittedCpt], path: str | Path) -> None:
    doc = {name: f.to_dict() for name, f in fitted.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_sidecar(path: str | Path) -> dict[str, FittedCpt]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return {name: FittedCpt.from_dict(d) for name, d in doc.items()}


def node_seed(seed: int, node: str) -> int:
    """Per-node RNG seed; stable across runs and independent of fit order."""
    return int(np.random.SeedSequence([seed, *node.encode()]).generate_state(1)[0])


def fit_cpt(model: CausalModel, x: str, opts: FitOptions | None = None,
            flows: FlowTables | None = None) -> FittedCpt:
    """Least-squares fit of f^w to P(x | pa(x))."""
    opts = opts or FitOptions()
    if not model.parents(x):
        raise RootNode(f"{x!r} has no parents")
    flows = flows or flow_tables(model, x)
    inputs = flows.stacked()
    target = model.cpts[x].table
    rng = np.random.default_rng(node_seed(opts.seed, x))
    if opts.kind == "linear":
        A = inputs.reshape(inputs.shape[0], -1).T
        w0 = rng.dirichlet(np.ones(inputs.shape[0]))
        w, n_iter, converged = simplex_least_squares(A, target.ravel(), w0, opts.tol, opts.max_iter)
        net = LinearCombiner(w)
        mse = float(np.mean((net.forward(inputs)[0] - target) ** 2))
    else:
        net = SoftmaxMLP.initialize(inputs.shape[0] * inputs.shape[2], opts.hidden, inputs.shape[2], rng)
        mse = train_mlp(net, inputs, target, epochs=opts.epochs, lr=opts.step_size)
        n_iter, converged = opts.epochs, bool(np.isfinite(mse))
    if not converged:
        warnings.warn(f"fit of {x!r} stopped at the iteration budget", NonConvergence, stacklevel=2)
    return FittedCpt(x, opts.kind, flows.channel_names, net, mse, opts.seed, converged, n_iter)


def fit_all(model: CausalModel, opts: FitOptions | None = None,
            flows: Mapping[str, FlowTables] | None = None) -> dict[str, FittedCpt]:
    flows = flows or all_flow_tables(model)
    return {n: fit_cpt(model, n, opts, flows[n]) for n in flows}


def predict_table(fitted: FittedCpt, flows: FlowTables, zeroed: Iterable[str] = ()) -> np.ndarray:
    """f^w on every (row, x) with the flow inputs of ``zeroed`` parents set to 0."""
    zeroed = set(zeroed)
    unknown = zeroed - set(flows.unfair_parents)
    if unknown:
        raise UnknownParent(f"{sorted(unknown)} are not unfair parents of {flows.node!r}")
    return fitted.model.forward(flows.stacked(zeroed))[0]


def predict(fitted: FittedCpt, flows: FlowTables, x: int, pa: Assignment,
            zeroed: Iterable[str] = ()) -> float:
    """f^w at one (x, pa(X)) entry."""
    return float(predict_table(fitted, flows, zeroed)[flows.row_index(pa), int(x)])
