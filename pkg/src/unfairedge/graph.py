"""Discrete Markovian causal models: variables, CPTs, sensitive nodes.

CPT rows enumerate parent assignments in mixed-radix order over the CPT's
parent list, first parent most significant (C order of the array whose
axes are ``(*parents, child)``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CptRowNotNormalized,
    CycleDetected,
    DomainMismatch,
    ModelValidationError,
    UnknownVariable,
)

ROW_TOL = 1e-9

Edge = tuple[str, str]
Assignment = Mapping[str, int]


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        if not self.domain:
            raise DomainMismatch(f"variable {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise DomainMismatch(f"variable {self.name!r} has duplicate domain labels")

    @property
    def card(self) -> int:
        return len(self.domain)

    def index(self, label) -> int:
        """Index of a value given as a label or an integer index."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.card:
                raise DomainMismatch(f"{self.name}={label} outside domain of size {self.card}")
            return int(label)
        try:
            return self.domain.index(str(label))
        except ValueError:
            raise DomainMismatch(f"{label!r} is not a value of {self.name!r}") from None


@dataclass(frozen=True)
class Cpt:
    """P(child | parents) stored as a ``(n_rows, card(child))`` table."""

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim == 1:
            table = table[None, :]
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "parents", tuple(self.parents))

    @property
    def n_rows(self) -> int:
        return self.table.shape[0]

    def factor(self, cards: Mapping[str, int]) -> np.ndarray:
        """The table as an array with axes ``(*parents, child)``."""
        shape = tuple(cards[p] for p in self.parents) + (cards[self.child],)
        return self.table.reshape(shape)


@dataclass(frozen=True, eq=False)
class CausalGraph:
    """DAG over discrete variables with a set of sensitive nodes."""

    variables: tuple[Variable, ...]
    edges: tuple[Edge, ...]
    sensitive: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple(dict.fromkeys((str(a), str(b)) for a, b in self.edges)))
        object.__setattr__(self, "sensitive", frozenset(self.sensitive))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ModelValidationError("duplicate variable names")
        known = set(names)
        for a, b in self.edges:
            for n in (a, b):
                if n not in known:
                    raise UnknownVariable(f"edge {a}->{b} references unknown variable {n!r}")
            if a == b:
                raise CycleDetected(f"self-loop on {a!r}")
        for s in self.sensitive:
            if s not in known:
                raise UnknownVariable(f"sensitive node {s!r} is not a variable")
        self.topological_order  # raises on cycles

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @cached_property
    def axis(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    @cached_property
    def cards(self) -> dict[str, int]:
        return {v.name: v.card for v in self.variables}

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.card for v in self.variables)

    def variable(self, name: str) -> Variable:
        self.require(name)
        return self.variables[self.axis[name]]

    def require(self, *names: str) -> None:
        for n in names:
            if n not in self.axis:
                raise UnknownVariable(f"unknown variable {n!r}")

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        out = {n: [] for n in self.names}
        for a, b in self.edges:
            out[b].append(a)
        # parents listed in variable declaration order
        return {n: tuple(sorted(ps, key=self.axis.__getitem__)) for n, ps in out.items()}

    def parents(self, name: str) -> tuple[str, ...]:
        self.require(name)
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        self.require(name)
        return tuple(b for a, b in self.edges if a == name)

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        indeg = {n: 0 for n in self.names}
        for _, b in self.edges:
            indeg[b] += 1
        ready = [n for n in self.names if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for a, b in self.edges:
                if a == n:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        ready.append(b)
        if len(order) != len(self.names):
            stuck = sorted(n for n in self.names if n not in order)
            raise CycleDetected(f"edge set contains a cycle through {stuck}")
        return tuple(order)

    @cached_property
    def unfair_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e[0] in self.sensitive)

    def is_root(self, name: str) -> bool:
        return not self.parents(name)

    def parse_assignment(self, values: Mapping[str, object]) -> dict[str, int]:
        """Validate a (partial) assignment; values may be indices or labels."""
        out = {}
        for name, value in values.items():
            out[name] = self.variable(name).index(value)
        return out


@dataclass(frozen=True, eq=False)
class CausalModel:
    """A causal graph plus one CPT per variable. Immutable."""

    graph: CausalGraph
    cpts: Mapping[str, Cpt]

    def __post_init__(self):
        object.__setattr__(self, "cpts", dict(self.cpts))
        _validate_cpts(self.graph, self.cpts)

    # graph delegation keeps call sites short
    @property
    def variables(self):
        return self.graph.variables

    @property
    def names(self):
        return self.graph.names

    @property
    def edges(self):
        return self.graph.edges

    @property
    def sensitive(self):
        return self.graph.sensitive

    @property
    def cards(self):
        return self.graph.cards

    def parents(self, name):
        """Parents in the CPT's own order (which fixes its row layout)."""
        self.graph.require(name)
        return self.cpts[name].parents

    def factor(self, name: str) -> np.ndarray:
        """CPT of ``name`` as an array with axes ``(*parents, name)``."""
        return self.cpts[name].factor(self.cards)

    def broadcast_factor(self, name: str) -> np.ndarray:
        """CPT of ``name`` broadcastable against the full joint array."""
        return _broadcast(self.graph, self.cpts[name].parents + (name,), self.factor(name))

    @cached_property
    def joint_table(self) -> np.ndarray:
        """P(V) over all variables, axes in declaration order."""
        out = np.ones(self.graph.shape)
        for name in self.names:
            out = out * self.broadcast_factor(name)
        out.setflags(write=False)
        return out

    def with_cpts(self, tables: Mapping[str, np.ndarray]) -> "CausalModel":
        """Copy with some CPT tables replaced (same parent order)."""
        cpts = dict(self.cpts)
        for name, table in tables.items():
            cpts[name] = Cpt(name, cpts[name].parents, np.asarray(table, dtype=float))
        return CausalModel(self.graph, cpts)


def _broadcast(graph: CausalGraph, axes_names: Sequence[str], arr: np.ndarray) -> np.ndarray:
    """Reshape ``arr`` (axes named ``axes_names``) to broadcast over the joint."""
    order = sorted(range(len(axes_names)), key=lambda i: graph.axis[axes_names[i]])
    arr = np.transpose(arr, order)
    shape = [1] * len(graph.names)
    for i in order:
        shape[graph.axis[axes_names[i]]] = graph.cards[axes_names[i]]
    return arr.reshape(shape)


def _validate_cpts(graph: CausalGraph, cpts: Mapping[str, Cpt]) -> None:
    for name in graph.names:
        if name not in cpts:
            raise ModelValidationError(f"missing CPT for {name!r}")
    for name, cpt in cpts.items():
        if name not in graph.axis:
            raise UnknownVariable(f"CPT given for unknown variable {name!r}")
        for p in cpt.parents:
            if p not in graph.axis:
                raise UnknownVariable(f"CPT of {name!r} references unknown parent {p!r}")
        if set(cpt.parents) != set(graph.parents(name)) or len(cpt.parents) != len(set(cpt.parents)):
            raise ModelValidationError(
                f"CPT parents of {name!r} {list(cpt.parents)} differ from graph parents "
                f"{list(graph.parents(name))}"
            )
        n_rows = int(np.prod([graph.cards[p] for p in cpt.parents], dtype=int))
        if cpt.table.shape != (n_rows, graph.cards[name]):
            raise DomainMismatch(
                f"CPT of {name!r} has shape {cpt.table.shape}, expected {(n_rows, graph.cards[name])}"
            )
        if not np.all(np.isfinite(cpt.table)) or np.any(cpt.table < 0):
            raise ModelValidationError(f"CPT of {name!r} has negative or non-finite entries")
        sums = cpt.table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            raise CptRowNotNormalized(name, int(bad[0]), float(sums[bad[0]]))


def parent_partition(model: CausalModel | CausalGraph, x: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split Pa(x) into (unfair parents, fair parents), each in parent order."""
    graph = model.graph if isinstance(model, CausalModel) else model
    pa = model.parents(x)
    unfair = tuple(p for p in pa if p in graph.sensitive)
    fair = tuple(p for p in pa if p not in graph.sensitive)
    return unfair, fair


def unfair_paths(model: CausalModel | CausalGraph, sources: Iterable[str], y: str) -> list[tuple[str, ...]]:
    """All directed paths from any node in ``sources`` to ``y``."""
    graph = model.graph if isinstance(model, CausalModel) else model
    graph.require(y)
    sources = list(sources)
    graph.require(*sources)
    for s in sources:
        if s not in graph.sensitive:
            raise ModelValidationError(f"{s!r} is not a sensitive node")
    paths = []

    def walk(path):
        node = path[-1]
        if node == y and len(path) > 1:
            paths.append(tuple(path))
            return
        for child in graph.children(node):
            walk(path + [child])

    for s in dict.fromkeys(sources):
        if s == y:
            continue
        walk([s])
    return paths


def model_from_dict(doc: Mapping) -> CausalModel:
    try:
        variables = [Variable(v["name"], v["domain"]) for v in doc["variables"]]
        graph = CausalGraph(variables, [tuple(e) for e in doc.get("edges", [])], doc.get("sensitive", []))
        cpts = {}
        for name, entry in doc["cpts"].items():
            table = np.asarray(entry["table"], dtype=float)
            cpts[name] = Cpt(name, tuple(entry.get("parents", [])), table)
    except ModelValidationError:
        raise
    except (KeyError, TypeError) as exc:
        raise ModelValidationError(f"malformed model document: {exc}") from exc
    except ValueError as exc:
        raise DomainMismatch(f"malformed CPT table: {exc}") from exc
    return CausalModel(graph, cpts)


def load_model(document: str | bytes | Mapping) -> CausalModel:
    """Parse and validate a model document (JSON text or decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelValidationError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(document)


def read_model(path: str | Path) -> CausalModel:
    return load_model(Path(path).read_text(encoding="utf-8"))


def graph_to_dict(graph: CausalGraph) -> dict:
    return {
        "variables": [{"name": v.name, "domain": list(v.domain)} for v in graph.variables],
        "edges": [list(e) for e in graph.edges],
        "sensitive": sorted(graph.sensitive, key=graph.axis.__getitem__),
    }


def model_to_dict(model: CausalModel) -> dict:
    doc = graph_to_dict(model.graph)
    doc["cpts"] = {
        name: {"parents": list(model.cpts[name].parents), "table": model.cpts[name].table.tolist()}
        for name in model.names
    }
    return doc


def write_model(model: CausalModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")
