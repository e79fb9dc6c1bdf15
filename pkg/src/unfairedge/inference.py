"""Exact observational and interventional queries by enumeration.

Everything is computed on dense arrays over the joint state space, which
is the enumeration written as broadcasting. Interventions use the
truncated factorization: factors of intervened nodes are dropped and the
intervened axes are pinned to their forced values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    MismatchedSensitiveSets,
    NotAParent,
    OverlappingDoAndTarget,
    PartialAssignment,
)
from .graph import Assignment, CausalModel

SUM_TOL = 1e-9


@dataclass(frozen=True)
class DistributionTable:
    over: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > SUM_TOL:
            raise ValueError("distribution entries must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, index):
        return float(self.probs[index])


def _check(model: CausalModel, assignment: Assignment) -> dict[str, int]:
    return model.graph.parse_assignment(assignment)


def _index(model: CausalModel, bound: Mapping[str, int], keep_axes: bool = False):
    idx = [slice(None)] * len(model.names)
    for name, value in bound.items():
        idx[model.graph.axis[name]] = slice(value, value + 1) if keep_axes else value
    return tuple(idx)


def joint(model: CausalModel, full: Assignment) -> float:
    """Product of CPT entries at a complete assignment."""
    full = _check(model, full)
    missing = [n for n in model.names if n not in full]
    if missing:
        raise PartialAssignment(f"assignment leaves {missing} unbound")
    p = 1.0
    for name in model.names:
        cpt = model.cpts[name]
        p *= float(model.factor(name)[tuple(full[q] for q in cpt.parents) + (full[name],)])
    return p


def marginal(model: CausalModel, partial: Assignment) -> float:
    """Sum of the joint over all completions of ``partial``."""
    partial = _check(model, partial)
    if not partial:
        raise PartialAssignment("marginal needs at least one bound variable")
    return float(np.sum(model.joint_table[_index(model, partial)]))


def marginal_table(model: CausalModel, names: Sequence[str], table: np.ndarray | None = None) -> np.ndarray:
    """Marginal of the joint (or of ``table``) over ``names``, axes in that order."""
    model.graph.require(*names)
    table = model.joint_table if table is None else table
    axes = [model.graph.axis[n] for n in names]
    drop = tuple(i for i in range(len(model.names)) if i not in axes)
    out = table.sum(axis=drop, keepdims=True) if drop else table
    out = out.reshape([model.cards[n] for n in sorted(names, key=model.graph.axis.__getitem__)])
    order = sorted(range(len(names)), key=lambda i: axes[i])
    # ``out`` has axes in declaration order; permute back to the requested order
    return np.transpose(out, np.argsort(order))


def truncated_table(model: CausalModel, do: Assignment) -> np.ndarray:
    """P(V | do) as a full-shape array; intervened axes are kept at size 1.

    The array is zero outside the forced values because those axes are
    sliced, so summing over any subset of axes gives interventional marginals.
    """
    do = _check(model, do)
    out = np.ones(model.graph.shape)
    for name in model.names:
        if name not in do:
            out = out * model.broadcast_factor(name)
    return out[_index(model, do, keep_axes=True)]


def intervene(model: CausalModel, do: Assignment, target: Assignment) -> float:
    """P(target | do(do))."""
    do = _check(model, do)
    target = _check(model, target)
    if set(do) & set(target):
        raise OverlappingDoAndTarget(f"variables {sorted(set(do) & set(target))} are both forced and queried")
    table = truncated_table(model, do)
    return float(np.sum(table[_index(model, target, keep_axes=True)]))


def interventional_marginal(model: CausalModel, do: Assignment, names: Sequence[str]) -> np.ndarray:
    """P(names | do(do)) as an array with axes in ``names`` order."""
    do = _check(model, do)
    if set(do) & set(names):
        raise OverlappingDoAndTarget("forced and queried variables overlap")
    table = truncated_table(model, do)
    if not names:
        return np.asarray(table.sum())
    return marginal_table(model, names, table)


def total_effect(model: CausalModel, y: Assignment, s2: Assignment, s1: Assignment) -> float:
    """TE_y(s2, s1) = P(y | do(s2)) - P(y | do(s1))."""
    if set(s1) != set(s2):
        raise MismatchedSensitiveSets(f"{sorted(s1)} vs {sorted(s2)}")
    return intervene(model, s2, y) - intervene(model, s1, y)


def direct_effect(model: CausalModel, x: Assignment, m: Assignment, m_prime: Assignment) -> float:
    """Effect of switching parents M from m' to m along the edges M -> X only.

    ``SE = sum_z P(x | m, z) P(z | do(m')) - P(x | do(m'))`` with Z = Pa(X) minus M.
    """
    x = _check(model, x)
    if len(x) != 1:
        raise ValueError("x must bind exactly one variable")
    (xname, xval), = x.items()
    m = _check(model, m)
    m_prime = _check(model, m_prime)
    if set(m) != set(m_prime):
        raise MismatchedSensitiveSets("m and m' must bind the same parents")
    parents = model.parents(xname)
    for name in m:
        if name not in parents:
            raise NotAParent(f"{name!r} is not a parent of {xname!r}")
    others = [p for p in parents if p not in m]
    factor = model.factor(xname)
    pz = interventional_marginal(model, m_prime, others)
    total = 0.0
    for z in itertools.product(*(range(model.cards[o]) for o in others)):
        zmap = dict(zip(others, z))
        full = {**m, **zmap}
        total += factor[tuple(full[p] for p in parents) + (xval,)] * pz[z]
    return float(total - intervene(model, m_prime, {xname: xval}))


def expected_direct_effects(model: CausalModel, x: str, parents: Sequence[str]) -> np.ndarray:
    """E over m' ~ P(m') of SE_{pi,x}(m, m'), for every (m, x).

    Returns an array with axes ``(*parents, x)``.
    """
    pa = model.parents(x)
    for name in parents:
        if name not in pa:
            raise NotAParent(f"{name!r} is not a parent of {x!r}")
    parents = list(parents)
    others = [p for p in pa if p not in parents]
    # CPT with axes (*parents, *others, x)
    perm = [pa.index(p) for p in parents + others] + [len(pa)]
    cpt = np.transpose(model.factor(x), perm)
    n_m = len(parents)
    p_m = marginal_table(model, parents) if parents else np.ones(())
    out = np.zeros(cpt.shape[:n_m] + cpt.shape[-1:])
    for m_prime in itertools.product(*(range(model.cards[p]) for p in parents)):
        weight = p_m[m_prime]
        if weight == 0.0:
            continue
        do = dict(zip(parents, m_prime))
        table = truncated_table(model, do)
        pz = marginal_table(model, others, table) if others else np.asarray(table.sum())
        px = marginal_table(model, [x], table)
        mixed = np.tensordot(cpt, pz, axes=(list(range(n_m, n_m + len(others))), list(range(len(others)))))
        out += weight * (mixed - px)
    return out


def softmax(values: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def flow_array(model: CausalModel, x: str, parents: Sequence[str]) -> np.ndarray:
    """Edge flows from ``parents`` into ``x`` for every parent value, axes ``(*parents, x)``."""
    return softmax(expected_direct_effects(model, x, parents), axis=-1)


def edge_flow(model: CausalModel, x: str, m: Assignment) -> DistributionTable:
    """Belief over dom(x) induced by M=m along the direct edges M -> x."""
    m = _check(model, m)
    parents = list(m)
    flows = flow_array(model, x, parents)
    return DistributionTable((x,), flows[tuple(m[p] for p in parents)])
