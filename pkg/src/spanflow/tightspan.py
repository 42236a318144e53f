"""Tight span of a finite metric: membership, projection, distances, cells.

The tight span of a metric D on terminals T is the set of nonnegative vectors
x indexed by T with x_t = max_u (D(t, u) - x_u); equivalently, x satisfies all
pair inequalities x_t + x_u >= D(t, u) (including t = u, which gives x >= 0)
and every coordinate sits in at least one tight pair.  It equals the union of
the bounded faces of the polyhedron cut out by those inequalities, which is
what :func:`enumerate_complex` computes, exactly, for up to six terminals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Mapping

from .metric import (MetricError, TerminalMetric, Vec, check_vector,
                     is_valid_vector, validate_metric)


class UnsupportedSizeError(MetricError):
    """Raised when cell enumeration is asked for more than six terminals."""


def in_tight_span(m: TerminalMetric, x: Mapping[str, object]) -> bool:
    """True iff x is valid and every coordinate attains a tight pair.

    A zero coordinate counts as tight (the pair (t, t) with D(t, t) = 0).
    """
    v = check_vector(m, x)
    if not is_valid_vector(m, v):
        return False
    for t in m.terminals:
        if v[t] == 0:
            continue
        if not any(u != t and v[t] + v[u] == m.d(t, u) for u in m.terminals):
            return False
    return True


def project(m: TerminalMetric, x: Mapping[str, object]) -> Vec:
    """Project a valid vector onto the tight span.

    All active coordinates decrease at a common rate; a coordinate freezes as
    soon as one of its pair inequalities (or x_t >= 0) becomes tight.  The
    result dominates no coordinate of x and is a fixpoint iff x was already in
    the span.  The map is non-expanding in the sup norm but is not a
    nearest-point projection.
    """
    v = check_vector(m, x)
    if not is_valid_vector(m, v):
        raise MetricError("projection requires a valid vector")
    ts = m.terminals
    active = set(ts)
    while active:
        delta = None
        freeze = []
        for t in active:
            best = v[t]  # the self pair: x_t may drop to 0 at most
            for u in ts:
                if u == t:
                    continue
                slack = v[t] + v[u] - m.d(t, u)
                if u in active:
                    slack = slack / 2
                if slack < best:
                    best = slack
            if delta is None or best < delta:
                delta = best
                freeze = [t]
            elif best == delta:
                freeze.append(t)
        for t in active:
            v[t] -= delta
        active.difference_update(freeze)
    return v


def ts_distance(x: Mapping[str, object], y: Mapping[str, object]) -> Fraction:
    """Sup-norm distance between two points, the geodesic metric of the span."""
    if set(x) != set(y):
        raise MetricError("points live over different terminal sets")
    return max(abs(Fraction(x[t]) - Fraction(y[t])) for t in x)


@dataclass(frozen=True)
class Cell:
    """A maximal bounded face: its tight pairs, dimension, and incidences.

    `pairs` lists the terminal pairs whose equalities cut out the cell; a pair
    (t, t) stands for the constraint x_t = 0.  `dim` is the number of
    terminals minus the rank of the equality system.
    """
    pairs: tuple[tuple[str, str], ...]
    dim: int
    vertex_ids: tuple[int, ...]
    adjacent: tuple[int, ...]


@dataclass(frozen=True)
class CellComplex:
    metric: TerminalMetric
    vertices: tuple[Vec, ...]
    cells: tuple[Cell, ...]

    def vertex_id(self, point: Mapping[str, object]) -> int | None:
        key = tuple(Fraction(point[t]) for t in self.metric.terminals)
        for i, v in enumerate(self.vertices):
            if tuple(v[t] for t in self.metric.terminals) == key:
                return i
        return None

    def to_json_dict(self) -> dict:
        ts = self.metric.terminals
        return {
            "terminals": list(ts),
            "vertices": [[str(v[t]) for t in ts] for v in self.vertices],
            "cells": [
                {
                    "pairs": [[a, b] for a, b in c.pairs],
                    "dim": c.dim,
                    "vertices": list(c.vertex_ids),
                    "adjacent": list(c.adjacent),
                }
                for c in self.cells
            ],
        }


def max_cell_dimension(complex_: CellComplex) -> int:
    return max(c.dim for c in complex_.cells)


# -- exact enumeration ------------------------------------------------------
#
# Constraints are encoded as (i, j, rhs) with i <= j over terminal indices;
# i == j encodes x_i >= 0.  To keep the inner loops in integer arithmetic the
# metric is scaled by 4 * lcm(denominators): solving a tight system then only
# ever halves even integers, so candidate vertices stay integral.


def _scaled_constraints(m: TerminalMetric) -> tuple[list[tuple[int, int, int]], int]:
    k = len(m.terminals)
    den = lcm(*(x.denominator for row in m.matrix() for x in row), 1)
    scale = 4 * den
    cons = []
    for i in range(k):
        for j in range(i + 1, k):
            cons.append((i, j, int(m.matrix()[i][j] * scale)))
    for i in range(k):
        cons.append((i, i, 0))
    return cons, scale


def _solve_tight(cons: list[tuple[int, int, int]], k: int) -> list[int] | None:
    """Unique solution of a tight system, or None (singular or inconsistent).

    Each coordinate is sigma * s + c along a spanning walk of the constraint
    graph; a self constraint or an odd cycle pins the component parameter s.
    """
    adj: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    pinned_zero = []
    for i, j, r in cons:
        if i == j:
            pinned_zero.append(i)
        else:
            adj[i].append((j, r))
            adj[j].append((i, r))
    sigma = [0] * k
    const = [0] * k
    comp = [-1] * k
    values = [0] * k
    ncomp = 0
    comp_nodes: list[list[int]] = []
    for root in range(k):
        if comp[root] != -1:
            continue
        cid = ncomp
        ncomp += 1
        comp[root] = cid
        sigma[root] = 1
        const[root] = 0
        nodes = [root]
        stack = [root]
        s_val: int | None = None
        while stack:
            u = stack.pop()
            for w, r in adj[u]:
                if comp[w] == -1:
                    comp[w] = cid
                    sigma[w] = -sigma[u]
                    const[w] = r - const[u]
                    nodes.append(w)
                    stack.append(w)
                else:
                    ss = sigma[u] + sigma[w]
                    rem = r - const[u] - const[w]
                    if ss == 0:
                        if rem != 0:
                            return None
                    else:
                        cand, mod = divmod(rem, ss)
                        if mod != 0:
                            return None
                        if s_val is None:
                            s_val = cand
                        elif s_val != cand:
                            return None
        for node in nodes:
            if node in pinned_zero:
                cand = -const[node] * sigma[node]
                if s_val is None:
                    s_val = cand
                elif s_val != cand:
                    return None
        if s_val is None:
            return None  # a free parameter remains: not a vertex
        for node in nodes:
            values[node] = sigma[node] * s_val + const[node]
        comp_nodes.append(nodes)
    return values


def _system_nullity(cons: list[tuple[int, int, int]], k: int) -> int:
    """Number of free parameters of a consistent tight system on k coords."""
    adj: list[list[int]] = [[] for _ in range(k)]
    pinned_comp: set[int] = set()
    selfs = set()
    edges = []
    for i, j, r in cons:
        if i == j:
            selfs.add(i)
        else:
            adj[i].append(j)
            adj[j].append(i)
            edges.append((i, j))
    comp = [-1] * k
    sign = [0] * k
    ncomp = 0
    for root in range(k):
        if comp[root] != -1:
            continue
        cid = ncomp
        ncomp += 1
        comp[root] = cid
        sign[root] = 1
        stack = [root]
        while stack:
            u = stack.pop()
            if u in selfs:
                pinned_comp.add(cid)
            for w in adj[u]:
                if comp[w] == -1:
                    comp[w] = cid
                    sign[w] = -sign[u]
                    stack.append(w)
                elif sign[w] != -sign[u]:
                    pinned_comp.add(cid)  # odd cycle
    return ncomp - len(pinned_comp)


def enumerate_complex(m: TerminalMetric) -> CellComplex:
    """The polyhedral cell complex of the tight span, exactly.

    Vertices are the unique solutions of full-rank tight systems that satisfy
    every remaining inequality; cells are the maximal bounded faces, grouped
    by their tight-pair sets, with dimensions from the rank of the system and
    adjacency between cells sharing a vertex.  Exhaustive over candidate
    systems, so limited to six terminals.
    """
    problems = validate_metric(m)
    if problems:
        raise MetricError("invalid metric: " + "; ".join(problems[:3]))
    k = len(m.terminals)
    if k > 6:
        raise UnsupportedSizeError("cell enumeration supports at most 6 terminals")
    cons, scale = _scaled_constraints(m)
    masks = [(1 << i) | (1 << j) for i, j, _ in cons]
    full = (1 << k) - 1
    ncons = len(cons)

    verts: dict[tuple[int, ...], None] = {}
    for combo in combinations(range(ncons), k):
        mask = 0
        for c in combo:
            mask |= masks[c]
        if mask != full:
            continue
        sol = _solve_tight([cons[c] for c in combo], k)
        if sol is None:
            continue
        if any(sol[i] + sol[j] < r for i, j, r in cons):
            continue
        verts.setdefault(tuple(sol), None)

    vlist = sorted(verts)
    tight_sets = []
    for sol in vlist:
        tight_sets.append(frozenset(
            c for c, (i, j, r) in enumerate(cons) if sol[i] + sol[j] == r))

    # Faces are intersections of vertex tight sets, closed under intersection.
    closure: set[frozenset[int]] = set(tight_sets)
    frontier = list(closure)
    while frontier:
        fresh = []
        for a in frontier:
            for b in tight_sets:
                c = a & b
                if c not in closure:
                    closure.add(c)
                    fresh.append(c)
        frontier = fresh

    faces = []
    for a in closure:
        touched = 0
        for c in a:
            touched |= masks[c]
        if touched == full:  # bounded, hence part of the span
            faces.append(a)
    maximal = [a for a in faces if not any(b < a for b in faces)]

    def pair_names(cids: frozenset[int]) -> tuple[tuple[str, str], ...]:
        names = [(m.terminals[cons[c][0]], m.terminals[cons[c][1]]) for c in cids]
        return tuple(sorted(names))

    ordered = sorted(maximal, key=pair_names)
    members = []
    for a in ordered:
        members.append(tuple(i for i, tset in enumerate(tight_sets) if tset >= a))
    adjacency = []
    for i, mem in enumerate(members):
        mset = set(mem)
        adjacency.append(tuple(
            j for j, other in enumerate(members)
            if j != i and mset.intersection(other)))

    cells = []
    for a, mem, adj in zip(ordered, members, adjacency):
        dim = _system_nullity([cons[c] for c in a], k)
        cells.append(Cell(pairs=pair_names(a), dim=dim, vertex_ids=mem, adjacent=adj))

    vertices = tuple(
        {t: Fraction(sol[i], scale) for i, t in enumerate(m.terminals)}
        for sol in vlist)
    return CellComplex(metric=m, vertices=vertices, cells=tuple(cells))


def point_in_cell(complex_: CellComplex, cell: Cell, x: Vec) -> bool:
    """Exact containment: x (a span point) lies in `cell` iff its tight pairs hold."""
    m = complex_.metric
    for a, b in cell.pairs:
        if a == b:
            if x[a] != 0:
                return False
        elif x[a] + x[b] != m.d(a, b):
            return False
    return True
