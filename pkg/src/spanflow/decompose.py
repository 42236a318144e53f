"""Randomized decomposition of tight spans with at most five terminals.

Projected vertices are grouped into a bounded number of clusters by threshold
cuts with random positions; cluster representatives are fixed span points and
the cluster semi-metric is the span distance between representatives.
Terminal distances are preserved exactly on every sample, and for the three
generic span shapes the expected distance between the clusters of any two
points equals (or is bounded by) their span distance.

Shape handling:

* a cyclic fan of five rectangles around a center (one threshold per pendant
  and per shared corner segment);
* a banded plane with at most one 45-degree fold segment (covers the
  rectangle-plus-triangle and two-overlapping-rectangles shapes as well as
  four-terminal rectangles; one entangled threshold drives both cuts through
  the fold, everything else is independent);
* trees (one threshold per segment);
* anything else falls back to a deterministic nearest-vertex snap.
"""
from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Mapping, Sequence

from .metric import MetricError, TerminalMetric, Vec
from .graphs import Edge, EmbeddedGraph, GraphError, TerminalGraph, shortest_distances
from .tightspan import (CellComplex, UnsupportedSizeError, enumerate_complex,
                        in_tight_span, point_in_cell, ts_distance)

_SEED_MIX = 0x9E3779B97F4A7C15


@dataclass
class TSTemplate:
    """Classification of a tight-span complex with extracted parameters."""
    tag: str  # "type1" | "type2" | "type3" | "degenerate"
    params: dict[str, Fraction] = field(default_factory=dict)
    roles: dict[str, str] = field(default_factory=dict)
    cycle: tuple[str, ...] | None = None
    complex: CellComplex | None = None


@dataclass
class Cluster:
    label: str
    vertices: list
    rep: Vec


@dataclass
class Solution:
    """A partition of graph vertices plus representative span points."""
    metric: TerminalMetric
    clusters: list[Cluster]
    by_vertex: dict[Hashable, int]

    def cluster_of(self, v) -> int:
        return self.by_vertex[v]

    def delta(self, i: int, j: int) -> Fraction:
        if i == j:
            return Fraction(0)
        return ts_distance(self.clusters[i].rep, self.clusters[j].rep)

    def size(self) -> int:
        return len(self.clusters)

    def to_json_dict(self) -> dict:
        ts = self.metric.terminals
        return {
            "clusters": [
                {
                    "label": c.label,
                    "vertices": [str(v) for v in c.vertices],
                    "rep": {t: str(c.rep[t]) for t in ts},
                }
                for c in self.clusters
            ]
        }


@dataclass
class CostReport:
    vol: Fraction
    opt: Fraction
    ratio: Fraction

    def to_json_dict(self) -> dict:
        return {"vol": str(self.vol), "opt": str(self.opt), "ratio": str(self.ratio)}


# ---------------------------------------------------------------------------
# template metric builders (inverse of classify, used to derive instances)


def type1_metric(pendants: Mapping[str, object], sides: Mapping[tuple[str, str], object],
                 cycle: Sequence[str] = ("a", "b", "c", "d", "e")) -> TerminalMetric:
    """Metric whose span is a five-rectangle fan with the given parameters.

    `sides` is keyed by consecutive cycle pairs; all parameters must be
    positive for the shape to be non-degenerate.
    """
    cyc = list(cycle)
    k = len(cyc)
    if k != 5:
        raise MetricError("the fan template needs exactly five terminals")
    pend = {t: Fraction(pendants[t]) for t in cyc}

    def side(t, u):
        if (t, u) in sides:
            return Fraction(sides[(t, u)])
        return Fraction(sides[(u, t)])

    pairs = {}
    for i, t in enumerate(cyc):
        nxt = cyc[(i + 1) % k]
        nxt2 = cyc[(i + 2) % k]
        prev = cyc[(i - 1) % k]
        pairs[(t, nxt)] = pend[t] + pend[nxt] + side(prev, t) + side(nxt, nxt2)
        pairs[(t, nxt2)] = (pend[t] + pend[nxt2] + side(prev, t) + side(t, nxt)
                            + side(nxt, nxt2) + side(nxt2, cyc[(i + 3) % k]))
    merged = {}
    for (t, u), v in pairs.items():
        merged[(t, u) if t < u else (u, t)] = v
    return TerminalMetric.from_pairs(merged, terminals=cyc)


def type2_metric(width, height, off_x, off_y, fold, pendants: Mapping[str, object],
                 names: Sequence[str] = ("a", "b", "c", "d", "e")) -> TerminalMetric:
    """Metric whose span is a rectangle with an interior fold triangle.

    Corners a..d sit at (0,0), (W,0), (W,H), (0,H); the apex terminal e hangs
    off the fold, which runs diagonally across the square of side `fold`
    anchored at (off_x, off_y).  Requires 0 < off_x, off_x + fold < width and
    likewise in y.
    """
    a, b, c, d, e = names
    W, H = Fraction(width), Fraction(height)
    P, Q, h = Fraction(off_x), Fraction(off_y), Fraction(fold)
    if not (0 < P and 0 < Q and P + h < W and Q + h < H and h > 0):
        raise MetricError("fold square must lie strictly inside the rectangle")
    p = {t: Fraction(pendants[t]) for t in names}
    pairs = {
        (a, b): p[a] + W + p[b],
        (b, c): p[b] + H + p[c],
        (c, d): p[c] + W + p[d],
        (a, d): p[a] + H + p[d],
        (a, c): p[a] + W + H + p[c],
        (b, d): p[b] + W + H + p[d],
        (a, e): p[a] + P + Q + h + p[e],
        (b, e): p[b] + (W - P) + Q + h + p[e],
        (c, e): p[c] + (W - P) + (H - Q) - h + p[e],
        (d, e): p[d] + P + (H - Q) + h + p[e],
    }
    merged = {(t, u) if t < u else (u, t): v for (t, u), v in pairs.items()}
    return TerminalMetric.from_pairs(merged, terminals=names)


def type3_metric(x_lo, x_hi, y_lo, y_hi, fold, pendants: Mapping[str, object],
                 names: Sequence[str] = ("a", "b", "c", "d", "e")) -> TerminalMetric:
    """Metric whose span is two rectangles overlapping along a corner fold.

    Band widths along x are (x_lo, fold, x_hi) and along y (y_lo, fold, y_hi);
    terminals sit at a=(X0,Y0), b=(X0,Y3), c=(X3,Y2), d=(X3,Y0), e=(X2,Y3).
    """
    a, b, c, d, e = names
    ax, ax2 = Fraction(x_lo), Fraction(x_hi)
    ay, ay2 = Fraction(y_lo), Fraction(y_hi)
    h = Fraction(fold)
    if min(ax, ax2, ay, ay2, h) <= 0:
        raise MetricError("all band widths must be positive")
    p = {t: Fraction(pendants[t]) for t in names}
    X30 = ax + h + ax2
    Y30 = ay + h + ay2
    pairs = {
        (a, b): p[a] + Y30 + p[b],
        (a, d): p[a] + X30 + p[d],
        (a, c): p[a] + X30 + (ay + h) + p[c],
        (a, e): p[a] + (ax + h) + Y30 + p[e],
        (b, d): p[b] + X30 + Y30 + p[d],
        (b, e): p[b] + ax + h + p[e],
        (b, c): p[b] + X30 + ay2 + p[c],
        (c, d): p[c] + ay + h + p[d],
        (d, e): p[d] + ax2 + ay + h + ay2 + p[e],
        (c, e): p[c] + (h + ax2) + h + ay2 + p[e],
    }
    merged = {(t, u) if t < u else (u, t): v for (t, u), v in pairs.items()}
    return TerminalMetric.from_pairs(merged, terminals=names)


# ---------------------------------------------------------------------------
# models


def _vec_key(m: TerminalMetric, p: Vec) -> tuple:
    return tuple(p[t] for t in m.terminals)


class _ModelBase:
    """Shared assignment plumbing; subclasses implement localize/resolve."""

    def __init__(self, complex_: CellComplex):
        self.complex = complex_
        self.metric = complex_.metric
        self.rows = {t: self.metric.row(t) for t in self.metric.terminals}
        self.row_keys = {_vec_key(self.metric, r): t for t, r in self.rows.items()}
        self.draw_spec: list[tuple[object, Fraction, Fraction]] = []

    def draws(self, seed: int) -> dict:
        rng = random.Random(seed)
        out = {}
        for key, lo, hi in self.draw_spec:
            u = Fraction(rng.getrandbits(53), 1 << 53)
            out[key] = lo + u * (hi - lo)
        return out

    def prepare(self, seed: int):
        """Per-sample state handed to resolve (subclasses may extend)."""
        return self.draws(seed)

    def localize(self, p: Vec):
        key = _vec_key(self.metric, p)
        if key in self.row_keys:
            return ("rep", key)
        return self._localize_inner(p, key)

    def resolve(self, token, draws) -> tuple:
        """Token -> representative coordinate tuple."""
        kind = token[0]
        if kind == "rep":
            return token[1]
        if kind == "tree":
            _, dkey, s, near, far = token
            return self.resolve(near if s < draws[dkey] else far, draws)
        return self._resolve_inner(token, draws)


class _TreeModel(_ModelBase):
    tag = "degenerate"

    def __init__(self, complex_):
        super().__init__(complex_)
        self.segments = []
        for ci, cell in enumerate(complex_.cells):
            if cell.dim == 0:
                continue
            if cell.dim != 1 or len(cell.vertex_ids) != 2:
                raise MetricError("not a tree complex")
            i, j = sorted(cell.vertex_ids)
            vi, vj = complex_.vertices[i], complex_.vertices[j]
            length = ts_distance(vi, vj)
            self.segments.append((cell, i, j, vi, vj))
            self.draw_spec.append((("t", ci), Fraction(0), length))
            # draw key must match segment order
        self._draw_keys = [spec[0] for spec in self.draw_spec]

    def _localize_inner(self, p, key):
        for idx, (cell, i, j, vi, vj) in enumerate(self.segments):
            vkey = _vec_key(self.metric, vi)
            if key == vkey:
                return ("rep", vkey)
            jkey = _vec_key(self.metric, vj)
            if key == jkey:
                return ("rep", jkey)
            if point_in_cell(self.complex, cell, p):
                s = ts_distance(p, vi)
                return ("tree", self._draw_keys[idx], s, ("rep", vkey), ("rep", jkey))
        for v in self.complex.vertices:  # isolated vertex (single-point span)
            if key == _vec_key(self.metric, v):
                return ("rep", key)
        raise MetricError("point not on the tree span")


class _SnapModel(_ModelBase):
    """Deterministic fallback: every point joins its nearest complex vertex."""
    tag = "degenerate"

    def _localize_inner(self, p, key):
        best = None
        for v in self.complex.vertices:
            d = ts_distance(p, v)
            cand = (d, _vec_key(self.metric, v))
            if best is None or cand < best:
                best = cand
        return ("rep", best[1])


class _FanModel(_ModelBase):
    """Five rectangles around a common center, five pendants."""
    tag = "type1"

    def __init__(self, complex_):
        super().__init__(complex_)
        cx = complex_
        m = self.metric
        two = [c for c in cx.cells if c.dim == 2]
        one = [c for c in cx.cells if c.dim == 1]
        if len(two) != 5:
            raise MetricError("not a fan complex")
        if any(len(c.vertex_ids) != 4 for c in two):
            raise MetricError("fan rectangles must have four corners")
        common = set(two[0].vertex_ids)
        for c in two[1:]:
            common &= set(c.vertex_ids)
        if len(common) != 1:
            raise MetricError("fan rectangles must share one center")
        self.o_id = common.pop()
        term_vid = {}
        for t in m.terminals:
            vid = cx.vertex_id(self.rows[t])
            if vid is None:
                raise MetricError("terminal not a complex vertex")
            term_vid[t] = vid
        # pendants: terminal vertex <-> prime corner of exactly one rectangle;
        # a terminal sitting directly on its rectangle has a zero pendant
        self.prime = {}
        self.pend_len = {}
        for c in one:
            ids = set(c.vertex_ids)
            terms = [t for t, vid in term_vid.items() if vid in ids]
            if len(terms) != 1:
                raise MetricError("fan pendant must end at one terminal")
            t = terms[0]
            other = (ids - {term_vid[t]}).pop()
            self.prime[t] = other
            self.pend_len[t] = ts_distance(cx.vertices[other], self.rows[t])
        for t in m.terminals:
            if t not in self.prime:
                self.prime[t] = term_vid[t]
                self.pend_len[t] = Fraction(0)
        if len(self.prime) != 5:
            raise MetricError("each terminal needs its own pendant")
        rect_of = {}
        for t, pv in self.prime.items():
            owners = [i for i, c in enumerate(two) if pv in c.vertex_ids]
            if len(owners) != 1:
                raise MetricError("prime corner must belong to one rectangle")
            rect_of[t] = owners[0]
        if len(set(rect_of.values())) != 5:
            raise MetricError("rectangles and terminals must pair up")
        # cyclic order via shared non-center corners
        shared = {}
        for t, u in combinations(m.terminals, 2):
            inter = (set(two[rect_of[t]].vertex_ids) & set(two[rect_of[u]].vertex_ids)
                     - {self.o_id})
            if len(inter) == 1:
                shared[frozenset((t, u))] = inter.pop()
            elif len(inter) > 1:
                raise MetricError("fan rectangles overlap too much")
        if len(shared) != 5 or any(
                sum(1 for k in shared if t in k) != 2 for t in m.terminals):
            raise MetricError("fan rectangles must form a single cycle")
        start = min(m.terminals)
        cyc = [start]
        while len(cyc) < 5:
            t = cyc[-1]
            nxts = [u for k in shared if t in k for u in k
                    if u != t and u not in cyc]
            if not nxts:
                raise MetricError("fan cycle is broken")
            cyc.append(min(nxts))
        self.cycle = tuple(cyc)
        self.corner = shared  # frozenset pair -> vertex id
        self.side_len = {k: ts_distance(cx.vertices[self.o_id], cx.vertices[v])
                         for k, v in shared.items()}
        self.rect_cells = {t: two[rect_of[t]] for t in m.terminals}
        # round trip: the parameters must reproduce the metric exactly
        check = type1_metric(self.pend_len,
                             {tuple(sorted(k)): v for k, v in self.side_len.items()},
                             cycle=self.cycle)
        for t, u in combinations(m.terminals, 2):
            if check.d(t, u) != m.d(t, u):
                raise MetricError("fan parameters do not reproduce the metric")

        order = sorted(m.terminals)
        for t in order:
            self.draw_spec.append((("fp", t), Fraction(0), self.pend_len[t]))
        for k in sorted(self.corner, key=sorted):
            self.draw_spec.append((("fs", k), Fraction(0), self.side_len[k]))
        self._static = {}
        V, mm = cx.vertices, m
        self._static[_vec_key(mm, V[self.o_id])] = _vec_key(mm, V[self.o_id])
        for t in m.terminals:
            self._static[_vec_key(mm, V[self.prime[t]])] = _vec_key(mm, V[self.prime[t]])
        for k, vid in self.corner.items():
            self._static[_vec_key(mm, V[vid])] = _vec_key(mm, V[vid])
        i = self.cycle.index
        self.next_of = {t: self.cycle[(i(t) + 1) % 5] for t in self.cycle}
        self.prev_of = {t: self.cycle[(i(t) - 1) % 5] for t in self.cycle}

    def _localize_inner(self, p, key):
        if key in self._static:
            return ("rep", self._static[key])
        m, V = self.metric, self.complex.vertices
        for t in sorted(m.terminals):
            # pendant test: p lies between the terminal and its prime corner
            d_t = ts_distance(p, self.rows[t])
            if d_t + ts_distance(p, V[self.prime[t]]) == self.pend_len[t]:
                return ("tree", ("fp", t), d_t, ("rep", _vec_key(m, self.rows[t])),
                        ("rep", _vec_key(m, V[self.prime[t]])))
        for t in self.cycle:
            cell = self.rect_cells[t]
            if not point_in_cell(self.complex, cell, p):
                continue
            nxt, prv = self.next_of[t], self.prev_of[t]
            e_next = frozenset((t, nxt))
            e_prev = frozenset((prv, t))
            dp = ts_distance(p, V[self.prime[t]])
            u1 = (dp + ts_distance(p, V[self.corner[e_next]]) - self.side_len[e_prev]) / 2
            u2 = (dp + ts_distance(p, V[self.corner[e_prev]]) - self.side_len[e_next]) / 2
            return ("fan", t, u1, u2)
        raise MetricError("point not on the fan span")

    def _resolve_inner(self, token, draws):
        _, t, u1, u2 = token
        m, V = self.metric, self.complex.vertices
        nxt, prv = self.next_of[t], self.prev_of[t]
        r1 = draws[("fs", frozenset((t, nxt)))]
        r2 = draws[("fs", frozenset((prv, t)))]
        if u1 < r1:
            vid = self.prime[t] if u2 < r2 else self.corner[frozenset((t, nxt))]
        else:
            vid = self.corner[frozenset((prv, t))] if u2 < r2 else self.o_id
        return _vec_key(m, V[vid])


class _PlanarModel(_ModelBase):
    """Banded plane with at most one 45-degree fold; covers types 2 and 3."""

    def __init__(self, complex_):
        super().__init__(complex_)
        cx, m = complex_, self.metric
        self.two = [c for c in cx.cells if c.dim == 2]
        self.trees = [c for c in cx.cells if c.dim == 1]
        if not self.two:
            raise MetricError("no 2-cells for the planar model")
        chart = self._find_chart()
        if chart is None:
            raise MetricError("no global planar chart")
        self.t1, self.t2 = chart
        self.plan = [((v[self.t1] + v[self.t2]) / 2, (v[self.t1] - v[self.t2]) / 2)
                     for v in cx.vertices]
        # fold: a vertex pair shared by at least three 2-cells
        counts: dict[tuple[int, int], int] = {}
        for c in self.two:
            for i, j in combinations(sorted(c.vertex_ids), 2):
                counts[(i, j)] = counts.get((i, j), 0) + 1
        folds = [pair for pair, n in counts.items() if n >= 3]
        if len(folds) > 1:
            raise MetricError("more than one fold segment")
        self.fold = folds[0] if folds else None

        on2 = sorted({vid for c in self.two for vid in c.vertex_ids})
        self.xs = sorted({self.plan[v][0] for v in on2})
        self.ys = sorted({self.plan[v][1] for v in on2})
        self.fold_bands = None
        if self.fold is not None:
            (xa, ya), (xb, yb) = self.plan[self.fold[0]], self.plan[self.fold[1]]
            if abs(xb - xa) != abs(yb - ya) or xa == xb:
                raise MetricError("fold is not diagonal")
            xlo, xhi = min(xa, xb), max(xa, xb)
            ylo, yhi = min(ya, yb), max(ya, yb)
            bx = self.xs.index(xlo)
            by = self.ys.index(ylo)
            if self.xs[bx + 1] != xhi or self.ys[by + 1] != yhi:
                raise MetricError("fold must span single bands")
            slope = 1 if (xb - xa) == (yb - ya) else -1
            self.fold_bands = (bx, by, slope, xhi - xlo)
        for i in range(len(self.xs) - 1):
            if self.fold_bands and i == self.fold_bands[0]:
                continue
            self.draw_spec.append((("x", i), self.xs[i], self.xs[i + 1]))
        for j in range(len(self.ys) - 1):
            if self.fold_bands and j == self.fold_bands[1]:
                continue
            self.draw_spec.append((("y", j), self.ys[j], self.ys[j + 1]))
        if self.fold_bands:
            self.draw_spec.append((("fold",), Fraction(0), self.fold_bands[3]))
        for ci, cell in enumerate(self.trees):
            i, j = sorted(cell.vertex_ids)
            self.draw_spec.append((("t", ci),
                                   Fraction(0),
                                   ts_distance(cx.vertices[i], cx.vertices[j])))

        # anchor lifts per cell via exact barycentric interpolation
        self.lift: dict[tuple[int, int, int], tuple | None] = {}
        for ci, cell in enumerate(self.two):
            pts = [(self.plan[v], cx.vertices[v]) for v in cell.vertex_ids]
            for gx in range(len(self.xs)):
                for gy in range(len(self.ys)):
                    self.lift[(ci, gx, gy)] = self._lift_point(
                        pts, self.xs[gx], self.ys[gy])
        self._tree_tokens: dict[int, tuple] = {}

    def _find_chart(self):
        """Two terminals whose coordinates chart every 2-cell isometrically.

        On each cell all coordinates are affine; the span distance restricted
        to a cell equals max(|d x_{t1}|, |d x_{t2}|) for all point pairs iff
        every other coordinate's gradient has l1 norm at most 1 in the
        (x_{t1}, x_{t2}) frame.  That condition is checked exactly here.
        """
        m = self.metric
        V = self.complex.vertices
        for t1, t2 in combinations(m.terminals, 2):
            ok = True
            for c in self.two:
                tri = None
                for cand in combinations(c.vertex_ids, 3):
                    a, b, d = (V[i] for i in cand)
                    det = ((b[t1] - a[t1]) * (d[t2] - a[t2])
                           - (d[t1] - a[t1]) * (b[t2] - a[t2]))
                    if det != 0:
                        tri = (a, b, d, det)
                        break
                if tri is None:
                    ok = False  # chart degenerate on this cell
                    break
                a, b, d, det = tri
                for t in m.terminals:
                    alpha = ((b[t] - a[t]) * (d[t2] - a[t2])
                             - (d[t] - a[t]) * (b[t2] - a[t2])) / det
                    beta = ((d[t] - a[t]) * (b[t1] - a[t1])
                            - (b[t] - a[t]) * (d[t1] - a[t1])) / det
                    if abs(alpha) + abs(beta) > 1:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                return (t1, t2)
        return None

    @staticmethod
    def _bary(tri, x, y):
        (x0, y0), (x1, y1), (x2, y2) = tri
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if det == 0:
            return None
        l1 = ((x - x0) * (y2 - y0) - (x2 - x0) * (y - y0)) / det
        l2 = ((x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)) / det
        l0 = 1 - l1 - l2
        return (l0, l1, l2)

    def _lift_point(self, pts, x, y):
        """TS point of the cell over planar (x, y), or None if outside."""
        for tri in combinations(pts, 3):
            coeff = self._bary([q[0] for q in tri], x, y)
            if coeff is None or any(c < 0 for c in coeff):
                continue
            vec = {}
            for t in self.metric.terminals:
                vec[t] = sum(c * q[1][t] for c, q in zip(coeff, tri))
            return _vec_key(self.metric, vec)
        return None

    def _vertex_token(self, vid):
        p = self.complex.vertices[vid]
        key = _vec_key(self.metric, p)
        if key in self.row_keys:
            return ("rep", key)
        cells = tuple(ci for ci, c in enumerate(self.two) if vid in c.vertex_ids)
        if cells:
            x, y = self.plan[vid]
            return ("cell", x, y, cells)
        return ("rep", key)

    def _localize_inner(self, p, key):
        cells = tuple(ci for ci, c in enumerate(self.two)
                      if point_in_cell(self.complex, c, p))
        if cells:
            x = (p[self.t1] + p[self.t2]) / 2
            y = (p[self.t1] - p[self.t2]) / 2
            return ("cell", x, y, cells)
        for ci, cell in enumerate(self.trees):
            i, j = sorted(cell.vertex_ids)
            vi, vj = self.complex.vertices[i], self.complex.vertices[j]
            ikey, jkey = _vec_key(self.metric, vi), _vec_key(self.metric, vj)
            if key == ikey or key == jkey:
                return self._vertex_token(i if key == ikey else j)
            if point_in_cell(self.complex, cell, p):
                return ("tree", ("t", ci), ts_distance(p, vi),
                        self._vertex_token(i), self._vertex_token(j))
        raise MetricError("point not on the planar span")

    def _cuts(self, draws):
        xcuts, ycuts = [], []
        for i in range(len(self.xs) - 1):
            if self.fold_bands and i == self.fold_bands[0]:
                xcuts.append(self.xs[i] + draws[("fold",)])
            else:
                xcuts.append(draws[("x", i)])
        for j in range(len(self.ys) - 1):
            if self.fold_bands and j == self.fold_bands[1]:
                s = draws[("fold",)]
                _, by, slope, h = self.fold_bands
                ycuts.append(self.ys[by] + s if slope == 1 else self.ys[by + 1] - s)
            else:
                ycuts.append(draws[("y", j)])
        return xcuts, ycuts

    def prepare(self, seed: int):
        draws = self.draws(seed)
        draws[("__cuts__",)] = self._cuts(draws)
        return draws

    def _resolve_inner(self, token, draws):
        _, x, y, cells = token
        cuts = draws.get(("__cuts__",))
        if cuts is None:
            cuts = self._cuts(draws)
        xcuts, ycuts = cuts
        gx = bisect_right(xcuts, x)
        gy = bisect_right(ycuts, y)
        for ci in cells:
            rep = self.lift.get((ci, gx, gy))
            if rep is not None:
                return rep
        raise MetricError("no anchor for a banded region (degenerate shape)")


def _build_model(cx: CellComplex):
    if max(c.dim for c in cx.cells) <= 1:
        try:
            return _TreeModel(cx)
        except MetricError:
            return _SnapModel(cx)
    try:
        return _FanModel(cx)
    except MetricError:
        pass
    try:
        return _PlanarModel(cx)
    except MetricError:
        pass
    return _SnapModel(cx)


def classify(cx: CellComplex) -> TSTemplate:
    """Classify a <=5-terminal span complex and extract its parameters."""
    if len(cx.metric.terminals) > 5:
        raise UnsupportedSizeError("classification supports at most 5 terminals")
    model = _build_model(cx)
    if isinstance(model, _FanModel):
        params = {f"pendant_{t}": model.pend_len[t] for t in cx.metric.terminals}
        for k, v in model.side_len.items():
            t, u = sorted(k)
            params[f"side_{t}_{u}"] = v
        return TSTemplate(tag="type1", params=params, cycle=model.cycle)
    if isinstance(model, _PlanarModel) and model.fold is not None:
        sizes = sorted(len(c.vertex_ids) for c in model.two)
        tag = "type2" if sizes == [3, 4, 4, 5, 5] else (
            "type3" if sizes == [4, 4, 4, 4, 5] else "degenerate")
        params: dict[str, Fraction] = {}
        for i in range(len(model.xs) - 1):
            params[f"x_band_{i}"] = model.xs[i + 1] - model.xs[i]
        for j in range(len(model.ys) - 1):
            params[f"y_band_{j}"] = model.ys[j + 1] - model.ys[j]
        params["fold"] = model.fold_bands[3]
        roles = {"fold_slope": str(model.fold_bands[2])}
        for t in cx.metric.terminals:
            vid = cx.vertex_id(cx.metric.row(t))
            attach = _attach_point(model, t)
            if attach is not None:
                params[f"pendant_{t}"] = attach[0]
                roles[f"terminal_{t}"] = attach[1]
        return TSTemplate(tag=tag, params=params, roles=roles, complex=cx)
    return TSTemplate(tag="degenerate", complex=cx)


def _attach_point(model: _PlanarModel, t: str):
    """Pendant length and planar position label for a terminal, if tree-attached."""
    cx, m = model.complex, model.metric
    row = m.row(t)
    vid = cx.vertex_id(row)
    if vid is None:
        return None
    for cell in model.trees:
        if vid in cell.vertex_ids:
            other = [w for w in cell.vertex_ids if w != vid][0]
            x, y = model.plan[other]
            return (ts_distance(row, cx.vertices[other]), f"({x},{y})")
    x, y = model.plan[vid]
    return (Fraction(0), f"({x},{y})")


class Decomposer:
    """Reusable sampler for one embedded graph (localization is precomputed)."""

    def __init__(self, embedded: EmbeddedGraph):
        g, m = embedded.graph, embedded.metric
        if len(m.terminals) > 5:
            raise UnsupportedSizeError("decomposition supports at most 5 terminals")
        for t in m.terminals:
            if _vec_key(m, embedded.points[g.terminals[t]]) != _vec_key(m, m.row(t)):
                raise MetricError(f"terminal {t} is not embedded at its own row")
        for v, p in embedded.points.items():
            if not in_tight_span(m, p):
                raise MetricError(f"embedded point of vertex {v} is outside the span")
        self.embedded = embedded
        self.complex = enumerate_complex(m)
        self.model = _build_model(self.complex)
        self.template = classify(self.complex)
        self.tokens = {v: self.model.localize(p) for v, p in embedded.points.items()}
        self._static = {v: tok[1] for v, tok in self.tokens.items() if tok[0] == "rep"}
        self._dynamic = [(v, tok) for v, tok in self.tokens.items() if tok[0] != "rep"]
        self._reps: list[tuple] = []
        self._rep_ids: dict[tuple, int] = {}
        self._static_ids = {v: self._intern(rep) for v, rep in self._static.items()}
        self._dist_cache: dict[tuple[int, int], Fraction] = {}

    def _intern(self, rep: tuple) -> int:
        rid = self._rep_ids.get(rep)
        if rid is None:
            rid = len(self._reps)
            self._rep_ids[rep] = rid
            self._reps.append(rep)
        return rid

    def assignment(self, seed: int) -> dict[Hashable, tuple]:
        draws = self.model.prepare(seed)
        out = dict(self._static)
        for v, tok in self._dynamic:
            out[v] = self.model.resolve(tok, draws)
        return out

    def assignment_ids(self, seed: int) -> dict[Hashable, int]:
        """Like assignment, but clusters are interned integer ids."""
        draws = self.model.prepare(seed)
        out = dict(self._static_ids)
        for v, tok in self._dynamic:
            out[v] = self._intern(self.model.resolve(tok, draws))
        return out

    def rep_of(self, rid: int) -> tuple:
        return self._reps[rid]

    def rep_distance(self, i: int, j: int) -> Fraction:
        if i == j:
            return Fraction(0)
        key = (i, j) if i < j else (j, i)
        d = self._dist_cache.get(key)
        if d is None:
            a, b = self._reps[key[0]], self._reps[key[1]]
            d = max(abs(x - y) for x, y in zip(a, b))
            self._dist_cache[key] = d
        return d

    def solution(self, seed: int) -> Solution:
        m = self.embedded.metric
        assign = self.assignment(seed)
        groups: dict[tuple, list] = {}
        for v in self.embedded.graph.vertices:
            groups.setdefault(assign[v], []).append(v)
        row_keys = {_vec_key(m, m.row(t)): t for t in m.terminals}
        clusters, by_vertex = [], {}
        steiner = 0
        for key in sorted(groups, key=lambda k: (k not in row_keys, k)):
            if key in row_keys:
                label = f"t:{row_keys[key]}"
            else:
                label = f"s{steiner}"
                steiner += 1
            idx = len(clusters)
            rep = dict(zip(m.terminals, key))
            clusters.append(Cluster(label=label, vertices=sorted(groups[key], key=str),
                                    rep=rep))
            for v in groups[key]:
                by_vertex[v] = idx
        return Solution(metric=m, clusters=clusters, by_vertex=by_vertex)


def sample_decomposition(embedded: EmbeddedGraph, seed: int) -> Solution:
    """One random bounded-size partition of the embedded graph."""
    return Decomposer(embedded).solution(seed)


def _all_pairs_dist(g: TerminalGraph) -> dict:
    adj = g.adjacency()
    return {v: shortest_distances(g, v, adj) for v in g.vertices}


def cost(embedded: EmbeddedGraph, sol: Solution) -> CostReport:
    g = embedded.graph
    missing = [v for v in g.vertices if v not in sol.by_vertex]
    if missing:
        raise GraphError(f"solution does not cover vertices {missing[:3]}")
    sp = _all_pairs_dist(g)
    vol = Fraction(0)
    opt = Fraction(0)
    for u, v, cap, _ in g.edges:
        vol += cap * sol.delta(sol.cluster_of(u), sol.cluster_of(v))
        opt += cap * sp[u][v]
    ratio = vol / opt if opt else Fraction(1)
    return CostReport(vol=vol, opt=opt, ratio=ratio)


@dataclass
class EdgeStat:
    edge: Edge
    mean_delta: Fraction
    stderr: float
    embed_dist: Fraction


@dataclass
class ExpectedCost:
    mean_vol: Fraction
    stderr: float
    opt: Fraction
    samples: int
    per_edge: list[EdgeStat] | None = None


def expected_cost(embedded: EmbeddedGraph, n_samples: int, master_seed: int,
                  per_edge: bool = False) -> ExpectedCost:
    """Monte Carlo mean (exact) and standard error of the solution cost.

    Per-sample seeds derive deterministically from `master_seed` by index, so
    the result does not depend on evaluation order.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    dec = Decomposer(embedded)
    g = embedded.graph
    edges = g.edges
    sums = [Fraction(0)] * len(edges)
    vol_sum = Fraction(0)
    vol_sq = 0.0
    vols = []
    edge_sq = [0.0] * len(edges)
    sp = _all_pairs_dist(g)
    opt = sum((cap * sp[u][v] for u, v, cap, _ in edges), Fraction(0))
    for i in range(n_samples):
        seed = (master_seed * _SEED_MIX + i) % (1 << 64)
        assign = dec.assignment_ids(seed)
        vol = Fraction(0)
        for ei, (u, v, cap, _) in enumerate(edges):
            d = dec.rep_distance(assign[u], assign[v])
            sums[ei] += d
            edge_sq[ei] += float(d) * float(d)
            vol += cap * d
        vol_sum += vol
        vol_sq += float(vol) * float(vol)
        vols.append(float(vol))
    n = n_samples
    mean = vol_sum / n
    var = max(vol_sq / n - float(mean) ** 2, 0.0)
    stderr = math.sqrt(var / (n - 1)) if n > 1 else 0.0
    stats = None
    if per_edge:
        stats = []
        for ei, (u, v, cap, _) in enumerate(edges):
            em = sums[ei] / n
            evar = max(edge_sq[ei] / n - float(em) ** 2, 0.0)
            stats.append(EdgeStat(
                edge=edges[ei],
                mean_delta=em,
                stderr=math.sqrt(evar / (n - 1)),
                embed_dist=ts_distance(embedded.points[u], embedded.points[v])))
    return ExpectedCost(mean_vol=mean, stderr=stderr, opt=opt, samples=n,
                        per_edge=stats)


def contract(g: TerminalGraph, sol: Solution) -> TerminalGraph:
    """Contract each cluster to a supernode, keeping parallel edges.

    Self-loops are dropped; contracted edges keep their capacity and take the
    cluster semi-metric as length, so dual evaluations on the sparsifier see
    the solution's distances.
    """
    missing = [v for v in g.vertices if v not in sol.by_vertex]
    if missing:
        raise GraphError(f"solution does not cover vertices {missing[:3]}")
    labels = [c.label for c in sol.clusters]
    edges = []
    for u, v, cap, _ in g.edges:
        cu, cv = sol.cluster_of(u), sol.cluster_of(v)
        if cu == cv:
            continue
        edges.append(Edge(labels[cu], labels[cv], cap, sol.delta(cu, cv)))
    terminals = {t: labels[sol.cluster_of(g.terminals[t])] for t in g.terminals}
    return TerminalGraph(vertices=list(labels), edges=edges, terminals=terminals)
