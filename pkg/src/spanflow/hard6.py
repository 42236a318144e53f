"""The six-terminal hard instance family and its loss diagnostics.

The fixed six-point metric has a tight span made of a unit-height triangular
prism glued to a planar parallelogram.  Points carry associated coordinates
(x, y, z) in the skewed frame anchored at terminal c; at resolution L the
instance is a union of terminal-to-terminal paths whose interior vertices walk
the 1/L grid along four critical step directions.  Every path is geodesic, so
the identity embedding has zero loss; the diagnostics measure how much any
bounded-image embedding must lose.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Mapping, NamedTuple

from .metric import MetricError, TerminalMetric, Vec, as_fraction, collinear_triples
from .graphs import Edge, TerminalGraph
from .flow import Demand
from .tightspan import in_tight_span

TERMS = ("a", "b", "c", "d", "e", "f")

_D6 = {
    ("a", "b"): 2, ("a", "c"): 1, ("a", "d"): 3, ("a", "e"): 1, ("a", "f"): 2,
    ("b", "c"): 1, ("b", "d"): 3, ("b", "e"): 3, ("b", "f"): 2,
    ("c", "d"): 2, ("c", "e"): 2, ("c", "f"): 3,
    ("d", "e"): 2, ("d", "f"): 1, ("e", "f"): 1,
}


def metric6() -> TerminalMetric:
    """The fixed 6-terminal metric (distances 3 across the prism axes)."""
    return TerminalMetric.from_pairs(
        {k: Fraction(v) for k, v in _D6.items()}, terminals=TERMS)


class AssocVec(NamedTuple):
    """Coordinates in the c-anchored skewed frame of the span."""
    x: Fraction
    y: Fraction
    z: Fraction


def _pos(v: Fraction) -> Fraction:
    return v if v > 0 else Fraction(0)


def from_assoc(a: AssocVec) -> Vec:
    """Distance vector of an associated point; validates the admissible region."""
    x, y, z = (as_fraction(c) for c in a)
    if z < 0 or z > 1:
        raise MetricError(f"z = {z} outside [0, 1]")
    if z > 0:
        if not (0 <= x <= 1 and y >= 0 and y + 2 * z <= 2):
            raise MetricError(f"prism point {a} outside the admissible region")
    else:
        if not (0 <= 2 * x + y <= 4 and 0 <= y <= 2):
            raise MetricError(f"planar point {a} outside the admissible region")
    return {
        "a": abs(x) + 1 - z,
        "b": x + 1 + z,
        "c": x + y + z,
        "d": 2 - x + z,
        "e": abs(x - 1) + 1 - z,
        "f": 3 - x - y - z,
    }


def to_assoc(p: Mapping[str, object]) -> AssocVec:
    """Associated coordinates of a span point (inverse of from_assoc)."""
    v = {t: as_fraction(p[t]) for t in TERMS}
    x = (v["b"] - v["d"] + 1) / 2
    z = v["b"] - x - 1
    y = v["c"] - x - z
    a = AssocVec(x, y, z)
    if from_assoc(a) != v:
        raise MetricError("point is not in the span of the 6-terminal metric")
    return a


def assoc_distance_lower(a: AssocVec, b: AssocVec) -> Fraction:
    """Lower bound |dx| + |dz| on the span distance (tight along axes 1-4)."""
    return abs(a.x - b.x) + abs(a.z - b.z)


def rect_distance(a: AssocVec, b: AssocVec) -> Fraction:
    """Exact span distance for two planar (z = 0) points."""
    if a.z != 0 or b.z != 0:
        raise MetricError("rect_distance requires z = 0 on both points")
    return (abs((2 * a.x + a.y) - (2 * b.x + b.y)) + abs(a.y - b.y)) / 2


def rect_project(p: Mapping[str, object]) -> Vec:
    """Project a span point onto the planar part: (x, y, z) -> (x, y + z, 0).

    Preserves distances to c and f and the b-d distance difference; equals the
    generic projection onto the span of the metric restricted to b, c, d, f.
    """
    a = to_assoc(p)
    return from_assoc(AssocVec(a.x, a.y + a.z, Fraction(0)))


@dataclass(frozen=True)
class PathRecord:
    name: str
    group: str
    i: int
    j: int
    source: str
    sink: str
    vertex_ids: tuple[str, ...]   # includes source and sink terminal ids
    capacity: Fraction
    direction: int | None


@dataclass
class AveData:
    triple_paths: list[PathRecord]
    demand: Demand
    gamma: Fraction


@dataclass
class HardInstance:
    L: int
    graph: TerminalGraph
    metric: TerminalMetric
    paths: list[PathRecord]
    assoc: dict[str, AssocVec]   # per grid vertex id
    vecs: dict[str, Vec]         # per vertex id (terminals included)
    ave: AveData | None = None

    def opt(self) -> Fraction:
        total = sum((p.capacity * self.metric.d(p.source, p.sink)
                     for p in self.paths), Fraction(0))
        if self.ave is not None:
            total += sum((p.capacity * self.metric.d(p.source, p.sink)
                          for p in self.ave.triple_paths), Fraction(0))
        return total

    def all_paths(self) -> list[PathRecord]:
        if self.ave is None:
            return self.paths
        return self.paths + self.ave.triple_paths

    def neighbor(self, vid: str, direction: int) -> str | None:
        """Grid vertex one step along a critical direction, if it exists."""
        a = self.assoc.get(vid)
        if a is None:
            return None
        L = self.L
        i, j, k = int(a.x * L), int(a.y * L / 2), int(a.z * L)
        if direction == 1:
            i, j, k = i, j, k + 1
        elif direction == 2:
            i, j, k = i, j + 1, k - 1
        elif direction == 3:
            i, j, k = i + 1, j, k
        elif direction == 4:
            i, j, k = i - 1, j + 1, k
        else:
            raise ValueError("direction must be 1..4")
        if i < 0 or i > L or j < 0 or k < 0 or j + k > L:
            return None
        return _vid(i, j, k)


def _vid(i: int, j: int, k: int) -> str:
    return f"p{i}_{j}_{k}"


_GROUP_CAPS = {
    "ad1": 2, "be1": 2, "ad2": 2, "be2": 2,
    "ad3": 1, "be3": 1, "cf3": 2,
    "ab": 1, "de": 1,
    "ad4": 1, "be4": 1, "cf4": 2,
}


def generate(L: int, ave: bool = False, gamma=Fraction(1, 10 ** 15)) -> HardInstance:
    """Build the instance at resolution L (the union of all path groups).

    Vertices are the grid points touched by paths plus the two off-grid
    terminals; each edge's length is the exact span distance of its endpoints.
    With `ave`, weight-L^2 three-vertex paths are added for every collinear
    terminal triple, together with the per-pair demand plus gamma * L^2
    between a and e.
    """
    if L < 2:
        raise MetricError("resolution L must be at least 2")
    m = metric6()
    gamma = as_fraction(gamma)

    assoc: dict[str, AssocVec] = {}
    vecs: dict[str, Vec] = {}

    def grid(i: int, j: int, k: int) -> str:
        vid = _vid(i, j, k)
        if vid not in assoc:
            a = AssocVec(Fraction(i, L), Fraction(2 * j, L), Fraction(k, L))
            assoc[vid] = a
            vecs[vid] = from_assoc(a)
        return vid

    terminals = {
        "a": grid(0, 0, L), "c": grid(0, 0, 0), "e": grid(L, 0, L),
        "f": grid(L, L, 0), "b": "b", "d": "d",
    }
    vecs["b"] = m.row("b")
    vecs["d"] = m.row("d")

    paths: list[PathRecord] = []

    def walk(group, i, j, src, snk, start, step, nsteps, direction):
        ids = [terminals[src]]
        ii, jj, kk = start
        for n in range(nsteps + 1):
            vid = grid(ii + n * step[0], jj + n * step[1], kk + n * step[2])
            if vid != ids[-1]:
                ids.append(vid)
        if terminals[snk] != ids[-1]:
            ids.append(terminals[snk])
        paths.append(PathRecord(
            name=f"{group}[{i},{j}]", group=group, i=i, j=j, source=src, sink=snk,
            vertex_ids=tuple(ids), capacity=Fraction(_GROUP_CAPS[group]),
            direction=direction))

    rng_all = [(i, j) for i in range(L + 1) for j in range(L + 1)]
    rng_tri = [(i, j) for i in range(L + 1) for j in range(L + 1) if i + j <= L]
    for i, j in rng_all:
        walk("ad1", i, j, "d", "a", (i, j, 0), (0, 0, 1), L - j, 1)
        walk("be1", i, j, "b", "e", (i, j, 0), (0, 0, 1), L - j, 1)
        walk("ad2", i, j, "a", "d", (i, 0, j), (0, 1, -1), j, 2)
        walk("be2", i, j, "e", "b", (i, 0, j), (0, 1, -1), j, 2)
    for i, j in rng_tri:
        walk("ad3", i, j, "a", "d", (0, i, j), (1, 0, 0), L, 3)
        walk("be3", i, j, "b", "e", (0, i, j), (1, 0, 0), L, 3)
        walk("cf3", i, j, "c", "f", (0, i, j), (1, 0, 0), L, 3)
        walk("ab", i, j, "a", "b", (0, i, j), (0, 0, 0), 0, None)
        walk("de", i, j, "e", "d", (L, i, j), (0, 0, 0), 0, None)
    for grp, src, snk in (("ad4", "d", "a"), ("be4", "e", "b"), ("cf4", "c", "f")):
        for i, j in rng_tri:
            walk(grp, i, j, src, snk, (i, 0, j), (-1, 1, 0), i, 4)
        for i in range(L + 1):
            for j in range(L + 1):
                if L < i + j:
                    walk(grp, i, j, src, snk, (i, 0, j), (-1, 1, 0), L - j, 4)
        for i in range(L + 1, 2 * L + 1):
            for j in range(0, min(L, 2 * L - i) + 1):
                walk(grp, i, j, src, snk, (L, i - L, j), (-1, 1, 0), 2 * L - i - j, 4)

    edges: list[Edge] = []
    for p in paths:
        ids = p.vertex_ids
        for u, v in zip(ids, ids[1:]):
            edges.append(Edge(u, v, p.capacity, _vec_dist(vecs[u], vecs[v])))

    ave_data = None
    if ave:
        weight = Fraction(L * L)
        triples = collinear_triples(m)
        tri_paths = []
        for t, mid, u in triples:
            ids = (terminals[t], terminals[mid], terminals[u])
            tri_paths.append(PathRecord(
                name=f"tri[{t}{mid}{u}]", group="tri", i=0, j=0, source=t, sink=u,
                vertex_ids=ids, capacity=weight, direction=None))
            edges.append(Edge(ids[0], ids[1], weight, m.d(t, mid)))
            edges.append(Edge(ids[1], ids[2], weight, m.d(mid, u)))
        dem: dict[tuple[str, str], Fraction] = {}
        for p in paths + tri_paths:
            key = (p.source, p.sink) if p.source <= p.sink else (p.sink, p.source)
            dem[key] = dem.get(key, Fraction(0)) + p.capacity
        dem[("a", "e")] = dem.get(("a", "e"), Fraction(0)) + gamma * weight
        ave_data = AveData(triple_paths=tri_paths, demand=Demand(dem), gamma=gamma)

    graph = TerminalGraph(vertices=list(vecs), edges=edges, terminals=terminals)
    return HardInstance(L=L, graph=graph, metric=m, paths=paths,
                        assoc=assoc, vecs=vecs, ave=ave_data)


def _vec_dist(p: Vec, q: Vec) -> Fraction:
    return max(abs(p[t] - q[t]) for t in TERMS)


# ---------------------------------------------------------------------------
# candidate solutions and losses


@dataclass
class CandidateSolution:
    """A bounded-image embedding: every vertex mapped to a span point."""
    f: dict[str, Vec]

    def image_size(self) -> int:
        return len({tuple(v[t] for t in TERMS) for v in self.f.values()})


def identity_solution(inst: HardInstance) -> CandidateSolution:
    return CandidateSolution(f=dict(inst.vecs))


def grid_snap(inst: HardInstance, g: int) -> CandidateSolution:
    """Snap every non-terminal to the g-grid of associated coordinates.

    x and z round to multiples of 1/g, y to multiples of 2/g; z is then
    reduced onto the grid until the point is admissible again.  Terminals stay
    fixed, so the image has at most (g+1)^3 + 6 points.
    """
    if g < 1:
        raise MetricError("snap grid must be at least 1")
    terminal_ids = set(inst.graph.terminals.values())
    f: dict[str, Vec] = {}
    for vid, vec in inst.vecs.items():
        if vid in terminal_ids:
            f[vid] = dict(vec)
            continue
        a = inst.assoc[vid]
        xi = min(max(floor(a.x * g + Fraction(1, 2)), 0), g)
        yi = min(max(floor(a.y * g / 2 + Fraction(1, 2)), 0), g)
        zi = min(max(floor(a.z * g + Fraction(1, 2)), 0), g)
        zi = min(zi, g - yi)
        f[vid] = from_assoc(AssocVec(Fraction(xi, g), Fraction(2 * yi, g), Fraction(zi, g)))
    return CandidateSolution(f=f)


@dataclass
class PathLoss:
    name: str
    group: str
    capacity: Fraction
    excess: Fraction      # embedded length minus terminal distance
    loss: Fraction        # capacity * excess

    def to_json_dict(self) -> dict:
        return {"name": self.name, "group": self.group,
                "capacity": str(self.capacity), "excess": str(self.excess),
                "loss": str(self.loss)}


@dataclass
class LossReport:
    per_path: list[PathLoss]
    total: Fraction       # == vol - opt

    def to_json_dict(self) -> dict:
        return {"total": str(self.total),
                "paths": [p.to_json_dict() for p in self.per_path]}


def _check_cover(inst: HardInstance, sol: CandidateSolution):
    missing = [v for v in inst.vecs if v not in sol.f]
    if missing:
        raise MetricError(f"solution misses vertices {missing[:3]}")
    for t, vid in inst.graph.terminals.items():
        if sol.f[vid] != inst.metric.row(t):
            raise MetricError(f"terminal {t} must map to itself")
    checked: set[tuple] = set()
    for vid, vec in sol.f.items():
        key = tuple(vec[t] for t in TERMS)
        if key in checked:
            continue
        checked.add(key)
        if not in_tight_span(inst.metric, vec):
            raise MetricError(f"image of vertex {vid} is outside the span")


def losses(inst: HardInstance, sol: CandidateSolution) -> LossReport:
    """Capacity-weighted per-path losses; total equals vol - opt exactly."""
    _check_cover(inst, sol)
    f = sol.f
    out = []
    total = Fraction(0)
    for p in inst.all_paths():
        ids = p.vertex_ids
        length = sum((_vec_dist(f[u], f[v]) for u, v in zip(ids, ids[1:])),
                     Fraction(0))
        excess = length - inst.metric.d(p.source, p.sink)
        loss = p.capacity * excess
        total += loss
        out.append(PathLoss(name=p.name, group=p.group, capacity=p.capacity,
                            excess=excess, loss=loss))
    return LossReport(per_path=out, total=total)


#: direction -> ((table, anchor) pairs entering that direction's aggregate bound)
AGGREGATE_TERMS = {
    1: (("fwd", "d"), ("fwd", "b")),
    2: (("bwd", "d"), ("bwd", "b")),
    3: (("bwd", "d"), ("fwd", "b"), ("fwd", "c"), ("fwd", "c")),
    4: (("fwd", "d"), ("bwd", "b"), ("fwd", "c"), ("fwd", "c")),
}


@dataclass
class DirectionalReport:
    """Telescoping losses per vertex, direction 1..4 and anchor in {b, c, d}."""
    forward: dict[tuple[str, int, str], Fraction]   # l_i(v, t)
    backward: dict[tuple[str, int, str], Fraction]  # l'_i(v, t)
    aggregates: list[tuple[str, Fraction, Fraction]]  # (label, lhs, rhs)
    x_bounds_ok: bool
    x_bound_failures: list[str]

    def aggregate_entries(self):
        """The (key, value) table entries the aggregate bounds sum over."""
        for (vid, direction, t), val in self.forward.items():
            if ("fwd", t) in AGGREGATE_TERMS[direction]:
                yield (vid, direction, t, "fwd"), val
        for (vid, direction, t), val in self.backward.items():
            if ("bwd", t) in AGGREGATE_TERMS[direction]:
                yield (vid, direction, t, "bwd"), val


def directional_losses(inst: HardInstance, sol: CandidateSolution) -> DirectionalReport:
    """Per-vertex direction losses plus the four aggregate lower bounds.

    Each aggregate compares the (unweighted, with the stated coefficients)
    loss of a path family against the summed telescoping terms it dominates.
    """
    _check_cover(inst, sol)
    f = sol.f
    rows = {t: inst.metric.row(t) for t in TERMS}
    fwd: dict[tuple[str, int, str], Fraction] = {}
    bwd: dict[tuple[str, int, str], Fraction] = {}
    dist_to = {t: {} for t in ("a", "b", "c", "d", "e")}

    def td(t, vid):
        cache = dist_to[t]
        if vid not in cache:
            cache[vid] = _vec_dist(f[vid], rows[t])
        return cache[vid]

    nbrs: dict[tuple[str, int], str] = {}
    for vid in inst.assoc:
        for direction in (1, 2, 3, 4):
            w = inst.neighbor(vid, direction)
            if w is None:
                continue
            nbrs[(vid, direction)] = w
            step = _vec_dist(f[vid], f[w])
            for t in ("b", "c", "d"):
                fwd[(vid, direction, t)] = step + td(t, vid) - td(t, w)
                bwd[(vid, direction, t)] = step - td(t, vid) + td(t, w)

    group_excess: dict[str, Fraction] = {}
    for p in inst.paths:
        ids = p.vertex_ids
        length = sum((_vec_dist(f[u], f[v]) for u, v in zip(ids, ids[1:])),
                     Fraction(0))
        group_excess[p.group] = (group_excess.get(p.group, Fraction(0))
                                 + length - inst.metric.d(p.source, p.sink))

    def rhs_sum(direction, terms):
        tot = Fraction(0)
        for (vid, d2), _ in nbrs.items():
            if d2 != direction:
                continue
            for table, t in terms:
                tot += table[(vid, direction, t)]
        return tot

    aggregates = [
        ("dir1", group_excess["ad1"] + group_excess["be1"],
         rhs_sum(1, [(fwd, "d"), (fwd, "b")])),
        ("dir2", group_excess["ad2"] + group_excess["be2"],
         rhs_sum(2, [(bwd, "d"), (bwd, "b")])),
        ("dir3", group_excess["ad3"] + group_excess["be3"] + 2 * group_excess["cf3"],
         rhs_sum(3, [(bwd, "d"), (fwd, "b")]) + 2 * rhs_sum(3, [(fwd, "c")])),
        ("dir4", group_excess["ad4"] + group_excess["be4"] + 2 * group_excess["cf4"],
         rhs_sum(4, [(fwd, "d"), (bwd, "b")]) + 2 * rhs_sum(4, [(fwd, "c")])),
    ]

    failures = []
    fx = {vid: to_assoc(f[vid]).x for vid in inst.assoc}
    fx["b"] = to_assoc(f["b"]).x
    fx["d"] = to_assoc(f["d"]).x
    for (vid, direction), w in nbrs.items():
        if direction == 1:
            if fwd[(vid, 1, "d")] + fwd[(vid, 1, "b")] < 2 * abs(fx[vid] - fx[w]):
                failures.append(f"dir1 x-bound at {vid}")
        elif direction == 2:
            if bwd[(vid, 2, "d")] + bwd[(vid, 2, "b")] < 2 * abs(fx[vid] - fx[w]):
                failures.append(f"dir2 x-bound at {vid}")
    for vid in inst.vecs:
        av = _vec_dist(f[vid], rows["a"]) + _vec_dist(f[vid], rows["b"])
        if av < 2 + 2 * _pos(fx.get(vid, to_assoc(f[vid]).x)):
            failures.append(f"ab anchor bound at {vid}")
        de = _vec_dist(f[vid], rows["d"]) + _vec_dist(f[vid], rows["e"])
        if de < 2 + 2 * _pos(1 - fx.get(vid, to_assoc(f[vid]).x)):
            failures.append(f"de anchor bound at {vid}")
    return DirectionalReport(forward=fwd, backward=bwd, aggregates=aggregates,
                             x_bounds_ok=not failures, x_bound_failures=failures)


@dataclass
class PlanarReport:
    """Losses of the planar projection p(v) = fold-down of f(v)."""
    l_x: dict[str, Fraction]
    l_y: dict[str, Fraction]
    l_z1: dict[str, Fraction]
    l_z2: dict[str, Fraction]
    table: dict[tuple[int, int], Fraction]   # l[jy, kz] per grid line
    step_bound_failures: list[str]
    transfer_bound_failures: list[str]
    bound_lhs: Fraction     # vol - opt
    bound_rhs: Fraction     # 2/3 sum of planar losses + boundary sums


def planar_losses(inst: HardInstance, sol: CandidateSolution) -> PlanarReport:
    _check_cover(inst, sol)
    L = inst.L
    proj: dict[str, AssocVec] = {}
    for vid in inst.vecs:
        proj[vid] = to_assoc(rect_project(sol.f[vid]))

    def shifted(vid, di, dj):
        a = inst.assoc.get(vid)
        if a is None:
            return None
        i, j, k = int(a.x * L), int(a.y * L / 2), int(a.z * L)
        i, j = i + di, j + dj
        if i < 0 or i > L or j + k > L:
            return None
        return _vid(i, j, k)

    l_x: dict[str, Fraction] = {}
    l_y: dict[str, Fraction] = {}
    l_z1: dict[str, Fraction] = {}
    l_z2: dict[str, Fraction] = {}
    for vid in inst.assoc:
        p0 = proj[vid]
        w3 = shifted(vid, 1, 0)
        w4 = shifted(vid, -1, 1)
        w34 = shifted(vid, 0, 1)
        w234 = shifted(vid, 1, 1)
        if w3 is not None:
            p3 = proj[w3]
            l_x[vid] = (abs(p0.y - p3.y)
                        + 2 * _pos((2 * p0.x + p0.y) - (2 * p3.x + p3.y)))
        if w34 is not None:
            l_y[vid] = 2 * abs(p0.x - proj[w34].x)
        if w4 is not None:
            p4 = proj[w4]
            l_z1[vid] = abs((2 * p0.x + p0.y) - (2 * p4.x + p4.y))
        if w234 is not None:
            p5 = proj[w234]
            l_z2[vid] = abs((2 * p0.x - p0.y) - (2 * p5.x - p5.y))

    cx_fail = []
    for vid, val in l_x.items():
        w3 = shifted(vid, 1, 0)
        if val < 2 * _pos(proj[vid].x - proj[w3].x):
            cx_fail.append(vid)
    tr_fail = []
    for vid in inst.assoc:
        w3 = shifted(vid, 1, 0)
        w34 = shifted(vid, 0, 1)
        if (vid in l_z2 and vid in l_x and w34 in l_x and vid in l_y
                and w3 in l_y and w3 in l_z1):
            rhs = l_x[vid] + l_x[w34] + l_y[vid] + l_y[w3] + l_z1[w3]
            if l_z2[vid] > rhs:
                tr_fail.append(vid)

    table: dict[tuple[int, int], Fraction] = {}
    for jy in range(L + 1):
        for kz in range(L + 1 - jy):
            tot = Fraction(0)
            for q in range(L + 1):
                vid = _vid(q, jy, kz)
                tot += (l_x.get(vid, Fraction(0)) + l_y.get(vid, Fraction(0))
                        + l_z1.get(vid, Fraction(0)) + l_z2.get(vid, Fraction(0)))
            tot += 3 * _pos(proj[_vid(0, jy, kz)].x)
            tot += 3 * _pos(1 - proj[_vid(L, jy, kz)].x)
            table[(jy, kz)] = tot

    lhs = losses(inst, sol).total
    planar_sum = (sum(l_x.values(), Fraction(0)) + sum(l_y.values(), Fraction(0))
                  + sum(l_z1.values(), Fraction(0)) + sum(l_z2.values(), Fraction(0)))
    bound0 = sum((2 * _pos(proj[_vid(0, jy, kz)].x)
                  for jy in range(L + 1) for kz in range(L + 1 - jy)), Fraction(0))
    bound1 = sum((2 * _pos(1 - proj[_vid(L, jy, kz)].x)
                  for jy in range(L + 1) for kz in range(L + 1 - jy)), Fraction(0))
    rhs = Fraction(2, 3) * planar_sum + bound0 + bound1
    return PlanarReport(l_x=l_x, l_y=l_y, l_z1=l_z1, l_z2=l_z2, table=table,
                        step_bound_failures=cx_fail, transfer_bound_failures=tr_fail,
                        bound_lhs=lhs, bound_rhs=rhs)


# ---------------------------------------------------------------------------
# average-version machinery


def _delta_lookup(deltas: Mapping[tuple[str, str], object]):
    norm = {}
    for (t, u), v in deltas.items():
        key = (t, u) if t <= u else (u, t)
        norm[key] = as_fraction(v)
    for t, u in _D6:
        if (t, u) not in norm:
            raise MetricError(f"missing delta for pair ({t}, {u})")

    def get(t, u):
        return norm[(t, u)] if t <= u else norm[(u, t)]
    return norm, get


@dataclass
class GoodReport:
    good: bool
    violations: list[str]


def check_good(inst: HardInstance, deltas: Mapping[tuple[str, str], object],
               eta) -> GoodReport:
    """Are all collinear-triple equalities respected up to slack eta?

    A triple violates when its positive slack reaches eta (exact equalities
    never violate, even at eta = 0).
    """
    if inst.ave is None:
        raise MetricError("check_good needs an average-version instance")
    eta = as_fraction(eta)
    _, get = _delta_lookup(deltas)
    violations = []
    for t, mid, u in collinear_triples(inst.metric):
        slack = get(t, mid) + get(mid, u) - get(t, u)
        if slack > 0 and slack >= eta:
            violations.append(f"triple ({t}, {mid}, {u}): slack {slack}")
    return GoodReport(good=not violations, violations=violations)


def _adjusted_table(A: Fraction, B: Fraction) -> dict[tuple[str, str], Fraction]:
    table = {
        ("a", "c"): A, ("b", "c"): A, ("d", "f"): A, ("e", "f"): A,
        ("a", "e"): B,
        ("a", "b"): 2 * A, ("d", "e"): 2 * A,
        ("a", "f"): A + B, ("b", "f"): A + B, ("c", "d"): A + B, ("c", "e"): A + B,
        ("a", "d"): 2 * A + B, ("b", "e"): 2 * A + B, ("c", "f"): 2 * A + B,
        ("b", "d"): 2 * A + B,
    }
    return table


@dataclass
class AdjustedSolution:
    deltas: dict[tuple[str, str], Fraction]     # exact-collinear terminal table
    cluster_vectors: dict[tuple, Vec]           # original image point -> new vector
    scale: Fraction                             # normalization factor
    image_size_before: int
    image_size_after: int
    cost_before: Fraction
    cost_after: Fraction


def _candidate_cost(inst: HardInstance, sol: CandidateSolution,
                    get_delta) -> Fraction:
    """Cost of a candidate whose terminal-pair distances come from `get_delta`."""
    terminal_of = {vid: t for t, vid in inst.graph.terminals.items()}
    rows = {t: inst.metric.row(t) for t in TERMS}

    def dist(u, v):
        tu, tv = terminal_of.get(u), terminal_of.get(v)
        if tu is not None and tv is not None:
            return get_delta(tu, tv) if tu != tv else Fraction(0)
        if tu is not None:
            return _vec_dist(sol.f[v], rows[tu])
        if tv is not None:
            return _vec_dist(sol.f[u], rows[tv])
        return _vec_dist(sol.f[u], sol.f[v])

    return sum((cap * dist(u, v) for u, v, cap, _ in inst.graph.edges), Fraction(0))


def adjust_solution(inst: HardInstance, sol: CandidateSolution,
                    deltas: Mapping[tuple[str, str], object], eta) -> AdjustedSolution:
    """Repair near-collinear terminal distances into exact collinearity.

    Requires a `good` input (see check_good).  Terminals are split into
    singleton clusters, every other cluster vector x is remapped through
    x_t := max_s |x_s - delta'(t, s)|, and everything is rescaled so the
    demand-weighted average terminal distance is unchanged.  The image grows
    by at most six and the cost by at most a factor (1 + 30 * eta).
    """
    if inst.ave is None:
        raise MetricError("adjust_solution needs an average-version instance")
    eta = as_fraction(eta)
    report = check_good(inst, deltas, eta)
    if not report.good:
        raise MetricError("input is not good: " + "; ".join(report.violations))
    _check_cover(inst, sol)
    _, get_in = _delta_lookup(deltas)

    A = get_in("b", "c") - 3 * eta
    B = get_in("a", "e") - 3 * eta
    table = _adjusted_table(A, B)

    def get_new(t, u):
        return table[(t, u)] if (t, u) in table else table[(u, t)]

    for t, mid, u in collinear_triples(inst.metric):
        if get_new(t, mid) + get_new(mid, u) != get_new(t, u):
            raise MetricError("adjusted table violates a collinear triple")

    tbar = {t: {s: (get_new(t, s) if s != t else Fraction(0)) for s in TERMS}
            for t in TERMS}
    terminal_ids = set(inst.graph.terminals.values())
    images: dict[tuple, Vec] = {}
    for vid, vec in sol.f.items():
        if vid in terminal_ids:
            continue
        images.setdefault(tuple(vec[t] for t in TERMS), vec)
    remapped: dict[tuple, Vec] = {}
    for key, vec in images.items():
        remapped[key] = {t: max(abs(vec[s] - tbar[t][s]) for s in TERMS)
                         for t in TERMS}

    demand = inst.ave.demand
    avg_in = demand.total_weighted({k: get_in(*k) for k in _D6})
    avg_new = demand.total_weighted({k: get_new(*k) for k in _D6})
    scale = avg_in / avg_new
    for key in remapped:
        remapped[key] = {t: scale * x for t, x in remapped[key].items()}
    final_table = {k: scale * v for k, v in table.items()}

    def get_final(t, u):
        if t == u:
            return Fraction(0)
        return final_table[(t, u)] if (t, u) in final_table else final_table[(u, t)]

    cost_before = _candidate_cost(inst, sol, get_in)
    terminal_of = {vid: t for t, vid in inst.graph.terminals.items()}

    def dist_after(u, v):
        tu, tv = terminal_of.get(u), terminal_of.get(v)
        if tu is not None and tv is not None:
            return get_final(tu, tv)
        if tu is not None:
            return remapped[tuple(sol.f[v][t] for t in TERMS)][tu]
        if tv is not None:
            return remapped[tuple(sol.f[u][t] for t in TERMS)][tv]
        xu = remapped[tuple(sol.f[u][t] for t in TERMS)]
        xv = remapped[tuple(sol.f[v][t] for t in TERMS)]
        return max(abs(xu[t] - xv[t]) for t in TERMS)

    cost_after = sum((cap * dist_after(u, v) for u, v, cap, _ in inst.graph.edges),
                     Fraction(0))

    before = sol.image_size()
    after = len({tuple(v[t] for t in TERMS) for v in remapped.values()}) + 6
    return AdjustedSolution(
        deltas=final_table, cluster_vectors=remapped, scale=scale,
        image_size_before=before, image_size_after=after,
        cost_before=cost_before, cost_after=cost_after)
