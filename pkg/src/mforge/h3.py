"""The thin rank-3 geometry with pentagon residues (the icosahedron), its
projection calculus, the precondition analysis of the thick-pentagon
elation recipe, and the pentagon-parameter feasibility sweep.

Everything here is exact: the icosahedron is built from golden-ratio
coordinates represented as integer pairs a + b*phi, and the feasibility
test runs in rational arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

import numpy as np

from .errors import ClosureCapExceeded, ConsecutiveNotOpposite, NotOpposite

# scalars in Z[phi] as (a, b) = a + b*phi, with phi^2 = phi + 1
PHI = (0, 1)
ONE = (1, 0)
ZERO = (0, 0)


def _phi_mul(x, y):
    a, b = x
    c, d = y
    return (a * c + b * d, a * d + b * c + b * d)


def _phi_add(x, y):
    return (x[0] + y[0], x[1] + y[1])


def _dot(u, v):
    acc = ZERO
    for x, y in zip(u, v):
        acc = _phi_add(acc, _phi_mul(x, y))
    return acc


@dataclass
class ThinH3Geom:
    """The icosahedron as a point-line-plane geometry: 12 vertices, 30
    edges, 20 triangular faces, plus the graph-distance table (0..3)."""

    coords: tuple
    adjacency: np.ndarray
    distance: np.ndarray
    lines: tuple
    planes: tuple
    pair_line: dict = field(default_factory=dict, repr=False)
    lines_through: list = field(default_factory=list, repr=False)
    planes_through: list = field(default_factory=list, repr=False)
    line_sets: list = field(default_factory=list, repr=False)
    plane_sets: list = field(default_factory=list, repr=False)

    @property
    def num_points(self):
        return 12

    def antipode(self, p: int) -> int:
        return int(np.flatnonzero(self.distance[p] == 3)[0])

    def line_through(self, a: int, b: int) -> int:
        return self.pair_line[(a, b) if a < b else (b, a)]

    def neighbors(self, p: int):
        return [int(x) for x in np.flatnonzero(self.adjacency[p]) if x != p]


def build_icosahedron() -> ThinH3Geom:
    """Deterministic icosahedron: the cyclic golden-ratio coordinate
    pattern (0, ±1, ±phi), quantized to adjacency by exact dot products
    (two vertices are adjacent iff their dot product equals phi)."""
    base = []
    for s1, s2 in itertools.product((1, -1), repeat=2):
        pats = [
            (ZERO, (s1, 0), (0, s2)),
            ((s1, 0), (0, s2), ZERO),
            ((0, s2), ZERO, (s1, 0)),
        ]
        base.extend(pats)
    coords = tuple(sorted(base))
    assert len(coords) == 12
    adj = np.zeros((12, 12), dtype=bool)
    for i, j in itertools.combinations(range(12), 2):
        if _dot(coords[i], coords[j]) == PHI:
            adj[i, j] = adj[j, i] = True
    np.fill_diagonal(adj, True)

    dist = np.full((12, 12), -1, dtype=np.int64)
    for s in range(12):
        dist[s, s] = 0
        frontier = [s]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for x in frontier:
                for y in range(12):
                    if adj[x, y] and dist[s, y] < 0:
                        dist[s, y] = d
                        nxt.append(y)
            frontier = nxt

    lines = tuple(sorted((i, j) for i, j in itertools.combinations(range(12), 2)
                         if adj[i, j]))
    planes = tuple(sorted(t for t in itertools.combinations(range(12), 3)
                          if adj[t[0], t[1]] and adj[t[0], t[2]] and adj[t[1], t[2]]))
    geom = ThinH3Geom(coords=coords, adjacency=adj, distance=dist,
                      lines=lines, planes=planes)
    geom.pair_line = {l: i for i, l in enumerate(lines)}
    geom.lines_through = [[i for i, l in enumerate(lines) if p in l]
                          for p in range(12)]
    geom.planes_through = [[i for i, t in enumerate(planes) if p in t]
                           for p in range(12)]
    geom.line_sets = [frozenset(l) for l in lines]
    geom.plane_sets = [frozenset(t) for t in planes]
    assert len(lines) == 30 and len(planes) == 20
    return geom


@dataclass(frozen=True)
class H3Relation:
    """Classification of a point pair with its witnessing structure."""

    pair: tuple
    rel: str                  # equal | collinear | distance-2 | opposite
    certificate: object = None


def classify_pair(geom: ThinH3Geom, p: int, b: int) -> H3Relation:
    """Distance-based classification; distance 2 carries the unique
    common-perp line, distance 3 the induced pentagon around p."""
    d = int(geom.distance[p, b])
    if d == 0:
        return H3Relation((p, b), "equal")
    if d == 1:
        return H3Relation((p, b), "collinear", geom.line_through(p, b))
    if d == 2:
        common = [x for x in range(12)
                  if geom.adjacency[p, x] and geom.adjacency[b, x]
                  and x not in (p, b)]
        assert len(common) == 2 and geom.adjacency[common[0], common[1]], \
            "distance-2 pair without a unique common-perp line"
        return H3Relation((p, b), "distance-2",
                          geom.line_through(common[0], common[1]))
    ring = geom.neighbors(p)
    cycle = [ring[0]]
    while len(cycle) < 5:
        nxt = next(x for x in ring
                   if x not in cycle and geom.adjacency[cycle[-1], x])
        cycle.append(nxt)
    assert geom.adjacency[cycle[-1], cycle[0]], "neighbor ring is not a pentagon"
    return H3Relation((p, b), "opposite", tuple(cycle))


def h3_proj_plane(geom: ThinH3Geom, b: int, plane: int, p: int) -> int:
    """Project a plane through b to the opposite point p: the image is the
    line p*p' where p' is the unique neighbor of p collinear to the unique
    line of the plane all of whose points have distance 2 to p."""
    if geom.distance[p, b] != 3:
        raise NotOpposite(f"{p} and {b} are not opposite")
    tri = geom.plane_sets[plane]
    if b not in tri:
        raise ValueError(f"plane {plane} does not pass through {b}")
    far = [(x, y) for x, y in itertools.combinations(sorted(tri), 2)
           if geom.distance[p, x] == 2 and geom.distance[p, y] == 2]
    assert len(far) == 1, "far line of the plane is not unique"
    s, t = far[0]
    cands = [x for x in range(12)
             if geom.adjacency[x, s] and geom.adjacency[x, t]
             and geom.distance[p, x] <= 1 and x not in (s, t)]
    assert len(cands) == 1, "projection target is not unique"
    return geom.line_through(p, cands[0])


def h3_proj_line(geom: ThinH3Geom, b: int, line: int, p: int) -> int:
    """Project a line through b to the opposite point p: the image is the
    plane spanned by p and the unique common-perp line of p and the point
    of the line at distance 2."""
    if geom.distance[p, b] != 3:
        raise NotOpposite(f"{p} and {b} are not opposite")
    lset = geom.line_sets[line]
    if b not in lset:
        raise ValueError(f"line {line} does not pass through {b}")
    near = [x for x in lset if geom.distance[p, x] == 2]
    assert len(near) == 1, "distance-2 point of the line is not unique"
    ell = near[0]
    rel = classify_pair(geom, p, ell)
    lprime = rel.certificate
    x, y = sorted(geom.line_sets[lprime])
    tri = frozenset((p, x, y))
    assert tri in geom.plane_sets, "projected plane is not a face"
    return geom.plane_sets.index(tri)


def h3_chain_eval(geom: ThinH3Geom, bases, element) -> tuple:
    """Evaluate a projection chain on one residue element.

    `element` is ("line", id) or ("plane", id) incident with bases[0]; each
    step swaps the element type (planes project to lines and vice versa).
    Returns (final element, step log).
    """
    bases = [int(x) for x in bases]
    for i in range(len(bases) - 1):
        if geom.distance[bases[i], bases[i + 1]] != 3:
            raise ConsecutiveNotOpposite(
                f"bases {bases[i]}, {bases[i + 1]} are not opposite", index=i)
    kind, cur = element
    log = []
    for i in range(len(bases) - 1):
        frm, to = bases[i], bases[i + 1]
        if kind == "plane":
            nxt = h3_proj_plane(geom, frm, cur, to)
            nkind = "line"
        else:
            nxt = h3_proj_line(geom, frm, cur, to)
            nkind = "plane"
        log.append({"from": frm, "to": to, "element": (kind, cur),
                    "image": (nkind, nxt)})
        kind, cur = nkind, nxt
    return (kind, cur), log


def h3_residual_map(geom: ThinH3Geom, bases) -> dict:
    """A closed even chain evaluated on every element of the first base's
    residue (its pentagon): line->line and plane->plane maps."""
    b = bases[0]
    assert bases[-1] == b and (len(bases) - 1) % 2 == 0
    line_map, plane_map = {}, {}
    for lid in geom.lines_through[b]:
        (kind, img), _ = h3_chain_eval(geom, bases, ("line", lid))
        assert kind == "line"
        line_map[lid] = img
    for pid in geom.planes_through[b]:
        (kind, img), _ = h3_chain_eval(geom, bases, ("plane", pid))
        assert kind == "plane"
        plane_map[pid] = img
    return {"line_map": line_map, "plane_map": plane_map}


# ---------------------------------------------------------------------------
# the thick-pentagon recipe, analyzed in the thin model

def h3_recipe_preconditions(geom: ThinH3Geom, b: int, p: int) -> dict:
    """Report the choice sets the thick-pentagon elation recipe requires,
    evaluated in the thin model.

    The recipe needs a point on the line b0*b4 distinct from both ends,
    and a point on the line b*b1 distinct from both ends.  Thin lines have
    exactly two points, so both choice sets are empty and the recipe is
    not instantiable; the report records the labeled apartment data and
    the conclusion.
    """
    if geom.distance[p, b] != 3:
        raise NotOpposite(f"{p} and {b} are not opposite")
    # label the pentagon around b: its neighbors, in cyclic order
    b_cycle = classify_pair(geom, b, p).certificate
    bs = {i: b_cycle[i] for i in range(5)}
    # p_i: the common neighbor of b_{i-1} and b_i on the p-side
    p_ring = set(geom.neighbors(p))
    ps = {}
    for i in range(5):
        x, y = bs[(i - 1) % 5], bs[i]
        cands = [z for z in p_ring
                 if geom.adjacency[z, x] and geom.adjacency[z, y]]
        assert len(cands) == 1, "pentagon labeling is ambiguous"
        ps[i] = cands[0]
    line_b0b4 = geom.line_through(bs[0], bs[4])
    line_bb1 = geom.line_through(b, bs[1])
    choice_b4p = sorted(geom.line_sets[line_b0b4] - {bs[0], bs[4]})
    choice_d = sorted(geom.line_sets[line_bb1] - {b, bs[1]})
    return {
        "b": b, "p": p,
        "b_labels": bs, "p_labels": ps,
        "choice_set_b4_prime": choice_b4p,
        "choice_set_d": choice_d,
        "instantiable": bool(choice_b4p and choice_d),
        "conclusion": ("Instantiable" if choice_b4p and choice_d
                       else "NotInstantiableInThinModel"),
    }


def h3_residual_rigidity(geom: ThinH3Geom, b: int, cap: int = 8) -> dict:
    """The group of self-projectivities of the residue pentagon of b from
    chains of length up to cap; asserts that any member fixing two
    adjacent pentagon vertices and their three incident lines is the
    identity.

    In the icosahedron each point has a unique opposite, so all chains
    alternate b and its antipode; the group is generated by the round
    trip.
    """
    if cap < 4:
        raise ValueError("cap must be at least 4")
    a = geom.antipode(b)
    ident_l = {l: l for l in geom.lines_through[b]}
    ident_p = {t: t for t in geom.planes_through[b]}
    members = {}

    def key(m):
        return (tuple(sorted(m["line_map"].items())),
                tuple(sorted(m["plane_map"].items())))

    members[key({"line_map": ident_l, "plane_map": ident_p})] = {
        "line_map": ident_l, "plane_map": ident_p, "length": 0}
    for steps in range(2, cap + 1, 2):
        bases = [b]
        for i in range(steps):
            bases.append(a if bases[-1] == b else b)
        if bases[-1] != b:
            continue
        m = h3_residual_map(geom, bases)
        m["length"] = steps
        members.setdefault(key(m), m)
        if len(members) > 10 ** 6:
            raise ClosureCapExceeded("residual projectivity group blew up")

    rigid_witnesses = []
    for m in members.values():
        lm, pm = m["line_map"], m["plane_map"]
        for t in geom.planes_through[b]:
            # two adjacent residue vertices: the two b-lines of face t;
            # incident residue lines: the faces through either of them
            v1, v2 = [l for l in geom.lines_through[b]
                      if geom.line_sets[l] <= geom.plane_sets[t]]
            faces = {f for f in geom.planes_through[b]
                     if geom.line_sets[v1] <= geom.plane_sets[f]
                     or geom.line_sets[v2] <= geom.plane_sets[f]}
            fixes = (lm[v1] == v1 and lm[v2] == v2
                     and all(pm[f] == f for f in faces))
            if fixes:
                ident = (all(v == k2 for k2, v in lm.items())
                         and all(v == k2 for k2, v in pm.items()))
                if not ident:
                    rigid_witnesses.append((m["length"], t))
    return {
        "claim": "h3-residual-rigidity",
        "base": b,
        "group_order": len(members),
        "lengths": sorted({m["length"] for m in members.values()}),
        "rigid": not rigid_witnesses,
        "witnesses": rigid_witnesses,
        "result": "pass" if not rigid_witnesses else "fail",
    }


# ---------------------------------------------------------------------------
# pentagon parameter feasibility

@dataclass(frozen=True)
class PentagonParams:
    """Order (s, t) of a hypothetical generalized pentagon, with the
    derived point-graph parameters."""

    s: int
    t: int

    def __post_init__(self):
        if self.s < 1 or self.t < 1:
            raise ValueError("s and t must be positive")

    @property
    def v(self) -> int:
        s, t = self.s, self.t
        return 1 + s * (t + 1) + s * s * t * (t + 1)

    @property
    def k(self) -> int:
        return self.s * (self.t + 1)

    @property
    def lam(self) -> int:
        return self.s - 1

    @property
    def mu(self) -> int:
        return 1


def _srg_multiplicities(v: int, k: int, lam: int, mu: int):
    """Eigenvalue multiplicities of a strongly regular graph, as exact
    rationals, or None when they are irrational."""
    disc = (lam - mu) ** 2 + 4 * (k - mu)
    r = isqrt(disc)
    if r * r != disc:
        if 2 * k + (v - 1) * (lam - mu) == 0:
            half = Fraction(v - 1, 2)
            return (half, half)
        return None
    num = 2 * k + (v - 1) * (lam - mu)
    m1 = Fraction(v - 1, 2) - Fraction(num, 2 * r)
    m2 = Fraction(v - 1, 2) + Fraction(num, 2 * r)
    return (m1, m2)


def pentagon_feasibility(params: PentagonParams) -> dict:
    """Integrality test for the point-graph eigenvalue multiplicities of a
    generalized pentagon of order (s, t) and of its point-line dual of
    order (t, s) (whose point graph is the line side of the original).

    Both sides must have nonnegative integer multiplicities; otherwise the
    parameters are infeasible.  Exact rational arithmetic throughout.
    """
    sides = {}
    verdict = "feasible"
    reason = None
    for label, (s, t) in (("points", (params.s, params.t)),
                          ("lines", (params.t, params.s))):
        pp = PentagonParams(s, t)
        ms = _srg_multiplicities(pp.v, pp.k, pp.lam, pp.mu)
        if ms is None:
            sides[label] = {"v": pp.v, "k": pp.k, "multiplicities": None}
            verdict = "infeasible"
            reason = reason or f"{label}: irrational multiplicities"
            continue
        ok = all(m.denominator == 1 and m >= 0 for m in ms)
        sides[label] = {"v": pp.v, "k": pp.k,
                        "multiplicities": [str(m) for m in ms]}
        if not ok:
            verdict = "infeasible"
            reason = reason or f"{label}: non-integral or negative multiplicity"
    return {"s": params.s, "t": params.t, "verdict": verdict,
            "reason": reason, "sides": sides}


def pentagon_sweep(s_max: int = 20, t_max: int = 20) -> list:
    """Feasibility table over 1 <= s, t <= bounds."""
    out = []
    for s in range(1, s_max + 1):
        for t in range(1, t_max + 1):
            out.append(pentagon_feasibility(PentagonParams(s, t)))
    return out
