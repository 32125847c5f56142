"""Singular-subspace arithmetic, residues, induced quadrangles and
projectivity chains.

All operations are pure reads over an immutable PolarSpaceGeom.  Residues
and quadrangle views are materialized with back-reference maps because the
projectivity machinery reuses them heavily.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimension, ChainNotOpposite, NotOpposite
from .geometry import PolarSpaceGeom

KINDS = {-1: "empty", 0: "point", 1: "line", 2: "plane"}


@dataclass(frozen=True)
class SingularSubspace:
    """A totally singular subspace: empty, a point, a line or a plane."""

    point_ids: frozenset
    dim: int

    @property
    def kind(self) -> str:
        return KINDS[self.dim]

    def __iter__(self):
        return iter(sorted(self.point_ids))

    def __len__(self):
        return len(self.point_ids)


EMPTY_SUBSPACE = SingularSubspace(frozenset(), -1)


def singular_subspace(geom: PolarSpaceGeom, pts) -> SingularSubspace:
    """Wrap a point set as a SingularSubspace, validating singularity and
    closure under lines."""
    pset = frozenset(int(p) for p in pts)
    if not pset:
        return EMPTY_SUBSPACE
    if len(pset) == 1:
        return SingularSubspace(pset, 0)
    members = sorted(pset)
    for a, b in itertools.combinations(members, 2):
        if not geom.collinear(a, b):
            raise ValueError(f"points {a},{b} are not collinear")
        if not geom.line_sets[geom.line_through(a, b)] <= pset:
            raise ValueError("point set is not closed under lines")
    q = geom.q
    if len(pset) == q + 1:
        return SingularSubspace(pset, 1)
    if len(pset) == q * q + q + 1:
        return SingularSubspace(pset, 2)
    raise ValueError(f"cardinality {len(pset)} is not a subspace size for q={q}")


def point_subspace(p: int) -> SingularSubspace:
    return SingularSubspace(frozenset((int(p),)), 0)


def line_subspace(geom: PolarSpaceGeom, lid: int) -> SingularSubspace:
    return SingularSubspace(geom.line_sets[lid], 1)


def plane_subspace(geom: PolarSpaceGeom, pid: int) -> SingularSubspace:
    return SingularSubspace(geom.plane_sets[pid], 2)


def proj_subspace(geom: PolarSpaceGeom, u: SingularSubspace,
                  v: SingularSubspace) -> SingularSubspace:
    """Points of U collinear to every point of V (the projection of V onto
    U); the empty subspace when there are none."""
    if v.dim == -1 or u.dim == -1:
        return u if v.dim == -1 else EMPTY_SUBSPACE
    vs = list(v.point_ids)
    mask = geom.adjacency[vs[0]].copy()
    for p in vs[1:]:
        mask &= geom.adjacency[p]
    hits = [p for p in u.point_ids if mask[p]]
    return singular_subspace(geom, hits)


def subspaces_opposite(geom: PolarSpaceGeom, u: SingularSubspace,
                       v: SingularSubspace) -> bool:
    """Opposite means both mutual projections are empty."""
    return (proj_subspace(geom, u, v).dim == -1
            and proj_subspace(geom, v, u).dim == -1)


def lines_opposite(geom: PolarSpaceGeom, k: int, m: int) -> bool:
    a = geom.lines[k]
    b = geom.lines[m]
    sub = geom.adjacency[np.ix_(a, b)]
    return not (sub.all(axis=1).any() or sub.all(axis=0).any())


@dataclass
class PointResidue:
    """The residue of a point: lines through it are the residue points,
    planes through it the residue lines.  A generalized quadrangle in a
    rank-3 host."""

    geom: PolarSpaceGeom
    center: int
    points: tuple      # host line ids through center
    lines: tuple       # host plane ids through center
    point_pos: dict = field(default_factory=dict, repr=False)
    line_pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.point_pos = {lid: i for i, lid in enumerate(self.points)}
        self.line_pos = {pid: i for i, pid in enumerate(self.lines)}

    def incident(self, lid: int, pid: int) -> bool:
        return self.geom.line_sets[lid] <= self.geom.plane_sets[pid]


def residue(geom: PolarSpaceGeom, u):
    """Residue of a subspace of dimension at most 0.

    For a point: the quadrangle of lines/planes through it.  For the empty
    subspace the residue is the whole geometry, returned as-is.  Larger
    subspaces raise BadDimension (rank-3 host).
    """
    if isinstance(u, SingularSubspace):
        if u.dim == -1:
            return geom
        if u.dim > 0:
            raise BadDimension(f"residue of a {u.kind} in a rank-3 space")
        (p,) = u.point_ids
    else:
        p = int(u)
    return PointResidue(geom=geom, center=p,
                        points=tuple(geom.lines_through[p]),
                        lines=tuple(geom.planes_through[p]))


@dataclass
class GQView:
    """The generalized quadrangle p-perp ∩ b-perp of two opposite points.

    Points are host point ids, lines host line ids.  Collinearity inside
    the view is the host relation restricted to the view (the view is a
    subspace, so lines through two view points stay inside it).  The line
    table is computed lazily; recipe construction only needs points.
    """

    geom: PolarSpaceGeom
    base_p: int
    base_b: int
    points: tuple
    point_pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.point_pos = {p: i for i, p in enumerate(self.points)}

    @property
    def q(self) -> int:
        return self.geom.q

    @property
    def lines(self) -> tuple:
        if not hasattr(self, "_lines_cache"):
            pset = set(self.points)
            found = set()
            for x in self.points:
                for lid in self.geom.lines_through[x]:
                    if lid not in found and self.geom.line_sets[lid] <= pset:
                        found.add(lid)
            self._lines_cache = tuple(sorted(found))
        return self._lines_cache

    def contains_point(self, x: int) -> bool:
        return x in self.point_pos

    def lines_through(self, x: int):
        return [l for l in self.geom.lines_through[x] if l in self._line_set]

    @property
    def _line_set(self):
        if not hasattr(self, "_line_set_cache"):
            self._line_set_cache = frozenset(self.lines)
        return self._line_set_cache

    def opposite_in(self, a: int, b: int) -> bool:
        return not self.geom.adjacency[a, b]

    def common_perp(self, a: int, b: int):
        """View points collinear to both a and b."""
        mask = self.geom.adjacency[a] & self.geom.adjacency[b]
        return [x for x in self.points if mask[x]]

    def check_axioms(self) -> None:
        """Partial linearity plus the unique-projection property."""
        geom = self.geom
        pts = self.points
        for lid in self.lines:
            if not geom.line_sets[lid] <= set(pts):
                raise AssertionError("view line leaks outside the view")
        for x in pts:
            for lid in self.lines:
                if x in geom.line_sets[lid]:
                    continue
                row = geom.lines[lid]
                hits = geom.adjacency[x, row].sum()
                if hits != 1:
                    raise AssertionError(
                        f"projection of {x} onto line {lid} is not unique")


def gq_from_opposite(geom: PolarSpaceGeom, p: int, b: int) -> GQView:
    """Materialize the quadrangle of two opposite points with canonical
    back-references to both residues (x <-> px and x <-> bx)."""
    if geom.adjacency[p, b]:
        raise NotOpposite(f"points {p} and {b} are collinear")
    mask = geom.adjacency[p] & geom.adjacency[b]
    pts = tuple(int(x) for x in np.flatnonzero(mask))
    return GQView(geom=geom, base_p=p, base_b=b, points=pts)


def residue_projection(geom: PolarSpaceGeom, frm: int, to: int, element: int,
                       kind: str = "line") -> int:
    """Project an element of the residue of `frm` to the residue of `to`.

    For a line through frm: project `to` onto the line, obtaining the unique
    point u collinear to `to`, and return the line joining `to` and u.  For
    a plane through frm: the image is the unique plane through `to` meeting
    it in a line.
    """
    if geom.adjacency[frm, to]:
        raise NotOpposite(f"residue projection needs opposite bases ({frm},{to})")
    if kind == "line":
        if frm not in geom.line_sets[element]:
            raise ValueError(f"line {element} does not pass through {frm}")
        u = geom.proj_point_to_line(to, element)
        # the line cannot lie inside to-perp: it contains frm
        return geom.line_through(to, u) if u != to else element
    if kind == "plane":
        pset = geom.plane_sets[element]
        if frm not in pset:
            raise ValueError(f"plane {element} does not pass through {frm}")
        trace = [x for x in pset if geom.adjacency[to, x]]
        lid = geom.line_through(trace[0], trace[1])
        return geom.plane_through_line_and_point(lid, to)
    raise ValueError(f"unknown element kind {kind!r}")


@dataclass
class Projectivity:
    """A composition of residue-to-residue projections along a base
    sequence of pairwise-consecutively-opposite points.

    line_map/plane_map send elements of the first residue to elements of
    the last.  Equality of projectivities is equality of realized maps.
    """

    geom: PolarSpaceGeom
    bases: tuple
    line_map: dict
    plane_map: dict | None
    step_log: tuple

    @property
    def is_self(self) -> bool:
        return self.bases[-1] == self.bases[0]

    @property
    def length(self) -> int:
        return len(self.bases) - 1

    @property
    def is_even(self) -> bool:
        return self.length % 2 == 0

    def __eq__(self, other):
        if not isinstance(other, Projectivity):
            return NotImplemented
        return (self.bases[0] == other.bases[0]
                and self.bases[-1] == other.bases[-1]
                and self.line_map == other.line_map)

    def gq_point_map(self, view: GQView) -> dict:
        """Restrict a self-projectivity based at view.base_p to the view:
        x goes to the image line's unique point collinear to base_b."""
        p, b = view.base_p, view.base_b
        if not (self.is_self and self.bases[0] == p):
            raise ValueError("restriction needs a self-projectivity based at p")
        geom = self.geom
        out = {}
        for x in view.points:
            img_line = self.line_map[geom.line_through(p, x)]
            out[x] = geom.proj_point_to_line(b, img_line)
        return out

    def to_json(self) -> dict:
        return {
            "bases": list(self.bases),
            "steps": [
                {"from": s[0], "to": s[1], "kind": s[2],
                 "preimage": s[3], "image": s[4]}
                for s in self.step_log
            ],
        }


def compose_projectivity(geom: PolarSpaceGeom, bases,
                         track_planes: bool = False) -> Projectivity:
    """Realize the projectivity along `bases` on the whole first residue.

    Raises ChainNotOpposite (with the offending index) when a consecutive
    pair fails opposition.
    """
    bases = tuple(int(b) for b in bases)
    if len(bases) < 2:
        raise ValueError("a projectivity needs at least two bases")
    for i in range(len(bases) - 1):
        if geom.adjacency[bases[i], bases[i + 1]]:
            raise ChainNotOpposite(
                f"bases {bases[i]} and {bases[i + 1]} are not opposite", index=i)
    log = []
    line_map = {}
    for lid in geom.lines_through[bases[0]]:
        cur = lid
        for i in range(len(bases) - 1):
            nxt = residue_projection(geom, bases[i], bases[i + 1], cur, "line")
            log.append((bases[i], bases[i + 1], "line", cur, nxt))
            cur = nxt
        line_map[lid] = cur
    plane_map = None
    if track_planes:
        plane_map = {}
        for pid in geom.planes_through[bases[0]]:
            cur = pid
            for i in range(len(bases) - 1):
                nxt = residue_projection(geom, bases[i], bases[i + 1], cur, "plane")
                log.append((bases[i], bases[i + 1], "plane", cur, nxt))
                cur = nxt
            plane_map[pid] = cur
    return Projectivity(geom=geom, bases=bases, line_map=line_map,
                        plane_map=plane_map, step_log=tuple(log))
