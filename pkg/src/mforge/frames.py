"""Polar frames, apartments and half-apartments (roots) of both kinds, at
rank 3 and inside induced quadrangles.

Frame slots are labeled -3,-2,-1,1,2,3; two frame points are collinear
exactly when their labels do not sum to zero.  Roots follow the removal
recipes: the first kind removes two collinear frame points, the second
kind removes one; the inside of a root removes the further cells listed in
the construction.  Membership of boundary cells is recorded explicitly so
reports can audit the literal reading.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BadIndices, NoFrame, NotOpposite
from .geometry import PolarSpaceGeom
from .subspaces import GQView, SingularSubspace

FRAME_SLOTS = (1, -1, 2, -2, 3, -3)


@dataclass(frozen=True)
class PolarFrame:
    """Six points indexed by {-3,-2,-1,1,2,3}; p_i is collinear to p_j iff
    i + j != 0."""

    points: tuple  # ((slot, point_id), ...) sorted by slot

    @classmethod
    def from_dict(cls, d: dict) -> "PolarFrame":
        return cls(tuple(sorted(d.items())))

    def as_dict(self) -> dict:
        return dict(self.points)

    def __getitem__(self, slot: int) -> int:
        return self.as_dict()[slot]

    def check(self, geom: PolarSpaceGeom) -> None:
        d = self.as_dict()
        if sorted(d) != sorted(FRAME_SLOTS):
            raise ValueError("frame must assign all six slots")
        if len(set(d.values())) != 6:
            raise ValueError("frame points must be distinct")
        for i, j in itertools.combinations(FRAME_SLOTS, 2):
            want = (i + j) != 0
            if bool(geom.adjacency[d[i], d[j]]) != want:
                raise ValueError(f"frame violates collinearity at slots {i},{j}")


def frame_search(geom: PolarSpaceGeom, constraints: dict | None = None) -> PolarFrame:
    """Deterministic lowest-id-first backtracking completion of a partial
    slot assignment to a polar frame.  Raises NoFrame when unsatisfiable."""
    constraints = dict(constraints or {})
    for slot in constraints:
        if slot not in FRAME_SLOTS:
            raise ValueError(f"bad frame slot {slot}")
    # consistency of the given constraints themselves
    for (i, x), (j, y) in itertools.combinations(constraints.items(), 2):
        if x == y or bool(geom.adjacency[x, y]) != ((i + j) != 0):
            raise NoFrame(f"constraints at slots {i},{j} are inconsistent")

    order = [s for s in FRAME_SLOTS if s not in constraints]
    assigned = dict(constraints)

    def extend() -> bool:
        if not order:
            return True
        slot = order.pop(0)
        mask = np.ones(geom.num_points, dtype=bool)
        for t, y in assigned.items():
            if slot + t != 0:
                mask &= geom.adjacency[y]
            else:
                mask &= ~geom.adjacency[y]
            mask[y] = False
        for x in np.flatnonzero(mask):
            assigned[slot] = int(x)
            if extend():
                return True
            del assigned[slot]
        order.insert(0, slot)
        return False

    if not extend():
        raise NoFrame(f"no frame satisfies constraints {constraints}")
    frame = PolarFrame.from_dict(assigned)
    frame.check(geom)
    return frame


@dataclass(frozen=True)
class Apartment:
    """All singular subspaces spanned by a polar frame: 6 points, 12 lines,
    8 planes in rank 3 (the octahedron)."""

    frame: PolarFrame
    point_ids: frozenset
    line_ids: frozenset
    plane_ids: frozenset

    def key(self):
        return tuple(sorted(self.point_ids))

    def to_json(self) -> dict:
        return {"frame": dict(self.frame.points),
                "points": sorted(self.point_ids),
                "lines": sorted(self.line_ids),
                "planes": sorted(self.plane_ids)}


def apartment_from_frame(geom: PolarSpaceGeom, frame: PolarFrame) -> Apartment:
    frame.check(geom)
    d = frame.as_dict()
    lines = set()
    for i, j in itertools.combinations(FRAME_SLOTS, 2):
        if i + j != 0:
            lines.add(geom.line_through(d[i], d[j]))
    planes = set()
    for i, j, k in itertools.combinations(FRAME_SLOTS, 3):
        if i + j != 0 and i + k != 0 and j + k != 0:
            lid = geom.line_through(d[i], d[j])
            planes.add(geom.plane_through_line_and_point(lid, d[k]))
    assert len(lines) == 12 and len(planes) == 8
    return Apartment(frame=frame, point_ids=frozenset(d.values()),
                     line_ids=frozenset(lines), plane_ids=frozenset(planes))


@dataclass(frozen=True)
class Root:
    """A half-apartment of a rank-3 apartment.

    kind "first": slots i, j of two removed collinear frame points;
    distinguished line is spanned by the opposite slots -i, -j (the
    intersection of the two planes of the inside).  kind "second": one
    removed slot i; the central point sits at slot -i.
    """

    kind: str
    apartment: Apartment
    slots: tuple
    member_points: frozenset
    member_lines: frozenset
    member_planes: frozenset
    inside_points: frozenset
    inside_lines: frozenset
    inside_planes: frozenset

    @property
    def geom_key(self):
        return ("root", self.kind, tuple(sorted(self.member_points)),
                tuple(sorted(self.member_lines)), tuple(sorted(self.member_planes)))

    def frame_point(self, slot: int) -> int:
        return self.apartment.frame[slot]

    @property
    def fixed_line(self) -> int:
        """First kind: the line joining the two surviving opposite slots."""
        if self.kind != "first":
            raise ValueError("fixed_line is a first-kind attribute")
        i, j = self.slots
        return _line_of(self)

    @property
    def ends(self) -> tuple:
        """First kind: the two inside points on the fixed line."""
        if self.kind != "first":
            raise ValueError("ends is a first-kind attribute")
        i, j = self.slots
        return (self.frame_point(-i), self.frame_point(-j))

    @property
    def center(self) -> int:
        """Second kind: the central point of the inside."""
        if self.kind != "second":
            raise ValueError("center is a second-kind attribute")
        (i,) = self.slots
        return self.frame_point(-i)

    def to_json(self) -> dict:
        return {"kind": self.kind, "slots": list(self.slots),
                "member_points": sorted(self.member_points),
                "member_lines": sorted(self.member_lines),
                "member_planes": sorted(self.member_planes),
                "inside_points": sorted(self.inside_points),
                "inside_lines": sorted(self.inside_lines),
                "inside_planes": sorted(self.inside_planes)}


def _line_of(root: Root) -> int:
    i, j = root.slots
    geom_frame = root.apartment.frame
    # the apartment stores no geometry handle; recover the line from the
    # apartment's own line list via the two frame points
    a, b = geom_frame[-i], geom_frame[-j]
    for lid in root.apartment.line_ids:
        if lid in root.inside_lines and a in root._line_sets[lid] and b in root._line_sets[lid]:
            return lid
    raise AssertionError("fixed line missing from inside")


def root_of_apartment(geom: PolarSpaceGeom, apt: Apartment, kind: str,
                      slots) -> Root:
    """Apply the removal recipe for the requested root kind."""
    frame = apt.frame.as_dict()
    pts = set(apt.point_ids)
    lines = set(apt.line_ids)
    planes = set(apt.plane_ids)

    def line_of(i, j):
        return geom.line_through(frame[i], frame[j])

    def plane_of(i, j, k):
        return geom.plane_through_line_and_point(line_of(i, j), frame[k])

    if kind == "first":
        i, j = slots
        if i == j or i + j == 0 or i not in FRAME_SLOTS or j not in FRAME_SLOTS:
            raise BadIndices(f"first-kind root needs two collinear slots, got {slots}")
        k = next(s for s in (1, 2, 3) if s not in (abs(i), abs(j)))
        rm_points = {frame[i], frame[j]}
        rm_planes = {plane_of(i, j, k), plane_of(i, j, -k)}
        rm_lines = {line_of(i, j), line_of(i, k), line_of(j, k),
                    line_of(i, -k), line_of(j, -k)}
        member_points = frozenset(pts - rm_points)
        member_lines = frozenset(lines - rm_lines)
        member_planes = frozenset(planes - rm_planes)
        # the inside also loses every maximal subspace holding a removed point
        extra = {pid for pid in member_planes
                 if frame[i] in geom.plane_sets[pid] or frame[j] in geom.plane_sets[pid]}
        inside_planes = frozenset(member_planes - extra)
        root = Root(kind="first", apartment=apt, slots=(i, j),
                    member_points=member_points, member_lines=member_lines,
                    member_planes=member_planes,
                    inside_points=member_points, inside_lines=member_lines,
                    inside_planes=inside_planes)
    elif kind == "second":
        if isinstance(slots, int):
            slots = (slots,)
        (i,) = slots
        if i not in FRAME_SLOTS:
            raise BadIndices(f"second-kind root needs one slot, got {slots}")
        p_i = frame[i]
        rm_points = {p_i}
        rm_lines = {lid for lid in lines if p_i in geom.line_sets[lid]}
        rm_planes = {pid for pid in planes if p_i in geom.plane_sets[pid]}
        member_points = frozenset(pts - rm_points)
        member_lines = frozenset(lines - rm_lines)
        member_planes = frozenset(planes - rm_planes)
        # the inside also loses submaximal cells of the removed planes
        extra = {lid for lid in member_lines
                 if any(geom.line_sets[lid] <= geom.plane_sets[pid] for pid in rm_planes)}
        root = Root(kind="second", apartment=apt, slots=(i,),
                    member_points=member_points, member_lines=member_lines,
                    member_planes=member_planes,
                    inside_points=member_points,
                    inside_lines=frozenset(member_lines - extra),
                    inside_planes=member_planes)
    else:
        raise BadIndices(f"unknown root kind {kind!r}")
    object.__setattr__(root, "_line_sets", geom.line_sets)
    return root


def apartments_containing(geom: PolarSpaceGeom, root: Root) -> list:
    """All apartments whose cell set contains every member cell of the
    root, in deterministic order."""
    frame = root.apartment.frame.as_dict()
    out = []
    if root.kind == "first":
        i, j = root.slots
        line_i = geom.line_through(frame[i], frame[-j])
        line_j = geom.line_through(frame[j], frame[-i])
        for x in sorted(geom.line_sets[line_i] - {frame[-j]}):
            # the slot-j completion is forced: the unique point of line_j
            # collinear to x
            y = geom.proj_point_to_line(x, line_j)
            if y is None or y == frame[-i]:
                continue
            new = dict(frame)
            new[i], new[j] = x, y
            out.append(apartment_from_frame(geom, PolarFrame.from_dict(new)))
    else:
        (i,) = root.slots
        others = [frame[s] for s in FRAME_SLOTS if s not in (i, -i)]
        mask = np.ones(geom.num_points, dtype=bool)
        for y in others:
            mask &= geom.adjacency[y]
        mask &= ~geom.adjacency[frame[-i]]
        for x in np.flatnonzero(mask):
            new = dict(frame)
            new[i] = int(x)
            out.append(apartment_from_frame(geom, PolarFrame.from_dict(new)))
    out.sort(key=lambda a: a.key())
    for apt in out:
        cells_ok = (root.member_points <= apt.point_ids
                    and root.member_lines <= apt.line_ids
                    and root.member_planes <= apt.plane_ids)
        assert cells_ok, "enumerated apartment fails to contain the root"
    return out


def common_apartment(geom: PolarSpaceGeom, u: SingularSubspace,
                     v: SingularSubspace) -> Apartment:
    """Some apartment whose cells include both U and V, via constraint-first
    backtracking seeded with a basis of U then V."""

    def bases(sub: SingularSubspace):
        pts = sorted(sub.point_ids)
        if sub.dim <= 0:
            yield tuple(pts)
        elif sub.dim == 1:
            for pair in itertools.combinations(pts, 2):
                yield pair
        else:
            for triple in itertools.combinations(pts, 3):
                a, b, c = triple
                if c not in geom.line_sets[geom.line_through(a, b)]:
                    yield triple

    def slot_assignments(basis, assigned):
        """All ways to place the basis points into frame slots consistent
        with what is already assigned."""
        if not basis:
            yield assigned
            return
        x, rest = basis[0], basis[1:]
        placed = {p: s for s, p in assigned.items()}
        if x in placed:
            yield from slot_assignments(rest, assigned)
            return
        for slot in FRAME_SLOTS:
            if slot in assigned:
                continue
            ok = all(bool(geom.adjacency[x, y]) == ((slot + t) != 0)
                     for t, y in assigned.items())
            if ok:
                nxt = dict(assigned)
                nxt[slot] = x
                yield from slot_assignments(rest, nxt)

    for ub in bases(u):
        seed = {s: p for s, p in zip((1, 2, 3), ub)}
        ok = all(geom.adjacency[a, b] for a, b in itertools.combinations(ub, 2))
        if not ok:
            continue
        for vb in bases(v):
            for constraints in slot_assignments(tuple(vb), dict(seed)):
                try:
                    frame = frame_search(geom, constraints)
                except NoFrame:
                    continue
                return apartment_from_frame(geom, frame)
    raise NoFrame("no common apartment found (should not happen in a polar space)")


# ---------------------------------------------------------------------------
# quadrangle-level apartments and roots


@dataclass(frozen=True)
class GQApartment:
    """A regular quadrangle: cycle (a0, a1, a2, a3) with consecutive points
    collinear and diagonals opposite."""

    points: tuple
    lines: tuple

    def key(self):
        return tuple(sorted(self.points))

    def to_json(self) -> dict:
        return {"points": list(self.points), "lines": list(self.lines)}


def _canonical_cycle(view: GQView, pts4) -> tuple:
    a = min(pts4)
    nbrs = sorted(x for x in pts4 if view.geom.adjacency[a, x] and x != a)
    b = nbrs[0]
    d = nbrs[1]
    c = next(x for x in pts4 if x not in (a, b, d))
    return (a, b, c, d)


def gq_apartment(view: GQView, pts4) -> GQApartment:
    cycle = _canonical_cycle(view, pts4)
    geom = view.geom
    a, b, c, d = cycle
    for x, y in ((a, c), (b, d)):
        if geom.adjacency[x, y]:
            raise ValueError("diagonal points of a quadrangle must be opposite")
    lines = tuple(geom.line_through(cycle[i], cycle[(i + 1) % 4]) for i in range(4))
    return GQApartment(points=cycle, lines=lines)


@dataclass(frozen=True)
class GQRoot:
    """Half of a quadrangle apartment, encoded as the fixed path of the
    incidence 8-cycle plus flank data from the generating apartment.

    kind "first": path (uq, q, qd, d, dn) centered at the line qd; flanks
    are the points u, n.  kind "second": path (q, dq, d, dn, n) centered at
    the point d; the generating apartment's fourth point is kept as u.
    """

    kind: str
    view: GQView
    q: int
    d: int
    u: int
    n: int
    line_qd: int
    line_uq: int
    line_dn: int

    def key(self):
        if self.kind == "first":
            fwd = ("L", self.line_uq, "p", self.q, "L", self.line_qd,
                   "p", self.d, "L", self.line_dn)
            rev = ("L", self.line_dn, "p", self.d, "L", self.line_qd,
                   "p", self.q, "L", self.line_uq)
        else:
            fwd = ("p", self.q, "L", self.line_qd, "p", self.d,
                   "L", self.line_dn, "p", self.n)
            rev = ("p", self.n, "L", self.line_dn, "p", self.d,
                   "L", self.line_qd, "p", self.q)
        return (self.kind,) + min(fwd, rev)

    @property
    def center(self):
        return self.line_qd if self.kind == "first" else self.d

    def to_json(self) -> dict:
        return {"kind": self.kind, "q": self.q, "d": self.d,
                "u": self.u, "n": self.n,
                "line_qd": self.line_qd, "line_uq": self.line_uq,
                "line_dn": self.line_dn}


def gq_roots_of_apartment(view: GQView, apt: GQApartment):
    """The four first-kind and four second-kind roots of one quadrangle."""
    geom = view.geom
    cyc = apt.points
    first, second = [], []
    for idx in range(4):
        q, d = cyc[idx], cyc[(idx + 1) % 4]
        u, n = cyc[(idx - 1) % 4], cyc[(idx + 2) % 4]
        first.append(GQRoot(kind="first", view=view, q=q, d=d, u=u, n=n,
                            line_qd=geom.line_through(q, d),
                            line_uq=geom.line_through(u, q),
                            line_dn=geom.line_through(d, n)))
    for idx in range(4):
        d = cyc[idx]
        q, n = cyc[(idx - 1) % 4], cyc[(idx + 1) % 4]
        u = cyc[(idx + 2) % 4]
        second.append(GQRoot(kind="second", view=view, q=q, d=d, u=u, n=n,
                             line_qd=geom.line_through(d, q),
                             line_uq=geom.line_through(u, q),
                             line_dn=geom.line_through(d, n)))
    return first, second


def gq_apartments_and_roots(view: GQView):
    """Exhaustive, deterministically ordered apartments and roots of both
    kinds of a quadrangle view."""
    geom = view.geom
    pts = view.points
    apartments = []
    for a in pts:
        for c in pts:
            if c <= a or geom.adjacency[a, c]:
                continue
            trace = [x for x in view.common_perp(a, c) if x > a]
            for b, d in itertools.combinations(trace, 2):
                if geom.adjacency[b, d]:
                    continue
                if min(b, d) < a:
                    continue
                apartments.append(gq_apartment(view, (a, b, c, d)))
    apartments.sort(key=lambda x: x.key())
    first, second = {}, {}
    for apt in apartments:
        fs, ss = gq_roots_of_apartment(view, apt)
        for r in fs:
            first.setdefault(r.key(), r)
        for r in ss:
            second.setdefault(r.key(), r)
    firsts = [first[k] for k in sorted(first)]
    seconds = [second[k] for k in sorted(second)]
    return apartments, firsts, seconds


def gq_apartments_containing(root: GQRoot) -> list:
    """All quadrangle apartments containing the root's path cells."""
    view = root.view
    geom = view.geom
    out = []
    if root.kind == "first":
        for u2 in sorted(geom.line_sets[root.line_uq] - {root.q}):
            n2 = geom.proj_point_to_line(u2, root.line_dn)
            if n2 is None or n2 == root.d:
                continue
            out.append(gq_apartment(view, (root.q, root.d, u2, n2)))
    else:
        mask = geom.adjacency[root.q] & geom.adjacency[root.n]
        for u2 in view.points:
            if u2 == root.d or not mask[u2]:
                continue
            if geom.adjacency[root.d, u2]:
                continue
            out.append(gq_apartment(view, (root.q, root.d, u2, root.n)))
    out.sort(key=lambda a: a.key())
    return out
