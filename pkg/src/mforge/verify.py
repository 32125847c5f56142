"""Claim-checking machinery: collineation tests, root-elation
certification, Moufang transitivity, fixpoint structure, and structured
reports.

Certification semantics.  "Fix pointwise" is tested elementwise on points,
"stabilise" setwise on subspaces.  For a quadrangle root the certified
conditions are exactly the interior of the root path: first kind -- the
center line fixed pointwise, its two end points fixed, all lines through
either end stabilized; second kind -- both interior lines fixed pointwise,
all lines through the central point stabilized.  For a rank-3 root the
conditions are the corresponding statements about the distinguished line /
central point of the inside, plus setwise stabilization of every inside
cell.  In both cases the transport condition is checked: apartments
containing the root map to apartments containing the root.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureCapExceeded
from .frames import (GQRoot, Root, apartments_containing,
                     gq_apartments_containing)
from .geometry import PolarSpaceGeom
from .subspaces import GQView, Projectivity

REPORT_SCHEMA = "report/1"


def make_report(claim: str, instance: str, result: str, witnesses=None,
                counts=None, wall_ms: float = 0.0) -> dict:
    if result == "fail" and not witnesses:
        raise ValueError("fail reports must carry a witness")
    return {
        "schema": REPORT_SCHEMA,
        "claim": claim,
        "instance": instance,
        "result": result,
        "witnesses": witnesses or [],
        "counts": counts or {},
        "wall_ms": round(wall_ms, 3),
    }


@dataclass
class Collineation:
    """A global point permutation with verification flags.

    Flags are only set by check_collineation after the corresponding
    exhaustive pass; a freshly wrapped permutation has all flags False.
    """

    perm: np.ndarray
    bijective: bool = False
    line_preserving: bool = False
    plane_preserving: bool = False
    provenance: str = ""
    witness: tuple | None = None

    def key(self) -> bytes:
        return self.perm.astype(np.int64).tobytes()

    def is_identity(self) -> bool:
        return bool((self.perm == np.arange(len(self.perm))).all())

    def apply(self, pts):
        return frozenset(int(self.perm[p]) for p in pts)

    def compose(self, other: "Collineation") -> "Collineation":
        """self after other (apply other first)."""
        return Collineation(perm=self.perm[other.perm])

    def inverse(self) -> "Collineation":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return Collineation(perm=inv)


def check_collineation(geom: PolarSpaceGeom, perm) -> Collineation:
    """Exhaustively verify bijectivity, line- and plane-preservation.

    Failures are recorded on the returned object (flags stay False and a
    witness is attached); nothing is raised.
    """
    perm = np.asarray(perm, dtype=np.int64)
    col = Collineation(perm=perm)
    n = geom.num_points
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        col.witness = ("not-bijective",)
        return col
    col.bijective = True
    col.line_preserving = True
    for lid in range(geom.num_lines):
        img = frozenset(int(x) for x in perm[geom.lines[lid]])
        if img not in geom.line_index:
            col.line_preserving = False
            col.witness = ("line", lid)
            break
    if col.line_preserving:
        col.plane_preserving = True
        for pid in range(geom.num_planes):
            img = frozenset(int(perm[x]) for x in geom.planes[pid])
            if img not in geom.plane_index:
                col.plane_preserving = False
                col.witness = ("plane", pid)
                break
    return col


# ---------------------------------------------------------------------------
# quadrangle-level helpers

def view_perm_tuple(view: GQView, point_map: dict) -> tuple:
    """Encode a view point map as a tuple over view-point positions."""
    pos = view.point_pos
    return tuple(pos[point_map[p]] for p in view.points)


def view_map_is_collineation(view: GQView, point_map: dict):
    """Bijective and line-preserving inside the view; returns (ok, witness)."""
    geom = view.geom
    imgs = set(point_map.get(p) for p in view.points)
    if None in imgs or imgs != set(view.points):
        return False, ("not-bijective",)
    line_keys = {geom.line_sets[l] for l in view.lines}
    for lid in view.lines:
        img = frozenset(point_map[x] for x in geom.line_sets[lid])
        if img not in line_keys:
            return False, ("line", lid)
    return True, None


def certify_gq_root_elation(view: GQView, point_map: dict, root: GQRoot) -> dict:
    """Certify a view point map as a root elation for a quadrangle root."""
    t0 = time.perf_counter()
    geom = view.geom
    witnesses = []

    ok, w = view_map_is_collineation(view, point_map)
    if not ok:
        witnesses.append(("collineation", w))

    def fixed_pointwise(lid):
        return [("moved-point", x) for x in sorted(geom.line_sets[lid])
                if point_map.get(x) != x]

    def stabilized(lid):
        img = frozenset(point_map[x] for x in geom.line_sets[lid])
        return [] if img == geom.line_sets[lid] else [("moved-line", lid)]

    if not witnesses:
        if root.kind == "first":
            witnesses += fixed_pointwise(root.line_qd)
            for x in (root.q, root.d):
                for lid in view.lines:
                    if x in geom.line_sets[lid]:
                        witnesses += stabilized(lid)
        else:
            witnesses += fixed_pointwise(root.line_qd)
            witnesses += fixed_pointwise(root.line_dn)
            for lid in view.lines:
                if root.d in geom.line_sets[lid]:
                    witnesses += stabilized(lid)

    if not witnesses:
        apts = gq_apartments_containing(root)
        keys = {a.key() for a in apts}
        for a in apts:
            img = tuple(sorted(point_map[x] for x in a.points))
            if img not in keys:
                witnesses.append(("apartment-left-root", a.key(), img))

    result = "pass" if not witnesses else "fail"
    return make_report("certify-gq-root-elation",
                       f"{root.kind}:{root.key()}", result,
                       witnesses=witnesses,
                       wall_ms=(time.perf_counter() - t0) * 1000)


def certify_root_elation(geom: PolarSpaceGeom, col: Collineation, root: Root) -> dict:
    """Certify a verified collineation as a root elation for a rank-3 root."""
    t0 = time.perf_counter()
    witnesses = []
    if not (col.bijective and col.line_preserving):
        witnesses.append(("collineation", col.witness))
    perm = col.perm

    def fixes_point(x):
        return perm[x] == x

    def stabilizes_line(lid):
        return frozenset(int(perm[x]) for x in geom.lines[lid]) == geom.line_sets[lid]

    def stabilizes_plane(pid):
        return frozenset(int(perm[x]) for x in geom.planes[pid]) == geom.plane_sets[pid]

    if not witnesses:
        for x in sorted(root.inside_points):
            if not fixes_point(x):
                witnesses.append(("moved-inside-point", int(x)))
        for lid in sorted(root.inside_lines):
            if not stabilizes_line(lid):
                witnesses.append(("moved-inside-line", int(lid)))
        for pid in sorted(root.inside_planes):
            if not stabilizes_plane(pid):
                witnesses.append(("moved-inside-plane", int(pid)))
        if root.kind == "first":
            lid = root.fixed_line
            for x in sorted(geom.line_sets[lid]):
                if not fixes_point(x):
                    witnesses.append(("moved-fixed-line-point", int(x)))
            for end in root.ends:
                for l2 in geom.lines_through[end]:
                    if not stabilizes_line(l2):
                        witnesses.append(("moved-line-through-end", int(l2)))
            for pid in geom.planes_of_line[lid]:
                if not stabilizes_plane(pid):
                    witnesses.append(("moved-plane-through-line", int(pid)))
        else:
            o = root.center
            for lid in sorted(root.inside_lines):
                for x in sorted(geom.line_sets[lid]):
                    if not fixes_point(x):
                        witnesses.append(("moved-inside-line-point", int(x)))
            for l2 in geom.lines_through[o]:
                if not stabilizes_line(l2):
                    witnesses.append(("moved-line-through-center", int(l2)))

    if not witnesses:
        apts = apartments_containing(geom, root)
        keys = {a.key() for a in apts}
        for a in apts:
            img = tuple(sorted(int(perm[x]) for x in a.point_ids))
            if img not in keys:
                witnesses.append(("apartment-left-root", a.key(), img))

    result = "pass" if not witnesses else "fail"
    return make_report("certify-root-elation",
                       f"{root.kind}:{tuple(sorted(root.member_points))}",
                       result, witnesses=witnesses,
                       wall_ms=(time.perf_counter() - t0) * 1000)


# ---------------------------------------------------------------------------
# group closure and Moufang transitivity

def _closure(gens: list, identity, compose, cap: int) -> list:
    """Breadth-first closure of a generator list under composition."""
    seen = {identity: identity}
    frontier = [identity]
    for g in gens:
        if g not in seen:
            seen[g] = g
            frontier.append(g)
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                c = compose(a, g)
                if c not in seen:
                    if len(seen) >= cap:
                        raise ClosureCapExceeded(f"group closure passed {cap}")
                    seen[c] = c
                    nxt.append(c)
        frontier = nxt
    return list(seen)


def moufang_transitivity(target, root, elations, cap: int = 10 ** 6) -> dict:
    """Does the group generated by the elations act transitively on the
    apartments containing the root?

    `target` is a GQView with view point maps, or a PolarSpaceGeom with
    Collineations.  The report carries the orbit structure.
    """
    t0 = time.perf_counter()
    if isinstance(target, GQView):
        view = target
        pos = view.point_pos
        idx_pts = view.points
        gens = [view_perm_tuple(view, m) for m in elations]
        identity = tuple(range(len(idx_pts)))

        def compose(a, b):
            return tuple(a[b[i]] for i in range(len(a)))

        apts = gq_apartments_containing(root)
        apt_keys = [tuple(sorted(pos[p] for p in a.points)) for a in apts]

        def apply(g, key):
            return tuple(sorted(g[i] for i in key))
    else:
        geom = target
        gens = [c.key() for c in elations]
        perms = {c.key(): c.perm for c in elations}
        ident_arr = np.arange(geom.num_points, dtype=np.int64)
        identity = ident_arr.tobytes()
        perms[identity] = ident_arr

        def compose(a, b):
            pa, pb = perms[a], perms[b]
            c = pa[pb]
            k = c.tobytes()
            perms.setdefault(k, c)
            return k

        apts = apartments_containing(geom, root)
        apt_keys = [a.key() for a in apts]

        def apply(g, key):
            pg = perms[g]
            return tuple(sorted(int(pg[x]) for x in key))

    group = _closure(gens, identity, compose, cap)
    orbits = []
    remaining = set(apt_keys)
    while remaining:
        seed = min(remaining)
        orbit = {apply(g, seed) for g in group}
        stray = orbit - set(apt_keys)
        if stray:
            return make_report("moufang-transitivity", str(root.kind), "fail",
                               witnesses=[("orbit-left-apartment-set", sorted(stray)[0])],
                               wall_ms=(time.perf_counter() - t0) * 1000)
        orbits.append(sorted(orbit))
        remaining -= orbit
    transitive = len(orbits) == 1
    witnesses = [] if transitive else [("orbit-count", len(orbits))]
    return make_report(
        "moufang-transitivity", str(root.kind),
        "pass" if transitive else "fail", witnesses=witnesses,
        counts={"apartments": len(apt_keys), "group_order": len(group),
                "orbits": [len(o) for o in orbits]},
        wall_ms=(time.perf_counter() - t0) * 1000)


# ---------------------------------------------------------------------------
# corollaries

def verify_fixpoint_corollary(geom: PolarSpaceGeom, col: Collineation,
                              root: Root) -> dict:
    """First kind: every plane through the distinguished line is fixed
    pointwise and lines through its two inside points are stabilized.
    Second kind: every line through the central point is stabilized."""
    t0 = time.perf_counter()
    witnesses = []
    perm = col.perm
    if root.kind == "first":
        lid = root.fixed_line
        for pid in geom.planes_of_line[lid]:
            for x in sorted(geom.plane_sets[pid]):
                if perm[x] != x:
                    witnesses.append(("plane-not-pointwise-fixed", int(pid), int(x)))
        for end in root.ends:
            for l2 in geom.lines_through[end]:
                img = frozenset(int(perm[x]) for x in geom.lines[l2])
                if img != geom.line_sets[l2]:
                    witnesses.append(("line-through-end-moved", int(l2)))
    else:
        o = root.center
        for l2 in geom.lines_through[o]:
            img = frozenset(int(perm[x]) for x in geom.lines[l2])
            if img != geom.line_sets[l2]:
                witnesses.append(("line-through-center-moved", int(l2)))
    result = "pass" if not witnesses else "fail"
    return make_report("fixpoint-corollary", root.kind, result,
                       witnesses=witnesses,
                       wall_ms=(time.perf_counter() - t0) * 1000)


def verify_self_projectivity(proj: Projectivity) -> dict:
    """Closed, even, length-4 chain with consecutive opposite bases."""
    t0 = time.perf_counter()
    witnesses = []
    if proj.length != 4:
        witnesses.append(("length", proj.length))
    if not proj.is_self:
        witnesses.append(("open-chain", proj.bases[0], proj.bases[-1]))
    if not proj.is_even:
        witnesses.append(("odd-length", proj.length))
    geom = proj.geom
    for i in range(len(proj.bases) - 1):
        if geom.adjacency[proj.bases[i], proj.bases[i + 1]]:
            witnesses.append(("consecutive-not-opposite", i))
    result = "pass" if not witnesses else "fail"
    return make_report("self-projectivity", str(proj.bases), result,
                       witnesses=witnesses,
                       wall_ms=(time.perf_counter() - t0) * 1000)


# ---------------------------------------------------------------------------
# exhaustive quadrangle-level elation enumeration (independent oracle)

def enumerate_gq_root_elations(view: GQView, root: GQRoot) -> list:
    """All view collineations satisfying the root-elation conditions, by
    constraint-propagating backtracking over point images.

    Independent of the recipe machinery: only adjacency and line data are
    used.  Returns point maps sorted with the identity first.
    """
    geom = view.geom
    pts = list(view.points)
    line_keys = {geom.line_sets[l] for l in view.lines}

    fixed = set()
    if root.kind == "first":
        fixed |= geom.line_sets[root.line_qd]
        anchor_lines = [l for l in view.lines
                        if root.q in geom.line_sets[l] or root.d in geom.line_sets[l]]
    else:
        fixed |= geom.line_sets[root.line_qd] | geom.line_sets[root.line_dn]
        anchor_lines = [l for l in view.lines if root.d in geom.line_sets[l]]

    # candidate set per point: fixed points map to themselves; a point on a
    # stabilized line must stay on that line
    candidates = {}
    for x in pts:
        if x in fixed:
            candidates[x] = [x]
            continue
        cand = set(pts)
        for lid in anchor_lines:
            if x in geom.line_sets[lid]:
                cand &= geom.line_sets[lid]
        candidates[x] = sorted(cand)

    order = sorted(pts, key=lambda x: len(candidates[x]))
    assignment = {}
    used = set()
    out = []

    def backtrack(i):
        if i == len(order):
            pm = dict(assignment)
            ok, _ = view_map_is_collineation(view, pm)
            if ok:
                out.append(pm)
            return
        x = order[i]
        for y in candidates[x]:
            if y in used:
                continue
            if any(bool(geom.adjacency[x, z]) != bool(geom.adjacency[y, assignment[z]])
                   for z in assignment):
                continue
            assignment[x] = y
            used.add(y)
            backtrack(i + 1)
            del assignment[x]
            used.discard(y)

    backtrack(0)
    certified = [pm for pm in out
                 if certify_gq_root_elation(view, pm, root)["result"] == "pass"]
    certified.sort(key=lambda pm: view_perm_tuple(view, pm))
    return certified


def realize_all_residual_elations(view: GQView, root: GQRoot) -> dict:
    """For every nontrivial root elation of the residual quadrangle (found
    by independent enumeration), find a recipe instance realizing it."""
    from . import elations as _el  # local import; elations imports this module

    t0 = time.perf_counter()
    geom = view.geom
    true_elations = enumerate_gq_root_elations(view, root)
    nontrivial = [pm for pm in true_elations
                  if any(pm[x] != x for x in view.points)]
    witnesses = []
    realized = 0
    for pm in nontrivial:
        found = False
        for inst in _el.sweep_gq_recipe_instances(view, root):
            if inst.point_map == pm:
                found = True
                break
        if found:
            realized += 1
        else:
            witnesses.append(("unrealized-elation", view_perm_tuple(view, pm)))
    result = "pass" if not witnesses else "fail"
    return make_report("realize-residual-elations",
                       f"{root.kind}:{root.key()}", result,
                       witnesses=witnesses,
                       counts={"nontrivial": len(nontrivial), "realized": realized},
                       wall_ms=(time.perf_counter() - t0) * 1000)


def write_reports(path, reports) -> None:
    """Stream reports as JSON lines (schema report/1)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps(rep, sort_keys=True) + "\n")


def summarize(reports) -> str:
    """Plain-text summary table, sorted by claim then instance."""
    rows = sorted(reports, key=lambda r: (r["claim"], r["instance"]))
    width = max((len(r["claim"]) for r in rows), default=5)
    lines = [f"{'claim'.ljust(width)}  result  instance"]
    for r in rows:
        lines.append(f"{r['claim'].ljust(width)}  {r['result']:6}  {r['instance']}")
    n_pass = sum(r["result"] == "pass" for r in rows)
    n_fail = sum(r["result"] == "fail" for r in rows)
    n_skip = sum(r["result"] == "skipped" for r in rows)
    lines.append(f"total: {len(rows)}  pass: {n_pass}  fail: {n_fail}  skipped: {n_skip}")
    return "\n".join(lines)
