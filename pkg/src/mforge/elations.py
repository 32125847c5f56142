"""Constructions of root elations: quadrangle recipes of both kinds, the
observation variants, plane elations, the eta permutation with its copying
machinery, the two rank-3 extension procedures, and a linear-algebra
stabilizer oracle for independent cross-checking.

Every quadrangle elation is realized as a length-4 self-projectivity whose
base chain is recorded for audit; the quadrangle action is the chain's
restriction x -> theta(px) ∩ b-perp.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadConfiguration, CoverageIncomplete, LinesNotOpposite,
                     NoHostPair, RecipeDegenerate)
from .frames import GQRoot, Root
from .geometry import PolarSpaceGeom, _normalize, field_tables
from .subspaces import (GQView, Projectivity, compose_projectivity,
                        gq_from_opposite, lines_opposite, residue_projection)
from .verify import Collineation, check_collineation


# ---------------------------------------------------------------------------
# quadrangle recipes

@dataclass(frozen=True)
class FirstKindRecipe:
    """Data of the first-kind recipe: chosen j on pq, the intersection
    point i of ju and pu', and ell, the projection of i onto bd."""

    p: int
    b: int
    q: int
    d: int
    u: int
    n: int
    u_target: int
    n_target: int
    j: int
    i: int
    ell: int

    def bases(self):
        return (self.p, self.b, self.j, self.ell, self.p)

    def to_json(self):
        return {k: getattr(self, k) for k in
                ("p", "b", "q", "d", "u", "n", "u_target", "n_target",
                 "j", "i", "ell")}


@dataclass(frozen=True)
class SecondKindRecipe:
    """Data of the second-kind recipe: j' on bu, j'' its projection onto
    pu', ell the projection of d onto j'j'', j the projection of j' onto
    pd."""

    p: int
    b: int
    d: int
    q: int
    u: int
    n: int
    u_target: int
    j_prime: int
    j_dprime: int
    ell: int
    j: int

    def bases(self):
        return (self.p, self.b, self.j, self.ell, self.p)

    def to_json(self):
        return {k: getattr(self, k) for k in
                ("p", "b", "d", "q", "u", "n", "u_target", "j_prime",
                 "j_dprime", "ell", "j")}


@dataclass(frozen=True)
class ObservationRecipe:
    """Data of an observation variant: A repositions ell onto bn via the
    intersection of pv' and jv; B places ell on bq directly."""

    variant: str
    p: int
    b: int
    j: int
    ell: int
    v: int | None = None
    v_target: int | None = None
    grid: bool | None = None

    def bases(self):
        return (self.p, self.b, self.j, self.ell, self.p)

    def to_json(self):
        return {"variant": self.variant, "p": self.p, "b": self.b,
                "j": self.j, "ell": self.ell, "v": self.v,
                "v_target": self.v_target, "grid": self.grid}


@dataclass
class GQElation:
    """A constructed quadrangle elation: recipe, realized chain, and the
    induced point map on the view."""

    view: GQView
    root: GQRoot
    recipe: object
    chain: Projectivity
    point_map: dict

    def perm_tuple(self):
        pos = self.view.point_pos
        return tuple(pos[self.point_map[p]] for p in self.view.points)

    def is_identity(self):
        return all(v == k for k, v in self.point_map.items())

    def to_json(self):
        return {"recipe": self.recipe.to_json(),
                "bases": list(self.chain.bases),
                "point_map": {str(k): v for k, v in sorted(self.point_map.items())}}


def _line_points_set(geom, lid):
    return geom.line_sets[lid]


def _intersect_lines(geom, l1, l2):
    pts = geom.line_sets[l1] & geom.line_sets[l2]
    if len(pts) != 1:
        return None
    return next(iter(pts))


def build_first_kind_gq_elation(view: GQView, root: GQRoot, u_target: int,
                                n_target: int | None = None,
                                j: int | None = None) -> GQElation:
    """Elation for a first-kind quadrangle root: fixes qd pointwise,
    stabilizes all view lines through q and d, and moves u to u_target
    (and n to the induced n_target)."""
    geom = view.geom
    if root.kind != "first":
        raise BadConfiguration("first-kind recipe needs a first-kind root")
    q, d, u, n = root.q, root.d, root.u, root.n
    p, b = view.base_p, view.base_b
    if u_target not in geom.line_sets[root.line_uq] or u_target == q:
        raise BadConfiguration(f"target {u_target} must lie on uq, distinct from q")
    induced_n = geom.proj_point_to_line(u_target, root.line_dn)
    if induced_n is None or induced_n == d:
        raise RecipeDegenerate("induced image of n is undefined")
    if n_target is not None and n_target != induced_n:
        raise RecipeDegenerate(
            f"targets are inconsistent: n must map to {induced_n}")
    n_target = induced_n

    line_pq = geom.line_through(p, q)
    if j is None:
        j = min(geom.line_sets[line_pq] - {p, q})
    elif j not in geom.line_sets[line_pq] or j in (p, q):
        raise BadConfiguration(f"j={j} must lie on pq, distinct from p and q")

    line_ju = geom.line_through(j, u)
    line_put = geom.line_through(p, u_target)
    i = _intersect_lines(geom, line_ju, line_put)
    if i is None:
        raise RecipeDegenerate("lines ju and pu' do not meet in one point")
    line_bd = geom.line_through(b, d)
    ell = geom.proj_point_to_line(i, line_bd)
    if ell is None:
        raise RecipeDegenerate("projection of i onto bd is undefined")

    recipe = FirstKindRecipe(p=p, b=b, q=q, d=d, u=u, n=n,
                             u_target=u_target, n_target=n_target,
                             j=j, i=i, ell=ell)
    chain = compose_projectivity(geom, recipe.bases())
    return GQElation(view=view, root=root, recipe=recipe, chain=chain,
                     point_map=chain.gq_point_map(view))


def build_second_kind_gq_elation(view: GQView, root: GQRoot, u_target: int,
                                 j_prime: int | None = None,
                                 u: int | None = None) -> GQElation:
    """Elation for a second-kind quadrangle root: fixes dq and dn
    pointwise, stabilizes all view lines through d, and moves u to
    u_target."""
    geom = view.geom
    if root.kind != "second":
        raise BadConfiguration("second-kind recipe needs a second-kind root")
    d, q, n = root.d, root.q, root.n
    u = root.u if u is None else u
    p, b = view.base_p, view.base_b
    for x, lbl in ((u, "u"), (u_target, "u'")):
        if not (geom.adjacency[x, q] and geom.adjacency[x, n]):
            raise BadConfiguration(f"{lbl}={x} must be collinear to q and n")
        if geom.adjacency[x, d] or x == d:
            raise BadConfiguration(f"{lbl}={x} must be opposite d")
    if u_target != u and geom.adjacency[u, u_target]:
        raise BadConfiguration("u' must be opposite u")

    line_bu = geom.line_through(b, u)
    if j_prime is None:
        j_prime = min(geom.line_sets[line_bu] - {b, u})
    elif j_prime not in geom.line_sets[line_bu] or j_prime in (b, u):
        raise BadConfiguration("j' must lie on bu, distinct from b and u")

    line_put = geom.line_through(p, u_target)
    j_dprime = geom.proj_point_to_line(j_prime, line_put)
    if j_dprime is None:
        raise RecipeDegenerate("projection of j' onto pu' is undefined")
    line_jj = geom.line_through(j_prime, j_dprime)
    ell = geom.proj_point_to_line(d, line_jj)
    if ell is None:
        raise RecipeDegenerate("projection of d onto j'j'' is undefined")
    line_pd = geom.line_through(p, d)
    j = geom.proj_point_to_line(j_prime, line_pd)
    if j is None:
        raise RecipeDegenerate("projection of j' onto pd is undefined")

    recipe = SecondKindRecipe(p=p, b=b, d=d, q=q, u=u, n=n,
                              u_target=u_target, j_prime=j_prime,
                              j_dprime=j_dprime, ell=ell, j=j)
    chain = compose_projectivity(geom, recipe.bases())
    return GQElation(view=view, root=root, recipe=recipe, chain=chain,
                     point_map=chain.gq_point_map(view))


def observation_variants(view: GQView, root: GQRoot, variant: str,
                         data: dict) -> GQElation:
    """The two repositioned-ell variants of the first-kind recipe.

    Variant A (data: v, v_target, optional j): ell is the projection onto
    bn of the intersection of pv' and jv; the result stabilizes all planes
    through pq or pn and moves v along uq to v_target.  Variant B (data:
    ell on bq, optional j): the result fixes every plane through pq and
    every line inside the planes spanned by p,u,q or p,d,q; when the six
    construction lines form a grid the map is the identity.
    """
    geom = view.geom
    if root.kind != "first":
        raise BadConfiguration("observation variants need a first-kind root")
    q, d, u, n = root.q, root.d, root.u, root.n
    p, b = view.base_p, view.base_b
    line_pq = geom.line_through(p, q)
    j = data.get("j")
    if j is None:
        j = min(geom.line_sets[line_pq] - {p, q})
    elif j not in geom.line_sets[line_pq] or j in (p, q):
        raise BadConfiguration("j must lie on pq, distinct from p and q")

    if variant == "A":
        v, v_target = data["v"], data["v_target"]
        for x in (v, v_target):
            if x not in geom.line_sets[root.line_uq] or x in (u, q):
                raise BadConfiguration(
                    "v and v' must lie on uq, distinct from u and q")
        line_jv = geom.line_through(j, v)
        line_pvt = geom.line_through(p, v_target)
        i = _intersect_lines(geom, line_jv, line_pvt)
        if i is None:
            raise RecipeDegenerate("lines jv and pv' do not meet in one point")
        line_bn = geom.line_through(b, n)
        ell = geom.proj_point_to_line(i, line_bn)
        if ell is None:
            raise RecipeDegenerate("projection onto bn is undefined")
        recipe = ObservationRecipe(variant="A", p=p, b=b, j=j, ell=ell,
                                   v=v, v_target=v_target)
    elif variant == "B":
        ell = data["ell"]
        line_bq = geom.line_through(b, q)
        if ell not in geom.line_sets[line_bq] or ell == q:
            raise BadConfiguration("ell must lie on bq, distinct from q")
        grid = _grid_test(geom, p, b, q, n, j, ell)
        recipe = ObservationRecipe(variant="B", p=p, b=b, j=j, ell=ell,
                                   grid=grid)
    else:
        raise BadConfiguration(f"unknown variant {variant!r}")

    chain = compose_projectivity(geom, recipe.bases(), track_planes=True)
    return GQElation(view=view, root=root, recipe=recipe, chain=chain,
                     point_map=chain.gq_point_map(view))


def _grid_test(geom, p, b, q, n, j, ell) -> bool:
    """Whether pn, [proj_bn(j), j], bq, pq, [proj_..(ell), ell], bn form a
    grid; equivalent to the fifth line meeting pn."""
    line_bn = geom.line_through(b, n)
    n1 = geom.proj_point_to_line(j, line_bn)
    if n1 is None:
        return False
    k1 = geom.line_through(n1, j)
    if ell in geom.line_sets[k1]:
        return True
    l1 = geom.proj_point_to_line(ell, k1)
    if l1 is None:
        return False
    k2 = geom.line_through(l1, ell)
    line_pn = geom.line_through(p, n)
    return bool(geom.line_sets[k2] & geom.line_sets[line_pn])


def sweep_gq_recipe_instances(view: GQView, root: GQRoot):
    """All recipe instances (target and free-point choices) for a root, in
    deterministic order."""
    geom = view.geom
    p, b = view.base_p, view.base_b
    if root.kind == "first":
        line_pq = geom.line_through(p, root.q)
        for u_target in sorted(geom.line_sets[root.line_uq] - {root.q}):
            for j in sorted(geom.line_sets[line_pq] - {p, root.q}):
                yield build_first_kind_gq_elation(view, root, u_target, j=j)
    else:
        mask = geom.adjacency[root.q] & geom.adjacency[root.n]
        targets = [x for x in view.points
                   if mask[x] and x != root.d and not geom.adjacency[root.d, x]]
        line_bu = geom.line_through(b, root.u)
        for u_target in sorted(targets):
            for j_prime in sorted(geom.line_sets[line_bu] - {b, root.u}):
                yield build_second_kind_gq_elation(view, root, u_target,
                                                   j_prime=j_prime)


# ---------------------------------------------------------------------------
# plane elations

@dataclass
class PlaneElation:
    """The unique elation of a projective plane with a given axis, center
    and moved pair, realized as a point permutation of the plane."""

    plane: int
    center: int
    axis: int
    m: int
    m_target: int
    point_map: dict

    def is_identity(self):
        return all(v == k for k, v in self.point_map.items())


def _plane_coords(geom: PolarSpaceGeom, plane: int, basis_pts) -> tuple[dict, dict]:
    """Coordinates of every plane point in a 3-point basis (maps both ways;
    combos are normalized projective representatives)."""
    q = geom.q
    vecs = [geom.points[x] for x in basis_pts]
    combo_of, pt_of = {}, {}
    for combo in itertools.product(range(q), repeat=3):
        lead = next((c for c in combo if c), None)
        if lead != 1:
            continue
        w = (combo[0] * vecs[0] + combo[1] * vecs[1] + combo[2] * vecs[2]) % q
        pid = geom.point_index[_normalize(w, q)]
        combo_of[pid] = combo
        pt_of[combo] = pid
    return combo_of, pt_of


def plane_elation_build(geom: PolarSpaceGeom, plane: int, center: int,
                        axis: int, m: int, m_target: int) -> PlaneElation:
    """Elation of the plane with the given axis line and center on it,
    mapping m to m_target on the line center*m.  Exact linear algebra on
    the 3-dimensional carrier subspace."""
    q = geom.q
    pset = geom.plane_sets[plane]
    aset = geom.line_sets[axis]
    if not aset <= pset:
        raise BadConfiguration("axis must be a line of the plane")
    if center not in aset:
        raise BadConfiguration("center must lie on the axis")
    if m not in pset or m in aset:
        raise BadConfiguration("m must be a plane point off the axis")
    line_cm = geom.line_through(center, m)
    if m_target not in geom.line_sets[line_cm] or m_target == center:
        raise BadConfiguration("m' must lie on the line center*m, off the center")

    a2 = min(aset - {center})
    combo_of, pt_of = _plane_coords(geom, plane, (center, a2, m))
    c1, c2, c3 = combo_of[m_target]
    if c2 != 0 or c3 == 0:
        raise BadConfiguration("m' decomposition is inconsistent")
    _, _, inv = field_tables(q)
    gamma = (c1 * int(inv[c3])) % q
    point_map = {}
    for pid, (x1, x2, x3) in combo_of.items():
        img = ((x1 + x3 * gamma) % q, x2, x3)
        lead = next((c for c in img if c), None)
        if lead != 1:
            s = int(inv[lead])
            img = tuple((c * s) % q for c in img)
        point_map[pid] = pt_of[img]
    return PlaneElation(plane=plane, center=center, axis=axis, m=m,
                        m_target=m_target, point_map=point_map)


# ---------------------------------------------------------------------------
# the eta permutation of d-perp ∪ q-perp

def copy_action(geom: PolarSpaceGeom, k_line: int, m_line: int,
                eta_k: dict) -> dict:
    """Copy a permutation of line K to the opposite line M by projecting
    through K: x -> proj_M(eta(proj_K(x)))."""
    if not lines_opposite(geom, k_line, m_line):
        raise LinesNotOpposite(f"lines {k_line} and {m_line} are not opposite")
    out = {}
    for x in geom.line_sets[m_line]:
        kx = geom.proj_point_to_line(x, k_line)
        out[x] = geom.proj_point_to_line(eta_k[kx], m_line)
    return out


@dataclass
class EtaMap:
    """The permutation of d-perp ∪ q-perp seeded by one plane elation and
    spread by copying across opposite-line pairs.

    provenance per point: "fixed" (in the common perp), "seed-plane", or
    ("copied", K, M).
    """

    geom: PolarSpaceGeom
    d: int
    q: int
    m: int
    m_target: int
    seed_plane: int
    beta: int
    images: dict
    provenance: dict = field(repr=False, default_factory=dict)

    @property
    def line_dq(self):
        return self.geom.line_through(self.d, self.q)

    def domain(self) -> frozenset:
        return frozenset(self.images)

    def check(self) -> dict:
        """Verify the defining properties: the common perp is fixed
        pointwise, each plane through exactly one of d, q induces the
        prescribed translation, and collinearity is preserved on the
        domain.  Returns a counts dict; raises AssertionError on failure."""
        geom, d, q = self.geom, self.d, self.q
        img = self.images
        common = geom.adjacency[d] & geom.adjacency[q]
        for x in np.flatnonzero(common):
            assert img[int(x)] == int(x), f"common-perp point {x} moved"
        planes_checked = 0
        for center, other in ((d, q), (q, d)):
            for pid in geom.planes_through[center]:
                pset = geom.plane_sets[pid]
                if other in pset:
                    continue
                imgs = {img[x] for x in pset}
                assert imgs == pset, f"plane {pid} not stabilized"
                axis_pts = [x for x in pset if common[x]]
                assert len(axis_pts) == geom.q + 1
                axis = geom.line_through(axis_pts[0], axis_pts[1])
                probe = next(x for x in sorted(pset) if x not in geom.line_sets[axis])
                pe = plane_elation_build(geom, pid, center, axis, probe, img[probe])
                for x in pset:
                    assert pe.point_map[x] == img[x], \
                        f"plane {pid} action is not the {center}-elation"
                planes_checked += 1
        pairs = 0
        dom = self.domain()
        for lid in range(geom.num_lines):
            inside = [x for x in geom.line_sets[lid] if x in dom]
            for a, b2 in itertools.combinations(inside, 2):
                assert geom.adjacency[img[a], img[b2]], \
                    f"collinearity broken on pair ({a},{b2})"
                pairs += 1
        return {"planes_checked": planes_checked, "collinear_pairs": pairs}


def build_eta(geom: PolarSpaceGeom, d: int, q: int, m: int, m_target: int,
              seed_plane: int | None = None) -> EtaMap:
    """Build the unique permutation of d-perp ∪ q-perp fixing the common
    perp, inducing translations in the planes through d or q, and mapping
    m to m_target.

    Seeded by a plane elation in the plane spanned by m and its projection
    into a plane through dq, then spread breadth-first by copying across
    opposite-line pairs; the copy-independence claim is re-verified at
    every copy.  Raises CoverageIncomplete if the frontier stalls.
    """
    if not geom.adjacency[d, q] or d == q:
        raise BadConfiguration("d and q must be distinct collinear points")
    if geom.adjacency[m, q]:
        raise BadConfiguration("m must not be collinear to q")
    if m == d or m_target == d:
        raise BadConfiguration("m and m' must differ from d")
    line_md = geom.line_through(m, d)
    if m_target not in geom.line_sets[line_md]:
        raise BadConfiguration("d must lie on the line mm'")

    line_dq = geom.line_through(d, q)
    pi = seed_plane if seed_plane is not None else min(geom.planes_of_line[line_dq])
    if line_dq not in geom.lines_of_plane[pi]:
        raise BadConfiguration("seed plane must contain the line dq")

    # L: the points of the seed plane collinear to m (a line through d)
    l_pts = [x for x in geom.plane_sets[pi] if geom.adjacency[m, x]]
    assert len(l_pts) == geom.q + 1 and d in l_pts
    axis = geom.line_through(l_pts[0], l_pts[1])
    beta = geom.plane_through_line_and_point(axis, m)
    assert m_target in geom.plane_sets[beta]
    seed = plane_elation_build(geom, beta, center=d, axis=axis, m=m,
                               m_target=m_target)

    images, prov = {}, {}
    for x in np.flatnonzero(geom.adjacency[d] & geom.adjacency[q]):
        images[int(x)] = int(x)
        prov[int(x)] = "fixed"
    for x, y in seed.point_map.items():
        if x in images:
            assert images[x] == y, "seed elation disagrees on the common perp"
        else:
            images[x] = y
            prov[x] = "seed-plane"

    d_lines = set(geom.lines_through[d])
    q_lines = set(geom.lines_through[q])
    known = set()
    queue = []
    for lid in sorted(d_lines):
        lset = geom.line_sets[lid]
        if lset <= geom.plane_sets[beta] and lid != axis:
            known.add(lid)
            queue.append(lid)

    while queue:
        k_line = queue.pop(0)
        partners = q_lines if k_line in d_lines else d_lines
        for m_line in sorted(partners):
            if not lines_opposite(geom, k_line, m_line):
                continue
            action = copy_action(geom, k_line, m_line, {
                x: images[x] for x in geom.line_sets[k_line]})
            if m_line in known:
                for x, y in action.items():
                    assert images[x] == y, (
                        f"copy via line {k_line} disagrees on line {m_line}")
            else:
                for x, y in action.items():
                    if x in images:
                        assert images[x] == y, (
                            f"copy onto line {m_line} disagrees at point {x}")
                    else:
                        images[x] = y
                        prov[x] = ("copied", k_line, m_line)
                known.add(m_line)
                queue.append(m_line)

    domain = np.flatnonzero(geom.adjacency[d] | geom.adjacency[q])
    missing = [int(x) for x in domain if int(x) not in images]
    if missing:
        raise CoverageIncomplete(
            f"copying stalled with {len(missing)} uncovered points")
    return EtaMap(geom=geom, d=d, q=q, m=m, m_target=m_target,
                  seed_plane=pi, beta=beta, images=images, provenance=prov)


# ---------------------------------------------------------------------------
# host-pair elations and the first-kind extension

def admissible_host_pairs(geom: PolarSpaceGeom, d: int, q: int, x: int):
    """Opposite pairs (p, b), both collinear to d, q and x, ascending."""
    cand = np.flatnonzero(geom.adjacency[d] & geom.adjacency[q] & geom.adjacency[x])
    cand = [int(c) for c in cand if c not in (d, q, x)]
    for p, b in itertools.combinations(cand, 2):
        if not geom.adjacency[p, b]:
            yield (p, b)


def gq_elation_from_eta(geom: PolarSpaceGeom, eta: EtaMap, p: int, b: int,
                        check_boundary: bool = True) -> GQElation:
    """The first-kind root elation of p-perp ∩ b-perp with root (q, qd, d)
    whose boundary action matches eta."""
    d, q = eta.d, eta.q
    view = gq_from_opposite(geom, p, b)
    pick = geom.adjacency[q] & ~geom.adjacency[d]
    u = next(x for x in view.points if pick[x])
    u_target = eta.images[u]
    trace = geom.adjacency[u] & geom.adjacency[d]
    n = next(x for x in view.points if trace[x] and x != q)
    root = GQRoot(kind="first", view=view, q=q, d=d, u=u, n=n,
                  line_qd=geom.line_through(q, d),
                  line_uq=geom.line_through(u, q),
                  line_dn=geom.line_through(d, n))
    el = build_first_kind_gq_elation(view, root, u_target)
    if check_boundary:
        boundary = geom.adjacency[q] | geom.adjacency[d]
        for x in view.points:
            if boundary[x]:
                assert el.point_map[x] == eta.images[x], (
                    f"host-pair elation disagrees with eta at point {x}")
    return el


def eta_pb(geom: PolarSpaceGeom, eta: EtaMap, x: int,
           p: int | None = None, b: int | None = None,
           verify_pairs: int = 2):
    """Image of x under the host-pair root elation matching eta, plus a
    well-definedness certificate over several distinct host pairs."""
    d, q = eta.d, eta.q
    on_dq = [y for y in geom.line_sets[eta.line_dq] if geom.adjacency[x, y]]
    if len(on_dq) != 1:
        raise BadConfiguration(
            f"x={x} must be collinear to exactly one point of dq")
    pairs = list(itertools.islice(admissible_host_pairs(geom, d, q, x),
                                  max(verify_pairs, 1)))
    if p is not None and b is not None:
        pairs = [(p, b)] + [pr for pr in pairs if pr != (p, b)]
    if not pairs:
        raise NoHostPair(f"no opposite pair collinear to d, q and {x}")
    images = []
    for pp, bb in pairs:
        el = gq_elation_from_eta(geom, eta, pp, bb)
        images.append(el.point_map[x])
    certificate = {"pairs": pairs, "images": images,
                   "agree": len(set(images)) == 1}
    if not certificate["agree"]:
        raise AssertionError(f"host-pair images disagree for x={x}: {images}")
    return images[0], certificate


def eta_pb_all_images(geom: PolarSpaceGeom, eta: EtaMap, x: int) -> set:
    """Images of x across every admissible host pair (verification mode)."""
    out = set()
    for p, b in admissible_host_pairs(geom, eta.d, eta.q, x):
        el = gq_elation_from_eta(geom, eta, p, b)
        out.add(el.point_map[x])
    return out


PROV_FIXED_COPLANAR = 0
PROV_ETA = 1
PROV_ETA_PB = 2


@dataclass
class ExtensionState:
    """A total point map over the polar space with per-point provenance:
    0 fixed (in a plane with dq), 1 eta, 2 host-pair elation."""

    geom: PolarSpaceGeom
    d: int
    q: int
    m: int
    m_target: int
    eta: EtaMap
    perm: np.ndarray
    provenance: np.ndarray
    host_pairs: dict

    def collineation(self) -> Collineation:
        col = check_collineation(self.geom, self.perm)
        col.provenance = f"extend-first-kind(d={self.d},q={self.q},m={self.m},m'={self.m_target})"
        return col

    def provenance_histogram(self) -> dict:
        labels = {PROV_FIXED_COPLANAR: "fixed-coplanar", PROV_ETA: "eta",
                  PROV_ETA_PB: "eta_pb"}
        vals, counts = np.unique(self.provenance, return_counts=True)
        return {labels[int(v)]: int(c) for v, c in zip(vals, counts)}

    def to_json(self) -> dict:
        return {"d": self.d, "q": self.q, "m": self.m, "m_target": self.m_target,
                "point_map": [int(v) for v in self.perm],
                "provenance": self.provenance_histogram()}


def extend_first_kind(geom: PolarSpaceGeom, d: int, q: int, m: int,
                      m_target: int, eta: EtaMap | None = None) -> ExtensionState:
    """Extend the eta permutation to a collineation of the whole space:
    identity on points coplanar with dq, eta on the rest of its domain,
    host-pair elation images elsewhere (lexicographically least admissible
    pair, cached per pair)."""
    if eta is None:
        eta = build_eta(geom, d, q, m, m_target)
    n = geom.num_points
    perm = np.arange(n, dtype=np.int64)
    prov = np.full(n, PROV_FIXED_COPLANAR, dtype=np.int8)
    common = geom.adjacency[d] & geom.adjacency[q]
    dom = geom.adjacency[d] | geom.adjacency[q]
    cache: dict = {}
    used_pairs: dict = {}
    for x in range(n):
        if common[x]:
            continue
        if dom[x]:
            perm[x] = eta.images[x]
            prov[x] = PROV_ETA
            continue
        pair = next(admissible_host_pairs(geom, d, q, x), None)
        if pair is None:
            raise NoHostPair(f"no host pair for point {x}")
        if pair not in cache:
            cache[pair] = gq_elation_from_eta(geom, eta, *pair)
        perm[x] = cache[pair].point_map[x]
        prov[x] = PROV_ETA_PB
        used_pairs[x] = pair
    return ExtensionState(geom=geom, d=d, q=q, m=m, m_target=m_target,
                          eta=eta, perm=perm, provenance=prov,
                          host_pairs=used_pairs)


# ---------------------------------------------------------------------------
# second-kind extension

@dataclass
class ResElation:
    """A residue collineation at a point: maps of the lines and planes
    through it."""

    center: int
    line_map: dict
    plane_map: dict

    def equal_maps(self, other: "ResElation") -> bool:
        return self.line_map == other.line_map and self.plane_map == other.plane_map


def _res_elation_from_gq(geom: PolarSpaceGeom, x0: int, y: int,
                         el: GQElation) -> ResElation:
    """Convert a quadrangle elation on x0-perp ∩ y-perp into residue maps
    at x0 through the canonical bijection c <-> x0c."""
    pm = el.point_map
    line_map = {}
    for lid in geom.lines_through[x0]:
        c = geom.proj_point_to_line(y, lid)
        line_map[lid] = geom.line_through(x0, pm[c])
    plane_map = {}
    for pid in geom.planes_through[x0]:
        trace = [c for c in geom.plane_sets[pid] if geom.adjacency[y, c]]
        imgs = [pm[c] for c in trace]
        img_line = geom.line_through(imgs[0], imgs[1])
        plane_map[pid] = geom.plane_through_line_and_point(img_line, x0)
    return ResElation(center=x0, line_map=line_map, plane_map=plane_map)


def _copy_res_elation(geom: PolarSpaceGeom, ela: ResElation,
                      target: int) -> ResElation:
    """Copy a residue elation to an opposite point by conjugating with the
    residue-to-residue projections."""
    c = ela.center
    line_map = {}
    for lid in geom.lines_through[target]:
        back = residue_projection(geom, target, c, lid, "line")
        line_map[lid] = residue_projection(geom, c, target,
                                           ela.line_map[back], "line")
    plane_map = {}
    for pid in geom.planes_through[target]:
        back = residue_projection(geom, target, c, pid, "plane")
        plane_map[pid] = residue_projection(geom, c, target,
                                            ela.plane_map[back], "plane")
    return ResElation(center=target, line_map=line_map, plane_map=plane_map)


def _seed_second_kind_res_elation(geom: PolarSpaceGeom, x0: int, o: int,
                                  alpha: int, beta_pid: int, p: int,
                                  p_target: int) -> ResElation:
    """The root elation of the residue of x0 fixing the residue lines
    alpha and <x0, proj_beta(x0)> pointwise, stabilizing the planes
    through x0*o, and mapping x0p to x0p'."""
    b_pts = [c for c in geom.plane_sets[beta_pid] if geom.adjacency[x0, c]]
    b_line = geom.line_through(b_pts[0], b_pts[1])
    plane2 = geom.plane_through_line_and_point(b_line, x0)
    line_xo = geom.line_through(x0, o)
    line_xp = geom.line_through(x0, p)
    line_xpt = geom.line_through(x0, p_target) if p_target != p else line_xp

    for y in range(geom.num_points):
        if geom.adjacency[x0, y]:
            continue
        d_hat = geom.proj_point_to_line(y, line_xo)
        u_hat = geom.proj_point_to_line(y, line_xp)
        ut_hat = geom.proj_point_to_line(y, line_xpt)
        if None in (d_hat, u_hat, ut_hat):
            continue
        l1_pts = [c for c in geom.plane_sets[alpha] if geom.adjacency[y, c]]
        l2_pts = [c for c in geom.plane_sets[plane2] if geom.adjacency[y, c]]
        if len(l1_pts) != geom.q + 1 or len(l2_pts) != geom.q + 1:
            continue
        l1 = geom.line_through(l1_pts[0], l1_pts[1])
        l2 = geom.line_through(l2_pts[0], l2_pts[1])
        q_hat = geom.proj_point_to_line(u_hat, l1)
        n_hat = geom.proj_point_to_line(u_hat, l2)
        if q_hat is None or n_hat is None:
            continue
        view = gq_from_opposite(geom, x0, y)
        root = GQRoot(kind="second", view=view, q=q_hat, d=d_hat,
                      u=u_hat, n=n_hat,
                      line_qd=geom.line_through(d_hat, q_hat),
                      line_uq=geom.line_through(u_hat, q_hat),
                      line_dn=geom.line_through(d_hat, n_hat))
        try:
            el = build_second_kind_gq_elation(view, root, ut_hat, u=u_hat)
        except (BadConfiguration, RecipeDegenerate):
            continue
        return _res_elation_from_gq(geom, x0, y, el)
    raise RecipeDegenerate(f"no opposite point yields a seed elation at {x0}")


@dataclass
class SecondExtension:
    """Total point map for the second-kind extension with per-point cases:
    0 boundary (alpha ∪ beta), 1 coplanar-fixed, 2 projected."""

    geom: PolarSpaceGeom
    alpha: int
    beta: int
    o: int
    p: int
    p_target: int
    perm: np.ndarray
    provenance: np.ndarray
    res_family: dict

    def collineation(self) -> Collineation:
        col = check_collineation(self.geom, self.perm)
        col.provenance = (f"extend-second-kind(alpha={self.alpha},"
                          f"beta={self.beta},o={self.o},p={self.p},p'={self.p_target})")
        return col


def extend_second_kind(geom: PolarSpaceGeom, alpha: int, beta_pid: int,
                       p: int, p_target: int) -> SecondExtension:
    """Collineation fixing alpha ∪ beta pointwise, stabilizing every line
    through their meeting point o, and mapping p to p'.

    Built per the copying procedure: a seed residue elation at a point of
    L = proj_alpha(p), copied across opposite points of alpha ∪ beta; images
    of general points arise as intersections of projected planes, with the
    coplanar degenerate case fixed pointwise.
    """
    aset, bset = geom.plane_sets[alpha], geom.plane_sets[beta_pid]
    inter = aset & bset
    if len(inter) != 1:
        raise BadConfiguration("alpha and beta must meet in exactly one point")
    o = next(iter(inter))
    for x, lbl in ((p, "p"), (p_target, "p'")):
        if geom.adjacency[o, x]:
            raise BadConfiguration(f"{lbl} must be opposite o")
    l_pts = frozenset(c for c in aset if geom.adjacency[p, c])
    m_pts = frozenset(c for c in bset if geom.adjacency[p, c])
    if (frozenset(c for c in aset if geom.adjacency[p_target, c]) != l_pts
            or frozenset(c for c in bset if geom.adjacency[p_target, c]) != m_pts):
        raise BadConfiguration("p and p' must project to the same lines of "
                               "alpha and beta")
    l_iter = sorted(l_pts)
    l_line = geom.line_through(l_iter[0], l_iter[1])
    m_iter = sorted(m_pts)
    m_line = geom.line_through(m_iter[0], m_iter[1])
    if not lines_opposite(geom, l_line, m_line):
        raise BadConfiguration("proj_alpha(p) and proj_beta(p) must be opposite")
    if p != p_target and geom.adjacency[p, p_target]:
        raise BadConfiguration("p and p' must be opposite or equal")

    x0 = min(l_pts)
    family = {x0: _seed_second_kind_res_elation(geom, x0, o, alpha, beta_pid,
                                                p, p_target)}
    boundary = sorted((aset | bset) - {o})
    frontier = [x0]
    while frontier:
        src = frontier.pop(0)
        for tgt in boundary:
            if tgt in family or geom.adjacency[src, tgt]:
                continue
            copied = _copy_res_elation(geom, family[src], tgt)
            family[tgt] = copied
            frontier.append(tgt)
    missing = [c for c in boundary if c not in family]
    if missing:
        raise CoverageIncomplete(f"residue family misses points {missing}")
    # consistency across copy paths: recopy from a second source and compare
    for tgt in boundary:
        srcs = [s for s in boundary
                if s != tgt and s in family and not geom.adjacency[s, tgt]]
        for s in srcs[:2]:
            recopied = _copy_res_elation(geom, family[s], tgt)
            assert recopied.equal_maps(family[tgt]), (
                f"residue copies disagree at {tgt} via {s}")

    n = geom.num_points
    perm = np.arange(n, dtype=np.int64)
    prov = np.zeros(n, dtype=np.int8)
    fixed = aset | bset
    for w in range(n):
        if w in fixed:
            continue
        a_pts = [c for c in aset if geom.adjacency[w, c]]
        b_pts = [c for c in bset if geom.adjacency[w, c]]
        a_line = geom.line_through(a_pts[0], a_pts[1])
        b_line = geom.line_through(b_pts[0], b_pts[1])
        if not geom.adjacency[w, o]:
            a = min(a_pts)
            b2 = min(b_pts)
            pi = geom.plane_through_line_and_point(a_line, w)
            sigma = geom.plane_through_line_and_point(b_line, w)
            pi2 = family[a].plane_map[pi]
            sigma2 = family[b2].plane_map[sigma]
            hit = geom.plane_sets[pi2] & geom.plane_sets[sigma2]
            assert len(hit) == 1, f"projected planes fail to meet at one point (w={w})"
            perm[w] = next(iter(hit))
            prov[w] = 2
        else:
            coplanar = all(geom.adjacency[x, y] for x in a_pts for y in b_pts)
            if coplanar:
                prov[w] = 1
                continue
            a = min(c for c in a_pts if c != o)
            b2 = min(c for c in b_pts if c != o)
            img_line = family[a].line_map[geom.line_through(a, w)]
            plane_wb = geom.plane_through_line_and_point(b_line, w)
            hit = geom.line_sets[img_line] & geom.plane_sets[plane_wb]
            assert len(hit) == 1, f"line-plane intersection not unique (w={w})"
            img_line_b = family[b2].line_map[geom.line_through(b2, w)]
            plane_wa = geom.plane_through_line_and_point(a_line, w)
            hit_b = geom.line_sets[img_line_b] & geom.plane_sets[plane_wa]
            assert hit == hit_b, f"two-sided images disagree (w={w})"
            perm[w] = next(iter(hit))
            prov[w] = 2
    return SecondExtension(geom=geom, alpha=alpha, beta=beta_pid, o=o, p=p,
                           p_target=p_target, perm=perm, provenance=prov,
                           res_family=family)


# ---------------------------------------------------------------------------
# linear stabilizer oracle

def _mat_inv_mod(mat: np.ndarray, q: int) -> np.ndarray:
    """Inverse of a square matrix over GF(q) by Gauss-Jordan."""
    _, _, inv = field_tables(q)
    n = mat.shape[0]
    a = mat.copy() % q
    e = np.eye(n, dtype=np.int64)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r, col] % q), None)
        if piv is None:
            raise ValueError("matrix is singular")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            e[[col, piv]] = e[[piv, col]]
        s = int(inv[a[col, col] % q])
        a[col] = (a[col] * s) % q
        e[col] = (e[col] * s) % q
        for r in range(n):
            if r != col and a[r, col] % q:
                f = a[r, col] % q
                a[r] = (a[r] - f * a[col]) % q
                e[r] = (e[r] - f * e[col]) % q
    return e % q


def _complete_basis(vectors: list, q: int, dim: int) -> list:
    """Extend a list of independent vectors to a basis of GF(q)^dim."""
    basis = [np.array(v, dtype=np.int64) % q for v in vectors]

    def rank(rows):
        m = np.array(rows, dtype=np.int64) % q
        r = 0
        m = m.copy()
        for col in range(dim):
            piv = next((i for i in range(r, len(m)) if m[i, col] % q), None)
            if piv is None:
                continue
            m[[r, piv]] = m[[piv, r]]
            _, _, inv = field_tables(q)
            m[r] = (m[r] * int(inv[m[r, col] % q])) % q
            for i in range(len(m)):
                if i != r and m[i, col] % q:
                    m[i] = (m[i] - m[i, col] * m[r]) % q
            r += 1
        return r

    base_rank = rank(basis)
    for cand in itertools.product(range(q), repeat=dim):
        if len(basis) == dim:
            break
        if not any(cand):
            continue
        if rank(basis + [np.array(cand, dtype=np.int64)]) > base_rank:
            basis.append(np.array(cand, dtype=np.int64))
            base_rank += 1
    return basis


def pointwise_stabilizer_oracle(geom: PolarSpaceGeom, root: Root) -> list:
    """All collineations induced by form-preserving linear maps of the
    carrier space fixing every inside point of the root projectively.

    Backtracking over images of an adapted basis (the root's frame vectors,
    fixed slots first).  Deduplicated point permutations, identity first.
    """
    q = geom.q
    spec = geom.spec
    dim = spec.dim
    gram = spec.gram()
    fixed_pts = sorted(root.inside_points)
    frame = root.apartment.frame.as_dict()
    other_pts = [frame[s] for s in sorted(frame)
                 if frame[s] not in root.inside_points]
    basis_vecs = [geom.points[x] for x in fixed_pts + other_pts]
    basis_vecs = _complete_basis(basis_vecs, q, dim)
    n_fixed = len(fixed_pts)

    all_vecs = np.array([v for v in itertools.product(range(q), repeat=dim)
                         if any(v)], dtype=np.int64)
    if spec.kind == "parabolic":
        quad = spec.quad_matrix()
        all_quad = np.einsum("ij,jk,ik->i", all_vecs, quad, all_vecs) % q
        basis_quad = [int(v @ quad @ v) % q for v in basis_vecs]
    gram_targets = [[int(basis_vecs[i] @ gram @ basis_vecs[j]) % q
                     for j in range(dim)] for i in range(dim)]

    solutions = []

    def backtrack(i, imgs):
        if i == dim:
            solutions.append([v.copy() for v in imgs])
            return
        if i < n_fixed:
            cands = [(lam * basis_vecs[i]) % q for lam in range(1, q)]
        else:
            mask = np.ones(len(all_vecs), dtype=bool)
            for jdx in range(i):
                vals = (all_vecs @ gram @ imgs[jdx]) % q
                mask &= vals == gram_targets[i][jdx]
            if spec.kind == "parabolic":
                mask &= all_quad == basis_quad[i]
            cands = [all_vecs[t] for t in np.flatnonzero(mask)]
        for cand in cands:
            ok = all(int(cand @ gram @ imgs[jdx]) % q == gram_targets[i][jdx]
                     for jdx in range(i))
            if not ok:
                continue
            if spec.kind == "parabolic" and int(cand @ quad @ cand) % q != basis_quad[i]:
                continue
            imgs.append(np.array(cand, dtype=np.int64))
            backtrack(i + 1, imgs)
            imgs.pop()

    backtrack(0, [])

    basis_mat = np.stack(basis_vecs)
    inv_basis = _mat_inv_mod(basis_mat, q)
    seen = {}
    for imgs in solutions:
        g = (inv_basis @ np.stack(imgs)) % q
        mapped = (geom.points @ g) % q
        perm = np.empty(geom.num_points, dtype=np.int64)
        ok = True
        for idx in range(geom.num_points):
            key = _normalize(mapped[idx], q)
            if key not in geom.point_index:
                ok = False
                break
            perm[idx] = geom.point_index[key]
        if not ok or len(set(perm.tolist())) != geom.num_points:
            continue
        seen.setdefault(perm.tobytes(), perm)
    out = []
    for key in sorted(seen):
        col = check_collineation(geom, seen[key])
        col.provenance = "stabilizer-oracle"
        out.append(col)
    return out
