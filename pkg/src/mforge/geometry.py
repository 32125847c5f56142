"""Finite rank-3 polar spaces as explicit incidence structures.

Builds the symplectic space W(5,q) (alternating form on a 6-space) and the
parabolic quadric Q(6,q) (quadratic form on a 7-space) over a small prime
field, as exhaustive tables of points, lines and planes together with a
collinearity matrix.  Everything downstream is set arithmetic over these
tables; linear algebra is only used here and in the oracle module.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AxiomViolation, CacheError, DegenerateForm

SUPPORTED_Q = (2, 3, 5)

GEOM_SCHEMA = "geom/1"


@lru_cache(maxsize=None)
def field_tables(q: int):
    """Addition/multiplication/inverse tables for GF(q), q a small prime.

    The field axioms are checked exhaustively once per q; the tables are
    cached for the life of the process.
    """
    if q not in SUPPORTED_Q:
        raise ValueError(f"unsupported field order {q}; supported: {SUPPORTED_Q}")
    add = np.array([[(a + b) % q for b in range(q)] for a in range(q)], dtype=np.int16)
    mul = np.array([[(a * b) % q for b in range(q)] for a in range(q)], dtype=np.int16)
    inv = np.zeros(q, dtype=np.int16)
    for a in range(1, q):
        for b in range(1, q):
            if (a * b) % q == 1:
                inv[a] = b
                break
        else:
            raise ValueError(f"{q} is not prime: {a} has no inverse")
    # field axioms, exhaustive over all triples
    for a in range(q):
        for b in range(q):
            assert add[a, b] == add[b, a] and mul[a, b] == mul[b, a]
            for c in range(q):
                assert add[add[a, b], c] == add[a, add[b, c]]
                assert mul[mul[a, b], c] == mul[a, mul[b, c]]
                assert mul[a, add[b, c]] == add[mul[a, b], mul[a, c]]
    return add, mul, inv


@dataclass(frozen=True)
class FormSpec:
    """A nondegenerate form defining a rank-3 polar space.

    kind "alternating": antidiagonal Gram matrix (1,1,1,-1,-1,-1) on a
    6-space; kind "parabolic": the quadric x0^2 + x1*x2 + x3*x4 + x5*x6 on a
    7-space.
    """

    kind: str
    q: int

    def __post_init__(self):
        if self.kind not in ("alternating", "parabolic"):
            raise ValueError(f"unknown form kind {self.kind!r}")
        field_tables(self.q)

    @property
    def dim(self) -> int:
        return 6 if self.kind == "alternating" else 7

    @property
    def space_name(self) -> str:
        return "w5" if self.kind == "alternating" else "q6"

    @classmethod
    def w5(cls, q: int) -> "FormSpec":
        return cls("alternating", q)

    @classmethod
    def q6(cls, q: int) -> "FormSpec":
        return cls("parabolic", q)

    @classmethod
    def from_space(cls, space: str, q: int) -> "FormSpec":
        try:
            return {"w5": cls.w5, "q6": cls.q6}[space](q)
        except KeyError:
            raise ValueError(f"unknown space {space!r}; expected 'w5' or 'q6'") from None

    def gram(self) -> np.ndarray:
        """Bilinear form matrix: the Gram matrix (alternating) or the
        polarization of the quadratic form (parabolic)."""
        q, n = self.q, self.dim
        m = np.zeros((n, n), dtype=np.int64)
        if self.kind == "alternating":
            for i, c in enumerate((1, 1, 1, -1, -1, -1)):
                m[i, n - 1 - i] = c % q
        else:
            a = self.quad_matrix()
            m = (a + a.T) % q
        return m

    def quad_matrix(self) -> np.ndarray:
        """Upper-triangular coefficient matrix of the quadratic form."""
        if self.kind != "parabolic":
            raise ValueError("quadratic coefficients only exist for the parabolic kind")
        a = np.zeros((7, 7), dtype=np.int64)
        a[0, 0] = 1
        a[1, 2] = 1
        a[3, 4] = 1
        a[5, 6] = 1
        return a

    def quad_value(self, v: np.ndarray) -> int:
        a = self.quad_matrix()
        return int(v @ a @ v) % self.q

    def check_nondegenerate(self) -> None:
        """Raise DegenerateForm if the radical is nontrivial.

        For the alternating form the radical is the kernel of the Gram
        matrix.  For the quadric the radical is the set of singular vectors
        in the kernel of the polarization.
        """
        q = self.q
        g = self.gram()
        kernel = _kernel_vectors(g, q)
        if self.kind == "alternating":
            if kernel:
                raise DegenerateForm("alternating form has a nontrivial kernel")
        else:
            for v in kernel:
                if self.quad_value(np.array(v, dtype=np.int64)) == 0:
                    raise DegenerateForm("quadratic form has a singular radical point")

    def to_json(self) -> dict:
        return {"kind": self.kind, "q": self.q}

    @classmethod
    def from_json(cls, data: dict) -> "FormSpec":
        return cls(data["kind"], data["q"])


def _kernel_vectors(m: np.ndarray, q: int) -> list[tuple[int, ...]]:
    """All nonzero kernel vectors of m over GF(q), by brute force."""
    n = m.shape[0]
    out = []
    for v in itertools.product(range(q), repeat=n):
        if any(v) and not ((m @ np.array(v, dtype=np.int64)) % q).any():
            out.append(v)
    return out


def _normalize(v: np.ndarray, q: int) -> tuple[int, ...]:
    """Scale so the first nonzero coordinate is 1."""
    _, _, inv = field_tables(q)
    for c in v:
        if c % q:
            s = int(inv[c % q])
            return tuple(int(x * s) % q for x in v)
    raise ValueError("zero vector has no normalization")


@dataclass
class PolarSpaceGeom:
    """Immutable incidence structure of a rank-3 polar space.

    points[i] is the normalized coordinate vector of point i (ids are the
    lexicographic ranks of those vectors).  adjacency[i, j] is True iff the
    form vanishes on the pair; the diagonal is True (a point is collinear
    with itself).  Lines are sorted (q+1)-tuples of point ids, planes sorted
    (q^2+q+1)-tuples, both tables sorted lexicographically.
    """

    spec: FormSpec
    points: np.ndarray
    adjacency: np.ndarray
    lines: np.ndarray
    planes: tuple
    rank: int = 3

    # derived indices, filled by _build_indices
    point_index: dict = field(default_factory=dict, repr=False)
    line_sets: list = field(default_factory=list, repr=False)
    plane_sets: list = field(default_factory=list, repr=False)
    line_index: dict = field(default_factory=dict, repr=False)
    plane_index: dict = field(default_factory=dict, repr=False)
    pair_line: dict = field(default_factory=dict, repr=False)
    lines_through: list = field(default_factory=list, repr=False)
    planes_through: list = field(default_factory=list, repr=False)
    planes_of_line: list = field(default_factory=list, repr=False)
    lines_of_plane: list = field(default_factory=list, repr=False)

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def num_points(self) -> int:
        return len(self.points)

    @property
    def num_lines(self) -> int:
        return len(self.lines)

    @property
    def num_planes(self) -> int:
        return len(self.planes)

    def collinear(self, a: int, b: int) -> bool:
        return bool(self.adjacency[a, b])

    def opposite(self, a: int, b: int) -> bool:
        return not self.adjacency[a, b]

    def perp_row(self, p: int) -> np.ndarray:
        return self.adjacency[p]

    def line_points(self, lid: int) -> np.ndarray:
        return self.lines[lid]

    def line_through(self, a: int, b: int) -> int:
        """Line id through two distinct collinear points."""
        key = (a, b) if a < b else (b, a)
        return self.pair_line[key]

    def plane_of(self, pts: frozenset) -> int:
        return self.plane_index[pts]

    def proj_point_to_line(self, x: int, lid: int):
        """The unique point of line lid collinear to x, or None when x is
        collinear to the whole line."""
        pts = self.lines[lid]
        mask = self.adjacency[x, pts]
        hits = np.flatnonzero(mask)
        if len(hits) == len(pts):
            return None
        # x-perp is a hyperplane, so it meets every line
        return int(pts[hits[0]])

    def plane_through_line_and_point(self, lid: int, x: int) -> int:
        """The plane containing line lid and a point x collinear to all of
        it (x off the line)."""
        for pid in self.planes_of_line[lid]:
            if x in self.plane_sets[pid]:
                return pid
        raise ValueError(f"no plane through line {lid} and point {x}")

    def _build_indices(self) -> None:
        n = self.num_points
        self.point_index = {tuple(map(int, v)): i for i, v in enumerate(self.points)}
        self.line_sets = [frozenset(map(int, row)) for row in self.lines]
        self.plane_sets = [frozenset(pl) for pl in self.planes]
        self.line_index = {s: i for i, s in enumerate(self.line_sets)}
        self.plane_index = {s: i for i, s in enumerate(self.plane_sets)}
        self.pair_line = {}
        lines_through = [[] for _ in range(n)]
        for lid, row in enumerate(self.lines):
            pts = [int(x) for x in row]
            for a, b in itertools.combinations(pts, 2):
                self.pair_line[(a, b)] = lid
            for a in pts:
                lines_through[a].append(lid)
        self.lines_through = [tuple(ls) for ls in lines_through]
        planes_through = [[] for _ in range(n)]
        planes_of_line = [[] for _ in range(self.num_lines)]
        lines_of_plane = []
        for pid, pl in enumerate(self.planes):
            for a in pl:
                planes_through[a].append(pid)
            inside = []
            pset = self.plane_sets[pid]
            seen = set()
            for a in pl:
                for lid in self.lines_through[a]:
                    if lid not in seen and self.line_sets[lid] <= pset:
                        seen.add(lid)
                        inside.append(lid)
                        planes_of_line[lid].append(pid)
            lines_of_plane.append(tuple(sorted(inside)))
        self.planes_through = [tuple(ps) for ps in planes_through]
        self.planes_of_line = [tuple(ps) for ps in planes_of_line]
        self.lines_of_plane = lines_of_plane


def _isotropic_points(spec: FormSpec) -> np.ndarray:
    """Normalized coordinate vectors of all points of the polar space, in
    lexicographic order."""
    q, n = spec.q, spec.dim
    rows = []
    for v in itertools.product(range(q), repeat=n):
        # normalized representatives: first nonzero coordinate equals 1
        lead = next((c for c in v if c), None)
        if lead != 1:
            continue
        if spec.kind == "parabolic" and spec.quad_value(np.array(v, dtype=np.int64)) != 0:
            continue
        rows.append(v)
    return np.array(rows, dtype=np.int64)


def build_polar_space(spec: FormSpec) -> PolarSpaceGeom:
    """Construct the full incidence structure for the given form.

    Deterministic: point ids are lexicographic ranks of normalized vectors,
    line/plane tables are sorted.  Raises DegenerateForm for a form with a
    nontrivial radical.
    """
    spec.check_nondegenerate()
    q = spec.q
    pts = _isotropic_points(spec)
    n = len(pts)
    gram = spec.gram()
    vals = (pts @ gram @ pts.T) % q
    adjacency = vals == 0
    np.fill_diagonal(adjacency, True)

    # every scalar multiple of every point vector, for normalization-free
    # span lookups
    vec_index = {}
    for i, v in enumerate(pts):
        for lam in range(1, q):
            vec_index[tuple(int(c) for c in (lam * v) % q)] = i

    scalars = list(itertools.product(range(q), repeat=2))

    def span_line(a: int, b: int) -> tuple:
        va, vb = pts[a], pts[b]
        ids = [a, b] + [vec_index[tuple(int(c) for c in (va + lam * vb) % q)]
                        for lam in range(1, q)]
        return tuple(sorted(ids))

    line_set = set()
    for a in range(n):
        nbrs = np.flatnonzero(adjacency[a])
        for b in nbrs[nbrs > a]:
            line_set.add(span_line(a, int(b)))
    lines = np.array(sorted(line_set), dtype=np.int64)

    # planes through a line partition the common perp of the line, so one
    # span per plane per line suffices
    plane_set = set()
    for row in lines:
        a, b = int(row[0]), int(row[1])
        row_set = set(int(x) for x in row)
        remaining = set(
            int(x) for x in np.flatnonzero(adjacency[a] & adjacency[b])
        ) - row_set
        va, vb = pts[a], pts[b]
        while remaining:
            x = min(remaining)
            vx = pts[x]
            ids = set(row_set)
            for lam0, lam1 in scalars:
                w = (lam0 * va + lam1 * vb + vx) % q
                ids.add(vec_index[tuple(int(c) for c in w)])
            plane_set.add(tuple(sorted(ids)))
            remaining -= ids
    planes = tuple(sorted(plane_set))

    geom = PolarSpaceGeom(spec=spec, points=pts, adjacency=adjacency,
                          lines=lines, planes=planes)
    geom._build_indices()
    return geom


def perp_point(geom: PolarSpaceGeom, p: int) -> frozenset:
    """All points collinear with p, including p itself."""
    return frozenset(int(x) for x in np.flatnonzero(geom.adjacency[p]))


def perp_set(geom: PolarSpaceGeom, pts) -> frozenset:
    """Intersection of the perps of a nonempty point set."""
    pts = list(pts)
    if not pts:
        raise ValueError("perp_set requires a nonempty point set")
    mask = geom.adjacency[pts[0]].copy()
    for p in pts[1:]:
        mask &= geom.adjacency[p]
    return frozenset(int(x) for x in np.flatnonzero(mask))


def axiom_check(geom: PolarSpaceGeom) -> dict:
    """Exhaustive Buekenhout-Shult, partial-linearity and thickness check.

    Returns a report fragment on success; raises AxiomViolation carrying a
    witness on the first failure.
    """
    n, q = geom.num_points, geom.q
    lines = geom.lines
    adj = geom.adjacency

    if not np.array_equal(adj, adj.T):
        raise AxiomViolation("collinearity table is not symmetric")

    # bit-exact agreement between the adjacency table and form evaluation
    vals = (geom.points @ geom.spec.gram() @ geom.points.T) % q
    expect = vals == 0
    np.fill_diagonal(expect, True)
    if not np.array_equal(adj, expect):
        i, j = map(int, np.argwhere(adj != expect)[0])
        raise AxiomViolation("adjacency disagrees with form evaluation",
                             witness=(i, j))

    if lines.shape[1] != q + 1:
        raise AxiomViolation(f"lines must have {q + 1} points")

    for x in range(n):
        row = adj[x]
        if row.all():
            raise AxiomViolation("perp of a point is not proper", witness=(x, None))
        counts = row[lines].sum(axis=1)
        if (counts == 0).any():
            lid = int(np.flatnonzero(counts == 0)[0])
            raise AxiomViolation("perp misses a line", witness=(x, lid))
        bad = (counts > 1) & (counts < q + 1)
        if bad.any():
            lid = int(np.flatnonzero(bad)[0])
            raise AxiomViolation("perp is not a subspace", witness=(x, lid))

    # partial linearity: every collinear pair lies on exactly one line
    pair_count = {}
    for lid, row in enumerate(lines):
        for a, b in itertools.combinations(sorted(int(x) for x in row), 2):
            if (a, b) in pair_count:
                raise AxiomViolation("two lines share two points",
                                     witness=(a, (pair_count[(a, b)], lid)))
            pair_count[(a, b)] = lid
    collinear_pairs = (int(adj.sum()) - n) // 2
    if collinear_pairs != len(pair_count):
        raise AxiomViolation("collinear pair without a line")

    # thickness: every line lies in at least three planes
    for lid, pids in enumerate(geom.planes_of_line):
        if len(pids) < 3:
            raise AxiomViolation("line in fewer than three planes",
                                 witness=(None, lid))

    for pl in geom.planes:
        if len(pl) != q * q + q + 1:
            raise AxiomViolation("plane of wrong cardinality")

    return {
        "claim": "axioms",
        "space": geom.spec.space_name,
        "q": q,
        "points": n,
        "lines": geom.num_lines,
        "planes": geom.num_planes,
        "result": "pass",
    }


def geom_to_json(geom: PolarSpaceGeom) -> str:
    """Byte-stable JSON cache of the geometry (schema geom/1)."""
    doc = {
        "schema": GEOM_SCHEMA,
        "form": geom.spec.to_json(),
        "q": geom.q,
        "points": [[int(c) for c in v] for v in geom.points],
        "lines": [[int(x) for x in row] for row in geom.lines],
        "planes": [list(pl) for pl in geom.planes],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def geom_from_json(text: str) -> PolarSpaceGeom:
    """Load and fully validate a geometry cache; raises CacheError."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CacheError(f"cache is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("schema") != GEOM_SCHEMA:
        raise CacheError("cache schema is not geom/1")
    try:
        spec = FormSpec.from_json(doc["form"])
        rebuilt = build_polar_space(spec)
        pts = np.array(doc["points"], dtype=np.int64)
        lines = np.array(doc["lines"], dtype=np.int64)
        planes = tuple(tuple(pl) for pl in doc["planes"])
    except (KeyError, TypeError, ValueError) as e:
        raise CacheError(f"cache is malformed: {e}") from None
    if (pts.shape != rebuilt.points.shape or not np.array_equal(pts, rebuilt.points)
            or lines.shape != rebuilt.lines.shape
            or not np.array_equal(lines, rebuilt.lines)
            or planes != rebuilt.planes):
        raise CacheError("cache content disagrees with a fresh build")
    return rebuilt
