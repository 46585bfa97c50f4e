"""Graded chain complexes with two edge signs: the plain orientation sign
epsilon and the lifting sign delta (given directly or as an SO(n) loop to be
resolved through the double cover).  The standard boundary sums epsilon over
edges, the twisted boundary sums epsilon*delta; integer homology comes from
Smith normal form with exact arithmetic.

Nothing here assumes the boundary squares to zero: arbitrary data may violate
it and the check is explicit.  Consistency quadruples (u, v, u', v') assert
that two broken edge pairs bound a common component, which forces
delta(u)delta(v) = delta(u')delta(v') and makes the twisted boundary square
to zero whenever the standard one does.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import InputError
from .spin import SOLoop, lift_sign

__all__ = [
    "Generator", "Edge", "ComplexDatum", "IntegerHomology",
    "boundary_matrices", "check_boundary_squared", "gauge_transform",
    "homology", "verify_chain_map", "smith_normal_form", "integer_abs_det",
    "two_edge_model", "broken_pair_datum", "coboundary_delta_search",
]


@dataclass(frozen=True)
class Generator:
    id: str
    grade: int
    loop: SOLoop | None = None  # trivialization class relative to a reference


@dataclass
class Edge:
    src: str
    tgt: str
    epsilon: int
    delta: int | SOLoop
    _resolved: int | None = dc_field(default=None, repr=False)

    def delta_sign(self) -> int:
        if self._resolved is None:
            if isinstance(self.delta, SOLoop):
                self._resolved = lift_sign(self.delta)
            else:
                if self.delta not in (1, -1):
                    raise InputError(f"edge delta must be +-1 or a loop, got {self.delta}")
                self._resolved = int(self.delta)
        return self._resolved


@dataclass(frozen=True)
class ComplexDatum:
    """Generators, an edge multiset, and optional consistency quadruples
    (indices into the edge list: u, v, u', v' with u, u' leaving one source
    and v, v' reaching one target through the respective middles)."""

    generators: tuple
    edges: tuple
    quadruples: tuple = ()

    def __post_init__(self):
        errs = self.validate()
        if errs:
            raise InputError("; ".join(errs))

    def validate(self) -> list:
        errs = []
        ids = [g.id for g in self.generators]
        if len(set(ids)) != len(ids):
            errs.append("generator ids are not unique")
            return errs
        grade = {g.id: g.grade for g in self.generators}
        for i, e in enumerate(self.edges):
            if e.src not in grade or e.tgt not in grade:
                errs.append(f"edges[{i}] ({e.src}->{e.tgt}): unknown generator id")
                continue
            gap = grade[e.src] - grade[e.tgt]
            if gap != 1:
                errs.append(f"edges[{i}] ({e.src}->{e.tgt}): grade gap {gap}, expected 1")
            if e.epsilon not in (1, -1):
                errs.append(f"edges[{i}] ({e.src}->{e.tgt}): epsilon must be +-1")
        for k, q in enumerate(self.quadruples):
            if len(q) != 4 or any(not 0 <= j < len(self.edges) for j in q):
                errs.append(f"quadruples[{k}]: must be four valid edge indices")
                continue
            u, v, u2, v2 = (self.edges[j] for j in q)
            if u.tgt != v.src or u2.tgt != v2.src or u.src != u2.src or v.tgt != v2.tgt:
                errs.append(f"quadruples[{k}]: edges do not form two broken pairs "
                            "with common endpoints")
        return errs

    def grades(self) -> list:
        return sorted({g.grade for g in self.generators})

    def generators_of_grade(self, k: int) -> list:
        return [g for g in self.generators if g.grade == k]

    def check_quadruples(self) -> bool:
        """Every declared quadruple satisfies the broken-pair sign identity
        delta(u)delta(v) = delta(u')delta(v')."""
        for q in self.quadruples:
            u, v, u2, v2 = (self.edges[j] for j in q)
            if u.delta_sign() * v.delta_sign() != u2.delta_sign() * v2.delta_sign():
                return False
        return True


@dataclass(frozen=True)
class IntegerHomology:
    """Per-degree invariant factors: free rank plus the torsion coefficients."""

    degrees: tuple  # of (degree, free_rank, torsion tuple)

    def as_dict(self):
        return {k: (free, tuple(tor)) for k, free, tor in self.degrees}


def boundary_matrices(datum: ComplexDatum, twisted: bool) -> dict:
    """Integer matrix per degree k; entry (y, x) sums epsilon (or
    epsilon*delta) over the edges from x (grade k) to y (grade k-1)."""
    out = {}
    grades = datum.grades()
    for k in grades:
        lower = datum.generators_of_grade(k - 1)
        upper = datum.generators_of_grade(k)
        if not lower or not upper:
            continue
        row = {g.id: i for i, g in enumerate(lower)}
        col = {g.id: i for i, g in enumerate(upper)}
        mat = [[0] * len(upper) for _ in range(len(lower))]
        for e in datum.edges:
            if e.src in col and e.tgt in row:
                w = e.epsilon * (e.delta_sign() if twisted else 1)
                mat[row[e.tgt]][col[e.src]] += w
        out[k] = mat
    return out


def _matmul_int(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))]
            for i in range(len(a))]


def check_boundary_squared(datum: ComplexDatum, twisted: bool):
    """True iff consecutive boundary matrices compose to zero over the
    integers; also returns the defect matrices per degree."""
    mats = boundary_matrices(datum, twisted)
    ok = True
    defects = {}
    for k in sorted(mats):
        if k + 1 not in mats:
            continue
        prod = _matmul_int(mats[k], mats[k + 1])
        if any(any(row) for row in prod):
            ok = False
            defects[k + 1] = prod
    return ok, defects


def gauge_transform(datum: ComplexDatum, loops: dict) -> ComplexDatum:
    """Change the per-generator trivialization class by SO(n) loops: each
    edge's delta is multiplied by the lift parities of its endpoint loops.
    The result is chain isomorphic to the input via the diagonal sign map."""
    missing = [g.id for g in datum.generators if g.id not in loops]
    if missing:
        raise InputError(f"missing gauge loop for generators: {missing}")
    parity = {gid: lift_sign(lp) for gid, lp in loops.items()}
    new_edges = tuple(
        Edge(src=e.src, tgt=e.tgt, epsilon=e.epsilon,
             delta=e.delta_sign() * parity[e.src] * parity[e.tgt])
        for e in datum.edges)
    return ComplexDatum(generators=datum.generators, edges=new_edges,
                        quadruples=datum.quadruples)


def smith_normal_form(matrix) -> list:
    """Invariant factors (positive, each dividing the next) of an integer
    matrix, via exact elementary row/column reduction."""
    a = [[int(x) for x in row] for row in matrix]
    m = len(a)
    n = len(a[0]) if m else 0
    factors = []
    t = 0
    while t < min(m, n):
        # locate the smallest magnitude nonzero entry in the remaining block
        piv = None
        for i in range(t, m):
            for j in range(t, n):
                if a[i][j] and (piv is None or abs(a[i][j]) < abs(a[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        i0, j0 = piv
        a[t], a[i0] = a[i0], a[t]
        for row in a:
            row[t], row[j0] = row[j0], row[t]
        # clear the pivot row and column
        dirty = False
        for i in range(t + 1, m):
            if a[i][t]:
                q = a[i][t] // a[t][t]
                for j in range(t, n):
                    a[i][j] -= q * a[t][j]
                if a[i][t]:
                    dirty = True
        for j in range(t + 1, n):
            if a[t][j]:
                q = a[t][j] // a[t][t]
                for i in range(t, m):
                    a[i][j] -= q * a[i][t]
                if a[t][j]:
                    dirty = True
        if dirty:
            continue
        # enforce divisibility of the remaining block by the pivot
        fix = None
        for i in range(t + 1, m):
            for j in range(t + 1, n):
                if a[i][j] % a[t][t]:
                    fix = i
                    break
            if fix is not None:
                break
        if fix is not None:
            for j in range(t, n):
                a[t][j] += a[fix][j]
            continue
        factors.append(abs(a[t][t]))
        t += 1
    return factors


def integer_abs_det(matrix) -> int:
    """|det| of a square integer matrix (product of its invariant factors)."""
    m = len(matrix)
    if any(len(row) != m for row in matrix):
        raise InputError("determinant needs a square matrix")
    if m == 0:
        return 1
    factors = smith_normal_form(matrix)
    if len(factors) < m:
        return 0
    out = 1
    for f in factors:
        out *= f
    return out


def rational_rank(matrix) -> int:
    """Rank over the rationals by exact Gauss elimination (test oracle route)."""
    a = [[Fraction(x) for x in row] for row in matrix]
    m = len(a)
    n = len(a[0]) if m else 0
    rank = 0
    col = 0
    while rank < m and col < n:
        piv = next((i for i in range(rank, m) if a[i][col] != 0), None)
        if piv is None:
            col += 1
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for i in range(m):
            if i != rank and a[i][col] != 0:
                f = a[i][col] / a[rank][col]
                for j in range(col, n):
                    a[i][j] -= f * a[rank][j]
        rank += 1
        col += 1
    return rank


def homology(datum: ComplexDatum, twisted: bool) -> IntegerHomology:
    """Integer homology per degree from Smith normal form.

    H_k = Z^(n_k - rank d_k - rank d_{k+1}) + sum of Z/d for the invariant
    factors d > 1 of the incoming boundary.
    """
    ok, defects = check_boundary_squared(datum, twisted)
    if not ok:
        raise InputError(f"boundary does not square to zero (defects at degrees "
                         f"{sorted(defects)})")
    mats = boundary_matrices(datum, twisted)
    factors = {k: smith_normal_form(m) for k, m in mats.items()}
    out = []
    for k in datum.grades():
        n_k = len(datum.generators_of_grade(k))
        rank_out = len(factors.get(k, []))
        fac_in = factors.get(k + 1, [])
        free = n_k - rank_out - len(fac_in)
        torsion = tuple(d for d in fac_in if d > 1)
        out.append((k, free, torsion))
    return IntegerHomology(degrees=tuple(out))


def verify_chain_map(theta: dict, source_boundaries: dict, target: ComplexDatum,
                     twisted: bool):
    """Check the intertwining relation (target boundary) o Theta = Theta o
    (source boundary) degree by degree over the integers.

    ``theta`` maps each degree k to an integer matrix from the source degree-k
    group to the target one.  Returns (is_chain_map, defects per degree,
    is_isomorphism); the defect is Theta d - d Theta.
    """
    tmats = boundary_matrices(target, twisted)
    defects = {}
    ok = True
    for k, d_src in source_boundaries.items():
        if k not in theta or (k - 1) not in theta:
            raise InputError(f"theta is missing degree {k} or {k - 1}")
        if k not in tmats:
            raise InputError(f"target complex has no boundary in degree {k}")
        th_k, th_low = theta[k], theta[k - 1]
        if (len(tmats[k][0]) != len(th_k) or len(th_low[0]) != len(d_src)
                or len(d_src[0]) != len(th_k[0])):
            raise InputError(f"dimension mismatch at degree {k}")
        lhs = _matmul_int(tmats[k], th_k)
        rhs = _matmul_int(th_low, d_src)
        defect = [[r - l for l, r in zip(lr, rr)] for lr, rr in zip(lhs, rhs)]
        if any(any(row) for row in defect):
            ok = False
            defects[k] = defect
    iso = all(len(m) == len(m[0]) and integer_abs_det(m) == 1 for m in theta.values())
    return ok, defects, iso


def two_edge_model() -> ComplexDatum:
    """Minimal datum where the twisted and standard homologies differ: one
    generator in each of grades 1, 0 joined by two edges with equal epsilon
    and opposite delta."""
    return ComplexDatum(
        generators=(Generator("x", 1), Generator("y", 0)),
        edges=(Edge("x", "y", 1, 1), Edge("x", "y", 1, -1)))


def broken_pair_datum(rng: np.random.Generator, max_generators: int = 12,
                      loop_deltas: bool = False) -> ComplexDatum:
    """Random datum built broken-pair first: quadruples are drawn and their
    four edges derived, so the sign identity holds by construction.

    Layout over four grades: sources carry only outgoing edges, sinks only
    incoming ones, and every middle generator is private to its quadruple (the
    two broken pairs either use two distinct middles or share one, producing
    parallel edges).  Every composition of two edges then lies inside a single
    quadruple, where the sign constraints make both boundary flavors square to
    zero; shared middles are where the twisted and standard complexes can
    genuinely differ.
    """
    from .spin import axis_rotation_loop, rotation_loop

    def rand_sign():
        return int(rng.integers(0, 2)) * 2 - 1

    def delta_value(sign):
        if not loop_deltas or rng.random() < 0.6:
            return sign
        if rng.random() < 0.5:
            return rotation_loop(2 * int(rng.integers(0, 2)) + (0 if sign == 1 else 1),
                                 count=64)
        turns = (2 if sign == 1 else 1)
        return axis_rotation_loop([1.0, 0.5, 0.3], turns, count=96)

    tops3 = [Generator(f"a{i}", 3) for i in range(rng.integers(1, 3))]
    tops2 = [Generator(f"b{i}", 2) for i in range(rng.integers(1, 3))]
    sinks1 = [Generator(f"c{i}", 1) for i in range(rng.integers(1, 3))]
    sinks0 = [Generator(f"d{i}", 0) for i in range(rng.integers(1, 3))]
    gens = tops3 + tops2 + sinks1 + sinks0

    edges = []
    quads = []
    mid_count = 0

    def add_quadruples(tops, sinks, mid_grade, budget):
        nonlocal mid_count
        for x in tops:
            for z in sinks:
                for _ in range(int(rng.integers(0, 3))):
                    shared = rng.random() < 0.5
                    need = 1 if shared else 2
                    if len(gens) + need > budget:
                        return
                    y1 = Generator(f"m{mid_count}", mid_grade)
                    mid_count += 1
                    gens.append(y1)
                    if shared:
                        y2 = y1
                    else:
                        y2 = Generator(f"m{mid_count}", mid_grade)
                        mid_count += 1
                        gens.append(y2)
                    e_u = rand_sign()
                    e_v = rand_sign()
                    e_u2 = rand_sign()
                    e_v2 = -e_u * e_v * e_u2
                    d_u, d_v, d_u2 = rand_sign(), rand_sign(), rand_sign()
                    d_v2 = d_u * d_v * d_u2
                    base = len(edges)
                    edges.extend([
                        Edge(x.id, y1.id, e_u, delta_value(d_u)),
                        Edge(y1.id, z.id, e_v, delta_value(d_v)),
                        Edge(x.id, y2.id, e_u2, delta_value(d_u2)),
                        Edge(y2.id, z.id, e_v2, delta_value(d_v2)),
                    ])
                    quads.append((base, base + 1, base + 2, base + 3))

    add_quadruples(tops3, sinks1, 2, max_generators)
    add_quadruples(tops2, sinks0, 1, max_generators)
    return ComplexDatum(generators=tuple(gens), edges=tuple(edges),
                        quadruples=tuple(quads))


def coboundary_delta_search(datum: ComplexDatum):
    """Brute force search over all sign functions c on the generators for
    delta(e) = c(src) c(tgt) on every edge; returns one such c or None."""
    gens = [g.id for g in datum.generators]
    if len(gens) > 20:
        raise InputError("brute force coboundary search capped at 20 generators")
    idx = {gid: i for i, gid in enumerate(gens)}
    m = len(gens)
    codes = np.arange(1 << m, dtype=np.uint64)
    signs = np.where((codes[:, None] >> np.arange(m, dtype=np.uint64)) & 1, -1, 1)
    ok = np.ones(len(codes), dtype=bool)
    for e in datum.edges:
        prod = signs[:, idx[e.src]] * signs[:, idx[e.tgt]]
        ok &= prod == e.delta_sign()
    hits = np.nonzero(ok)[0]
    if hits.size == 0:
        return None
    c = signs[hits[0]]
    return {gid: int(c[idx[gid]]) for gid in gens}
