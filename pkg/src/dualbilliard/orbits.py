"""Search for 3-periodic orbits of the dual billiard map.

An orbit with vertices z_1..z_n (n odd) has tangency points
q_i = (z_i + z_{i+1})/2 on the surface, and the vertices are recovered by the
alternating sum z_i = sum_j (-1)^j q_{i+j}.  Orbits are exactly the critical
points of the symplectic-area functional

    F(q_1..q_n) = sum_{i<j} (-1)^{i+j} omega(q_i, q_j)

restricted to tuples of surface points, with the tangency normals as chart
coordinates.  For n = 3 the search solves the closure system

    q(u_i) + a_i J u_i = q(u_{i+1}) - a_{i+1} J u_{i+1},   i = 1, 2, 3 cyclic,

for three unit normals u_i and multipliers a_i: both sides equal the vertex
between the two tangency points.  On the unit sphere every triple
(u, L u, L^2 u) with multipliers sqrt(3) solves it exactly, L the cube root
of unity rotation; these triples seed the multistart search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual_map import dual_map
from .surface import SupportSurface
from .symplectic import (SQRT3, cube_root_rotate, j_apply, normalize, omega,
                         random_unit, tangent_basis)

DEFAULT_RNG_SEED = 12345
DEDUP_TOL = 1e-6           # vertex distance below which two orbits coincide
ISOLATION_TOL = 1e-8       # smallest-singular-value threshold for isolation
AREA_THRESHOLD_FACTOR = 1e-6   # orbits must have |F| > factor * diameter^2
LEX_TOL = 1e-9             # tolerance of the lexicographic canonical order


# ---------------------------------------------------------------------------
# the functional and residuals
# ---------------------------------------------------------------------------

def symplectic_area(points) -> float:
    """Alternating symplectic area F of an odd tuple of points.

    For n = 3 this is omega(q2, q1) + omega(q1, q3) + omega(q3, q2); it is
    invariant under cyclic shifts, changes sign under transpositions and
    under reversal, and is translation invariant for odd n.
    """
    q = np.asarray(points, dtype=float)
    if q.ndim != 2:
        raise ValueError(f"expected an (n, 2m) array of points, got shape {q.shape}")
    n = q.shape[0]
    if n % 2 == 0 or n < 3:
        raise ValueError(f"the tuple length must be odd and >= 3, got {n}")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += (-1.0) ** (i + j) * omega(q[i], q[j])
    return float(total)


def _area_point_gradients(q: np.ndarray) -> np.ndarray:
    """Gradients of F with respect to each point: grad_{q_k} F = J s_k."""
    n = q.shape[0]
    grads = np.empty_like(q)
    for k in range(n):
        s = np.zeros(q.shape[1])
        for i in range(n):
            if i == k:
                continue
            sgn = (-1.0) ** (i + k)
            s += sgn * q[i] if i < k else -sgn * q[i]
        grads[k] = j_apply(s)
    return grads


def area_gradient(surface: SupportSurface, tup: "TangencyTuple") -> np.ndarray:
    """Tangential gradient of F(q(u_1)..q(u_n)) with respect to the normals.

    Row k is the pullback of grad_{q_k} F through the tangent map of
    u -> q(u); it is automatically tangent to the sphere at u_k.  At a
    genuine orbit every row vanishes.
    """
    u = tup.normals
    q = np.array([surface.point(ui) for ui in u])
    gq = _area_point_gradients(q)
    out = np.empty_like(u)
    for k in range(u.shape[0]):
        out[k] = surface.tangent_map(u[k]) @ gq[k]
    return out


def vertices_from_points(points) -> np.ndarray:
    """Vertices by the alternating-sum reconstruction z_i = sum_j (-1)^j q_{i+j}."""
    q = np.asarray(points, dtype=float)
    n = q.shape[0]
    if n % 2 == 0:
        raise ValueError("reconstruction requires an odd tuple")
    z = np.zeros_like(q)
    for i in range(n):
        for j in range(n):
            z[i] += (-1.0) ** j * q[(i + j) % n]
    return z


def closure_residual(surface: SupportSurface, tup: "TangencyTuple") -> np.ndarray:
    """Residual vector of the periodicity conditions for the tuple.

    For n = 3 this is the stacked closure system
    q_i + a_i J u_i - q_{i+1} + a_{i+1} J u_{i+1}, a vector of length 6m.
    For odd n > 3 it is the stacked component of the alternating partial sums
    orthogonal to the characteristic directions (the multiplier-free
    criticality condition).
    """
    u = tup.normals
    n = u.shape[0]
    q = np.array([surface.point(ui) for ui in u])
    ju = j_apply(u)
    if n == 3:
        a = tup.multipliers
        if a is None:
            raise ValueError("multipliers are required for n = 3")
        res = [q[i] + a[i] * ju[i] - q[(i + 1) % 3] + a[(i + 1) % 3] * ju[(i + 1) % 3]
               for i in range(3)]
        return np.concatenate(res)
    res = []
    for k in range(n):
        s = np.zeros(q.shape[1])
        for j in range(n - 1):
            s += (-1.0) ** j * q[(k + 1 + j) % n]
        res.append(s - (s @ ju[k]) * ju[k])
    return np.concatenate(res)


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass
class TangencyTuple:
    """Normals (n, 2m) and, for n = 3, the chord multipliers of a candidate orbit."""

    normals: np.ndarray
    multipliers: np.ndarray | None = None

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float)
        if self.normals.ndim != 2:
            raise ValueError("normals must be an (n, 2m) array")
        n, dim = self.normals.shape
        if n % 2 == 0 or n < 3:
            raise ValueError(f"the tuple length must be odd and >= 3, got {n}")
        if dim % 2 != 0:
            raise ValueError(f"ambient dimension must be even, got {dim}")
        norms = np.linalg.norm(self.normals, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("normals must be unit vectors within 1e-12")
        if self.multipliers is not None:
            self.multipliers = np.asarray(self.multipliers, dtype=float)
            if self.multipliers.shape != (n,):
                raise ValueError("multipliers must match the number of normals")

    @property
    def n(self) -> int:
        return self.normals.shape[0]


@dataclass
class OrbitSolution:
    """A converged periodic orbit in canonical or raw form."""

    tuple: TangencyTuple
    points: np.ndarray          # tangency points q_i, shape (n, 2m)
    vertices: np.ndarray        # orbit vertices z_i, shape (n, 2m)
    area_value: float           # value of F at the tangency points
    residual: float
    is_isolated: bool
    min_singular_value: float


@dataclass
class PolishResult:
    """Outcome of one Newton polish: converged | no_convergence | backtracking | zero_area."""

    status: str
    orbit: OrbitSolution | None
    residual: float
    iterations: int


@dataclass
class FamilyRecord:
    """A cluster of non-isolated solutions, collapsed to one representative."""

    representative: OrbitSolution
    members_found: int


@dataclass
class OrbitSet:
    """Deduplicated search results: isolated orbits plus non-isolated families."""

    orbits: list[OrbitSolution]
    families: list[FamilyRecord]
    dedup_tolerance: float
    metadata: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.orbits)


# ---------------------------------------------------------------------------
# dihedral action and canonical form
# ---------------------------------------------------------------------------

def _dihedral_images(vertices, normals, multipliers, points):
    """All 2n relabelings of an orbit: cyclic shifts and orientation reversal.

    Reversal fixes the first vertex, reverses the traversal, and flips the
    multiplier signs (the chords are walked the opposite way).
    """
    n = vertices.shape[0]
    variants = [(vertices, normals, multipliers, points)]
    rv = np.roll(vertices[::-1], 1, axis=0)
    rn = normals[::-1]
    ra = None if multipliers is None else -multipliers[::-1]
    rq = points[::-1]
    variants.append((rv, rn, ra, rq))
    images = []
    for v, u, a, q in variants:
        for k in range(n):
            images.append((
                np.roll(v, -k, axis=0),
                np.roll(u, -k, axis=0),
                None if a is None else np.roll(a, -k),
                np.roll(q, -k, axis=0),
            ))
    return images


def _lex_less(a: np.ndarray, b: np.ndarray, tol: float = LEX_TOL) -> bool:
    d = a - b
    idx = np.flatnonzero(np.abs(d) > tol)
    return idx.size > 0 and d[idx[0]] < 0.0


def canonicalize(orbit: OrbitSolution) -> OrbitSolution:
    """Canonical representative modulo the dihedral relabelings of the orbit.

    Picks the image whose flattened vertex sequence is lexicographically
    smallest (with tolerance), so repeated finds of one orbit compare equal.
    The area value flips sign when the chosen image reverses orientation.
    """
    imgs = _dihedral_images(orbit.vertices, orbit.tuple.normals,
                            orbit.tuple.multipliers, orbit.points)
    best = None
    best_flat = None
    for v, u, a, q in imgs:
        flat = v.ravel()
        if best is None or _lex_less(flat, best_flat):
            best = (v, u, a, q)
            best_flat = flat
    v, u, a, q = best
    return OrbitSolution(
        tuple=TangencyTuple(u, a),
        points=q,
        vertices=v,
        area_value=symplectic_area(q),
        residual=orbit.residual,
        is_isolated=orbit.is_isolated,
        min_singular_value=orbit.min_singular_value,
    )


def dihedral_vertex_distance(va: np.ndarray, vb: np.ndarray) -> float:
    """min over the dihedral relabelings of the max vertex distance between orbits."""
    n = vb.shape[0]
    placeholder = np.zeros(n)
    best = np.inf
    for v, _, _, _ in _dihedral_images(vb, vb, placeholder, vb):
        d = float(np.max(np.linalg.norm(va - v, axis=1)))
        best = min(best, d)
    return best


# ---------------------------------------------------------------------------
# Newton polish
# ---------------------------------------------------------------------------

def _closure_state(surface, u, a):
    q = np.array([surface.point(ui) for ui in u])
    ju = j_apply(u)
    res = np.concatenate([
        q[i] + a[i] * ju[i] - q[(i + 1) % 3] + a[(i + 1) % 3] * ju[(i + 1) % 3]
        for i in range(3)
    ])
    return res, q, ju


def _closure_jacobian(surface, u, a, ju):
    """Jacobian of the stacked closure residual in tangent coordinates.

    Unknown order: tangent coefficients of u_1, u_2, u_3 (2m-1 each), then
    a_1, a_2, a_3.  The matrix is square of size 6m.
    """
    dim = u.shape[1]
    nt = dim - 1
    B = [tangent_basis(u[i]) for i in range(3)]
    DB = [surface.tangent_map(u[i]) @ B[i] for i in range(3)]
    JB = [j_apply(B[i].T).T for i in range(3)]
    J = np.zeros((3 * dim, 3 * nt + 3))
    for i in range(3):
        rows = slice(i * dim, (i + 1) * dim)
        ip = (i + 1) % 3
        J[rows, i * nt:(i + 1) * nt] = DB[i] + a[i] * JB[i]
        J[rows, ip * nt:(ip + 1) * nt] = -DB[ip] + a[ip] * JB[ip]
        J[rows, 3 * nt + i] = ju[i]
        J[rows, 3 * nt + ip] = ju[ip]
    return J


def _criticality_jacobian_fd(surface, u, step=1e-7):
    """Finite-difference Jacobian of the multiplier-free residual (odd n > 3)."""
    n, dim = u.shape
    nt = dim - 1
    B = [tangent_basis(u[i]) for i in range(n)]
    res0 = closure_residual(surface, TangencyTuple(u))
    J = np.zeros((res0.size, n * nt))
    for i in range(n):
        for j in range(nt):
            up = u.copy()
            up[i] = normalize(u[i] + step * B[i][:, j])
            um = u.copy()
            um[i] = normalize(u[i] - step * B[i][:, j])
            rp = closure_residual(surface, TangencyTuple(up))
            rm = closure_residual(surface, TangencyTuple(um))
            J[:, i * nt + j] = (rp - rm) / (2.0 * step)
    return J


def _multipliers_from_vertices(vertices, ju):
    """Chord half-lengths along the characteristic directions."""
    n = vertices.shape[0]
    return np.array([
        0.5 * float((vertices[(k + 1) % n] - vertices[k]) @ ju[k]) for k in range(n)
    ])


def _build_solution(surface, u, a, residual, sigma_min, isolated):
    q = np.array([surface.point(ui) for ui in u])
    ju = j_apply(u)
    if a is None:
        vertices = vertices_from_points(q)
        a = _multipliers_from_vertices(vertices, ju)
    else:
        vertices = np.array([q[i] - a[i] * ju[i] for i in range(u.shape[0])])
    return OrbitSolution(
        tuple=TangencyTuple(u, a),
        points=q,
        vertices=vertices,
        area_value=symplectic_area(q),
        residual=residual,
        is_isolated=isolated,
        min_singular_value=sigma_min,
    )


def min_area_threshold(surface: SupportSurface) -> float:
    """Orbits with |F| at or below this are rejected as spurious zero-area tuples."""
    return AREA_THRESHOLD_FACTOR * surface.diameter() ** 2


def newton_polish(surface: SupportSurface, seed: TangencyTuple, tol: float = 1e-10,
                  max_iter: int = 50, dedup_tol: float = DEDUP_TOL) -> PolishResult:
    """Damped Newton iteration from a seed tuple to a periodic orbit.

    Converged solutions are rejected if consecutive tangency points collapse
    (a backtracking tuple, not an orbit) or if the symplectic area is below
    the zero-area threshold.  The isolation flag is the smallest singular
    value of the final Jacobian measured against a fixed threshold.
    """
    u = np.array([normalize(ui) for ui in seed.normals])
    n = u.shape[0]

    def backtracks(points):
        return any(np.linalg.norm(points[i] - points[(i + 1) % n]) <= dedup_tol
                   for i in range(n))

    if backtracks(np.array([surface.point(ui) for ui in u])):
        return PolishResult("backtracking", None, np.inf, 0)

    if n == 3:
        a = (np.asarray(seed.multipliers, dtype=float).copy()
             if seed.multipliers is not None else np.full(3, SQRT3))
        res, q, ju = _closure_state(surface, u, a)
        nr = float(np.linalg.norm(res))
        iters = 0
        for _ in range(max_iter):
            if nr < tol:
                break
            J = _closure_jacobian(surface, u, a, ju)
            step, *_ = np.linalg.lstsq(J, -res, rcond=None)
            nt = u.shape[1] - 1
            improved = False
            alpha = 1.0
            for _ in range(20):
                u_try = np.array([
                    normalize(u[i] + alpha * tangent_basis(u[i]) @ step[i * nt:(i + 1) * nt])
                    for i in range(3)
                ])
                a_try = a + alpha * step[3 * nt:]
                res_try, q_try, ju_try = _closure_state(surface, u_try, a_try)
                nr_try = float(np.linalg.norm(res_try))
                if nr_try < nr:
                    u, a, res, q, ju, nr = u_try, a_try, res_try, q_try, ju_try, nr_try
                    improved = True
                    break
                alpha *= 0.5
            iters += 1
            if not improved:
                break
        if nr >= tol:
            return PolishResult("no_convergence", None, nr, iters)
        # a couple of full polish steps toward the numerical floor
        for _ in range(3):
            J = _closure_jacobian(surface, u, a, ju)
            step, *_ = np.linalg.lstsq(J, -res, rcond=None)
            nt = u.shape[1] - 1
            u_try = np.array([
                normalize(u[i] + tangent_basis(u[i]) @ step[i * nt:(i + 1) * nt])
                for i in range(3)
            ])
            a_try = a + step[3 * nt:]
            res_try, q_try, ju_try = _closure_state(surface, u_try, a_try)
            nr_try = float(np.linalg.norm(res_try))
            iters += 1
            if nr_try < nr:
                u, a, res, q, ju, nr = u_try, a_try, res_try, q_try, ju_try, nr_try
            else:
                break
        J = _closure_jacobian(surface, u, a, ju)
        sigma_min = float(np.linalg.svd(J, compute_uv=False)[-1])
    else:
        a = None
        tup = TangencyTuple(u)
        res = closure_residual(surface, tup)
        nr = float(np.linalg.norm(res))
        iters = 0
        nt = u.shape[1] - 1
        for _ in range(max_iter):
            if nr < tol:
                break
            J = _criticality_jacobian_fd(surface, u)
            step, *_ = np.linalg.lstsq(J, -res, rcond=None)
            improved = False
            alpha = 1.0
            for _ in range(20):
                u_try = np.array([
                    normalize(u[i] + alpha * tangent_basis(u[i]) @ step[i * nt:(i + 1) * nt])
                    for i in range(n)
                ])
                res_try = closure_residual(surface, TangencyTuple(u_try))
                nr_try = float(np.linalg.norm(res_try))
                if nr_try < nr:
                    u, res, nr = u_try, res_try, nr_try
                    improved = True
                    break
                alpha *= 0.5
            iters += 1
            if not improved:
                break
        if nr >= tol:
            return PolishResult("no_convergence", None, nr, iters)
        J = _criticality_jacobian_fd(surface, u)
        sigma_min = float(np.linalg.svd(J, compute_uv=False)[-1])

    q = np.array([surface.point(ui) for ui in u])
    if backtracks(q):
        return PolishResult("backtracking", None, nr, iters)
    isolated = sigma_min > ISOLATION_TOL
    orbit = _build_solution(surface, u, a, nr, sigma_min, isolated)
    if abs(orbit.area_value) <= min_area_threshold(surface):
        return PolishResult("zero_area", None, nr, iters)
    return PolishResult("converged", orbit, nr, iters)


# ---------------------------------------------------------------------------
# multistart search
# ---------------------------------------------------------------------------

def _match_family(families, orbit, rel_tol=1e-6):
    key = abs(orbit.area_value)
    for fam in families:
        ref = abs(fam.representative.area_value)
        if abs(key - ref) <= max(1e-9, rel_tol * max(ref, 1.0)):
            return fam
    return None


def multistart_search(surface: SupportSurface, n_starts: int = 2000,
                      rng_seed: int = DEFAULT_RNG_SEED, extra_seeds=(),
                      dedup_tol: float = DEDUP_TOL, tol: float = 1e-10,
                      max_iter: int = 50) -> OrbitSet:
    """Randomized search for 3-periodic orbits with deterministic seeding.

    Seeds are cube-root-of-unity triples (u, L u, L^2 u) with multipliers
    sqrt(3) for uniformly random unit u, plus any caller-provided seeds
    (tried first).  Converged solutions are canonicalized and deduplicated
    modulo the dihedral relabelings; non-isolated solutions (continuous
    families, e.g. every orbit of a round sphere) are collapsed into flagged
    family records and are not counted as distinct orbits.
    """
    rng = np.random.default_rng(rng_seed)
    seeds = list(extra_seeds)
    for _ in range(int(n_starts)):
        v = random_unit(rng, surface.dim)
        seeds.append(TangencyTuple(
            np.array([v, cube_root_rotate(v, 1), cube_root_rotate(v, 2)]),
            np.full(3, SQRT3)))

    orbits: list[OrbitSolution] = []
    families: list[FamilyRecord] = []
    meta = {"starts_attempted": len(seeds), "converged": 0,
            "rejected_backtracking": 0, "rejected_zero_area": 0,
            "rejected_duplicates": 0, "no_convergence": 0,
            "family_members": 0}
    for seed in seeds:
        result = newton_polish(surface, seed, tol=tol, max_iter=max_iter,
                               dedup_tol=dedup_tol)
        if result.status == "backtracking":
            meta["rejected_backtracking"] += 1
            continue
        if result.status == "zero_area":
            meta["rejected_zero_area"] += 1
            continue
        if result.status != "converged":
            meta["no_convergence"] += 1
            continue
        meta["converged"] += 1
        orbit = canonicalize(result.orbit)
        if not orbit.is_isolated:
            meta["family_members"] += 1
            fam = _match_family(families, orbit)
            if fam is None:
                families.append(FamilyRecord(representative=orbit, members_found=1))
            else:
                fam.members_found += 1
            continue
        if any(dihedral_vertex_distance(orbit.vertices, known.vertices) <= dedup_tol
               for known in orbits):
            meta["rejected_duplicates"] += 1
            continue
        orbits.append(orbit)
    return OrbitSet(orbits=orbits, families=families, dedup_tolerance=dedup_tol,
                    metadata=meta)


# ---------------------------------------------------------------------------
# orbit verification
# ---------------------------------------------------------------------------

def criticality_check(surface: SupportSurface, orbit: OrbitSolution) -> float:
    """Norm of the tangential gradient of F at the orbit's normals (0 at orbits)."""
    return float(np.linalg.norm(area_gradient(surface, orbit.tuple)))


def roundtrip_defect(surface: SupportSurface, orbit: OrbitSolution,
                     tol: float = 1e-13) -> float:
    """max_i |T(z_i) - z_{i+1}| for the forward map along the stored orientation.

    Orbits stored with negative multipliers are walked in reverse (their
    canonical form traverses the orbit against the map direction).
    """
    z = orbit.vertices
    n = z.shape[0]
    a = orbit.tuple.multipliers
    forward_order = a is None or float(np.mean(a)) >= 0.0
    worst = 0.0
    for i in range(n):
        j = (i + 1) % n if forward_order else (i - 1) % n
        normal = orbit.tuple.normals[i] if forward_order else orbit.tuple.normals[j]
        res = dual_map(surface, z[i], "forward", tol=tol, initial_normal=normal)
        worst = max(worst, float(np.linalg.norm(res.image - z[j])))
    return worst
