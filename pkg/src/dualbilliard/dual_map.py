"""The dual (outer) billiard map about a strictly convex hypersurface.

Two exterior points z1, z2 are related by the map when their midpoint
q = (z1 + z2)/2 lies on the surface and the chord z2 - z1 runs along the
characteristic direction J u at q, where u is the outward normal.  The
forward image of z solves

    q(u) - z = s * J u,   s > 0,      T(z) = 2 q(u) - z,

for a unit normal u; the backward image takes s < 0.  The solver runs a
damped Newton iteration on the sphere for the component of q(u) - z
orthogonal to J u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surface import SupportSurface
from .symplectic import as_ambient, j_apply, normalize, omega_matrix, random_unit, tangent_basis

EXTERIOR_MARGIN = 1e-10
_SEED_SWEEP_RANDOM = 16    # random directions in the coarse seed sweep
_SWEEP_RNG_SEED = 52391    # fixed; the sweep must be deterministic per call


class NotExteriorError(ValueError):
    """The base point does not lie strictly outside the surface."""


class MapConvergenceError(RuntimeError):
    """The tangency solver failed to converge from every seed."""


@dataclass
class MapResult:
    """One application of the dual billiard map."""

    image: np.ndarray
    tangency_normal: np.ndarray
    multiplier: float
    residual: float
    iterations: int


def support_gap(surface: SupportSurface, z, restarts: int = 8,
                max_iter: int = 300) -> tuple[float, np.ndarray]:
    """Maximum of u . z - h(u) over unit u, and the maximizing direction.

    Positive gap means z is strictly outside the surface.  Maximized by
    projected-gradient ascent from z/|z| with random restarts; the ascent
    direction is the tangential part of z - q(u).
    """
    z = as_ambient(z)
    if z.shape != (surface.dim,):
        raise ValueError(f"point must have length {surface.dim}")
    starts = []
    nz = np.linalg.norm(z)
    if nz > 1e-14:
        starts.append(z / nz)
    rng = np.random.default_rng(_SWEEP_RNG_SEED)
    starts.extend(random_unit(rng, surface.dim) for _ in range(restarts))

    best_phi, best_u = -np.inf, starts[0]
    scale = 1.0 + nz
    for u0 in starts:
        u = u0
        phi = float(z @ u - surface.support(u))
        step = 0.5 / scale
        for _ in range(max_iter):
            g = z - surface.point(u)
            gt = g - (g @ u) * u
            gn = np.linalg.norm(gt)
            if gn < 1e-13 * scale:
                break
            moved = False
            for _ in range(40):
                u_try = normalize(u + step * gt)
                phi_try = float(z @ u_try - surface.support(u_try))
                if phi_try > phi:
                    u, phi = u_try, phi_try
                    step *= 1.5
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
        if phi > best_phi:
            best_phi, best_u = phi, u
    return best_phi, best_u


def is_exterior(surface: SupportSurface, z, margin: float = EXTERIOR_MARGIN) -> bool:
    """True iff some supporting hyperplane separates z from the surface."""
    z = as_ambient(z)
    if z.shape != (surface.dim,):
        raise ValueError(f"point must have length {surface.dim}")
    nz = np.linalg.norm(z)
    if nz > 1e-14:
        # cheap sufficient check at the radial direction
        u = z / nz
        if float(z @ u - surface.support(u)) > margin:
            return True
    gap, _ = support_gap(surface, z)
    return gap > margin


def _tangency_residual(surface, z, u):
    """Component of q(u) - z orthogonal to the normalized chord direction."""
    q = surface.point(u)
    ju = j_apply(u)
    ju = ju / np.linalg.norm(ju)
    d = q - z
    t = float(d @ ju)
    return d - t * ju, t, q, ju


def _seed_candidates(surface, z, sign):
    """Coarse sweep of directions scored by residual size and multiplier sign."""
    dim = surface.dim
    cands = []
    nz = np.linalg.norm(z)
    if nz > 1e-14:
        # exact tangency normal for a round sphere of comparable size
        R = surface.support(z / nz)
        if nz > R:
            t0 = np.sqrt(nz ** 2 - R ** 2)
            cands.append(normalize(R * z + sign * t0 * j_apply(z)))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        cands.append(e)
        cands.append(-e)
    rng = np.random.default_rng(_SWEEP_RNG_SEED)
    cands.extend(random_unit(rng, dim) for _ in range(_SEED_SWEEP_RANDOM))

    scored = []
    for u in cands:
        r, t, _, _ = _tangency_residual(surface, z, u)
        score = float(np.linalg.norm(r))
        if sign * t <= 0.0:
            score += 1e6  # wrong branch; keep as a last resort only
        scored.append((score, u))
    scored.sort(key=lambda p: p[0])
    return [u for _, u in scored]


def _newton_tangency(surface, z, u0, sign, tol, max_iter):
    """Damped Newton for the tangency normal; returns (u, residual, iters, t)."""
    u = normalize(u0)
    r, t, q, ju = _tangency_residual(surface, z, u)
    nr = float(np.linalg.norm(r))
    iters = 0
    for _ in range(max_iter):
        if nr < tol:
            break
        B = tangent_basis(u)
        D = surface.tangent_map(u)
        DB = D @ B
        JB = j_apply(B.T).T
        d = q - z
        # d/du of (q - z) - ((q - z) . ju) ju along tangent directions
        coeff = ju @ DB + d @ JB
        Jac = DB - np.outer(ju, coeff) - t * JB
        step, *_ = np.linalg.lstsq(Jac, -r, rcond=None)
        alpha = 1.0
        improved = False
        for _ in range(20):
            u_try = normalize(u + alpha * (B @ step))
            r_try, t_try, q_try, ju_try = _tangency_residual(surface, z, u_try)
            nr_try = float(np.linalg.norm(r_try))
            if nr_try < nr:
                u, r, t, q, ju, nr = u_try, r_try, t_try, q_try, ju_try, nr_try
                improved = True
                break
            alpha *= 0.5
        iters += 1
        if not improved:
            break
    # polish to the numerical floor; helps finite-difference consumers
    if nr < tol:
        for _ in range(3):
            B = tangent_basis(u)
            D = surface.tangent_map(u)
            DB = D @ B
            JB = j_apply(B.T).T
            d = q - z
            coeff = ju @ DB + d @ JB
            Jac = DB - np.outer(ju, coeff) - t * JB
            step, *_ = np.linalg.lstsq(Jac, -r, rcond=None)
            u_try = normalize(u + B @ step)
            r_try, t_try, q_try, ju_try = _tangency_residual(surface, z, u_try)
            nr_try = float(np.linalg.norm(r_try))
            iters += 1
            if nr_try < nr:
                u, r, t, q, ju, nr = u_try, r_try, t_try, q_try, ju_try, nr_try
            else:
                break
    return u, nr, iters, t, q


def dual_map(surface: SupportSurface, z, direction: str = "forward",
             tol: float = 1e-12, max_iter: int = 50,
             initial_normal=None) -> MapResult:
    """Apply the dual billiard map to the exterior point z.

    Parameters
    ----------
    direction : "forward" or "backward" (positive or negative multiplier).
    tol : convergence threshold on the off-chord residual.
    initial_normal : optional seed normal tried before the coarse sweep.

    Raises NotExteriorError for points not strictly outside the surface and
    MapConvergenceError if no seed converges to the requested branch.
    """
    z = as_ambient(z)
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    sign = 1.0 if direction == "forward" else -1.0
    if not is_exterior(surface, z):
        raise NotExteriorError(f"point {z.tolist()} is not strictly outside the surface")

    def seed_iter():
        if initial_normal is not None:
            yield normalize(as_ambient(initial_normal))
        yield from _seed_candidates(surface, z, sign)

    best_residual = np.inf
    total_iters = 0
    for u0 in seed_iter():
        u, nr, iters, t, q = _newton_tangency(surface, z, u0, sign, tol, max_iter)
        total_iters += iters
        best_residual = min(best_residual, nr)
        if nr < tol and sign * t > 0.0:
            return MapResult(image=2.0 * q - z, tangency_normal=u, multiplier=t,
                             residual=nr, iterations=total_iters)
    raise MapConvergenceError(
        f"tangency solver failed for point {z.tolist()} ({direction}); "
        f"best residual {best_residual:.3e}")


def inverse_consistency(surface: SupportSurface, z, tol: float = 1e-13) -> float:
    """|T_backward(T_forward(z)) - z| for an exterior point z."""
    fwd = dual_map(surface, z, "forward", tol=tol)
    back = dual_map(surface, fwd.image, "backward", tol=tol,
                    initial_normal=fwd.tangency_normal)
    return float(np.linalg.norm(back.image - np.asarray(z, dtype=float)))


def symplecticity_defect(surface: SupportSurface, z, step: float = 1e-5,
                         tol: float = 5e-14) -> float:
    """Max-norm of D^T W D - W for the central-difference Jacobian D of the map.

    The point must clear the surface by at least ten finite-difference steps
    so that every probe stays exterior.
    """
    z = as_ambient(z)
    gap, _ = support_gap(surface, z)
    if gap <= 10.0 * step:
        raise NotExteriorError(
            f"point {z.tolist()} too close to the surface for step {step:g} "
            f"(clearance {gap:.3e})")
    base = dual_map(surface, z, "forward", tol=tol)
    dim = surface.dim
    D = np.zeros((dim, dim))
    for k in range(dim):
        dz = np.zeros(dim)
        dz[k] = step
        plus = dual_map(surface, z + dz, "forward", tol=tol,
                        initial_normal=base.tangency_normal)
        minus = dual_map(surface, z - dz, "forward", tol=tol,
                         initial_normal=base.tangency_normal)
        D[:, k] = (plus.image - minus.image) / (2.0 * step)
    W = omega_matrix(surface.m)
    return float(np.max(np.abs(D.T @ W @ D - W)))
