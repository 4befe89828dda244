"""Strictly convex closed hypersurfaces given by their support function.

A surface M in R^{2m} is represented through the restriction h of its support
function to the unit sphere.  The boundary point with outward unit normal u is

    q(u) = h(u) u + grad_S h(u),

where grad_S h is the gradient of h along the sphere.  Internally the built-in
kinds store the 1-homogeneous extension H of h, for which q(u) = grad H(u) and
the tangent map of u -> q(u) is the ambient Hessian of H (its kernel is the
radial line, so no projection is needed).

Built-in kinds:
  * sphere(m, radius)
  * ellipsoid(semi_axes[, rotation])      H(v) = sqrt(v . D v)
  * perturbed_sphere(a, eps)              h = 1 + eps * f on the sphere, with
        f(p) = sum_i a_i (x_i^2 + y_i^2)/2 + eps * sum_i (x_i^3 - 3 x_i y_i^2)/3

The cubic part of f is invariant under the cube-root-of-unity rotation, so the
perturbed sphere carries an exact Z_3 symmetry.  Construction runs a convexity
certificate over a sample of directions and rejects surfaces that fail it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .symplectic import as_ambient, j_apply, normalize, tangent_basis

# Defaults shared across the package.
CERT_SAMPLES = 1024          # convexity certificate sample size (>= 1000)
CERT_MIN_CURVATURE = 1e-8    # tangential Hessian eigenvalue threshold
FD_STEP = 1e-5               # central-difference step for custom surfaces
UNIT_TOL = 1e-12             # |u| - 1 tolerance for normal-direction inputs
_CERT_QMC_SEED = 170039      # fixed seed so certificates are deterministic


class SurfaceError(ValueError):
    """Invalid surface parameters or specification."""


class ConvexityError(SurfaceError):
    """The convexity certificate failed at some direction."""


# ---------------------------------------------------------------------------
# perturbation profile of the perturbed sphere
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationParams:
    """Coefficients (a_1..a_m, eps) of the cubic-perturbed sphere."""

    a: tuple[float, ...]
    eps: float

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "eps", float(self.eps))
        if len(a) < 1:
            raise SurfaceError("need at least one coefficient a_i")
        if len(set(a)) != len(a):
            raise SurfaceError(f"coefficients a must be pairwise distinct, got {a}")
        if not all(math.isfinite(v) for v in a) or not math.isfinite(self.eps):
            raise SurfaceError("non-finite perturbation parameters")
        if self.eps <= 0.0:
            raise SurfaceError(f"eps must be positive, got {self.eps}")
        delta = separation_bound(a)
        if not self.eps ** 2 < delta:
            raise SurfaceError(
                f"eps^2 = {self.eps ** 2:g} must be smaller than the separation bound {delta:g}"
            )

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def separation(self) -> float:
        return separation_bound(self.a)


def separation_bound(a) -> float:
    """Smallest value of sum_{i in I} (eta - a_i)^2 over eta and index sets |I| >= 2.

    Adding an index to I can only increase the inner sum, so the minimum is
    attained on a pair, where the best eta is the midpoint:
    min_{i<j} (a_i - a_j)^2 / 2.  For m = 1 there is no admissible I and the
    bound is +inf.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise SurfaceError("a must be a non-empty 1-d sequence")
    if len(set(a.tolist())) != a.size:
        raise SurfaceError(f"coefficients a must be pairwise distinct, got {a.tolist()}")
    if a.size < 2:
        return math.inf
    diff = np.subtract.outer(a, a)
    off = diff[~np.eye(a.size, dtype=bool)]
    return float(np.min(off ** 2) / 2.0)


def _split(p, m):
    return p[..., :m], p[..., m:]


def perturbation_value(p, params: PerturbationParams) -> float:
    """f(p) = sum a_i (x_i^2 + y_i^2)/2 + eps sum (x_i^3 - 3 x_i y_i^2)/3."""
    p = as_ambient(p)
    a = np.asarray(params.a)
    x, y = _split(p, params.m)
    quad = 0.5 * np.sum(a * (x * x + y * y), axis=-1)
    cub = np.sum(x ** 3 - 3.0 * x * y * y, axis=-1) / 3.0
    val = quad + params.eps * cub
    return float(val) if np.ndim(val) == 0 else val


def perturbation_gradient(p, params: PerturbationParams) -> np.ndarray:
    """Ambient gradient of the perturbation profile f."""
    p = as_ambient(p)
    a = np.asarray(params.a)
    x, y = _split(p, params.m)
    gx = a * x + params.eps * (x * x - y * y)
    gy = a * y - 2.0 * params.eps * x * y
    return np.concatenate([gx, gy], axis=-1)


def perturbation_hessian(p, params: PerturbationParams) -> np.ndarray:
    """Ambient Hessian of f; block diagonal over the (x_i, y_i) pairs."""
    p = as_ambient(p)
    a = np.asarray(params.a)
    m = params.m
    x, y = p[:m], p[m:]
    H = np.zeros((2 * m, 2 * m))
    dxx = a + 2.0 * params.eps * x
    dyy = a - 2.0 * params.eps * x
    dxy = -2.0 * params.eps * y
    idx = np.arange(m)
    H[idx, idx] = dxx
    H[m + idx, m + idx] = dyy
    H[idx, m + idx] = dxy
    H[m + idx, idx] = dxy
    return H


# quadratic part alone; this is the order-zero piece of f in eps and the
# coefficient that drives the first-order seed construction
def quadratic_part_value(p, a) -> float:
    p = as_ambient(p)
    a = np.asarray(a, dtype=float)
    x, y = _split(p, a.size)
    val = 0.5 * np.sum(a * (x * x + y * y), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def quadratic_part_gradient(p, a) -> np.ndarray:
    p = as_ambient(p)
    a = np.asarray(a, dtype=float)
    x, y = _split(p, a.size)
    return np.concatenate([a * x, a * y], axis=-1)


# ---------------------------------------------------------------------------
# the surface class
# ---------------------------------------------------------------------------

class SupportSurface:
    """A strictly convex closed hypersurface in R^{2m} in the support chart.

    Parameters
    ----------
    m : half-dimension of the ambient space.
    kind : tag, one of "sphere", "ellipsoid", "perturbed_sphere", "custom".
    h_unit : callable giving the support value at a unit direction.
    grad_homog, hess_homog : optional gradient/Hessian of the 1-homogeneous
        extension H.  When present, q(u) = grad_homog(u) and the tangent map
        is hess_homog(u); otherwise central differences of step ``fd_step``
        are used.
    grad_unit : optional tangential gradient of h at unit u (used only when
        grad_homog is absent).
    """

    def __init__(self, m, kind, h_unit, *, grad_homog=None, hess_homog=None,
                 grad_unit=None, params=None, fd_step=FD_STEP, certify=True):
        if m < 1:
            raise SurfaceError(f"m must be >= 1, got {m}")
        self.m = int(m)
        self.dim = 2 * self.m
        self.kind = str(kind)
        self.params = dict(params) if params else {}
        self._h_unit = h_unit
        self._grad_homog = grad_homog
        self._hess_homog = hess_homog
        self._grad_unit = grad_unit
        self._fd_step = float(fd_step)
        self._diameter = None
        if certify:
            self.certify_convexity()

    # -- direction handling -------------------------------------------------

    def _check_unit(self, u) -> np.ndarray:
        u = as_ambient(u)
        if u.ndim != 1 or u.shape[0] != self.dim:
            raise SurfaceError(f"direction must have length {self.dim}, got shape {u.shape}")
        if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
            raise SurfaceError(f"direction must be a unit vector, |u| = {np.linalg.norm(u)!r}")
        return u

    # -- core evaluations ----------------------------------------------------

    def support(self, u) -> float:
        """Support value h(u) for unit u."""
        u = self._check_unit(u)
        return float(self._h_unit(u))

    def support_grad(self, u) -> np.ndarray:
        """Tangential gradient of h at unit u (a vector orthogonal to u)."""
        u = self._check_unit(u)
        if self._grad_homog is not None:
            g = self._grad_homog(u)
            return g - (g @ u) * u
        if self._grad_unit is not None:
            return np.asarray(self._grad_unit(u), dtype=float)
        return self._fd_support_grad(u)

    def point(self, u) -> np.ndarray:
        """Boundary point q(u) = h(u) u + grad_S h(u) with outward normal u."""
        u = self._check_unit(u)
        if self._grad_homog is not None:
            return np.asarray(self._grad_homog(u), dtype=float)
        h = float(self._h_unit(u))
        g = (np.asarray(self._grad_unit(u), dtype=float)
             if self._grad_unit is not None else self._fd_support_grad(u))
        return h * u + g

    def tangent_map(self, u) -> np.ndarray:
        """Ambient matrix of the differential of u -> q(u); kernel is span(u)."""
        u = self._check_unit(u)
        if self._hess_homog is not None:
            return np.asarray(self._hess_homog(u), dtype=float)
        return self._fd_tangent_map(u)

    # -- finite-difference fallbacks ------------------------------------------

    def _fd_support_grad(self, u):
        B = tangent_basis(u)
        step = self._fd_step
        coeff = np.empty(B.shape[1])
        for j in range(B.shape[1]):
            up = normalize(u + step * B[:, j])
            um = normalize(u - step * B[:, j])
            coeff[j] = (float(self._h_unit(up)) - float(self._h_unit(um))) / (2.0 * step)
        return B @ coeff

    def _fd_tangent_map(self, u):
        B = tangent_basis(u)
        step = self._fd_step
        D = np.zeros((self.dim, self.dim))
        for j in range(B.shape[1]):
            up = normalize(u + step * B[:, j])
            um = normalize(u - step * B[:, j])
            col = (self.point(up) - self.point(um)) / (2.0 * step)
            D += np.outer(col, B[:, j])
        return D

    # -- derived quantities ---------------------------------------------------

    def diameter(self) -> float:
        """Estimated diameter: the largest sampled width h(u) + h(-u)."""
        if self._diameter is None:
            dirs = _certificate_directions(self.dim)[:256]
            widths = [float(self._h_unit(u)) + float(self._h_unit(-u)) for u in dirs]
            self._diameter = max(widths)
        return self._diameter

    def translated(self, t) -> "SupportSurface":
        """The surface shifted by the vector t (support gains the term u . t)."""
        t = as_ambient(t)
        if t.shape != (self.dim,):
            raise SurfaceError(f"translation must have length {self.dim}")
        h0 = self._h_unit
        g0h = self._grad_homog
        H0h = self._hess_homog
        g0u = self._grad_unit
        h_unit = lambda u: float(h0(u)) + float(u @ t)
        grad_homog = None if g0h is None else (lambda v: np.asarray(g0h(v), dtype=float) + t)
        grad_unit = None
        if g0h is None and g0u is not None:
            grad_unit = lambda u: np.asarray(g0u(u), dtype=float) + t - (u @ t) * u
        params = dict(self.params)
        params["offset"] = params.get("offset", np.zeros(self.dim)) + t
        return SupportSurface(self.m, self.kind, h_unit, grad_homog=grad_homog,
                              hess_homog=H0h, grad_unit=grad_unit, params=params,
                              fd_step=self._fd_step)

    # -- convexity certificate --------------------------------------------------

    def certify_convexity(self, n_samples=CERT_SAMPLES, min_curvature=CERT_MIN_CURVATURE):
        """Check h > 0 and positive-definiteness of the tangential Hessian.

        Strict convexity of the body is equivalent to the homogeneous support
        Hessian being positive definite on every tangent space; the smallest
        eigenvalue of the symmetrized restriction must exceed the threshold
        (a plain rank test would miss indefinite, saddle-shaped failures).
        Raises ConvexityError naming the first offending direction.
        """
        for u in _certificate_directions(self.dim, n_samples):
            h = float(self._h_unit(u))
            if not (h > 0.0 and math.isfinite(h)):
                raise ConvexityError(
                    f"support function not positive at direction {u.tolist()}: h = {h!r}")
            B = tangent_basis(u)
            Ht = B.T @ self.tangent_map(u) @ B
            lam = float(np.linalg.eigvalsh(0.5 * (Ht + Ht.T))[0])
            if lam <= min_curvature:
                raise ConvexityError(
                    f"tangential Hessian not positive definite at direction "
                    f"{u.tolist()}: smallest eigenvalue {lam:.3e}")

    def __repr__(self):
        return f"SupportSurface(kind={self.kind!r}, m={self.m})"


def _certificate_directions(dim: int, n_samples: int = CERT_SAMPLES) -> np.ndarray:
    """Deterministic quasi-random unit directions plus all +-basis vectors."""
    sob = qmc.Sobol(d=dim, scramble=True, seed=_CERT_QMC_SEED)
    pts = sob.random(max(int(n_samples), 2))
    pts = np.clip(pts, 1e-12, 1.0 - 1e-12)
    g = ndtri(pts)
    norms = np.linalg.norm(g, axis=1)
    norms[norms < 1e-12] = 1.0
    dirs = g / norms[:, None]
    basis = np.concatenate([np.eye(dim), -np.eye(dim)], axis=0)
    return np.concatenate([basis, dirs], axis=0)


def characteristic_direction(u) -> np.ndarray:
    """Direction of the characteristic line at the point with unit normal u.

    The kernel of the symplectic form restricted to the tangent hyperplane
    u-perp is spanned by J u.
    """
    u = as_ambient(u)
    if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise SurfaceError(f"direction must be a unit vector, |u| = {np.linalg.norm(u)!r}")
    return j_apply(u)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def make_sphere(m: int, radius: float = 1.0) -> SupportSurface:
    radius = float(radius)
    if not (radius > 0.0 and math.isfinite(radius)):
        raise SurfaceError(f"radius must be positive, got {radius!r}")
    if m < 1:
        raise SurfaceError(f"m must be >= 1, got {m}")
    dim = 2 * int(m)

    def h_unit(u):
        return radius * np.linalg.norm(u)

    def grad_homog(v):
        return radius * v / np.linalg.norm(v)

    def hess_homog(v):
        r = np.linalg.norm(v)
        n = v / r
        return (radius / r) * (np.eye(dim) - np.outer(n, n))

    return SupportSurface(m, "sphere", h_unit, grad_homog=grad_homog,
                          hess_homog=hess_homog, params={"radius": radius})


def make_ellipsoid(semi_axes, rotation=None) -> SupportSurface:
    """Ellipsoid with the given semi-axes per ambient coordinate.

    With ``rotation`` (an orthogonal matrix R) the principal axes are rotated:
    the body is R . diag(semi_axes) . (unit ball).  The support function is
    H(v) = sqrt(v . D v) with D = R diag(b^2) R^T.
    """
    b = np.asarray(semi_axes, dtype=float)
    if b.ndim != 1 or b.size % 2 != 0 or b.size < 2:
        raise SurfaceError(f"semi_axes must have even length >= 2, got {b.tolist()}")
    if not np.all(b > 0.0) or not np.all(np.isfinite(b)):
        raise SurfaceError(f"semi_axes must be positive, got {b.tolist()}")
    m = b.size // 2
    D = np.diag(b * b)
    if rotation is not None:
        R = np.asarray(rotation, dtype=float)
        if R.shape != (b.size, b.size):
            raise SurfaceError(f"rotation must be {b.size}x{b.size}")
        if np.max(np.abs(R.T @ R - np.eye(b.size))) > 1e-10:
            raise SurfaceError("rotation must be orthogonal")
        D = R @ D @ R.T

    def h_unit(u):
        return math.sqrt(float(u @ D @ u))

    def grad_homog(v):
        return D @ v / math.sqrt(float(v @ D @ v))

    def hess_homog(v):
        H = math.sqrt(float(v @ D @ v))
        Dv = D @ v
        return D / H - np.outer(Dv, Dv) / H ** 3

    params = {"semi_axes": tuple(b.tolist())}
    if rotation is not None:
        params["rotation"] = np.asarray(rotation, dtype=float)
    return SupportSurface(m, "ellipsoid", h_unit, grad_homog=grad_homog,
                          hess_homog=hess_homog, params=params)


def default_eps(a) -> float:
    """Default perturbation strength: min(0.05, 0.5 * sqrt(separation bound))."""
    delta = separation_bound(a)
    return min(0.05, 0.5 * math.sqrt(delta)) if math.isfinite(delta) else 0.05


def make_perturbed_sphere(a, eps: float | None = None) -> SupportSurface:
    """Unit sphere with support h = 1 + eps * f; carries an exact Z_3 symmetry.

    The profile f splits into a quadratic part f0 and eps times a cubic part
    f1, so the homogeneous support extension is
    H(v) = r + eps f0(v)/r + eps^2 f1(v)/r^2 with r = |v|.
    """
    if isinstance(a, PerturbationParams):
        params = a
    else:
        params = PerturbationParams(tuple(a), default_eps(a) if eps is None else eps)
    m = params.m
    dim = 2 * m
    avec = np.asarray(params.a)
    eps = params.eps

    def f0(v):
        x, y = v[:m], v[m:]
        return 0.5 * float(np.sum(avec * (x * x + y * y)))

    def f0_grad(v):
        x, y = v[:m], v[m:]
        return np.concatenate([avec * x, avec * y])

    f0_hess = np.diag(np.concatenate([avec, avec]))

    def f1(v):
        x, y = v[:m], v[m:]
        return float(np.sum(x ** 3 - 3.0 * x * y * y)) / 3.0

    def f1_grad(v):
        x, y = v[:m], v[m:]
        return np.concatenate([x * x - y * y, -2.0 * x * y])

    def f1_hess(v):
        x, y = v[:m], v[m:]
        H = np.zeros((dim, dim))
        idx = np.arange(m)
        H[idx, idx] = 2.0 * x
        H[m + idx, m + idx] = -2.0 * x
        H[idx, m + idx] = -2.0 * y
        H[m + idx, idx] = -2.0 * y
        return H

    def h_unit(u):
        r = np.linalg.norm(u)
        return r + eps * f0(u) / r + eps ** 2 * f1(u) / r ** 2

    def grad_homog(v):
        r = np.linalg.norm(v)
        n = v / r
        gA = f0_grad(v) / r - f0(v) * n / r ** 2
        gB = f1_grad(v) / r ** 2 - 2.0 * f1(v) * n / r ** 3
        return n + eps * gA + eps ** 2 * gB

    def hess_homog(v):
        r = np.linalg.norm(v)
        n = v / r
        eye = np.eye(dim)
        nn = np.outer(n, n)
        g0, g1 = f0_grad(v), f1_grad(v)
        HA = (f0_hess / r - (np.outer(g0, n) + np.outer(n, g0)) / r ** 2
              - f0(v) * (eye - 3.0 * nn) / r ** 3)
        HB = (f1_hess(v) / r ** 2 - 2.0 * (np.outer(g1, n) + np.outer(n, g1)) / r ** 3
              - 2.0 * f1(v) * (eye - 4.0 * nn) / r ** 4)
        return (eye - nn) / r + eps * HA + eps ** 2 * HB

    return SupportSurface(m, "perturbed_sphere", h_unit, grad_homog=grad_homog,
                          hess_homog=hess_homog,
                          params={"a": params.a, "eps": eps, "perturbation": params})


def make_custom(m: int, h_unit, grad_unit=None, kind: str = "custom",
                certify: bool = True) -> SupportSurface:
    """Surface from a user support function on the sphere; derivatives by FD."""
    return SupportSurface(m, kind, h_unit, grad_unit=grad_unit, certify=certify)


def make_surface(kind: str, **params) -> SupportSurface:
    """Dispatch constructor used by the file loader."""
    if kind == "sphere":
        return make_sphere(params.pop("m"), params.pop("radius", 1.0), **params)
    if kind == "ellipsoid":
        return make_ellipsoid(params.pop("semi_axes"), **params)
    if kind == "perturbed_sphere":
        return make_perturbed_sphere(params.pop("a"), params.pop("eps", None), **params)
    raise SurfaceError(f"unknown surface kind {kind!r}")


# ---------------------------------------------------------------------------
# plain-text surface specification files
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {"kind", "m", "radius", "semi_axes", "a", "eps"}
_ALLOWED_KEYS = {
    "sphere": {"kind", "m", "radius"},
    "ellipsoid": {"kind", "m", "semi_axes"},
    "perturbed_sphere": {"kind", "m", "a", "eps"},
}


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise SurfaceError(f"key {key!r}: cannot parse {text!r} as a number") from None


def _parse_float_list(key, text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise SurfaceError(f"key {key!r}: empty list")
    return [_parse_float(key, s) for s in items]


def parse_surface_text(text: str) -> SupportSurface:
    """Parse a line-oriented ``key = value`` surface description."""
    entries: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SurfaceError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            raise SurfaceError(f"line {ln}: unknown key {key!r}")
        if key in entries:
            raise SurfaceError(f"line {ln}: duplicate key {key!r}")
        entries[key] = value

    kind = entries.get("kind")
    if kind is None:
        raise SurfaceError("missing required key 'kind'")
    if kind not in _ALLOWED_KEYS:
        raise SurfaceError(f"unknown surface kind {kind!r}")
    extra = set(entries) - _ALLOWED_KEYS[kind]
    if extra:
        raise SurfaceError(f"keys {sorted(extra)} not allowed for kind {kind!r}")

    m_given = None
    if "m" in entries:
        try:
            m_given = int(entries["m"])
        except ValueError:
            raise SurfaceError(f"key 'm': cannot parse {entries['m']!r} as an integer") from None

    if kind == "sphere":
        if m_given is None:
            raise SurfaceError("sphere requires key 'm'")
        radius = _parse_float("radius", entries["radius"]) if "radius" in entries else 1.0
        return make_sphere(m_given, radius)

    if kind == "ellipsoid":
        if "semi_axes" not in entries:
            raise SurfaceError("ellipsoid requires key 'semi_axes'")
        axes = _parse_float_list("semi_axes", entries["semi_axes"])
        if len(axes) % 2 != 0:
            raise SurfaceError(f"semi_axes must have even length 2m, got {len(axes)}")
        if m_given is not None and 2 * m_given != len(axes):
            raise SurfaceError(f"m = {m_given} inconsistent with {len(axes)} semi-axes")
        return make_ellipsoid(axes)

    # perturbed_sphere
    if "a" not in entries:
        raise SurfaceError("perturbed_sphere requires key 'a'")
    a = _parse_float_list("a", entries["a"])
    if m_given is not None and m_given != len(a):
        raise SurfaceError(f"m = {m_given} inconsistent with {len(a)} coefficients")
    eps = _parse_float("eps", entries["eps"]) if "eps" in entries else None
    return make_perturbed_sphere(a, eps)


def load_surface(path) -> SupportSurface:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_surface_text(fh.read())
