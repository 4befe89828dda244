"""Linear symplectic algebra on R^{2m}.

Vectors are stored with coordinates ordered (x_1..x_m, y_1..y_m): the x-block
is u[:m], the y-block u[m:].  The standard form is

    omega(u, v) = sum_i (u_xi * v_yi - u_yi * v_xi),

and J is the linear complex structure fixed by omega(u, v) = (J u) . v, which
in this layout is J(x, y) = (-y, x).  All functions accept stacked arrays
whose last axis is the coordinate axis.
"""

from __future__ import annotations

import math

import numpy as np

SQRT3 = math.sqrt(3.0)


def as_ambient(u) -> np.ndarray:
    """Validate u as a float array with finite entries and even last axis."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[-1] % 2 != 0 or u.shape[-1] < 2:
        raise ValueError(f"ambient vector must have even length >= 2, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("ambient vector has non-finite entries")
    return u


def omega(u, v):
    """Standard symplectic form sum_i dx_i ^ dy_i evaluated on (u, v)."""
    u = as_ambient(u)
    v = as_ambient(v)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    m = u.shape[-1] // 2
    val = np.sum(u[..., :m] * v[..., m:], axis=-1) - np.sum(u[..., m:] * v[..., :m], axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def j_apply(u):
    """Apply the complex structure: J(x, y) = (-y, x), so omega(u, v) = (J u) . v."""
    u = as_ambient(u)
    m = u.shape[-1] // 2
    return np.concatenate([-u[..., m:], u[..., :m]], axis=-1)


def cube_root_rotate(u, k: int):
    """Multiply u by lambda^k where lambda = -1/2 + (sqrt(3)/2) J is a primitive cube root of unity.

    Viewing R^{2m} as C^m through J, this is complex multiplication by
    exp(2 pi i k / 3).  It preserves norms and the symplectic form.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k must be one of 0, 1, 2, got {k!r}")
    u = as_ambient(u)
    if k == 0:
        return u.copy()
    s = SQRT3 / 2.0 if k == 1 else -SQRT3 / 2.0
    return -0.5 * u + s * j_apply(u)


def omega_matrix(m: int) -> np.ndarray:
    """Matrix W of the form in the (x-block, y-block) layout: omega(u, v) = u @ W @ v."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, eye], [-eye, zero]])


def normalize(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    n = np.linalg.norm(u)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize zero or non-finite vector")
    return u / n


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Uniform random point of S^{dim-1}."""
    while True:
        v = rng.standard_normal(dim)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def tangent_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to unit u, as columns.

    Built from the Householder reflector exchanging u with +-e_1; the
    remaining columns of the reflector span u-perp.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    sign = 1.0 if u[0] >= 0.0 else -1.0
    w = u.copy()
    w[0] += sign
    H = np.eye(n) - (2.0 / (w @ w)) * np.outer(w, w)
    return H[:, 1:]
