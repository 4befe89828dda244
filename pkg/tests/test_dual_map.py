"""Unit tests for the dual billiard map solver."""

import math

import numpy as np
import pytest

from dualbilliard.dual_map import (MapConvergenceError, NotExteriorError,
                                   dual_map, inverse_consistency, is_exterior,
                                   support_gap, symplecticity_defect)
from dualbilliard.surface import (make_ellipsoid, make_perturbed_sphere,
                                  make_sphere)
from dualbilliard.symplectic import j_apply, normalize, random_unit

RNG = np.random.default_rng(55100234)
SQRT3 = math.sqrt(3.0)


def _sphere_oracle(z, radius, sign):
    """Closed-form tangency for a round sphere, valid in every dimension.

    Solving z = R u - s J u inside the J-invariant plane span(z, J z) gives
    u = (R z + s J z) / |z|^2 with s = sign * sqrt(|z|^2 - R^2).
    """
    z = np.asarray(z, dtype=float)
    nz2 = float(z @ z)
    s = sign * math.sqrt(nz2 - radius ** 2)
    u = (radius * z + s * j_apply(z)) / nz2
    q = radius * normalize(u)
    return 2.0 * q - z, q, s


def test_circle_frozen_images():
    circle = make_sphere(1, 1.0)
    fwd = dual_map(circle, [2.0, 0.0], "forward")
    assert np.max(np.abs(fwd.image - [-1.0, SQRT3])) < 1e-9
    assert abs(fwd.multiplier - SQRT3) < 1e-9
    assert fwd.residual < 1e-12
    back = dual_map(circle, [2.0, 0.0], "backward")
    assert np.max(np.abs(back.image - [-1.0, -SQRT3])) < 1e-9
    assert back.multiplier < 0.0


def test_circle_matches_tangent_construction():
    circle = make_sphere(1, 1.0)
    for _ in range(20):
        z = random_unit(RNG, 2) * RNG.uniform(1.2, 5.0)
        for direction, sign in (("forward", 1.0), ("backward", -1.0)):
            res = dual_map(circle, z, direction)
            image, q, s = _sphere_oracle(z, 1.0, sign)
            assert np.max(np.abs(res.image - image)) < 1e-9
            assert abs(res.multiplier - s) < 1e-9


def test_sphere_matches_oracle_higher_dim():
    for m, radius in ((2, 1.0), (3, 1.4)):
        sphere = make_sphere(m, radius)
        for _ in range(10):
            z = random_unit(RNG, 2 * m) * RNG.uniform(radius * 1.3, radius * 4.0)
            for direction, sign in (("forward", 1.0), ("backward", -1.0)):
                res = dual_map(sphere, z, direction)
                image, q, s = _sphere_oracle(z, radius, sign)
                assert np.max(np.abs(res.image - image)) < 1e-9
                assert abs(res.multiplier - s) < 1e-9
                # the map is an isometry of each centered sphere of orbits
                assert abs(np.linalg.norm(res.image) - np.linalg.norm(z)) < 1e-9


def test_circle_period_three():
    # points at twice the radius are 3-periodic: the map is a rotation by
    # a cube root of unity there
    circle = make_sphere(1, 1.0)
    z = np.array([2.0, 0.0])
    w = z
    for _ in range(3):
        w = dual_map(circle, w, "forward").image
    assert np.max(np.abs(w - z)) < 1e-12


def test_tangency_defines_the_map():
    # for a non-symmetric surface check the defining equations directly:
    # the tangency point lies on the surface, the chord runs along J u, and
    # the image is the reflection through the tangency point
    b = np.array([1.0, 1.25, 0.85, 1.1])
    surf = make_ellipsoid(b)
    for _ in range(10):
        z = random_unit(RNG, 4) * RNG.uniform(2.0, 4.0)
        for direction, sign in (("forward", 1.0), ("backward", -1.0)):
            res = dual_map(surf, z, direction)
            u = res.tangency_normal
            q = surf.point(u)
            assert np.max(np.abs(res.image - (2.0 * q - z))) < 1e-12
            assert abs(np.sum((q / b) ** 2) - 1.0) < 1e-9
            chord = q - z
            off = chord - (chord @ j_apply(u)) * j_apply(u)
            assert np.linalg.norm(off) < 1e-9
            assert sign * res.multiplier > 0.0


def test_perturbed_sphere_map_branches():
    surf = make_perturbed_sphere((1.0, 2.0), 0.1)
    for _ in range(10):
        z = random_unit(RNG, 4) * RNG.uniform(2.0, 4.0)
        fwd = dual_map(surf, z, "forward")
        back = dual_map(surf, z, "backward")
        assert fwd.multiplier > 0.0 > back.multiplier
        assert fwd.residual < 1e-12 and back.residual < 1e-12


def test_is_exterior():
    surf = make_ellipsoid([1.0, 1.25, 0.85, 1.1])
    assert is_exterior(surf, [2.0, 0.0, 0.0, 0.0])
    assert not is_exterior(surf, [0.1, 0.0, 0.0, 0.0])
    assert not is_exterior(surf, np.zeros(4))
    # boundary points are not strictly exterior
    u = random_unit(RNG, 4)
    assert not is_exterior(surf, surf.point(u))
    with pytest.raises(ValueError):
        is_exterior(surf, [1.0, 0.0])


def test_interior_point_raises():
    circle = make_sphere(1, 1.0)
    with pytest.raises(NotExteriorError):
        dual_map(circle, [0.5, 0.0], "forward")
    with pytest.raises(ValueError):
        dual_map(circle, [2.0, 0.0], "sideways")


def test_support_gap_sphere():
    sphere = make_sphere(2, 1.5)
    z = np.array([0.0, 3.0, 0.0, 0.0])
    gap, u = support_gap(sphere, z)
    assert abs(gap - 1.5) < 1e-9
    assert np.max(np.abs(u - z / 3.0)) < 1e-6


def test_inverse_consistency():
    for surf in (make_sphere(2, 1.0),
                 make_ellipsoid([1.0, 1.25, 0.85, 1.1]),
                 make_perturbed_sphere((1.0, 2.0), 0.1)):
        for _ in range(5):
            z = random_unit(RNG, surf.dim) * RNG.uniform(2.0, 4.0)
            assert inverse_consistency(surf, z) < 1e-10


def test_symplecticity_defect_small():
    for surf in (make_sphere(1, 1.0),
                 make_ellipsoid([1.0, 0.7]),
                 make_perturbed_sphere((1.0, 2.0), 0.1)):
        for _ in range(3):
            z = random_unit(RNG, surf.dim) * RNG.uniform(2.0, 4.0)
            assert symplecticity_defect(surf, z) < 1e-5


def test_symplecticity_defect_needs_clearance():
    circle = make_sphere(1, 1.0)
    with pytest.raises(NotExteriorError):
        symplecticity_defect(circle, [1.0 + 1e-7, 0.0], step=1e-5)


def test_translation_equivariance():
    # T_{M+t}(z + t) = T_M(z) + t
    surf = make_perturbed_sphere((1.0, 2.0), 0.1)
    t = np.array([0.4, -0.3, 0.2, 0.1])
    shifted = surf.translated(t)
    for _ in range(5):
        z = random_unit(RNG, 4) * RNG.uniform(2.0, 4.0)
        res = dual_map(surf, z, "forward")
        res_t = dual_map(shifted, z + t, "forward")
        assert np.max(np.abs(res_t.image - res.image - t)) < 1e-9


def test_initial_normal_speeds_convergence():
    surf = make_ellipsoid([1.0, 1.25, 0.85, 1.1])
    z = np.array([2.0, 1.0, -0.5, 0.3])
    cold = dual_map(surf, z, "forward")
    warm = dual_map(surf, z, "forward", initial_normal=cold.tangency_normal)
    assert warm.iterations <= cold.iterations
    assert np.max(np.abs(warm.image - cold.image)) < 1e-10
