"""Unit tests for the critical-class census and the orbit-count experiment."""

import numpy as np
import pytest

from dualbilliard.orbits import closure_residual, newton_polish
from dualbilliard.sharpness import (SharpnessReport, critical_orbits,
                                    exact_orbit, linearized_seed,
                                    sharpness_experiment)
from dualbilliard.surface import (PerturbationParams, make_perturbed_sphere,
                                  perturbation_gradient, perturbation_value)
from dualbilliard.symplectic import SQRT3, cube_root_rotate


def test_census_m1():
    params = PerturbationParams((1.0,), 0.05)
    classes = critical_orbits(params, sweep_starts=100)
    assert len(classes) == 2
    assert [c.eta for c in classes] == [0.95, 1.05]
    assert np.array_equal(classes[0].point, [-1.0, 0.0])
    assert np.array_equal(classes[1].point, [1.0, 0.0])


def test_census_m2_frozen():
    params = PerturbationParams((1.0, 2.0), 0.1)
    classes = critical_orbits(params, sweep_starts=200)
    assert len(classes) == 4
    assert np.allclose([c.eta for c in classes], [0.9, 1.1, 1.9, 2.1], atol=1e-14)
    values = [c.critical_value for c in classes]
    expected = [0.5 - 0.1 / 3, 0.5 + 0.1 / 3, 1.0 - 0.1 / 3, 1.0 + 0.1 / 3]
    assert np.allclose(values, expected, atol=1e-14)
    # representatives are +-e_{x_i} and each solves the constrained
    # critical-point system grad f = eta p on the unit sphere
    for c in classes:
        p = c.point
        assert abs(np.linalg.norm(p) - 1.0) < 1e-14
        assert np.count_nonzero(p) == 1 and abs(p[c.pair_index]) == 1.0
        defect = perturbation_gradient(p, params) - c.eta * p
        assert np.linalg.norm(defect) < 1e-10
        assert abs(perturbation_value(p, params) - c.critical_value) < 1e-12
        # the whole one-third-turn class is critical with the same value
        for k in (1, 2):
            pk = cube_root_rotate(p, k)
            dk = perturbation_gradient(pk, params) - c.eta * pk
            assert np.linalg.norm(dk) < 1e-10
            assert abs(perturbation_value(pk, params) - c.critical_value) < 1e-12
    # distinct multipliers and critical values across classes
    etas = [c.eta for c in classes]
    assert len(set(etas)) == len(etas)
    assert len(set(values)) == len(values)


def test_census_m3_count():
    params = PerturbationParams((1.0, 2.0, 3.0), 0.1)
    classes = critical_orbits(params, sweep_starts=150)
    assert len(classes) == 6
    assert [c.pair_index for c in classes] == [0, 0, 1, 1, 2, 2]
    assert [c.branch for c in classes] == [-1, 1, -1, 1, -1, 1]


def test_exact_orbit_closes():
    params = PerturbationParams((1.0, 2.0), 0.1)
    surf = make_perturbed_sphere(params)
    for c in critical_orbits(params, sweep_starts=0):
        tup = exact_orbit(params, c)
        assert np.linalg.norm(closure_residual(surf, tup)) < 1e-12
        # normals are the one-third-turn rotations of the critical point
        for k in range(3):
            assert np.allclose(tup.normals[k], cube_root_rotate(c.point, k),
                               atol=1e-14)
        expected_mult = SQRT3 * (1.0 + params.eps * c.critical_value)
        assert np.allclose(tup.multipliers, expected_mult, atol=1e-14)


def test_linearized_seed_residual_order():
    # the seed solves the closure system to first order, so its residual
    # decays like eps^2: each halving of eps divides it by 4 +- 0.5
    a = (1.0, 2.0)
    residuals = []
    for eps in (0.05, 0.025, 0.0125):
        params = PerturbationParams(a, eps)
        surf = make_perturbed_sphere(params)
        worst = [np.linalg.norm(closure_residual(surf, linearized_seed(params, c)))
                 for c in critical_orbits(params, sweep_starts=0)]
        residuals.append(worst)
    residuals = np.array(residuals)
    ratios = residuals[:-1] / residuals[1:]
    assert np.all(np.abs(ratios - 4.0) < 0.5)


def test_linearized_seed_values_at_critical_point():
    # at a critical point the first-order correction to the normals is zero
    # and the multiplier correction is sqrt(3) times the quadratic profile part
    params = PerturbationParams((1.0, 2.0), 0.05)
    for c in critical_orbits(params, sweep_starts=0):
        seed = linearized_seed(params, c)
        for k in range(3):
            assert np.linalg.norm(seed.normals[k] - cube_root_rotate(c.point, k)) < 1e-8
        a_i = params.a[c.pair_index]
        expected = SQRT3 * (1.0 + params.eps * a_i / 2.0)
        assert np.max(np.abs(seed.multipliers - expected)) < 1e-8


def test_linearized_seed_polishes_quickly():
    params = PerturbationParams((1.0, 2.0), 0.1)
    surf = make_perturbed_sphere(params)
    for c in critical_orbits(params, sweep_starts=0):
        res = newton_polish(surf, linearized_seed(params, c))
        assert res.status == "converged"
        assert res.residual < 1e-10
        assert res.iterations <= 10


def test_sharpness_experiment_m1():
    report = sharpness_experiment(((1.0,), 0.05), n_starts=60,
                                  check_doubling=True, sweep_starts=60)
    assert report.expected_count == 2
    assert report.found_count == 2
    assert report.found_count_doubled == 2
    assert report.stable_under_doubling
    assert report.bijection_ok
    assert report.success
    assert sorted(report.seed_to_orbit) == [0, 1]
    assert len(report.critical_classes) == 2


def test_sharpness_report_success_logic():
    report = sharpness_experiment(((1.0,), 0.05), n_starts=40,
                                  check_doubling=False, sweep_starts=0)
    assert report.stable_under_doubling is None     # doubling skipped
    assert report.success
    broken = SharpnessReport(
        params=report.params, expected_count=4,
        found_count=report.found_count, found_count_doubled=None,
        stable_under_doubling=None, seed_to_orbit=report.seed_to_orbit,
        bijection_ok=True, search=report.search)
    assert not broken.success


def test_sharpness_rejects_invalid_params():
    with pytest.raises(Exception):
        sharpness_experiment(((1.0, 2.0), 2.0), n_starts=10)   # eps too large
