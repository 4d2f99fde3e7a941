import math

import numpy as np
import pytest

from hyperuni import variance
from hyperuni.pointset import (
    OptimizerOptions,
    PointSet,
    PointSetFormatError,
    fibonacci_sphere,
    load_pointset,
    maximize_distance_sum,
    pairwise_distance_sum,
    random_uniform,
    save_pointset,
)

from conftest import rotation_matrix


def test_pointset_rejects_non_unit_rows():
    with pytest.raises(ValueError):
        PointSet(np.array([[0.0, 0.0, 0.5]]))


def test_pointset_is_read_only():
    X = random_uniform(2, 5, seed=0)
    with pytest.raises(ValueError):
        X.points[0, 0] = 2.0


def test_random_uniform_norms_and_shapes():
    for d in (1, 2, 3):
        for n in (1, 10, 1000, 10_000):
            X = random_uniform(d, n, seed=1)
            assert X.n == n and X.d == d
            assert np.max(np.abs(np.linalg.norm(X.points, axis=1) - 1.0)) < 1e-12


def test_random_uniform_deterministic_in_seed():
    a = random_uniform(2, 50, seed=7)
    b = random_uniform(2, 50, seed=7)
    c = random_uniform(2, 50, seed=8)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_random_uniform_first_weyl_sum_centers_on_one():
    # E[(1/N) sum_ij P_1(<x_i, x_j>)] = 1 for i.i.d. points
    vals = []
    for seed in range(200):
        X = random_uniform(2, 500, seed=seed)
        vals.append(variance.weyl_sum(X, 1).value / X.n)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
    assert abs(mean - 1.0) <= 3.0 * se


def test_fibonacci_sphere_structure():
    X = fibonacci_sphere(1000)
    z = X.points[:, 2]
    assert np.all(np.diff(z) < 0)
    assert np.max(np.abs(z)) < 1.0
    assert np.max(np.abs(np.linalg.norm(X.points, axis=1) - 1.0)) < 1e-12


def test_fibonacci_single_point_sits_on_equator():
    X = fibonacci_sphere(1)
    assert abs(X.points[0, 2]) < 1e-15


def test_save_load_roundtrip(tmp_path):
    X = random_uniform(2, 37, seed=3)
    path = tmp_path / "pts.txt"
    save_pointset(X, path)
    Y = load_pointset(path)
    assert Y.n == X.n and Y.d == X.d
    assert np.max(np.abs(Y.points - X.points)) < 1e-15


def test_load_accepts_comments_and_blank_lines(tmp_path):
    path = tmp_path / "tetra.txt"
    a = 1.0 / math.sqrt(3.0)
    path.write_text(
        "# tetrahedron vertices\n\n"
        f"{a} {a} {a}\n{a} {-a} {-a}\n"
        f"{-a} {a} {-a}\n{-a} {-a} {a}\n"
    )
    X = load_pointset(path)
    assert X.n == 4 and X.d == 2


def test_load_rejects_zero_vector_with_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0 0\n0 0 0\n")
    with pytest.raises(PointSetFormatError) as err:
        load_pointset(path)
    assert err.value.line == 2


def test_load_rejects_garbage_with_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0 0\nnot a number here\n")
    with pytest.raises(PointSetFormatError) as err:
        load_pointset(path)
    assert err.value.line == 2


def test_load_rejects_ragged_columns(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 0 0\n0 1\n")
    with pytest.raises(PointSetFormatError) as err:
        load_pointset(path)
    assert err.value.line == 2


def test_load_dimension_mismatch(tmp_path):
    path = tmp_path / "circle.txt"
    path.write_text("1 0\n0 1\n")
    assert load_pointset(path, expected_dim=1).d == 1
    with pytest.raises(PointSetFormatError):
        load_pointset(path, expected_dim=2)


def test_load_renormalises_slightly_off_points(tmp_path):
    path = tmp_path / "near.txt"
    path.write_text("1.0000001 0 0\n0 1 0\n")
    X = load_pointset(path)
    assert abs(np.linalg.norm(X.points[0]) - 1.0) < 1e-15


def test_pairwise_distance_sum_basics(antipodal_pair):
    X1 = random_uniform(3, 1, seed=0)
    assert pairwise_distance_sum(X1, 1.0) == 0.0
    assert math.isclose(pairwise_distance_sum(antipodal_pair, 1.0), 4.0, abs_tol=1e-14)
    with pytest.raises(ValueError):
        pairwise_distance_sum(X1, 2.0)
    with pytest.raises(ValueError):
        pairwise_distance_sum(X1, 0.0)


def test_pairwise_distance_sum_permutation_invariant():
    X = random_uniform(2, 40, seed=5)
    perm = np.random.default_rng(0).permutation(40)
    Y = PointSet(X.points[perm])
    assert pairwise_distance_sum(X, 1.3) == pairwise_distance_sum(Y, 1.3)


def test_maximize_two_points_antipodal():
    X = maximize_distance_sum(2, 2, 1.5, OptimizerOptions(seed=0, gradient_tolerance=1e-12))
    # ordered pairs: two distances of 2 -> objective 4
    assert math.isclose(X.provenance["objective"], 4.0, abs_tol=1e-9)
    assert math.isclose(float(X.points[0] @ X.points[1]), -1.0, abs_tol=1e-9)


def test_maximize_three_points_equilateral():
    X = maximize_distance_sum(
        2, 3, 1.5, OptimizerOptions(seed=3, restarts=8, max_iterations=3000, gradient_tolerance=1e-12)
    )
    gram = X.points @ X.points.T
    dists = np.sqrt(2.0 - 2.0 * gram[~np.eye(3, dtype=bool)])
    assert np.max(np.abs(dists - math.sqrt(3.0))) < 1e-6


def test_maximize_four_points_regular_tetrahedron():
    X = maximize_distance_sum(
        2, 4, 1.5, OptimizerOptions(seed=11, restarts=8, max_iterations=3000, gradient_tolerance=1e-12)
    )
    gram = X.points @ X.points.T
    dists = np.sqrt(2.0 - 2.0 * gram[~np.eye(4, dtype=bool)])
    assert np.max(np.abs(dists - math.sqrt(8.0 / 3.0))) < 1e-6
    assert X.provenance["converged"]
    assert len(X.provenance["restarts"]) == 8


def test_maximize_objective_trace_is_nondecreasing():
    X = maximize_distance_sum(
        2, 12, 1.5, OptimizerOptions(seed=2, max_iterations=300, record_trace=True)
    )
    trace = X.provenance["restarts"][0]["trace"]
    assert len(trace) > 2
    assert np.all(np.diff(trace) >= 0.0)


def test_maximize_improves_on_initialization():
    init = random_uniform(2, 16, seed=9)
    before = pairwise_distance_sum(init, 1.0)
    X = maximize_distance_sum(2, 16, 1.5, OptimizerOptions(seed=9, max_iterations=500), initial=init)
    assert X.provenance["objective"] >= before


def test_maximize_rotation_covariance():
    init = random_uniform(2, 10, seed=4)
    rot = rotation_matrix(3, seed=77)
    init_rot = PointSet(init.points @ rot.T)
    opts = OptimizerOptions(seed=4, max_iterations=800, gradient_tolerance=1e-11)
    out = maximize_distance_sum(2, 10, 1.5, opts, initial=init)
    out_rot = maximize_distance_sum(2, 10, 1.5, opts, initial=init_rot)
    assert math.isclose(
        out.provenance["objective"], out_rot.provenance["objective"], rel_tol=1e-9
    )
    assert np.max(np.abs(out_rot.points - out.points @ rot.T)) < 1e-5


def test_maximize_reports_non_convergence():
    X = maximize_distance_sum(2, 24, 1.5, OptimizerOptions(seed=0, max_iterations=2))
    assert X.provenance["converged"] is False


def test_maximize_rejects_tau_outside_open_interval():
    for tau in (1.0, 2.0, 0.5, 2.5):
        with pytest.raises(ValueError):
            maximize_distance_sum(2, 8, tau)
    # boundary values excluded for d = 3 as well
    with pytest.raises(ValueError):
        maximize_distance_sum(3, 8, 1.5)
