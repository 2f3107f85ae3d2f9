import math

import numpy as np
import pytest

import coalesce

CI = {"kind": "analytic_ci", "epsilon": 0.0}


def test_gen_eig_example():
    A = np.array([[24.0, 20.0], [20.0, 0.0]])
    B = np.array([[5.0, 3.0], [3.0, 5.0]])
    lam, V = coalesce.gen_eig(A, B)
    assert lam == pytest.approx([5.0, -5.0], abs=1e-12)
    assert np.allclose(V.T @ B @ V, np.eye(2), atol=1e-12)


def test_sqrt_matches_series():
    B = np.array([[5.0, 3.0], [3.0, 5.0]])
    S = coalesce.spd_sqrt(B)
    assert np.allclose(S @ S, B, atol=1e-12)
    assert np.allclose(coalesce.spd_sqrt_series(B, 9.0), S, atol=1e-10)


def test_errors_are_translated():
    with pytest.raises(coalesce.CoalesceError, match="NotPositiveDefinite"):
        coalesce.cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_eig2x2_and_codec():
    assert coalesce.eig2x2(3, 5, 3, 5, 3, 5) == pytest.approx((1.0, -1.0))
    assert coalesce.decode_signature([1, -1, -1, 1]) == [False, True, False]
    assert coalesce.signature_from_counts([0, 1, 0]) == [1, -1, -1, 1]


def test_trace_loop_around_intersection():
    r = coalesce.trace(CI, {"kind": "circle", "center": [0, 0], "radius": 1})
    assert r["D"] == [-1, -1]
    assert r["flagged_pairs"] == [1]
    assert np.allclose(r["V_end"], -r["V_start"], atol=1e-6)


def test_sweep_and_refine():
    pencil = {"kind": "analytic_ci", "epsilon": 0.1}
    s = coalesce.sweep(pencil, {"domain": [-1, 1, -1, 1], "nx": 8, "ny": 8})
    assert s["total"] == 1
    (row,) = s["intersections"]
    assert (row["box_row"], row["box_col"]) == (3, 3)
    (loc,) = coalesce.refine(pencil, (-0.25, 0.0, -0.25, 0.0), 8)
    assert math.hypot(loc[0] + 0.025, loc[1] + 0.03125) < 2 * 0.25 / 256


def test_sgplus_matrices_are_spd():
    A, B = coalesce.sgplus_matrices(8, 7, 0.45, 1, 0.3, 1.2)
    assert np.all(np.linalg.eigvalsh(A) > 0)
    assert np.all(np.linalg.eigvalsh(B) > 0)
    A2, _ = coalesce.sgplus_matrices(8, 7, 0.45, 1, 0.3 + 2 * math.pi, 1.2)
    assert np.allclose(A, A2)


def test_fit_power_law():
    n = [10, 20, 40]
    p, c, rmsd = coalesce.fit_power_law(n, [0.5 * x**2.3 for x in n])
    assert p == pytest.approx(2.3)
    assert c == pytest.approx(0.5)
    assert rmsd < 1e-12


def test_census_small(tmp_path):
    spec = {
        "n_list": [4, 6],
        "b_list": ["full"],
        "delta_list": [0.45],
        "realizations": 2,
        "grid": {"domain": [0, math.pi, 0, 2 * math.pi], "nx": 4, "ny": 8},
        "seed": 5,
    }
    fits = coalesce.census(spec, tmp_path)
    assert len(fits) == 1
    assert (tmp_path / "aggregated.csv").exists()
