import math

import numpy as np
import pytest

import stochlin


UNSTABILIZABLE_PAIR = {
    "name": "unstabilizable-pair",
    "a": [[0, 1], [0, -1]],
    "b": [[0], [1]],
    "c": [[1, -1], [0, 0]],
    "d": [[0], [0]],
}


def test_svec_round_trip():
    X = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    v = stochlin.svec(X)
    assert v.shape == (6,)
    np.testing.assert_array_equal(stochlin.smat(v), X)


def test_diagonal_diffusion_spectrum():
    sys = stochlin.SystemQuad(-np.eye(2), np.zeros((2, 1)), np.diag([3.0, 4.0]), np.zeros((2, 1)))
    eig = sorted(z.real for z in stochlin.spectrum(sys, np.zeros((1, 2))))
    assert eig == pytest.approx([7.0, 10.0, 14.0], abs=1e-10)


def test_scalar_stabilizability_matches_closed_form():
    a, b, c, d = 1.0, 2.0, 0.0, 1.0
    rep = stochlin.is_stabilizable(stochlin.SystemQuad.scalar(a, b, c, d))
    expected = b * b + 2 * b * c * d - 2 * a * d * d > 0
    assert rep["decision"] == ("yes" if expected else "no")


def test_scalar_gare():
    sys = stochlin.SystemQuad.scalar(1.0, 2.0, 0.0, 1.0)
    sol = stochlin.solve_gare_maximal(sys, np.zeros((1, 1)), np.eye(1))
    # max(0, (2a + c^2) / (b^2 + 2bcd - 2ad^2)) = 2 / 2
    assert sol["P"][0, 0] == pytest.approx(1.0, abs=1e-8)
    assert sol["residual"] < 1e-8


def test_run_command_unstabilizable_pair():
    code, report = stochlin.run("stabilizable", UNSTABILIZABLE_PAIR)
    assert code == 0
    assert report["verdict"] == "not-stabilizable"
    assert report["version"] == "1"
    assert "tolerances" in report


def test_run_command_reports_invalid_input():
    bad = dict(UNSTABILIZABLE_PAIR, b=[[0], [1], [2]])
    with pytest.raises(ValueError, match="'b'"):
        stochlin.run("stabilizable", bad)
    code, report = stochlin.run("gare", UNSTABILIZABLE_PAIR)
    assert code == 2
    assert report["status"] == "error"


def test_robust_certificate():
    sys = stochlin.SystemQuad.scalar(0.0, 1.0, 0.0, 0.0)
    res = stochlin.synthesize_quadratic_stabilizer(sys, np.eye(1), np.eye(1))
    assert res["feasible"]
    k = res["K"][0, 0]
    # Worst-case closed-loop drift k + 1 must be negative.
    assert k + 1.0 < 0.0
    assert res["alpha"] > 0.0
    assert math.isfinite(res["alpha"])
