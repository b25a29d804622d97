"""The compiled loop kernels and the numpy kernels must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import disc_mesh
from plapeig import kernels
from plapeig._accel import backend


@pytest.fixture(scope="module")
def setup():
    m = disc_mesh(0.1)
    grads, area = kernels.shape_gradients(m.vertices, m.triangles)
    u = np.random.default_rng(3).standard_normal(m.n_vertices)
    u[m.boundary] = 0.0
    return m, grads, area, u


def test_shape_gradients_sum_to_zero(setup):
    m, grads, area, _ = setup
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(area, m.areas, rtol=1e-14)


def test_quadrature_rules_integrate_polynomials():
    for pts, w, deg in ((kernels.QUAD3_POINTS, kernels.QUAD3_WEIGHTS, 2), (kernels.QUAD7_POINTS, kernels.QUAD7_WEIGHTS, 5)):
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        # average of l0^a l1^b over the triangle is 2 a! b! / (a + b + 2)!
        from math import factorial

        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                exact = 2 * factorial(a) * factorial(b) / factorial(a + b + 2)
                assert np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b) == pytest.approx(exact, abs=1e-15)
    assert kernels.quadrature(4.0)[1].size == 3
    assert kernels.quadrature(4.5)[1].size == 7


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 6.0])
def test_loop_and_numpy_kernels_agree(setup, p):
    m, grads, area, u = setup
    tri = m.triangles
    e1, g1 = kernels._energy_grad_np(u, tri, grads, area, p)
    e2, g2 = kernels._energy_grad_loop(u, tri, grads, area, p)
    assert e1 == pytest.approx(e2, rel=1e-13)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-12 * np.abs(g1).max())
    np.testing.assert_allclose(
        kernels._hessian_np(u, tri, grads, area, p, 1e-10),
        kernels._hessian_loop(u, tri, grads, area, p, 1e-10),
        rtol=1e-11, atol=1e-12,
    )
    qp, qw = kernels.quadrature(p)
    assert kernels._lp_np(u, tri, area, qp, qw, p) == pytest.approx(kernels._lp_loop(u, tri, area, qp, qw, p), rel=1e-13)
    np.testing.assert_allclose(
        kernels._lp_load_np(u, tri, area, qp, qw, p), kernels._lp_load_loop(u, tri, area, qp, qw, p), rtol=1e-11, atol=1e-14
    )


def test_zero_gradient_triangles(setup):
    m, grads, area, _ = setup
    u = np.zeros(m.n_vertices)
    for f in (kernels._energy_grad_np, kernels._energy_grad_loop):
        e, g = f(u, m.triangles, grads, area, 1.5)
        assert e == 0.0 and not np.any(g)


def test_backend_flag():
    assert backend() in {"numba", "numpy"}


_SCRIPT = """
import json, math
from plapeig import radial, _accel
from plapeig.fem import solve_first_eig
from plapeig.geometry import make_sector
res = solve_first_eig(make_sector(1.0, math.pi, 0.2), 3.0)
print(json.dumps({"backend": _accel.backend(), "roots": list(radial.radial_roots(3.0, 2, 2)), "lam": res.lam}))
"""


def test_numpy_path_matches_numba_path():
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, PLAPEIG_DISABLE_NUMBA=flag)
        r = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True, timeout=600)
        assert r.returncode == 0, r.stderr
        out[flag] = json.loads(r.stdout)
    assert out["0"]["backend"] == "numba" and out["1"]["backend"] == "numpy"
    np.testing.assert_allclose(out["0"]["roots"], out["1"]["roots"], rtol=1e-12)
    assert out["0"]["lam"] == pytest.approx(out["1"]["lam"], rel=1e-9)
