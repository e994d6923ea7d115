import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from mblab import _backend, _kernels_py

compiled = pytest.importorskip("mblab._kernels")

from conftest import CHAIN, SPARSE, SPARSE_F  # noqa: E402

GENERATORS = [
    (np.array(CHAIN), np.array([0.0, 1.0])),
    (np.array(SPARSE), np.array(SPARSE_F)),
    (np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.25, 0.25, 0.5]]), np.array([0.0, 0.3, 1.0])),
]


def _cores(P, f):
    args = (P, f, math.log(0.8), math.log(0.9))
    return compiled.FamilyCore(*args), _kernels_py.FamilyCore(*args)


def test_default_backend_is_compiled():
    assert _backend.BACKEND == compiled.BACKEND != "python"


@pytest.mark.parametrize("P, f", GENERATORS)
def test_power_iteration_agrees(P, f):
    for M in (P, P * np.exp(0.7 * f)[None, :]):
        a, b = compiled.power_iteration(M), _kernels_py.power_iteration(M)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-10)


@pytest.mark.parametrize("P, f", GENERATORS)
def test_family_core_agrees(P, f):
    c, p = _cores(P, f)
    for theta in (-5.0, -1.0, 0.0, 0.3, 2.0, 20.0):
        a, b = c.evaluate(theta), p.evaluate(theta)
        assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-14)
        assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-14)
    lo, hi = f.min(), f.max()
    for mu in np.linspace(lo, hi, 11)[1:-1]:
        assert c.theta_from_mean(mu) == pytest.approx(p.theta_from_mean(mu), rel=1e-9, abs=1e-10)
        assert c.kl_mean(lo + 0.9 * (hi - lo), mu) == pytest.approx(
            p.kl_mean(lo + 0.9 * (hi - lo), mu), rel=1e-9, abs=1e-14
        )
    assert c.dual(hi)[:2] == p.dual(hi)[:2]


def test_simulate_path_identical():
    P = np.array(SPARSE)
    u = np.random.default_rng(3).random(5000)
    cum_c, last_c = compiled.cumulative_rows(P)
    cum_p, last_p = _kernels_py.cumulative_rows(P)
    assert np.array_equal(compiled.simulate_path(cum_c, last_c, 0, u), _kernels_py.simulate_path(cum_p, last_p, 0, u))


SCRIPT = """
import json
from mblab import _backend, bandit
from mblab.family import ExpFamily
fam = ExpFamily([[0.9, 0.1], [0.2, 0.8]], [0, 1])
inst = bandit.BanditInstance.from_means(fam, [0.9, 0.1])
p = bandit.StrategyParams.for_instance(inst, 0.1)
runs = [bandit.run(inst, p, s) for s in range(2)]
print(json.dumps([_backend.BACKEND, [[r.tau, r.decision] for r in runs]]))
"""


def _subprocess(pure):
    env = dict(os.environ)
    env.pop("MBLAB_PURE_PYTHON", None)
    if pure:
        env["MBLAB_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_pure_python_fallback_gives_same_runs():
    backend_c, runs_c = _subprocess(False)
    backend_p, runs_p = _subprocess(True)
    assert backend_p == "python" and backend_c != "python"
    assert runs_c == runs_p
