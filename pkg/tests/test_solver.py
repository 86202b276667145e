import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexre import families as F
from vortexre import solver as S
from vortexre.errors import ConvergenceError, DegenerateEquilibriumWarning
from vortexre.model import angular_impulse, angular_velocity, pairwise_distances
from vortexre.spectral import Stability, classify, morse_data


def test_refine_jittered_triangle():
    rng = np.random.default_rng(3)
    re = S.refine(F.triangle(1, 1, 1).z + 1e-2 * rng.normal(size=6), [1, 1, 1])
    assert re.residual < 1e-12
    assert angular_impulse(re.z, re.gamma) == pytest.approx(1.0)
    # I = 1 for unit strengths puts the vertices at radius sqrt(2/3)
    assert pairwise_distances(re.z) == pytest.approx([math.sqrt(2)] * 3)
    assert re.omega == pytest.approx(1.5)
    assert re.meta["gauge_vortex"] == 0 and re.z[1] == 0.0 and re.z[0] > 0


def test_refine_square():
    rng = np.random.default_rng(4)
    z = np.array([1, 0, 0, 1, -1, 0, 0, -1.0]) + 1e-2 * rng.normal(size=8)
    re = S.refine(z, [1, 1, 1, 1])
    assert re.residual < 1e-12
    assert np.sort(pairwise_distances(re.z)) == pytest.approx([1, 1, 1, 1, math.sqrt(2),
                                                               math.sqrt(2)])
    assert re.omega == pytest.approx(angular_velocity(re.z, re.gamma))


def test_refine_exact_input_no_iterations():
    fp = F.trapezoid(1.0)
    re = S.refine(fp.z, fp.circulations, S.SolveOptions(i0=4.0))
    assert re.iterations == 0
    assert re.omega == pytest.approx(0.75)


def test_refine_mixed_sign_triangle():
    fp = F.triangle(1, 1, -0.4)
    re = S.refine(fp.z + 1e-3, fp.circulations)
    assert re.residual < 1e-12
    assert classify(re).classification is Stability.LINEARLY_STABLE


def test_refine_degenerate_warns():
    # the 7-ring has an extra null direction of H on I = I0
    fp = F.ngon(7)
    with pytest.warns(DegenerateEquilibriumWarning):
        re = S.refine(fp.z, fp.circulations)
    assert re.meta["degenerate_jacobian"]


def test_refine_gives_up():
    with pytest.raises(ConvergenceError):
        S.refine([0, 0, 1, 0.1, 2, -0.3, 0.4, 0.8], [1, 2, 3, 4], S.SolveOptions(max_iter=1))


def test_options_validation():
    with pytest.raises(ValueError):
        S.SolveOptions(tol=0)
    with pytest.raises(ValueError):
        S.SolveOptions(gauge="nearest")


@pytest.mark.parametrize("n", [3, 4])
def test_collinear_classes(n):
    res = S.collinear_all([1.0] * n)
    assert len(res) == math.factorial(n) // 2
    for re in res:
        assert re.residual < 1e-12 and S.is_collinear(re.z)
        md = morse_data(re)
        assert (md.nullity, md.index) == (1, n - 2)


def test_collinear3_matches_family():
    re = S.collinear([1, 1, 1], (0, 1, 2))
    # I = 1 for -1, 0, 1 with unit strengths, omega = 3/2
    assert np.sort(re.z[0::2]) == pytest.approx([-1, 0, 1])
    assert re.omega == pytest.approx(1.5)


def test_collinear_ordering_validated():
    with pytest.raises(ValueError):
        S.collinear([1, 1, 1], (0, 0, 1))


def test_orderings_count():
    assert len(S.collinear_orderings(5)) == 60


def test_minimize_on_sphere_square():
    rng = np.random.default_rng(0)
    re = S.minimize_on_sphere(S.random_seed_configuration(4, rng), [1, 1, 1, 1])
    assert np.sort(pairwise_distances(re.z)) == pytest.approx([1, 1, 1, 1, math.sqrt(2),
                                                               math.sqrt(2)])
    assert morse_data(re).is_nondegenerate_minimum


def test_minimize_rejects_mixed():
    with pytest.raises(ValueError):
        S.minimize_on_sphere([0, 0, 1, 0, 0, 1], [1, -0.5, 1])


def test_multistart_three_equal():
    classes, stats = S.multistart([1, 1, 1], 60, rng_seed=1, return_stats=True)
    assert stats["seeds"] == 60
    # the equilateral triangle plus the symmetric collinear state
    assert len(classes) == 2
    assert sum(c.meta["hits"] for c in classes) == stats["converged"]


def test_multistart_deterministic_across_workers():
    a = S.multistart([1, 0.5, 0.7], 12, rng_seed=5, workers=1)
    b = S.multistart([1, 0.5, 0.7], 12, rng_seed=5, workers=2)
    assert [c.z.tolist() for c in a] == [c.z.tolist() for c in b]


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("VORTEX_NUM_THREADS", "2")
    assert S.worker_count(16) == 2
    monkeypatch.delenv("VORTEX_NUM_THREADS")
    assert S.worker_count(3) == 3


@given(st.integers(0, 2 ** 31), st.floats(0.2, 5.0), st.floats(-3, 3))
def test_fingerprint_invariant(seed, r, theta):
    from vortexre.model import rotate
    rng = np.random.default_rng(seed)
    z = S.random_seed_configuration(4, rng)
    g = [1, 2, 0.5, 1.5]
    perm = rng.permutation(4)
    zp = (r * rotate(z, theta)).reshape(-1, 2)[perm].ravel()
    gp = np.array(g)[perm]
    assert S.fingerprint(zp, gp) == pytest.approx(S.fingerprint(z, g), abs=1e-10)


def test_normalize_mixed_zero_impulse():
    # I vanishes here, so the unweighted moment is used
    z = S.normalize([1, 0, -1, 0, 0, 2], [1, 1, -0.5], 1.0)
    assert np.isfinite(z).all()
    assert S.scale_of(z, [1, 1, -0.5]) == pytest.approx(1.0)
