import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from sairsnet.errors import ConvergenceError, IntegrationError, IrreducibilityError
from sairsnet.numerics import (
    IntegratorOptions,
    integrate,
    positive_balance_vector,
    power_iteration,
    spectral_abscissa,
)


def irreducible_matrices(max_n=8):
    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        seed = draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        m = rng.uniform(0.0, 2.0, (n, n)) * (rng.random((n, n)) < 0.4)
        perm = rng.permutation(n)
        for a, b in zip(perm, np.roll(perm, -1)):
            m[a, b] = rng.uniform(0.1, 2.0)
        if n == 1:
            m[0, 0] = rng.uniform(0.1, 2.0)
        return m

    return build()


@settings(max_examples=100, deadline=None)
@given(irreducible_matrices())
def test_power_iteration_matches_dense_eigensolver(m):
    perron = power_iteration(m)
    rho = max(abs(np.linalg.eigvals(m)))
    assert perron.rho == pytest.approx(rho, rel=1e-9, abs=1e-12)
    assert np.all(perron.right_vector > 0)
    assert np.abs(m @ perron.right_vector - perron.rho * perron.right_vector).max() <= 1e-9 * max(1, rho)


def test_power_iteration_periodic_matrices():
    cycle = np.roll(np.eye(5), 1, axis=1)
    assert power_iteration(cycle).rho == pytest.approx(1.0, abs=1e-12)
    bipartite = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
    assert power_iteration(bipartite).rho == pytest.approx(math.sqrt(2), abs=1e-12)


def test_power_iteration_rejects_bad_input():
    with pytest.raises(IrreducibilityError):
        power_iteration(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(IrreducibilityError):
        power_iteration(np.array([[1.0, -1.0], [1.0, 1.0]]))


def test_power_iteration_iteration_cap():
    m = np.array([[1.0, 1e-3], [1e-3, 1.0 - 1e-9]])
    with pytest.raises(ConvergenceError):
        power_iteration(m, tol=0.0, max_iter=3)


def test_spectral_abscissa():
    assert spectral_abscissa(np.diag([-3.0, -1.0, -2.0])) == -1.0
    rot = np.array([[-0.5, 2.0], [-2.0, -0.5]])
    assert spectral_abscissa(rot) == pytest.approx(-0.5)
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 6))
    assert spectral_abscissa(m) == pytest.approx(np.linalg.eigvals(m).real.max())


@settings(max_examples=100, deadline=None)
@given(irreducible_matrices(max_n=10), st.integers(0, 2**32 - 1))
def test_balance_vector_and_potential_identity(w, seed):
    np.fill_diagonal(w, 0.0)
    if w.shape[0] > 1 and not (w.sum(axis=1) > 0).all():
        return
    try:
        c = positive_balance_vector(w)
    except IrreducibilityError:
        return  # zeroing the diagonal can break strong connectivity for n = 1 only
    assert c.min() == pytest.approx(1.0)
    assert np.all(c > 0)
    scale = np.abs(w.sum(axis=1) * c).max() or 1.0
    assert np.abs(w.sum(axis=1) * c - c @ w).max() <= 1e-10 * scale
    p = np.random.default_rng(seed).normal(size=w.shape[0])
    identity = (c[:, None] * w * (p[:, None] - p[None, :])).sum()
    assert abs(identity) <= 1e-9 * scale * max(1.0, np.abs(p).max())


def test_balance_vector_matches_matrix_tree_cofactors():
    rng = np.random.default_rng(11)
    w = rng.uniform(0.1, 1.0, (4, 4))
    np.fill_diagonal(w, 0.0)
    lap = np.diag(w.sum(axis=1)) - w.T
    cof = np.array([np.linalg.det(np.delete(np.delete(lap, k, 0), k, 1)) for k in range(4)])
    c = positive_balance_vector(w)
    assert np.allclose(c, cof / cof.min(), rtol=1e-10)


def test_balance_vector_reducible():
    with pytest.raises(IrreducibilityError):
        positive_balance_vector(np.array([[0.0, 1.0], [0.0, 0.0]]))


def _lotka(t, x):
    return np.array([x[0] * (1.0 - x[1]), x[1] * (x[0] - 1.0)])


def test_adaptive_matches_scipy_oracle():
    x0 = [1.5, 0.5]
    traj = integrate(_lotka, x0, (0.0, 10.0), IntegratorOptions(rtol=1e-10, atol=1e-12))
    ref = solve_ivp(_lotka, (0.0, 10.0), x0, method="DOP853", rtol=1e-12, atol=1e-14)
    assert np.allclose(traj.final, ref.y[:, -1], atol=1e-8)


def test_exponential_decay_exact():
    traj = integrate(lambda t, x: -x, [1.0], (0.0, 5.0), IntegratorOptions(sample_step=0.5))
    assert np.allclose(traj.values[:, 0], np.exp(-traj.times), atol=1e-9)
    assert traj.times[0] == 0.0 and traj.times[-1] == 5.0
    mid = traj.evaluate(1.2345)
    assert mid[0] == pytest.approx(math.exp(-1.2345), abs=1e-6)


def test_fixed_step_is_fifth_order():
    errs = []
    for h in (0.1, 0.05):
        traj = integrate(lambda t, x: -x, [1.0], (0.0, 1.0), IntegratorOptions(fixed_step=h))
        errs.append(abs(traj.final[0] - math.exp(-1.0)))
    order = math.log2(errs[0] / errs[1])
    assert 4.5 < order < 6.5


def test_fixed_step_deterministic():
    opts = IntegratorOptions(fixed_step=0.01, sample_step=0.05)
    a = integrate(_lotka, [1.5, 0.5], (0.0, 3.0), opts)
    b = integrate(_lotka, [1.5, 0.5], (0.0, 3.0), opts)
    assert np.array_equal(a.values, b.values)
    assert a.stats["fixed_step"] == 0.01


def test_step_underflow_reported():
    with pytest.raises(IntegrationError) as exc:
        integrate(lambda t, x: x**2, [1.0], (0.0, 2.0))
    assert exc.value.code in ("STEP_UNDERFLOW", "INTEGRATION_FAILURE")
