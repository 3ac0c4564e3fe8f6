import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from conftest import random_params
from sairsnet.equilibria import (
    FixedPointMap,
    back_substitute,
    dfe,
    endemic_map,
    equilibrium_residual,
    iterate_endemic_map,
    solve_endemic,
)
from sairsnet.errors import EquilibriumError
from sairsnet.model import ModelParams
from sairsnet.reproduction import r0
from sairsnet.simulate import ScenarioConfig, TopologySpec

# Ring of nine with default rates, solved on the full 4n system with
# scipy's fsolve; all groups coincide by symmetry.
RING_EE = {"S": 0.1965080828989336, "A": 0.014858174738215914,
           "I": 0.02330515225792374, "R": 0.7653285901048721}


def test_ring_endemic_frozen_oracle():
    p = ScenarioConfig(TopologySpec("ring", 9)).build_params()
    ee = solve_endemic(p)
    for name, value in RING_EE.items():
        assert np.allclose(getattr(ee.state, name), value, atol=1e-10)
    assert ee.residual < 1e-10 and ee.converged


def test_single_group_scalar_oracle():
    p = ModelParams([[0.8]], [[0.95]], 0.02, 0.01, 0.8, 0.02, 0.1, 0.51)
    K = 0.8 / 0.53

    def excess(a):
        S = 0.92 * a / ((0.8 + 0.95 * K) * a)
        R = 1 - S - a - K * a
        return 0.02 - (0.8 + 0.95 * K) * a * S - 0.03 * S + 0.02 * R

    a_star = brentq(excess, 1e-9, 0.5)
    ee = solve_endemic(p)
    assert ee.state.A[0] == pytest.approx(a_star, abs=1e-12)
    assert ee.state.I[0] == pytest.approx(K * a_star, abs=1e-12)


def test_no_endemic_below_threshold(rng):
    p = random_params(rng, r0_target=0.8)
    with pytest.raises(EquilibriumError) as exc:
        solve_endemic(p)
    assert exc.value.code == "R0_NOT_ABOVE_ONE"


def test_near_threshold_warns(rng):
    p = random_params(rng, n=2, r0_target=1.0 + 1e-7)
    with pytest.warns(RuntimeWarning):
        ee = solve_endemic(p)
    assert ee.residual < 1e-10 and np.all(ee.state.A > 0)


def test_dfe_state(rng):
    p = random_params(rng)
    d = dfe(p)
    assert np.all(d.state.A == 0) and np.all(d.state.I == 0)
    assert d.residual < 1e-15
    assert np.allclose(d.state.S, (p.gamma + p.mu) / (p.gamma + p.mu + p.nu))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.2, 6.0))
def test_endemic_properties(seed, target):
    rng = np.random.default_rng(seed)
    p = random_params(rng, r0_target=target)
    ee = solve_endemic(p)
    st_ = ee.state
    assert ee.residual < 1e-10
    assert np.all(st_.A > 0) and np.all(st_.I > 0) and np.all(st_.S > 0) and np.all(st_.R >= 0)
    assert np.all(st_.A < (p.delta_I + p.mu) / p.alpha)
    assert np.allclose(st_.S + st_.A + st_.I + st_.R, 1.0)
    assert np.allclose(st_.I, p.alpha / (p.delta_I + p.mu) * st_.A)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixed_point_unique_from_random_seeds(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, r0_target=rng.uniform(1.3, 5.0))
    fmap = FixedPointMap.from_params(p)
    ref = solve_endemic(p).state.A
    for _ in range(5):
        y0 = rng.uniform(1e-3, 1.0, p.n) * fmap.upper_seed()
        y, _, ok = iterate_endemic_map(fmap, y0)
        assert ok
        assert np.allclose(y, ref, atol=1e-10)


def test_iterates_decrease_from_upper_seed(rng):
    p = random_params(rng, n=5, r0_target=3.0)
    fmap = FixedPointMap.from_params(p)
    _, _, ok, history = iterate_endemic_map(fmap, fmap.upper_seed(), record=True)
    assert ok
    steps = np.diff(np.array(history), axis=0)
    assert np.all(steps <= 1e-15)


def test_map_zero_is_fixed(rng):
    fmap = FixedPointMap.from_params(random_params(rng))
    assert np.all(endemic_map(fmap, np.zeros(fmap.K.size)) == 0)


def test_back_substitution_consistent(rng):
    p = random_params(rng, n=3, r0_target=2.5)
    ee = solve_endemic(p)
    again = back_substitute(p, ee.state.A)
    assert equilibrium_residual(p, again) < 1e-10


def test_report_serializes(rng):
    p = random_params(rng, n=2, r0_target=2.0)
    doc = solve_endemic(p).to_dict()
    assert doc["kind"] == "ENDEMIC" and len(doc["A"]) == 2
    assert r0(p) == pytest.approx(2.0)
