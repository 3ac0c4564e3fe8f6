import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_params
from sairsnet.errors import ParameterError
from sairsnet.model import ModelParams
from sairsnet.numerics import spectral_abscissa
from sairsnet.reproduction import (
    dfe_susceptible,
    left_perron_vector,
    next_gen_decomposition,
    r0,
    r0_bounds,
    r0_report,
)
from sairsnet.simulate import ScenarioConfig, TopologySpec
from sairsnet.topology import make_topology

# Spectral radius of F V^-1 built with a generic inverse and a dense
# eigensolver, with the default rates on the nine-community networks.
R0_ORACLE = {
    0.02: {"cycle_tree": 3.638987501467509, "star": 4.0978574592622365,
           "ring": 3.394776272596345, "line": 3.3117001840066322},
    0.04: {"cycle_tree": 4.364795375204664, "star": 4.915188436130283,
           "ring": 4.071875423729131, "line": 3.9722295395044016},
}


def _default(kind, gamma):
    return ScenarioConfig(TopologySpec(kind, 9), gamma=gamma).build_params()


@pytest.mark.parametrize("gamma", sorted(R0_ORACLE))
@pytest.mark.parametrize("kind", ["cycle_tree", "star", "ring", "line"])
def test_r0_frozen_oracle(kind, gamma):
    assert r0(_default(kind, gamma)) == pytest.approx(R0_ORACLE[gamma][kind], abs=1e-9)


def test_r0_published_values_need_gamma_004():
    published = {"cycle_tree": 4.37, "star": 4.91, "ring": 4.07, "line": 3.97}
    for kind, value in published.items():
        assert abs(r0(_default(kind, 0.04)) - value) <= 0.01
        assert abs(r0(_default(kind, 0.02)) - value) > 0.01


def test_single_group_closed_form():
    p = ModelParams([[0.8]], [[0.95]], 0.02, 0.01, 0.8, 0.02, 0.1, 0.51)
    s0 = (0.02 + 0.02) / (0.02 + 0.02 + 0.01)
    expected = s0 * (0.8 + 0.95 * 0.8 / (0.51 + 0.02)) / (0.8 + 0.1 + 0.02)
    assert r0(p) == pytest.approx(expected, rel=1e-13)


def test_dfe_susceptible_without_vaccination():
    p = ModelParams([[0.8]], [[0.95]], 0.02, 0.0, 0.8, 0.02, 0.1, 0.51)
    assert dfe_susceptible(p)[0] == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decomposition_blocks(seed):
    p = random_params(np.random.default_rng(seed))
    d = next_gen_decomposition(p)
    n = p.n
    assert np.allclose(d.V_inv, np.linalg.inv(d.V), atol=1e-12)
    m1 = d.F[:n, :n] @ d.V_inv[:n, :n] + d.F[:n, n:] @ d.V_inv[n:, :n]
    assert np.allclose(d.M1, m1, atol=1e-12)
    assert np.allclose(d.M, d.F @ np.linalg.inv(d.V), atol=1e-12)
    rho_dense = max(abs(np.linalg.eigvals(d.F @ np.linalg.inv(d.V))))
    assert d.r0 == pytest.approx(rho_dense, rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_threshold_sign_consistency(seed):
    p = random_params(np.random.default_rng(seed))
    d = next_gen_decomposition(p)
    if abs(d.r0 - 1) > 1e-6:
        assert np.sign(spectral_abscissa(d.F - d.V)) == np.sign(d.r0 - 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_left_perron_vector(seed):
    p = random_params(np.random.default_rng(seed))
    d = next_gen_decomposition(p)
    w = left_perron_vector(d)
    assert np.all(w > 0) and w.sum() == pytest.approx(1.0)
    assert np.abs(w @ d.M - d.r0 * w).max() <= 1e-10 * max(1.0, d.r0)


def test_left_perron_single_group():
    p = ModelParams([[0.8]], [[0.95]], 0.02, 0.01, 0.8, 0.02, 0.1, 0.51)
    d = next_gen_decomposition(p)
    w = left_perron_vector(d)
    assert w[1] == pytest.approx(w[0] * d.M2[0, 0] / d.r0, rel=1e-12)


def test_left_perron_symmetric_uniform():
    b = np.full((4, 4), 0.2) + np.eye(4) * 0.5
    p = ModelParams(b, b, 0.05, 0.0, 0.6, 0.1, 0.2, 0.3)
    w = left_perron_vector(next_gen_decomposition(p))
    assert np.allclose(w[:4], w[0], rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_r0_monotone_in_beta(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    ba = p.beta_A.copy()
    i, j = rng.integers(0, p.n, 2)
    ba[i, j] += rng.uniform(0.01, 1.0)
    assert r0(p.replace(beta_A=ba)) >= r0(p) - 1e-12


@pytest.mark.parametrize("kind", ["cycle_tree", "star", "ring", "line"])
def test_bounds_bracket_r0(kind):
    p = _default(kind, 0.02)
    lo, hi = r0_bounds(p, make_topology(kind, 9))
    assert lo <= r0(p) <= hi


def test_bounds_tight_for_uniform_rates():
    topo = make_topology("ring", 6)
    b = np.eye(6) + topo.adjacency
    p = ModelParams(b, b, 0.05, 0.02, 0.6, 0.1, 0.2, 0.3)
    lo, hi = r0_bounds(p, topo)
    assert lo == pytest.approx(r0(p), rel=1e-10) and hi == pytest.approx(r0(p), rel=1e-10)


def test_bounds_pattern_mismatch():
    p = _default("ring", 0.02)
    with pytest.raises(ParameterError) as exc:
        r0_bounds(p, make_topology("line", 9))
    assert exc.value.code == "PATTERN_MISMATCH"


def test_report_json_shape():
    rep = r0_report(_default("star", 0.04), make_topology("star", 9))
    assert set(rep) == {"r0", "bounds", "rho_abar", "rho_a"}
    assert rep["rho_abar"] == pytest.approx(3.8284, abs=5e-5)
