"""Next-generation matrix and the basic reproduction number."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PreconditionError
from .model import ModelParams
from .numerics import power_iteration
from .topology import NetworkTopology, adjacency_spectral_radius


@dataclass(frozen=True, eq=False)
class NextGenDecomposition:
    """Next-generation data at the disease-free equilibrium.

    Infected coordinates are ordered ``(A_1..A_n, I_1..I_n)``. ``M1`` and
    ``M2`` are the upper-left and upper-right ``n x n`` blocks of ``M``; the
    lower block rows of ``M`` are zero.
    """

    F: np.ndarray
    V: np.ndarray
    V_inv: np.ndarray
    M: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    S0: np.ndarray
    r0: float
    right_perron: np.ndarray
    left_perron_omega: np.ndarray


def dfe_susceptible(params: ModelParams) -> np.ndarray:
    """Susceptible fractions at the disease-free equilibrium."""
    return (params.gamma + params.mu) / (params.gamma + params.mu + params.nu)


def _v_inverse(params: ModelParams) -> np.ndarray:
    n = params.n
    out_a = params.alpha + params.delta_A + params.mu
    out_i = params.delta_I + params.mu
    v_inv = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    v_inv[idx, idx] = 1.0 / out_a
    v_inv[n + idx, idx] = params.alpha / (out_a * out_i)
    v_inv[n + idx, n + idx] = 1.0 / out_i
    return v_inv


def next_gen_decomposition(params: ModelParams) -> NextGenDecomposition:
    n = params.n
    s0 = dfe_susceptible(params)
    F = np.zeros((2 * n, 2 * n))
    F[:n, :n] = params.beta_A * s0[:, None]
    F[:n, n:] = params.beta_I * s0[:, None]
    idx = np.arange(n)
    V = np.zeros((2 * n, 2 * n))
    V[idx, idx] = params.alpha + params.delta_A + params.mu
    V[n + idx, idx] = -params.alpha
    V[n + idx, n + idx] = params.delta_I + params.mu
    V_inv = _v_inverse(params)
    M = F @ V_inv
    M[n:] = 0.0
    M1 = M[:n, :n].copy()
    M2 = M[:n, n:].copy()
    perron = power_iteration(M1)
    r0 = perron.rho
    omega = _left_omega(M1, M2, r0)
    return NextGenDecomposition(F, V, V_inv, M, M1, M2, s0, r0, perron.right_vector, omega)


def _left_omega(M1, M2, r0) -> np.ndarray:
    # Left Perron vector of M1 is the right Perron vector of its transpose;
    # the I-block then follows from omega_1 M2 = r0 omega_2.
    w1 = power_iteration(M1.T).right_vector
    w2 = w1 @ M2 / r0
    omega = np.concatenate([w1, w2])
    return omega / omega.sum()


def left_perron_vector(decomp: NextGenDecomposition) -> np.ndarray:
    """Positive left eigenvector of ``M`` for ``r0``, normalized to unit sum."""
    if not decomp.r0 > 0:
        raise PreconditionError("left Perron vector needs r0 > 0")
    omega = decomp.left_perron_omega
    if np.any(omega <= 0):
        raise PreconditionError("left Perron vector has a non-positive component")
    return omega.copy()


def r0(params: ModelParams) -> float:
    """Basic reproduction number, the spectral radius of ``M1``."""
    return next_gen_decomposition(params).r0


def r0_bounds(params: ModelParams, topo: NetworkTopology) -> tuple[float, float]:
    """Topology bracket ``min(M1) rho(A+I) <= r0 <= max(M1) rho(A+I)``.

    The min and max run over the nonzero pattern of ``M1``, which must be the
    pattern of ``A + I``.
    """
    if topo.n != params.n:
        raise ParameterError(f"topology has {topo.n} nodes but params have {params.n} groups")
    decomp = next_gen_decomposition(params)
    pattern = topo.adjacency_bar != 0
    if not np.array_equal(decomp.M1 != 0, pattern):
        raise ParameterError("transmission pattern does not match the topology", code="PATTERN_MISMATCH")
    entries = decomp.M1[pattern]
    rho_bar = adjacency_spectral_radius(topo, include_self_loops=True)
    lower, upper = float(entries.min()) * rho_bar, float(entries.max()) * rho_bar
    assert lower <= upper
    return lower, upper


def r0_report(params: ModelParams, topo: NetworkTopology | None = None) -> dict:
    """JSON-ready r0 summary; the bracket is attached whenever a topology is."""
    decomp = next_gen_decomposition(params)
    out = {"r0": decomp.r0}
    if topo is not None:
        lo, hi = r0_bounds(params, topo)
        out["bounds"] = [lo, hi]
        out["rho_abar"] = adjacency_spectral_radius(topo, include_self_loops=True)
        out["rho_a"] = adjacency_spectral_radius(topo, include_self_loops=False)
    return out
