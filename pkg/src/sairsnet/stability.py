"""Stability classification, sufficient-condition predicates and Lyapunov
certificates.

Every global-stability claim surfaced here comes from a proven sufficient
condition; the spectral abscissa at the endemic equilibrium is reported for
information only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .equilibria import EquilibriumKind, EquilibriumReport, dfe, solve_endemic
from .errors import PreconditionError, StateError
from .model import ModelParams, StateVector, _jacobian, reduced_field
from .numerics import Trajectory, positive_balance_vector, spectral_abscissa
from .reproduction import next_gen_decomposition
from .topology import is_strongly_connected

BOUNDARY_TOL = 1e-9
PROPORTIONALITY_TOL = 1e-12
DELTA_TOL = 1e-12


class Regime(str, Enum):
    DFE_GAS = "DFE_GAS"
    DFE_GAS_BOUNDARY_NU0 = "DFE_GAS_BOUNDARY_NU0"
    ENDEMIC = "ENDEMIC"
    # r0 == 1 with vaccination: none of the available results applies.
    THRESHOLD_UNRESOLVED = "THRESHOLD_UNRESOLVED"


class Variant(str, Enum):
    DFE_Q = "DFE_Q"
    SAIR_V = "SAIR_V"
    SAIRS_DELTA_EQ_VW = "SAIRS_DELTA_EQ_VW"


@dataclass
class PredicateReport:
    name: str
    passed: bool
    reasons: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "sufficient_only": True,
                "reasons": self.reasons, "details": self.details}


@dataclass
class StabilityVerdict:
    r0: float
    regime: Regime
    dfe_spectral_abscissa: float
    ee_spectral_abscissa: float | None = None
    predicates: list[PredicateReport] = field(default_factory=list)
    endemic_gas: str | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "regime": self.regime.value,
            "dfe_spectral_abscissa": self.dfe_spectral_abscissa,
            "ee_spectral_abscissa": self.ee_spectral_abscissa,
            "endemic_gas": self.endemic_gas,
            "predicates": [p.to_dict() for p in self.predicates],
            "notes": self.notes,
        }


def _abscissa_at(params: ModelParams, state: StateVector) -> float:
    st = state.to_reduced()
    return spectral_abscissa(_jacobian(params, st.S, st.A, st.I))


def classify(params: ModelParams) -> StabilityVerdict:
    """Regime from r0 plus linearization data at the equilibria."""
    r = next_gen_decomposition(params).r0
    no_vaccination = bool(np.all(params.nu == 0))
    if no_vaccination and abs(r - 1.0) <= BOUNDARY_TOL:
        regime = Regime.DFE_GAS_BOUNDARY_NU0
    elif r < 1.0:
        regime = Regime.DFE_GAS
    elif r > 1.0:
        regime = Regime.ENDEMIC
    else:
        regime = Regime.THRESHOLD_UNRESOLVED
    verdict = StabilityVerdict(r, regime, _abscissa_at(params, dfe(params).state))
    verdict.predicates.append(local_stability_conditions(params))
    if regime is Regime.DFE_GAS:
        verdict.notes.append("disease-free equilibrium globally asymptotically stable (r0 < 1)")
    elif regime is Regime.DFE_GAS_BOUNDARY_NU0:
        verdict.notes.append("no vaccination and r0 = 1: disease-free equilibrium globally "
                             "asymptotically stable")
    elif regime is Regime.THRESHOLD_UNRESOLVED:
        verdict.notes.append("r0 = 1 with vaccination: no stability result available")
    if r > 1.0:
        ee = solve_endemic(params)
        verdict.ee_spectral_abscissa = _abscissa_at(params, ee.state)
        verdict.notes.append("ee_spectral_abscissa is informational; it is not used for GAS claims")
        if params.gamma == 0:
            verdict.endemic_gas = "GAS_SAIR (sufficient: gamma = 0 and r0 > 1)"
        elif abs(params.delta_A - params.delta_I) <= DELTA_TOL:
            report = gas_endemic_conditions(params, ee)
            verdict.predicates.append(report)
            verdict.endemic_gas = ("GAS_DELTA_EQUAL (sufficient conditions hold)" if report.passed
                                   else "UNPROVEN_REGIME")
        else:
            verdict.endemic_gas = "UNPROVEN_REGIME"
        if verdict.endemic_gas == "UNPROVEN_REGIME":
            verdict.notes.append("global stability of the endemic equilibrium is not covered by "
                                 "a proven condition here; only trajectory evidence is available")
    return verdict


def local_stability_conditions(params: ModelParams) -> PredicateReport:
    """Sufficient conditions for local stability of the endemic equilibrium.

    (a) ``beta_I[:, j] = h_j beta_A[:, j]`` for every column ``j``;
    (b) ``delta_A > nu_i`` and ``delta_I > nu_i``;
    (c) ``(delta_I - nu_i) alpha <= 2 q_i sqrt((mu_i + nu_i + gamma)(delta_I + nu_i)) + q_i^2``
        with ``q_i = mu_i + 2 nu_i + gamma + delta_I``.

    Columns that are zero in both matrices are skipped; a column where only
    one matrix has a zero in some row fails (a).
    """
    p = params
    reasons = []
    h = []
    proportional = True
    for j in range(p.n):
        ca, ci = p.beta_A[:, j], p.beta_I[:, j]
        if not ca.any() and not ci.any():
            h.append(None)
            continue
        if not np.array_equal(ca != 0, ci != 0):
            proportional = False
            h.append(None)
            continue
        ratios = ci[ca != 0] / ca[ca != 0]
        if np.ptp(ratios) > PROPORTIONALITY_TOL * abs(ratios).max():
            proportional = False
            h.append(None)
        else:
            h.append(float(ratios.mean()))
    if not proportional:
        reasons.append("NO_COLUMN_PROPORTIONALITY")

    margin_a = p.delta_A - p.nu
    margin_i = p.delta_I - p.nu
    if np.any(margin_a <= 0):
        reasons.append("DELTA_A_NOT_ABOVE_NU")
    if np.any(margin_i <= 0):
        reasons.append("DELTA_I_NOT_ABOVE_NU")

    q = p.mu + 2 * p.nu + p.gamma + p.delta_I
    lhs = (p.delta_I - p.nu) * p.alpha
    rhs = 2 * q * np.sqrt((p.mu + p.nu + p.gamma) * (p.delta_I + p.nu)) + q ** 2
    if np.any(lhs > rhs):
        reasons.append("CHARACTERISTIC_INEQUALITY")

    return PredicateReport(
        "local_stability_endemic",
        not reasons,
        reasons,
        {
            "h": h if proportional else None,
            "delta_A_minus_nu": margin_a.tolist(),
            "delta_I_minus_nu": margin_i.tolist(),
            "inequality_lhs": np.broadcast_to(lhs, (p.n,)).tolist(),
            "inequality_rhs": rhs.tolist(),
        },
    )


def gas_endemic_conditions(params: ModelParams, ee: EquilibriumReport) -> PredicateReport:
    """Sufficient conditions for global stability when ``delta_A = delta_I``:
    ``(mu_i + nu_i) S*_i >= gamma R*_i`` and ``delta > nu_i`` for every group."""
    p = params
    if abs(p.delta_A - p.delta_I) > DELTA_TOL:
        raise PreconditionError("delta_A and delta_I differ", code="DELTA_MISMATCH")
    if ee.kind is not EquilibriumKind.ENDEMIC or not ee.converged:
        raise PreconditionError("needs a converged endemic equilibrium")
    st = ee.state
    sr_margin = (p.mu + p.nu) * st.S - p.gamma * st.R
    delta_margin = p.delta_A - p.nu
    reasons = []
    if np.any(sr_margin < 0):
        reasons.append("S_R_CONDITION")
    if np.any(delta_margin <= 0):
        reasons.append("DELTA_NOT_ABOVE_NU")
    return PredicateReport(
        "gas_endemic_delta_equal",
        not reasons,
        reasons,
        {"s_r_margin": sr_margin.tolist(), "delta_minus_nu": delta_margin.tolist()},
    )


# ---------------------------------------------------------------------------
# Lyapunov certificates

def lyapunov_g(x):
    """``x - 1 - ln x``: nonnegative on ``x > 0``, zero only at ``x = 1``."""
    x = np.asarray(x, dtype=float)
    return x - 1.0 - np.log(x)


@dataclass(frozen=True, eq=False)
class LyapunovCertificate:
    variant: Variant
    coefficients: np.ndarray
    equilibrium: EquilibriumReport
    params: ModelParams
    weights: np.ndarray | None = None
    v_inv: np.ndarray | None = None

    @property
    def balance_residual(self) -> float:
        """Relative residual of the flow balance (endemic variants)."""
        if self.weights is None:
            return 0.0
        w, c = self.weights, self.coefficients
        out = w.sum(axis=1) * c
        return float(np.abs(out - c @ w).max() / np.abs(out).max())


def certificate_weights(params: ModelParams, ee: EquilibriumReport) -> np.ndarray:
    """Weight matrix of the certificate digraph on ``2n`` nodes.

    Node ``i`` stands for ``A_i`` and node ``n + i`` for ``I_i``:
    ``W[i, j] = beta_A[i, j] A*_j S*_i``, ``W[i, n+j] = beta_I[i, j] I*_j S*_i``
    and ``W[n+i, i] = alpha A*_i``.
    """
    n = params.n
    st = ee.state
    w = np.zeros((2 * n, 2 * n))
    w[:n, :n] = params.beta_A * st.A[None, :] * st.S[:, None]
    w[:n, n:] = params.beta_I * st.I[None, :] * st.S[:, None]
    w[n + np.arange(n), np.arange(n)] = params.alpha * st.A
    return w


def build_certificate(params: ModelParams, variant, equilibrium: EquilibriumReport | None = None
                      ) -> LyapunovCertificate:
    variant = Variant(variant)
    if variant is Variant.DFE_Q:
        if np.any(params.nu != 0):
            raise PreconditionError("DFE_Q needs nu = 0 in every group")
        decomp = next_gen_decomposition(params)
        eq = equilibrium or dfe(params)
        omega = decomp.left_perron_omega
        if np.any(omega <= 0):
            raise PreconditionError("left Perron vector is not positive")
        return LyapunovCertificate(variant, omega, eq, params, v_inv=decomp.V_inv)

    if variant is Variant.SAIR_V and params.gamma != 0:
        raise PreconditionError("SAIR_V needs gamma = 0")
    eq = equilibrium or solve_endemic(params)
    if eq.kind is not EquilibriumKind.ENDEMIC:
        raise PreconditionError(f"{variant.value} needs the endemic equilibrium")
    if variant is Variant.SAIRS_DELTA_EQ_VW:
        report = gas_endemic_conditions(params, eq)
        if not report.passed:
            raise PreconditionError(
                "conditions for the delta_A = delta_I certificate fail: " + ", ".join(report.reasons)
            )
    w = certificate_weights(params, eq)
    if not is_strongly_connected(w):
        raise PreconditionError("certificate digraph is not strongly connected",
                                code="IRREDUCIBILITY")
    c = positive_balance_vector(w)
    return LyapunovCertificate(variant, c, eq, params, weights=w)


def _as_reduced_rows(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.to_reduced().values[None, :]
    arr = np.asarray(state, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def lyapunov_values(cert: LyapunovCertificate, states) -> np.ndarray:
    """Certificate value for each reduced-layout row of ``states``."""
    x = _as_reduced_rows(states)
    n = cert.params.n
    g = x.reshape(len(x), n, 3)
    S, A, I = g[:, :, 0], g[:, :, 1], g[:, :, 2]  # noqa: E741
    if cert.variant is Variant.DFE_Q:
        infected = np.concatenate([A, I], axis=1)
        return infected @ (cert.v_inv.T @ cert.coefficients)
    if np.any(S <= 0) or np.any(A <= 0) or np.any(I <= 0):
        raise StateError("endemic certificates need a strictly interior state")
    eq = cert.equilibrium.state
    c = cert.coefficients
    value = (
        (c[:n] * (eq.S * lyapunov_g(S / eq.S) + eq.A * lyapunov_g(A / eq.A))).sum(axis=1)
        + (c[n:] * eq.I * lyapunov_g(I / eq.I)).sum(axis=1)
    )
    if cert.variant is Variant.SAIRS_DELTA_EQ_VW:
        value = value + (c[:n] * _w_terms(cert, 1.0 - S - A - I)).sum(axis=1)
    return value


def _w_weight(cert):
    p = cert.params
    return p.gamma / (cert.equilibrium.state.S * (p.delta_A - p.nu))


def _w_terms(cert, R):
    return _w_weight(cert) * (R - cert.equilibrium.state.R) ** 2 / 2.0


def evaluate_lyapunov(cert: LyapunovCertificate, state) -> float:
    return float(lyapunov_values(cert, state)[0])


def lyapunov_derivative(cert: LyapunovCertificate, states) -> np.ndarray:
    """Orbital derivative ``grad V . f`` at each reduced-layout row."""
    x = _as_reduced_rows(states)
    p = cert.params
    n = p.n
    f = reduced_field(p)
    fx = np.array([f(0.0, row) for row in x]).reshape(len(x), n, 3)
    g = x.reshape(len(x), n, 3)
    S, A, I = g[:, :, 0], g[:, :, 1], g[:, :, 2]  # noqa: E741
    if cert.variant is Variant.DFE_Q:
        grad = cert.v_inv.T @ cert.coefficients
        return fx[:, :, 1] @ grad[:n] + fx[:, :, 2] @ grad[n:]
    eq = cert.equilibrium.state
    c = cert.coefficients
    dS = c[:n] * (1.0 - eq.S / S)
    dA = c[:n] * (1.0 - eq.A / A)
    dI = c[n:] * (1.0 - eq.I / I)
    if cert.variant is Variant.SAIRS_DELTA_EQ_VW:
        # W depends on R = 1 - S - A - I.
        dR = c[:n] * _w_weight(cert) * (1.0 - S - A - I - eq.R)
        dS, dA, dI = dS - dR, dA - dR, dI - dR
    return (dS * fx[:, :, 0] + dA * fx[:, :, 1] + dI * fx[:, :, 2]).sum(axis=1)


def lyapunov_decrease(cert: LyapunovCertificate, traj: Trajectory, slack: float = 1e-9) -> dict:
    """Sampled check that the certificate does not increase along ``traj``.

    Reports the largest increase between consecutive samples, the largest
    finite-difference slope and the largest orbital derivative; passes when
    all three are at most ``slack``.
    """
    values = lyapunov_values(cert, traj.values)
    diffs = np.diff(values)
    slopes = diffs / np.diff(traj.times)
    deriv = lyapunov_derivative(cert, traj.values)
    out = {
        "max_increase": float(diffs.max(initial=-np.inf)),
        "max_slope": float(slopes.max(initial=-np.inf)),
        "max_derivative": float(deriv.max()),
        "initial": float(values[0]),
        "final": float(values[-1]),
    }
    out["passed"] = bool(max(out["max_increase"], out["max_slope"], out["max_derivative"]) <= slack)
    return out
