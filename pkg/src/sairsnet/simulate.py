"""Scenario runs, threshold-crossing events and persistence margins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .model import ModelParams, clamp_reduced, reduced_field
from .numerics import IntegratorOptions, Trajectory, integrate
from .topology import Kind, NetworkTopology, build_beta, make_topology

# Default parameter values used for the network experiments (time unit: days).
DEFAULT_RATES = {
    "beta_A_intra": 0.8,
    "beta_A_inter": 0.4,
    "beta_I_intra": 0.95,
    "beta_I_inter": 0.475,
    "mu": 1.0 / (70 * 365),
    "nu": 0.01,
    "gamma": 0.02,
    "delta_A": 0.1,
    "delta_I": 0.51,
    "alpha": 0.8,
}
# The immunity-loss rate that reproduces the published r0 values.
GAMMA_CALIBRATED = 0.04

DEFAULT_SEED_FRACTION = 0.01
DEFAULT_THRESHOLD = 1e-5
DEFAULT_SAMPLE_STEP = 0.005
DEFAULT_T_END = 60.0
EVENT_TIME_TOL = 1e-6


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    n: int
    edges: tuple[tuple[int, int], ...] | None = None

    def build(self) -> NetworkTopology:
        if Kind(self.kind) is Kind.CUSTOM:
            if self.edges is None:
                raise ConfigError("custom topology needs an edge list", field="topology.edges")
            return NetworkTopology.from_edges(self.n, self.edges)
        return make_topology(self.kind, self.n)


@dataclass(frozen=True)
class RateSpec:
    """Either an ``intra``/``inter`` pair placed on the topology or an
    explicit matrix."""

    intra: float | None = None
    inter: float | None = None
    matrix: tuple[tuple[float, ...], ...] | None = None

    def build(self, topo: NetworkTopology) -> np.ndarray:
        if self.matrix is not None:
            return np.array(self.matrix, dtype=float)
        return build_beta(topo, self.intra, self.inter)


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec
    beta_A: RateSpec = RateSpec(DEFAULT_RATES["beta_A_intra"], DEFAULT_RATES["beta_A_inter"])
    beta_I: RateSpec = RateSpec(DEFAULT_RATES["beta_I_intra"], DEFAULT_RATES["beta_I_inter"])
    alpha: float = DEFAULT_RATES["alpha"]
    gamma: float = DEFAULT_RATES["gamma"]
    delta_A: float = DEFAULT_RATES["delta_A"]
    delta_I: float = DEFAULT_RATES["delta_I"]
    mu: float | tuple[float, ...] = DEFAULT_RATES["mu"]
    nu: float | tuple[float, ...] = DEFAULT_RATES["nu"]
    seed_group: int = 1
    seed_fraction: float = DEFAULT_SEED_FRACTION
    t_end: float = DEFAULT_T_END
    threshold: float = DEFAULT_THRESHOLD
    sample_step: float = DEFAULT_SAMPLE_STEP
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)

    def __post_init__(self):
        if not 0 <= self.seed_fraction < 1:
            raise ConfigError("seed_fraction must lie in [0, 1)", field="initial.seed_fraction")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive", field="t_end")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive", field="threshold")
        if not self.sample_step > 0:
            raise ConfigError("sample_step must be positive", field="sample_step")
        if not 1 <= self.seed_group <= self.topology.n:
            raise ConfigError(f"seed_group must be in 1..{self.topology.n}",
                              field="initial.seed_group")

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def build_topology(self) -> NetworkTopology:
        return self.topology.build()

    def build_params(self) -> ModelParams:
        topo = self.build_topology()
        return ModelParams(
            beta_A=self.beta_A.build(topo),
            beta_I=self.beta_I.build(topo),
            mu=np.array(self.mu, dtype=float),
            nu=np.array(self.nu, dtype=float),
            alpha=self.alpha,
            gamma=self.gamma,
            delta_A=self.delta_A,
            delta_I=self.delta_I,
        )

    def initial_state(self) -> np.ndarray:
        """Everybody susceptible except an asymptomatic fraction in the seed group."""
        n = self.topology.n
        x = np.zeros((n, 3))
        x[:, 0] = 1.0
        x[self.seed_group - 1, 0] = 1.0 - self.seed_fraction
        x[self.seed_group - 1, 1] = self.seed_fraction
        return x.ravel()

    def integrator_options(self) -> IntegratorOptions:
        return replace(self.integrator, sample_step=self.sample_step)

    def to_dict(self) -> dict:
        """JSON document in the config-schema layout, with every field explicit."""

        def rate(spec: RateSpec) -> dict:
            if spec.matrix is not None:
                return {"matrix": [list(r) for r in spec.matrix]}
            return {"intra": spec.intra, "inter": spec.inter}

        def vec(v):
            return list(v) if isinstance(v, tuple) else v

        topo = {"kind": self.topology.kind, "n": self.topology.n}
        if self.topology.edges is not None:
            topo["edges"] = [list(e) for e in self.topology.edges]
        opts = self.integrator
        return {
            "topology": topo,
            "rates": {
                "beta_A": rate(self.beta_A), "beta_I": rate(self.beta_I),
                "alpha": self.alpha, "gamma": self.gamma,
                "delta_A": self.delta_A, "delta_I": self.delta_I,
                "mu": vec(self.mu), "nu": vec(self.nu),
            },
            "initial": {"seed_group": self.seed_group, "seed_fraction": self.seed_fraction},
            "t_end": self.t_end,
            "threshold": self.threshold,
            "sample_step": self.sample_step,
            "integrator": {
                "rtol": opts.rtol, "atol": opts.atol,
                "max_step": None if math.isinf(opts.max_step) else opts.max_step,
                "fixed_step": opts.fixed_step, "first_step": opts.first_step,
                "max_steps": opts.max_steps,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        """Inverse of :meth:`to_dict`; missing fields take their defaults.
        No schema validation happens here."""

        def rate(d, default: RateSpec) -> RateSpec:
            if d is None:
                return default
            if "matrix" in d:
                return RateSpec(matrix=tuple(tuple(float(x) for x in r) for r in d["matrix"]))
            return RateSpec(float(d["intra"]), float(d["inter"]))

        def vec(v, default):
            if v is None:
                return default
            return tuple(float(x) for x in v) if isinstance(v, list) else float(v)

        t = doc["topology"]
        edges = t.get("edges")
        topo = TopologySpec(t["kind"], int(t["n"]),
                            None if edges is None else tuple(tuple(e) for e in edges))
        rates = doc.get("rates", {})
        init = doc.get("initial", {})
        opts = {k: v for k, v in doc.get("integrator", {}).items() if v is not None}
        base = cls(topology=topo)
        return cls(
            topology=topo,
            beta_A=rate(rates.get("beta_A"), base.beta_A),
            beta_I=rate(rates.get("beta_I"), base.beta_I),
            alpha=float(rates.get("alpha", base.alpha)),
            gamma=float(rates.get("gamma", base.gamma)),
            delta_A=float(rates.get("delta_A", base.delta_A)),
            delta_I=float(rates.get("delta_I", base.delta_I)),
            mu=vec(rates.get("mu"), base.mu),
            nu=vec(rates.get("nu"), base.nu),
            seed_group=int(init.get("seed_group", base.seed_group)),
            seed_fraction=float(init.get("seed_fraction", base.seed_fraction)),
            t_end=float(doc.get("t_end", base.t_end)),
            threshold=float(doc.get("threshold", base.threshold)),
            sample_step=float(doc.get("sample_step", base.sample_step)),
            integrator=IntegratorOptions(**opts),
        )


@dataclass(frozen=True)
class EventLog:
    """First time each group's ``A`` and ``I`` exceed the threshold (None if never)."""

    threshold: float
    A: tuple[float | None, ...]
    I: tuple[float | None, ...]  # noqa: E741

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "A": list(self.A), "I": list(self.I)}


def simulate_params(params: ModelParams, x0, t_end: float, opts: IntegratorOptions | None = None
                    ) -> Trajectory:
    """Integrate the reduced system from ``x0`` (grouped ``S, A, I`` layout)."""
    return integrate(reduced_field(params), x0, (0.0, t_end), opts,
                     project=clamp_reduced, n_groups=params.n)


def run_scenario(config: ScenarioConfig) -> tuple[Trajectory, EventLog]:
    params = config.build_params()
    traj = simulate_params(params, config.initial_state(), config.t_end,
                           config.integrator_options())
    return traj, detect_threshold_crossings(traj, config.threshold)


def _first_crossing(traj: Trajectory, column: int, series: np.ndarray, threshold: float):
    above = np.flatnonzero(series > threshold)
    if above.size == 0:
        return None
    k = int(above[0])
    if k == 0:
        return float(traj.times[0])
    lo, hi = float(traj.times[k - 1]), float(traj.times[k])
    while hi - lo > 0.1 * EVENT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        if traj.evaluate(mid)[column] > threshold:
            hi = mid
        else:
            lo = mid
    return hi


def detect_threshold_crossings(traj: Trajectory, threshold: float = DEFAULT_THRESHOLD) -> EventLog:
    """First up-crossing of ``threshold`` per group for ``A`` and ``I``,
    refined by bisection on the dense interpolant."""
    if not threshold > 0:
        raise ConfigError("threshold must be positive", field="threshold")
    n = traj.n_groups
    a_times = tuple(_first_crossing(traj, 3 * i + 1, traj.A[:, i], threshold) for i in range(n))
    i_times = tuple(_first_crossing(traj, 3 * i + 2, traj.I[:, i], threshold) for i in range(n))
    return EventLog(threshold, a_times, i_times)


def persistence_margin(traj: Trajectory, burn_in: float) -> float:
    """Smallest ``S_i``, ``A_i`` or ``I_i`` over all groups and all samples
    at or after ``burn_in``."""
    if not burn_in < traj.times[-1]:
        raise ConfigError("burn_in must be before the end of the trajectory", field="burn_in")
    mask = traj.times >= burn_in
    g = traj.values[mask]
    return float(g.min()) if g.size else math.nan
