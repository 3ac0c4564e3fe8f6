"""Published reference values for the four 9-community networks, seed-fraction
calibration against them, and delta reports.

The published r0 values and per-community peak tables are stored in
``data/reference_targets.json``. The published tables were produced from an
unstated seed fraction and match an immunity-loss rate of 0.04 rather than
the default 0.02, so both rates are available as *gamma variants* and the
seed fraction is fitted.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.optimize import minimize_scalar

from .metrics import peak_summary
from .numerics import IntegratorOptions
from .reproduction import r0 as compute_r0
from .simulate import GAMMA_CALIBRATED, DEFAULT_RATES, ScenarioConfig, TopologySpec, run_scenario

NETWORKS = ("cycle_tree", "star", "ring", "line")
GAMMA_VARIANTS = {"paper": DEFAULT_RATES["gamma"], "calibrated": GAMMA_CALIBRATED}
N_COMMUNITIES = 9
CALIBRATION_T_END = 25.0
SEED_GRID = tuple(np.geomspace(1e-3, 0.3, 16))
# Calibration demands this much separation for every strict published
# ordering, so the chosen seed is not on the edge of an ordering flip.
ORDER_MARGIN = 0.02
PENALTY = 1.0


@lru_cache(maxsize=1)
def load_targets() -> dict:
    text = resources.files("sairsnet").joinpath("data/reference_targets.json").read_text()
    return json.loads(text)


def scenario(network: str, gamma_variant: str, seed_fraction: float,
             t_end: float = CALIBRATION_T_END, fixed_step: float | None = None) -> ScenarioConfig:
    return ScenarioConfig(
        topology=TopologySpec(network, N_COMMUNITIES),
        gamma=GAMMA_VARIANTS[gamma_variant],
        seed_fraction=seed_fraction,
        t_end=t_end,
        integrator=IntegratorOptions(fixed_step=fixed_step),
    )


def orderings_match(times, target_times, margin: float = 0.0) -> bool:
    """Every strict ordering ``target[i] < target[j]`` must hold as
    ``times[i] + margin < times[j]``. Tied targets impose nothing."""
    for i, j in itertools.permutations(range(len(times)), 2):
        if target_times[i] < target_times[j] and not times[i] + margin < times[j]:
            return False
    return True


@dataclass(frozen=True)
class CalibrationPoint:
    seed_fraction: float
    worst_delta: float
    orderings_ok: bool

    @property
    def objective(self) -> float:
        return self.worst_delta + (0.0 if self.orderings_ok else PENALTY)


@dataclass(frozen=True)
class CalibrationResult:
    gamma_variant: str
    gamma: float
    seed_fraction: float
    worst_delta: float
    orderings_ok: bool
    scanned: tuple[CalibrationPoint, ...]

    def to_dict(self) -> dict:
        return {
            "gamma_variant": self.gamma_variant,
            "gamma": self.gamma,
            "seed_fraction": self.seed_fraction,
            "worst_delta": self.worst_delta,
            "orderings_ok": self.orderings_ok,
        }


def evaluate_seed(gamma_variant: str, seed_fraction: float, margin: float = ORDER_MARGIN
                  ) -> CalibrationPoint:
    """Worst I-peak magnitude delta over all networks, and whether all strict
    published peak-time orderings hold."""
    targets = load_targets()["tables"]
    worst, ok = 0.0, True
    for net in NETWORKS:
        traj, events = run_scenario(scenario(net, gamma_variant, seed_fraction))
        summ = peak_summary(traj, events)
        mags = np.array([s.I_peak.magnitude for s in summ])
        times = [s.I_peak.time for s in summ]
        ref = targets[net]["I"]
        worst = max(worst, float(np.abs(mags - ref["peak_magnitude"]).max()))
        ok = ok and orderings_match(times, ref["peak_time"], margin)
    return CalibrationPoint(float(seed_fraction), worst, ok)


def calibrate_seed(gamma_variant: str, grid=SEED_GRID) -> CalibrationResult:
    """Grid scan over the seed fraction, then bounded refinement between the
    neighbors of the best grid point."""
    scanned = [evaluate_seed(gamma_variant, a) for a in grid]
    k = int(np.argmin([p.objective for p in scanned]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    cache: dict[float, CalibrationPoint] = {}

    def objective(a: float) -> float:
        cache[a] = evaluate_seed(gamma_variant, a)
        return cache[a].objective

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-4})
    best = min([scanned[k], *cache.values()], key=lambda p: p.objective)
    assert res.fun >= best.objective
    return CalibrationResult(gamma_variant, GAMMA_VARIANTS[gamma_variant], best.seed_fraction,
                             best.worst_delta, best.orderings_ok,
                             tuple(scanned) + tuple(cache.values()))


def calibrate(variants=tuple(GAMMA_VARIANTS)) -> tuple[CalibrationResult, dict]:
    """Calibrate every gamma variant; the best is the one with the lowest
    objective."""
    results = {v: calibrate_seed(v) for v in variants}
    best = min(results.values(), key=lambda r: r.worst_delta + (0 if r.orderings_ok else PENALTY))
    return best, results


def compare_r0(network: str, params) -> dict:
    published = load_targets()["r0"][network]
    value = compute_r0(params)
    out = {"r0": value, "published": published, "delta": value - published,
           "match": abs(value - published) <= 0.01}
    if not out["match"]:
        out["note"] = ("printed value not reproduced with this immunity-loss rate; "
                       f"gamma = {params.gamma:g} gives {value:.4f}")
    return out


def compare_tables(network: str, summaries, kind: str = "I") -> dict:
    """Per-community deltas against the published table of ``kind``."""
    ref = load_targets()["tables"][network][kind]
    rows = []
    for s, start, tp, mag in zip(summaries, ref["start_time"], ref["peak_time"],
                                 ref["peak_magnitude"]):
        _, s_start, s_tp, s_mag = s.row(kind)
        rows.append({
            "community": s.group,
            "start_time": s_start, "start_time_published": start,
            "start_time_delta": None if s_start is None else s_start - start,
            "peak_time": s_tp, "peak_time_published": tp, "peak_time_delta": s_tp - tp,
            "peak_magnitude": s_mag, "peak_magnitude_published": mag,
            "peak_magnitude_delta": s_mag - mag,
        })
    times = [r["peak_time"] for r in rows]
    return {
        "kind": kind,
        "rows": rows,
        "max_abs_magnitude_delta": max(abs(r["peak_magnitude_delta"]) for r in rows),
        "orderings_match": orderings_match(times, ref["peak_time"]),
    }
