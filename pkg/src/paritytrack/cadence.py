"""Measurement-cadence trade-off between missed jumps and ancilla-induced dephasing.

Measuring every ``tau_M + tau_W`` microseconds, the encoded information decays at

    kappa_eff = [ (nbar kappa)^2 (tau_M + tau_W)^2 / 2 + P_C ] / (tau_M + tau_W)

where the first term is the chance of two photon jumps inside one interval and
``P_C`` the dephasing probability per measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import default_dim
from .trajectory import evolve_interval, sample_initial_n

__all__ = [
    "CadenceParams",
    "ValidationReport",
    "kappa_eff",
    "kappa_eff_at",
    "optimal_spacing",
    "improvement_factor",
    "p_c_from_t1",
    "numerical_optimum",
    "cadence_table",
    "double_jump_probability",
    "validate_against_simulation",
]


def p_c_from_t1(tau_M: float, T1: float) -> float:
    """Worst-case dephasing probability per measurement, ``tau_M / T1``."""
    if not 0.0 <= tau_M < T1:
        raise ValueError(f"need 0 <= tau_M < T1, got tau_M={tau_M}, T1={T1}")
    return tau_M / T1


@dataclass(frozen=True)
class CadenceParams:
    """Cadence inputs (us, 1/us).  ``P_C=None`` means ``tau_M / T1``.

    ``chi_qs`` (MHz, angular) is informational: ``pi / chi_qs`` is the
    parity-mapping part of ``tau_M``.
    """

    n_bar: float
    kappa: float
    tau_M: float
    tau_W: float = 0.0
    T1: float = 8.0
    chi_qs: float = 2 * math.pi * 1.789
    P_C: float | None = None

    def __post_init__(self):
        for name in ("n_bar", "kappa", "tau_M", "T1", "chi_qs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.tau_W < 0:
            raise ValueError("tau_W must be >= 0")
        if self.P_C is None:
            object.__setattr__(self, "P_C", p_c_from_t1(self.tau_M, self.T1))
        if not 0.0 < self.P_C < 1.0:
            raise ValueError("P_C must lie in (0, 1)")

    @property
    def spacing(self) -> float:
        return self.tau_M + self.tau_W

    @property
    def jump_rate(self) -> float:
        return self.n_bar * self.kappa

    @property
    def mapping_time(self) -> float:
        return math.pi / self.chi_qs


def kappa_eff_at(spacing, jump_rate: float, P_C: float):
    s = np.asarray(spacing, dtype=float)
    out = (0.5 * (jump_rate * s) ** 2 + P_C) / s
    return float(out) if out.ndim == 0 else out


def kappa_eff(p: CadenceParams) -> float:
    return kappa_eff_at(p.spacing, p.jump_rate, p.P_C)


def optimal_spacing(n_bar: float, kappa: float, P_C: float) -> tuple[float, float]:
    """Closed-form optimum ``(spacing, kappa_eff_min)``; both loss channels then balance."""
    if n_bar <= 0 or kappa <= 0 or P_C < 0:
        raise ValueError("n_bar, kappa must be positive and P_C non-negative")
    rate = n_bar * kappa
    return math.sqrt(2.0 * P_C) / rate, rate * math.sqrt(2.0 * P_C)


def numerical_optimum(n_bar: float, kappa: float, P_C: float) -> tuple[float, float]:
    """Minimize ``kappa_eff`` over the spacing numerically (log-parametrized)."""
    rate = n_bar * kappa
    res = minimize_scalar(
        lambda u: kappa_eff_at(math.exp(u), rate, P_C),
        bracket=(math.log(1e-6 / rate), math.log(1.0 / rate), math.log(1e3 / rate)),
        method="brent",
        tol=1e-12,
    )
    return math.exp(res.x), float(res.fun)


def improvement_factor(P_C: float) -> float:
    """Lifetime gain ``nbar kappa / kappa_eff_min = 1 / sqrt(2 P_C)``."""
    if not 0.0 < P_C < 1.0:
        raise ValueError("P_C must lie in (0, 1)")
    return 1.0 / math.sqrt(2.0 * P_C)


def cadence_table(p: CadenceParams, spacings=None) -> dict:
    """Rows for the ``optimize`` command: a spacing grid plus the optimum."""
    best, k_min = optimal_spacing(p.n_bar, p.kappa, p.P_C)
    if spacings is None:
        spacings = np.geomspace(max(p.tau_M, best / 10), best * 10, 25)
    spacings = np.asarray(spacings, dtype=float)
    return {
        "spacing_us": spacings,
        "tau_W_us": spacings - p.tau_M,
        "kappa_eff_per_us": kappa_eff_at(spacings, p.jump_rate, p.P_C),
        "optimal_spacing_us": best,
        "optimal_tau_W_us": best - p.tau_M,
        "kappa_eff_min_per_us": k_min,
        "lifetime_us": 1.0 / k_min,
        "bare_lifetime_us": 1.0 / p.jump_rate,
        "improvement_factor": improvement_factor(p.P_C),
        "P_C": p.P_C,
        "mapping_time_us": p.mapping_time,
    }


def double_jump_probability(n_bar: float, kappa: float, spacing: float) -> float:
    """Second-order chance of two jumps within one interval, ``(nbar kappa spacing)^2 / 2``."""
    return 0.5 * (n_bar * kappa * spacing) ** 2


@dataclass(frozen=True)
class ValidationReport:
    model: float
    empirical: float
    n_intervals: int
    n_double: int
    relative_deviation: float
    inconclusive: bool


def validate_against_simulation(
    p: CadenceParams,
    n_intervals: int = 200_000,
    seed: int = 0,
    n_th: float = 0.0,
    min_events: int = 100,
) -> ValidationReport:
    """Compare the quadratic double-jump term with simulated intervals.

    Each interval starts from a photon number drawn from a coherent state of
    mean ``n_bar`` and is evolved exactly for one spacing; intervals with at
    least two jumps are counted.
    """
    rng = np.random.default_rng(seed)
    alpha = math.sqrt(p.n_bar)
    dim = default_dim(alpha, n_th)
    n_double = 0
    for _ in range(n_intervals):
        n0 = sample_initial_n(alpha, n_th, dim, rng)
        _, jumps = evolve_interval(n0, p.kappa, n_th, p.spacing, rng)
        n_double += jumps.size >= 2
    model = double_jump_probability(p.n_bar, p.kappa, p.spacing)
    empirical = n_double / n_intervals
    return ValidationReport(
        model=model,
        empirical=empirical,
        n_intervals=n_intervals,
        n_double=int(n_double),
        relative_deviation=(empirical - model) / model,
        inconclusive=n_double < min_events,
    )
