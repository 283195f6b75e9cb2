"""Analytic parity curves, correlation-average predictions and decay fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FitError
from .fock import default_dim, fock_populations, initial_state
from .readout import ReadoutModel

__all__ = [
    "DecayModel",
    "FitResult",
    "SeriesStats",
    "analytic_parity",
    "pe_po",
    "predicted_correlation_average",
    "empirical_correlation_average",
    "ensemble_mean",
    "fit_global_decay",
    "demolition_tau_tot",
    "fit_demolition",
    "poisson_populations",
]


def analytic_parity(t, alpha, kappa: float, n_th: float = 0.0):
    """Mean parity of a decaying coherent state in a thermal bath.

    ``P(t) = exp(-2|alpha|^2 e^{-kappa t} / (1 + 2 n_th)) / (1 + 2 n_th)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    s = 1.0 + 2.0 * n_th
    out = np.exp(-2.0 * abs(alpha) ** 2 * np.exp(-kappa * t) / s) / s
    return float(out) if out.ndim == 0 else out


def pe_po(t, alpha, kappa: float, n_th: float = 0.0):
    """Even and odd parity probabilities ``(P_e, P_o)``.

    With ``n_th = 0`` this is ``P_e = (1 + exp(-2|alpha|^2 e^{-kappa t}))/2``;
    a positive ``n_th`` uses the thermal mean parity instead.
    """
    p = analytic_parity(t, alpha, kappa, n_th)
    pe = 0.5 * (1.0 + np.asarray(p))
    po = 1.0 - pe
    if np.ndim(pe) == 0:
        return float(pe), float(po)
    return pe, po


def predicted_correlation_average(t, alpha, kappa: float, model: ReadoutModel, n_th: float = 0.0):
    """Ensemble mean of the raw correlation with failed shots replaced by the last valid one.

    ``<C> = P(+1) - P(-1) + P(0) (P(+1) - P(-1)) / (P(+1) + P(-1))`` with
    ``P(c, t) = P(c|even) P_e(t) + P(c|odd) P_o(t)``.
    """
    pe, po = pe_po(t, alpha, kappa, n_th)
    pe = np.asarray(pe)
    po = np.asarray(po)
    p_plus = model.p_plus_even * pe + model.p_plus_odd * po
    p_minus = model.p_minus_even * pe + model.p_minus_odd * po
    p_zero = model.p_zero_even * pe + model.p_zero_odd * po
    denom = p_plus + p_minus
    if np.any(denom <= 0):
        raise ValueError("readout model never yields a nonzero outcome")
    out = p_plus - p_minus + p_zero * (p_plus - p_minus) / denom
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SeriesStats:
    """Per-time ensemble mean, its standard error, and the number of contributing records."""

    mean: np.ndarray
    sem: np.ndarray
    n: np.ndarray


def ensemble_mean(values) -> SeriesStats:
    """Mean over rows of a 2-D array, ignoring NaN entries."""
    v = np.asarray(values, dtype=float)
    ok = ~np.isnan(v)
    n = ok.sum(axis=0)
    safe = np.maximum(n, 1)
    mean = np.where(ok, v, 0.0).sum(axis=0) / safe
    sq = np.where(ok, (v - mean) ** 2, 0.0).sum(axis=0)
    # a single contributing record has no spread estimate; report zero
    var = np.where(n > 1, sq / np.maximum(n - 1, 1), 0.0)
    mean = np.where(n > 0, mean, np.nan)
    return SeriesStats(mean=mean, sem=np.sqrt(var / safe), n=n)


def empirical_correlation_average(outcomes) -> SeriesStats:
    """Average raw outcomes after replacing each 0 by the last nonzero outcome of its record.

    ``outcomes`` is a 2-D ``(n_traj, n_steps)`` array or a sequence of
    trajectory records.  Leading zeros (no earlier valid outcome) are left
    out of the average at those times.
    """
    if not isinstance(outcomes, np.ndarray):
        outcomes = list(outcomes)
        if outcomes and hasattr(outcomes[0], "outcomes"):
            outcomes = [r.outcomes for r in outcomes]
    c = np.asarray(outcomes, dtype=float)
    if c.ndim == 1:
        c = c[None, :]
    filled = np.where(c == 0, np.nan, c)
    # forward fill along time
    idx = np.where(~np.isnan(filled), np.arange(c.shape[1])[None, :], 0)
    np.maximum.accumulate(idx, axis=1, out=idx)
    ff = filled[np.arange(c.shape[0])[:, None], idx]
    return ensemble_mean(ff)


@dataclass(frozen=True)
class FitResult:
    params: dict
    uncertainty: dict
    residual_norm: float
    iterations: int
    extra: dict = field(default_factory=dict)


def _decay_sse(tau: float, curves, n_th: float) -> float:
    sse = 0.0
    for alpha, t, y in curves:
        r = analytic_parity(t, alpha, 1.0 / tau, n_th) - y
        sse += float(r @ r)
    return sse


def fit_global_decay(curves, n_th: float, tau_range=(1.0, 1.0e4), rtol: float = 1e-6) -> FitResult:
    """Shared decay time for several parity curves of different ``alpha``.

    ``curves`` is an iterable of ``(alpha, times, values)``.  The summed squared
    residual against :func:`analytic_parity` is bracketed on a log grid over
    ``tau_range`` and refined by golden-section search.
    """
    curves = [(a, np.asarray(t, float), np.asarray(y, float)) for a, t, y in curves]
    if len(curves) < 2 or len({round(abs(a), 12) for a, _, _ in curves}) < 2:
        raise ValueError("need at least two curves with distinct |alpha|")
    grid = np.geomspace(tau_range[0], tau_range[1], 401)
    sse = np.array([_decay_sse(tau, curves, n_th) for tau in grid])
    k = int(np.argmin(sse))
    if k == 0 or k == grid.size - 1:
        raise FitError(f"no interior minimum in tau range {tau_range}")
    res = minimize_scalar(
        _decay_sse,
        bracket=(grid[k - 1], grid[k], grid[k + 1]),
        args=(curves, n_th),
        method="golden",
        tol=rtol * 1e-2,
    )
    tau = float(res.x)
    n_pts = sum(t.size for _, t, _ in curves)
    h = 1e-4 * tau
    curv = (_decay_sse(tau + h, curves, n_th) - 2 * res.fun + _decay_sse(tau - h, curves, n_th)) / h**2
    s2 = res.fun / max(1, n_pts - 1)
    sigma = float(np.sqrt(2.0 * s2 / curv)) if curv > 0 else float("inf")
    return FitResult(
        params={"tau": tau},
        uncertainty={"tau": sigma},
        residual_norm=float(np.sqrt(res.fun)),
        iterations=int(res.nit),
    )


@dataclass(frozen=True)
class DecayModel:
    """Free decay in parallel with a demolition probability per measurement."""

    tau_0: float
    P_D: float
    tau_i: float

    def __post_init__(self):
        if not self.tau_0 > 0 or not self.tau_i > 0:
            raise ValueError("tau_0 and tau_i must be positive")
        if not 0.0 <= self.P_D < 1.0:
            raise ValueError("P_D must lie in [0, 1)")

    @property
    def tau_tot(self) -> float:
        return demolition_tau_tot(self)


def demolition_tau_tot(model: DecayModel) -> float:
    """``1 / (1/tau_0 + P_D/tau_i)``."""
    return 1.0 / (1.0 / model.tau_0 + model.P_D / model.tau_i)


def fit_demolition(pairs) -> tuple[float, float]:
    """Recover ``(tau_0, P_D)`` from ``(tau_i, tau_tot)`` pairs by linear least squares."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or np.any(arr <= 0):
        raise ValueError("pairs must be positive (tau_i, tau_tot) rows")
    x = 1.0 / arr[:, 0]
    if np.unique(x).size < 2:
        raise FitError("need at least two distinct tau_i values")
    design = np.column_stack([np.ones_like(x), x])
    (inv_tau0, p_d), *_ = np.linalg.lstsq(design, 1.0 / arr[:, 1], rcond=None)
    return float(1.0 / inv_tau0), float(p_d)


def poisson_populations(alpha_grid, dim: int | None = None) -> np.ndarray:
    """Fock populations of displaced vacua; one row per ``|alpha|`` in the grid."""
    grid = np.asarray(alpha_grid, dtype=float)
    if np.any(grid < 0):
        raise ValueError("alpha grid values must be >= 0")
    if dim is None:
        dim = max(default_dim(a) for a in grid) if grid.size else 10
    return np.array([fock_populations(initial_state(a, 0.0, dim)) for a in grid])
