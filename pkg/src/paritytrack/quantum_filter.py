"""Causal Bayesian parity filter.

Each measurement slot does two things to the cavity density matrix:

1. *free evolution* over one interval ``dt`` through the Kraus set
   ``M_down = sqrt(k_down dt) a``, ``M_up = sqrt(k_up dt) a^dagger``,
   ``M_no = I - (M_down^dagger M_down + M_up^dagger M_up) / 2`` with
   ``k_down = (n_th + 1) kappa`` and ``k_up = n_th kappa``;
2. a *Bayes update* on the observed correlation ``C``::

       rho <- [P(C|even) Pe rho Pe + P(C|odd) Po rho Po] / P(C)

   with ``P(C) = P(C|even) tr[Pe rho Pe] + P(C|odd) tr[Po rho Po]``.  A failed
   shot (``C = 0``) carries no parity information and leaves ``rho`` as is.

The best parity estimate after each slot is ``tr[rho P]``.  The first outcome
is applied to the initial state directly; every later one is preceded by
one free-evolution step.

The first-order Kraus set is not exactly trace preserving, so the state is
renormalized after free evolution unless ``renormalize=False``.  Setting
``kraus_order="exact"`` replaces the Kraus set by the exact Lindblad
propagator over ``dt``.

Both channels and the projective update map Fock populations onto Fock
populations, and the parity estimate reads only populations.
:func:`run_filter_batch` exploits this to filter many records at once on
population vectors; :func:`run_filter` keeps the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ImpossibleOutcomeError, StepSizeError
from .fock import (
    FockDensityMatrix,
    annihilation,
    initial_state,
    parity_expectation,
    parity_operators,
)
from .readout import ReadoutModel
from .trajectory import SimConfig

__all__ = [
    "KrausSet",
    "FilterState",
    "FilterSettings",
    "FilterOutput",
    "build_kraus",
    "free_evolve",
    "bayes_update",
    "parity_estimate",
    "run_filter",
    "run_filter_batch",
]

PROB_FLOOR = 1e-12
MAX_KAPPA_DT = 0.1


@dataclass(frozen=True, eq=False)
class KrausSet:
    m_down: np.ndarray
    m_up: np.ndarray
    m_no: np.ndarray
    dt: float
    kappa: float
    n_th: float

    @property
    def dim(self) -> int:
        return self.m_no.shape[0]

    @property
    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.m_down, self.m_up, self.m_no

    def completeness_defect(self) -> float:
        s = sum(m.conj().T @ m for m in self.operators)
        return float(np.max(np.abs(s - np.eye(self.dim))))


def build_kraus(kappa: float, n_th: float, dt: float, dim: int) -> KrausSet:
    if kappa * dt > MAX_KAPPA_DT:
        raise StepSizeError(f"kappa*dt = {kappa * dt:.3g} exceeds {MAX_KAPPA_DT}; first-order Kraus set invalid")
    a = annihilation(dim)
    m_down = np.sqrt((n_th + 1.0) * kappa * dt) * a
    m_up = np.sqrt(n_th * kappa * dt) * a.conj().T
    m_no = np.eye(dim, dtype=np.complex128) - 0.5 * (m_down.conj().T @ m_down + m_up.conj().T @ m_up)
    ops = []
    for m in (m_down, m_up, m_no):
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        ops.append(m)
    return KrausSet(*ops, dt=float(dt), kappa=float(kappa), n_th=float(n_th))


def _lindblad_propagator(kappa: float, n_th: float, dt: float, dim: int) -> np.ndarray:
    """Superoperator ``exp(L dt)`` acting on column-stacked ``vec(rho)``."""
    a = annihilation(dim)
    eye = np.eye(dim)
    gen = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for rate, c in (((n_th + 1.0) * kappa, a), (n_th * kappa, a.conj().T)):
        if rate == 0.0:
            continue
        cdc = c.conj().T @ c
        gen += rate * (np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye))
    return expm(gen * dt)


@dataclass(frozen=True)
class FilterSettings:
    """Filter knobs.  ``kappa=None`` uses the simulation's decay rate."""

    kappa: float | None = None
    renormalize: bool = True
    kraus_order: int | str = 1

    def __post_init__(self):
        if self.kraus_order not in (1, "exact"):
            raise ValueError("kraus_order must be 1 or 'exact'")


@dataclass(frozen=True, eq=False)
class FilterState:
    rho: FockDensityMatrix
    step_index: int = 0
    last_estimate: float = float("nan")


@dataclass(frozen=True, eq=False)
class FilterOutput:
    parity: np.ndarray
    rho_final: FockDensityMatrix
    states: list | None = field(default=None, repr=False)


def _sym(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def _apply_kraus(rho: np.ndarray, kraus: KrausSet) -> np.ndarray:
    out = np.zeros_like(rho)
    for m in kraus.operators:
        out += m @ rho @ m.conj().T
    return out


def free_evolve(state, kraus: KrausSet, renormalize: bool = True) -> FockDensityMatrix:
    """Predicted state after one interval of cavity decoherence."""
    rho = state.rho if isinstance(state, FilterState) else state
    out = _sym(_apply_kraus(rho.data, kraus))
    if renormalize:
        out = out / np.trace(out).real
    return FockDensityMatrix(out)


def _bayes_array(rho: np.ndarray, outcome: int, model: ReadoutModel, even_mask: np.ndarray) -> np.ndarray:
    if outcome == 0:
        return rho
    l_even = model.likelihood(outcome, "even")
    l_odd = model.likelihood(outcome, "odd")
    diag = np.real(np.diag(rho))
    p_c = l_even * diag[even_mask].sum() + l_odd * diag[~even_mask].sum()
    if p_c < PROB_FLOOR:
        raise ImpossibleOutcomeError(f"outcome {outcome:+d} has likelihood {p_c:.3e} under the current state")
    # Pe rho Pe + Po rho Po keeps blocks with equal parity on both indices.
    w = np.where(even_mask, l_even, l_odd)
    same = even_mask[:, None] == even_mask[None, :]
    return np.where(same, rho * w[:, None], 0.0) / p_c


def bayes_update(rho_tilde: FockDensityMatrix, outcome: int, model: ReadoutModel) -> FockDensityMatrix:
    """Condition the predicted state on one correlation outcome."""
    if outcome not in (1, -1, 0):
        raise ValueError(f"outcome must be +1, -1 or 0, got {outcome!r}")
    if outcome == 0:
        return rho_tilde
    even_mask = np.arange(rho_tilde.dim) % 2 == 0
    return FockDensityMatrix(_bayes_array(rho_tilde.data, int(outcome), model, even_mask))


def parity_estimate(rho: FockDensityMatrix) -> float:
    return parity_expectation(rho)


def _validate_outcomes(outcomes) -> np.ndarray:
    arr = np.asarray(outcomes)
    if arr.size and not np.all(np.isin(arr, (1, -1, 0))):
        raise ValueError("outcomes must be drawn from {+1, -1, 0}")
    return arr.astype(np.int8)


def _estimate(rho: np.ndarray, signs: np.ndarray) -> float:
    d = np.real(np.diag(rho))
    return float(np.dot(signs, d) / d.sum())


def run_filter(
    outcomes,
    config: SimConfig,
    model: ReadoutModel,
    settings: FilterSettings | None = None,
    keep_states: bool = False,
    initial: FockDensityMatrix | None = None,
) -> FilterOutput:
    """Filter one outcome record; returns the parity estimate after every slot.

    The prior is ``initial_state(config.alpha, config.n_th, config.dim)``
    unless ``initial`` is given, in which case its dimension is used.  The
    first outcome updates the prior directly; later outcomes follow one
    free-evolution step each.
    """
    settings = settings or FilterSettings()
    outcomes = _validate_outcomes(outcomes)
    kappa = settings.kappa if settings.kappa is not None else config.kappa
    if initial is None:
        initial = initial_state(config.alpha, config.n_th, config.dim)
    dim = initial.dim
    rho = np.array(initial.data)
    even_mask = np.arange(dim) % 2 == 0
    signs = np.where(even_mask, 1.0, -1.0)

    if settings.kraus_order == 1:
        kraus = build_kraus(kappa, config.n_th, config.tau_i, dim)

        def evolve(r):
            return _apply_kraus(r, kraus)

    else:
        prop = _lindblad_propagator(kappa, config.n_th, config.tau_i, dim)

        def evolve(r):
            return (prop @ r.reshape(-1, order="F")).reshape(dim, dim, order="F")

    est = np.empty(len(outcomes))
    states = [] if keep_states else None
    for k, c in enumerate(outcomes):
        if k > 0:
            rho = _sym(evolve(rho))
            if settings.renormalize:
                rho = rho / np.trace(rho).real
        rho = _bayes_array(rho, int(c), model, even_mask)
        est[k] = _estimate(rho, signs)
        if keep_states:
            states.append(FockDensityMatrix(rho))
    est.flags.writeable = False
    return FilterOutput(parity=est, rho_final=FockDensityMatrix(rho), states=states)


def _population_transfer(kappa: float, n_th: float, dt: float, dim: int, order) -> np.ndarray:
    """Matrix ``T`` with ``diag(channel(rho)) = T @ diag(rho)``."""
    if order == 1:
        kraus = build_kraus(kappa, n_th, dt, dim)
        # Each Kraus operator has at most one nonzero per row, so cross terms vanish.
        return sum(np.abs(m) ** 2 for m in kraus.operators)
    prop = _lindblad_propagator(kappa, n_th, dt, dim)
    idx = np.arange(dim) * (dim + 1)
    return np.real(prop[np.ix_(idx, idx)])


def run_filter_batch(
    outcomes,
    config: SimConfig,
    model: ReadoutModel,
    settings: FilterSettings | None = None,
) -> np.ndarray:
    """Filter a stack of records (shape ``(n_traj, n_steps)``) on populations only.

    Returns the parity estimates with the same shape; each row equals the
    ``parity`` of :func:`run_filter` on that row.
    """
    settings = settings or FilterSettings()
    outcomes = _validate_outcomes(outcomes)
    if outcomes.ndim != 2:
        raise ValueError("outcomes must be a 2-D (n_traj, n_steps) array")
    kappa = settings.kappa if settings.kappa is not None else config.kappa
    dim = config.dim
    transfer = _population_transfer(kappa, config.n_th, config.tau_i, dim, settings.kraus_order).T.copy()
    p0 = np.real(np.diag(initial_state(config.alpha, config.n_th, dim).data))
    even_mask = np.arange(dim) % 2 == 0
    signs = np.where(even_mask, 1.0, -1.0)

    lik = {}
    for c in (1, -1):
        lik[c] = np.where(even_mask, model.likelihood(c, "even"), model.likelihood(c, "odd"))

    n_traj, n_steps = outcomes.shape
    pops = np.tile(p0, (n_traj, 1))
    est = np.empty((n_traj, n_steps))
    for k in range(n_steps):
        if k > 0:
            pops = pops @ transfer
            if settings.renormalize:
                pops /= pops.sum(axis=1, keepdims=True)
        col = outcomes[:, k]
        for c in (1, -1):
            sel = col == c
            if not sel.any():
                continue
            upd = pops[sel] * lik[c]
            p_c = upd.sum(axis=1, keepdims=True)
            if np.any(p_c < PROB_FLOOR):
                bad = np.flatnonzero(sel)[np.flatnonzero(p_c[:, 0] < PROB_FLOOR)[0]]
                raise ImpossibleOutcomeError(f"trajectory {bad}, step {k}: outcome {c:+d} has zero likelihood")
            pops[sel] = upd / p_c
        est[:, k] = (pops @ signs) / pops.sum(axis=1)
    return est
