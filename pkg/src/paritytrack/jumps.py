"""Schmitt-trigger digitization of the parity estimate and jump statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, IndeterminateParityError
from .fock import parity_sign

__all__ = [
    "SchmittConfig",
    "JumpReport",
    "JumpHistogram",
    "schmitt_digitize",
    "schmitt_batch",
    "count_jumps",
    "response_time",
    "fit_transition_tanh",
    "missed_jump_probability",
    "merge_close_jumps",
    "jump_histogram",
    "histogram_from_counts",
    "detection_efficiency",
]


@dataclass(frozen=True)
class SchmittConfig:
    hi: float = 0.9
    lo: float = -0.9

    def __post_init__(self):
        if not -1.0 < self.lo < self.hi < 1.0:
            raise ValueError(f"need -1 < lo < hi < 1, got lo={self.lo}, hi={self.hi}")


@dataclass(frozen=True, eq=False)
class JumpReport:
    jump_count: int
    transition_times: np.ndarray
    initial_parity: int
    final_parity: int
    response_times: np.ndarray

    def __post_init__(self):
        if self.jump_count != len(self.transition_times):
            raise ValueError("jump_count must equal the number of transitions")
        if (-1) ** self.jump_count != self.initial_parity * self.final_parity:
            raise ValueError("jump count parity inconsistent with initial/final parity")


def schmitt_digitize(series, times, cfg: SchmittConfig = SchmittConfig()):
    """Hysteretic two-level digitization.

    Returns ``(digital, transition_idx)``.  The state switches to +1 only on a
    sample ``>= hi`` and to -1 only on a sample ``<= lo``.  Samples before the
    first threshold crossing inherit the state it establishes.
    """
    x = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    if x.shape != t.shape:
        raise ValueError("series and times must have the same shape")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    beyond = np.flatnonzero((x >= cfg.hi) | (x <= cfg.lo))
    if beyond.size == 0:
        raise IndeterminateParityError("series never reaches either Schmitt threshold")
    digital = np.empty(x.size, dtype=np.int8)
    first = beyond[0]
    state = 1 if x[first] >= cfg.hi else -1
    digital[:first] = state
    transitions = []
    for k in range(first, x.size):
        if state == 1 and x[k] <= cfg.lo:
            state = -1
            transitions.append(k)
        elif state == -1 and x[k] >= cfg.hi:
            state = 1
            transitions.append(k)
        digital[k] = state
    return digital, np.asarray(transitions, dtype=np.int64)


def schmitt_batch(series, cfg: SchmittConfig = SchmittConfig()):
    """Row-wise :func:`schmitt_digitize` on a 2-D array, counting only.

    Returns ``(initial_state, final_state, jump_count)``; rows that never cross
    a threshold have initial and final state 0.
    """
    x = np.asarray(series, dtype=float)
    state = np.zeros(x.shape[0], dtype=np.int8)
    initial = np.zeros_like(state)
    count = np.zeros(x.shape[0], dtype=np.int64)
    for k in range(x.shape[1]):
        v = x[:, k]
        up = v >= cfg.hi
        down = v <= cfg.lo
        undecided = state == 0
        start_up = undecided & up
        start_down = undecided & down
        flip_down = (state == 1) & down
        flip_up = (state == -1) & up
        state[start_up | flip_up] = 1
        state[start_down | flip_down] = -1
        initial[start_up] = 1
        initial[start_down] = -1
        count += flip_down | flip_up
    return initial, state.copy(), count


def response_time(series, times, cfg: SchmittConfig = SchmittConfig()) -> np.ndarray:
    """Time from the last sample beyond the old threshold to the first beyond the new one."""
    x = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    digital, trans = schmitt_digitize(x, t, cfg)
    out = []
    for j in trans:
        old = digital[j - 1]
        held = (x[:j] >= cfg.hi) if old == 1 else (x[:j] <= cfg.lo)
        i = np.flatnonzero(held)[-1]
        out.append(t[j] - t[i])
    return np.asarray(out, dtype=float)


def count_jumps(series, times, cfg: SchmittConfig = SchmittConfig()) -> JumpReport:
    """Digitize a parity-estimate series and count its parity flips."""
    x = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    digital, trans = schmitt_digitize(x, t, cfg)
    return JumpReport(
        jump_count=int(trans.size),
        transition_times=t[trans],
        initial_parity=int(digital[0]),
        final_parity=int(digital[-1]),
        response_times=response_time(x, t, cfg) if trans.size else np.zeros(0),
    )


def _tanh_model(p, t):
    a, b, t0, tau = p
    return a * np.tanh((t - t0) / tau) + b


def fit_transition_tanh(segment, times, min_r2: float = 0.9) -> tuple[float, float]:
    """Least-squares fit of ``a tanh((t - t0)/tau) + b`` across one transition.

    Returns ``(t0, tau)``.  Raises :class:`FitError` when the segment is not
    a single monotone step (coefficient of determination below ``min_r2``).
    """
    y = np.asarray(segment, dtype=float)
    t = np.asarray(times, dtype=float)
    if y.size < 5:
        raise FitError("need at least 5 samples to fit a transition")
    span = t[-1] - t[0]
    dt = np.median(np.diff(t))
    a0 = 0.5 * (y[-1] - y[0])
    if a0 == 0.0:
        a0 = 0.5 * (y.max() - y.min()) or 1.0
    b0 = 0.5 * (y[-1] + y[0])
    t0 = t[np.argmin(np.abs(y - b0))]
    fit = least_squares(
        lambda p: _tanh_model(p, t) - y,
        x0=[a0, b0, t0, dt],
        bounds=([-np.inf, -np.inf, t[0] - span, 1e-6 * dt], [np.inf, np.inf, t[-1] + span, 10.0 * span]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    resid = fit.fun
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 0.0
    if not fit.success or r2 < min_r2:
        raise FitError(f"segment is not a single tanh-like step (R^2={r2:.3f}, rms residual={np.sqrt(np.mean(resid**2)):.3g})")
    _, _, center, tau = fit.x
    return float(center), float(tau)


def missed_jump_probability(n_bar: float, tau_tot: float, tau_f: float) -> float:
    """Probability of a second jump within ``tau_f`` of a first one."""
    if n_bar <= 0 or tau_tot <= 0 or tau_f < 0:
        raise ValueError("n_bar and tau_tot must be positive, tau_f non-negative")
    return -math.expm1(-tau_f * n_bar / tau_tot)


def merge_close_jumps(jump_times, tau_f: float) -> np.ndarray:
    """Drop pairs of jumps closer than ``tau_f``; neither flip is seen by the trigger."""
    t = np.sort(np.asarray(jump_times, dtype=float))
    kept = []
    i = 0
    while i < t.size:
        if i + 1 < t.size and t[i + 1] - t[i] < tau_f:
            i += 2
        else:
            kept.append(t[i])
            i += 1
    return np.asarray(kept, dtype=float)


@dataclass(frozen=True, eq=False)
class JumpHistogram:
    counts: np.ndarray
    n_reports: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_reports if self.n_reports else self.counts.astype(float)

    @property
    def even_mass(self) -> float:
        return float(self.frequencies[0::2].sum())

    @property
    def odd_mass(self) -> float:
        return float(self.frequencies[1::2].sum())


def histogram_from_counts(jump_counts, minlength: int = 0) -> JumpHistogram:
    c = np.asarray(jump_counts, dtype=np.int64)
    return JumpHistogram(counts=np.bincount(c, minlength=minlength), n_reports=int(c.size))


def jump_histogram(reports, post_select=None, minlength: int = 0) -> JumpHistogram:
    """Histogram of jump counts, optionally restricted to one initial parity."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    if post_select is not None:
        want = parity_sign(post_select)
        reports = [r for r in reports if r.initial_parity == want]
    return histogram_from_counts([r.jump_count for r in reports], minlength=minlength)


def detection_efficiency(true_jump_times, detected_times, isolation: float, window: float | None = None, span=None):
    """Fraction of isolated true jumps followed by a detected transition.

    A true jump is isolated when no other true jump lies within ``isolation``
    on either side.  It counts as detected when a transition falls in
    ``[t, t + window]``, or before the next true jump when ``window`` is None.
    ``span=(t_min, t_max)`` restricts which true jumps are scored.
    Returns ``(detected, total)``.
    """
    lo, hi = span if span is not None else (-np.inf, np.inf)
    detected = total = 0
    for jt, dt in zip(true_jump_times, detected_times):
        jt = np.sort(np.asarray(jt, dtype=float))
        dt = np.asarray(dt, dtype=float)
        for k, t in enumerate(jt):
            if not lo <= t <= hi:
                continue
            gaps = np.abs(np.delete(jt, k) - t)
            if gaps.size and gaps.min() <= isolation:
                continue
            total += 1
            end = t + window if window is not None else (jt[k + 1] if k + 1 < jt.size else np.inf)
            if np.any((dt >= t) & (dt <= end)):
                detected += 1
    return detected, total
