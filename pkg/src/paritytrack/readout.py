"""Three-outcome model of a single parity measurement.

A measurement returns the correlation ``C`` between the qubit state before and
after the parity mapping: ``+1`` for the constant pattern, ``-1`` for the
oscillating pattern, ``0`` when either readout lands in ``f``.  The cavity
parity only enters through the six conditional probabilities
``P(C | even)`` and ``P(C | odd)``.

The optional voltage model synthesizes trimodal single-shot histograms and
digitizes them with two thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidModelError
from .fock import parity_sign

__all__ = [
    "OUTCOMES",
    "QUBIT_STATES",
    "ReadoutModel",
    "VoltageModel",
    "default_model",
    "perfect_model",
    "sample_outcome",
    "sample_outcomes",
    "digitize_voltage",
    "sample_voltage",
    "confusion_matrix",
    "readout_model_from_voltage",
]

OUTCOMES = (1, -1, 0)
QUBIT_STATES = ("g", "e", "f")
_ROW_TOL = 1e-12


@dataclass(frozen=True)
class ReadoutModel:
    """Conditional outcome probabilities for even and odd cavity parity.

    ``convention`` records which pattern the even parity produces: ``+1`` when
    even parity keeps the qubit constant (the default pulse choice), ``-1``
    after :meth:`flip_convention`.
    """

    p_plus_even: float
    p_minus_even: float
    p_zero_even: float
    p_plus_odd: float
    p_minus_odd: float
    p_zero_odd: float
    convention: int = 1

    def __post_init__(self):
        for name in ("p_plus_even", "p_minus_even", "p_zero_even", "p_plus_odd", "p_minus_odd", "p_zero_odd"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise InvalidModelError(f"{name}={v!r} is not a probability")
        for label, row in (("even", self.row("even")), ("odd", self.row("odd"))):
            if abs(sum(row) - 1.0) > _ROW_TOL:
                raise InvalidModelError(f"{label} row sums to {sum(row)!r}, not 1")
        if self.convention not in (1, -1):
            raise InvalidModelError("convention must be +1 or -1")
        c = self.convention
        if not (c * (self.p_plus_even - self.p_minus_even) > 0 and c * (self.p_minus_odd - self.p_plus_odd) > 0):
            raise InvalidModelError(
                "model is not identifiable: even parity must favour the "
                + ("+1" if c == 1 else "-1")
                + " outcome and odd parity the opposite one"
            )

    def row(self, parity) -> tuple[float, float, float]:
        """``(P(+1|parity), P(-1|parity), P(0|parity))``."""
        if parity_sign(parity) == 1:
            return (self.p_plus_even, self.p_minus_even, self.p_zero_even)
        return (self.p_plus_odd, self.p_minus_odd, self.p_zero_odd)

    def likelihood(self, outcome: int, parity) -> float:
        return self.row(parity)[OUTCOMES.index(int(outcome))]

    def flip_convention(self) -> "ReadoutModel":
        """Swap the meaning of +1 and -1 (the other sign of the second pulse)."""
        return replace(
            self,
            p_plus_even=self.p_minus_even,
            p_minus_even=self.p_plus_even,
            p_plus_odd=self.p_minus_odd,
            p_minus_odd=self.p_plus_odd,
            convention=-self.convention,
        )

    def as_dict(self) -> dict:
        return {
            "p_plus_even": self.p_plus_even,
            "p_minus_even": self.p_minus_even,
            "p_zero_even": self.p_zero_even,
            "p_plus_odd": self.p_plus_odd,
            "p_minus_odd": self.p_minus_odd,
            "p_zero_odd": self.p_zero_odd,
        }


def default_model(p_correct: float = 0.9, p_fail: float = 0.03) -> ReadoutModel:
    """Symmetric model: a failed (``0``) shot with probability ``p_fail``,
    otherwise the correct pattern with probability ``p_correct``."""
    if not 0.5 < p_correct <= 1.0:
        raise InvalidModelError(f"p_correct must lie in (0.5, 1], got {p_correct}")
    if not 0.0 <= p_fail < 0.5:
        raise InvalidModelError(f"p_fail must lie in [0, 0.5), got {p_fail}")
    ok = (1.0 - p_fail) * p_correct
    bad = (1.0 - p_fail) * (1.0 - p_correct)
    return ReadoutModel(ok, bad, p_fail, bad, ok, p_fail)


def perfect_model() -> ReadoutModel:
    return default_model(1.0, 0.0)


def sample_outcome(true_parity, model: ReadoutModel, rng: np.random.Generator) -> int:
    """Draw one correlation outcome; consumes exactly one uniform from ``rng``."""
    p_plus, p_minus, _ = model.row(true_parity)
    u = rng.random()
    if u < p_plus:
        return 1
    if u < p_plus + p_minus:
        return -1
    return 0


def sample_outcomes(true_parity, model: ReadoutModel, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sample_outcome` over an array of +/-1 parities.

    Draw ``k`` uses the ``k``-th uniform of the stream, so the result equals a
    loop of scalar calls on the same generator.
    """
    par = np.asarray(true_parity)
    u = rng.random(par.shape)
    even = par > 0
    p_plus = np.where(even, model.p_plus_even, model.p_plus_odd)
    p_minus = np.where(even, model.p_minus_even, model.p_minus_odd)
    out = np.zeros(par.shape, dtype=np.int8)
    out[u < p_plus] = 1
    out[(u >= p_plus) & (u < p_plus + p_minus)] = -1
    return out


@dataclass(frozen=True)
class VoltageModel:
    """Gaussian readout voltages for g, e, f with a shared width.

    Synthetic: the widths are not calibrated against any device.
    """

    mean_g: float = 0.0
    mean_e: float = 1.0
    mean_f: float = 2.0
    sigma: float = 0.12
    threshold_ge: float = 0.5
    threshold_ef: float = 1.5

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidModelError("sigma must be non-negative")
        if not self.threshold_ge < self.threshold_ef:
            raise InvalidModelError("threshold_ge must lie below threshold_ef")
        if not (self.mean_g < self.threshold_ge < self.mean_e < self.threshold_ef < self.mean_f):
            raise InvalidModelError("means must fall in distinct threshold bands (g < e < f)")

    def mean(self, qubit: str) -> float:
        return {"g": self.mean_g, "e": self.mean_e, "f": self.mean_f}[qubit]

    def classify(self, v: float) -> str:
        if v < self.threshold_ge:
            return "g"
        if v < self.threshold_ef:
            return "e"
        return "f"


def digitize_voltage(v: float, model: VoltageModel, previous_qubit: str) -> tuple[str, int]:
    """Threshold a voltage and correlate the resulting qubit state with the previous one."""
    qubit = model.classify(v)
    if qubit == "f" or previous_qubit == "f":
        return qubit, 0
    return qubit, 1 if qubit == previous_qubit else -1


def sample_voltage(qubit: str, model: VoltageModel, rng: np.random.Generator) -> float:
    return float(model.mean(qubit) + model.sigma * rng.standard_normal())


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def confusion_matrix(model: VoltageModel) -> np.ndarray:
    """``M[i, j] = P(classified as state j | true state i)`` from Gaussian tails."""
    out = np.zeros((3, 3))
    for i, q in enumerate(QUBIT_STATES):
        mu = model.mean(q)
        if model.sigma == 0:
            out[i, QUBIT_STATES.index(model.classify(mu))] = 1.0
            continue
        lo = _norm_cdf((model.threshold_ge - mu) / model.sigma)
        hi = _norm_cdf((model.threshold_ef - mu) / model.sigma)
        out[i] = (lo, hi - lo, 1.0 - hi)
    return out


def readout_model_from_voltage(model: VoltageModel) -> ReadoutModel:
    """Outcome probabilities when the reference shot is a clean ``g``.

    Even parity leaves the qubit in g and odd parity drives it to e; only the
    second readout is noisy.
    """
    m = confusion_matrix(model)
    g_row, e_row = m[0], m[1]
    return ReadoutModel(
        p_plus_even=float(g_row[0]),
        p_minus_even=float(g_row[1]),
        p_zero_even=float(1.0 - g_row[0] - g_row[1]),
        p_plus_odd=float(e_row[0]),
        p_minus_odd=float(e_row[1]),
        p_zero_odd=float(1.0 - e_row[0] - e_row[1]),
    )
