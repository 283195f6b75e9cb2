"""Monte Carlo photon-number trajectories under repeated parity measurement.

The cavity is a birth-death chain on the Fock ladder: photons leave at rate
``(n_th + 1) * kappa * n`` and thermal photons arrive at rate
``n_th * kappa * (n + 1)``.  Events are sampled exactly (Gillespie), the chain
is read out every ``tau_i`` and each reading is passed through a
:class:`~paritytrack.readout.ReadoutModel`.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .fock import default_dim, fock_populations, initial_state
from .readout import ReadoutModel, VoltageModel, sample_outcomes, sample_voltage

__all__ = [
    "SimConfig",
    "TrajectoryRecord",
    "derive_seed",
    "sample_initial_n",
    "evolve_interval",
    "simulate_trajectory",
    "simulate_ensemble",
    "render_qubit_pattern",
    "stack",
]


@dataclass(frozen=True)
class SimConfig:
    """Physical and timing parameters of one simulated experiment (times in us)."""

    alpha: complex = 1.0
    n_th: float = 0.02
    kappa: float = 1.0 / 49.0
    tau_i: float = 1.0
    duration: float = 500.0
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if not self.tau_i > 0:
            raise ConfigError(f"tau_i must be positive, got {self.tau_i}")
        if not self.duration >= self.tau_i:
            raise ConfigError("duration must be at least one measurement interval")
        if not 0.0 <= self.n_th < 0.5:
            raise ConfigError(f"n_th must lie in [0, 0.5), got {self.n_th}")
        n_steps = self.duration / self.tau_i
        if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
            raise ConfigError("duration must be an integer multiple of tau_i")
        if self.dim is None:
            object.__setattr__(self, "dim", default_dim(self.alpha, self.n_th))
        elif self.dim < 5 * max(1.0, abs(self.alpha) ** 2) - 1e-9:
            raise ConfigError(f"dim={self.dim} violates the dim >= 5*nbar truncation rule")

    @property
    def n_bar(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.tau_i))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.tau_i


def _frozen(a, dtype=None) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """One simulated run.  ``jump_directions`` is -1 for a loss, +1 for a gain."""

    seed: int
    times: np.ndarray
    photon_number: np.ndarray
    true_parity: np.ndarray
    outcomes: np.ndarray
    jump_times_true: np.ndarray
    jump_directions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    overflow: bool = False

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, float))
        object.__setattr__(self, "photon_number", _frozen(self.photon_number, np.int64))
        object.__setattr__(self, "true_parity", _frozen(self.true_parity, np.int8))
        object.__setattr__(self, "outcomes", _frozen(self.outcomes, np.int8))
        object.__setattr__(self, "jump_times_true", _frozen(self.jump_times_true, float))
        object.__setattr__(self, "jump_directions", _frozen(self.jump_directions, np.int8))
        n = len(self.times)
        if not (len(self.photon_number) == len(self.true_parity) == len(self.outcomes) == n):
            raise ValueError("trajectory vectors must share one length")

    @property
    def initial_n(self) -> int:
        return int(self.photon_number[0]) if len(self.photon_number) else 0


def derive_seed(base_seed: int, index: int) -> int:
    """Independent 63-bit seed for trajectory ``index`` of an ensemble."""
    ss = np.random.SeedSequence([int(base_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@lru_cache(maxsize=64)
def _initial_cdf(alpha: complex, n_th: float, dim: int) -> np.ndarray:
    return np.cumsum(fock_populations(initial_state(alpha, n_th, dim)))


def sample_initial_n(alpha: complex, n_th: float, dim: int, rng: np.random.Generator) -> int:
    """Photon number drawn from the diagonal of :func:`initial_state`.  Uses one uniform."""
    cdf = _initial_cdf(complex(alpha), float(n_th), int(dim))
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), dim - 1))


def _birth_death(n: int, t0: float, t1: float, kappa: float, n_th: float, rng: np.random.Generator):
    down_rate = (n_th + 1.0) * kappa
    up_rate = n_th * kappa
    times: list[float] = []
    dirs: list[int] = []
    t = t0
    n_max = n
    while True:
        r_down = down_rate * n
        r_up = up_rate * (n + 1)
        total = r_down + r_up
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t > t1:
            break
        if rng.random() * total < r_down:
            n -= 1
            dirs.append(-1)
        else:
            n += 1
            dirs.append(1)
            n_max = max(n_max, n)
        times.append(t)
    return n, times, dirs, n_max


def evolve_interval(n: int, kappa: float, n_th: float, dt: float, rng: np.random.Generator):
    """Exact birth-death evolution over ``[0, dt]``.

    Returns ``(n_out, jump_times)`` with the event times measured from the
    start of the interval.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_out, times, _, _ = _birth_death(int(n), 0.0, float(dt), kappa, n_th, rng)
    return n_out, np.asarray(times, dtype=float)


def simulate_trajectory(config: SimConfig, model: ReadoutModel, seed: int) -> TrajectoryRecord:
    """Simulate one record; fully determined by ``seed``.

    The chain is run event by event across the whole record and sampled on
    the measurement grid.  By the Markov property this is the same law as
    chaining :func:`evolve_interval` over successive slots.
    """
    rng = np.random.default_rng(seed)
    n0 = sample_initial_n(config.alpha, config.n_th, config.dim, rng)
    _, jt, dirs, n_max = _birth_death(n0, 0.0, config.duration, config.kappa, config.n_th, rng)
    jt = np.asarray(jt, dtype=float)
    dirs = np.asarray(dirs, dtype=np.int64)
    times = config.times
    idx = np.searchsorted(jt, times, side="right")
    path = n0 + np.concatenate(([0], np.cumsum(dirs)))[idx]
    parity = np.where(path % 2 == 0, 1, -1)
    outcomes = sample_outcomes(parity, model, rng)
    return TrajectoryRecord(
        seed=int(seed),
        times=times,
        photon_number=path,
        true_parity=parity,
        outcomes=outcomes,
        jump_times_true=jt,
        jump_directions=dirs,
        overflow=bool(n_max >= config.dim - 1),
    )


def _simulate_chunk(args):
    config, model, seeds = args
    return [simulate_trajectory(config, model, s) for s in seeds]


def simulate_ensemble(
    config: SimConfig,
    model: ReadoutModel,
    n_traj: int,
    base_seed: int,
    workers: int = 1,
) -> list[TrajectoryRecord]:
    """Simulate ``n_traj`` records; record ``k`` is seeded with ``derive_seed(base_seed, k)``.

    ``workers > 1`` spreads chunks over processes; the returned list is in
    trajectory order and identical to the serial result.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    seeds = [derive_seed(base_seed, k) for k in range(n_traj)]
    if workers <= 1:
        return [simulate_trajectory(config, model, s) for s in seeds]
    chunk = math.ceil(n_traj / (4 * workers))
    jobs = [(config, model, seeds[i : i + chunk]) for i in range(0, n_traj, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_simulate_chunk, jobs))
    return [rec for part in parts for rec in part]


def stack(records, name: str) -> np.ndarray:
    """Stack a per-step field (e.g. ``"outcomes"``) of equally long records into 2-D."""
    return np.stack([getattr(r, name) for r in records])


def render_qubit_pattern(
    record: TrajectoryRecord,
    model: VoltageModel,
    rng: np.random.Generator,
    start: str = "g",
):
    """Qubit-state sequence and voltages consistent with the outcome record.

    ``+1`` repeats the reference state, ``-1`` swaps g and e, ``0`` parks the
    qubit in f for that slot; the next slot is then referenced to g (reset).
    """
    states = []
    ref = start
    for c in record.outcomes:
        if c == 0:
            cur = "f"
        elif c == 1:
            cur = ref
        else:
            cur = "e" if ref == "g" else "g"
        states.append(cur)
        ref = "g" if cur == "f" else cur
    volts = np.array([sample_voltage(s, model, rng) for s in states])
    return states, volts
