"""Truncated Fock-space linear algebra.

Density matrices live in the span of ``|0>, ..., |dim-1>``.  Two truncation
rules guard every state constructor:

* ``dim >= 5 * max(1, |alpha|^2)`` (five times the mean photon number), and
* the populations of the two highest Fock levels must sum to at most
  ``LEAKAGE_TOL``; otherwise the state visibly leaks out of the space.

``default_dim`` returns the smallest dimension satisfying both.

Wigner convention
-----------------
``W(beta) = (2/pi) * tr[rho D(beta) P D(beta)^dagger]`` with ``P`` the photon
parity operator.  The vacuum therefore peaks at ``2/pi`` and integrates to one
over the phase plane with measure ``d^2 beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidDimensionError,
    NormalizationError,
    NumericalError,
    TruncationError,
)

__all__ = [
    "LEAKAGE_TOL",
    "FockDensityMatrix",
    "annihilation",
    "creation",
    "displacement_operator",
    "parity_operators",
    "parity_sign",
    "default_dim",
    "check_truncation",
    "coherent_state",
    "initial_state",
    "parity_expectation",
    "cat_state",
    "wigner_point",
    "wigner_grid",
    "state_fidelity",
    "fock_populations",
]

LEAKAGE_TOL = 1e-6
TRACE_TOL = 1e-9
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """Immutable density matrix on a truncated Fock space.

    The wrapped array is copied to ``complex128`` and marked read-only.
    Construction does not validate physicality; call :meth:`check` for that.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidDimensionError(f"density matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InvalidDimensionError("density matrix must have dim >= 1")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_ket(cls, ket) -> "FockDensityMatrix":
        ket = np.asarray(ket, dtype=np.complex128)
        return cls(np.outer(ket, ket.conj()))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def normalized(self) -> "FockDensityMatrix":
        tr = np.trace(self.data).real
        if tr <= 0:
            raise NormalizationError(f"cannot normalize state with trace {tr}")
        return FockDensityMatrix(self.data / tr)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.conj().T, self.data)))

    def check(
        self,
        trace_tol: float = TRACE_TOL,
        hermitian_tol: float = HERMITIAN_TOL,
        psd_tol: float = PSD_TOL,
    ) -> None:
        """Raise :class:`NumericalError` unless trace, Hermiticity and positivity hold."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > hermitian_tol:
            raise NumericalError(f"density matrix not Hermitian (defect {herm:.3e})")
        if abs(self.trace - 1.0) > trace_tol:
            raise NormalizationError(f"trace {self.trace!r} deviates from 1")
        lam = np.linalg.eigvalsh(self.data)
        if lam[0] < -psd_tol:
            raise NumericalError(f"density matrix not positive (min eigenvalue {lam[0]:.3e})")


def _require_dim(dim: int, minimum: int = 1) -> int:
    if int(dim) != dim or dim < minimum:
        raise InvalidDimensionError(f"dim must be an integer >= {minimum}, got {dim!r}")
    return int(dim)


def annihilation(dim: int) -> np.ndarray:
    dim = _require_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(np.complex128)


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).conj().T


@lru_cache(maxsize=32)
def _quadrature_eig(work: int) -> tuple[np.ndarray, np.ndarray]:
    # i (a^dagger - a) is Hermitian; its eigenbasis exponentiates every real
    # displacement on this workspace.
    a = annihilation(work)
    return np.linalg.eigh(1j * (a.conj().T - a))


@lru_cache(maxsize=256)
def _displacement_cached(alpha: complex, dim: int) -> np.ndarray:
    # Exponentiate on a doubled space and crop: the truncated generator is
    # only faithful well below its edge.
    lam, vec = _quadrature_eig(2 * dim)
    r, phi = abs(alpha), np.angle(alpha)
    top = vec[:dim]
    real_disp = (top * np.exp(-1j * r * lam)) @ top.conj().T
    n = np.arange(dim)
    phase = np.exp(1j * phi * n)
    out = np.ascontiguousarray(phase[:, None] * real_disp * phase.conj()[None, :])
    out.flags.writeable = False
    return out


def displacement_operator(alpha: complex, dim: int) -> np.ndarray:
    """Displacement ``exp(alpha a^dagger - alpha^* a)`` restricted to ``dim`` levels.

    Exponentiated exactly on a ``2*dim`` workspace through the eigenbasis of
    the quadrature ``i(a^dagger - a)`` (phase rotations handle complex
    ``alpha``), then cropped.  The result is read-only and cached.
    """
    dim = _require_dim(dim, 2)
    return _displacement_cached(complex(alpha), dim)


def parity_operators(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(P, P_even, P_odd)`` with ``P = P_even - P_odd = exp(i pi a^dagger a)``."""
    dim = _require_dim(dim)
    even = (np.arange(dim) % 2 == 0).astype(float)
    p_even = np.diag(even).astype(np.complex128)
    p_odd = np.diag(1.0 - even).astype(np.complex128)
    return p_even - p_odd, p_even, p_odd


def parity_sign(parity) -> int:
    """Map ``'even'``/``'odd'``/``+1``/``-1`` onto ``+1``/``-1``."""
    if isinstance(parity, str):
        key = parity.strip().lower()
        if key == "even":
            return 1
        if key == "odd":
            return -1
    elif parity in (1, -1):
        return int(parity)
    raise ValueError(f"parity must be 'even', 'odd', +1 or -1, got {parity!r}")


def _leakage(populations: np.ndarray) -> float:
    return float(np.sum(populations[-2:]))


def check_truncation(alpha: complex, dim: int) -> None:
    """Enforce ``dim >= 5 * max(1, |alpha|^2)``."""
    need = 5.0 * max(1.0, abs(alpha) ** 2)
    if dim < need - 1e-9:
        raise TruncationError(f"dim={dim} too small for |alpha|^2={abs(alpha)**2:.4g} (need >= {need:.4g})")


def _guard_leakage(rho: np.ndarray) -> None:
    leak = _leakage(np.real(np.diag(rho)))
    if leak > LEAKAGE_TOL:
        raise TruncationError(
            f"top two Fock levels hold {leak:.3e} > {LEAKAGE_TOL:g} of the population; increase dim"
        )


def _initial_array(alpha: complex, n_th: float, dim: int) -> np.ndarray:
    d = displacement_operator(alpha, dim)
    k0, k1 = d[:, 0], d[:, 1]
    return (1.0 - n_th) * np.outer(k0, k0.conj()) + n_th * np.outer(k1, k1.conj())


def default_dim(alpha: complex = 0.0, n_th: float = 0.0) -> int:
    """Smallest admissible truncation for :func:`initial_state`.

    Starts from ``max(10, ceil(5 |alpha|^2))`` and grows until the
    leakage guard passes.
    """
    dim = max(10, math.ceil(5.0 * abs(alpha) ** 2 - 1e-9))
    while _leakage(np.real(np.diag(_initial_array(alpha, n_th, dim)))) > LEAKAGE_TOL:
        dim += 1
    return dim


def coherent_state(alpha: complex, dim: int | None = None) -> FockDensityMatrix:
    return initial_state(alpha, 0.0, dim)


def initial_state(alpha: complex, n_th: float = 0.0, dim: int | None = None) -> FockDensityMatrix:
    """Displaced vacuum with a displaced single-photon admixture of weight ``n_th``."""
    if not 0.0 <= n_th < 0.5:
        raise ValueError(f"n_th must lie in [0, 0.5), got {n_th}")
    if dim is None:
        dim = default_dim(alpha, n_th)
    dim = _require_dim(dim, 2)
    check_truncation(alpha, dim)
    rho = _initial_array(alpha, n_th, dim)
    _guard_leakage(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return FockDensityMatrix(rho / np.trace(rho).real)


def parity_expectation(rho: FockDensityMatrix) -> float:
    """``tr[rho P]`` for a normalized state."""
    tr = rho.trace
    if abs(tr - 1.0) > 1e-6:
        raise NormalizationError(f"parity_expectation needs a normalized state (trace {tr!r})")
    diag = np.real(np.diag(rho.data))
    signs = np.where(np.arange(rho.dim) % 2 == 0, 1.0, -1.0)
    return float(np.dot(signs, diag))


def cat_state(alpha: complex, parity, dim: int | None = None) -> FockDensityMatrix:
    """Pure cat state ``N (|alpha> +/- |-alpha>)``; ``'even'`` takes the plus sign."""
    sign = parity_sign(parity)
    if dim is None:
        dim = default_dim(alpha)
    dim = _require_dim(dim, 2)
    check_truncation(alpha, dim)
    ket = displacement_operator(alpha, dim)[:, 0] + sign * displacement_operator(-alpha, dim)[:, 0]
    norm = np.linalg.norm(ket)
    if norm < 1e-12:
        raise ValueError("odd cat state is undefined at alpha = 0")
    rho = FockDensityMatrix.from_ket(ket / norm)
    _guard_leakage(rho.data)
    return rho


def wigner_point(rho: FockDensityMatrix, beta: complex) -> float:
    """Displaced-parity Wigner function ``(2/pi) tr[rho D(beta) P D(beta)^dagger]``."""
    if abs(beta) ** 2 > rho.dim / 5.0 + 1e-12:
        raise TruncationError(f"|beta|^2={abs(beta)**2:.4g} exceeds dim/5={rho.dim / 5:.4g}")
    d = displacement_operator(beta, rho.dim)
    # tr[rho D P D^+] = tr[(D^+ rho D) P]
    shifted = d.conj().T @ rho.data @ d
    signs = np.where(np.arange(rho.dim) % 2 == 0, 1.0, -1.0)
    return float(2.0 / np.pi * np.dot(signs, np.real(np.diag(shifted))))


def wigner_grid(rho: FockDensityMatrix, xs, ys) -> np.ndarray:
    """Evaluate :func:`wigner_point` on the grid ``beta = x + i y``; rows follow ``ys``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.empty((ys.size, xs.size))
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            out[i, j] = wigner_point(rho, complex(x, y))
    return out


def state_fidelity(rho: FockDensityMatrix, target_pure: FockDensityMatrix) -> float:
    """Overlap ``tr[rho sigma]`` with a pure target ``sigma``."""
    if rho.dim != target_pure.dim:
        raise InvalidDimensionError(f"dimension mismatch {rho.dim} vs {target_pure.dim}")
    purity = target_pure.purity()
    if abs(purity - 1.0) > 1e-6:
        raise ValueError(f"fidelity target must be pure (tr[sigma^2] = {purity:.6g})")
    f = float(np.real(np.vdot(target_pure.data.conj().T, rho.data)))
    return min(1.0, max(0.0, f))


def fock_populations(rho: FockDensityMatrix) -> np.ndarray:
    return np.clip(np.real(np.diag(rho.data)), 0.0, None)
