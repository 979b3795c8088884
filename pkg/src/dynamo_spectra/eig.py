"""Dense real nonsymmetric eigenvalues with residual certificates.

The default backend is the in-repo QR algorithm (balancing, Householder
Hessenberg reduction, Francis double-shift QR).  ``backend="lapack"``
delegates to ``scipy.linalg.eigvals`` behind the same contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import _hqr

SWEEPS_PER_DIM = 40
BACKENDS = ("qr", "lapack")


class NonConvergence(RuntimeError):
    """QR iteration hit its sweep cap; ``partial`` holds what converged."""

    def __init__(self, message, partial: "Spectrum"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by real part (descending), then imaginary part (descending)."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    matrix_dim: int
    converged: bool = True
    sweeps: int = 0
    norm: float = field(default=np.nan, compare=False)

    def __len__(self):
        return len(self.eigenvalues)

    def leading(self, k: int) -> np.ndarray:
        return self.eigenvalues[:k]

    @property
    def abscissa(self) -> float:
        """Largest real part."""
        return float(np.nanmax(self.eigenvalues.real))


class EigvecInfo(NamedTuple):
    residual: float
    condition: float
    near_defective: bool
    restarts: int


def sort_eigenvalues(ev) -> np.ndarray:
    ev = np.asarray(ev, dtype=complex)
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]


def _check_matrix(h) -> np.ndarray:
    a = np.array(h, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has NaN or Inf entries")
    return np.ascontiguousarray(a)


def qr_eigenvalues(h) -> tuple[np.ndarray, int, bool]:
    """All eigenvalues of a real matrix via balance -> Hessenberg -> double-shift QR."""
    a = _check_matrix(h)
    n = a.shape[0]
    if n == 1:
        return np.array([complex(a[0, 0])]), 0, True
    _hqr.balance(a)
    _hqr.hessenberg(a)
    wr, wi, sweeps, ok = _hqr.hqr(a, SWEEPS_PER_DIM * n)
    return wr + 1j * wi, int(sweeps), bool(ok)


def dense_spectrum(h, *, vectors: bool = False, backend: str = "qr") -> Spectrum:
    """Full spectrum of a real square matrix.

    With ``vectors=True`` every eigenvalue is certified by an inverse-iteration
    eigenvector and its relative residual ``|Hv - lv| / (|H| |v|)``; otherwise
    residuals are NaN.
    """
    a = _check_matrix(h)
    hnorm = float(np.linalg.norm(a, 2)) if a.shape[0] > 1 else abs(float(a[0, 0]))
    if backend == "qr":
        ev, sweeps, ok = qr_eigenvalues(a)
    elif backend == "lapack":
        ev, sweeps, ok = scipy.linalg.eigvals(a), 0, True
    else:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    done = np.isfinite(ev)
    ev = sort_eigenvalues(ev[done])
    res = np.full(len(ev), np.nan)
    if vectors:
        for i, lam in enumerate(ev):
            _, info = eigenvector(a, lam, return_info=True, hnorm=hnorm)
            res[i] = info.residual
    spec = Spectrum(ev, res, a.shape[0], ok, sweeps, hnorm)
    if not ok:
        raise NonConvergence(
            f"QR iteration did not converge within {SWEEPS_PER_DIM * a.shape[0]} sweeps "
            f"({len(ev)} of {a.shape[0]} eigenvalues found)",
            spec,
        )
    return spec


def _inverse_iteration(a, sigma, start, steps=4):
    n = a.shape[0]
    lu = scipy.linalg.lu_factor(a - sigma * np.eye(n), check_finite=False)
    v = start / np.linalg.norm(start)
    for _ in range(steps):
        v = scipy.linalg.lu_solve(lu, v, check_finite=False)
        v = v / np.linalg.norm(v)
    return v


def eigenvector(
    h,
    lam: complex,
    *,
    return_info: bool = False,
    tol: float = 1e-8,
    defect_tol: float = 1e-6,
    max_restarts: int = 5,
    seed: int = 0,
    hnorm: float | None = None,
):
    """Unit eigenvector for an approximate eigenvalue by shifted inverse iteration.

    ``info.condition`` is ``|y^H v|`` for unit left/right vectors; it vanishes
    at a Jordan block, so ``near_defective`` is raised when it falls below
    ``defect_tol``.
    """
    a = np.asarray(h)
    n = a.shape[0]
    if hnorm is None:
        hnorm = float(np.linalg.norm(a, 2))
    scale = max(hnorm, np.finfo(float).tiny)
    # nudge the shift off the eigenvalue so the factorisation stays regular
    sigma = complex(lam) + 16 * np.finfo(float).eps * scale
    rng = np.random.default_rng(seed)
    v = None
    res = np.inf
    restarts = 0
    for restarts in range(max_restarts + 1):
        start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = _inverse_iteration(a, sigma, start)
        res = np.linalg.norm(a @ v - lam * v) / scale
        if res <= tol:
            break
    else:
        raise NonConvergence(
            f"inverse iteration residual {res:.2e} above {tol:.0e} after {max_restarts} restarts",
            None,
        )
    if not return_info:
        return v
    start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = _inverse_iteration(a.conj().T, np.conj(sigma), start)
    cond = float(abs(np.vdot(y, v)))
    return v, EigvecInfo(float(res), cond, cond < defect_tol, restarts)


def is_conjugation_closed(ev, tol: float) -> bool:
    """Every eigenvalue with |Im| > tol has a conjugate partner within tol."""
    ev = np.asarray(ev)
    for lam in ev[np.abs(ev.imag) > tol]:
        if np.min(np.abs(ev - np.conj(lam))) > tol:
            return False
    return True
