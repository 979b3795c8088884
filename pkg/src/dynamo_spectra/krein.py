"""Indefinite inner products and involutive pseudo-Hermiticity.

All inner products in this package are conjugate-linear in the *first*
argument, ``(x, y) = sum(conj(x) * y)``.  The Krein product built on an
involution ``eta`` is ``[x, y] = (eta x, y)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

EXACT_TOL = 1e-12

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class InvolutionError(ValueError):
    """Matrix fails eta**2 = I or eta = eta^dagger."""


class VectorType(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    ISOTROPIC = "Isotropic"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Involution:
    """Hermitian involution ``eta`` with ``eta @ eta == I``."""

    matrix: np.ndarray
    tol: float = EXACT_TOL

    def __post_init__(self):
        m = np.array(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvolutionError(f"involution must be square, got shape {m.shape}")
        n = m.shape[0]
        if np.linalg.norm(m @ m - np.eye(n)) > self.tol:
            raise InvolutionError("eta @ eta differs from the identity")
        if np.linalg.norm(m - m.conj().T) > self.tol:
            raise InvolutionError("eta is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class GradingProjectors:
    p_plus: np.ndarray
    p_minus: np.ndarray

    def split(self, x):
        """Return the (even, odd) components of ``x``."""
        x = np.asarray(x)
        return self.p_plus @ x, self.p_minus @ x


@dataclass(frozen=True)
class PlusClass:
    """det(eta) = +1, so eta = sign * I."""

    sign: int


@dataclass(frozen=True)
class MinusClass:
    """det(eta) = -1, eta = a1*sigma1 + a2*sigma2 + a3*sigma3 with a unit vector a."""

    a1: float
    a2: float
    a3: float

    def matrix(self) -> np.ndarray:
        return self.a1 * _PAULI[0] + self.a2 * _PAULI[1] + self.a3 * _PAULI[2]


def _as_eta(eta) -> np.ndarray:
    if isinstance(eta, Involution):
        return eta.matrix
    return np.asarray(eta)


def inner(x, y, weights=None) -> complex:
    """Hilbert inner product, conjugate-linear in ``x``; optional diagonal weights."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if weights is None:
        return complex(np.vdot(x, y))
    return complex(np.vdot(x, np.asarray(weights) * y))


def krein_product(eta, x, y) -> complex:
    """Indefinite product ``[x, y] = (eta x, y)``."""
    m = _as_eta(eta)
    x = np.asarray(x)
    y = np.asarray(y)
    if m.shape[1] != x.shape[0] or x.shape != y.shape:
        raise ValueError(
            f"dimension mismatch: eta {m.shape}, x {x.shape}, y {y.shape}"
        )
    return inner(m @ x, y)


def vector_type(eta, x, tol: float = 1e-9) -> VectorType:
    """Classify ``x`` by the sign of ``[x, x]`` relative to ``tol * |x|**2``."""
    x = np.asarray(x)
    norm2 = float(np.vdot(x, x).real)
    if norm2 == 0.0:
        raise ValueError("vector_type is undefined for the zero vector")
    q = krein_product(eta, x, x).real
    if q > tol * norm2:
        return VectorType.POSITIVE
    if q < -tol * norm2:
        return VectorType.NEGATIVE
    return VectorType.ISOTROPIC


def pseudo_hermiticity_residual(eta, h) -> float:
    """Relative residual ``|eta H^+ eta^-1 - H|_F / max(1, |H|_F)``.

    Zero exactly when ``H`` is ``eta``-pseudo-Hermitian.
    """
    m = _as_eta(eta)
    h = np.asarray(h)
    if m.shape != h.shape or h.shape[0] != h.shape[1]:
        raise ValueError(f"dimension mismatch: eta {m.shape}, H {h.shape}")
    if isinstance(eta, Involution):
        m_inv = m
    else:
        m_inv = np.linalg.inv(m)
    diff = m @ h.conj().T @ m_inv - h
    return float(np.linalg.norm(diff) / max(1.0, np.linalg.norm(h)))


def classify_involution(eta) -> PlusClass | MinusClass:
    """Sort a 2x2 involution into the +/- determinant classes."""
    m = np.asarray(_as_eta(eta), dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"classify_involution needs a 2x2 matrix, got {m.shape}")
    if not isinstance(eta, Involution):
        Involution(m)
    det = np.linalg.det(m)
    if abs(det - 1) <= EXACT_TOL:
        return PlusClass(1 if m[0, 0].real > 0 else -1)
    # Pauli coefficients: a_k = tr(sigma_k eta) / 2, real for Hermitian eta
    a = [0.5 * np.trace(s @ m).real for s in _PAULI]
    return MinusClass(*a)


def grading_projectors(mu) -> GradingProjectors:
    """Projectors ``(I +/- mu) / 2`` onto the mu-even and mu-odd subspaces."""
    m = _as_eta(mu)
    eye = np.eye(m.shape[0])
    return GradingProjectors(0.5 * (eye + m), 0.5 * (eye - m))


def block_swap(n: int) -> Involution:
    """The 2n x 2n block anti-diagonal involution ``[[0, I], [I, 0]]``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return Involution(np.block([[zero, eye], [eye, zero]]))
