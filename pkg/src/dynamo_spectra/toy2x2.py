"""Closed-form analysis of the sigma3-pseudo-Hermitian 2x2 model.

The model matrix is

    H = [[e0 + f,        b1 + i b2],
         [-(b1 - i b2),  e0 - f   ]]

with real parameters.  Its eigenvalues are ``e0 -/+ sqrt(delta)`` with the
discriminant ``delta = f**2 - b1**2 - b2**2``; the double cone ``delta = 0``
carries exceptional points (Jordan blocks) and the apex ``f = b = 0`` is a
diabolic point.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .krein import Involution, VectorType, krein_product, vector_type

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
MINUS_SIGMA3 = -SIGMA3

DEFAULT_TOL = 1e-9


class DegenerateInput(ValueError):
    """Point lies on the exceptional cone; use :func:`jordan_at_ep`."""


class NotOnCone(ValueError):
    pass


class ApexPoint(ValueError):
    """Point is the diabolic apex f = b = 0."""


class Regime(enum.Enum):
    REAL_PAIR = "RealPair"
    COMPLEX_CONJUGATE_PAIR = "ComplexConjugatePair"
    EXCEPTIONAL_CONE = "ExceptionalCone"
    DIABOLIC_POINT = "DiabolicPoint"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ToyPoint:
    e0: float
    f: float
    b1: float
    b2: float

    @property
    def b(self) -> complex:
        return complex(self.b1, self.b2)

    @property
    def b_abs(self) -> float:
        return math.hypot(self.b1, self.b2)

    def matrix(self) -> np.ndarray:
        b = self.b
        return np.array(
            [[self.e0 + self.f, b], [-b.conjugate(), self.e0 - self.f]], dtype=complex
        )

    def spin_matrix(self) -> np.ndarray:
        """Hermitian counterpart with the sign of the lower-left entry flipped."""
        b = self.b
        return np.array(
            [[self.e0 + self.f, b], [b.conjugate(), self.e0 - self.f]], dtype=complex
        )


@dataclass(frozen=True)
class ToyClassification:
    delta: float
    regime: Regime
    eta: Involution | None = None
    krein_types: tuple[VectorType, VectorType] | None = None


@dataclass(frozen=True)
class EigenDecomposition:
    """``H = s @ d @ inv(s)``; ``eta`` is the involution making ``d`` pseudo-Hermitian."""

    s: np.ndarray
    d: np.ndarray
    eta: Involution | None
    epsilon: complex

    def reconstruct(self) -> np.ndarray:
        return self.s @ self.d @ np.linalg.inv(self.s)


def discriminant(p: ToyPoint) -> float:
    return p.f * p.f - p.b1 * p.b1 - p.b2 * p.b2


def spin_discriminant(p: ToyPoint) -> float:
    return p.f * p.f + p.b1 * p.b1 + p.b2 * p.b2


def _epsilon(delta: float) -> complex:
    # principal branch: +sqrt for delta >= 0, +i sqrt|delta| otherwise
    if delta >= 0:
        return complex(math.sqrt(delta), 0.0)
    return complex(0.0, math.sqrt(-delta))


def eigenvalues(p: ToyPoint) -> tuple[complex, complex]:
    """Return ``(E-, E+) = (e0 - eps, e0 + eps)`` with ``eps = sqrt(delta)``."""
    eps = _epsilon(discriminant(p))
    return complex(p.e0) - eps, complex(p.e0) + eps


def spin_eigenvalues(p: ToyPoint) -> tuple[float, float]:
    root = math.sqrt(spin_discriminant(p))
    return p.e0 - root, p.e0 + root


def on_cone(p: ToyPoint, tol: float = DEFAULT_TOL) -> bool:
    # relative test keeps the decision invariant under H -> c H
    b2 = p.b1 * p.b1 + p.b2 * p.b2
    return abs(discriminant(p)) <= tol * max(p.f * p.f, b2, tol)


def is_apex(p: ToyPoint, tol: float = DEFAULT_TOL) -> bool:
    return abs(p.f) <= tol and p.b_abs <= tol


def eta_for(p: ToyPoint) -> Involution:
    """Involution that makes the diagonal form pseudo-Hermitian (nondegenerate points)."""
    if discriminant(p) < 0:
        return Involution(SIGMA1)
    return Involution(MINUS_SIGMA3 if p.f > 0 else SIGMA3)


def classify_point(p: ToyPoint, tol: float = DEFAULT_TOL) -> ToyClassification:
    if tol <= 0:
        raise ValueError("tol must be positive")
    delta = discriminant(p)
    if is_apex(p, tol):
        return ToyClassification(delta, Regime.DIABOLIC_POINT)
    if on_cone(p, tol):
        return ToyClassification(delta, Regime.EXCEPTIONAL_CONE)
    regime = Regime.REAL_PAIR if delta > 0 else Regime.COMPLEX_CONJUGATE_PAIR
    return ToyClassification(delta, regime, eta_for(p), eigenvector_krein_types(p, tol))


def diagonalize(p: ToyPoint, tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Pseudo-Hermiticity preserving diagonalization ``H = S D S^-1`` with det S = 1.

    The free column scales of S are fixed so that ``S^+ sigma3 S`` is the
    involution of :func:`eta_for`.  For delta > 0 the first scale is real
    positive; for delta < 0 its phase is forced and the two columns are given
    equal norm.  At ``b = 0`` the delta > 0 formulas reduce to ``S = I``
    (f < 0) or the rotation ``[[0, -1], [1, 0]]`` (f > 0), which keeps the
    ``(E-, E+)`` order.
    """
    delta = discriminant(p)
    if on_cone(p, tol) or is_apex(p, tol):
        raise DegenerateInput(f"delta={delta!r} is degenerate at tolerance {tol}")
    eps = _epsilon(delta)
    e0, f = p.e0, p.f
    d = np.diag([e0 - eps, e0 + eps])
    babs = p.b_abs
    ph = p.b / babs if babs > 0 else 1.0
    if delta > 0:
        # columns written without dividing by b so that b -> 0 is smooth
        e = eps.real
        u = math.sqrt((e + abs(f)) / (2 * e))
        g = babs / math.sqrt(2 * e * (e + abs(f)))
        if f > 0:
            s = np.array([[-ph * g, -u], [u, np.conj(ph) * g]], dtype=complex)
        else:
            s = np.array([[ph * u, g], [g, np.conj(ph) * u]], dtype=complex)
    else:
        e = eps.imag
        bc = p.b.conjugate()
        # conj(g1)/g1 = b / (f + i e); pick the root with positive real part
        phase = cmath.phase(p.b / complex(f, e))
        theta = -0.5 * phase
        if math.cos(theta) < 0:
            theta += math.pi
        g1 = math.sqrt(babs / (2 * e)) * cmath.exp(1j * theta)
        g2 = bc / (2 * eps * g1)
        s = np.array(
            [[(-f + eps) / bc * g1, (-f - eps) / bc * g2], [g1, g2]], dtype=complex
        )
    return EigenDecomposition(s, d, eta_for(p), eps)


def jordan_at_ep(p: ToyPoint, tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Jordan form on the exceptional cone ``f = +/-|b| != 0``.

    The first column of S is the geometric eigenvector and the second the
    associated vector, normalised so that ``D = [[E, 1], [0, E]]``.
    """
    if is_apex(p, tol):
        raise ApexPoint("the cone apex is diabolic, not a Jordan block")
    if not on_cone(p, tol):
        raise NotOnCone(f"delta={discriminant(p)!r} is not zero within tolerance")
    babs = p.b_abs
    bc = p.b.conjugate()
    sign = 1.0 if p.f > 0 else -1.0
    e = complex(p.e0)
    s = np.array([[-sign * babs / bc, -1.0 / bc], [1.0, 0.0]], dtype=complex)
    d = np.array([[e, 1.0], [0.0, e]], dtype=complex)
    return EigenDecomposition(s, d, None, 0j)


def jordan_chain_check(d, e) -> tuple[float, float, float]:
    """Residual norms of ``(D-E)|->``, ``(D-E)|+> - |->`` and ``(D-E)^2 |+>``."""
    d = np.asarray(d, dtype=complex)
    minus = np.array([1.0, 0.0])
    plus = np.array([0.0, 1.0])
    a = d - e * np.eye(2)
    return (
        float(np.linalg.norm(a @ minus)),
        float(np.linalg.norm(a @ plus - minus)),
        float(np.linalg.norm(a @ a @ plus)),
    )


def eigenvector_krein_types(
    p: ToyPoint, tol: float = DEFAULT_TOL
) -> tuple[VectorType, VectorType]:
    """Krein types of the diagonal-basis eigenvectors ``(|->, |+>)`` under eta."""
    if on_cone(p, tol) or is_apex(p, tol):
        raise DegenerateInput("Krein types are undefined on the degeneracy cone")
    eta = eta_for(p)
    minus = np.array([1.0, 0.0])
    plus = np.array([0.0, 1.0])
    return vector_type(eta, minus), vector_type(eta, plus)


def krein_gram(p: ToyPoint) -> np.ndarray:
    """Matrix of ``[i, j]_eta`` over the basis ``(|->, |+>)``."""
    eta = eta_for(p)
    basis = np.eye(2)
    return np.array(
        [[krein_product(eta, basis[i], basis[j]) for j in range(2)] for i in range(2)]
    )


def su_decompose(p: ToyPoint) -> tuple[float, float, float, float]:
    """Coefficients ``(e0, c1, c2, c3)`` with ``iH = i e0 I + c1 s1 + c2 s2 + i c3 s3``."""
    ih = 1j * p.matrix()
    s1 = SIGMA1.astype(complex)
    s2 = np.array([[0, -1j], [1j, 0]])
    s3 = SIGMA3.astype(complex)
    e0 = (np.trace(ih) / 2).imag
    c1 = (np.trace(s1 @ ih) / 2).real
    c2 = (np.trace(s2 @ ih) / 2).real
    c3 = (np.trace(s3 @ ih) / (2j)).real
    return float(e0), float(c1), float(c2), float(c3)


def eta_label(eta: Involution | None) -> str:
    """Short name for the involutions that occur in the sign table."""
    if eta is None:
        return "none"
    m = eta.matrix
    for name, ref in (("sigma1", SIGMA1), ("sigma3", SIGMA3), ("-sigma3", MINUS_SIGMA3)):
        if np.allclose(m, ref, atol=1e-12):
            return name
    return np.array2string(m)
