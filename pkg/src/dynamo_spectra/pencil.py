"""Quadratic pencil form of the dynamo eigenproblem and Jordan-Keldysh chains.

Writing the discrete operator as

    H = [[-Q_R,  B  ],
         [ Q_a, -Q_D]]

(``B`` the alpha multiplication, ``Q_R``/``Q_D`` the ``Q[1]`` blocks with the
first and second boundary rows), the second unknown is eliminated through
``u2 = B^-1 (Q_R + lam) u1`` and the eigenproblem becomes

    L(lam) u1 = [(Q_D + lam) B^-1 (Q_R + lam) - Q_a] u1 = 0,
    L(lam) = A2 lam**2 + A1 lam + A0,
    A2 = B^-1,  A1 = Q_D B^-1 + B^-1 Q_R,  A0 = Q_D B^-1 Q_R - Q_a.

For the idealized boundary rows ``Q_R = Q_D = Q`` and ``B = diag(alpha)``.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .eig import dense_spectrum
from .operator import (
    AlphaProfile,
    BoundaryCondition,
    DiscreteOperator,
    RadialGrid,
    operator_blocks,
    profile_zero_nodes,
)

DEFECT_SIGMA_TOL = 1e-8
SEPARATION = 10.0
DEFECT_TOL = 1e-6
CHAIN_TOL = 1e-6


class ProfileVanishes(ValueError):
    """alpha is zero at (or changes sign next to) the listed interior nodes."""

    def __init__(self, nodes, radii):
        self.nodes = list(nodes)
        self.radii = [float(r) for r in radii]
        shown = ", ".join(f"{i} (r={r:.6g})" for i, r in zip(self.nodes[:8], self.radii[:8]))
        more = "" if len(self.nodes) <= 8 else f" and {len(self.nodes) - 8} more"
        super().__init__(f"alpha vanishes near nodes {shown}{more}")


class NotDefective(ValueError):
    """lambda0 is not a defective (Jordan) eigenvalue of the pencil."""


class IllConditioned(ValueError):
    """Null space of L(lambda0) is not one-dimensional within the separation test."""


@dataclass(frozen=True)
class QuadraticPencil:
    """``L(lam) = A2 lam**2 + A1 lam + A0`` acting on ``u1`` samples.

    ``weights`` is the quadrature diagonal for the discrete inner product; the
    ``q_r``, ``b`` blocks are kept for lifting pencil vectors back to the linear problem.
    """

    a2: np.ndarray
    a1: np.ndarray
    a0: np.ndarray
    weights: np.ndarray
    profile: AlphaProfile | None = None
    l: int | None = None
    grid: RadialGrid | None = None
    bc: BoundaryCondition | None = None
    q_r: np.ndarray | None = field(default=None, repr=False)
    b: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.a2.shape[0]

    def evaluate(self, lam: complex) -> np.ndarray:
        return (self.a2 * lam + self.a1) * lam + self.a0

    def derivative(self, lam: complex) -> np.ndarray:
        return 2.0 * lam * self.a2 + self.a1

    def second_derivative(self) -> np.ndarray:
        return 2.0 * self.a2

    def scale(self, lam: complex) -> float:
        """``|A2| m**2 + |A1| m + |A0|`` with ``m = max(1, |lam|)`` (spectral norms)."""
        m = max(1.0, abs(lam))
        nrm = lambda a: float(np.linalg.norm(a, 2))
        return nrm(self.a2) * m * m + nrm(self.a1) * m + nrm(self.a0)

    @classmethod
    def from_coefficients(cls, a2, a1, a0, weights=None) -> "QuadraticPencil":
        a2, a1, a0 = (np.atleast_2d(np.asarray(a, dtype=complex)) for a in (a2, a1, a0))
        if weights is None:
            weights = np.ones(a2.shape[0])
        return cls(a2, a1, a0, np.asarray(weights, dtype=float))


def _check_profile(profile: AlphaProfile, grid: RadialGrid):
    bad = profile_zero_nodes(profile, grid)
    if bad:
        raise ProfileVanishes(bad, grid.nodes[bad])


def build_pencil(
    profile: AlphaProfile, l: int, grid: RadialGrid, bc: BoundaryCondition | str
) -> QuadraticPencil:
    bc = BoundaryCondition(bc)
    _check_profile(profile, grid)
    h11, h12, h21, h22 = operator_blocks(profile, l, grid, bc)
    q_r, b, q_a, q_d = -h11, h12, h21, -h22
    lu = scipy.linalg.lu_factor(b)
    b_inv = scipy.linalg.lu_solve(lu, np.eye(grid.n))
    a2 = b_inv
    a1 = q_d @ b_inv + b_inv @ q_r
    a0 = q_d @ b_inv @ q_r - q_a
    return QuadraticPencil(a2, a1, a0, grid.weights.copy(), profile, l, grid, bc, q_r, b)


def lift_eigenvector(psi1, lam: complex, pencil: QuadraticPencil) -> np.ndarray:
    """``(u1, B^-1 (Q_R + lam) u1)``: a pencil null vector mapped to the linear problem."""
    if pencil.b is None or pencil.q_r is None:
        raise ValueError("pencil carries no operator blocks; build it with build_pencil")
    psi1 = np.asarray(psi1, dtype=complex)
    u2 = np.linalg.solve(pencil.b, pencil.q_r @ psi1 + lam * psi1)
    return np.concatenate([psi1, u2])


class ScalarPencil(NamedTuple):
    a2: complex
    a1: complex
    a0: complex
    roots: tuple[complex, ...]
    discriminant: complex

    def m(self, lam: complex) -> complex:
        return (self.a2 * lam + self.a1) * lam + self.a0

    def dm(self, lam: complex) -> complex:
        return 2.0 * self.a2 * lam + self.a1


def scalar_pencil(psi1, pencil: QuadraticPencil) -> ScalarPencil:
    """Project the pencil on ``psi1``: ``a_j = (psi1, A_j psi1)`` and the roots of ``M(lam)``.

    The product is the weighted one, conjugate-linear in the first slot, so
    ``M(lam) = (psi1, L(lam) psi1)`` is a polynomial in lam.
    """
    psi1 = np.asarray(psi1, dtype=complex)
    if not np.any(psi1):
        raise ValueError("psi1 must be nonzero")
    w = pencil.weights
    a2, a1, a0 = (complex(np.vdot(psi1, w * (a @ psi1))) for a in (pencil.a2, pencil.a1, pencil.a0))
    disc = a1 * a1 - 4.0 * a0 * a2
    size = max(abs(a2), abs(a1), abs(a0))
    if abs(a2) <= 1e-14 * size:
        roots = () if a1 == 0 else (-a0 / a1,)
        return ScalarPencil(a2, a1, a0, roots, disc)
    root = cmath.sqrt(disc)
    return ScalarPencil(a2, a1, a0, ((-a1 + root) / (2 * a2), (-a1 - root) / (2 * a2)), disc)


@dataclass(frozen=True)
class KeldyshChain:
    """Eigenvector ``psi1`` and associated vectors ``chi1``, ``phi1`` at ``lambda0``.

    ``residuals`` are the raw 2-norms of

        L psi1,   L chi1 + L' psi1,   L phi1 + L' chi1 + L''/2 psi1,

    and ``scale`` the pencil size at lambda0 used to judge them.
    ``solvability`` holds ``|y^H L' psi1| / |L'|`` and ``|y^H (L' chi1 + L''/2 psi1)| / scale``
    for the left null vector ``y``: the first vanishes at a Jordan block, the
    second is the obstruction to a third chain member.
    """

    lambda0: complex
    psi1: np.ndarray
    chi1: np.ndarray
    phi1: np.ndarray
    residuals: tuple[float, float, float]
    scale: float
    sigma: tuple[float, float]
    solvability: tuple[float, float]

    def relative_residuals(self) -> tuple[float, ...]:
        return tuple(r / self.scale for r in self.residuals)

    def within(self, tol: float = CHAIN_TOL) -> bool:
        return all(r <= tol for r in self.relative_residuals())


def _chain_residuals(pencil, lam, psi, chi, phi):
    lmat = pencil.evaluate(lam)
    dmat = pencil.derivative(lam)
    half = 0.5 * pencil.second_derivative()
    return (
        float(np.linalg.norm(lmat @ psi)),
        float(np.linalg.norm(lmat @ chi + dmat @ psi)),
        float(np.linalg.norm(lmat @ phi + dmat @ chi + half @ psi)),
    )


def chain_residuals(pencil: QuadraticPencil, chain: KeldyshChain) -> tuple[float, float, float]:
    return _chain_residuals(pencil, chain.lambda0, chain.psi1, chain.chi1, chain.phi1)


def solve_keldysh_chain(
    pencil: QuadraticPencil,
    lambda0: complex,
    *,
    sigma_tol: float = DEFECT_SIGMA_TOL,
    defect_tol: float = DEFECT_TOL,
) -> KeldyshChain:
    """Jordan-Keldysh chain of length three at a defective pencil eigenvalue.

    ``psi1`` is the smallest right singular vector of ``L(lambda0)``.  The
    associated vectors solve ``L chi1 = -L' psi1`` and
    ``L phi1 = -L' chi1 - L''/2 psi1`` by the SVD pseudo-inverse with the
    smallest singular direction dropped, so both come out orthogonal to psi1.
    """
    lam = complex(lambda0)
    lmat = pencil.evaluate(lam)
    dmat = pencil.derivative(lam)
    half = 0.5 * pencil.second_derivative()
    scale = pencil.scale(lam)
    u, s, vh = np.linalg.svd(lmat)
    smin = float(s[-1])
    s2 = float(s[-2]) if len(s) > 1 else np.inf
    if smin > sigma_tol * scale:
        raise NotDefective(
            f"smallest singular value {smin:.3e} exceeds {sigma_tol:.0e} x scale {scale:.3e}"
        )
    if s2 < SEPARATION * smin or s2 <= sigma_tol * scale:
        raise IllConditioned(
            f"second singular value {s2:.3e} not separated from smallest {smin:.3e}"
        )
    psi = vh[-1].conj()
    y = u[:, -1]
    dnorm = max(float(np.linalg.norm(dmat, 2)), np.finfo(float).tiny)
    c2 = float(abs(np.vdot(y, dmat @ psi))) / dnorm
    if c2 > defect_tol:
        raise NotDefective(
            f"left/right null vectors see L' at {c2:.3e} > {defect_tol:.0e}: eigenvalue is simple"
        )

    def solve(rhs):
        coef = (u[:, :-1].conj().T @ rhs) / s[:-1]
        return vh[:-1].conj().T @ coef

    chi = solve(-dmat @ psi)
    rhs3 = dmat @ chi + half @ psi
    phi = solve(-rhs3)
    c3 = float(abs(np.vdot(y, rhs3))) / scale
    res = _chain_residuals(pencil, lam, psi, chi, phi)
    return KeldyshChain(lam, psi, chi, phi, res, scale, (smin, s2), (c2, c3))


@dataclass(frozen=True)
class EquivalenceReport:
    """Worst ``sigma_min(L(lam_i)) / scale(lam_i)`` over the linear eigenvalues
    and worst linear residual of lifted pencil null vectors over a sample."""

    sigma_ratios: np.ndarray
    worst: float
    worst_lambda: complex
    lift_residuals: np.ndarray
    worst_lift: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol and self.worst_lift <= self.tol


def pencil_linear_equivalence(
    pencil: QuadraticPencil,
    linear_op: DiscreteOperator,
    tol: float = 1e-8,
    sample: int = 8,
    eigenvalues=None,
) -> EquivalenceReport:
    """Check that linear eigenvalues are pencil roots and pencil null vectors lift back."""
    h = np.asarray(linear_op.matrix)
    if eigenvalues is None:
        eigenvalues = dense_spectrum(h).eigenvalues
    ev = np.asarray(eigenvalues, dtype=complex)
    hnorm = float(np.linalg.norm(h, 2))
    ratios = np.empty(len(ev))
    nulls = []
    for i, lam in enumerate(ev):
        _, s, vh = np.linalg.svd(pencil.evaluate(lam))
        ratios[i] = s[-1] / pencil.scale(lam)
        nulls.append(vh[-1].conj())
    k = int(np.argmax(ratios))
    picks = np.unique(np.linspace(0, len(ev) - 1, min(sample, len(ev))).round().astype(int))
    lifts = np.empty(len(picks))
    for j, i in enumerate(picks):
        x = lift_eigenvector(nulls[i], ev[i], pencil)
        lifts[j] = np.linalg.norm(h @ x - ev[i] * x) / (hnorm * np.linalg.norm(x))
    return EquivalenceReport(
        ratios, float(ratios[k]), complex(ev[k]), lifts, float(lifts.max()), tol
    )
