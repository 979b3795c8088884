"""Radial discretisation of the alpha^2-dynamo operator matrix.

The operator acts on pairs ``(psi1, psi2)`` on ``0 <= r <= 1``::

    H = [[-Q[1],  alpha],
         [ Q[alpha], -Q[1]]],     Q[a] psi = p a p psi + a l(l+1)/r**2 psi,

with ``p = -i(d/dr + 1/r)``.  Everything here is written for ``u = r psi``,
in which ``Q[a]`` becomes the Sturm-Liouville form ``-(a u')' + a l(l+1) u / r**2``
(after dividing by r), the weight ``r**2 dr`` on psi becomes ``dr`` on u and
regularity at the origin is ``u(0) = 0``.

Boundary conditions at ``r = 1``:

* idealized: ``psi1(1) = psi2(1) = 0``, i.e. ``u1(1) = u2(1) = 0``;
* physical: ``psi1' + (l+1) psi1 / r = 0`` and ``psi2 = 0``.  With
  ``psi = u / r`` one has ``psi' = u'/r - u/r**2``, so at ``r = 1`` the Robin
  row becomes ``u1'(1) + l u1(1) = 0``.

Two grids are available.  ``fd2`` is the second-order flux-form finite
difference scheme on a uniform grid, with a one-sided second-order stencil
for the Robin row.  ``chebyshev`` is a nodal spectral scheme on
Chebyshev-Gauss-Lobatto points in symmetric weak form, with Clenshaw-Curtis
weights as a lumped mass matrix.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.special

from .krein import block_swap, pseudo_hermiticity_residual

REFERENCE_PROFILE_COEFFS = (1.0, 0.0, -26.09, 53.64, -28.22)
MIN_NODES = 8


class BoundaryCondition(enum.Enum):
    IDEALIZED = "idealized"
    PHYSICAL = "physical"

    def __str__(self):
        return self.value


class Scheme(enum.Enum):
    FD2 = "fd2"
    CHEBYSHEV = "chebyshev"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class AlphaProfile:
    """Polynomial helicity profile ``alpha(r) = c * sum(coeffs[k] * r**k)``."""

    coeffs: tuple[float, ...]
    c: float = 1.0

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coeffs)
        if not coeffs:
            raise ValueError("profile needs at least one coefficient")
        if not all(math.isfinite(a) for a in coeffs) or not math.isfinite(self.c):
            raise ValueError("profile coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "c", float(self.c))

    def shape(self, r):
        """Unscaled polynomial ``sum(coeffs[k] * r**k)`` (Horner)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for a in reversed(self.coeffs):
            out = out * r + a
        return out

    def __call__(self, r):
        return self.c * self.shape(r)

    def with_c(self, c: float) -> "AlphaProfile":
        return replace(self, c=c)

    @classmethod
    def constant(cls, value: float) -> "AlphaProfile":
        return cls((1.0,), value)

    @classmethod
    def reference(cls, c: float = 1.0) -> "AlphaProfile":
        return cls(REFERENCE_PROFILE_COEFFS, c)


def alpha_eval(profile: AlphaProfile, r: float) -> float:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r={r!r} outside [0, 1]")
    return float(profile(r))


# -- grids -------------------------------------------------------------------


def _cheb_diff(m: int):
    """Chebyshev-Gauss-Lobatto points ``cos(j pi / m)`` and differentiation matrix."""
    j = np.arange(m + 1)
    x = np.cos(np.pi * j / m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def _clenshaw_curtis(m: int) -> np.ndarray:
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    inner = np.arange(1, m)
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(m * theta[inner]) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / m
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Interior unknown locations in (0, 1); the endpoints are eliminated.

    ``weights`` are quadrature weights of ``dr`` at the interior nodes.  For the
    Chebyshev scheme the full node set (with both endpoints), the
    differentiation matrix and full weights are kept for assembly.
    """

    n: int
    nodes: np.ndarray
    scheme: Scheme
    weights: np.ndarray
    full_nodes: np.ndarray | None = field(default=None, repr=False)
    full_diff: np.ndarray | None = field(default=None, repr=False)
    full_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @classmethod
    def uniform(cls, n: int) -> "RadialGrid":
        _check_n(n)
        h = 1.0 / (n + 1)
        nodes = h * np.arange(1, n + 1)
        return cls(n, nodes, Scheme.FD2, np.full(n, h))

    @classmethod
    def chebyshev(cls, n: int) -> "RadialGrid":
        _check_n(n)
        m = n + 1
        x, d = _cheb_diff(m)
        w = _clenshaw_curtis(m)
        # x = cos(j pi / m) descends, so r = (1 - x) / 2 ascends from 0 to 1
        r = (1.0 - x) / 2.0
        d = -2.0 * d
        w = 0.5 * w
        r[0], r[-1] = 0.0, 1.0
        return cls(n, r[1:-1].copy(), Scheme.CHEBYSHEV, w[1:-1].copy(), r, d, w)


def _check_n(n: int):
    if int(n) != n or n < MIN_NODES:
        raise ValueError(f"grid needs at least {MIN_NODES} interior nodes, got {n}")


def make_grid(n: int, scheme: Scheme | str = Scheme.FD2) -> RadialGrid:
    scheme = Scheme(scheme)
    if scheme is Scheme.FD2:
        return RadialGrid.uniform(n)
    return RadialGrid.chebyshev(n)


# -- Sturm-Liouville blocks ----------------------------------------------------

Coefficient = Callable[[np.ndarray], np.ndarray]


def _fd_q(grid: RadialGrid, l: int, coef: Coefficient, robin: bool) -> np.ndarray:
    n, h = grid.n, grid.h
    r = grid.nodes
    mid = h * (np.arange(n + 1) + 0.5)
    am = np.asarray(coef(mid), dtype=float) * np.ones(n + 1)
    an = np.asarray(coef(r), dtype=float) * np.ones(n)
    ll = l * (l + 1)
    q = np.diag((am[:-1] + am[1:]) / h**2 + an * ll / r**2)
    q -= np.diag(am[1:-1] / h**2, 1) + np.diag(am[1:-1] / h**2, -1)
    if robin:
        # u_{n+1} = (4 u_n - u_{n-1}) / (3 + 2 h l), from (3u_{n+1} - 4u_n + u_{n-1})/2h + l u_{n+1} = 0
        g = 1.0 / (3.0 + 2.0 * h * l)
        q[-1, -1] -= 4.0 * g * am[-1] / h**2
        q[-1, -2] += g * am[-1] / h**2
    return q


def _cheb_embedding(grid: RadialGrid, l: int, robin: bool) -> np.ndarray:
    """Map interior values to all nodes, filling the endpoints from the BCs."""
    n = grid.n
    p = np.zeros((n + 2, n))
    p[1:-1] = np.eye(n)
    if robin:
        d = grid.full_diff
        # D[-1] u + l u(1) = 0 with u(0) = 0 solved for u(1)
        p[-1] = -d[-1, 1:-1] / (d[-1, -1] + l)
    return p


def _cheb_stiffness(grid, l, coef, trial, test, boundary_term):
    r = grid.full_nodes
    w = grid.full_weights
    d = grid.full_diff
    a = np.asarray(coef(r), dtype=float) * np.ones_like(r)
    ll = l * (l + 1)
    inv_r2 = np.zeros_like(r)
    inv_r2[1:] = 1.0 / r[1:] ** 2
    full = d.T @ ((w * a)[:, None] * d)
    full += np.diag(w * a * ll * inv_r2)
    k = test.T @ full @ trial
    if boundary_term:
        k += a[-1] * l * np.outer(test[-1], trial[-1])
    return k


def _cheb_mass(grid, test):
    return test.T @ (grid.full_weights[:, None] * test)


def q_operator(grid: RadialGrid, l: int, coef: Coefficient | float, robin: bool = False):
    """Discrete ``-(a u')' + a l(l+1) u / r**2`` with u(0)=0 and Dirichlet or Robin at r=1.

    Returned as the matrix acting on interior values (mass matrix applied).
    """
    if not callable(coef):
        value = float(coef)
        coef = lambda r, value=value: np.full_like(np.asarray(r, dtype=float), value)
    if grid.scheme is Scheme.FD2:
        return _fd_q(grid, l, coef, robin)
    p = _cheb_embedding(grid, l, robin)
    k = _cheb_stiffness(grid, l, coef, p, p, robin)
    return np.linalg.solve(_cheb_mass(grid, p), k)


# -- operator ---------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteOperator:
    """``2N x 2N`` real matrix acting on ``(u1, u2)`` samples, ``u = r psi``.

    ``weights`` is the diagonal metric used for adjoints (``H^+ = W^-1 H^T W``).
    ``representation`` is ``"natural"`` or ``"graded"`` (after :func:`to_graded_rep`).
    """

    matrix: np.ndarray
    l: int
    bc: BoundaryCondition
    profile: AlphaProfile
    grid: RadialGrid
    weights: np.ndarray
    representation: str = "natural"

    @property
    def n(self) -> int:
        return self.grid.n

    def blocks(self):
        n = self.n
        m = self.matrix
        return m[:n, :n], m[:n, n:], m[n:, :n], m[n:, n:]

    def symmetrized(self) -> np.ndarray:
        """``W^1/2 H W^-1/2``: plain transposes in this form are weighted adjoints."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.matrix / s[None, :]

    def psi(self, u) -> np.ndarray:
        """Convert a ``(u1, u2)`` vector back to ``(psi1, psi2)`` samples."""
        r = np.tile(self.grid.nodes, 2)
        return np.asarray(u) / r


def _validate_l(l):
    if int(l) != l or l < 1:
        raise ValueError(f"angular mode number must be an integer >= 1, got {l!r}")
    return int(l)


def operator_blocks(profile: AlphaProfile, l: int, grid: RadialGrid, bc: BoundaryCondition):
    """The four N x N blocks ``(H11, H12, H21, H22)``."""
    bc = BoundaryCondition(bc)
    robin = bc is BoundaryCondition.PHYSICAL
    one = lambda r: np.ones_like(r)
    if grid.scheme is Scheme.FD2:
        h11 = -_fd_q(grid, l, one, robin)
        h12 = np.diag(profile(grid.nodes))
        h21 = _fd_q(grid, l, profile, robin)
        h22 = -_fd_q(grid, l, one, False)
        return h11, h12, h21, h22
    pd = _cheb_embedding(grid, l, False)
    p1 = _cheb_embedding(grid, l, robin)
    w = grid.weights
    m1 = _cheb_mass(grid, p1)
    a_full = profile(grid.full_nodes)
    h11 = -np.linalg.solve(m1, _cheb_stiffness(grid, l, one, p1, p1, robin))
    h12 = np.linalg.solve(m1, p1.T @ ((grid.full_weights * a_full)[:, None] * pd))
    h21 = _cheb_stiffness(grid, l, profile, p1, pd, False) / w[:, None]
    h22 = -_cheb_stiffness(grid, l, one, pd, pd, False) / w[:, None]
    return h11, h12, h21, h22


def assemble(
    profile: AlphaProfile, l: int, grid: RadialGrid, bc: BoundaryCondition | str
) -> DiscreteOperator:
    l = _validate_l(l)
    _check_n(grid.n)
    bc = BoundaryCondition(bc)
    h11, h12, h21, h22 = operator_blocks(profile, l, grid, bc)
    h = np.block([[h11, h12], [h21, h22]])
    h.setflags(write=False)
    weights = np.tile(grid.weights, 2)
    return DiscreteOperator(h, l, bc, profile, grid, weights)


def pseudo_hermiticity_residual_disc(op: DiscreteOperator) -> float:
    """J-pseudo-Hermiticity residual in the weighted discrete inner product."""
    return pseudo_hermiticity_residual(block_swap(op.n), op.symmetrized())


def graded_transform(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.block([[eye, -eye], [eye, eye]]) / math.sqrt(2.0)


def to_graded_rep(op: DiscreteOperator) -> DiscreteOperator:
    """Similarity ``S^-1 H S`` that turns J into ``diag(I, -I)``."""
    s = graded_transform(op.n)
    m = s.T @ op.matrix @ s  # S is orthogonal
    m.setflags(write=False)
    return replace(op, matrix=m, representation="graded")


def graded_block_residuals(op: DiscreteOperator) -> tuple[float, float, float]:
    """Residuals of ``H++ = H++^+``, ``H-- = H--^+`` and ``H+- = -H-+^+``.

    Computed on the weighted (symmetrized) form and scaled by ``max(1, |H|_F)``.
    """
    if op.representation != "graded":
        op = to_graded_rep(op)
    hs = op.symmetrized()
    n = op.n
    hpp, hpm, hmp, hmm = hs[:n, :n], hs[:n, n:], hs[n:, :n], hs[n:, n:]
    scale = max(1.0, float(np.linalg.norm(hs)))
    return (
        float(np.linalg.norm(hpp - hpp.conj().T) / scale),
        float(np.linalg.norm(hmm - hmm.conj().T) / scale),
        float(np.linalg.norm(hpm + hmp.conj().T) / scale),
    )


# -- analytic oracle ---------------------------------------------------------------


def bisect(f, lo: float, hi: float, xtol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of ``f`` in a sign-changing bracket by plain bisection."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol * max(1.0, abs(mid)):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def spherical_jn_zeros(l: int, count: int, xtol: float = 1e-12, step: float = 0.1) -> np.ndarray:
    """First ``count`` positive zeros of the spherical Bessel function ``j_l``.

    Sign changes are bracketed on a grid of spacing ``step`` (consecutive zeros
    are roughly pi apart) and refined by bisection.
    """
    if l < 0 or count < 1:
        raise ValueError("need l >= 0 and count >= 1")
    f = lambda x: float(scipy.special.spherical_jn(l, x))
    zeros = []
    lo = 0.5 * step
    flo = f(lo)
    while len(zeros) < count:
        hi = lo + step
        fhi = f(hi)
        if flo == 0.0:
            zeros.append(lo)
        elif flo * fhi < 0:
            zeros.append(bisect(f, lo, hi, xtol))
        lo, flo = hi, fhi
    return np.array(zeros[:count])


def constant_alpha_oracle(alpha0: float, l: int, n_max: int) -> np.ndarray:
    """Exact eigenvalues ``-k**2 +/- alpha0 k`` for constant alpha and idealized BCs.

    With constant alpha, ``Q[alpha] = alpha Q[1]``; on each Dirichlet
    eigenfunction of ``Q[1]`` (eigenvalue ``k**2``, ``k`` a zero of ``j_l``)
    the operator reduces to ``[[-k**2, alpha], [alpha k**2, -k**2]]``.
    Returned as ``[k1 pair (+, -), k2 pair, ...]``.
    """
    l = _validate_l(l)
    if int(n_max) != n_max or n_max < 1:
        raise ValueError("n_max must be a positive integer")
    kappa = spherical_jn_zeros(l, int(n_max))
    out = np.empty(2 * len(kappa), dtype=complex)
    out[0::2] = -kappa**2 + alpha0 * kappa
    out[1::2] = -kappa**2 - alpha0 * kappa
    return out


def free_decay_rates(l: int, bc: BoundaryCondition | str, n_max: int) -> np.ndarray:
    """Eigenvalues for alpha = 0, sorted descending.

    Idealized BCs give ``-k**2`` twice for each zero of ``j_l``; the physical
    Robin row moves the poloidal family to the zeros of ``j_(l-1)``.
    """
    bc = BoundaryCondition(bc)
    tor = -spherical_jn_zeros(l, n_max) ** 2
    pol = tor if bc is BoundaryCondition.IDEALIZED else -spherical_jn_zeros(l - 1, n_max) ** 2
    return np.sort(np.concatenate([tor, pol]))[::-1]


def profile_zero_nodes(profile: AlphaProfile, grid: RadialGrid, rtol: float = 1e-12) -> list[int]:
    """Interior node indices at or next to a zero of alpha on [0, 1].

    A node is flagged when ``|alpha| <= rtol * max|alpha|`` there, or when alpha
    changes sign between it and a neighbour (the endpoints included).
    """
    r = np.concatenate([[0.0], grid.nodes, [1.0]])
    a = profile(r)
    amax = float(np.max(np.abs(a)))
    bad = set()
    if amax == 0.0:
        return list(range(grid.n))
    small = np.abs(a) <= rtol * amax
    for i in range(1, grid.n + 1):
        if small[i]:
            bad.add(i - 1)
    flips = np.nonzero(np.sign(a[:-1]) * np.sign(a[1:]) < 0)[0]
    for j in flips:
        for i in (j, j + 1):
            if 1 <= i <= grid.n:
                bad.add(i - 1)
    return sorted(bad)


def affine_parts(profile: AlphaProfile, l: int, grid: RadialGrid, bc) -> tuple[np.ndarray, np.ndarray]:
    """``(H0, H1)`` with ``H(C) = H0 + C H1`` for the profile shape scaled by C."""
    h0 = assemble(profile.with_c(0.0), l, grid, bc).matrix
    h1 = assemble(profile.with_c(1.0), l, grid, bc).matrix - h0
    return np.array(h0), h1


def coefficients_from(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)
