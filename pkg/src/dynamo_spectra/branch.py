"""Parameter sweeps in C, branch tracking and exceptional-point refinement.

The operator is affine in the profile scale, ``H(C) = H0 + C H1``, so both
parts are assembled once and each sweep point costs one dense eigensolve.
Eigenvalues are joined into branches by assignment against a linear
extrapolation from the previous two sweep points.  A real pair colliding
and leaving the axis as a conjugate pair is located by bisection on the
sign of ``Re((la - lb)**2)``, which is positive for two real values and
negative for a conjugate pair.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from .eig import NonConvergence, Spectrum, dense_spectrum
from .operator import AlphaProfile, BoundaryCondition, RadialGrid, affine_parts

IM_TOL_REL = 1e-7
AMBIGUITY_TOL = 1e-10
REFINE_RTOL = 1e-8
FIGURE_BRANCHES = 18


class LostBracket(RuntimeError):
    """The colliding pair could not be followed inside the bracket."""


class NoSignChange(ValueError):
    """The spectral abscissa has the same sign at both ends of the bracket."""


class TransitionKind(enum.Enum):
    REAL_TO_COMPLEX = "RealToComplex"
    COMPLEX_TO_REAL = "ComplexToReal"
    NEAR_MISS = "NearMiss"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class AffineFamily:
    """Matrix family ``H(C) = h0 + C h1``."""

    h0: np.ndarray
    h1: np.ndarray
    config: dict = field(default_factory=dict)

    def matrix(self, c: float) -> np.ndarray:
        return self.h0 + c * self.h1

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @classmethod
    def from_profile(
        cls, profile: AlphaProfile, l: int, grid: RadialGrid, bc: BoundaryCondition | str
    ) -> "AffineFamily":
        bc = BoundaryCondition(bc)
        h0, h1 = affine_parts(profile, l, grid, bc)
        config = {
            "coeffs": profile.coeffs,
            "l": l,
            "bc": str(bc),
            "n": grid.n,
            "scheme": str(grid.scheme),
        }
        return cls(h0, h1, config)


@dataclass(frozen=True)
class SweepResult:
    c_values: np.ndarray
    spectra: list[Spectrum]
    config: dict
    failed: tuple[int, ...] = ()
    family: AffineFamily | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.c_values)

    @property
    def norm(self) -> float:
        """Largest matrix 2-norm over the sweep."""
        return max(s.norm for s in self.spectra)

    def default_im_tol(self) -> float:
        return IM_TOL_REL * self.norm


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``DYNAMO_THREADS`` (0 = all cores)."""
    if threads is None:
        threads = int(os.environ.get("DYNAMO_THREADS", "0") or 0)
    if threads < 0:
        raise ValueError("thread count must be >= 0")
    return threads or (os.cpu_count() or 1)


def _solve_point(args):
    family, c, backend = args
    try:
        return dense_spectrum(family.matrix(c), backend=backend), False
    except NonConvergence as exc:
        return exc.partial, True


def sweep_family(
    family: AffineFamily,
    c_grid: Sequence[float],
    *,
    threads: int | None = None,
    backend: str = "qr",
) -> SweepResult:
    """Full spectra of ``family`` at each C, gathered in C order.

    Points whose QR iteration does not converge keep their partial spectra
    and are listed in ``failed``.
    """
    c = np.asarray(c_grid, dtype=float)
    if c.ndim != 1 or len(c) == 0:
        raise ValueError("c_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(c) <= 0):
        raise ValueError("c_grid must be strictly increasing")
    jobs = [(family, float(x), backend) for x in c]
    workers = min(thread_count(threads), len(jobs))
    if workers == 1:
        out = list(map(_solve_point, jobs))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_solve_point, jobs))
    spectra = [s for s, _ in out]
    failed = tuple(i for i, (_, bad) in enumerate(out) if bad)
    return SweepResult(c, spectra, dict(family.config), failed, family)


def sweep(
    profile_base: AlphaProfile,
    l: int,
    bc: BoundaryCondition | str,
    grid: RadialGrid,
    c_grid: Sequence[float],
    *,
    threads: int | None = None,
    backend: str = "qr",
) -> SweepResult:
    """Sweep ``alpha = C * shape(r)`` over ``c_grid`` (the profile's own ``c`` is ignored)."""
    family = AffineFamily.from_profile(profile_base, l, grid, bc)
    return sweep_family(family, c_grid, threads=threads, backend=backend)


# -- matching -----------------------------------------------------------------------


@dataclass
class Branch:
    id: int
    c: list[float] = field(default_factory=list)
    values: list[complex] = field(default_factory=list)
    flags: dict[str, list[float]] = field(default_factory=dict)

    @property
    def points(self) -> list[tuple[float, complex]]:
        return list(zip(self.c, self.values))

    def flag(self, name: str, c: float):
        self.flags.setdefault(name, []).append(c)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)

    def predict(self, c_next: float) -> complex:
        if len(self.values) < 2:
            return self.values[-1]
        c1, c0 = self.c[-1], self.c[-2]
        v1, v0 = self.values[-1], self.values[-2]
        return v1 + (v1 - v0) * (c_next - c1) / (c1 - c0)


def _greedy(cost: np.ndarray) -> np.ndarray:
    rows, cols = cost.shape
    assign = np.full(rows, -1)
    # stable order keeps tie-breaks deterministic: lower row, then lower column
    order = np.argsort(cost, axis=None, kind="stable")
    used_r = np.zeros(rows, bool)
    used_c = np.zeros(cols, bool)
    left = rows
    for flat in order:
        i, j = divmod(int(flat), cols)
        if used_r[i] or used_c[j]:
            continue
        assign[i] = j
        used_r[i] = used_c[j] = True
        left -= 1
        if left == 0:
            break
    return assign


def assign(cost: np.ndarray) -> tuple[np.ndarray, bool]:
    """Row-to-column assignment; greedy unless it costs over twice the row-minima bound."""
    rows = np.arange(cost.shape[0])
    greedy = _greedy(cost)
    total = cost[rows, greedy].sum()
    bound = cost.min(axis=1).sum()
    if total <= 2.0 * bound:
        return greedy, False
    r, c = scipy.optimize.linear_sum_assignment(cost)
    out = np.empty(cost.shape[0], int)
    out[r] = c
    # keep greedy when it is already optimal (identical cost, deterministic order)
    if cost[rows, out].sum() >= total:
        return greedy, False
    return out, True


def match_branches(sweep: SweepResult, m: int, margin: int | None = None) -> list[Branch]:
    """Follow the ``m`` leading eigenvalues across the sweep.

    At each step the candidates are the leading ``m + margin`` eigenvalues of
    the next spectrum.  Branches record ``AmbiguousMatching`` where a
    branch's two cheapest candidates are distinct eigenvalues with costs
    within ``1e-10``, and ``Hungarian`` where the greedy pass was replaced.
    """
    if m < 1:
        raise ValueError("m must be positive")
    size = min(len(s) for s in sweep.spectra)
    if m > size:
        raise ValueError(f"m={m} exceeds spectrum size {size}")
    if margin is None:
        margin = max(4, m // 2)
    c = sweep.c_values
    first = sweep.spectra[0].eigenvalues[:m]
    branches = [Branch(j, [float(c[0])], [complex(v)]) for j, v in enumerate(first)]
    for k in range(1, len(c)):
        cand = sweep.spectra[k].eigenvalues[: min(len(sweep.spectra[k]), m + margin)]
        pred = np.array([b.predict(c[k]) for b in branches])
        cost = np.abs(pred[:, None] - cand[None, :])
        cols, hungarian = assign(cost)
        for j, b in enumerate(branches):
            b.c.append(float(c[k]))
            b.values.append(complex(cand[cols[j]]))
            if hungarian:
                b.flag("Hungarian", float(c[k]))
            if cost.shape[1] > 1:
                two = np.argsort(cost[j], kind="stable")[:2]
                if (
                    abs(cost[j, two[1]] - cost[j, two[0]]) < AMBIGUITY_TOL
                    and abs(cand[two[1]] - cand[two[0]]) > AMBIGUITY_TOL
                ):
                    b.flag("AmbiguousMatching", float(c[k]))
    return branches


def min_gap(a: Branch, b: Branch) -> float:
    return float(np.min(np.abs(a.array() - b.array())))


def distinct(a: Branch, b: Branch, im_tol: float) -> bool:
    """Branches never come closer than ten times ``im_tol``."""
    return min_gap(a, b) > 10.0 * im_tol


# -- transitions --------------------------------------------------------------------


@dataclass(frozen=True)
class TransitionEvent:
    kind: TransitionKind
    c_low: float
    c_high: float
    c_star: float
    lambda_star: complex
    branch_ids: tuple[int, int]
    lambda_low: tuple[complex, complex] = (0j, 0j)
    lambda_high: tuple[complex, complex] = (0j, 0j)
    flags: frozenset[str] = frozenset()
    exponent: float | None = None
    gap_star: float | None = None

    @property
    def multi_branch(self) -> bool:
        return "MultiBranch" in self.flags


def _event_kind(before: bool, after: bool) -> TransitionKind | None:
    if not before and after:
        return TransitionKind.REAL_TO_COMPLEX
    if before and not after:
        return TransitionKind.COMPLEX_TO_REAL
    return None


def detect_transitions(branches: list[Branch], im_tol: float) -> list[TransitionEvent]:
    """Intervals where two branches switch between a real pair and a conjugate pair.

    A branch is complex where ``|Im| > im_tol``.  Switching branches in one
    interval are paired by conjugate closeness on the complex side.  An
    event is flagged ``MultiBranch`` when a third branch comes within twice the
    pair separation of the pair centre inside the interval, and ``Unpaired``
    when the partner is not among the tracked branches.
    """
    if not branches or len(branches[0].c) < 2:
        return []
    c = np.asarray(branches[0].c)
    vals = np.array([b.array() for b in branches])
    cplx = np.abs(vals.imag) > im_tol
    events = []
    for k in range(len(c) - 1):
        switching = [j for j in range(len(branches)) if cplx[j, k] != cplx[j, k + 1]]
        used = set()
        for j in switching:
            if j in used:
                continue
            kind = _event_kind(cplx[j, k], cplx[j, k + 1])
            side = k + 1 if kind is TransitionKind.REAL_TO_COMPLEX else k
            partners = [
                i for i in switching
                if i != j and i not in used and _event_kind(cplx[i, k], cplx[i, k + 1]) is kind
            ]
            flags = set()
            if partners:
                target = np.conj(vals[j, side])
                i = min(partners, key=lambda i: (abs(vals[i, side] - target), i))
                used.update((i, j))
                pair = (min(i, j), max(i, j))
            else:
                used.add(j)
                pair = (j, -1)
                flags.add("Unpaired")
            lo = tuple(complex(vals[p, k]) for p in pair if p >= 0)
            hi = tuple(complex(vals[p, k + 1]) for p in pair if p >= 0)
            if len(lo) == 1:
                lo, hi = (lo[0], np.conj(lo[0])), (hi[0], np.conj(hi[0]))
            if _crowded(vals, pair, k, lo, hi):
                flags.add("MultiBranch")
            centre = 0.5 * (sum(lo) + sum(hi)) / 2
            events.append(
                TransitionEvent(
                    kind, float(c[k]), float(c[k + 1]), 0.5 * float(c[k] + c[k + 1]),
                    complex(centre.real, 0.0), pair, lo, hi, frozenset(flags),
                )
            )
    return events


def _crowded(vals, pair, k, lo, hi) -> bool:
    radius = 2.0 * max(abs(lo[0] - lo[1]), abs(hi[0] - hi[1]))
    for col, ends in ((k, lo), (k + 1, hi)):
        centre = 0.5 * (ends[0] + ends[1])
        near = np.abs(vals[:, col] - centre) <= radius
        for p in pair:
            if p >= 0:
                near[p] = False
        if near.any():
            return True
    return False


# -- refinement ------------------------------------------------------------------------


def _nearest_pair(ev: np.ndarray, centre: complex) -> tuple[complex, complex]:
    idx = np.argsort(np.abs(ev - centre), kind="stable")[:2]
    a, b = ev[idx[0]], ev[idx[1]]
    return (a, b) if (a.real, a.imag) >= (b.real, b.imag) else (b, a)


@dataclass
class _PairTracker:
    family: AffineFamily
    event: TransitionEvent
    backend: str = "qr"
    evals: int = 0

    def centre(self, c: float) -> complex:
        e = self.event
        lo = 0.5 * (e.lambda_low[0] + e.lambda_low[1])
        hi = 0.5 * (e.lambda_high[0] + e.lambda_high[1])
        if e.c_high == e.c_low:
            return lo
        t = (c - e.c_low) / (e.c_high - e.c_low)
        return lo + t * (hi - lo)

    def pair(self, c: float) -> tuple[complex, complex]:
        self.evals += 1
        ev = dense_spectrum(self.family.matrix(c), backend=self.backend).eigenvalues
        return _nearest_pair(ev, self.centre(c))

    def d(self, c: float) -> float:
        a, b = self.pair(c)
        return float(((a - b) ** 2).real)

    def gap(self, c: float) -> float:
        a, b = self.pair(c)
        return float(abs(a - b))


def fit_exponent(gap: Callable[[float], float], c_star: float, side: float, width: float,
                 decades: tuple[float, float] = (1.0, 4.0), points: int = 9) -> float:
    """Slope of ``log gap`` against ``log |C - C*|`` at ``C* + side * width * 10**-k``."""
    k = np.linspace(decades[0], decades[1], points)
    delta = width * 10.0 ** (-k)
    g = np.array([gap(c_star + side * d) for d in delta])
    ok = g > 0
    if ok.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(delta[ok]), np.log(g[ok]), 1)
    return float(slope)


def refine_ep(
    event: TransitionEvent,
    family: AffineFamily,
    *,
    rtol: float = REFINE_RTOL,
    backend: str = "qr",
    fit: bool = True,
) -> TransitionEvent:
    """Shrink the event bracket around the collision and fit the square-root exponent.

    The pair followed is the two eigenvalues nearest the pair centre, which is
    interpolated between the bracket ends.  Without a sign change of
    ``Re((la - lb)**2)`` the event is a near miss: the minimum gap over the
    bracket is stored in ``gap_star``.  If the followed pair jumps away from
    the interpolated centre the bracket is re-sampled on a local grid, and
    ``LostBracket`` is raised when no sign change survives.
    """
    if event.c_high <= event.c_low:
        return event
    tr = _PairTracker(family, event, backend)
    lo, hi = event.c_low, event.c_high
    dlo, dhi = tr.d(lo), tr.d(hi)
    if not dlo * dhi < 0:
        res = scipy.optimize.minimize_scalar(
            tr.gap, bounds=(lo, hi), method="bounded",
            options={"xatol": rtol * max(1.0, abs(lo), abs(hi))},
        )
        a, b = tr.pair(float(res.x))
        return replace(
            event, kind=TransitionKind.NEAR_MISS, c_star=float(res.x),
            lambda_star=complex(0.5 * (a + b)), gap_star=float(abs(a - b)),
        )
    reach = 4.0 * max(
        abs(event.lambda_low[0] - event.lambda_low[1]),
        abs(event.lambda_high[0] - event.lambda_high[1]),
    ) + 1e-8 * max(1.0, abs(tr.centre(lo)))
    while hi - lo > rtol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        a, b = tr.pair(mid)
        if abs(0.5 * (a + b) - tr.centre(mid)) > reach:
            lo, hi, dlo, dhi = _resample(tr, lo, hi)
            continue
        dm = float(((a - b) ** 2).real)
        if dm == 0.0:
            lo = hi = mid
            dlo = dhi = 0.0
            break
        if dm * dlo > 0:
            lo, dlo = mid, dm
        else:
            hi, dhi = mid, dm
    c_star = lo if dhi == dlo else lo + (hi - lo) * dlo / (dlo - dhi)
    c_star = _secant_polish(tr, c_star, lo, hi)
    a, b = tr.pair(c_star)
    exponent = None
    if fit:
        real_side = -1.0 if dlo > 0 else 1.0
        width = event.c_high - event.c_low
        exponent = fit_exponent(tr.gap, c_star, real_side, width)
    return replace(
        event, c_low=lo, c_high=hi, c_star=float(c_star),
        lambda_star=complex(0.5 * (a + b)), gap_star=float(abs(a - b)), exponent=exponent,
    )


def _secant_polish(tr: _PairTracker, c0: float, lo: float, hi: float, steps: int = 3) -> float:
    # d is smooth and linear in C through the collision; a few secant steps
    # tighten the zero beyond the bisection width
    width = max(hi - lo, 1e-14 * max(1.0, abs(c0)))
    x0, x1 = c0 - width, c0 + width
    f0, f1 = tr.d(x0), tr.d(x1)
    for _ in range(steps):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0, x1 = x1, f1, x2
        f1 = tr.d(x1)
    if not (lo - width <= x1 <= hi + width) or not math.isfinite(x1):
        return c0
    return float(x1)


def _resample(tr: _PairTracker, lo: float, hi: float, points: int = 21):
    cs = np.linspace(lo, hi, points)
    ds = np.array([tr.d(x) for x in cs])
    flips = np.nonzero(ds[:-1] * ds[1:] < 0)[0]
    if len(flips) == 0:
        raise LostBracket(f"no sign change of the pair discriminant on [{lo}, {hi}]")
    i = int(flips[0])
    return float(cs[i]), float(cs[i + 1]), float(ds[i]), float(ds[i + 1])


# -- dynamo threshold ------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalResult:
    c_c: float
    onset: str
    lambda_c: complex
    abscissa: float
    bracket: tuple[float, float]


def _abscissa(family: AffineFamily, c: float, backend: str) -> tuple[float, complex, float]:
    spec = dense_spectrum(family.matrix(c), backend=backend)
    lead = spec.eigenvalues[0]
    return float(lead.real), complex(lead), spec.norm


def critical_c(
    family: AffineFamily,
    c_bracket: tuple[float, float],
    *,
    tol: float = 1e-8,
    im_tol: float | None = None,
    backend: str = "qr",
) -> CriticalResult:
    """Bisection on the spectral abscissa ``s(C) = max Re lambda``.

    The onset is ``oscillatory`` when the leading eigenvalue at ``C_c`` has
    ``|Im| > im_tol`` (default ``1e-7 |H|``), otherwise ``steady``.
    """
    lo, hi = map(float, c_bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy c_low < c_high")
    slo, _, _ = _abscissa(family, lo, backend)
    shi, _, _ = _abscissa(family, hi, backend)
    if slo == 0.0:
        hi, shi = lo, slo
    elif shi == 0.0:
        lo, slo = hi, shi
    elif slo * shi > 0:
        raise NoSignChange(
            f"max Re lambda has one sign on [{lo}, {hi}]: s(low)={slo:.6g}, s(high)={shi:.6g}"
        )
    a, b = c_bracket
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        sm, _, _ = _abscissa(family, mid, backend)
        if sm == 0.0:
            lo = hi = mid
            break
        if sm * slo > 0:
            lo, slo = mid, sm
        else:
            hi, shi = mid, sm
    c_c = lo if shi == slo else lo + (hi - lo) * slo / (slo - shi)
    s, lead, norm = _abscissa(family, c_c, backend)
    if im_tol is None:
        im_tol = IM_TOL_REL * norm
    onset = "oscillatory" if abs(lead.imag) > im_tol else "steady"
    return CriticalResult(float(c_c), onset, lead, s, (lo, hi))


def find_critical_bracket(
    family: AffineFamily,
    c_start: float = 1.0,
    c_max: float = 1e4,
    backend: str = "qr",
) -> tuple[float, float]:
    """Double C from ``c_start`` until the abscissa turns nonnegative."""
    if c_start <= 0:
        raise ValueError("c_start must be positive")
    prev = 0.0
    if _abscissa(family, prev, backend)[0] >= 0:
        raise NoSignChange("abscissa is already nonnegative at C = 0")
    c = c_start
    while c <= c_max:
        if _abscissa(family, c, backend)[0] >= 0:
            return prev, c
        prev, c = c, 2.0 * c
    raise NoSignChange(f"abscissa stays negative up to C = {c_max}")


# -- figure window ---------------------------------------------------------------------


@dataclass(frozen=True)
class FigureWindow:
    sweep: SweepResult
    branches: list[Branch]
    events: list[TransitionEvent]
    im_tol: float


def figure_window(
    family: AffineFamily,
    *,
    m: int = FIGURE_BRANCHES,
    c_start: float = 10.0,
    points: int = 400,
    min_transitions: int = 2,
    max_doublings: int = 6,
    threads: int | None = None,
    backend: str = "qr",
) -> FigureWindow:
    """Uniform sweep over ``[0, C_hi]``, doubling ``C_hi`` until enough real-to-complex events appear."""
    c_hi = c_start
    for _ in range(max_doublings + 1):
        res = sweep_family(family, np.linspace(0.0, c_hi, points), threads=threads, backend=backend)
        branches = match_branches(res, m)
        im_tol = res.default_im_tol()
        events = detect_transitions(branches, im_tol)
        n_rc = sum(e.kind is TransitionKind.REAL_TO_COMPLEX for e in events)
        if n_rc >= min_transitions:
            break
        c_hi *= 2.0
    return FigureWindow(res, branches, events, im_tol)
