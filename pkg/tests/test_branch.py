import math

import numpy as np
import pytest
import scipy.linalg

from dynamo_spectra import toy2x2 as toy
from dynamo_spectra.branch import (
    AffineFamily,
    Branch,
    NoSignChange,
    TransitionEvent,
    TransitionKind,
    assign,
    critical_c,
    detect_transitions,
    distinct,
    find_critical_bracket,
    fit_exponent,
    match_branches,
    refine_ep,
    sweep,
    sweep_family,
    thread_count,
)
from dynamo_spectra.eig import dense_spectrum, is_conjugation_closed
from dynamo_spectra.operator import AlphaProfile, assemble, free_decay_rates, make_grid
from dynamo_spectra.pencil import build_pencil, solve_keldysh_chain
from oracles import JL_ZEROS, REFERENCE_CRITICAL_C, fd_dirichlet_q


def toy_family(reverse=False):
    """Toy model along f = t (or f = 2 - t), e0 = 0, b = 1."""
    h_at = lambda f: toy.ToyPoint(0.0, f, 1.0, 0.0).matrix().real
    if reverse:
        return AffineFamily(h_at(2.0), h_at(1.0) - h_at(2.0))
    return AffineFamily(h_at(0.0), h_at(1.0) - h_at(0.0))


def toy_curve(f):
    # e0 -/+ sqrt(f^2 - |b|^2) with the principal square root
    r = np.sqrt(complex(f * f - 1.0))
    return {r, -r}


T_GRID = np.linspace(0.0, 2.0, 100)


def _discrete_q(n, l=1):
    d, e = fd_dirichlet_q(n, l)
    return scipy.linalg.eigh_tridiagonal(d, e, eigvals_only=True)


# -- sweeps ---------------------------------------------------------------------------


def test_sweep_affinity_against_fresh_assembly():
    grid = make_grid(24)
    prof = AlphaProfile.reference()
    cs = np.sort(np.random.default_rng(5).uniform(0, 40, 10))
    res = sweep(prof, 1, "physical", grid, cs, threads=1)
    assert len(res) == 10 and res.config["bc"] == "physical"
    for c, spec in zip(cs, res.spectra):
        ref = dense_spectrum(assemble(prof.with_c(c), 1, grid, "physical").matrix).eigenvalues
        assert np.abs(spec.eigenvalues - ref).max() <= 1e-10 * spec.norm


def test_sweep_constant_alpha_leading_line():
    n = 32
    q1 = _discrete_q(n)[0]
    res = sweep(AlphaProfile.constant(1.0), 1, "idealized", make_grid(n), [0.0, 1.0, 2.0])
    lead = [s.eigenvalues[0] for s in res.spectra]
    for c, lam in zip(res.c_values, lead):
        assert lam.imag == 0
        assert lam.real == pytest.approx(-q1 + c * math.sqrt(q1), rel=1e-10)


@pytest.mark.parametrize("bc", ["idealized", "physical"])
def test_sweep_at_zero_is_free_decay(bc):
    res = sweep(AlphaProfile.reference(), 1, bc, make_grid(64, "chebyshev"), [0.0])
    ev = res.spectra[0].eigenvalues
    assert np.all(ev.imag == 0) and np.all(ev.real < 0)
    np.testing.assert_allclose(ev[:8].real, free_decay_rates(1, bc, 4), rtol=1e-6)


def test_sweep_reference_profile_conjugation_closed():
    res = sweep(AlphaProfile.reference(), 1, "physical", make_grid(32), np.linspace(0, 40, 9))
    for spec in res.spectra:
        assert is_conjugation_closed(spec.eigenvalues, 1e-8 * spec.norm)


@pytest.mark.parametrize("bad", [[], [1.0, 1.0], [2.0, 1.0], [[0.0, 1.0]]])
def test_sweep_rejects_bad_grid(bad):
    with pytest.raises(ValueError):
        sweep_family(toy_family(), bad)


def test_sweep_threads_are_deterministic():
    fam = AffineFamily.from_profile(AlphaProfile.reference(), 1, make_grid(32), "physical")
    cs = np.linspace(0, 30, 24)
    one = sweep_family(fam, cs, threads=1)
    many = sweep_family(fam, cs, threads=4)
    for a, b in zip(one.spectra, many.spectra):
        assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("DYNAMO_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("DYNAMO_THREADS", "0")
    assert thread_count() >= 1
    assert thread_count(2) == 2
    with pytest.raises(ValueError):
        thread_count(-1)


def test_failed_points_are_recorded(monkeypatch):
    from dynamo_spectra import eig

    monkeypatch.setattr(eig, "SWEEPS_PER_DIM", 0)
    fam = AffineFamily.from_profile(AlphaProfile.reference(), 1, make_grid(8), "physical")
    res = sweep_family(fam, [0.0, 5.0], threads=1)
    assert res.failed == (0, 1)


# -- matching ---------------------------------------------------------------------------


def test_single_point_sweep():
    res = sweep_family(toy_family(), [0.5])
    branches = match_branches(res, 2)
    assert [len(b.c) for b in branches] == [1, 1]
    assert detect_transitions(branches, 1e-9) == []


def test_match_validates_m():
    res = sweep_family(toy_family(), [0.0, 1.0])
    with pytest.raises(ValueError):
        match_branches(res, 0)
    with pytest.raises(ValueError):
        match_branches(res, 3)


def test_toy_path_follows_closed_form():
    res = sweep_family(toy_family(), T_GRID)
    branches = match_branches(res, 2)
    assert len(branches) == 2
    for k, t in enumerate(T_GRID):
        got = [b.values[k] for b in branches]
        want = sorted(toy_curve(t), key=lambda z: (z.real, z.imag))
        got = sorted(got, key=lambda z: (z.real, z.imag))
        assert max(abs(g - w) for g, w in zip(got, want)) <= 1e-12


def test_constant_alpha_branches_are_straight_lines():
    n = 24
    q = _discrete_q(n)
    cs = np.linspace(0, 10, 101)
    res = sweep(AlphaProfile.constant(1.0), 1, "idealized", make_grid(n), cs)
    branches = match_branches(res, 8)
    lines = [(-qk + s * cs * np.sqrt(qk)) for qk in q for s in (1, -1)]
    scale = res.norm
    for b in branches:
        err = min(np.abs(b.array() - line).max() for line in lines)
        assert err <= 1e-9 * scale
        assert "Hungarian" not in b.flags
    assert detect_transitions(branches, res.default_im_tol()) == []


def test_assign_falls_back_to_optimal():
    # greedy takes (0,0)=0 and is then forced into (1,1)=100
    cost = np.array([[0.0, 1.0], [1.0, 100.0]])
    cols, hungarian = assign(cost)
    assert hungarian and cols.tolist() == [1, 0]
    cols, hungarian = assign(np.array([[0.0, 5.0], [5.0, 0.0]]))
    assert not hungarian and cols.tolist() == [0, 1]


def test_distinct_branches():
    a = Branch(0, [0.0, 1.0], [1.0, 2.0])
    b = Branch(1, [0.0, 1.0], [1.5, 2.5])
    assert distinct(a, b, 1e-3)
    assert not distinct(a, b, 0.1)


# -- transitions and refinement -------------------------------------------------------------


def _single_event(reverse):
    fam = toy_family(reverse)
    res = sweep_family(fam, T_GRID)
    events = detect_transitions(match_branches(res, 2), 1e-9)
    assert len(events) == 1
    return fam, events[0]


def test_toy_reversed_path_real_to_complex():
    fam, ev = _single_event(reverse=True)
    assert ev.kind is TransitionKind.REAL_TO_COMPLEX
    assert ev.c_low < 1.0 < ev.c_high
    assert ev.branch_ids == (0, 1) and not ev.flags
    ref = refine_ep(ev, fam)
    assert ref.c_star == pytest.approx(1.0, abs=1e-8)
    assert abs(ref.lambda_star) <= 1e-6
    assert 0.4 <= ref.exponent <= 0.6
    assert ref.c_high - ref.c_low <= 1e-8


def test_toy_forward_path_complex_to_real():
    fam, ev = _single_event(reverse=False)
    assert ev.kind is TransitionKind.COMPLEX_TO_REAL
    assert ev.c_low < 1.0 < ev.c_high
    ref = refine_ep(ev, fam)
    assert ref.kind is TransitionKind.COMPLEX_TO_REAL
    assert ref.c_star == pytest.approx(1.0, abs=1e-8)
    assert 0.4 <= ref.exponent <= 0.6


def test_refine_never_widens_and_keeps_degenerate_bracket():
    fam, ev = _single_event(reverse=True)
    ref = refine_ep(ev, fam, fit=False)
    assert ev.c_low <= ref.c_low <= ref.c_star <= ref.c_high <= ev.c_high
    assert ref.exponent is None
    flat = TransitionEvent(ev.kind, 1.0, 1.0, 1.0, 0j, (0, 1))
    assert refine_ep(flat, fam) is flat


def test_avoided_crossing_is_near_miss():
    # two Z2-blocks: an avoided crossing [[C - 1, eps], [eps, 1 - C]] next to an inert block
    eps = 1e-3
    h0 = np.zeros((4, 4))
    h0[:2, :2] = [[-1.0, eps], [eps, 1.0]]
    h0[2:, 2:] = np.diag([-10.0, -20.0])
    h1 = np.zeros((4, 4))
    h1[:2, :2] = np.diag([1.0, -1.0])
    fam = AffineFamily(h0, h1)
    lo, hi = fam.matrix(0.9), fam.matrix(1.1)
    la, lb = np.linalg.eigvalsh(lo)[2:], np.linalg.eigvalsh(hi)[2:]
    ev = TransitionEvent(
        TransitionKind.REAL_TO_COMPLEX, 0.9, 1.1, 1.0, 0j, (0, 1),
        tuple(complex(x) for x in la[::-1]), tuple(complex(x) for x in lb[::-1]),
    )
    ref = refine_ep(ev, fam)
    assert ref.kind is TransitionKind.NEAR_MISS
    assert ref.c_star == pytest.approx(1.0, abs=1e-6)
    assert ref.gap_star == pytest.approx(2 * eps, rel=1e-4)


def test_fit_exponent_on_model_gaps():
    assert fit_exponent(lambda c: 3 * abs(c - 2) ** 0.5, 2.0, -1.0, 0.1) == pytest.approx(0.5, abs=1e-10)
    assert fit_exponent(lambda c: abs(c - 2), 2.0, 1.0, 0.1) == pytest.approx(1.0, abs=1e-10)
    assert math.isnan(fit_exponent(lambda c: 0.0, 2.0, 1.0, 0.1))


def test_dynamo_events_pairwise_conjugate_and_chain():
    prof = AlphaProfile((1.0, 0.0, -0.9))
    grid = make_grid(32)
    fam = AffineFamily.from_profile(prof, 1, grid, "idealized")
    res = sweep_family(fam, np.linspace(0, 8, 81))
    branches = match_branches(res, 6)
    events = detect_transitions(branches, res.default_im_tol())
    paired = [e for e in events if e.kind is TransitionKind.REAL_TO_COMPLEX and "Unpaired" not in e.flags]
    assert paired
    for e in paired:
        a, b = e.branch_ids
        k = int(np.searchsorted(res.c_values, e.c_high))
        va, vb = branches[a].values[k], branches[b].values[k]
        assert abs(va - np.conj(vb)) <= 1e-8 * res.norm
    ref = refine_ep(paired[0], fam)
    assert 0.4 <= ref.exponent <= 0.6
    chain = solve_keldysh_chain(build_pencil(prof.with_c(ref.c_star), 1, grid, "idealized"), ref.lambda_star.real)
    assert max(chain.relative_residuals()) <= 1e-5


# -- critical C --------------------------------------------------------------------------


def test_critical_constant_alpha_is_first_bessel_zero():
    fam = AffineFamily.from_profile(AlphaProfile.constant(1.0), 1, make_grid(48, "chebyshev"), "idealized")
    res = critical_c(fam, (1.0, 10.0))
    assert res.c_c == pytest.approx(JL_ZEROS[1][0], rel=1e-6)
    assert res.onset == "steady"
    assert res.bracket[1] - res.bracket[0] <= 1e-8
    assert abs(res.abscissa) <= 1e-6 * np.linalg.norm(fam.matrix(res.c_c), 2)


def test_critical_subcritical_bracket():
    fam = AffineFamily.from_profile(AlphaProfile.constant(1.0), 1, make_grid(16), "idealized")
    with pytest.raises(NoSignChange):
        critical_c(fam, (0.0, 2.0))
    with pytest.raises(ValueError):
        critical_c(fam, (3.0, 2.0))


def test_find_critical_bracket():
    fam = AffineFamily.from_profile(AlphaProfile.constant(1.0), 1, make_grid(16), "idealized")
    lo, hi = find_critical_bracket(fam)
    assert (lo, hi) == (4.0, 8.0)
    with pytest.raises(NoSignChange):
        find_critical_bracket(fam, c_max=2.0)


def test_critical_reference_profile_regression():
    fam = AffineFamily.from_profile(AlphaProfile.reference(), 1, make_grid(96), "physical")
    res = critical_c(fam, find_critical_bracket(fam))
    assert res.c_c == pytest.approx(REFERENCE_CRITICAL_C, rel=1e-7)
    assert res.onset == "steady"
