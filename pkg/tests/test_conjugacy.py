"""Operator iteration: gates, envelope recurrence, and the Picard driver."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from homconj import (
    EstimateContext,
    GateConstants,
    PicardContext,
    SampleScheme,
    cauchy_envelope,
    compose,
    conjugacy_operator,
    conjugacy_residual,
    contraction_check,
    envelope_threshold,
    identity,
    negative_iterates_bound,
    picard_solve,
    premetric,
    primitive,
    sample_points,
)

from conftest import bump_member


def scaling(domain, c):
    return primitive(domain, lambda p: c * p, lambda p: p / c, f"{c:g}x")


def translation(domain, t):
    return primitive(domain, lambda p: p + t, lambda p: p - t, f"x+{t:g}")


def make_ctx(half_dom, sqrt_triple, scheme):
    _, r, cross, phi = sqrt_triple
    return EstimateContext(domain=half_dom, scheme=scheme, phi=phi, r=r,
                           cross=cross)


# ===================================================================
# gate constants
# ===================================================================

def test_gate_constant_frozen_value():
    gc = GateConstants(a=1.0, b=1.25, beta=2.0, gamma=0.5, m=1.0,
                       delta=0.01, C=0.5)
    assert gc.A == pytest.approx(6.5, abs=1e-12)
    assert gc.threshold == pytest.approx(1.0 / 6.5, abs=1e-12)
    assert gc.gate_passes
    tight = GateConstants(a=1.0, b=1.25, beta=2.0, gamma=0.5, m=1.0,
                          delta=0.2, C=0.5)
    assert not tight.gate_passes


# ===================================================================
# operator algebra
# ===================================================================

def test_operator_on_g_collapses_to_f(bundle_025):
    image = conjugacy_operator(bundle_025.f, bundle_025.g, bundle_025.g)
    assert image.chain == bundle_025.f.chain


def test_operator_contraction_on_sample_pairs(half_dom, sqrt_triple,
                                              scheme_fast, bundle_025):
    ctx = make_ctx(half_dom, sqrt_triple, scheme_fast)
    h1 = bundle_025.g
    h2 = bump_member(half_dom, 1.5, 0.8, 0.2)
    rep = contraction_check(bundle_025.f, bundle_025.g, h1, h2,
                            bundle_025.alpha, ctx)
    assert rep.passed, rep.witness


# ===================================================================
# envelope recurrence
# ===================================================================

def test_envelope_frozen_first_step():
    env = cauchy_envelope(m=4, n=3, epsilon=0.1, C=0.5, k_max=1)
    assert env.value_at(0) == 0.1
    assert env.value_at(1) == pytest.approx(0.16875, abs=1e-15)
    assert env.a_m == pytest.approx(0.84375, abs=1e-15)
    assert np.isfinite(env.tail)
    assert env.bound == pytest.approx(0.1 + env.tail, abs=1e-15)


def test_envelope_rejects_bad_parameters():
    with pytest.raises(ValueError):
        cauchy_envelope(m=1, n=0, epsilon=0.1, C=1.0, k_max=1)
    with pytest.raises(ValueError):
        cauchy_envelope(m=1, n=0, epsilon=0.0, C=0.5, k_max=1)
    with pytest.raises(ValueError):
        cauchy_envelope(m=0, n=0, epsilon=0.1, C=0.5, k_max=1)


def test_envelope_values_increase():
    env = cauchy_envelope(m=3, n=2, epsilon=0.05, C=0.4, k_max=30)
    diffs = np.diff(env.values)
    assert np.all(diffs > 0)


@settings(max_examples=60, deadline=None)
@given(epsilon=st.floats(min_value=1e-4, max_value=0.5),
       C=st.floats(min_value=0.05, max_value=0.95),
       m=st.integers(min_value=1, max_value=40))
def test_envelope_bound_dominates_when_tamed(epsilon, C, m):
    env = cauchy_envelope(m=m, n=max(0, m - 1), epsilon=epsilon, C=C, k_max=60)
    assume(env.a_m < 1.0)
    assert max(env.values) <= env.bound * (1.0 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(epsilon=st.floats(min_value=1e-4, max_value=0.5),
       C=st.floats(min_value=0.05, max_value=0.95))
def test_threshold_tames_the_envelope(epsilon, C):
    n = envelope_threshold(epsilon, C)
    env = cauchy_envelope(m=n + 1, n=n, epsilon=epsilon, C=C, k_max=200)
    assert env.a_m < 1.0
    assert env.tail <= epsilon * (1.0 + 1e-12)
    assert max(env.values) <= 2.0 * epsilon * (1.0 + 1e-12)


def test_threshold_is_minimal():
    for epsilon, C in ((0.1, 0.5), (0.01, 0.9), (0.3, 0.3)):
        n = envelope_threshold(epsilon, C)
        if n == 0:
            continue
        m_prev = n  # seed step one smaller
        a_prev = C ** (m_prev + 1) * (1.0 + 1.0 / epsilon) + C
        if a_prev < 1.0:
            tail_prev = C ** m_prev * (epsilon / (1.0 - a_prev)
                                       + 1.0 / (1.0 - C))
            assert tail_prev > epsilon


# ===================================================================
# boundedness probe
# ===================================================================

def test_bound_probe_flags_geometric_growth(half_dom):
    f = scaling(half_dom, 0.9)
    h0 = translation(half_dom, 1.0)
    pts = sample_points(half_dom, SampleScheme(window_radius=8.0))
    rep = negative_iterates_bound(f, f, h0, pts, n_bnd=32)
    assert rep.flagged
    assert rep.max_value == pytest.approx(8.0 + 0.9 ** -32, rel=1e-6)


def test_bound_probe_accepts_contraction_pair(bundle_025, scheme_fast):
    pts = sample_points(bundle_025.domain, scheme_fast)
    rep = negative_iterates_bound(bundle_025.f, bundle_025.g, bundle_025.g,
                                  pts, n_bnd=16)
    assert not rep.flagged
    assert set(rep.values) == set(range(-16, 17))


# ===================================================================
# the Picard driver
# ===================================================================

def test_picard_converges_on_contraction_pair(half_dom, sqrt_triple, scheme,
                                              bundle_025):
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme),
                        alpha=bundle_025.alpha)
    res = picard_solve(bundle_025.f, bundle_025.g, bundle_025.g, ctx)
    tr = res.trace
    assert res.converged
    assert tr.failed_gate is None
    assert res.residual < 1e-8
    assert tr.steps[-1].rho_increment < 1e-8
    assert tr.anchor is not None
    assert tr.incrementally_bounded is True
    assert not tr.bound_pre.flagged
    assert not tr.bound_post.flagged
    assert [s.n for s in tr.steps] == list(range(len(tr.steps)))
    # every anchored observation sits under its envelope value
    for _, observed, envelope in tr.anchored:
        assert observed <= envelope + 1e-9
    # the limit commutes with the pair on the top sample set
    assert conjugacy_residual(bundle_025.f, bundle_025.g, res.h,
                              ctx.est) < 1e-8


def test_picard_rejects_alpha_below_one(half_dom, sqrt_triple, scheme_fast):
    with pytest.raises(ValueError):
        PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                      alpha=0.9)


def test_picard_gate_failure_eigenvalue(half_dom, sqrt_triple, scheme_fast,
                                        bundle_025):
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                        alpha=3.0)
    res = picard_solve(bundle_025.f, bundle_025.g, bundle_025.g, ctx)
    assert res.trace.verdict == "gate_failed"
    assert res.trace.failed_gate == "eigenvalue_gate"
    assert res.trace.steps == ()


def test_picard_gate_failure_initial_defect(half_dom, sqrt_triple,
                                            scheme_fast):
    # f = g = x/2 passes the eigenvalue gate at alpha = 1.05 but the seed
    # h0 = x+1 starts half a unit from its image, over the 1/A threshold
    f = scaling(half_dom, 0.5)
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                        alpha=1.05)
    res = picard_solve(f, f, translation(half_dom, 1.0), ctx)
    assert res.trace.verdict == "gate_failed"
    assert res.trace.failed_gate == "initial_defect"
    assert res.trace.constants.delta == pytest.approx(0.5, abs=1e-9)
    assert res.trace.constants.delta > res.trace.constants.threshold


def test_picard_unbounded_negative_iterates(half_dom, sqrt_triple,
                                            scheme_fast):
    # x/0.9 pulls h0 = x+1 off every compact under backward iteration while
    # the initial defect 0.1 still clears the threshold
    f = scaling(half_dom, 0.9)
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                        alpha=1.05, n_bnd=32)
    res = picard_solve(f, f, translation(half_dom, 1.0), ctx)
    assert res.trace.verdict == "unbounded_on_compacts"
    assert res.trace.bound_pre is not None and res.trace.bound_pre.flagged


def test_picard_budget_exhaustion(half_dom, sqrt_triple, scheme_fast,
                                  bundle_025):
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                        alpha=bundle_025.alpha, n_max=3)
    res = picard_solve(bundle_025.f, bundle_025.g, bundle_025.g, ctx)
    assert res.trace.verdict == "budget_exhausted"
    assert len(res.trace.steps) == 3


def test_picard_limits_from_two_seeds_differ_by_g(half_dom, sqrt_triple,
                                                  scheme_fast, bundle_025):
    # the fixed point is unique only per contraction ball: the seed g yields
    # a solution h, the seed id yields h composed with the inverse of g
    # (right-composition with g preserves the intertwining property), and
    # the two limits must agree after undoing that shift
    ctx = PicardContext(est=make_ctx(half_dom, sqrt_triple, scheme_fast),
                        alpha=bundle_025.alpha)
    from_g = picard_solve(bundle_025.f, bundle_025.g, bundle_025.g, ctx)
    from_id = picard_solve(bundle_025.f, bundle_025.g, identity(half_dom), ctx)
    assert from_g.converged and from_id.converged
    assert from_id.residual < 1e-8
    _, r, _, phi = sqrt_triple
    shifted = compose(from_id.h, bundle_025.g)
    gap = premetric(shifted, from_g.h, phi, r, scheme_fast)
    assert gap.finite
    assert gap.rho < 1e-7
