"""Gauges, scale/growth functions, domains, and the sampling machinery."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homconj import (
    CrossConstants,
    Domain,
    Gauge,
    SampleScheme,
    Tolerances,
    builtin_triple,
    doubling_sample_sets,
    exhaustion_sets,
    gauge_from_growth,
    make_growth,
    make_scale,
    sample_points,
    validate_gauge,
    validate_scale_pair,
)
from homconj.funcspace import doubling_radii


# ===================================================================
# tolerances and constants
# ===================================================================

def test_tolerances_reject_nonpositive():
    with pytest.raises(ValueError):
        Tolerances(tau_abs=0.0)
    with pytest.raises(ValueError):
        Tolerances(kappa_div=-1.0)


def test_cross_constants_positive():
    with pytest.raises(ValueError):
        CrossConstants(a=0.0, b=1.0)


def test_builtin_evals_exact():
    u = np.array([0.0, 1.0, 4.0])
    assert np.array_equal(make_scale("identity").eval(u), u)
    assert np.array_equal(make_growth("sqrt_plus").eval(u),
                          np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(make_growth("linear_plus").eval(u),
                          np.array([1.0, 2.0, 5.0]))
    with pytest.raises(ValueError):
        make_scale("cubic")


# ===================================================================
# domains
# ===================================================================

def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(dim=0)
    with pytest.raises(ValueError):
        Domain(dim=2, region="half_line")
    with pytest.raises(ValueError):
        Domain(dim=1, region="torus")
    with pytest.raises(ValueError):
        Domain(dim=1, region="box_minus_ball")  # needs inner_radius


def test_domain_contains():
    ray = Domain(dim=1, region="half_line")
    assert bool(ray.contains(np.array([[1.0]]))[0])
    assert not bool(ray.contains(np.array([[-1.0]]))[0])

    punctured = Domain(dim=2, region="box_minus_ball", inner_radius=0.5)
    assert not bool(punctured.contains(np.zeros((1, 2)), slack=0.0)[0])
    assert bool(punctured.contains(np.array([[1.0, 0.0]]))[0])


def test_gauge_constructor_ordering():
    growth = make_growth("linear_plus")
    dom = Domain(dim=1)
    with pytest.raises(ValueError):
        gauge_from_growth(growth, dom, beta=0.5, gamma=2.0, m=1.0)
    with pytest.raises(ValueError):
        Gauge(eval=lambda p: p, beta=2.0, gamma=0.5, m=0.0)


# ===================================================================
# sampling
# ===================================================================

def test_sample_points_deterministic_and_contained(half_dom):
    sch = SampleScheme(window_radius=8.0)
    a = sample_points(half_dom, sch)
    b = sample_points(half_dom, sch)
    assert np.array_equal(a, b)
    assert np.all(half_dom.contains(a))
    assert np.all(half_dom.norm_of(a) <= 8.0 * (1 + 1e-9))
    # the origin anchor and the dyadic ladder are present
    assert np.min(half_dom.norm_of(a)) == 0.0
    norms = np.sort(half_dom.norm_of(a))
    assert norms[1] < 1e-12  # deepest ladder rung sits near the origin


def test_sample_points_unique_rows(half_dom):
    pts = sample_points(half_dom, SampleScheme(window_radius=2.0))
    assert np.unique(pts, axis=0).shape[0] == pts.shape[0]


def test_doubling_sets_are_nested(half_dom):
    sch = SampleScheme(window_radius=4.0, grid_points_per_axis=11,
                       quasirandom_count=8)
    sets = doubling_sample_sets(half_dom, sch)
    assert [r for r, _ in sets] == [4.0, 8.0, 16.0, 32.0]
    for (_, small), (_, big) in zip(sets, sets[1:]):
        small_rows = {tuple(row) for row in small}
        big_rows = {tuple(row) for row in big}
        assert small_rows <= big_rows


def test_doubling_radii():
    sch = SampleScheme(window_radius=3.0)
    assert doubling_radii(sch) == (3.0, 6.0, 12.0, 24.0)


def test_exhaustion_sets_nested(half_dom):
    sch = SampleScheme(window_radius=8.0, exhaustion_levels=4)
    levels = exhaustion_sets(half_dom, sch)
    assert len(levels) == 5
    for k, pts in enumerate(levels):
        cut = min(8.0, 2.0 ** k)
        assert np.all(half_dom.norm_of(pts) <= cut * (1 + 1e-9))
    for small, big in zip(levels, levels[1:]):
        assert small.shape[0] <= big.shape[0]


@settings(max_examples=25, deadline=None)
@given(radius=st.floats(min_value=0.5, max_value=64.0),
       seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_sampling_respects_window_property(radius, seed):
    dom = Domain(dim=2)
    sch = SampleScheme(window_radius=radius, grid_points_per_axis=7,
                       quasirandom_count=16, seed=seed)
    pts = sample_points(dom, sch)
    assert np.all(dom.norm_of(pts) <= radius * (1 + 1e-9))
    assert np.array_equal(pts, sample_points(dom, sch))


# ===================================================================
# validation of scale pairs and gauges
# ===================================================================

def test_sqrt_triple_validates(half_dom, scheme):
    growth, r, cross, phi = builtin_triple("sqrt_plus", half_dom)
    rep = validate_scale_pair(growth, r, cross, scheme)
    assert rep.passed, [c.name for c in rep.checks if not c.passed]
    gauge_rep = validate_gauge(phi, growth, half_dom, scheme)
    assert gauge_rep.passed, [c.name for c in gauge_rep.checks
                              if not c.passed]


def test_cross_bound_is_tight_at_five_quarters(half_dom, scheme):
    # sup of sqrt(u) + 1 - u sits exactly at 5/4, so b = 1.2 must fail
    growth, r, _, _ = builtin_triple("sqrt_plus", half_dom)
    bad = validate_scale_pair(growth, r, CrossConstants(a=1.0, b=1.2), scheme)
    assert not bad.passed
    assert bad.margin_of("cross_bound") > 0.0


def test_squared_scale_fails_subadditivity(half_dom, scheme):
    from homconj import ScaleFn
    growth = make_growth("linear_plus")
    r2 = ScaleFn(eval=lambda u: np.asarray(u, float) ** 2, kind="square")
    rep = validate_scale_pair(growth, r2, CrossConstants(a=1.0, b=1.0), scheme)
    assert rep.margin_of("r_subadditive") > 0.0
    assert not rep.passed


def test_flat_gauge_fails_cone_and_coercivity(half_dom, scheme):
    growth = make_growth("sqrt_plus")
    flat = Gauge(eval=lambda p: np.ones(np.atleast_2d(p).shape[0]),
                 beta=2.0, gamma=0.5, m=1.0, label="flat")
    rep = validate_gauge(flat, growth, half_dom, scheme)
    names = {c.name: c.passed for c in rep.checks}
    assert not names["cone_lower"]
    assert not names["coercive_shell_growth"]
