"""Shared fixtures: domains, gauges, sample schemes, and seeded map pools."""

import numpy as np
import pytest

from homconj import (
    Domain,
    SampleScheme,
    build_contraction_pair,
    builtin_triple,
    primitive,
)
from homconj.families import BumpSpec, bump_eval


@pytest.fixture(scope="session")
def half_dom():
    return Domain(dim=1, region="half_line")


@pytest.fixture(scope="session")
def sqrt_triple(half_dom):
    return builtin_triple("sqrt_plus", half_dom)


@pytest.fixture(scope="session")
def scheme():
    return SampleScheme(window_radius=8.0)


@pytest.fixture(scope="session")
def scheme_fast():
    # light sampling for the bulk statistical checks
    return SampleScheme(window_radius=4.0, grid_points_per_axis=15,
                        quasirandom_count=8, exhaustion_levels=2)


@pytest.fixture(scope="session")
def bundle_025():
    return build_contraction_pair(0.25)


def monotone_bisect_inverse(fwd, shift_bound: float):
    """Inverse of an increasing 1-d map x + something with 0 <= something
    <= shift_bound, solved by bisection on [y - shift_bound, y]."""

    def inv(pts):
        y = np.asarray(pts, dtype=float)
        lo = y - shift_bound
        hi = y.copy()
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            too_big = fwd(mid) > y
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
            if float(np.max(hi - lo)) <= 1e-16 * (1.0 + float(np.max(np.abs(hi)))):
                break
        return 0.5 * (lo + hi)

    return inv


def bump_member(domain: Domain, center: float, halfwidth: float,
                height: float, label: str = "bump_member"):
    """x + bump(x) on a one-dimensional domain, inverse by bisection."""
    spec = BumpSpec(center=center, halfwidth=halfwidth, height=height)

    def fwd(pts):
        p = np.asarray(pts, dtype=float)
        return p + bump_eval(spec, p)

    return primitive(domain, fwd, monotone_bisect_inverse(fwd, height), label)


def seeded_members(domain: Domain, count: int, seed: int,
                   with_translations: bool = True):
    """Deterministic pool of finite-displacement members on a 1-d domain."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1311]))
    out = []
    for i in range(count):
        if with_translations and i % 2 == 1:
            t = float(rng.uniform(0.0, 2.0))
            out.append(primitive(domain,
                                 lambda p, t=t: np.asarray(p, float) + t,
                                 lambda p, t=t: np.asarray(p, float) - t,
                                 f"shift{i}"))
            continue
        center = float(rng.uniform(0.8, 6.0))
        halfwidth = float(rng.uniform(0.3, min(1.5, center - 0.05)))
        # slope factor 1.875 keeps the map strictly increasing
        height = float(rng.uniform(0.05, 0.8) * halfwidth / 1.875)
        out.append(bump_member(domain, center, halfwidth, height,
                               f"member{i}"))
    return out
