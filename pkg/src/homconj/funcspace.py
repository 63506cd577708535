"""Scale functions, growth functions, gauges, domains, and sampling.

Every supremum this package reports is taken over a finite sample window
and is therefore a certified lower bound of the true sup, never an upper
bound.  This module owns the shared ingredients: the scale function r
(vanishing only at 0, nondecreasing, subadditive), the growth function R
(positive, subadditive) tied to r through the cross bound
R(u) <= a*r(u) + b, gauges pinched inside the cone
gamma*R(|x|) <= phi(x) <= beta*R(|x|), and the deterministic sample sets
(grid + low-discrepancy + seeded random points, with a nested compact
exhaustion) that all estimators evaluate on.

Two analytic side conditions on r (scaling compatibility and stability
under the compositions used downstream) hold by construction for the
built-in scale functions and are not checked numerically; user-supplied
closures are trusted on this point.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ScaleFn",
    "GrowthFn",
    "CrossConstants",
    "Gauge",
    "Domain",
    "SampleScheme",
    "Tolerances",
    "ConditionCheck",
    "ValidationReport",
    "make_scale",
    "make_growth",
    "gauge_from_growth",
    "builtin_triple",
    "BUILTIN_TRIPLE_NAMES",
    "sample_points",
    "doubling_radii",
    "doubling_sample_sets",
    "exhaustion_sets",
    "validate_scale_pair",
    "validate_gauge",
]

DOUBLINGS = 3  # finiteness classification always uses three window doublings


@dataclass(frozen=True)
class Tolerances:
    """Numeric knobs shared across the package; all overridable per run."""

    tau_abs: float = 1e-12       # absolute slack for exact identities
    rel: float = 1e-9            # relative comparison slack
    tau_inv: float = 1e-8        # round-trip tolerance for inverses
    tau_tri: float = 1e-9        # relaxed-triangle slack
    tau_contr: float = 1e-9      # contraction-inequality slack
    tau_env: float = 1e-9        # envelope-monitor slack
    tol_conj: float = 1e-8       # Picard stopping tolerance
    tol_koenigs: float = 1e-10   # linearization convergence tolerance
    kappa_div: float = 1.5       # growth factor triggering "divergent"

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name!r} must be positive")


# ---------------------------------------------------------------------------
# scale / growth functions


@dataclass(frozen=True)
class ScaleFn:
    """Scale function r acting on nonnegative reals, vectorized."""

    eval: Callable[[np.ndarray], np.ndarray]
    kind: str = "user_closure"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.eval(u)


@dataclass(frozen=True)
class GrowthFn:
    """Growth function R acting on nonnegative reals, vectorized."""

    eval: Callable[[np.ndarray], np.ndarray]
    kind: str = "user_closure"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.eval(u)


@dataclass(frozen=True)
class CrossConstants:
    """Constants (a, b) of the cross bound R(u) <= a*r(u) + b."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("cross constants must be positive")


_BUILTIN_EVALS = {
    "identity": lambda u: np.asarray(u, dtype=float),
    "sqrt_plus": lambda u: np.sqrt(np.maximum(np.asarray(u, dtype=float), 0.0)) + 1.0,
    "linear_plus": lambda u: np.asarray(u, dtype=float) + 1.0,
}


def make_scale(kind: str) -> ScaleFn:
    if kind not in _BUILTIN_EVALS:
        raise ValueError(f"unknown scale kind {kind!r}")
    return ScaleFn(eval=_BUILTIN_EVALS[kind], kind=kind)


def make_growth(kind: str) -> GrowthFn:
    if kind not in _BUILTIN_EVALS:
        raise ValueError(f"unknown growth kind {kind!r}")
    return GrowthFn(eval=_BUILTIN_EVALS[kind], kind=kind)


# ---------------------------------------------------------------------------
# domains


_REGIONS = ("box", "half_line", "box_minus_ball")
_NORMS = ("euclidean", "sup")


@dataclass(frozen=True)
class Domain:
    """Closed region of R^d that the homeomorphisms act on.

    ``bounds`` holds one (lo, hi) interval per axis; infinities are allowed.
    ``half_line`` is the one-dimensional ray [lo, inf).  ``box_minus_ball``
    removes the open ball of ``inner_radius`` around the origin, which the
    functional checks that need 0 excluded rely on.
    """

    dim: int
    region: str = "box"
    bounds: tuple = ()
    norm: str = "euclidean"
    inner_radius: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.region not in _REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if self.norm not in _NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.region == "half_line" and self.dim != 1:
            raise ValueError("half_line region is one-dimensional only")
        bounds = self.bounds
        if not bounds:
            if self.region == "half_line":
                bounds = ((0.0, np.inf),)
            else:
                bounds = tuple((-np.inf, np.inf) for _ in range(self.dim))
            object.__setattr__(self, "bounds", bounds)
        if len(self.bounds) != self.dim:
            raise ValueError("bounds must give one interval per axis")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError("empty axis interval")
        if self.region == "half_line" and self.bounds[0][0] < 0:
            raise ValueError("half_line lower bound must be >= 0")
        if self.region == "box_minus_ball" and not self.inner_radius > 0:
            raise ValueError("box_minus_ball needs a positive inner_radius")

    def norm_of(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.norm == "sup":
            return np.max(np.abs(pts), axis=1)
        return np.sqrt(np.sum(pts * pts, axis=1))

    def contains(self, pts: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(pts)
        mask = np.ones(pts.shape[0], dtype=bool)
        for j, (lo, hi) in enumerate(self.bounds):
            mask &= pts[:, j] >= lo - slack
            mask &= pts[:, j] <= hi + slack
        if self.region == "box_minus_ball":
            mask &= self.norm_of(pts) >= self.inner_radius - slack
        return mask


# ---------------------------------------------------------------------------
# gauges


@dataclass(frozen=True)
class Gauge:
    """Continuous positive weight phi with cone constants beta > gamma > 0.

    ``m`` is the uniform lower bound of phi.  The constructor enforces the
    ordering of the cone constants; the sampled inequalities themselves are
    the business of :func:`validate_gauge`.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    beta: float
    gamma: float
    m: float
    label: str = "gauge"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.beta > self.gamma:
            raise ValueError("cone constants need beta > gamma")
        if not self.m > 0:
            raise ValueError("m must be positive")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.eval(pts)


def gauge_from_growth(growth: GrowthFn, domain: Domain, beta: float,
                      gamma: float, m: float, label: str = "") -> Gauge:
    """Gauge phi(x) = R(|x|) with the cone constants supplied by the caller."""

    def _eval(pts: np.ndarray) -> np.ndarray:
        return growth.eval(domain.norm_of(pts))

    return Gauge(eval=_eval, beta=beta, gamma=gamma, m=m,
                 label=label or f"{growth.kind}(|x|)")


BUILTIN_TRIPLE_NAMES = ("sqrt_plus", "linear_plus")


def builtin_triple(name: str, domain: Domain):
    """Shipped (R, r, cross, gauge) combinations known to validate cleanly.

    ``sqrt_plus``: R(u) = sqrt(u) + 1, r = identity, a = 1, b = 5/4,
    cone constants beta = 2, gamma = 1/2, floor m = 1.
    ``linear_plus``: R(u) = u + 1, r = identity, a = 1, b = 1, same cone.
    """
    if name == "sqrt_plus":
        growth = make_growth("sqrt_plus")
        r = make_scale("identity")
        cross = CrossConstants(a=1.0, b=1.25)
        phi = gauge_from_growth(growth, domain, beta=2.0, gamma=0.5, m=1.0)
        return growth, r, cross, phi
    if name == "linear_plus":
        growth = make_growth("linear_plus")
        r = make_scale("identity")
        cross = CrossConstants(a=1.0, b=1.0)
        phi = gauge_from_growth(growth, domain, beta=2.0, gamma=0.5, m=1.0)
        return growth, r, cross, phi
    raise ValueError(f"unknown builtin triple {name!r}")


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SampleScheme:
    """Deterministic recipe for the finite evaluation window.

    The window is the part of the domain inside the ball of
    ``window_radius``; estimators additionally look at three doublings of
    that radius to classify finiteness.  ``exhaustion_levels`` is the top
    index of the nested compacts K_k = window-samples inside the ball of
    radius 2^k.
    """

    window_radius: float
    grid_points_per_axis: int = 41
    quasirandom_count: int = 64
    exhaustion_levels: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.window_radius > 0:
            raise ValueError("window_radius must be positive")
        if self.grid_points_per_axis < 2:
            raise ValueError("grid_points_per_axis must be >= 2")
        if self.quasirandom_count < 0:
            raise ValueError("quasirandom_count must be >= 0")
        if self.exhaustion_levels < 1:
            raise ValueError("exhaustion_levels must be >= 1")


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


def _kronecker(n: int, dim: int) -> np.ndarray:
    # additive low-discrepancy sequence; deterministic, independent of seed
    if n <= 0:
        return np.zeros((0, dim))
    if dim > len(_PRIMES):
        raise ValueError("quasirandom sampling supports dim <= 8")
    alphas = np.sqrt(np.array(_PRIMES[:dim], dtype=float))
    steps = np.arange(1, n + 1, dtype=float)[:, None]
    return np.modf(steps * alphas[None, :])[0]


def _axis_windows(domain: Domain, radius: float) -> list:
    out = []
    for lo, hi in domain.bounds:
        out.append((max(lo, -radius), min(hi, radius)))
    return out


_LADDER_DEPTH = 48  # dyadic scales down to ~1e-14 of the window radius


def _origin_ladder(domain: Domain, radius: float) -> np.ndarray:
    # Weighted sups concentrate near the origin (the gauge floor); a plain
    # grid misses structure at small scales, so every window carries points
    # at all dyadic scales along each signed axis direction.
    scales = radius * 2.0 ** -np.arange(1, _LADDER_DEPTH + 1)
    blocks = []
    for j in range(domain.dim):
        for sign in (1.0, -1.0):
            pts = np.zeros((scales.shape[0], domain.dim))
            pts[:, j] = sign * scales
            blocks.append(pts)
    return np.concatenate(blocks, axis=0)


def sample_points(domain: Domain, scheme: SampleScheme,
                  radius: float | None = None) -> np.ndarray:
    """Finite sample of domain ∩ ball(0, radius); grid, low-discrepancy,
    seeded random points, and the origin anchor, deduplicated."""
    radius = scheme.window_radius if radius is None else float(radius)
    axes = _axis_windows(domain, radius)
    for lo, hi in axes:
        if not lo < hi:
            raise ValueError("window does not intersect the domain")
    grids = [np.linspace(lo, hi, scheme.grid_points_per_axis) for lo, hi in axes]
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)

    unit = _kronecker(scheme.quasirandom_count, domain.dim)
    lows = np.array([lo for lo, _ in axes])
    highs = np.array([hi for _, hi in axes])
    qr = lows + unit * (highs - lows)

    rng = np.random.default_rng(np.random.SeedSequence(
        [int(scheme.seed), int(max(1.0, radius))]))
    rand = lows + rng.random((scheme.quasirandom_count, domain.dim)) * (highs - lows)

    anchor = np.clip(np.zeros((1, domain.dim)), lows, highs)
    ladder = _origin_ladder(domain, radius)

    pts = np.concatenate([pts, qr, rand, anchor, ladder], axis=0)
    keep = domain.contains(pts, slack=0.0)
    keep &= domain.norm_of(pts) <= radius * (1.0 + 1e-12)
    pts = pts[keep]
    pts = np.unique(pts, axis=0)
    if pts.shape[0] == 0:
        raise ValueError("sampling produced an empty window")
    return pts


def doubling_radii(scheme: SampleScheme) -> tuple:
    return tuple(scheme.window_radius * (2 ** j) for j in range(DOUBLINGS + 1))


def doubling_sample_sets(domain: Domain, scheme: SampleScheme) -> list:
    """Cumulative sample sets for the window and its three doublings.

    Each set contains the previous one, so sup estimates taken level by
    level are nondecreasing by construction.
    """
    sets = []
    acc = None
    for radius in doubling_radii(scheme):
        pts = sample_points(domain, scheme, radius=radius)
        acc = pts if acc is None else np.unique(
            np.concatenate([acc, pts], axis=0), axis=0)
        sets.append((radius, acc))
    return sets


def exhaustion_sets(domain: Domain, scheme: SampleScheme) -> list:
    """Nested compacts K_0 ⊆ ... ⊆ K_{k_max} cut from the base window."""
    base = sample_points(domain, scheme)
    norms = domain.norm_of(base)
    out = []
    for k in range(scheme.exhaustion_levels + 1):
        cut = min(scheme.window_radius, float(2 ** k))
        out.append(base[norms <= cut * (1.0 + 1e-12)])
    return out


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float          # worst violation beyond 0; 0.0 when clean
    witness: tuple | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def margin_of(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.margin
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": float(c.margin)}
                for c in self.checks
            ],
        }


def _u_samples(scheme: SampleScheme) -> np.ndarray:
    # nonnegative scalar arguments for r and R; windows up to one doubling
    us = [np.linspace(0.0, w, scheme.grid_points_per_axis)
          for w in doubling_radii(scheme)]
    us.append(_kronecker(scheme.quasirandom_count, 1)[:, 0] * scheme.window_radius)
    rng = np.random.default_rng(np.random.SeedSequence([int(scheme.seed), 97]))
    us.append(rng.random(scheme.quasirandom_count) * scheme.window_radius)
    return np.unique(np.concatenate(us))


def _u_pairs(u: np.ndarray, scheme: SampleScheme, cap: int = 250_000):
    n = u.shape[0]
    if n * n <= cap:
        a = np.repeat(u, n)
        b = np.tile(u, n)
    else:
        stride = int(np.ceil(n / np.sqrt(cap)))
        sub = u[::stride]
        a = np.repeat(sub, sub.shape[0])
        b = np.tile(sub, sub.shape[0])
    return a, b


def _worst(excess: np.ndarray, args) -> tuple:
    idx = int(np.argmax(excess))
    vals = tuple(float(np.asarray(a).ravel()[idx]) for a in args)
    return vals


def validate_scale_pair(growth: GrowthFn, scale: ScaleFn, cross: CrossConstants,
                        scheme: SampleScheme,
                        tol: Tolerances = Tolerances()) -> ValidationReport:
    """Sampled verification of the scale/growth axioms and the cross bound.

    Reported, never raised: each condition carries a pass flag and the worst
    violation margin (0.0 for a clean pass).
    """
    u = _u_samples(scheme)
    upos = u[u > 0]
    ru = scale.eval(u)
    Ru = growth.eval(u)
    checks = []

    r0 = float(np.abs(scale.eval(np.array([0.0]))[0]))
    checks.append(ConditionCheck(
        "r_zero_at_origin", r0 <= tol.tau_abs, max(0.0, r0), (0.0,)))

    rpos = scale.eval(upos)
    pos_ok = bool(np.all(rpos > 0)) if upos.size else True
    worst = None if pos_ok or not upos.size else _worst(-rpos, (upos,))
    checks.append(ConditionCheck(
        "r_positive_off_origin", pos_ok,
        max(0.0, float(-np.min(rpos))) if upos.size else 0.0, worst))

    a_u, b_u = _u_pairs(u, scheme)
    lo = np.minimum(a_u, b_u)
    hi = np.maximum(a_u, b_u)
    mono = scale.eval(lo) - scale.eval(hi)
    mono_excess = float(np.max(mono)) if mono.size else 0.0
    checks.append(ConditionCheck(
        "r_nondecreasing", mono_excess <= tol.tau_abs, max(0.0, mono_excess),
        _worst(mono, (lo, hi)) if mono.size else None))

    sub = scale.eval(a_u + b_u) - scale.eval(a_u) - scale.eval(b_u)
    sub_excess = float(np.max(sub)) if sub.size else 0.0
    checks.append(ConditionCheck(
        "r_subadditive", sub_excess <= tol.tau_abs, max(0.0, sub_excess),
        _worst(sub, (a_u, b_u)) if sub.size else None))

    R_ok = bool(np.all(Ru > 0))
    checks.append(ConditionCheck(
        "R_positive", R_ok, max(0.0, float(-np.min(Ru))),
        None if R_ok else _worst(-Ru, (u,))))

    Rsub = growth.eval(a_u + b_u) - growth.eval(a_u) - growth.eval(b_u)
    Rsub_excess = float(np.max(Rsub)) if Rsub.size else 0.0
    checks.append(ConditionCheck(
        "R_subadditive", Rsub_excess <= tol.tau_abs, max(0.0, Rsub_excess),
        _worst(Rsub, (a_u, b_u)) if Rsub.size else None))

    crossv = Ru - cross.a * ru - cross.b
    cross_excess = float(np.max(crossv))
    checks.append(ConditionCheck(
        "cross_bound", cross_excess <= tol.tau_abs, max(0.0, cross_excess),
        _worst(crossv, (u,))))

    return ValidationReport(checks=tuple(checks))


def validate_gauge(phi: Gauge, growth: GrowthFn, domain: Domain,
                   scheme: SampleScheme,
                   tol: Tolerances = Tolerances()) -> ValidationReport:
    """Sampled verification of the gauge conditions.

    The floor and the cone are pointwise inequalities; coercivity is a
    window-doubling diagnostic (the minimum of phi over the outer shell has
    to grow as the window doubles).
    """
    checks = []
    shell_mins = []
    floor_excess = -np.inf
    lower_excess = -np.inf
    upper_excess = -np.inf
    floor_witness = lower_witness = upper_witness = None

    for radius, pts in doubling_sample_sets(domain, scheme):
        vals = phi.eval(pts)
        if np.any(~np.isfinite(vals)):
            raise ValueError("gauge evaluated to a non-finite value")
        norms = domain.norm_of(pts)
        Rn = growth.eval(norms)

        fe = phi.m - vals
        i = int(np.argmax(fe))
        if fe[i] > floor_excess:
            floor_excess, floor_witness = float(fe[i]), tuple(pts[i])

        le = phi.gamma * Rn - vals
        i = int(np.argmax(le))
        if le[i] > lower_excess:
            lower_excess, lower_witness = float(le[i]), tuple(pts[i])

        ue = vals - phi.beta * Rn
        i = int(np.argmax(ue))
        if ue[i] > upper_excess:
            upper_excess, upper_witness = float(ue[i]), tuple(pts[i])

        shell = norms >= 0.5 * radius
        shell_mins.append(float(np.min(vals[shell])) if np.any(shell)
                          else float(np.min(vals)))

    checks.append(ConditionCheck(
        "floor_m", floor_excess <= tol.tau_abs,
        max(0.0, floor_excess), floor_witness))
    checks.append(ConditionCheck(
        "cone_lower", lower_excess <= tol.tau_abs,
        max(0.0, lower_excess), lower_witness))
    checks.append(ConditionCheck(
        "cone_upper", upper_excess <= tol.tau_abs,
        max(0.0, upper_excess), upper_witness))

    grew = shell_mins[-1] > shell_mins[0] + tol.tau_abs
    checks.append(ConditionCheck(
        "coercive_shell_growth", grew,
        max(0.0, shell_mins[0] - shell_mins[-1]),
        (shell_mins[0], shell_mins[-1])))

    return ValidationReport(checks=tuple(checks))
