"""The set of rough statistical limits and the checks built on it.

``st-LIM^r`` is the set of points ``x`` with ``x_n -> x`` rough-statistically
of degree ``r``. When a statistical limit ``x'`` is known the set is the
closed ball ``B_S[x', r]``; otherwise it is sampled on a grid. Grid points are
evaluated in batches: the distance matrix between a block of centers and the
prefix is formed once and every threshold is read off its cumulative counts,
which reproduces :func:`rough_st_converges` point by point.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DEFAULT_EPS, Ball, Verdict, _validate_eps, as_point, ball_contains, make_rng
from .density import (
    DensityVerdict,
    IndexSet,
    exact_density,
    natural_density,
    prefix_verdicts,
    validate_schedule,
)
from .errors import UsageError
from .sequences import DECAYS, SequenceFamily, perturbed, subsequence
from .statistical import (
    bound_exponents,
    bulk_medoid,
    cluster_point_check,
    distance_scale,
    rough_st_converges,
    st_bounded,
    st_converges,
)

GRID_N_SCHEDULE = (100, 1_000, 10_000)
BOUNDARY_TOL = 1e-6
DIAM_TOL = 1e-6
MIN_STEP = 0.05
MAX_GRID_POINTS = 4_096
BOUNDARY_SAMPLES = 1_000
CLOSED_TOL = 1e-6
DENSE_MIN = 0.99
R_GRID_MIN_EXPONENT = -4
BATCH_CELLS = 1 << 22


# ---------------------------------------------------------------------------
# batched rough-statistical verdicts


def _structural_rows(seq: SequenceFamily):
    st = seq.structure
    if st is None or st.spike_set is None or not st.base_values:
        return None
    if exact_density(st.spike_set) != 0.0:
        return None
    return np.array(st.base_values, float)


_FOLD = (Verdict.HOLDS, Verdict.FAILS, Verdict.INCONCLUSIVE)


def segment_weights(xs: np.ndarray, ns) -> tuple:
    """Distinct prefix values and how often each falls between consecutive count points.

    The count points are the schedule and its halves. Returns ``(values,
    weights, cut)`` where ``weights[k, s]`` counts the occurrences of
    ``values[k]`` in segment ``s`` and ``cut`` lists the segment ends.
    """
    ns = np.asarray(ns, dtype=np.int64)
    cut = np.unique(np.concatenate([ns, ns // 2]))
    cut = cut[cut > 0]
    values, inverse = np.unique(xs, axis=0, return_inverse=True)
    seg = np.searchsorted(cut, np.arange(1, len(xs) + 1), side="left")
    weights = np.zeros((len(values), len(cut)))
    np.add.at(weights, (inverse.reshape(-1), seg), 1.0)
    return values, weights, cut


@functools.lru_cache(maxsize=16)
def _prefix_weights(seq: SequenceFamily, ns: tuple) -> tuple:
    values, weights, cut = segment_weights(seq.prefix(ns[-1]), ns)
    for a in (values, weights, cut):
        a.setflags(write=False)
    return values, weights, cut


def rough_st_batch(spec, seq, centers, r: float, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE) -> np.ndarray:
    """Rough-statistical verdicts for many candidates at once.

    Returns an object array of :class:`Verdict`, one per row of ``centers``,
    equal to ``rough_st_converges(spec, seq, c, r, eps_schedule, n_schedule).verdict``.
    Distances are evaluated once per distinct prefix value; exceedance
    counts at the schedule points follow from the segment weights.
    """
    eps = _validate_eps(eps_schedule)
    ns = np.array(validate_schedule(n_schedule), dtype=np.int64)
    centers = np.atleast_2d(np.asarray(centers, float))
    if centers.shape[1] != seq.dim:
        raise UsageError(f"centers have dim {centers.shape[1]}, sequence has dim {seq.dim}")
    values, weights, cut = _prefix_weights(seq, tuple(int(n) for n in ns))
    at_full = np.searchsorted(cut, ns)
    halves = ns // 2
    at_half = np.searchsorted(cut, np.maximum(halves, 1))
    widths = (ns - halves).astype(float)
    base = _structural_rows(seq)
    out = np.empty(len(centers), dtype=object)
    chunk = max(1, BATCH_CELLS // len(values))
    for start in range(0, len(centers), chunk):
        block = centers[start : start + chunk]
        d = spec.self_distance(values[None, :, :], block[:, None, :])
        bd = spec.self_distance(base[None, :, :], block[:, None, :]) if base is not None else None
        zero = np.ones(len(block), dtype=bool)
        positive = np.zeros(len(block), dtype=bool)
        for e in eps:
            thr = r + e
            cum = np.cumsum((d >= thr).astype(float) @ weights, axis=1)
            full = cum[:, at_full]
            half = np.where(halves > 0, cum[:, at_half], 0.0)
            codes = prefix_verdicts((full - half) / widths)
            if bd is not None:
                codes = np.where(np.all(bd < thr, axis=1), 0, codes)
            zero &= codes == 0
            positive |= codes == 1
        codes = np.where(zero, 0, np.where(positive, 1, 2))
        out[start : start + len(block)] = [_FOLD[c] for c in codes]
    return out


# ---------------------------------------------------------------------------
# regions and grids


@dataclass(frozen=True)
class Region:
    """An axis-aligned box ``[lo, hi]``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise UsageError("region bounds must be two equal-length coordinate lists")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi < lo):
            raise UsageError(f"empty or invalid region {self.lo}..{self.hi}")

    @classmethod
    def square(cls, half_width: float, dim: int = 2, center=None) -> "Region":
        c = np.zeros(dim) if center is None else np.asarray(center, float)
        return cls(tuple(c - half_width), tuple(c + half_width))

    @property
    def dim(self) -> int:
        return len(self.lo)


def grid_axes(region: Region, step: float) -> list:
    """Per-axis grid coordinates ``lo, lo + step, ...`` up to ``hi`` (inclusive within 1e-9)."""
    if not step > 0:
        raise UsageError(f"grid step must be > 0, got {step}")
    axes = []
    for lo, hi in zip(region.lo, region.hi):
        k = int(math.floor((hi - lo) / step + 1e-9))
        axes.append(np.round(lo + step * np.arange(k + 1), 12))
    return axes


def grid_points(region: Region, step: float) -> np.ndarray:
    """All grid points in row-major order (first coordinate slowest)."""
    axes = grid_axes(region, step)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def default_step(r: float, region: Region) -> float:
    """``max(r / 8, 0.05)``, widened so the grid has at most 4096 points."""
    step = max(r / 8.0, MIN_STEP)
    extent = np.asarray(region.hi) - np.asarray(region.lo)
    while np.prod(np.floor(extent / step + 1e-9) + 1) > MAX_GRID_POINTS:
        step *= 2.0
    return step


def bulk_region(spec, seq, r: float, n: int) -> Region:
    """Bounding box of the prefix terms nearest the medoid (top 1% dropped), inflated by ``r + 1``."""
    xs = seq.prefix(n)
    med = bulk_medoid(spec, seq, n)
    d = spec.to_center(xs, med)
    keep = xs[d <= np.quantile(d, 0.99)]
    pad = r + 1.0
    return Region(tuple(keep.min(axis=0) - pad), tuple(keep.max(axis=0) + pad))


# ---------------------------------------------------------------------------
# the limit set


@dataclass(frozen=True)
class RoughLimitSet:
    """Either ``ExactBall`` (``ball`` set) or ``SampledMembers`` (``members`` set).

    ``members`` holds the grid points with a Holds verdict; ``tested`` counts
    grid points and ``inconclusive`` those left undecided.
    """

    r: float
    representation: str
    diameter_estimate: float
    ball: Optional[Ball] = None
    members: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    region: Optional[Region] = None
    step: Optional[float] = None
    tested: int = 0
    inconclusive: int = 0

    @property
    def is_exact(self) -> bool:
        return self.representation == "ExactBall"

    def __len__(self):
        return len(self.members)

    def contains(self, spec, y) -> bool:
        y = as_point(y)
        if self.is_exact:
            return ball_contains(Ball(self.ball.center, self.ball.radius + BOUNDARY_TOL, True), spec, y)
        return bool(np.any(np.all(np.isclose(self.members, y, atol=1e-12), axis=1)))


def max_pairwise(spec, points, chunk: int = 1024) -> float:
    """``max S(p, p, q)`` over all pairs of rows."""
    pts = np.asarray(points, float)
    if len(pts) < 2:
        return 0.0
    best = 0.0
    for a in range(0, len(pts), chunk):
        blk = pts[a : a + chunk]
        d = spec.self_distance(blk[:, None, :], pts[None, :, :])
        best = max(best, float(d.max()))
    return best


def ball_boundary(spec, center, radius: float, count: int = BOUNDARY_SAMPLES, seed=None) -> np.ndarray:
    """Points ``y`` with ``S(y, y, center) = radius`` along ``count`` directions.

    Two-dimensional balls use evenly spaced angles; other dimensions use
    seeded Gaussian directions. Each crossing is located by bisection; rays
    that never reach the radius are cut off at a large distance.
    """
    center = as_point(center)
    dim = center.size
    if dim == 2:
        ang = 2 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = make_rng(seed).standard_normal((count, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if radius <= 0:
        return np.repeat(center[None, :], len(dirs), axis=0)

    def s_at(t):
        p = center + t[:, None] * dirs
        return spec.to_center(p, center)

    hi = np.ones(len(dirs))
    for _ in range(60):
        short = s_at(hi) < radius
        if not short.any():
            break
        hi[short] *= 2.0
    lo = np.zeros(len(dirs))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = s_at(mid) <= radius
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return center + lo[:, None] * dirs


def certified_limit(spec, seq, st_limit=None, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE):
    """A statistical limit known by construction or confirmed by a Holds verdict, else ``None``."""
    if st_limit is not None:
        v = st_converges(spec, seq, st_limit, eps_schedule, n_schedule)
        return v.candidate if v.holds else None
    st = seq.structure
    if st is not None and st.known_st_limit is not None:
        return as_point(st.known_st_limit, seq.dim)
    return None


def estimate_rough_limit_set(
    spec,
    seq,
    r: float,
    search_region: Optional[Region] = None,
    grid_step: Optional[float] = None,
    eps_schedule=DEFAULT_EPS,
    n_schedule=GRID_N_SCHEDULE,
    st_limit=None,
    force_grid: bool = False,
) -> RoughLimitSet:
    """Estimate ``st-LIM^r``.

    With a certified statistical limit ``x'`` the result is the exact closed
    ball ``B_S[x', r]`` and its diameter is estimated from boundary samples.
    Otherwise (or with ``force_grid``) every grid point of the region is
    tested and the Holds points are returned; the diameter is then the
    largest pairwise S among members.
    """
    if not (r >= 0 and math.isfinite(r)):
        raise UsageError(f"roughness degree must be >= 0, got {r}")
    ns = validate_schedule(n_schedule)
    if not force_grid:
        limit = certified_limit(spec, seq, st_limit, eps_schedule, ns)
        if limit is not None:
            ball = Ball(limit, float(r), closed=True)
            bnd = ball_boundary(spec, limit, r)
            return RoughLimitSet(float(r), "ExactBall", max_pairwise(spec, bnd), ball=ball)
    region = search_region if search_region is not None else bulk_region(spec, seq, r, ns[0])
    if region.dim != seq.dim:
        raise UsageError(f"region has dim {region.dim}, sequence has dim {seq.dim}")
    step = grid_step if grid_step is not None else default_step(r, region)
    pts = grid_points(region, step)
    if not len(pts):
        raise UsageError("search region contains no grid points")
    verdicts = rough_st_batch(spec, seq, pts, r, eps_schedule, ns)
    members = pts[verdicts == Verdict.HOLDS]
    return RoughLimitSet(
        float(r),
        "SampledMembers",
        max_pairwise(spec, members),
        members=members,
        region=region,
        step=float(step),
        tested=len(pts),
        inconclusive=int(np.sum(verdicts == Verdict.INCONCLUSIVE)),
    )


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a theorem check: ``margin >= 0`` exactly when it passed.

    ``details`` is a tuple of ``(label, value)`` pairs for reporting.
    """

    name: str
    passed: bool
    margin: float
    details: tuple = ()

    def detail(self, key, default=None):
        return dict(self.details).get(key, default)


def diam_bound_check(spec, limit_set: RoughLimitSet) -> CheckReport:
    """The diameter of ``st-LIM^r`` is at most ``3r``."""
    bound = 3.0 * limit_set.r
    margin = bound + DIAM_TOL - limit_set.diameter_estimate
    return CheckReport(
        "diameter",
        margin >= 0,
        margin,
        (("diameter", limit_set.diameter_estimate), ("bound", bound), ("representation", limit_set.representation)),
    )


def ball_characterization_check(
    spec,
    seq,
    r: float,
    region: Optional[Region] = None,
    step: float = MIN_STEP,
    eps_schedule=DEFAULT_EPS,
    n_schedule=GRID_N_SCHEDULE,
    st_limit=None,
) -> CheckReport:
    """Grid verdicts agree with membership in ``B_S[x', r]`` away from its boundary.

    A grid point is in the boundary shell when one of its axis neighbours at
    distance ``step`` has the opposite expected membership. Any disagreement
    outside the shell fails the check; the margin is minus the number of
    such disagreements.
    """
    limit = certified_limit(spec, seq, st_limit, eps_schedule, n_schedule)
    if limit is None:
        raise UsageError(f"{seq.name} has no certified statistical limit")
    if region is None:
        region = Region.square(r + 1.0, seq.dim, limit)
    axes = grid_axes(region, step)
    pts = grid_points(region, step)
    shape = tuple(len(a) for a in axes)
    verdicts = rough_st_batch(spec, seq, pts, r, eps_schedule, n_schedule)
    got = (verdicts == Verdict.HOLDS).reshape(shape)
    expected = (spec.to_center(pts, limit) <= r + BOUNDARY_TOL).reshape(shape)
    shell = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        for delta in (1, -1):
            nb = np.roll(expected, -delta, axis=ax)
            differ = nb != expected
            edge = [slice(None)] * len(shape)
            edge[ax] = -1 if delta == 1 else 0
            differ[tuple(edge)] = False
            shell |= differ
    wrong = got != expected
    outside = int(np.sum(wrong & ~shell))
    return CheckReport(
        "ball_characterization",
        outside == 0,
        float(-outside),
        (
            ("grid_points", int(pts.shape[0])),
            ("members", int(got.sum())),
            ("disagreements", int(wrong.sum())),
            ("outside_shell", outside),
            ("center", tuple(limit)),
        ),
    )


def limit_set_closed_check(
    spec, seq, r: float, members, limit=None, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE
) -> CheckReport:
    """The limit of member points of ``st-LIM^r`` is again a member.

    ``members`` must be an ordinarily convergent list of points, each with a
    Holds verdict. The limit is ``limit`` when supplied (the last member must
    then be within ``1e-6`` of it); otherwise the last member, which requires
    the final gap between members to be at most ``1e-6``.
    """
    pts = np.atleast_2d(np.asarray(members, float))
    if len(pts) < 2:
        raise UsageError("need at least two member points")
    gaps = spec.self_distance(pts[:-1], pts[1:])
    if limit is not None:
        xi = as_point(limit, seq.dim)
        tail = float(spec.self_distance(pts[-1], xi))
        if tail > CLOSED_TOL:
            raise UsageError(f"member sequence does not reach the stated limit (last distance {tail:.3g})")
    else:
        if gaps[-1] > CLOSED_TOL:
            raise UsageError(f"member sequence is not convergent (last gap {gaps[-1]:.3g})")
        xi = pts[-1]
    member_verdicts = rough_st_batch(spec, seq, pts, r, eps_schedule, n_schedule)
    if any(v is not Verdict.HOLDS for v in member_verdicts):
        raise UsageError("every listed point must be a rough statistical limit")
    v = rough_st_converges(spec, seq, xi, r, eps_schedule, n_schedule)
    return CheckReport(
        "closedness", v.holds, 0.0 if v.holds else -1.0, (("limit", tuple(xi)), ("verdict", v.verdict.value))
    )


def _dense_gate(index_set: IndexSet, n_schedule) -> float:
    exact = exact_density(index_set)
    if exact is not None:
        if exact != 1.0:
            raise UsageError(f"{index_set} has density {exact:g}, not 1")
        return 1.0
    est = natural_density(index_set, n_schedule)
    if not (est.is_positive and est.value >= DENSE_MIN):
        raise UsageError(f"{index_set} is not certified to have density 1 ({est.describe()})")
    return float(est.value)


def subsequence_limitset_check(
    spec, seq, dense_index_set: IndexSet, sample_points, r: float, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE
) -> CheckReport:
    """A density-one subsequence keeps every rough statistical limit of the sequence.

    Points that are not limits of the full sequence are reported as vacuous.
    """
    dens = _dense_gate(dense_index_set, n_schedule)
    sub = subsequence(seq, dense_index_set, dens)
    pts = np.atleast_2d(np.asarray(sample_points, float))
    full = rough_st_batch(spec, seq, pts, r, eps_schedule, n_schedule)
    part = rough_st_batch(spec, sub, pts, r, eps_schedule, n_schedule)
    rows, violations = [], 0
    for p, a, b in zip(pts, full, part):
        if a is Verdict.HOLDS and b is not Verdict.HOLDS:
            violations += 1
        rows.append((tuple(p), a.value, b.value))
    return CheckReport("subsequence", violations == 0, float(-violations), (("points", tuple(rows)),))


def perturbation_equivalence_check(
    spec, seq_a, seq_b, candidate, r: float, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE
) -> CheckReport:
    """Sequences at vanishing S-distance share rough statistical limits.

    ``seq_b`` is a family or the name of a registered decay, in which case
    the perturbed family is built from ``seq_a``. The check passes when both
    verdicts are equal.
    """
    if isinstance(seq_b, str):
        if seq_b not in DECAYS:
            raise UsageError(f"unknown decay {seq_b!r}")
        seq_b = perturbed(seq_a, seq_b)
    va = rough_st_converges(spec, seq_a, candidate, r, eps_schedule, n_schedule)
    vb = rough_st_converges(spec, seq_b, candidate, r, eps_schedule, n_schedule)
    same = va.verdict is vb.verdict
    return CheckReport(
        "perturbation",
        same,
        0.0 if same else -1.0,
        (("original", va.verdict.value), ("perturbed", vb.verdict.value), ("sequence", seq_b.name)),
    )


def cluster_ball_cover_check(
    spec, seq, c, r: float, members, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE, tol=BOUNDARY_TOL
) -> CheckReport:
    """Every member of ``st-LIM^r`` lies in the closed ball ``B_S[c, r]`` around a statistical cluster point ``c``."""
    cv = cluster_point_check(spec, seq, c, eps_schedule, n_schedule)
    if not cv.holds:
        raise UsageError(f"{tuple(cv.point)} is not a statistical cluster point ({cv.verdict.value})")
    pts = np.atleast_2d(np.asarray(members, float))
    if pts.size == 0:
        return CheckReport("cluster_cover", True, math.inf, (("members", 0),))
    d = spec.to_center(pts, cv.point)
    margin = float(np.min(r + tol - d))
    return CheckReport("cluster_cover", margin >= 0, margin, (("members", len(pts)), ("max_distance", float(d.max()))))


def r_grid(scale: float, n_schedule) -> tuple:
    """``scale * 2^j`` for ``j = -4, ..., j_max`` with ``j_max`` from :func:`bound_exponents`."""
    top = bound_exponents(n_schedule)[-1]
    return tuple(scale * 2.0**j for j in range(R_GRID_MIN_EXPONENT, top + 1))


def bounded_iff_nonempty_check(
    spec, seq, ref_point, eps_schedule=DEFAULT_EPS, n_schedule=GRID_N_SCHEDULE, region=None, radii=None
) -> CheckReport:
    """Statistical boundedness holds exactly when some ``st-LIM^r`` is non-empty.

    Forward: a bound ``M`` from :func:`st_bounded` makes ``ref_point`` a limit
    of degree ``M``. Backward: a member found over the r-grid requires
    :func:`st_bounded` to hold. At each radius ``ref_point`` itself is tried
    before the grid, which may be coarser than the radius.
    """
    ns = validate_schedule(n_schedule)
    u = as_point(ref_point, seq.dim)
    bounded = st_bounded(spec, seq, u, ns)
    forward_ok = True
    if bounded.holds:
        forward_ok = rough_st_converges(spec, seq, u, bounded.bound, eps_schedule, ns).holds
    if radii is None:
        radii = r_grid(distance_scale(spec, seq, u, ns), ns)
    found = None
    for r in sorted(radii, reverse=True):
        if rough_st_converges(spec, seq, u, r, eps_schedule, ns).holds:
            found = (float(r), tuple(u))
            break
        est = estimate_rough_limit_set(spec, seq, r, region, None, eps_schedule, ns, force_grid=True)
        if len(est):
            found = (float(r), tuple(est.members[0]))
            break
    backward_ok = found is None or bounded.holds
    passed = forward_ok and backward_ok
    return CheckReport(
        "bounded_iff_nonempty",
        passed,
        0.0 if passed else -1.0,
        (
            ("st_bounded", bounded.verdict.value),
            ("bound", bounded.bound),
            ("forward", forward_ok),
            ("member", found),
            ("backward", backward_ok),
        ),
    )
