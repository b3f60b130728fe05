"""Statistical and rough-statistical convergence, Cauchyness and boundedness.

``x_n`` converges statistically to ``x`` when every exceedance set
``A(eps) = {n : S(x_n, x_n, x) >= eps}`` has natural density zero; the rough
variant of degree ``r`` uses the threshold ``r + eps``. Each check builds the
exceedance sets for a finite eps schedule, estimates their density and folds
the results into a three-valued verdict.

When a family carries structure metadata and every base value lies strictly
inside the threshold, the exceedance set is contained in the spike set; if
that set has exact density zero the estimate is promoted to an exact Zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    DEFAULT_EPS,
    TOL,
    ConvergenceVerdict,
    Verdict,
    _validate_eps,
    as_point,
    is_convergent_prefix,
    tail_pivots,
)
from .density import (
    DEFAULT_N_SCHEDULE,
    Complement,
    DensityEstimate,
    DensityVerdict,
    Explicit,
    exact_density,
    natural_density,
    validate_schedule,
)
from .errors import DomainError, UsageError
from .sequences import SequenceFamily, distance_prefix, exceedance_set

SMOKE_N_SCHEDULE = (100, 1_000, 10_000)
UNIQUE_TOL = 1e-6
MAX_CAUCHY_WITNESSES = 64
MAX_BOUND_EXPONENT = 6


def schedule_upto(n_max: int) -> tuple:
    """Powers of ten from 100 below ``n_max``, followed by ``n_max`` itself."""
    if n_max < 1000:
        raise UsageError(f"n_max must be >= 1000, got {n_max}")
    out = [10**k for k in range(2, 8) if 10**k < n_max]
    return tuple(out + [n_max])


@dataclass(frozen=True)
class StConvergenceVerdict:
    """Rough-statistical verdict at ``candidate`` (``r = 0`` is plain statistical).

    ``per_eps`` holds ``(eps, DensityEstimate of {n : S(x_n, x_n, candidate) >= r + eps})``.
    """

    verdict: Verdict
    candidate: np.ndarray
    per_eps: tuple
    n_schedule: tuple
    r: float = 0.0

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS


def fold_verdict(estimates) -> Verdict:
    """Holds iff every estimate is Zero; Fails if any is Positive."""
    estimates = list(estimates)
    if all(e.is_zero for e in estimates):
        return Verdict.HOLDS
    if any(e.is_positive for e in estimates):
        return Verdict.FAILS
    return Verdict.INCONCLUSIVE


def _structural_subset(seq: SequenceFamily, spec, center, threshold: float, below: bool) -> bool:
    """True when structure proves the exceedance (or hit) set lies in a density-zero spike set."""
    st = seq.structure
    if st is None or st.spike_set is None or not st.base_values:
        return False
    if exact_density(st.spike_set) != 0.0:
        return False
    base = np.array(st.base_values, float)
    d = spec.to_center(base, center)
    return bool(np.all(d >= threshold)) if below else bool(np.all(d < threshold))


def exceedance_density(spec, seq, center, threshold, n_schedule, *, below=False) -> DensityEstimate:
    """Density estimate of ``{n : S(x_n, x_n, center) >= threshold}`` (``below``: ``< threshold``)."""
    center = as_point(center, seq.dim)
    s = exceedance_set(spec, seq, center, threshold)
    if below:
        s = Complement(s)
    est = natural_density(s, n_schedule)
    if _structural_subset(seq, spec, center, threshold, below):
        return replace(est, verdict=DensityVerdict.ZERO, value=None, exact=0.0, basis="subset")
    return est


def rough_st_converges(
    spec, seq, candidate, r: float = 0.0, eps_schedule=DEFAULT_EPS, n_schedule=DEFAULT_N_SCHEDULE, short_circuit=False
) -> StConvergenceVerdict:
    """Rough statistical convergence of degree ``r`` to ``candidate``.

    ``short_circuit`` stops at the first Positive estimate (the verdict is
    already Fails); ``per_eps`` is then truncated.
    """
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError(f"roughness degree must be >= 0, got {r}")
    eps = _validate_eps(eps_schedule)
    ns = validate_schedule(n_schedule)
    candidate = as_point(candidate, seq.dim)
    per_eps = []
    for e in eps:
        est = exceedance_density(spec, seq, candidate, r + e, ns)
        per_eps.append((e, est))
        if short_circuit and est.is_positive:
            break
    return StConvergenceVerdict(fold_verdict(e for _, e in per_eps), candidate, tuple(per_eps), ns, float(r))


def st_converges(spec, seq, candidate, eps_schedule=DEFAULT_EPS, n_schedule=DEFAULT_N_SCHEDULE) -> StConvergenceVerdict:
    """Statistical convergence: ``δ({n : S(x_n, x_n, candidate) >= eps}) = 0`` for every eps."""
    return rough_st_converges(spec, seq, candidate, 0.0, eps_schedule, n_schedule)


@dataclass(frozen=True)
class UniquenessReport:
    passed: bool
    distance: float
    tol: float
    candidates: tuple


def st_limit_unique_check(
    spec, seq, cand1, cand2, eps_schedule=DEFAULT_EPS, n_schedule=DEFAULT_N_SCHEDULE, tol=UNIQUE_TOL
) -> UniquenessReport:
    """Two statistical limits of one sequence must coincide: ``S(x, x, y) <= tol``.

    ``cand1`` and ``cand2`` are points (checked here with :func:`st_converges`)
    or verdicts already computed. A failing report is a counterexample
    candidate against uniqueness, which can only come from a spec that is not
    an S-metric or from eps schedules too coarse to separate the candidates.
    """
    verdicts = [
        c if isinstance(c, StConvergenceVerdict) else st_converges(spec, seq, c, eps_schedule, n_schedule)
        for c in (cand1, cand2)
    ]
    if not all(v.holds for v in verdicts):
        raise UsageError("st_limit_unique_check needs two candidates with Holds verdicts")
    a, b = verdicts[0].candidate, verdicts[1].candidate
    dist = float(spec.self_distance(a, b))
    return UniquenessReport(dist <= tol, dist, tol, (a, b))


# ---------------------------------------------------------------------------
# statistical Cauchy and boundedness


def bulk_medoid(spec, seq, n_max: int, samples: int = 256) -> np.ndarray:
    """The sampled prefix term minimising its median S-distance to the other samples."""
    idx = np.unique(np.linspace(1, n_max, num=min(samples, n_max)).astype(np.int64))
    pts = seq.points(idx)
    d = spec.self_distance(pts[:, None, :], pts[None, :, :])
    return pts[int(np.argmin(np.median(d, axis=1)))]


def _center_hint(spec, seq, n_max):
    st = seq.structure
    if st is not None and st.known_st_limit is not None:
        return as_point(st.known_st_limit, seq.dim)
    return bulk_medoid(spec, seq, n_max)


def cauchy_witness_candidates(spec, seq, eps, n_max: int, cap=MAX_CAUCHY_WITNESSES) -> np.ndarray:
    """Candidate pivot indices ``N`` for the statistical Cauchy search.

    Tail pivots first, then indices whose term lies within the smallest eps
    of a central point (the complement of the largest exceedance set), taken
    evenly from the tail of that complement. Terms with equal values give the
    same exceedance sets, so each value is tried once under the earliest
    index carrying it.
    """
    center = _center_hint(spec, seq, n_max)
    d = distance_prefix(spec, seq, center, n_max)
    pool = np.empty(0, dtype=np.int64)
    for e in sorted(eps):
        pool = np.flatnonzero(d < e) + 1
        if pool.size:
            break
    if not pool.size:
        pool = np.argsort(d, kind="stable")[:cap] + 1
    tail = pool[pool > n_max // 2]
    src = tail if tail.size else pool
    picks = src[np.unique(np.linspace(0, src.size - 1, num=min(cap, src.size)).astype(np.int64))][::-1]
    ordered = list(tail_pivots(n_max))[::-1] + [int(p) for p in picks]
    out, seen = [], set()
    pts = seq.points(ordered)
    for n, p in zip(ordered, pts):
        key = p.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(n)
        if len(out) >= cap:
            break
    xs = seq.prefix(n_max)
    earliest = [int(np.argmax(np.all(xs[:n] == xs[n - 1], axis=1))) + 1 for n in out]
    return np.array(earliest, dtype=np.int64)


@dataclass(frozen=True)
class StCauchyVerdict:
    """``per_eps`` holds ``(eps, N or None, DensityEstimate for the best N)``."""

    verdict: Verdict
    per_eps: tuple
    n_schedule: tuple
    candidates_tried: int

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def witnesses(self) -> dict:
        return {e: n for e, n, _ in self.per_eps}


def st_cauchy(spec, seq, eps_schedule=DEFAULT_EPS, n_schedule=DEFAULT_N_SCHEDULE) -> StCauchyVerdict:
    """Statistical Cauchy: for every eps some ``N`` has ``δ({n : S(x_n, x_n, x_N) >= eps}) = 0``.

    Witnesses are searched among at most 64 candidate pivots (see
    :func:`cauchy_witness_candidates`). Fails when at some eps every
    candidate gives a Positive density.
    """
    eps = _validate_eps(eps_schedule)
    ns = validate_schedule(n_schedule)
    cands = cauchy_witness_candidates(spec, seq, eps, ns[-1])
    centers = seq.points(cands)
    per_eps, any_all_positive = [], False
    for e in eps:
        found, best, all_positive = None, None, True
        for n, c in zip(cands, centers):
            est = exceedance_density(spec, seq, c, e, ns)
            if best is None or (est.is_zero and not best.is_zero):
                best = est
            if not est.is_positive:
                all_positive = False
            if est.is_zero:
                found, best = int(n), est
                break
        per_eps.append((e, found, best))
        any_all_positive |= all_positive
    if all(n is not None for _, n, _ in per_eps):
        verdict = Verdict.HOLDS
    elif any_all_positive:
        verdict = Verdict.FAILS
    else:
        verdict = Verdict.INCONCLUSIVE
    return StCauchyVerdict(verdict, tuple(per_eps), ns, len(cands))


def distance_scale(spec, seq, ref_point, n_schedule) -> float:
    """Median of ``S(x_n, x_n, ref_point)`` over the first schedule prefix (1 if that is 0)."""
    d = distance_prefix(spec, seq, ref_point, n_schedule[0])
    m = float(np.median(d))
    return m if m > TOL else 1.0


@dataclass(frozen=True)
class StBoundedVerdict:
    """``per_bound`` holds ``(B, DensityEstimate of {n : S(x_n, x_n, u) >= B})``."""

    verdict: Verdict
    bound: Optional[float]
    ref_point: np.ndarray
    per_bound: tuple

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS


def bound_exponents(n_schedule) -> range:
    """Exponents ``j = 0..j_max`` of the boundedness grid ``B = scale * 2^j``.

    ``j_max = min(6, floor(log2(n_{m-1} / n_1)))``: a sequence whose distances
    grow linearly from ``scale`` then exceeds the largest ``B`` before the
    second-to-last schedule point, so its exceedance is visible in both of
    the tail blocks that decide a Positive verdict.
    """
    ns = validate_schedule(n_schedule)
    top = int(math.floor(math.log2(ns[-2] / ns[0]))) if ns[-2] > ns[0] else 0
    return range(0, max(0, min(MAX_BOUND_EXPONENT, top)) + 1)


def st_bounded(spec, seq, ref_point, n_schedule=DEFAULT_N_SCHEDULE) -> StBoundedVerdict:
    """Statistical boundedness: some ``B`` with ``δ({n : S(x_n, x_n, u) >= B}) = 0``.

    Tries ``B = scale * 2^j`` for ``j`` in :func:`bound_exponents`, ``scale``
    being the median distance to ``u`` over the first schedule prefix, and
    then the calibration bound ``2 * max`` of those distances, which catches
    bounded sequences whose outliers are rare but positive-density. Tying
    every bound to the early prefix keeps it within what the later schedule
    points can certify. Holds at the first Zero; Fails if every ``B`` gives
    Positive.
    """
    ns = validate_schedule(n_schedule)
    u = as_point(ref_point, seq.dim)
    scale = distance_scale(spec, seq, u, ns)
    bounds = [scale * 2.0**j for j in bound_exponents(ns)]
    calibration = 2.0 * float(np.max(distance_prefix(spec, seq, u, ns[0])))
    if calibration > bounds[-1]:
        bounds.append(calibration)
    per_bound = []
    for b in bounds:
        est = exceedance_density(spec, seq, u, b, ns)
        per_bound.append((b, est))
        if est.is_zero:
            return StBoundedVerdict(Verdict.HOLDS, b, u, tuple(per_bound))
    verdict = Verdict.FAILS if all(e.is_positive for _, e in per_bound) else Verdict.INCONCLUSIVE
    return StBoundedVerdict(verdict, None, u, tuple(per_bound))


# ---------------------------------------------------------------------------
# almost-everywhere modification


@dataclass(frozen=True)
class AeModification:
    """A convergent sequence agreeing with ``x`` outside a density-zero set.

    ``values`` holds ``y_1..y_{n_max}``; ``block_starts`` the indices ``n_k``
    after which terms farther than ``2^-k`` from the limit are replaced;
    ``modified`` continues the same rule past ``n_max``.
    """

    limit: np.ndarray
    n_max: int
    values: np.ndarray
    disagreement: Explicit
    block_starts: tuple
    modified: SequenceFamily


def _block_thresholds(idx, block_starts):
    """Threshold ``2^-k`` for indices in ``(n_k, n_{k+1}]``; ``1`` up to ``n_1``."""
    k = np.searchsorted(np.asarray(block_starts, dtype=np.int64), idx, side="left")
    return np.exp2(-k.astype(float))


def ae_modification(spec, seq, st_limit, n_max: int = 100_000, eps_schedule=DEFAULT_EPS, n_schedule=None) -> AeModification:
    """Replace the terms of a statistically convergent sequence that stray from its limit.

    ``n_k`` is the smallest index after ``n_{k-1}`` beyond which (within the
    prefix) ``|{m <= n : S(x_m, x_m, x) < 2^-k}| / n > 1 - 2^-k``. Terms in
    ``(n_k, n_{k+1}]`` at distance ``>= 2^-k`` become the limit; terms up to
    ``n_1`` are screened at threshold 1.
    """
    ns = validate_schedule(n_schedule) if n_schedule is not None else schedule_upto(n_max)
    if ns[-1] > n_max:
        raise UsageError("n_schedule must not pass n_max")
    x = as_point(st_limit, seq.dim)
    check = st_converges(spec, seq, x, eps_schedule, ns)
    if not check.holds:
        raise UsageError(f"{seq.name} is not certified statistically convergent to {x} ({check.verdict})")

    d = np.asarray(distance_prefix(spec, seq, x, n_max))
    n_range = np.arange(1, n_max + 1)
    starts = []
    k = 1
    while k < 60:
        good = np.cumsum(d < 2.0**-k) / n_range
        fails = np.flatnonzero(~(good > 1 - 2.0**-k)) + 1
        last_fail = int(fails[-1]) if fails.size else 0
        if last_fail >= n_max:
            break
        nk = max(last_fail, starts[-1] + 1 if starts else 1)
        if nk >= n_max:
            break
        starts.append(nk)
        k += 1
    starts = tuple(starts)

    thr = _block_thresholds(n_range, starts)
    swap = d >= thr
    xs = seq.prefix(n_max)
    ys = np.where(swap[:, None], x[None, :], xs)
    disagreement = Explicit(tuple(int(i) for i in np.flatnonzero(swap & np.any(xs != x, axis=1)) + 1), n_max)

    def rule(idx):
        pts = seq.points(idx)
        dist = spec.to_center(pts, x)
        return np.where((dist >= _block_thresholds(idx, starts))[:, None], x[None, :], pts)

    modified = SequenceFamily(f"ae({seq.name})", seq.dim, rule)
    return AeModification(x, n_max, ys, disagreement, starts, modified)


def convergent_subsequence(spec, seq, st_limit, n_max: int = 100_000, **kwargs) -> np.ndarray:
    """Indices ``1..n_max`` outside the disagreement set of :func:`ae_modification`.

    Along these indices ``x`` coincides with the convergent modification.
    """
    mod = ae_modification(spec, seq, st_limit, n_max, **kwargs)
    keep = np.ones(n_max, dtype=bool)
    keep[np.asarray(mod.disagreement.values, dtype=np.int64) - 1] = False
    return np.flatnonzero(keep) + 1


def check_modification(spec, seq, mod: AeModification, eps_schedule=DEFAULT_EPS) -> ConvergenceVerdict:
    """Ordinary convergence of the modified sequence to the statistical limit."""
    return is_convergent_prefix(spec, mod.modified, mod.limit, eps_schedule, mod.n_max)


# ---------------------------------------------------------------------------
# cluster points


@dataclass(frozen=True)
class ClusterVerdict:
    """``per_eps`` holds ``(eps, DensityEstimate of {n : S(x_n, x_n, c) < eps})``."""

    verdict: Verdict
    point: np.ndarray
    per_eps: tuple

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS


def cluster_point_check(spec, seq, c, eps_schedule=DEFAULT_EPS, n_schedule=DEFAULT_N_SCHEDULE) -> ClusterVerdict:
    """Statistical cluster point: the hit set ``{n : S(x_n, x_n, c) < eps}`` is not density zero.

    A density that does not exist counts as "not zero", so Holds requires
    only that no scheduled eps yields a Zero verdict.
    """
    eps = _validate_eps(eps_schedule)
    ns = validate_schedule(n_schedule)
    c = as_point(c, seq.dim)
    per_eps = tuple((e, exceedance_density(spec, seq, c, e, ns, below=True)) for e in eps)
    verdict = Verdict.FAILS if any(est.is_zero for _, est in per_eps) else Verdict.HOLDS
    return ClusterVerdict(verdict, c, per_eps)
