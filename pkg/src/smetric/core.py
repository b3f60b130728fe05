"""S-metric constructions, axiom checks, balls and the classical convergence notions.

An S-metric on X is a map ``S: X^3 -> [0, inf)`` with

    (i)   S(x, y, z) >= 0
    (ii)  S(x, y, z) == 0  iff  x == y == z
    (iii) S(x, y, z) <= S(x, x, a) + S(y, y, a) + S(z, z, a)

Points are finite-dimensional real vectors held as 1-D ``float64`` arrays.
Every evaluator is vectorised: arguments broadcast over leading axes, the
last axis holds coordinates.

The "for every eps > 0" quantifier in the limit definitions cannot be decided
from a finite prefix, so the prefix checks here take a finite eps schedule and
return a three-valued :class:`Verdict` together with the evidence used.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, UsageError

TOL = 1e-9
SYMMETRY_TOL = 2e-9
DEFAULT_EPS = (1.0, 1e-1, 1e-2, 1e-3)

CAUCHY_WINDOW = 512
CAUCHY_RANDOM_PAIRS = 10_000
# dyadic tail blocks (n/2^(j+1), n/2^j], j < TAIL_BLOCKS, used to decide "recurs"
TAIL_BLOCKS = 4
BOUNDED_GROWTH_TOL = 1e-2


def default_seed() -> int:
    """Seed for random sampling, taken from ``SMETRIC_SEED`` (default 42)."""
    raw = os.environ.get("SMETRIC_SEED", "42")
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"SMETRIC_SEED must be an integer, got {raw!r}") from exc


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(default_seed() if seed is None else seed)


class Verdict(str, enum.Enum):
    """Three-valued decision for a limit-quantified claim checked on a prefix."""

    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


# ---------------------------------------------------------------------------
# points


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate ``x`` as a point and return it as a read-only 1-D float array."""
    p = np.array(x, dtype=float).reshape(-1) if np.ndim(x) == 0 else np.array(x, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError(f"a point must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"point has non-finite coordinates: {p}")
    if dim is not None and p.size != dim:
        raise DimensionError(f"expected a point of dim {dim}, got dim {p.size}")
    p.setflags(write=False)
    return p


def _check_dims(*points):
    dims = {np.shape(p)[-1] for p in points}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def fmt_point(p) -> str:
    return "(" + ",".join(f"{float(c):.9g}" for c in np.asarray(p).reshape(-1)) + ")"


# ---------------------------------------------------------------------------
# S-metric constructions

NORM_ORDERS = {"euclidean": 2, "taxicab": 1, "max": np.inf}


def _norm(v, order):
    if order == 2:
        return np.sqrt(np.einsum("...i,...i->...", v, v))
    if order == 1:
        return np.abs(v).sum(axis=-1)
    return np.abs(v).max(axis=-1)


def _metric_from_norm(order):
    return lambda x, z: _norm(np.asarray(x) - np.asarray(z), order)


def _discrete_metric(x, z):
    return np.any(np.asarray(x) != np.asarray(z), axis=-1).astype(float)


METRICS: dict[str, Callable] = {
    "euclidean": _metric_from_norm(2),
    "taxicab": _metric_from_norm(1),
    "chebyshev": _metric_from_norm(np.inf),
    "discrete": _discrete_metric,
}


@dataclass(frozen=True)
class SMetricSpec:
    """A named S-metric construction.

    ``kind`` is one of ``"norm_sum"``, ``"metric_sum"`` or ``"custom"``.
    ``fn`` is the vectorised evaluator; it is excluded from equality so that
    two specs built from the same recipe compare equal. ``diag``, when given,
    evaluates ``S(x, x, z)`` directly and must agree with ``fn`` exactly.
    """

    name: str
    kind: str
    params: tuple = ()
    fn: Callable = field(default=None, compare=False, repr=False)
    diag: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __call__(self, x, y, z) -> float:
        return eval_s(self, x, y, z)

    def evaluate(self, x, y, z) -> np.ndarray:
        """Raw broadcast evaluation without validation."""
        return np.asarray(self.fn(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)), float)

    def self_distance(self, x, z) -> np.ndarray:
        """Broadcast ``S(x, x, z)``."""
        x, z = np.asarray(x, float), np.asarray(z, float)
        if self.diag is not None:
            return np.asarray(self.diag(x, z), float)
        return self.evaluate(x, x, z)

    def to_center(self, xs, z) -> np.ndarray:
        """``S(x_n, x_n, z)`` for every row of ``xs``."""
        return self.self_distance(xs, z)

    def __str__(self):
        return self.name


def norm_sum(norm: str = "euclidean") -> SMetricSpec:
    """``S(x, y, z) = ||x - z|| + ||y - z||`` for a Euclidean, taxicab or max norm."""
    if norm not in NORM_ORDERS:
        raise UsageError(f"unknown norm {norm!r}; expected one of {sorted(NORM_ORDERS)}")
    order = NORM_ORDERS[norm]

    def fn(x, y, z):
        return _norm(x - z, order) + _norm(y - z, order)

    def diag(x, z):
        d = _norm(x - z, order)
        return d + d

    return SMetricSpec(f"norm_sum({norm})", "norm_sum", (norm,), fn, diag)


def metric_sum(metric="euclidean", name: Optional[str] = None) -> SMetricSpec:
    """``S(x, y, z) = d(x, z) + d(y, z)`` for a metric ``d``.

    ``metric`` is a registered name or a vectorised callable ``d(x, z)``.
    """
    if isinstance(metric, str):
        if metric not in METRICS:
            raise UsageError(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}")
        d, label = METRICS[metric], metric
    else:
        d, label = metric, name or getattr(metric, "__name__", "custom")

    def fn(x, y, z):
        return np.asarray(d(x, z), float) + np.asarray(d(y, z), float)

    def diag(x, z):
        dx = np.asarray(d(x, z), float)
        return dx + dx

    return SMetricSpec(f"metric_sum({label})", "metric_sum", (label,), fn, diag)


def custom(name: str, fn: Callable, vectorized: bool = True) -> SMetricSpec:
    """Wrap a user rule ``fn(x, y, z)``.

    Custom rules are not trusted: run :func:`check_axioms` on them before
    relying on any theorem-based check. Non-vectorised rules are looped.
    """
    if not vectorized:
        scalar = fn

        def fn(x, y, z):
            x, y, z = np.broadcast_arrays(x, y, z)
            lead = x.shape[:-1]
            flat = [a.reshape(-1, a.shape[-1]) for a in (x, y, z)]
            out = np.array([float(scalar(a, b, c)) for a, b, c in zip(*flat)], dtype=float)
            return out.reshape(lead)

    return SMetricSpec(name, "custom", (), fn)


def spec_from_name(text: str) -> SMetricSpec:
    """Resolve ``norm_sum(euclidean)``, ``metric_sum(taxicab)`` and friends."""
    text = text.strip().replace(" ", "")
    for prefix, maker in (("norm_sum", norm_sum), ("metric_sum", metric_sum)):
        if text == prefix:
            return maker()
        if text.startswith(prefix + "(") and text.endswith(")"):
            return maker(text[len(prefix) + 1 : -1])
    raise UsageError(f"unknown S-metric construction {text!r}")


def eval_s(spec: SMetricSpec, x, y, z) -> float:
    """Evaluate ``S(x, y, z)`` for three points of equal dimension."""
    x, y, z = as_point(x), as_point(y), as_point(z)
    _check_dims(x, y, z)
    value = float(spec.evaluate(x, y, z))
    if not math.isfinite(value):
        raise DomainError(f"{spec.name} returned a non-finite value")
    return value


# ---------------------------------------------------------------------------
# axioms


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str  # "nonnegativity" | "identity" | "triangle"
    index: int
    lhs: float
    rhs: float
    points: tuple


@dataclass(frozen=True)
class AxiomReport:
    spec_name: str
    n_checked: int
    violations: tuple
    worst_margin: float  # min over samples of rhs - lhs of the triangle-type inequality

    @property
    def passed(self) -> bool:
        return not self.violations


def random_quadruples(n: int, dim: int = 2, low: float = -10.0, high: float = 10.0, seed=None) -> np.ndarray:
    """Seeded uniform quadruples ``(x, y, z, a)``, shape ``(n, 4, dim)``."""
    return make_rng(seed).uniform(low, high, size=(n, 4, dim))


def check_axioms(spec: SMetricSpec, sample, tol: float = TOL, max_reported: int = 100) -> AxiomReport:
    """Check the three S-metric conditions on every quadruple ``(x, y, z, a)`` of ``sample``.

    Returns all violations (capped at ``max_reported``); an empty list means
    the sample is consistent with ``spec`` being an S-metric.
    """
    q = np.asarray(sample, dtype=float)
    if q.ndim == 2 and q.shape[0] == 4:
        q = q[None]
    if q.size == 0:
        raise UsageError("check_axioms needs at least one quadruple")
    if q.ndim != 3 or q.shape[1] != 4:
        raise DimensionError(f"sample must have shape (n, 4, dim), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DomainError("sample contains non-finite coordinates")
    x, y, z, a = (q[:, i, :] for i in range(4))

    sxyz = spec.evaluate(x, y, z)
    rhs = spec.evaluate(x, x, a) + spec.evaluate(y, y, a) + spec.evaluate(z, z, a)
    violations = []

    def report(axiom, idx, lhs, r):
        for i in np.flatnonzero(idx):
            if len(violations) >= max_reported:
                return
            violations.append(AxiomViolation(axiom, int(i), float(lhs[i]), float(r[i]), tuple(map(tuple, q[i]))))

    zeros = np.zeros_like(sxyz)
    report("nonnegativity", ~(sxyz >= 0.0), sxyz, zeros)

    all_equal = np.all(x == y, axis=-1) & np.all(y == z, axis=-1)
    report("identity", all_equal & (np.abs(sxyz) > tol), sxyz, zeros)
    report("identity", ~all_equal & ~(sxyz > 0.0), sxyz, zeros)
    for p in (x, y, z, a):
        sppp = spec.evaluate(p, p, p)
        report("identity", ~(np.abs(sppp) <= tol), sppp, zeros)

    report("triangle", ~(sxyz <= rhs + tol), sxyz, rhs)
    margin = float(np.min(rhs - sxyz))
    return AxiomReport(spec.name, len(q), tuple(violations), margin)


def symmetry_defect(spec: SMetricSpec, x, y) -> float:
    """``|S(x, x, y) - S(y, y, x)|``; at most 2e-9 for any S-metric."""
    x, y = as_point(x), as_point(y)
    _check_dims(x, y)
    return abs(float(spec.evaluate(x, x, y)) - float(spec.evaluate(y, y, x)))


def symmetry_defects(spec: SMetricSpec, xs, ys) -> np.ndarray:
    """Vectorised :func:`symmetry_defect` over paired rows."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    _check_dims(xs, ys)
    return np.abs(spec.evaluate(xs, xs, ys) - spec.evaluate(ys, ys, xs))


# ---------------------------------------------------------------------------
# balls


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise DomainError(f"ball radius must be finite and >= 0, got {self.radius}")

    def __str__(self):
        lb, rb = ("[", "]") if self.closed else ("(", ")")
        return f"B_S{lb}{fmt_point(self.center)}, {self.radius:.9g}{rb}"


def ball_contains(ball: Ball, spec: SMetricSpec, y) -> bool:
    """Open ball: ``S(y, y, c) < r``. Closed ball: ``S(y, y, c) <= r + 1e-9``."""
    y = as_point(y)
    _check_dims(y, ball.center)
    s = float(spec.self_distance(y, ball.center))
    return s <= ball.radius + TOL if ball.closed else s < ball.radius


# ---------------------------------------------------------------------------
# prefix verdicts


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Outcome of an ordinary (non-statistical) limit check on a prefix.

    ``per_eps`` holds ``(eps, last_index)`` pairs: the last index ``n <= n_max``
    at which the defining inequality was violated (0 if never). For Cauchy
    checks the index is the smaller index of the worst sampled pair and
    ``witness`` names that pair. For limit checks that do not hold,
    ``witness`` is the last index violating the coarsest tolerance.
    """

    verdict: Verdict
    n_max: int
    per_eps: tuple
    candidate: Optional[np.ndarray] = None
    r: float = 0.0
    witness: Optional[object] = None

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS


def _validate_eps(eps_schedule) -> tuple:
    eps = tuple(float(e) for e in eps_schedule)
    if not eps:
        raise UsageError("eps schedule is empty")
    if any(not (e > 0 and math.isfinite(e)) for e in eps):
        raise UsageError(f"eps schedule must be positive and finite: {eps}")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise UsageError(f"eps schedule must be strictly decreasing: {eps}")
    return eps


def tail_blocks(n_max: int) -> list:
    """Dyadic tail blocks ``(lo, hi]`` ending at ``n_max``, latest first."""
    blocks = []
    hi = n_max
    for _ in range(TAIL_BLOCKS):
        lo = hi // 2
        if lo >= hi:
            break
        blocks.append((lo, hi))
        hi = lo
    return blocks


def _decide_tail(last_bad: Sequence[int], recurs: bool, n_max: int) -> Verdict:
    if all(L <= n_max // 2 for L in last_bad):
        return Verdict.HOLDS
    return Verdict.FAILS if recurs else Verdict.INCONCLUSIVE


def _recurs(indices: np.ndarray, n_max: int) -> bool:
    """True if ``indices`` meets every dyadic tail block."""
    blocks = tail_blocks(n_max)
    if not blocks or indices.size == 0:
        return False
    return all(np.any((indices > lo) & (indices <= hi)) for lo, hi in blocks)


def _distance_prefix(spec, seq, center, n_max):
    from .sequences import distance_prefix

    return distance_prefix(spec, seq, center, n_max)


def _threshold_verdict(spec, seq, candidate, r, eps_schedule, n_max) -> ConvergenceVerdict:
    eps = _validate_eps(eps_schedule)
    candidate = as_point(candidate, seq.dim)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    d = _distance_prefix(spec, seq, candidate, n_max)
    idx = np.arange(1, n_max + 1)
    per_eps = []
    for e in eps:
        bad = idx[d >= r + e]
        per_eps.append((e, int(bad[-1]) if bad.size else 0))
    coarsest = idx[d >= r + max(eps)]
    verdict = _decide_tail([L for _, L in per_eps], _recurs(coarsest, n_max), n_max)
    witness = None
    if verdict is not Verdict.HOLDS and coarsest.size:
        witness = int(coarsest[-1])
    return ConvergenceVerdict(verdict, n_max, tuple(per_eps), candidate, float(r), witness)


def is_convergent_prefix(spec, seq, candidate, eps_schedule=DEFAULT_EPS, n_max: int = 10**6) -> ConvergenceVerdict:
    """Semi-decide ``x_n -> candidate`` from ``x_1..x_{n_max}``.

    Holds when, for every scheduled eps, the last index with
    ``S(x_n, x_n, candidate) >= eps`` lies in the first half of the prefix.
    Fails when exceedances of the largest eps occur in every one of the last
    four dyadic blocks of the prefix. Inconclusive otherwise.
    """
    return _threshold_verdict(spec, seq, candidate, 0.0, eps_schedule, n_max)


def rough_limit_check(spec, seq, candidate, r: float, eps_schedule=DEFAULT_EPS, n_max: int = 10**6) -> ConvergenceVerdict:
    """Rough convergence of degree ``r``: eventually ``S(x_n, x_n, candidate) < r + eps``.

    Same decision rule as :func:`is_convergent_prefix` with thresholds ``r + eps``;
    ``r = 0`` gives identical verdicts.
    """
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError(f"roughness degree must be >= 0, got {r}")
    return _threshold_verdict(spec, seq, candidate, float(r), eps_schedule, n_max)


def tail_pivots(n_max: int) -> tuple:
    """Pivot indices from the second half of the prefix, paired with every index."""
    cands = {n_max, n_max - 1, (3 * n_max + 3) // 4, n_max // 2 + 1}
    return tuple(sorted(p for p in cands if n_max // 2 < p <= n_max))


def _sampled_pairs(n_max: int, rng, pivots) -> tuple:
    """Index pairs (1-based) examined by the Cauchy and boundedness checks.

    All pairs within the last ``CAUCHY_WINDOW`` indices, ``CAUCHY_RANDOM_PAIRS``
    uniform long-range pairs, and every index paired with each pivot.
    """
    w = min(CAUCHY_WINDOW, n_max)
    win = np.arange(n_max - w + 1, n_max + 1)
    iu, ju = np.triu_indices(w, k=1)
    parts_i, parts_j = [win[iu]], [win[ju]]
    if n_max > 1:
        ri = rng.integers(1, n_max + 1, size=CAUCHY_RANDOM_PAIRS)
        rj = rng.integers(1, n_max + 1, size=CAUCHY_RANDOM_PAIRS)
        keep = ri != rj
        parts_i.append(ri[keep])
        parts_j.append(rj[keep])
    allidx = np.arange(1, n_max + 1)
    for p in pivots:
        parts_i.append(allidx)
        parts_j.append(np.full(n_max, p))
    return np.concatenate(parts_i), np.concatenate(parts_j)


def _pair_values(spec, seq, n_max, rng, pivots):
    xs = seq.prefix(n_max)
    i, j = _sampled_pairs(n_max, rng, pivots)
    s = np.empty(i.size)
    chunk = 1 << 20
    for start in range(0, i.size, chunk):
        a, b = i[start : start + chunk] - 1, j[start : start + chunk] - 1
        s[start : start + chunk] = spec.self_distance(xs[a], xs[b])
    return i, j, s


def is_cauchy_prefix(spec, seq, eps_schedule=DEFAULT_EPS, n_max: int = 10**6, seed=None) -> ConvergenceVerdict:
    """Semi-decide the Cauchy property from a sampled pair grid.

    A sampled pair (n, m) with ``S(x_n, x_n, x_m) >= eps`` forbids every cutoff
    ``k <= min(n, m)``. Holds when for every eps the worst such ``min(n, m)``
    lies in the first half of the prefix; Fails when bad pairs at the largest
    eps reach into every dyadic tail block.
    """
    eps = _validate_eps(eps_schedule)
    i, j, s = _pair_values(spec, seq, n_max, make_rng(seed), tail_pivots(n_max))
    lo = np.minimum(i, j)
    per_eps, witness = [], None
    for e in eps:
        bad = s >= e
        if np.any(bad):
            k = int(np.argmax(np.where(bad, lo, 0)))
            per_eps.append((e, int(lo[k])))
            if witness is None:
                witness = (int(i[k]), int(j[k]))
        else:
            per_eps.append((e, 0))
    coarsest = lo[s >= max(eps)]
    verdict = _decide_tail([L for _, L in per_eps], _recurs(coarsest, n_max), n_max)
    return ConvergenceVerdict(verdict, n_max, tuple(per_eps), None, 0.0, witness)


@dataclass(frozen=True)
class BoundednessVerdict:
    """Outcome of :func:`is_s_bounded_prefix`.

    ``running_max`` lists ``(n, max S over sampled pairs with both indices <= n)``.
    """

    bounded: bool
    radius: Optional[float]
    witness: Optional[tuple]
    running_max: tuple

    @property
    def verdict(self) -> Verdict:
        return Verdict.HOLDS if self.bounded else Verdict.FAILS


def is_s_bounded_prefix(spec, seq, n_max: int = 10**6, seed=None) -> BoundednessVerdict:
    """Decide S-boundedness of ``{x_1..x_{n_max}}`` by the growth of the sampled pair maximum.

    The running maximum is evaluated at ``n_max / 16, n_max / 8, ..., n_max``.
    Bounded when it grows by less than 1% over those four doublings; the
    radius is the final maximum plus a small margin, since S-boundedness uses
    a strict inequality.
    """
    sched = sorted({max(1, n_max >> k) for k in range(TAIL_BLOCKS, -1, -1)})
    pivots = tuple(sorted({1, *sched}))
    i, j, s = _pair_values(spec, seq, n_max, make_rng(seed), pivots)
    hi = np.maximum(i, j)
    running = []
    for n in sched:
        sel = hi <= n
        running.append((n, float(np.max(s[sel])) if np.any(sel) else 0.0))
    first, last = running[0][1], running[-1][1]
    k = int(np.argmax(s))
    witness = (int(i[k]), int(j[k]))
    if last <= first * (1 + BOUNDED_GROWTH_TOL) + TOL:
        radius = last * (1 + 1e-6) + TOL
        return BoundednessVerdict(True, radius, witness, tuple(running))
    return BoundednessVerdict(False, None, witness, tuple(running))
