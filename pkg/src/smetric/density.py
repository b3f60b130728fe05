"""Subsets of the naturals and their natural density.

The natural density of ``B`` is ``lim |B ∩ [1, n]| / n`` when the limit
exists. Structured sets (finite sets, residue classes, images of ``k -> k^d``
and boolean combinations of these) get an exact density; anything else is
estimated from prefix counts along an ``n`` schedule.

Index sets have a canonical text form, e.g. ``squares``, ``residue(4,1)``,
``finite(1,2,3)``, ``union(squares, residue(2,0))``.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UsageError

DEFAULT_N_SCHEDULE = (1_000, 10_000, 100_000, 1_000_000)
MAX_EXACT_PERIOD = 10**7

# prefix-estimate decision thresholds
ZERO_FACTOR = 1e-2
ZERO_DROP = 0.5
ZERO_STEP = 0.9
STABLE_ABS = 1e-3
STABLE_REL = 0.1


def _int_root(n: int, d: int) -> int:
    """Largest ``k`` with ``k**d <= n``."""
    if n < 1:
        return 0
    if d == 2:
        return math.isqrt(n)
    k = int(round(n ** (1.0 / d)))
    while k**d > n:
        k -= 1
    while (k + 1) ** d <= n:
        k += 1
    return k


def int_root_array(idx: np.ndarray, d: int) -> np.ndarray:
    """Vectorised :func:`_int_root` for positive int64 arrays."""
    idx = np.asarray(idx, dtype=np.int64)
    k = np.floor(np.power(idx.astype(float), 1.0 / d)).astype(np.int64)
    for _ in range(3):
        k = np.where(k**d > idx, k - 1, k)
        k = np.where((k + 1) ** d <= idx, k + 1, k)
    return k


class IndexSet:
    """Base class. Subclasses implement ``contains``, ``mask`` and ``__str__``."""

    def contains(self, n: int) -> bool:
        raise NotImplementedError

    def mask(self, n: int) -> np.ndarray:
        """Boolean membership of ``1..n`` as an array of length ``n``."""
        raise NotImplementedError

    def count(self, n: int) -> int:
        return int(np.count_nonzero(self.mask(n))) if n >= 1 else 0

    def counts(self, ns) -> list:
        ns = [int(n) for n in ns]
        if type(self).count is not IndexSet.count:
            return [self.count(n) for n in ns]
        top = max(ns)
        c = np.cumsum(self.mask(top))
        return [int(c[n - 1]) if n >= 1 else 0 for n in ns]

    def members(self, n: int) -> np.ndarray:
        """Members of the set in ``[1, n]``, increasing."""
        return np.flatnonzero(self.mask(n)) + 1

    def first(self, k: int, hint_density: float = 0.5) -> np.ndarray:
        """The ``k`` smallest members. Raises if they are not found below ``100 * k / hint``."""
        n = max(16, int(k / max(hint_density, 1e-6) * 1.1) + 16)
        limit = 100 * n
        while True:
            m = self.members(n)
            if m.size >= k:
                return m[:k]
            if n >= limit:
                raise UsageError(f"{self} has fewer than {k} members below {n}")
            n *= 2

    def __contains__(self, n) -> bool:
        return membership(self, n)


@dataclass(frozen=True)
class Finite(IndexSet):
    values: tuple = ()

    def __post_init__(self):
        vals = tuple(sorted({int(v) for v in self.values}))
        if vals and vals[0] < 1:
            raise UsageError("index sets live in {1, 2, ...}")
        object.__setattr__(self, "values", vals)

    def contains(self, n):
        i = bisect.bisect_left(self.values, n)
        return i < len(self.values) and self.values[i] == n

    def count(self, n):
        return bisect.bisect_right(self.values, n)

    def mask(self, n):
        m = np.zeros(max(n, 0), dtype=bool)
        v = np.array([x for x in self.values if x <= n], dtype=np.int64)
        m[v - 1] = True
        return m

    def __str__(self):
        return "finite(" + ",".join(map(str, self.values)) + ")"


@dataclass(frozen=True)
class Explicit(IndexSet):
    """A set known only through its members up to ``horizon``.

    No exact density is ever claimed; estimates are prefix-based and the
    schedule must not pass the horizon.
    """

    values: tuple = ()
    horizon: Optional[int] = None

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise UsageError("explicit index lists must be strictly increasing")
        if vals and vals[0] < 1:
            raise UsageError("index sets live in {1, 2, ...}")
        object.__setattr__(self, "values", vals)
        if self.horizon is None:
            object.__setattr__(self, "horizon", vals[-1] if vals else 0)

    def contains(self, n):
        i = bisect.bisect_left(self.values, n)
        return i < len(self.values) and self.values[i] == n

    def count(self, n):
        return bisect.bisect_right(self.values, n)

    def mask(self, n):
        m = np.zeros(max(n, 0), dtype=bool)
        v = np.asarray(self.values[: self.count(n)], dtype=np.int64)
        m[v - 1] = True
        return m

    def __str__(self):
        return "explicit(" + ",".join(map(str, self.values)) + ")"


@dataclass(frozen=True)
class Residue(IndexSet):
    """``{n : n ≡ a (mod m)}``."""

    m: int
    a: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise UsageError(f"residue modulus must be >= 1, got {self.m}")
        object.__setattr__(self, "a", self.a % self.m)

    def contains(self, n):
        return n % self.m == self.a

    def count(self, n):
        if n < 1:
            return 0
        if self.a == 0:
            return n // self.m
        return 0 if n < self.a else (n - self.a) // self.m + 1

    def mask(self, n):
        return np.arange(1, n + 1) % self.m == self.a

    def __str__(self):
        return f"residue({self.m},{self.a})"


@dataclass(frozen=True)
class PolynomialImage(IndexSet):
    """``{k^degree : k >= 1}``; density 0 for ``degree >= 2``."""

    degree: int = 2

    def __post_init__(self):
        if self.degree < 2:
            raise UsageError("PolynomialImage needs degree >= 2")

    def contains(self, n):
        return n >= 1 and _int_root(n, self.degree) ** self.degree == n

    def count(self, n):
        return _int_root(n, self.degree)

    def mask(self, n):
        m = np.zeros(max(n, 0), dtype=bool)
        k = np.arange(1, _int_root(n, self.degree) + 1, dtype=np.int64)
        m[k**self.degree - 1] = True
        return m

    def __str__(self):
        return {2: "squares", 3: "cubes"}.get(self.degree, f"power({self.degree})")


@dataclass(frozen=True)
class Complement(IndexSet):
    inner: IndexSet

    def contains(self, n):
        return not self.inner.contains(n)

    def count(self, n):
        return max(n, 0) - self.inner.count(n)

    def counts(self, ns):
        return [max(int(n), 0) - c for n, c in zip(ns, self.inner.counts(ns))]

    def mask(self, n):
        return ~self.inner.mask(n)

    def __str__(self):
        return f"complement({self.inner})"


@dataclass(frozen=True)
class Union(IndexSet):
    left: IndexSet
    right: IndexSet

    def contains(self, n):
        return self.left.contains(n) or self.right.contains(n)

    def mask(self, n):
        return self.left.mask(n) | self.right.mask(n)

    def __str__(self):
        return f"union({self.left}, {self.right})"


@dataclass(frozen=True)
class Intersection(IndexSet):
    left: IndexSet
    right: IndexSet

    def contains(self, n):
        return self.left.contains(n) and self.right.contains(n)

    def mask(self, n):
        return self.left.mask(n) & self.right.mask(n)

    def __str__(self):
        return f"intersection({self.left}, {self.right})"


SQUARES = PolynomialImage(2)
NON_SQUARES = Complement(SQUARES)


# ---------------------------------------------------------------------------
# exact densities


def _periodic_core(s: IndexSet):
    """A periodic set differing from ``s`` on a density-zero set, with its period.

    Returns ``None`` when ``s`` is not a boolean combination of residue
    classes and density-zero sets.
    """
    if isinstance(s, Residue):
        return s, s.m
    if isinstance(s, (Finite, PolynomialImage)):
        return Finite(()), 1
    if isinstance(s, Complement):
        core = _periodic_core(s.inner)
        return None if core is None else (Complement(core[0]), core[1])
    if isinstance(s, (Union, Intersection)):
        a, b = _periodic_core(s.left), _periodic_core(s.right)
        if a is None or b is None:
            return None
        return type(s)(a[0], b[0]), math.lcm(a[1], b[1])
    return None


def exact_density(s: IndexSet) -> Optional[float]:
    """Exact natural density when the structure of ``s`` determines it, else ``None``."""
    core = _periodic_core(s)
    if core is not None:
        periodic, period = core
        if period <= MAX_EXACT_PERIOD:
            return periodic.count(period) / period
    if isinstance(s, Complement):
        d = exact_density(s.inner)
        return None if d is None else 1.0 - d
    if isinstance(s, (Union, Intersection)):
        da, db = exact_density(s.left), exact_density(s.right)
        union = isinstance(s, Union)
        for d1, d2 in ((da, db), (db, da)):
            if d1 == 0.0:
                return d2 if union else 0.0
            if d1 == 1.0:
                return 1.0 if union else d2
    return None


# ---------------------------------------------------------------------------
# estimates


class DensityVerdict(str, enum.Enum):
    ZERO = "zero"
    POSITIVE = "positive"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DensityEstimate:
    """Exact or prefix-estimated natural density.

    ``prefix_counts`` holds ``(n, |B ∩ [1, n]|)`` along the schedule and
    ``trend`` the tail-block ratios ``|B ∩ (n/2, n]| / (n - n/2)`` the prefix
    verdict is decided on. ``basis`` records how the verdict was reached:
    ``"exact"``, ``"prefix"``, ``"subset"`` (contained in an exact-zero set)
    or ``"bound"`` (combined from other estimates).
    """

    verdict: DensityVerdict
    value: Optional[float] = None
    exact: Optional[float] = None
    prefix_counts: tuple = ()
    trend: tuple = ()
    basis: str = "prefix"
    lower: Optional[float] = None
    upper: Optional[float] = None

    @property
    def ratios(self) -> tuple:
        return tuple(c / n for n, c in self.prefix_counts)

    @property
    def is_zero(self) -> bool:
        return self.verdict is DensityVerdict.ZERO

    @property
    def is_positive(self) -> bool:
        return self.verdict is DensityVerdict.POSITIVE

    def describe(self) -> str:
        if self.verdict is DensityVerdict.POSITIVE and self.value is not None:
            return f"positive({self.value:.9g};{self.basis})"
        return f"{self.verdict.value}({self.basis})"


def validate_schedule(n_schedule) -> tuple:
    ns = tuple(int(n) for n in n_schedule)
    if len(ns) < 2:
        raise UsageError(f"n schedule needs at least two points, got {ns}")
    if ns[0] < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise UsageError(f"n schedule must be strictly increasing and start at >= 2: {ns}")
    if ns[-1] < 1000:
        raise UsageError(f"n schedule must reach at least 1000, got {ns[-1]}")
    return ns


def prefix_verdicts(trends) -> np.ndarray:
    """Row-wise prefix decision for a ``(k, m)`` array of tail-block ratios.

    Returns codes ``0`` (Zero), ``1`` (Positive) and ``2`` (Inconclusive).
    Zero: the last block ratio is 0, or it is below ``1e-2 * (first + 1)``,
    at most ``0.9`` times the previous ratio, and the ratios have decayed
    (non-increasing overall, or the last is at most half of the largest
    seen). Positive: the last two ratios agree
    within ``max(1e-3, 10% of the last)`` around a value above that
    tolerance.
    """
    t = np.atleast_2d(np.asarray(trends, float))
    first, prev, last = t[:, 0], t[:, -2], t[:, -1]
    nonincreasing = np.all(t[:, 1:] <= t[:, :-1], axis=1) & (last < first)
    decayed = nonincreasing | (last <= ZERO_DROP * t.max(axis=1))
    falling = last <= ZERO_STEP * prev
    zero = (last == 0.0) | ((last < ZERO_FACTOR * (first + 1.0)) & falling & decayed)
    tol = np.maximum(STABLE_ABS, STABLE_REL * last)
    positive = ~zero & (last > STABLE_ABS) & (np.abs(last - prev) <= tol)
    return np.where(zero, 0, np.where(positive, 1, 2))


_CODES = (DensityVerdict.ZERO, DensityVerdict.POSITIVE, DensityVerdict.INCONCLUSIVE)


def prefix_verdict(trend) -> tuple:
    """Zero / Positive / Inconclusive from one row of tail-block ratios (see :func:`prefix_verdicts`).

    Returns ``(verdict, value)``; ``value`` is the last ratio for Positive.
    """
    t = tuple(float(x) for x in trend)
    v = _CODES[int(prefix_verdicts([t])[0])]
    return v, (t[-1] if v is DensityVerdict.POSITIVE else None)


def _counts_with_halves(s: IndexSet, ns) -> tuple:
    halves = [n // 2 for n in ns]
    allc = s.counts(list(ns) + halves)
    return allc[: len(ns)], allc[len(ns) :]


def natural_density(s: IndexSet, n_schedule=DEFAULT_N_SCHEDULE) -> DensityEstimate:
    """Exact density when available, otherwise a prefix estimate along ``n_schedule``."""
    ns = validate_schedule(n_schedule)
    if isinstance(s, Explicit) and ns[-1] > s.horizon:
        raise UsageError(f"schedule reaches {ns[-1]} but {s} is only known up to {s.horizon}")
    full, half = _counts_with_halves(s, ns)
    prefix_counts = tuple(zip(ns, full))
    trend = tuple((c - h) / (n - n // 2) for n, c, h in zip(ns, full, half))
    exact = exact_density(s)
    if exact is not None:
        verdict = DensityVerdict.ZERO if exact == 0.0 else DensityVerdict.POSITIVE
        return DensityEstimate(verdict, exact if exact > 0 else None, exact, prefix_counts, trend, "exact", exact, exact)
    verdict, value = prefix_verdict(trend)
    return DensityEstimate(verdict, value, None, prefix_counts, trend, "prefix")


def union_density_bound(a: DensityEstimate, b: DensityEstimate) -> DensityEstimate:
    """Density information about ``A ∪ B`` from estimates of ``A`` and ``B``.

    Subadditivity: two Zero verdicts give Zero. Two exact values give the
    bounds ``max(a, b) <= δ(A ∪ B) <= min(1, a + b)``. Anything else is
    Inconclusive.
    """
    if a.is_zero and b.is_zero:
        return DensityEstimate(DensityVerdict.ZERO, basis="bound", lower=0.0, upper=0.0)
    if a.exact is not None and b.exact is not None:
        lower, upper = max(a.exact, b.exact), min(1.0, a.exact + b.exact)
        exact = upper if lower == upper else None
        if upper == 0.0:
            return DensityEstimate(DensityVerdict.ZERO, None, 0.0, basis="bound", lower=0.0, upper=0.0)
        return DensityEstimate(DensityVerdict.POSITIVE, lower, exact, basis="bound", lower=lower, upper=upper)
    return DensityEstimate(DensityVerdict.INCONCLUSIVE, basis="bound")


def membership(s: IndexSet, n: int) -> bool:
    n = int(n)
    if n < 1:
        raise UsageError(f"membership is defined for n >= 1, got {n}")
    return bool(s.contains(n))


def prefix_count(s: IndexSet, n: int) -> int:
    """``|s ∩ [1, n]|``."""
    n = int(n)
    if n < 1:
        raise UsageError(f"prefix_count is defined for n >= 1, got {n}")
    return int(s.count(n))


# ---------------------------------------------------------------------------
# text form


def split_top(text: str, sep: str) -> list:
    """Split ``text`` on ``sep`` outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise UsageError(f"unbalanced parentheses in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise UsageError(f"unbalanced parentheses in {text!r}")
    parts.append("".join(cur).strip())
    return parts


def call_parts(text: str) -> tuple:
    """``name(args)`` -> ``(name, args)``; bare ``name`` -> ``(name, None)``."""
    text = text.strip()
    if "(" not in text:
        return text, None
    if not text.endswith(")"):
        raise UsageError(f"malformed expression {text!r}")
    i = text.index("(")
    return text[:i].strip(), text[i + 1 : -1]


def _ints(args: str) -> list:
    if args is None or not args.strip():
        return []
    try:
        return [int(a) for a in split_top(args, ",")]
    except ValueError as exc:
        raise UsageError(f"expected integers, got {args!r}") from exc


def parse_index_set(text: str) -> IndexSet:
    """Parse the canonical text form of an index set."""
    name, args = call_parts(text)
    name = name.lower()
    if name == "squares" and args is None:
        return SQUARES
    if name == "cubes" and args is None:
        return PolynomialImage(3)
    if name in ("nonsquares", "non_squares") and args is None:
        return NON_SQUARES
    if name == "power":
        vals = _ints(args)
        if len(vals) != 1:
            raise UsageError(f"power takes one degree, got {text!r}")
        return PolynomialImage(vals[0])
    if name == "residue":
        vals = _ints(args)
        if len(vals) != 2:
            raise UsageError(f"residue takes (m,a), got {text!r}")
        return Residue(*vals)
    if name == "finite":
        return Finite(tuple(_ints(args)))
    if name == "explicit":
        return Explicit(tuple(_ints(args)))
    if name == "complement":
        return Complement(parse_index_set(args))
    if name in ("union", "intersection"):
        parts = split_top(args or "", ",")
        if len(parts) < 2:
            raise UsageError(f"{name} needs at least two operands: {text!r}")
        cls = Union if name == "union" else Intersection
        out = parse_index_set(parts[0])
        for p in parts[1:]:
            out = cls(out, parse_index_set(p))
        return out
    raise UsageError(f"unknown index set {text!r}")
