"""Lazy point sequences ``n -> x_n`` in R^d.

A :class:`SequenceFamily` is a deterministic vectorised rule evaluated on
demand; prefixes are recomputed rather than stored. Families may carry
:class:`FamilyStructure` metadata (a spike index set and the finitely many
values taken off it) which the statistical checks use to prove density-zero
exceedance sets exactly.

Families are nameable by expressions::

    example3_1
    example4_1
    constant(2,3)
    reciprocal(0,0; 1,0)
    linear(1,0)
    periodic(0,0; 9,9)
    spike_on(squares; 9,9; 0,0)
    perturb(example3_1; 1/n)
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import SMetricSpec, as_point, fmt_point
from .density import (
    SQUARES,
    Finite,
    IndexSet,
    call_parts,
    exact_density,
    int_root_array,
    parse_index_set,
    split_top,
)
from .errors import DomainError, UsageError


@dataclass(frozen=True)
class FamilyStructure:
    """Known structure of a family.

    Off ``spike_set`` every term is one of ``base_values``. ``known_st_limit``
    is a statistical limit certified by construction.
    """

    spike_set: Optional[IndexSet] = None
    base_values: tuple = ()
    known_st_limit: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class SequenceFamily:
    """A rule ``n -> x_n`` for ``n >= 1``.

    ``rule`` maps an int64 index array of shape ``(k,)`` to points of shape
    ``(k, dim)``.
    """

    name: str
    dim: int
    rule: Callable = field(repr=False)
    structure: Optional[FamilyStructure] = None

    def points(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if idx.size and idx.min() < 1:
            raise UsageError("sequence indices start at 1")
        out = np.asarray(self.rule(idx), dtype=float).reshape(idx.size, self.dim)
        return out

    def prefix(self, n: int) -> np.ndarray:
        """``x_1 .. x_n`` as an ``(n, dim)`` array."""
        return self.points(np.arange(1, int(n) + 1, dtype=np.int64))

    def __call__(self, n: int) -> np.ndarray:
        p = self.points([n])[0]
        p.setflags(write=False)
        return p

    def __str__(self):
        return self.name


def _pt(x, dim=None):
    return tuple(float(c) for c in as_point(x, dim))


# ---------------------------------------------------------------------------
# built-in families


def paper_example_3_1() -> SequenceFamily:
    """``x_n = (k, k)`` if ``n = k^2``, else ``(0, 0)``; statistically convergent to the origin."""

    def rule(idx):
        k = int_root_array(idx, 2)
        out = np.zeros((idx.size, 2))
        sq = k * k == idx
        out[sq] = k[sq, None]
        return out

    structure = FamilyStructure(SQUARES, ((0.0, 0.0),), (0.0, 0.0))
    return SequenceFamily("example3_1", 2, rule, structure)


def paper_example_4_1() -> SequenceFamily:
    """``(p, p)`` if ``n = p^2``; otherwise ``(0, 0)`` for even and ``(1, 1)`` for odd ``n``.

    The square branch wins when ``n`` is also even or odd.
    """

    def rule(idx):
        k = int_root_array(idx, 2)
        out = np.where((idx % 2 == 1)[:, None], 1.0, 0.0) * np.ones((1, 2))
        sq = k * k == idx
        out[sq] = k[sq, None]
        return out

    structure = FamilyStructure(SQUARES, ((0.0, 0.0), (1.0, 1.0)), None)
    return SequenceFamily("example4_1", 2, rule, structure)


def constant(c) -> SequenceFamily:
    c = _pt(c)
    arr = np.array(c)

    def rule(idx):
        return np.broadcast_to(arr, (idx.size, arr.size)).copy()

    return SequenceFamily(f"constant{_expr_point(c)}", len(c), rule, FamilyStructure(Finite(()), (c,), c))


def reciprocal(c, direction) -> SequenceFamily:
    """``x_n = c + direction / n``."""
    c, v = _pt(c), _pt(direction)
    if len(c) != len(v):
        raise UsageError("reciprocal: centre and direction differ in dimension")
    ca, va = np.array(c), np.array(v)

    def rule(idx):
        return ca + va / idx[:, None]

    return SequenceFamily(f"reciprocal({_coords(c)}; {_coords(v)})", len(c), rule, FamilyStructure(None, (), c))


def linear(direction) -> SequenceFamily:
    """``x_n = n * direction``; unbounded for a nonzero direction."""
    v = _pt(direction)
    va = np.array(v)

    def rule(idx):
        return idx[:, None] * va

    return SequenceFamily(f"linear({_coords(v)})", len(v), rule)


def periodic(values) -> SequenceFamily:
    """``x_n = values[(n - 1) mod p]``."""
    vals = tuple(_pt(v) for v in values)
    if not vals:
        raise UsageError("periodic needs at least one value")
    dim = len(vals[0])
    if any(len(v) != dim for v in vals):
        raise UsageError("periodic values differ in dimension")
    arr = np.array(vals)
    limit = vals[0] if all(v == vals[0] for v in vals) else None
    structure = FamilyStructure(Finite(()), tuple(dict.fromkeys(vals)), limit)

    def rule(idx):
        return arr[(idx - 1) % len(vals)]

    name = "periodic(" + "; ".join(_coords(v) for v in vals) + ")"
    return SequenceFamily(name, dim, rule, structure)


def spike_on(index_set: IndexSet, spike, base) -> SequenceFamily:
    """``spike`` on ``index_set``, ``base`` elsewhere.

    ``spike`` is a point or a vectorised rule ``idx -> points``.
    """
    base = _pt(base)
    dim = len(base)
    if callable(spike):
        spike_rule, spike_txt = spike, getattr(spike, "__name__", "rule")
    else:
        sp = np.array(_pt(spike, dim))
        spike_rule, spike_txt = (lambda idx: np.broadcast_to(sp, (idx.size, dim))), _coords(tuple(sp))
    barr = np.array(base)

    def rule(idx):
        out = np.broadcast_to(barr, (idx.size, dim)).copy()
        hit = np.fromiter((index_set.contains(int(i)) for i in idx), bool, idx.size) if idx.size < 64 else index_set.mask(int(idx.max()))[idx - 1]
        if np.any(hit):
            out[hit] = np.asarray(spike_rule(idx[hit]), float).reshape(-1, dim)
        return out

    limit = base if exact_density(index_set) == 0.0 else None
    name = f"spike_on({index_set}; {spike_txt}; {_coords(base)})"
    return SequenceFamily(name, dim, rule, FamilyStructure(index_set, (base,), limit))


DECAYS = {
    "1/n": lambda n: 1.0 / n,
    "1/n^2": lambda n: 1.0 / (n.astype(float) ** 2),
    "2^-n": lambda n: np.exp2(-n.astype(float)),
}


def perturbed(family: SequenceFamily, decay: str = "1/n") -> SequenceFamily:
    """``eta_n = xi_n + decay(n) * e_1`` for a registered vanishing decay.

    Under a norm-sum S-metric ``S(xi_n, xi_n, eta_n) = 2 * decay(n)`` (up to the
    norm of ``e_1``), which tends to 0.
    """
    if decay not in DECAYS:
        raise UsageError(f"unknown decay {decay!r}; expected one of {sorted(DECAYS)}")
    f = DECAYS[decay]
    unit = np.zeros(family.dim)
    unit[0] = 1.0

    def rule(idx):
        return family.points(idx) + f(idx)[:, None] * unit

    limit = family.structure.known_st_limit if family.structure else None
    structure = FamilyStructure(None, (), limit) if limit is not None else None
    return SequenceFamily(f"perturb({family.name}; {decay})", family.dim, rule, structure)


def subsequence(family: SequenceFamily, index_set: IndexSet, hint_density: float = 1.0) -> SequenceFamily:
    """``p -> x_{n_p}`` where ``n_1 < n_2 < ...`` enumerates ``index_set``."""
    lock = threading.Lock()
    cache = {"enum": np.empty(0, dtype=np.int64)}

    def rule(idx):
        need = int(idx.max()) if idx.size else 0
        with lock:
            enum = cache["enum"]
            if enum.size < need:
                enum = index_set.first(max(need, 2 * enum.size), hint_density)
                cache["enum"] = enum
        return family.points(enum[idx - 1])

    return SequenceFamily(f"subseq({family.name}; {index_set})", family.dim, rule)


def from_rule(name: str, dim: int, fn: Callable, vectorized: bool = True, structure=None) -> SequenceFamily:
    """Wrap an arbitrary rule. Non-vectorised rules ``n -> point`` are looped."""
    if vectorized:
        return SequenceFamily(name, dim, fn, structure)

    def rule(idx):
        return np.array([as_point(fn(int(i)), dim) for i in idx]).reshape(idx.size, dim)

    return SequenceFamily(name, dim, rule, structure)


def from_array(name: str, values) -> SequenceFamily:
    """A finite prefix given as data. Indices beyond the data are rejected."""
    arr = np.asarray(values, float)
    if arr.ndim != 2:
        raise UsageError("from_array expects an (n, dim) array")

    def rule(idx):
        if idx.size and idx.max() > arr.shape[0]:
            raise UsageError(f"{name} is only defined up to n={arr.shape[0]}")
        return arr[idx - 1]

    return SequenceFamily(name, arr.shape[1], rule)


PARAMETRIC_KINDS = ("constant", "reciprocal", "spike_on", "periodic", "perturbed", "linear")


def parametric_family(kind: str, **params) -> SequenceFamily:
    """Dispatch on ``kind`` to the parametric constructors above."""
    makers = {
        "constant": constant,
        "reciprocal": reciprocal,
        "spike_on": spike_on,
        "periodic": periodic,
        "perturbed": perturbed,
        "perturb": perturbed,
        "linear": linear,
    }
    if kind not in makers:
        raise UsageError(f"unknown family kind {kind!r}; expected one of {PARAMETRIC_KINDS}")
    try:
        return makers[kind](**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {kind}: {exc}") from exc


# ---------------------------------------------------------------------------
# exceedance sets and cached distances


class _DistanceCache:
    """Keeps the longest computed ``S(x_n, x_n, c)`` prefix per (spec, family, centre)."""

    def __init__(self, maxsize=24):
        self.maxsize = maxsize
        self.data = OrderedDict()
        self.lock = threading.Lock()

    def get(self, spec, seq, center, n):
        key = (spec, id(spec.fn), seq, center.tobytes())
        with self.lock:
            hit = self.data.get(key)
            if hit is not None and hit.size >= n:
                self.data.move_to_end(key)
                return hit[:n]
        d = np.asarray(spec.to_center(seq.prefix(n), center), float)
        d.setflags(write=False)
        with self.lock:
            self.data[key] = d
            self.data.move_to_end(key)
            while len(self.data) > self.maxsize:
                self.data.popitem(last=False)
        return d

    def clear(self):
        with self.lock:
            self.data.clear()


_DISTANCES = _DistanceCache()


def distance_prefix(spec: SMetricSpec, seq: SequenceFamily, center, n: int) -> np.ndarray:
    """``S(x_k, x_k, center)`` for ``k = 1..n`` (read-only array)."""
    center = as_point(center, seq.dim)
    return _DISTANCES.get(spec, seq, center, int(n))


@dataclass(frozen=True, eq=False)
class ThresholdExceedance(IndexSet):
    """``{n : S(x_n, x_n, center) >= threshold}``, evaluated lazily.

    Never given an exact density: it always goes through prefix estimation.
    """

    spec: SMetricSpec
    seq: SequenceFamily
    center: np.ndarray
    threshold: float

    def contains(self, n):
        return bool(self.spec.to_center(self.seq.points([n]), self.center)[0] >= self.threshold)

    def mask(self, n):
        return distance_prefix(self.spec, self.seq, self.center, n) >= self.threshold

    def __str__(self):
        return f"exceed({self.seq.name}; {fmt_point(self.center)}; {self.threshold:.9g})"


def exceedance_set(spec: SMetricSpec, seq: SequenceFamily, candidate, threshold: float) -> ThresholdExceedance:
    """The deferred index set ``{n : S(x_n, x_n, candidate) >= threshold}``."""
    if not threshold > 0:
        raise DomainError(f"threshold must be > 0, got {threshold}")
    return ThresholdExceedance(spec, seq, as_point(candidate, seq.dim), float(threshold))


# ---------------------------------------------------------------------------
# expressions


def _coords(p) -> str:
    return ",".join(f"{c:g}" for c in p)


def _expr_point(p) -> str:
    return "(" + _coords(p) + ")"


def parse_point(text: str) -> tuple:
    text = text.strip().strip("()")
    try:
        return tuple(float(c) for c in text.split(","))
    except ValueError as exc:
        raise UsageError(f"malformed point {text!r}") from exc


BUILTINS = {"example3_1": paper_example_3_1, "example4_1": paper_example_4_1}


def parse_family(text: str) -> SequenceFamily:
    """Build a family from its expression (see module docstring)."""
    name, args = call_parts(text)
    name = name.lower()
    if args is None:
        if name in BUILTINS:
            return BUILTINS[name]()
        raise UsageError(f"unknown sequence {text!r}")
    parts = split_top(args, ";")
    if name == "constant":
        return constant(parse_point(args))
    if name == "linear":
        return linear(parse_point(args))
    if name == "reciprocal" and len(parts) == 2:
        return reciprocal(parse_point(parts[0]), parse_point(parts[1]))
    if name == "periodic":
        return periodic([parse_point(p) for p in parts])
    if name == "spike_on" and len(parts) == 3:
        return spike_on(parse_index_set(parts[0]), parse_point(parts[1]), parse_point(parts[2]))
    if name in ("perturb", "perturbed") and len(parts) == 2:
        return perturbed(parse_family(parts[0]), parts[1].replace(" ", ""))
    raise UsageError(f"unknown or malformed sequence {text!r}")
