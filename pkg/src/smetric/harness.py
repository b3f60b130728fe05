"""Experiment configs, analysis dispatch and report assembly.

A config is flat ``key = value`` text under section headers::

    [space]
    spec = norm_sum(euclidean)

    [sequence]
    expr = example3_1

    [analysis st_converges]
    candidates = (0,0); (1,1)
    eps = 1, 0.1, 0.01, 0.001
    n = 1000, 10000, 100000, 1000000

    [output]
    path = report.csv
    format = csv

``[analysis KIND]`` may repeat. ``[limitset]`` configures the grid search of
the ``limitset`` command (``r``, ``region = lo1,lo2 : hi1,hi2``, ``step``).
Lines starting with ``#`` or ``;`` are comments. Every parse or resolution
error names the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import sequences as sq
from .core import (
    DEFAULT_EPS,
    Verdict,
    is_cauchy_prefix,
    is_convergent_prefix,
    is_s_bounded_prefix,
    rough_limit_check,
    spec_from_name,
)
from .density import DEFAULT_N_SCHEDULE, split_top
from .errors import ConfigError, SMetricError
from .limitset import GRID_N_SCHEDULE, Region, estimate_rough_limit_set
from .report import ReportRow
from .statistical import (
    ae_modification,
    check_modification,
    cluster_point_check,
    convergent_subsequence,
    rough_st_converges,
    st_bounded,
    st_cauchy,
)

SECTIONS = ("space", "sequence", "analysis", "output", "limitset")
ANALYSIS_KEYS = ("candidates", "r", "eps", "n", "n_max", "ref")
FORMATS = ("csv", "json")


@dataclass
class Section:
    kind: str
    arg: Optional[str]
    line: int
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def line_of(self, key) -> int:
        return self.lines.get(key, self.line)


def parse_sections(text: str) -> list:
    sections, current = [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            head = line[1:-1].split(None, 1)
            if not head:
                raise ConfigError("empty section header", lineno)
            kind = head[0].lower()
            if kind not in SECTIONS:
                raise ConfigError(f"unknown section [{kind}]", lineno)
            arg = head[1].strip() if len(head) > 1 else None
            current = Section(kind, arg, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key in current.values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        current.values[key] = value
        current.lines[key] = lineno
    return sections


@dataclass(frozen=True)
class AnalysisSpec:
    kind: str
    line: int
    candidates: tuple = ()
    radii: tuple = ()
    eps: tuple = DEFAULT_EPS
    n_schedule: tuple = DEFAULT_N_SCHEDULE
    n_max: Optional[int] = None


@dataclass(frozen=True)
class LimitsetSpec:
    r: float
    region: Optional[Region]
    step: Optional[float]
    n_schedule: tuple
    eps: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    spec: object
    sequence: object
    analyses: tuple
    output_path: Optional[str] = None
    output_format: str = "csv"
    limitset: Optional[LimitsetSpec] = None


def _floats(text: str, line: int, what: str) -> tuple:
    try:
        vals = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers, got {text!r}", line) from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what} must be a non-empty list of finite numbers", line)
    return vals


def _ints(text: str, line: int, what: str) -> tuple:
    vals = _floats(text, line, what)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{what} must hold integers, got {text!r}", line)
    return tuple(int(v) for v in vals)


def _points(text: str, line: int) -> tuple:
    try:
        return tuple(sq.parse_point(p) for p in split_top(text, ";") if p.strip())
    except SMetricError as exc:
        raise ConfigError(str(exc), line) from None


def _region(text: str, line: int) -> Region:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError("region must read 'lo1,lo2 : hi1,hi2'", line)
    try:
        return Region(_floats(parts[0], line, "region"), _floats(parts[1], line, "region"))
    except SMetricError as exc:
        raise ConfigError(str(exc), line) from None


def _schedule(text: str, line: int) -> tuple:
    ns = _ints(text, line, "n")
    if len(ns) < 2 or ns[0] < 2 or ns[-1] < 1000 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n must be a strictly increasing schedule of >= 2 points from >= 2 to >= 1000", line)
    return ns


def _eps(text: str, line: int) -> tuple:
    eps = _floats(text, line, "eps")
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps must be positive and strictly decreasing", line)
    return eps


def _analysis(sec: Section) -> AnalysisSpec:
    kind = (sec.arg or "").lower()
    if kind not in ANALYSES:
        raise ConfigError(f"unknown analysis kind {sec.arg!r}; expected one of {sorted(ANALYSES)}", sec.line)
    for key in sec.values:
        if key not in ANALYSIS_KEYS:
            raise ConfigError(f"unknown analysis key {key!r}", sec.line_of(key))
    kw = {}
    if "candidates" in sec.values or "ref" in sec.values:
        key = "candidates" if "candidates" in sec.values else "ref"
        kw["candidates"] = _points(sec.values[key], sec.line_of(key))
    if "r" in sec.values:
        radii = _floats(sec.values["r"], sec.line_of("r"), "r")
        if any(r < 0 for r in radii):
            raise ConfigError("r values must be >= 0", sec.line_of("r"))
        kw["radii"] = radii
    if "eps" in sec.values:
        kw["eps"] = _eps(sec.values["eps"], sec.line_of("eps"))
    if "n" in sec.values:
        kw["n_schedule"] = _schedule(sec.values["n"], sec.line_of("n"))
    if "n_max" in sec.values:
        vals = _ints(sec.values["n_max"], sec.line_of("n_max"), "n_max")
        n_max = vals[0]
        if len(vals) != 1 or n_max < 1000:
            raise ConfigError("n_max must be a single integer >= 1000", sec.line_of("n_max"))
        kw["n_max"] = n_max
    needs = ANALYSES[kind][1]
    if "candidates" in needs and not kw.get("candidates"):
        raise ConfigError(f"analysis {kind} needs candidates", sec.line)
    if "r" in needs and not kw.get("radii"):
        raise ConfigError(f"analysis {kind} needs r", sec.line)
    return AnalysisSpec(kind, sec.line, **kw)


def _single(sections, kind):
    found = [s for s in sections if s.kind == kind]
    if len(found) > 1:
        raise ConfigError(f"section [{kind}] appears more than once", found[1].line)
    return found[0] if found else None


def _required(sec: Section, key: str) -> str:
    if key not in sec.values:
        raise ConfigError(f"[{sec.kind}] needs '{key}'", sec.line)
    return sec.values[key]


def parse_config(text: str) -> ExperimentConfig:
    """Parse and resolve a config; every failure is a :class:`ConfigError` with a line number."""
    sections = parse_sections(text)
    space = _single(sections, "space")
    spec_name = _required(space, "spec") if space else "norm_sum(euclidean)"
    try:
        spec = spec_from_name(spec_name)
    except SMetricError as exc:
        raise ConfigError(str(exc), space.line_of("spec") if space else None) from None
    seq_sec = _single(sections, "sequence")
    if seq_sec is None:
        raise ConfigError("missing [sequence] section", 1)
    expr = _required(seq_sec, "expr")
    try:
        seq = sq.parse_family(expr)
    except SMetricError as exc:
        raise ConfigError(str(exc), seq_sec.line_of("expr")) from None
    analyses = tuple(_analysis(s) for s in sections if s.kind == "analysis")
    for a in analyses:
        for c in a.candidates:
            if len(c) != seq.dim:
                raise ConfigError(f"candidate {c} does not have dimension {seq.dim}", a.line)

    out = _single(sections, "output")
    path = out.get("path") if out else None
    fmt = (out.get("format", "csv") if out else "csv").lower()
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}", out.line_of("format"))

    limitset = None
    ls = _single(sections, "limitset")
    if ls is not None:
        radii = _floats(_required(ls, "r"), ls.line_of("r"), "r")
        r = radii[0]
        if len(radii) != 1 or r < 0:
            raise ConfigError("r must be a single number >= 0", ls.line_of("r"))
        region = _region(ls.values["region"], ls.line_of("region")) if "region" in ls.values else None
        if region is not None and region.dim != seq.dim:
            raise ConfigError(f"region must have dimension {seq.dim}", ls.line_of("region"))
        step = _floats(ls.values["step"], ls.line_of("step"), "step")[0] if "step" in ls.values else None
        if step is not None and step <= 0:
            raise ConfigError("step must be > 0", ls.line_of("step"))
        ns = _schedule(ls.values["n"], ls.line_of("n")) if "n" in ls.values else GRID_N_SCHEDULE
        eps = _eps(ls.values["eps"], ls.line_of("eps")) if "eps" in ls.values else DEFAULT_EPS
        limitset = LimitsetSpec(r, region, step, ns, eps)
    return ExperimentConfig(spec, seq, analyses, path, fmt, limitset)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# analyses -> rows


def _pt(c) -> tuple:
    return tuple(float(x) for x in c)


def _density_rows(kind, seq, c, r, eps, est, verdict, extra=""):
    rows = []
    for n, count in est.prefix_counts:
        ev = f"{est.describe()}{extra}"
        rows.append(ReportRow(kind, seq.name, _pt(c) if c is not None else None, r, eps, n, count / n, verdict, ev))
    return rows


def _run_rough_st(cfg, a, radii):
    rows = []
    for c in a.candidates:
        for r in radii:
            v = rough_st_converges(cfg.spec, cfg.sequence, c, r, a.eps, a.n_schedule)
            for e, est in v.per_eps:
                rows += _density_rows(a.kind, cfg.sequence, c, r, e, est, v.verdict)
    return rows


def _n_max(a):
    return a.n_max if a.n_max is not None else a.n_schedule[-1]


def _run_prefix(cfg, a, radii):
    rows = []
    for c in a.candidates:
        for r in radii:
            if a.kind == "is_convergent_prefix":
                v = is_convergent_prefix(cfg.spec, cfg.sequence, c, a.eps, _n_max(a))
            else:
                v = rough_limit_check(cfg.spec, cfg.sequence, c, r, a.eps, _n_max(a))
            for e, last in v.per_eps:
                rows.append(
                    ReportRow(a.kind, cfg.sequence.name, _pt(c), r, e, v.n_max, None, v.verdict, f"last_exceedance={last}")
                )
    return rows


def _run_cauchy(cfg, a):
    v = is_cauchy_prefix(cfg.spec, cfg.sequence, a.eps, _n_max(a))
    return [
        ReportRow(a.kind, cfg.sequence.name, None, None, e, v.n_max, None, v.verdict, f"last_bad_index={last} witness={v.witness}")
        for e, last in v.per_eps
    ]


def _run_bounded_prefix(cfg, a):
    v = is_s_bounded_prefix(cfg.spec, cfg.sequence, _n_max(a))
    ev = f"radius={v.radius:.9g}" if v.bounded else f"witness={v.witness}"
    return [ReportRow(a.kind, cfg.sequence.name, None, None, None, _n_max(a), None, v.verdict, ev)]


def _run_st_cauchy(cfg, a):
    v = st_cauchy(cfg.spec, cfg.sequence, a.eps, a.n_schedule)
    rows = []
    for e, pivot, est in v.per_eps:
        rows += _density_rows(a.kind, cfg.sequence, None, None, e, est, v.verdict, f" N={pivot}")
    return rows


def _run_st_bounded(cfg, a):
    rows = []
    for c in a.candidates:
        v = st_bounded(cfg.spec, cfg.sequence, c, a.n_schedule)
        for b, est in v.per_bound:
            rows += _density_rows(a.kind, cfg.sequence, c, None, None, est, v.verdict, f" B={b:.9g}")
    return rows


def _run_cluster(cfg, a):
    rows = []
    for c in a.candidates:
        v = cluster_point_check(cfg.spec, cfg.sequence, c, a.eps, a.n_schedule)
        for e, est in v.per_eps:
            rows += _density_rows(a.kind, cfg.sequence, c, None, e, est, v.verdict, " hit_set")
    return rows


def _run_ae(cfg, a):
    rows = []
    for c in a.candidates:
        n_max = _n_max(a)
        ns = tuple(n for n in a.n_schedule if n <= n_max)
        mod = ae_modification(cfg.spec, cfg.sequence, c, n_max, a.eps, ns if len(ns) >= 2 else None)
        conv = check_modification(cfg.spec, cfg.sequence, mod, a.eps)
        counts = mod.disagreement.counts(list(ns))
        for n, k in zip(ns, counts):
            rows.append(
                ReportRow(
                    a.kind, cfg.sequence.name, _pt(c), None, None, n, k / n, conv.verdict,
                    f"disagreement_count={k} blocks={len(mod.block_starts)}",
                )
            )
    return rows


def _run_subsequence(cfg, a):
    rows = []
    for c in a.candidates:
        n_max = _n_max(a)
        idx = convergent_subsequence(cfg.spec, cfg.sequence, c, n_max)
        sub = sq.from_array(f"{cfg.sequence.name}[subseq]", cfg.sequence.points(idx))
        v = is_convergent_prefix(cfg.spec, sub, c, a.eps, len(idx))
        rows.append(
            ReportRow(a.kind, cfg.sequence.name, _pt(c), None, None, n_max, len(idx) / n_max, v.verdict, f"indices={len(idx)}")
        )
    return rows


ANALYSES = {
    # kind: (runner, required keys)
    "st_converges": (lambda cfg, a: _run_rough_st(cfg, a, (0.0,)), ("candidates",)),
    "rough_st_converges": (lambda cfg, a: _run_rough_st(cfg, a, a.radii), ("candidates", "r")),
    "is_convergent_prefix": (lambda cfg, a: _run_prefix(cfg, a, (None,)), ("candidates",)),
    "rough_limit_check": (lambda cfg, a: _run_prefix(cfg, a, a.radii), ("candidates", "r")),
    "is_cauchy_prefix": (_run_cauchy, ()),
    "is_s_bounded_prefix": (_run_bounded_prefix, ()),
    "st_cauchy": (_run_st_cauchy, ()),
    "st_bounded": (_run_st_bounded, ("candidates",)),
    "cluster_point": (_run_cluster, ("candidates",)),
    "ae_modification": (_run_ae, ("candidates",)),
    "convergent_subsequence": (_run_subsequence, ("candidates",)),
}


def run_config(cfg: ExperimentConfig) -> list:
    """All report rows, in config order."""
    rows = []
    for a in cfg.analyses:
        rows += ANALYSES[a.kind][0](cfg, a)
    return rows


def limitset_rows(cfg: ExperimentConfig) -> list:
    """Grid search of ``st-LIM^r``: one row per member point."""
    ls = cfg.limitset
    if ls is None:
        raise ConfigError("config has no [limitset] section", 1)
    est = estimate_rough_limit_set(
        cfg.spec, cfg.sequence, ls.r, ls.region, ls.step, ls.eps, ls.n_schedule, force_grid=True
    )
    ev = f"diameter={est.diameter_estimate:.9g} tested={est.tested} step={est.step:.9g}"
    return [
        ReportRow("limitset", cfg.sequence.name, _pt(m), ls.r, None, ls.n_schedule[-1], None, Verdict.HOLDS, ev)
        for m in est.members
    ]
