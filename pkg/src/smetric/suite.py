"""Executable verification of the implications between convergence notions.

:func:`verify_suite` runs every property over a zoo of sequence families and
reports one line per property with its worst-case margin, plus one
:class:`~smetric.report.ReportRow` per checked instance. The run is
deterministic for a fixed seed: families, candidates and radii are visited
in a fixed order and no timing data enters the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import sequences as sq
from .core import (
    SYMMETRY_TOL,
    Verdict,
    check_axioms,
    custom,
    default_seed,
    is_cauchy_prefix,
    is_convergent_prefix,
    metric_sum,
    norm_sum,
    random_quadruples,
    rough_limit_check,
    symmetry_defects,
)
from .density import NON_SQUARES, Complement, PolynomialImage, Residue
from .errors import UsageError
from .limitset import (
    ball_boundary,
    ball_characterization_check,
    bounded_iff_nonempty_check,
    cluster_ball_cover_check,
    diam_bound_check,
    estimate_rough_limit_set,
    limit_set_closed_check,
    perturbation_equivalence_check,
    subsequence_limitset_check,
)
from .report import ReportRow
from .statistical import (
    UNIQUE_TOL,
    bulk_medoid,
    cluster_point_check,
    rough_st_converges,
    st_bounded,
    st_cauchy,
    st_converges,
)

SQRT8 = 2.0 * math.sqrt(2.0)
AXIOM_SAMPLES = 10_000


@dataclass(frozen=True)
class ScaleConfig:
    name: str
    n_schedule: tuple
    grid_schedule: tuple
    ball_step: float

    @property
    def n_max(self) -> int:
        return self.n_schedule[-1]


SCALES = {
    "smoke": ScaleConfig("smoke", (100, 1_000, 10_000), (100, 1_000, 10_000), 0.1),
    "full": ScaleConfig("full", (1_000, 10_000, 100_000, 1_000_000), (1_000, 10_000, 100_000), 0.1),
}

RADII = (0.0, 1.0, SQRT8)
LIMIT_SET_RADII = (1.0, SQRT8)
BALL_RADII = (0.5, 1.0, 2.0)
DECAY_NAMES = ("1/n", "2^-n")
DENSE_SETS = (NON_SQUARES, Complement(PolynomialImage(3)))

PROPERTIES = (
    "axioms",
    "symmetry",
    "r0_reduction",
    "convergent_implies_st",
    "st_implies_st_cauchy",
    "st_cauchy_implies_st_bounded",
    "cauchy_implies_st_cauchy",
    "rough_implies_rough_st",
    "st_limit_unique",
    "diameter_bound",
    "ball_characterization",
    "limit_set_closed",
    "subsequence_superset",
    "perturbation_equivalence",
    "cluster_ball_cover",
    "bounded_iff_nonempty",
)


def default_zoo() -> list:
    """Fifteen families covering every constructor."""
    squares = PolynomialImage(2)
    return [
        sq.constant((5, 5)),
        sq.constant((-2, 3)),
        sq.reciprocal((1, 1), (1, 0)),
        sq.reciprocal((0, 0), (3, -4)),
        sq.periodic([(0, 0), (9, 9)]),
        sq.periodic([(0, 0), (1, 1), (2, 0)]),
        sq.spike_on(squares, (9, 9), (0, 0)),
        sq.spike_on(Residue(100, 0), (50, 50), (1, 1)),
        sq.spike_on(PolynomialImage(3), (-7, 3), (2, 2)),
        sq.paper_example_3_1(),
        sq.paper_example_4_1(),
        sq.perturbed(sq.paper_example_3_1(), "1/n"),
        sq.perturbed(sq.periodic([(0, 0), (9, 9)]), "2^-n"),
        sq.perturbed(sq.reciprocal((1, 1), (1, 0)), "1/n^2"),
        sq.linear((1, 0)),
    ]


def broken_spec():
    """A rule that is not an S-metric: it is identically -1."""
    return custom("broken(-1)", lambda x, y, z: -np.ones(np.broadcast_shapes(x.shape, y.shape, z.shape)[:-1]))


def axiom_specs() -> list:
    return [norm_sum("euclidean"), norm_sum("taxicab"), norm_sum("max")] + [
        metric_sum(m) for m in ("euclidean", "taxicab", "chebyshev", "discrete")
    ]


@dataclass
class PropertyResult:
    """``status`` is ``PASS``, ``FAIL`` or ``SKIP``; ``margin`` is the worst case (negative on failure)."""

    name: str
    spec: str
    status: str = "PASS"
    margin: float = math.inf
    checked: int = 0
    note: str = ""

    def record(self, ok: bool, margin: Optional[float] = None):
        self.checked += 1
        m = margin if margin is not None else (0.0 if ok else -1.0)
        self.margin = min(self.margin, m)
        if not ok:
            self.status = "FAIL"

    def line(self) -> str:
        if self.status == "SKIP":
            return f"SKIP {self.name} [{self.spec}] {self.note}".rstrip()
        margin = "inf" if math.isinf(self.margin) else f"{self.margin:.9g}"
        return f"{self.status} {self.name} [{self.spec}] checked={self.checked} worst_margin={margin}"


@dataclass
class SuiteResult:
    scale: str
    results: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.status != "FAIL" for r in self.results)

    def lines(self) -> list:
        return [r.line() for r in self.results]

    def by_name(self, name: str, spec: Optional[str] = None) -> list:
        return [r for r in self.results if r.name == name and (spec is None or r.spec == spec)]


def _tup(p) -> tuple:
    return tuple(float(c) for c in p)


def family_candidates(spec, seq, n: int) -> list:
    """Known limit, base values, prefix medoid and a far point, deduplicated in that order."""
    pts = []
    st = seq.structure
    if st is not None:
        if st.known_st_limit is not None:
            pts.append(st.known_st_limit)
        pts.extend(st.base_values)
    med = bulk_medoid(spec, seq, n)
    pts.append(med)
    pts.append(np.asarray(med) + 7.0)
    out, seen = [], set()
    for p in pts:
        t = _tup(p)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


class _Run:
    def __init__(self, spec, cfg: ScaleConfig, result: SuiteResult, zoo):
        self.spec, self.cfg, self.result, self.zoo = spec, cfg, result, zoo
        self.props = {name: PropertyResult(name, spec.name) for name in PROPERTIES[2:]}

    def row(self, prop, seq, ok, candidate=None, r=None, evidence=""):
        self.result.rows.append(
            ReportRow(
                prop,
                seq.name,
                _tup(candidate) if candidate is not None else None,
                r,
                None,
                self.cfg.n_max,
                None,
                Verdict.HOLDS if ok else Verdict.FAILS,
                evidence,
            )
        )

    def check(self, prop, seq, ok, margin=None, candidate=None, r=None, evidence=""):
        self.props[prop].record(ok, margin)
        self.row(prop, seq, ok, candidate, r, evidence)

    # -- the implication chain -------------------------------------------
    def implications(self, seq):
        spec, ns, n_max = self.spec, self.cfg.n_schedule, self.cfg.n_max
        cands = family_candidates(spec, seq, ns[0])
        st_holds = []
        for c in cands:
            conv = is_convergent_prefix(spec, seq, c, n_max=n_max)
            rough0 = rough_limit_check(spec, seq, c, 0.0, n_max=n_max)
            stv = rough_st_converges(spec, seq, c, 0.0, n_schedule=ns)
            st_plain = st_converges(spec, seq, c, n_schedule=ns)
            same = stv.verdict is st_plain.verdict and rough0.verdict is conv.verdict
            self.check(
                "r0_reduction", seq, same, candidate=c, r=0.0,
                evidence=f"st={st_plain.verdict.value} rough_st0={stv.verdict.value} conv={conv.verdict.value} rough0={rough0.verdict.value}",
            )
            ok = conv.verdict is not Verdict.HOLDS or st_plain.holds
            self.check("convergent_implies_st", seq, ok, candidate=c, evidence=f"conv={conv.verdict.value} st={st_plain.verdict.value}")
            for r in RADII[1:]:
                rough = rough_limit_check(spec, seq, c, r, n_max=n_max)
                rst = rough_st_converges(spec, seq, c, r, n_schedule=ns)
                ok = rough.verdict is not Verdict.HOLDS or rst.holds
                self.check(
                    "rough_implies_rough_st", seq, ok, candidate=c, r=r,
                    evidence=f"rough={rough.verdict.value} rough_st={rst.verdict.value}",
                )
            ok = conv.verdict is not Verdict.HOLDS or st_plain.holds
            self.check("rough_implies_rough_st", seq, ok, candidate=c, r=0.0, evidence=f"rough={conv.verdict.value} rough_st={st_plain.verdict.value}")
            if st_plain.holds:
                st_holds.append(st_plain)

        scv = st_cauchy(spec, seq, n_schedule=ns)
        if st_holds:
            self.check("st_implies_st_cauchy", seq, scv.holds, candidate=st_holds[0].candidate, evidence=f"st_cauchy={scv.verdict.value}")
        cauchy = is_cauchy_prefix(spec, seq, n_max=n_max)
        ok = cauchy.verdict is not Verdict.HOLDS or scv.holds
        self.check("cauchy_implies_st_cauchy", seq, ok, evidence=f"cauchy={cauchy.verdict.value} st_cauchy={scv.verdict.value}")
        if scv.holds:
            pivot = scv.per_eps[0][1]
            u = seq(pivot)
            sb = st_bounded(spec, seq, u, ns)
            self.check(
                "st_cauchy_implies_st_bounded", seq, sb.holds, candidate=u,
                evidence=f"pivot={pivot} st_bounded={sb.verdict.value} bound={sb.bound}",
            )
        else:
            self.check("st_cauchy_implies_st_bounded", seq, True, evidence=f"vacuous st_cauchy={scv.verdict.value}")

        for a, b in combinations(st_holds, 2):
            d = float(spec.self_distance(a.candidate, b.candidate))
            self.check("st_limit_unique", seq, d <= UNIQUE_TOL, UNIQUE_TOL - d, candidate=b.candidate, evidence=f"distance={d:.9g}")
        if len(st_holds) < 2:
            self.props["st_limit_unique"].record(True, UNIQUE_TOL)
        return cands

    # -- the limit set -----------------------------------------------------
    def limit_sets(self, seq, cands):
        spec, gs = self.spec, self.cfg.grid_schedule
        for r in LIMIT_SET_RADII:
            est = estimate_rough_limit_set(spec, seq, r, n_schedule=gs)
            rep = diam_bound_check(spec, est)
            self.check("diameter_bound", seq, rep.passed, rep.margin, r=r, evidence=f"{est.representation} diameter={est.diameter_estimate:.9g}")
            members = self._members(est)
            for c in cands:
                cv = cluster_point_check(spec, seq, c, n_schedule=gs)
                if not cv.holds or not len(members):
                    continue
                rep = cluster_ball_cover_check(spec, seq, c, r, members, n_schedule=gs)
                self.check("cluster_ball_cover", seq, rep.passed, rep.margin, candidate=c, r=r, evidence=f"members={len(members)}")
            self._closed(seq, est, r)
        for c in cands:
            for dense in DENSE_SETS:
                for r in RADII:
                    rep = subsequence_limitset_check(spec, seq, dense, [c], r, n_schedule=gs)
                    _, full, part = rep.detail("points")[0]
                    self.check("subsequence_superset", seq, rep.passed, rep.margin, candidate=c, r=r, evidence=f"{dense} full={full} sub={part}")
        u = bulk_medoid(spec, seq, gs[0])
        rep = bounded_iff_nonempty_check(spec, seq, u, n_schedule=gs)
        self.check(
            "bounded_iff_nonempty", seq, rep.passed, rep.margin, candidate=u,
            evidence=f"st_bounded={rep.detail('st_bounded')} member_found={rep.detail('member') is not None}",
        )

    def _members(self, est):
        if est.is_exact:
            bnd = ball_boundary(self.spec, est.ball.center, est.ball.radius, 64)
            return np.vstack([est.ball.center[None, :], bnd])
        return est.members

    def _closed(self, seq, est, r):
        spec, gs = self.spec, self.cfg.grid_schedule
        if est.is_exact:
            b = ball_boundary(spec, est.ball.center, r, 8)[1]
            c = est.ball.center
            members = [c + (1 - 10.0**-j) * (b - c) for j in range(1, 9)]
            rep = limit_set_closed_check(spec, seq, r, members, limit=b, n_schedule=gs)
        elif len(est.members):
            m = est.members[len(est.members) // 2]
            rep = limit_set_closed_check(spec, seq, r, [m, m], n_schedule=gs)
        else:
            self.props["limit_set_closed"].record(True, 0.0)
            return
        self.check("limit_set_closed", seq, rep.passed, rep.margin, candidate=rep.detail("limit"), r=r, evidence=f"verdict={rep.detail('verdict')}")

    def ball(self, seq):
        st = seq.structure
        if st is None or st.known_st_limit is None:
            return
        for r in BALL_RADII:
            rep = ball_characterization_check(self.spec, seq, r, step=self.cfg.ball_step, n_schedule=self.cfg.grid_schedule)
            self.check(
                "ball_characterization", seq, rep.passed, rep.margin, candidate=st.known_st_limit, r=r,
                evidence=f"grid={rep.detail('grid_points')} disagreements={rep.detail('disagreements')} outside_shell={rep.detail('outside_shell')}",
            )

    def perturbations(self, seq, cands):
        gs = self.cfg.grid_schedule
        for decay in DECAY_NAMES:
            for c in cands:
                for r in RADII:
                    rep = perturbation_equivalence_check(self.spec, seq, decay, c, r, n_schedule=gs)
                    self.check(
                        "perturbation_equivalence", seq, rep.passed, rep.margin, candidate=c, r=r,
                        evidence=f"{decay} original={rep.detail('original')} perturbed={rep.detail('perturbed')}",
                    )

    def run(self):
        for seq in self.zoo:
            cands = self.implications(seq)
            self.limit_sets(seq, cands)
            self.ball(seq)
            self.perturbations(seq, cands)
        self.result.results.extend(self.props.values())


def _axioms(spec, seed, result: SuiteResult) -> bool:
    sample = random_quadruples(AXIOM_SAMPLES, seed=seed)
    rep = check_axioms(spec, sample)
    ax = PropertyResult("axioms", spec.name)
    ax.record(rep.passed, rep.worst_margin)
    result.results.append(ax)
    pairs = random_quadruples(AXIOM_SAMPLES, seed=seed)[:, :2, :]
    defect = float(np.max(symmetry_defects(spec, pairs[:, 0], pairs[:, 1])))
    sym = PropertyResult("symmetry", spec.name)
    sym.record(defect <= SYMMETRY_TOL, SYMMETRY_TOL - defect)
    result.results.append(sym)
    return rep.passed


IMPLICATION_PROPERTIES = (
    "r0_reduction",
    "convergent_implies_st",
    "st_implies_st_cauchy",
    "st_cauchy_implies_st_bounded",
    "cauchy_implies_st_cauchy",
    "rough_implies_rough_st",
)


def implication_suite(scale: str = "smoke", zoo=None) -> SuiteResult:
    """Only the implication chain and the ``r = 0`` reduction, under the Euclidean norm sum."""
    if scale not in SCALES:
        raise UsageError(f"scale must be one of {sorted(SCALES)}, got {scale!r}")
    result = SuiteResult(scale)
    run = _Run(norm_sum("euclidean"), SCALES[scale], result, default_zoo() if zoo is None else list(zoo))
    for seq in run.zoo:
        run.implications(seq)
    result.results.extend(run.props[name] for name in IMPLICATION_PROPERTIES)
    return result


def verify_suite(scale: str = "smoke", include_broken: bool = False, seed=None, zoo=None) -> SuiteResult:
    """Run every property; ``include_broken`` adds a non-S-metric rule whose downstream checks are skipped."""
    if scale not in SCALES:
        raise UsageError(f"scale must be one of {sorted(SCALES)}, got {scale!r}")
    cfg = SCALES[scale]
    seed = default_seed() if seed is None else int(seed)
    zoo = default_zoo() if zoo is None else list(zoo)
    result = SuiteResult(scale)
    main = norm_sum("euclidean")
    for spec in axiom_specs():
        _axioms(spec, seed, result)
    _Run(main, cfg, result, zoo).run()
    if include_broken:
        bad = broken_spec()
        if _axioms(bad, seed, result):
            _Run(bad, cfg, result, zoo).run()
        else:
            for name in PROPERTIES[2:]:
                result.results.append(PropertyResult(name, bad.name, "SKIP", note="axiom check failed"))
    return result
