"""Randomised checks of the implications between convergence notions."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import s_direct
from smetric import core
from smetric import limitset as ls
from smetric import sequences as sq
from smetric import statistical as stat
from smetric.core import Verdict
from smetric.density import PolynomialImage, Residue

SPEC = core.norm_sum("euclidean")
NS = (100, 1_000, 10_000)
N_MAX = NS[-1]

coord = st.integers(-6, 6).map(float)
point = st.tuples(coord, coord)


@st.composite
def families(draw):
    kind = draw(st.sampled_from(["constant", "reciprocal", "periodic", "spike_zero", "spike_positive", "perturbed"]))
    if kind == "constant":
        return sq.constant(draw(point))
    if kind == "reciprocal":
        return sq.reciprocal(draw(point), draw(point))
    if kind == "periodic":
        return sq.periodic(draw(st.lists(point, min_size=1, max_size=3)))
    if kind == "spike_zero":
        return sq.spike_on(PolynomialImage(draw(st.integers(2, 3))), draw(point), draw(point))
    if kind == "spike_positive":
        return sq.spike_on(Residue(draw(st.integers(2, 5)), 0), draw(point), draw(point))
    inner = sq.spike_on(PolynomialImage(2), draw(point), draw(point))
    return sq.perturbed(inner, draw(st.sampled_from(sorted(sq.DECAYS))))


def candidates(seq):
    pts = []
    if seq.structure is not None:
        if seq.structure.known_st_limit is not None:
            pts.append(seq.structure.known_st_limit)
        pts.extend(seq.structure.base_values)
    pts.append(tuple(seq(N_MAX)))
    return pts


def exact_cluster_points(seq):
    st_ = seq.structure
    if st_ is None:
        return []
    pts = list(st_.base_values)
    if st_.known_st_limit is not None:
        pts.append(st_.known_st_limit)
    return pts


PROP = settings(max_examples=25, deadline=None)


class TestImplications:
    @PROP
    @given(families())
    def test_convergent_implies_statistical(self, seq):
        for c in candidates(seq):
            conv = core.is_convergent_prefix(SPEC, seq, c, n_max=N_MAX)
            if conv.holds:
                assert stat.st_converges(SPEC, seq, c, n_schedule=NS).holds

    @PROP
    @given(families(), st.sampled_from([0.5, 1.0, 2 * math.sqrt(2)]))
    def test_rough_implies_rough_statistical(self, seq, r):
        for c in candidates(seq):
            if core.rough_limit_check(SPEC, seq, c, r, n_max=N_MAX).holds:
                assert stat.rough_st_converges(SPEC, seq, c, r, n_schedule=NS).holds

    @PROP
    @given(families())
    def test_statistical_implies_cauchy_implies_bounded(self, seq):
        if any(stat.st_converges(SPEC, seq, c, n_schedule=NS).holds for c in candidates(seq)):
            scv = stat.st_cauchy(SPEC, seq, n_schedule=NS)
            assert scv.holds
            pivot = scv.per_eps[0][1]
            assert stat.st_bounded(SPEC, seq, seq(pivot), NS).holds

    @PROP
    @given(families())
    def test_cauchy_implies_statistical_cauchy(self, seq):
        if core.is_cauchy_prefix(SPEC, seq, n_max=N_MAX, seed=0).holds:
            assert stat.st_cauchy(SPEC, seq, n_schedule=NS).holds

    @PROP
    @given(families(), point)
    def test_r_zero_reduction(self, seq, c):
        a = stat.rough_st_converges(SPEC, seq, c, 0.0, n_schedule=NS)
        b = stat.st_converges(SPEC, seq, c, n_schedule=NS)
        assert a.verdict is b.verdict

    @PROP
    @given(families())
    def test_limits_are_unique(self, seq):
        # 2||a - b|| <= S(x_n, x_n, a) + S(x_n, x_n, b) < 2 eps on a common index,
        # so the finest eps bounds how far apart two Holds candidates can be
        eps_min = min(core.DEFAULT_EPS)
        holds = [c for c in candidates(seq) + [(0.0, 0.0)] if stat.st_converges(SPEC, seq, c, n_schedule=NS).holds]
        for a in holds:
            for b in holds:
                assert s_direct(a, a, b) < 2 * eps_min
        exact = [c for c in exact_cluster_points(seq) if c in holds]
        for a in exact:
            for b in exact:
                assert stat.st_limit_unique_check(SPEC, seq, a, b, n_schedule=NS).passed

    @PROP
    @given(families())
    def test_limit_is_cluster_point(self, seq):
        for c in candidates(seq):
            if stat.st_converges(SPEC, seq, c, n_schedule=NS).holds:
                assert stat.cluster_point_check(SPEC, seq, c, n_schedule=NS).holds


class TestLimitSets:
    @PROP
    @given(families(), st.lists(point, min_size=1, max_size=20), st.sampled_from([0.0, 0.7, 2.0, 5.0]))
    def test_batch_equals_pointwise(self, seq, pts, r):
        batch = ls.rough_st_batch(SPEC, seq, pts, r, n_schedule=NS)
        assert list(batch) == [stat.rough_st_converges(SPEC, seq, p, r, n_schedule=NS).verdict for p in pts]

    @PROP
    @given(point, point, st.lists(point, min_size=1, max_size=30), st.sampled_from([0.5, 1.0, 3.0]))
    def test_ball_characterization_off_boundary(self, spike, base, ys, r):
        seq = sq.spike_on(PolynomialImage(2), spike, base)
        for y in ys:
            d = s_direct(base, base, y)
            assume(abs(d - r) > 1e-3)
            v = stat.rough_st_converges(SPEC, seq, y, r, n_schedule=NS)
            assert v.holds == (d <= r)

    @PROP
    @given(families(), st.sampled_from([0.5, 1.0, 2 * math.sqrt(2)]))
    def test_diameter_at_most_three_r(self, seq, r):
        region = ls.Region.square(8.0)
        est = ls.estimate_rough_limit_set(SPEC, seq, r, region, 0.5, n_schedule=NS, force_grid=True)
        assert est.diameter_estimate <= 3 * r + 1e-6

    @PROP
    @given(families(), st.sampled_from(["1/n", "2^-n"]), st.sampled_from([0.0, 1.0, 2 * math.sqrt(2)]))
    def test_perturbation_never_flips(self, seq, decay, r):
        # a slowly vanishing perturbation may leave one side Inconclusive at this
        # schedule, but a decided Holds must never meet a decided Fails
        for c in candidates(seq):
            rep = ls.perturbation_equivalence_check(SPEC, seq, decay, c, r, n_schedule=NS)
            assert {rep.detail("original"), rep.detail("perturbed")} != {"holds", "fails"}

    @PROP
    @given(families(), st.sampled_from([0.5, 1.0, 2 * math.sqrt(2)]))
    def test_members_inside_cluster_balls(self, seq, r):
        est = ls.estimate_rough_limit_set(SPEC, seq, r, ls.Region.square(8.0), 0.5, n_schedule=NS, force_grid=True)
        assume(len(est))
        # only points that are cluster points by construction: a term x_N close to
        # the limit passes the finite-eps cluster test without being one
        for c in exact_cluster_points(seq):
            if stat.cluster_point_check(SPEC, seq, c, n_schedule=NS).holds:
                assert ls.cluster_ball_cover_check(SPEC, seq, c, r, est.members, n_schedule=NS).passed


class TestModification:
    @PROP
    @given(point, point, st.integers(2, 3))
    def test_disagreement_inside_spikes(self, spike, base, degree):
        assume(spike != base)
        spikes = PolynomialImage(degree)
        seq = sq.spike_on(spikes, spike, base)
        mod = stat.ae_modification(SPEC, seq, base, n_max=N_MAX)
        assert all(spikes.contains(m) for m in mod.disagreement.values)
        assert stat.check_modification(SPEC, seq, mod).holds
        idx = stat.convergent_subsequence(SPEC, seq, base, n_max=N_MAX)
        assert np.all(seq.points(idx) == np.asarray(base))


class TestMetricAxioms:
    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(["euclidean", "taxicab", "max"]), st.integers(0, 2**32 - 1))
    def test_norm_sums(self, norm, seed):
        rep = core.check_axioms(core.norm_sum(norm), core.random_quadruples(200, seed=seed))
        assert rep.passed

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(coord, coord), st.tuples(coord, coord))
    def test_symmetry_lemma(self, x, y):
        assert core.symmetry_defect(SPEC, x, y) <= core.SYMMETRY_TOL
