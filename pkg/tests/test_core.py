import itertools
import math

import numpy as np
import pytest

from smetric import core
from smetric import sequences as sq
from smetric.core import Ball, Verdict
from smetric.density import Finite, PolynomialImage
from smetric.errors import DimensionError, DomainError, UsageError

from conftest import SQRT8, s_direct


class TestEvalS:
    def test_identity_is_zero(self, spec):
        assert core.eval_s(spec, (1, 1), (1, 1), (1, 1)) == 0.0

    def test_odd_branch_distance(self, spec):
        assert core.eval_s(spec, (1, 1), (1, 1), (0, 0)) == pytest.approx(SQRT8, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 17])
    def test_spike_distance_matches_formula(self, spec, k):
        expected = 2 * math.sqrt(k * k + k * k)
        assert core.eval_s(spec, (k, k), (k, k), (0, 0)) == pytest.approx(expected, rel=1e-14)

    def test_matches_direct_evaluation(self, spec):
        rng = np.random.default_rng(3)
        for x, y, z in rng.uniform(-5, 5, (50, 3, 2)):
            assert core.eval_s(spec, x, y, z) == pytest.approx(s_direct(x, y, z), rel=1e-12)

    def test_dimension_mismatch(self, spec):
        with pytest.raises(DimensionError):
            core.eval_s(spec, (1, 1), (1, 1, 1), (0, 0))

    @pytest.mark.parametrize("bad", [(float("nan"), 0), (0, float("inf"))])
    def test_non_finite(self, spec, bad):
        with pytest.raises(DomainError):
            core.eval_s(spec, bad, (0, 0), (0, 0))

    def test_call_delegates(self, spec):
        assert spec((3, 4), (0, 0), (0, 0)) == pytest.approx(5.0)

    def test_self_distance_agrees_with_evaluate(self):
        rng = np.random.default_rng(4)
        xs, zs = rng.normal(size=(100, 2)), rng.normal(size=(100, 2))
        for name in ("euclidean", "taxicab", "max"):
            s = core.norm_sum(name)
            np.testing.assert_array_equal(s.self_distance(xs, zs), s.evaluate(xs, xs, zs))
        for name in core.METRICS:
            s = core.metric_sum(name)
            np.testing.assert_array_equal(s.self_distance(xs, zs), s.evaluate(xs, xs, zs))


class TestSpecs:
    def test_names_resolve(self):
        for text in ("norm_sum", "norm_sum(taxicab)", "metric_sum(chebyshev)", "metric_sum(discrete)"):
            assert core.spec_from_name(text).name.startswith(text.split("(")[0])

    def test_unknown_name(self):
        with pytest.raises(UsageError):
            core.spec_from_name("frobenius")
        with pytest.raises(UsageError):
            core.norm_sum("l3")

    def test_equal_recipes_compare_equal(self):
        assert core.norm_sum("max") == core.norm_sum("max")
        assert core.norm_sum("max") != core.norm_sum("taxicab")

    def test_metric_sum_with_callable(self):
        s = core.metric_sum(lambda x, z: np.abs(np.asarray(x) - np.asarray(z)).sum(axis=-1), name="l1")
        assert s.name == "metric_sum(l1)"
        assert core.eval_s(s, (2, 0), (0, 3), (0, 0)) == pytest.approx(5.0)

    def test_non_vectorized_custom(self):
        s = core.custom("scalar", lambda x, y, z: float(np.abs(x - z).sum() + np.abs(y - z).sum()), vectorized=False)
        xs = np.arange(6.0).reshape(3, 2)
        np.testing.assert_allclose(s.to_center(xs, (0, 0)), 2 * xs.sum(axis=1))


class TestAxioms:
    @pytest.mark.parametrize("norm", ["euclidean", "taxicab", "max"])
    def test_norm_sum_passes(self, norm):
        rep = core.check_axioms(core.norm_sum(norm), core.random_quadruples(10_000, seed=42))
        assert rep.passed and rep.n_checked == 10_000
        assert rep.worst_margin >= -core.TOL

    @pytest.mark.parametrize("metric", sorted(core.METRICS))
    def test_metric_sum_passes(self, metric):
        assert core.check_axioms(core.metric_sum(metric), core.random_quadruples(2_000, seed=7)).passed

    def test_degenerate_quadruple(self, spec):
        p = np.full((1, 4, 2), 1.5)
        rep = core.check_axioms(spec, p)
        assert rep.passed and rep.worst_margin == 0.0

    def test_negative_rule_reported(self):
        broken = core.custom("neg", lambda x, y, z: -np.ones(np.broadcast_shapes(x.shape, y.shape, z.shape)[:-1]))
        rep = core.check_axioms(broken, core.random_quadruples(50, seed=1))
        assert not rep.passed
        assert any(v.axiom == "nonnegativity" for v in rep.violations)

    def test_identity_violation_reported(self):
        zero = core.custom("zero", lambda x, y, z: np.zeros(np.broadcast_shapes(x.shape, y.shape, z.shape)[:-1]))
        rep = core.check_axioms(zero, core.random_quadruples(20, seed=2))
        assert any(v.axiom.startswith("identity") for v in rep.violations)

    def test_triangle_violation_reported(self):
        sq_dist = core.custom("squared", lambda x, y, z: ((x - z) ** 2).sum(-1) + ((y - z) ** 2).sum(-1))
        rep = core.check_axioms(sq_dist, core.random_quadruples(2_000, seed=3))
        assert any(v.axiom == "triangle" for v in rep.violations)
        assert rep.worst_margin < 0

    def test_violation_cap(self):
        broken = core.custom("neg", lambda x, y, z: -np.ones(np.broadcast_shapes(x.shape, y.shape, z.shape)[:-1]))
        rep = core.check_axioms(broken, core.random_quadruples(500, seed=1), max_reported=10)
        assert len(rep.violations) <= 10

    def test_empty_sample(self, spec):
        with pytest.raises(UsageError):
            core.check_axioms(spec, [])

    def test_seeded_sampling_is_reproducible(self):
        a = core.random_quadruples(10, seed=5)
        b = core.random_quadruples(10, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_env_seed(self, monkeypatch):
        monkeypatch.setenv("SMETRIC_SEED", "9")
        assert core.default_seed() == 9
        monkeypatch.delenv("SMETRIC_SEED")
        assert core.default_seed() == 42


class TestSymmetry:
    def test_examples(self, spec):
        assert core.symmetry_defect(spec, (0, 0), (1, 1)) == 0.0
        assert core.symmetry_defect(core.metric_sum("taxicab"), (2, 0), (0, 3)) == 0.0
        assert core.symmetry_defect(spec, (4, 4), (4, 4)) == 0.0

    def test_oracle_both_orders(self):
        s = core.metric_sum("taxicab")
        assert s((2, 0), (2, 0), (0, 3)) == pytest.approx(10.0)
        assert s((0, 3), (0, 3), (2, 0)) == pytest.approx(10.0)

    @pytest.mark.parametrize("name", ["euclidean", "taxicab", "max"])
    def test_random_pairs(self, name):
        q = core.random_quadruples(10_000, seed=42)
        d = core.symmetry_defects(core.norm_sum(name), q[:, 0], q[:, 1])
        assert d.max() <= core.SYMMETRY_TOL

    def test_dimension_mismatch(self, spec):
        with pytest.raises(DimensionError):
            core.symmetry_defect(spec, (0, 0), (0, 0, 0))


class TestBalls:
    def test_boundary_point(self, spec):
        assert core.ball_contains(Ball((0, 0), SQRT8, closed=True), spec, (1, 1))
        assert not core.ball_contains(Ball((0, 0), SQRT8, closed=False), spec, (1, 1))

    @pytest.mark.parametrize("closed", [True, False])
    def test_center_inside(self, spec, closed):
        assert core.ball_contains(Ball((3, -1), 0.5, closed), spec, (3, -1))

    def test_zero_radius_open_ball_is_empty(self, spec):
        assert not core.ball_contains(Ball((0, 0), 0.0, closed=False), spec, (0, 0))

    def test_negative_radius(self):
        with pytest.raises(DomainError):
            Ball((0, 0), -1.0)

    def test_dimension_mismatch(self, spec):
        with pytest.raises(DimensionError):
            core.ball_contains(Ball((0, 0), 1.0), spec, (0, 0, 0))

    def test_monotone_in_radius(self, spec):
        rng = np.random.default_rng(11)
        for y in rng.uniform(-3, 3, (200, 2)):
            inside = [core.ball_contains(Ball((0, 0), r), spec, y) for r in (0.5, 1, 2, 4, 8)]
            assert inside == sorted(inside)


class TestConvergencePrefix:
    def test_constant_holds(self, spec):
        v = core.is_convergent_prefix(spec, sq.constant((5, 5)), (5, 5), n_max=10_000)
        assert v.verdict is Verdict.HOLDS
        assert all(last == 0 for _, last in v.per_eps)

    def test_example_3_1_fails(self, spec, ex31):
        v = core.is_convergent_prefix(spec, ex31, (0, 0), n_max=10**6)
        assert v.verdict is Verdict.FAILS
        assert dict(v.per_eps)[1.0] == 10**6
        assert math.isqrt(v.witness) ** 2 == v.witness

    def test_reciprocal_holds(self, spec):
        v = core.is_convergent_prefix(spec, sq.reciprocal((0, 0), (1, 0)), (0, 0), n_max=100_000)
        assert v.verdict is Verdict.HOLDS
        # S = 2/n, so the last exceedance of eps is floor(2 / eps)
        for eps, last in v.per_eps:
            assert last == math.floor(2 / eps + 1e-12)

    def test_late_isolated_exceedance_is_inconclusive(self, spec):
        seq = sq.spike_on(Finite((900,)), (5, 5), (0, 0))
        assert core.is_convergent_prefix(spec, seq, (0, 0), n_max=1_000).verdict is Verdict.INCONCLUSIVE

    def test_bad_eps_schedule(self, spec, ex31):
        with pytest.raises(UsageError):
            core.is_convergent_prefix(spec, ex31, (0, 0), eps_schedule=(0.1, 1.0), n_max=1000)
        with pytest.raises(UsageError):
            core.is_convergent_prefix(spec, ex31, (0, 0), eps_schedule=(1.0, -1.0), n_max=1000)

    def test_tail_blocks_are_dyadic(self):
        assert core.tail_blocks(1600) == [(800, 1600), (400, 800), (200, 400), (100, 200)]


class TestRoughLimit:
    def test_example_4_1_fails(self, spec, ex41):
        for c in [(0, 0), (1, 1)]:
            v = core.rough_limit_check(spec, ex41, c, SQRT8, n_max=100_000)
            assert v.verdict is Verdict.FAILS

    @pytest.mark.parametrize("r", [0.0, 0.3, 5.0])
    def test_constant_holds(self, spec, r):
        assert core.rough_limit_check(spec, sq.constant((2, 3)), (2, 3), r, n_max=5_000).verdict is Verdict.HOLDS

    def test_alternating_holds_at_two_root_two(self, spec):
        alt = sq.periodic([(0, 0), (1, 1)])
        assert core.rough_limit_check(spec, alt, (0, 0), SQRT8, n_max=10_000).verdict is Verdict.HOLDS
        assert core.rough_limit_check(spec, alt, (0, 0), 1.5, n_max=10_000).verdict is Verdict.FAILS

    def test_gap_only_below_coarsest_eps_is_inconclusive(self, spec):
        # 2.5 + 0.1 < 2*sqrt(2) < 2.5 + 1: recurring misses at fine tolerances only
        alt = sq.periodic([(0, 0), (1, 1)])
        v = core.rough_limit_check(spec, alt, (0, 0), 2.5, n_max=10_000)
        assert v.verdict is Verdict.INCONCLUSIVE
        assert dict(v.per_eps)[1.0] == 0 and dict(v.per_eps)[0.1] == 10_000

    def test_negative_r(self, spec, ex41):
        with pytest.raises(DomainError):
            core.rough_limit_check(spec, ex41, (0, 0), -0.1)

    @pytest.mark.parametrize(
        "seq,c",
        [
            (sq.paper_example_3_1(), (0, 0)),
            (sq.constant((1, 2)), (1, 2)),
            (sq.reciprocal((1, 1), (0, 1)), (1, 1)),
            (sq.spike_on(Finite((900,)), (5, 5), (0, 0)), (0, 0)),
        ],
    )
    def test_r_zero_reduces_to_convergence(self, spec, seq, c):
        a = core.rough_limit_check(spec, seq, c, 0.0, n_max=1_000)
        b = core.is_convergent_prefix(spec, seq, c, n_max=1_000)
        assert a.verdict is b.verdict and a.per_eps == b.per_eps


class TestCauchy:
    def test_constant(self, spec):
        assert core.is_cauchy_prefix(spec, sq.constant((1, 1)), n_max=10_000).verdict is Verdict.HOLDS

    def test_example_3_1_fails_with_square_witness(self, spec, ex31):
        v = core.is_cauchy_prefix(spec, ex31, n_max=100_000)
        assert v.verdict is Verdict.FAILS
        assert any(math.isqrt(i) ** 2 == i for i in v.witness)

    def test_reciprocal_holds(self, spec):
        assert core.is_cauchy_prefix(spec, sq.reciprocal((0, 0), (1, 0)), n_max=100_000).verdict is Verdict.HOLDS

    def test_periodic_fails(self, spec):
        assert core.is_cauchy_prefix(spec, sq.periodic([(0, 0), (1, 1)]), n_max=10_000).verdict is Verdict.FAILS

    def test_seed_reproducible(self, spec, ex31):
        a = core.is_cauchy_prefix(spec, ex31, n_max=10_000, seed=3)
        b = core.is_cauchy_prefix(spec, ex31, n_max=10_000, seed=3)
        assert a == b


class TestBoundedness:
    def test_constant(self, spec):
        v = core.is_s_bounded_prefix(spec, sq.constant((4, 4)), n_max=10_000)
        assert v.bounded and v.radius == pytest.approx(0.0, abs=1e-8)

    def test_example_3_1_unbounded(self, spec, ex31):
        v = core.is_s_bounded_prefix(spec, ex31, n_max=10**6)
        assert not v.bounded and v.verdict is Verdict.FAILS
        assert any(math.isqrt(i) ** 2 == i for i in v.witness)
        maxima = [m for _, m in v.running_max]
        assert maxima == sorted(maxima) and maxima[-1] > 2 * maxima[0]

    def test_alternating_radius(self, spec):
        vals = [(0, 0), (1, 1)]
        exhaustive = max(s_direct(a, a, b) for a, b in itertools.product(vals, vals))
        v = core.is_s_bounded_prefix(spec, sq.periodic(vals), n_max=10_000)
        assert v.bounded and v.radius >= exhaustive >= SQRT8 - 1e-12

    def test_linear_unbounded(self, spec):
        assert not core.is_s_bounded_prefix(spec, sq.linear((1, 0)), n_max=10_000).bounded

    def test_spike_on_cubes(self, spec):
        seq = sq.spike_on(PolynomialImage(3), (7, 7), (0, 0))
        assert core.is_s_bounded_prefix(spec, seq, n_max=10_000).bounded
