import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monoplan.errors import BaseMismatchError, DomainError, SizeError, UnsupportedCombinationError
from monoplan.instances import random_atomic_base, random_atomic_plan, random_map_plan, random_mixed_base
from monoplan.measures import PiecewiseAffineMap, ScalarMeasure, dirac, discrete, uniform
from monoplan.plans import (
    ConstFiber,
    FiberPlan,
    MapFiber,
    add,
    as_map,
    couple,
    fiber_affine_push,
    glue,
    graph_plan,
    oplus_add,
    plan_second_moment,
    refine,
    scale,
    w_rho,
    w_rho_via_adm,
    zero_plan,
)

HALF = discrete([0.0, 1.0])


def plan(*fibers, base=HALF):
    return FiberPlan(base, tuple(fibers))


class TestFiberPlan:
    def test_fiber_count_checked(self):
        with pytest.raises(DomainError):
            FiberPlan(HALF, (dirac(0.0),))
        with pytest.raises(DomainError):
            FiberPlan(uniform(0.0, 1.0), (), ())

    def test_json_round_trip(self):
        base = ScalarMeasure(((2.0, 0.5),), ((0.0, 1.0, 0.5),))
        p = FiberPlan(base, (discrete([0.0, 9.0]),), (MapFiber(3.0, -7.0),))
        d = p.to_dict()
        assert d["piece_fibers"] == [{"piece": 0, "kind": "map", "a": 3.0, "b": -7.0}]
        assert FiberPlan.from_dict(d) == p
        q = FiberPlan(base, (dirac(1.0),), (ConstFiber(discrete([0.0, 1.0])),))
        assert FiberPlan.from_dict(q.to_dict()) == q

    @pytest.mark.parametrize(
        "doc",
        [
            {"base": {"atoms": [{"x": 0, "m": 1}]}, "atom_fibers": []},
            {"base": {"atoms": [{"x": 0, "m": 1}]}, "atom_fibers": [{"x": 5, "fiber": {"atoms": [{"x": 0, "m": 1}]}}]},
            {"base": {"atoms": [{"x": 0, "m": 1}]}, "atom_fibers": [{"x": 0, "fiber": {"atoms": [{"x": 0, "m": 1}]}}], "zzz": 1},
            {"base": {"pieces": [{"a": 0, "b": 1, "m": 1}]}, "atom_fibers": [], "piece_fibers": [{"piece": 0, "kind": "wave"}]},
            {"base": {"pieces": [{"a": 0, "b": 1, "m": 1}]}, "piece_fibers": [{"piece": 3, "kind": "map", "a": 0, "b": 0}]},
            [],
        ],
    )
    def test_json_rejects(self, doc):
        with pytest.raises(DomainError):
            FiberPlan.from_dict(doc)

    def test_as_map(self):
        assert as_map(ConstFiber(dirac(2.0))) == MapFiber(2.0, 0.0)
        f = ConstFiber(discrete([0.0, 1.0]))
        assert as_map(f) is f


class TestWRho:
    def test_examples(self):
        p1 = plan(dirac(0.0), dirac(0.0))
        assert w_rho(p1, p1) == 0.0
        assert w_rho(p1, plan(dirac(1.0), dirac(3.0))) == pytest.approx(math.sqrt(5.0))
        assert w_rho(p1, plan(discrete([0.0, 2.0]), dirac(0.0))) == pytest.approx(1.0)

    def test_base_mismatch(self):
        with pytest.raises(BaseMismatchError, match="atom"):
            w_rho(plan(dirac(0.0), dirac(0.0)), FiberPlan(dirac(0.0), (dirac(0.0),)))

    def test_map_pieces_closed_form(self):
        base = uniform(0.0, 1.0)
        p1 = FiberPlan(base, (), (MapFiber(0.0, 1.0),))
        p2 = FiberPlan(base, (), (MapFiber(0.0, -1.0),))
        # int_0^1 (2x)^2 dx
        assert w_rho(p1, p2) ** 2 == pytest.approx(4.0 / 3.0)

    def test_map_against_const(self):
        base = uniform(0.0, 1.0)
        p1 = FiberPlan(base, (), (MapFiber(0.0, 1.0),))
        p2 = FiberPlan(base, (), (ConstFiber(discrete([-1.0, 1.0])),))
        # int_0^1 (x^2 + 1) dx
        assert w_rho(p1, p2) ** 2 == pytest.approx(4.0 / 3.0)
        assert w_rho(p2, p1) == w_rho(p1, p2)

    def test_refine_preserves_distance(self, rng):
        base = random_mixed_base(rng)
        p1, p2 = random_map_plan(rng, base), random_map_plan(rng, base)
        cuts = rng.uniform(-3, 3, size=5)
        assert w_rho(refine(p1, cuts), refine(p2, cuts)) == pytest.approx(w_rho(p1, p2), rel=1e-12)

    def test_second_moment(self):
        p = FiberPlan(uniform(0.0, 1.0), (), (MapFiber(1.0, 0.0),))
        assert plan_second_moment(p) == pytest.approx(1.0 / 3.0 + 1.0)


class TestAdm:
    def test_examples(self):
        p1 = plan(dirac(0.0), dirac(0.0))
        assert w_rho_via_adm(p1, p1) == 0.0
        assert w_rho_via_adm(p1, plan(dirac(1.0), dirac(3.0))) == pytest.approx(math.sqrt(5.0))
        assert w_rho_via_adm(p1, plan(discrete([0.0, 2.0]), dirac(0.0))) == pytest.approx(1.0)

    def test_size_bound(self):
        big = discrete(np.arange(9.0))
        with pytest.raises(SizeError):
            w_rho_via_adm(plan(big, dirac(0.0)), plan(big, dirac(0.0)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_quantile_formula(self, seed):
        rng = np.random.default_rng(seed)
        base = random_mixed_base(rng)
        p1, p2 = random_map_plan(rng, base), random_map_plan(rng, base)
        assert abs(w_rho_via_adm(p1, p2) - w_rho(p1, p2)) < 1e-9


class TestAffinePush:
    def test_identity_and_scaling(self, rng):
        p = random_atomic_plan(rng)
        assert fiber_affine_push(p, 0.0, 0.0, 1.0) == p
        q = scale(plan(dirac(2.0), dirac(-1.0)), 3.0)
        assert q.atom_fibers == (dirac(6.0), dirac(-3.0))

    def test_tangent_push_inverse(self, rng):
        p = random_atomic_plan(rng)
        tau = 0.37
        back = fiber_affine_push(fiber_affine_push(p, 0.0, 1.0, tau), 0.0, -1.0 / tau, 1.0 / tau)
        assert w_rho(back, p) < 1e-12

    def test_map_fibers(self):
        p = FiberPlan(uniform(0.0, 1.0), (), (MapFiber(1.0, 2.0),))
        q = fiber_affine_push(p, 0.5, 1.0, 3.0)
        assert q.piece_fibers == (MapFiber(3.5, 7.0),)

    def test_const_fiber_cells(self):
        p = FiberPlan(uniform(0.0, 1.0), (), (ConstFiber(discrete([0.0, 1.0])),))
        q = fiber_affine_push(p, 0.0, 1.0, 1.0, cells=8)
        assert len(q.base.pieces) == 8
        # c1 = 0 stays exact and keeps the piece list
        r = fiber_affine_push(p, 1.0, 0.0, 2.0)
        assert r.base == p.base and r.piece_fibers == (ConstFiber(discrete([1.0, 3.0])),)
        s = fiber_affine_push(p, 1.0, 2.0, 0.0)
        assert s.piece_fibers == (MapFiber(1.0, 2.0),)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 10.0]))
    def test_w_rho_scaling_law(self, seed, lam):
        rng = np.random.default_rng(seed)
        base = random_atomic_base(rng)
        p1, p2 = random_atomic_plan(rng, base), random_atomic_plan(rng, base)
        push = lambda p: fiber_affine_push(p, 0.0, -lam, lam)
        assert abs(w_rho(push(p1), push(p2)) - lam * w_rho(p1, p2)) < 1e-9 * max(1.0, lam)


class TestGluing:
    def test_examples(self):
        p = plan(discrete([0.0, 1.0]), dirac(2.0))
        g = glue(p, p, "comonotone")
        assert g.atom_joints[0].triples() == [(0.0, 0.0, 0.5), (1.0, 1.0, 0.5)]
        assert g.atom_joints[1].triples() == [(2.0, 2.0, 1.0)]
        prod = glue(p, p, "product")
        assert sorted(prod.atom_joints[0].triples()) == [(0.0, 0.0, 0.25), (0.0, 1.0, 0.25), (1.0, 0.0, 0.25), (1.0, 1.0, 0.25)]
        assert add(p, p).atom_fibers == (discrete([0.0, 2.0]), dirac(4.0))

    def test_diracs_add(self):
        assert add(plan(dirac(1.0), dirac(2.0)), plan(dirac(3.0), dirac(-5.0))).atom_fibers == (dirac(4.0), dirac(-3.0))

    @pytest.mark.parametrize("strategy", ["product", "comonotone"])
    def test_marginals_and_identity(self, rng, strategy):
        base = random_mixed_base(rng)
        p1, p2 = random_map_plan(rng, base), random_map_plan(rng, base)
        m1, m2 = glue(p1, p2, strategy).marginals()
        assert w_rho(m1, p1) < 1e-12 and w_rho(m2, p2) < 1e-12
        assert w_rho(oplus_add(glue(p1, zero_plan(base), strategy)), p1) < 1e-12

    def test_map_const_mix_rejected(self):
        base = uniform(0.0, 1.0)
        p1 = FiberPlan(base, (), (MapFiber(0.0, 1.0),))
        p2 = FiberPlan(base, (), (ConstFiber(discrete([0.0, 1.0])),))
        with pytest.raises(UnsupportedCombinationError):
            glue(p1, p2)

    def test_unknown_strategy(self):
        with pytest.raises(DomainError):
            couple(dirac(0.0), dirac(1.0), "random")

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_addition_bound(self, seed):
        rng = np.random.default_rng(seed)
        base = random_atomic_base(rng)
        m1, m2, n1, n2 = (random_atomic_plan(rng, base) for _ in range(4))
        assert w_rho(add(m1, m2), add(n1, n2)) <= w_rho(m1, n1) + w_rho(m2, n2) + 1e-9


def test_graph_plan_splits_base():
    g = PiecewiseAffineMap(((-math.inf, 0.5, 0.0, 1.0), (0.5, math.inf, 2.0, 0.0)))
    p = graph_plan(uniform(0.0, 1.0), g)
    assert p.base.pieces == ((0.0, 0.5, 0.5), (0.5, 1.0, 0.5))
    assert p.piece_fibers == (MapFiber(0.0, 1.0), MapFiber(2.0, 0.0))
