import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monoplan.errors import DomainError
from monoplan.measures import (
    PiecewiseAffineMap,
    QuantileVector,
    ScalarMeasure,
    dirac,
    discrete,
    disjoint_pieces,
    mixture,
    pushforward,
    quantile,
    quantile_vector,
    second_moment,
    uniform,
    wasserstein2,
    wasserstein2_squared,
)
from monoplan.oracle import oracle_w2

from strategies import atomic_measures, mixed_measures


class TestConstruction:
    def test_atoms_sorted_and_normalised(self):
        m = ScalarMeasure(((2.0, 1.0), (0.0, 3.0)))
        assert m.atoms == ((0.0, 0.75), (2.0, 0.25))
        assert m.raw_total == 4.0

    def test_close_atoms_merge(self):
        m = ScalarMeasure(((0.0, 0.5), (1e-13, 0.5)))
        assert len(m.atoms) == 1 and m.atoms[0][1] == pytest.approx(1.0)

    def test_zero_masses_dropped(self):
        assert ScalarMeasure(((0.0, 1.0), (1.0, 0.0))).atoms == ((0.0, 1.0),)

    @pytest.mark.parametrize(
        "atoms, pieces",
        [
            (((0.0, -1.0),), ()),
            ((), ((0.0, 1.0, 0.5), (0.5, 2.0, 0.5))),
            ((), ((1.0, 0.0, 1.0),)),
            (((0.0, 0.0),), ()),
        ],
    )
    def test_invalid(self, atoms, pieces):
        with pytest.raises(DomainError):
            ScalarMeasure(atoms, pieces)

    def test_atom_may_sit_inside_piece(self):
        m = ScalarMeasure(((0.5, 1.0),), ((0.0, 1.0, 1.0),))
        assert m.diffuse_mass == pytest.approx(0.5)
        assert m.mean() == pytest.approx(0.5)

    def test_disjoint_pieces_adds_densities(self):
        out = disjoint_pieces([(0.0, 2.0, 1.0), (1.0, 3.0, 1.0)])
        assert out == [(0.0, 1.0, 0.5), (1.0, 2.0, 1.0), (2.0, 3.0, 0.5)]

    def test_mixture(self):
        m = mixture([dirac(0.0), uniform(0.0, 1.0)], [1.0, 3.0])
        assert m.atoms == ((0.0, 0.25),)
        assert m.pieces == ((0.0, 1.0, 0.75),)

    def test_moments(self):
        m = uniform(0.0, 1.0)
        assert m.mean() == pytest.approx(0.5)
        assert m.variance() == pytest.approx(1.0 / 12.0)
        assert m.hull() == (0.0, 1.0)

    def test_tail_second_moment(self):
        assert discrete([1.0, 3.0]).tail_second_moment(2.0) == pytest.approx(4.5)
        assert uniform(-2.0, 2.0).tail_second_moment(1.0) == pytest.approx(2 * (8 - 1) / 3 / 4)

    def test_split_at_keeps_measure(self):
        m = uniform(0.0, 1.0)
        s = m.split_at([0.25, 0.5, 7.0])
        assert len(s.pieces) == 3
        assert wasserstein2(s, m) == pytest.approx(0.0, abs=1e-15)


class TestJson:
    def test_round_trip(self):
        m = ScalarMeasure(((0.0, 0.5),), ((0.0, 1.0, 0.5),))
        d = m.to_dict()
        assert d == {"atoms": [{"x": 0.0, "m": 0.5}], "pieces": [{"a": 0.0, "b": 1.0, "m": 0.5}]}
        assert ScalarMeasure.from_dict(d) == m

    def test_unknown_field_rejected(self):
        with pytest.raises(DomainError):
            ScalarMeasure.from_dict({"atoms": [{"x": 0.0, "m": 1.0, "w": 2}]})
        with pytest.raises(DomainError):
            ScalarMeasure.from_dict({"atoms": [], "extra": 1})


class TestQuantile:
    def test_examples(self):
        assert quantile(dirac(0.0), 0.5) == 0.0
        assert quantile(discrete([0.0, 1.0]), 0.75) == 1.0
        assert quantile(uniform(0.0, 2.0), 0.25) == pytest.approx(0.5)

    def test_generalised_inverse_at_step(self):
        assert quantile(discrete([0.0, 1.0]), 0.5) == 0.0

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
    def test_outside_open_interval(self, s):
        with pytest.raises(DomainError):
            quantile(dirac(0.0), s)

    @given(mixed_measures(), st.lists(st.floats(0.001, 0.999), min_size=2, max_size=10))
    def test_nondecreasing(self, m, ss):
        ss = sorted(ss)
        qs = [quantile(m, s) for s in ss]
        assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))


class TestPushforward:
    def test_examples(self):
        assert pushforward(dirac(2.0), PiecewiseAffineMap.scaling(3.0)) == dirac(6.0)
        assert pushforward(discrete([0.0, 1.0]), PiecewiseAffineMap.translation(1.0)) == discrete([-1.0, 0.0])
        assert pushforward(uniform(0.0, 1.0), PiecewiseAffineMap.scaling(2.0)) == uniform(0.0, 2.0)

    def test_constant_piece_gives_atom(self):
        f = PiecewiseAffineMap(((-math.inf, 0.5, 0.0, 0.0), (0.5, math.inf, 0.0, 1.0)))
        m = pushforward(uniform(0.0, 1.0), f)
        assert m.atoms == ((0.0, 0.5),)
        assert m.pieces == ((0.5, 1.0, 0.5),)

    def test_negative_slope_flips_piece(self):
        assert pushforward(uniform(0.0, 1.0), PiecewiseAffineMap.affine(0.0, -1.0)) == uniform(-1.0, 0.0)

    def test_undefined_region(self):
        f = PiecewiseAffineMap(((0.0, 1.0, 0.0, 1.0),))
        with pytest.raises(DomainError):
            pushforward(discrete([0.5, 2.0]), f)

    def test_clip(self):
        m = pushforward(discrete([-3.0, 0.5, 3.0]), PiecewiseAffineMap.clip(-1.0, 1.0))
        assert m.positions.tolist() == [-1.0, 0.5, 1.0]

    def test_map_first_match_on_shared_endpoint(self):
        f = PiecewiseAffineMap(((-math.inf, 0.0, 1.0, 0.0), (0.0, math.inf, 2.0, 0.0)))
        assert f(0.0) == 1.0
        assert f.breakpoints() == [0.0]


class TestWasserstein:
    def test_examples(self):
        assert wasserstein2(discrete([0.0, 1.0]), discrete([0.0, 1.0])) == 0.0
        assert wasserstein2(discrete([0.0, 1.0]), discrete([0.0, 2.0])) == pytest.approx(math.sqrt(0.5), abs=1e-15)
        assert wasserstein2(dirac(0.0), uniform(0.0, 1.0)) == pytest.approx(math.sqrt(1.0 / 3.0), abs=1e-15)
        assert wasserstein2(dirac(0.0), dirac(3.0)) == 3.0

    def test_uniform_shift(self):
        assert wasserstein2(uniform(0.0, 1.0), uniform(2.0, 3.0)) == pytest.approx(2.0)

    def test_uniform_rescale(self):
        # quantiles s and 2s: int (s)^2 ds = 1/3
        assert wasserstein2_squared(uniform(0.0, 1.0), uniform(0.0, 2.0)) == pytest.approx(1.0 / 3.0)

    def test_second_moment(self):
        assert second_moment(dirac(0.0)) == 0.0
        assert second_moment(discrete([-1.0, 1.0])) == pytest.approx(1.0)
        assert second_moment(uniform(0.0, 1.0)) == pytest.approx(1.0 / 3.0)

    def test_against_numeric_quadrature(self):
        m1 = ScalarMeasure(((0.3, 0.4),), ((-1.0, 0.5, 0.6),))
        m2 = ScalarMeasure(((1.0, 0.2), (2.0, 0.3)), ((0.0, 3.0, 0.5),))
        s = (np.arange(200_000) + 0.5) / 200_000
        q1 = np.array([quantile(m1, t) for t in s[::50]])
        q2 = np.array([quantile(m2, t) for t in s[::50]])
        approx = float(np.mean((q1 - q2) ** 2))
        assert wasserstein2_squared(m1, m2) == pytest.approx(approx, rel=1e-3)

    @given(atomic_measures(), atomic_measures())
    def test_matches_oracle(self, m1, m2):
        assert abs(wasserstein2(m1, m2) - oracle_w2(m1, m2)) < 1e-9

    @given(mixed_measures(), mixed_measures(), mixed_measures())
    def test_metric_axioms(self, a, b, c):
        assert wasserstein2(a, b) == wasserstein2(b, a)
        assert wasserstein2(a, a) == 0.0
        assert wasserstein2(a, c) <= wasserstein2(a, b) + wasserstein2(b, c) + 1e-10

    @given(mixed_measures(), mixed_measures(), st.sampled_from([0.5, 2.0, 10.0]), st.floats(-3, 3))
    def test_scaling_and_translation(self, a, b, lam, u):
        base = wasserstein2(a, b)
        s = PiecewiseAffineMap.scaling(lam)
        t = PiecewiseAffineMap.translation(u)
        assert abs(wasserstein2(pushforward(a, s), pushforward(b, s)) - lam * base) < 1e-10 * max(1, lam * base)
        assert abs(wasserstein2(pushforward(a, t), pushforward(b, t)) - base) < 1e-10 * max(1, base)


class TestQuantileVector:
    @given(atomic_measures())
    def test_round_trip_atomic(self, m):
        q = quantile_vector(m)
        assert q.to_measure().difference(m, 1e-12) is None

    def test_diffuse_grid(self):
        q = quantile_vector(uniform(0.0, 1.0), cells=4)
        np.testing.assert_allclose(q.breakpoints, [0.25, 0.5, 0.75, 1.0])
        np.testing.assert_allclose(q.values, [0.125, 0.375, 0.625, 0.875])

    def test_invalid(self):
        with pytest.raises(DomainError):
            QuantileVector(np.array([0.5, 1.0]), np.array([1.0, 0.0]))
        with pytest.raises(DomainError):
            QuantileVector(np.array([0.5, 0.9]), np.array([0.0, 1.0]))
