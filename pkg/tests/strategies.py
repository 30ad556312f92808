"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from monoplan.measures import ScalarMeasure, disjoint_pieces

coords = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
weights = st.floats(0.05, 1.0)


@st.composite
def atomic_measures(draw, max_points=8):
    k = draw(st.integers(1, max_points))
    xs = draw(st.lists(coords, min_size=k, max_size=k))
    ms = draw(st.lists(weights, min_size=k, max_size=k))
    return ScalarMeasure(tuple(zip(xs, ms)))


@st.composite
def mixed_measures(draw):
    atoms = draw(st.lists(st.tuples(coords, weights), max_size=3))
    pieces = []
    for a, w, m in draw(st.lists(st.tuples(coords, st.floats(0.1, 2.0), weights), max_size=2)):
        pieces.append((a, a + w, m))
    if not atoms and not pieces:
        atoms = [(0.0, 1.0)]
    return ScalarMeasure(tuple(atoms), tuple(disjoint_pieces(pieces)))
