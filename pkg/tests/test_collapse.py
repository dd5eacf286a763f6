import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from hypercollapse.beta import BetaSeries, example21
from hypercollapse.collapse import CollapseError, collapse, identifiable_oracle, remove_vertex
from hypercollapse.hypergraph import Hypergraph, sample_poisson


def random_hypergraph(rng: np.random.Generator, n: int) -> Hypergraph:
    coeffs = rng.uniform(0.0, 0.8, size=min(int(rng.integers(2, 5)), n + 1))
    coeffs[1] = rng.uniform(0.05, 0.6)
    return sample_poisson(BetaSeries(tuple(coeffs)), n, rng)


@st.composite
def hypergraphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    edge = st.lists(st.integers(0, n - 1), max_size=min(n, 4), unique=True)
    return Hypergraph(n, draw(st.lists(edge, max_size=3 * n)))


def test_isolated_patches_become_debris():
    h = Hypergraph(3, [[1], [1], [1], [0, 2]])
    r = remove_vertex(h, 1)
    assert r == (3, 0, 3)
    assert h.debris_count == 3 and h.patch_total == 0
    assert h.edge_count == 4


def test_central_vertex_example():
    # centre 0 with a patch, a triangle {0,2,3} and a doubled 2-edge to vertex 1
    h = Hypergraph(4, [[0], [0, 2, 3], [0, 1], [0, 1]])
    r = remove_vertex(h, 0)
    assert r.new_patches == 2 and r.patches_removed == 1
    assert h.patch_count(1) == 2
    assert [2, 3] in h.edges
    assert h.debris_count == 1
    h.check_indices()


def test_three_vertex_fixture():
    h = Hypergraph(3, [[0], [0, 1], [0, 1, 2]])
    remove_vertex(h, 0)
    assert h.subset_counts() == {(): 1, (1,): 1, (1, 2): 1}
    h.check_indices()


def test_remove_vertex_errors():
    h = Hypergraph(3, [[0], [1, 2]])
    with pytest.raises(CollapseError):
        remove_vertex(h, 1)
    remove_vertex(h, 0)
    with pytest.raises(CollapseError):
        remove_vertex(h, 0)
    with pytest.raises(CollapseError):
        remove_vertex(h, 7)


def test_chain_fixture():
    h = Hypergraph(3, [[0], [0, 1], [1, 2]])
    assert identifiable_oracle(h) == {0, 1, 2}
    trace = collapse(h, "lowest")
    assert trace.identifiable_vertices == {0, 1, 2}
    assert [s.vertex for s in trace.steps] == [0, 1, 2]
    assert trace.lambda_star == 3 == trace.terminal_debris


def test_no_patches_is_stable():
    h = Hypergraph(3, [[1, 2]])
    assert identifiable_oracle(h) == frozenset()
    trace = collapse(h, "random", np.random.default_rng(0))
    assert trace.steps == [] and trace.v_star == 0 and trace.lambda_star == 0
    empty = collapse(Hypergraph(0), "lowest")
    assert empty.v_star == 0


def test_collapse_copies_by_default():
    h = Hypergraph(2, [[0], [0, 1]])
    collapse(h, "lowest")
    assert h.patch_total == 1 and h.edges == [[0], [0, 1]]


def test_explicit_order():
    h = Hypergraph(4, [[0], [0, 1], [1, 2], [3, 2, 1]])
    trace = collapse(h, [0, 1, 2, 3])
    assert trace.v_star == 4
    with pytest.raises(CollapseError) as err:
        collapse(h, [0, 2])
    assert err.value.step == 1
    with pytest.raises(CollapseError):
        collapse(h, [0, 1])  # stops early with patches left
    with pytest.raises(CollapseError):
        collapse(Hypergraph(2, [[0]]), [0, 1])  # asks for more than the collapse allows
    with pytest.raises(ValueError):
        collapse(h, "sideways")
    with pytest.raises(ValueError):
        collapse(h, "random")


def test_trace_bookkeeping():
    rng = np.random.default_rng(11)
    h = random_hypergraph(rng, 40)
    trace = collapse(h, "random", rng)
    y, z = trace.y_path(), trace.z_path()
    assert len(trace.steps) == trace.v_star
    assert y[-1] == 0 and np.all(y[:-1] >= 1)
    for k, s in enumerate(trace.steps):
        assert z[k + 1] - z[k] == s.patches_on_vertex == 1 + s.w
        assert y[k + 1] - y[k] == -s.patches_on_vertex + s.new_patches
        assert (y[k + 1] + z[k + 1]) - (y[k] + z[k]) == s.u
    assert trace.rows()[0][:2] == (0, trace.steps[0].vertex)
    assert set(trace.summary()) == {"n_vertices", "v_star", "lambda_star", "debris_final", "seed"}


def test_oracle_matches_collapse_on_random_instances():
    rng = np.random.default_rng(12)
    for _ in range(500):
        h = random_hypergraph(rng, int(rng.integers(1, 41)))
        expected = identifiable_oracle(h)
        for order in ("random", "lowest"):
            trace = collapse(h, order, rng)
            assert trace.identifiable_vertices == expected
            assert trace.terminal_debris == trace.lambda_star


def test_order_invariance_with_explicit_reversal():
    rng = np.random.default_rng(13)
    for _ in range(200):
        h = random_hypergraph(rng, int(rng.integers(2, 30)))
        a = collapse(h, "random", rng)
        b = collapse(h, "lowest")
        assert a.identifiable_vertices == b.identifiable_vertices
        assert a.lambda_star == b.lambda_star
        replay = collapse(h, [s.vertex for s in a.steps])
        assert replay.identifiable_vertices == a.identifiable_vertices


@settings(max_examples=150, deadline=None)
@given(hypergraphs(), st.data())
def test_adding_an_edge_never_shrinks_identifiable_set(h, data):
    n = h.n_vertices
    extra = data.draw(st.lists(st.integers(0, n - 1), max_size=min(n, 3), unique=True))
    before = collapse(h, "lowest").identifiable_vertices
    bigger = h.copy()
    bigger.add_edge(extra)
    assert before <= collapse(bigger, "lowest").identifiable_vertices


@settings(max_examples=150, deadline=None)
@given(hypergraphs())
def test_multiplicity_capping_keeps_identifiable_set(h):
    assert collapse(h.deduplicated(), "lowest").identifiable_vertices == collapse(h, "lowest").identifiable_vertices


@settings(max_examples=150, deadline=None)
@given(hypergraphs(), st.integers(0, 2**32 - 1))
def test_terminal_identity_and_oracle(h, seed):
    trace = collapse(h, "random", np.random.default_rng(seed))
    assert trace.terminal_debris == trace.lambda_star
    assert trace.identifiable_vertices == identifiable_oracle(h)
    assert trace.final_patches == 0


@pytest.mark.slow
def test_example21_large_instance():
    p, alpha = 0.1, 2.0
    root = brentq(lambda z: alpha * z + math.log(1 - z) - math.log(1 - p), 1e-9, 0.99)
    rng = np.random.default_rng(14)
    n = 100_000
    h = sample_poisson(example21(p, alpha), n, rng)
    trace = collapse(h, "random", rng, inplace=True, check=False)
    assert abs(trace.v_star / n - root) < 0.01
