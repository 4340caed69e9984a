import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fpplab.lattice import (
    Box,
    EdgeRef,
    Environment,
    WeightDist,
    constant_environment,
    diameter,
    double_weights,
    enumerate_sphere,
    extend_environment,
    load_environment,
    reflect_environment,
    restrict_environment,
    sample_environment,
    save_environment,
    set_edge,
    sphere_adjacent_pairs,
)
from fpplab.rng import derive_stream

from conftest import ONE_TWO, random_env, seeds

boxes = st.integers(min_value=2, max_value=3).flatmap(
    lambda d: st.tuples(
        st.lists(st.integers(-3, 1), min_size=d, max_size=d),
        st.lists(st.integers(0, 3), min_size=d, max_size=d),
    ).map(lambda t: Box(tuple(t[0]), tuple(a + b for a, b in zip(t[0], t[1]))))
)


def brute_edges(box):
    verts = set(box.vertices())
    out = set()
    for v in verts:
        for k in range(box.d):
            w = tuple(x + (j == k) for j, x in enumerate(v))
            if w in verts:
                out.add(frozenset((v, w)))
    return out


def test_sphere_counts():
    assert len(enumerate_sphere(Box.cube(2, 2), 1)) == 8
    assert enumerate_sphere(Box.cube(2, 2), 0) == [(0, 0)]
    assert len(enumerate_sphere(Box.cube(3, 2), 2)) == 5**3 - 3**3


def test_sphere_is_lexicographic_and_exact():
    s = enumerate_sphere(Box.cube(2, 4), 3)
    assert s == sorted(s)
    assert all(max(map(abs, v)) == 3 for v in s)


def test_sphere_outside_box_raises():
    with pytest.raises(IndexError):
        enumerate_sphere(Box.cube(2, 2), 3)
    with pytest.raises(ValueError):
        enumerate_sphere(Box.cube(2, 2), -1)


def test_sphere_adjacent_pairs_count():
    # the sup-norm sphere of radius n in 2d is a cycle of 8n vertices
    for n in (1, 2, 3):
        pairs = sphere_adjacent_pairs(Box.cube(2, n), n)
        assert len(pairs) == 8 * n
        assert all(sum(abs(a - b) for a, b in zip(y, z)) == 1 for y, z in pairs)


@given(boxes)
def test_edge_count_matches_brute_force(box):
    assert box.edge_count() == len(brute_edges(box)) == box.topology.m


@given(boxes)
def test_canonical_edges_are_unique(box):
    top = box.topology
    seen = {frozenset((top.coord_list[u], top.coord_list[v])) for u, v in zip(top.eu, top.ev)}
    assert seen == brute_edges(box)
    for eid in range(top.m):
        assert EdgeRef.from_id(box, eid).id_in(box) == eid


@given(boxes)
def test_index_bijection(box):
    assert [box.index(box.vertex(i)) for i in range(box.n_vertices)] == list(range(box.n_vertices))
    assert list(box.vertices()) == sorted(box.vertices())


def test_box_validation():
    with pytest.raises(ValueError):
        Box((0, 1), (1, 0))
    with pytest.raises(ValueError):
        Box((0,), (1,))
    with pytest.raises(IndexError):
        Box.cube(2, 1).index((2, 0))


def test_edgeref_between():
    assert EdgeRef.between((1, 0), (0, 0)) == EdgeRef((0, 0), 0)
    assert EdgeRef.between((0, 0), (0, 1)) == EdgeRef((0, 0), 1)
    with pytest.raises(ValueError):
        EdgeRef.between((0, 0), (1, 1))


def test_weight_dist_validation():
    with pytest.raises(ValueError):
        WeightDist((1, 2), (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(ValueError):
        WeightDist((-1,), (1,))
    d = WeightDist.from_mapping({"1/2": "1/2", "3/2": "1/2"})
    assert d.scale == 2 and d.scaled_atoms == (1, 3)
    assert WeightDist.from_json(d.to_json()) == d


def test_theorem2_flag_requires_full_integer_support():
    WeightDist.from_mapping({0: "1/5", 1: "2/5", 2: "2/5"}, theorem2=True)
    with pytest.raises(ValueError):
        WeightDist.from_mapping({0: "1/2", 2: "1/2"}, theorem2=True)


def test_constant_distribution_gives_constant_weights():
    env = sample_environment(Box.cube(2, 3), WeightDist.constant(1), derive_stream(0, 0))
    assert env.scale == 1 and set(env.wlist) == {1}


@given(seeds)
def test_sampling_is_deterministic(seed):
    a = sample_environment(Box.cube(2, 3), ONE_TWO, derive_stream(seed, 4))
    b = sample_environment(Box.cube(2, 3), ONE_TWO, derive_stream(seed, 4))
    assert a.weights.tobytes() == b.weights.tobytes()


def test_zero_fraction_concentrates():
    dist = WeightDist.from_mapping({0: "1/5", 1: "4/5"})
    box = Box((0, 0), (707, 707))
    assert box.edge_count() >= 10**6
    env = sample_environment(box, dist, derive_stream(2024, 0))
    assert abs(np.mean(env.weights == 0) - 0.2) < 0.002


def test_set_edge_changes_one_weight():
    env = random_env(3)
    e = EdgeRef((0, 0), 1)
    out = set_edge(env, e, 0)
    assert out.weight(e) == 0
    diff = np.flatnonzero(out.weights != env.weights)
    assert set(diff) <= {e.id_in(env.box)}
    assert env.weight(e) == random_env(3).weight(e)
    back = set_edge(out, e, env.weight(e))
    assert back == env and len(back.surgery_log) == 2
    assert np.array_equal(back.replay(), back.weights)
    assert back.unmodified() == env


def test_set_edge_rejects_negative():
    with pytest.raises(ValueError):
        set_edge(random_env(0), 0, -1)


def test_parity_flip_by_one_unit():
    env2 = double_weights(constant_environment(Box.cube(2, 2), 3))
    e = EdgeRef((0, 0), 0)
    half = env2.weight(e) // 2
    assert half % 2 == 1
    out = set_edge(env2, e, env2.weight(e) - 2)
    assert (out.weight(e) // 2) % 2 == 0


@given(seeds, st.integers(1, 6))
def test_reflect_is_involution(seed, n):
    box = Box((n - 4, -2), (4, 2))
    env = sample_environment(box, ONE_TWO, derive_stream(seed, 0))
    assert reflect_environment(reflect_environment(env, n), n) == env


def test_reflect_constant_and_marked_edge():
    n = 4
    box = Box((-2, -2), (n + 2, 2))
    env = constant_environment(box, 1)
    assert reflect_environment(env, n) == env
    marked = set_edge(env, EdgeRef((0, 0), 0), 7)
    ref = reflect_environment(marked, n)
    assert ref.weight(EdgeRef((n - 1, 0), 0)) == 7
    assert int((ref.weights == 7).sum()) == 1


def test_reflect_asymmetric_box_raises():
    with pytest.raises(IndexError):
        reflect_environment(constant_environment(Box((0, 0), (3, 3))), 4)


def test_double_weights():
    env = constant_environment(Box.cube(2, 2), 1)
    env2 = double_weights(env)
    assert env2.scale == 2 and set(env2.wlist) == {2}
    path = [(0, 0), (1, 0), (1, 1)]
    assert env2.physical(env2.path_time(path)) == env.physical(env.path_time(path))
    e3 = double_weights(set_edge(env, 0, 3))
    assert e3.weight(0) // 2 == 3 and e3.physical(e3.weight(0) // 2) == Fraction(3, 2)
    with pytest.raises(OverflowError):
        double_weights(constant_environment(Box.cube(2, 1), 1 << 62))


@given(seeds)
def test_double_preserves_ratios(seed):
    env = random_env(seed)
    env2 = double_weights(env)
    assert np.array_equal(env2.weights, 2 * env.weights)


def test_diameter():
    assert diameter([(0, 0)]) == 0
    assert diameter([(0, 0), (3, 1)]) == 3
    assert diameter([(k, 0) for k in range(6)]) == 5
    with pytest.raises(ValueError):
        diameter([])


def test_save_load_roundtrip(tmp_path):
    env = set_edge(random_env(11), 2, 0)
    p = save_environment(env, tmp_path / "env.fppe")
    assert p.read_bytes()[:4] == b"FPPE"
    back = load_environment(p)
    assert back == env
    assert back.surgery_log == env.surgery_log
    (tmp_path / "bad").write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        load_environment(tmp_path / "bad")


@given(seeds)
def test_extend_then_restrict(seed):
    small = Box.cube(2, 2)
    stream = derive_stream(seed, 0)
    env = sample_environment(small, ONE_TWO, stream)
    big = extend_environment(env, Box.cube(2, 4), ONE_TWO, stream)
    assert restrict_environment(big, small) == env
    assert set(big.wlist) <= {1, 2}


def test_extend_rejects_modified():
    env = set_edge(random_env(0, dist=ONE_TWO), 0, 1)
    with pytest.raises(ValueError):
        extend_environment(env, Box.cube(2, 4), ONE_TWO, derive_stream(0, 0))


def test_environment_validation():
    box = Box.cube(2, 1)
    with pytest.raises(ValueError):
        Environment(box, [1])
    with pytest.raises(ValueError):
        Environment(box, [-1] * box.edge_count())
    env = constant_environment(box)
    with pytest.raises(ValueError):
        env.weights[0] = 5


def test_edge_draw_order_is_canonical():
    box = Box.cube(2, 2)
    dist = WeightDist.uniform(range(1, 40))
    env = sample_environment(box, dist, derive_stream(9, 0))
    stream = derive_stream(9, 0)
    idx = stream.draw_indices(dist.thresholds, box.edge_count())
    assert env.wlist == [dist.scaled_atoms[i] for i in idx]
    top = box.topology
    keys = [(int(u), int(a)) for u, a in zip(top.eu, top.eaxis)]
    assert keys == sorted(keys)
    assert list(itertools.islice(keys, 2)) == [(0, 0), (0, 1)]
