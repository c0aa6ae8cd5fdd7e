"""Deterministic stream derivation and draw quality."""

import numpy as np

from sewerbench import _kernels
from sewerbench.rng import RngStream, derive_state, derive_stream


def test_same_path_same_draws():
    a = derive_stream(42, (1, 2, 3))
    b = derive_stream(42, (1, 2, 3))
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_sibling_paths_no_first_draw_collision():
    seen = {}
    for i in range(10_000):
        first = derive_stream(42, (7, i)).next_u64()
        assert first not in seen, f"collision between siblings {seen.get(first)} and {i}"
        seen[first] = i


def test_prefix_and_zero_paths_differ():
    assert derive_state(1, (5,)) != derive_state(1, (5, 0))
    assert derive_state(1, ()) != derive_state(1, (0,))
    assert derive_state(1, (1, 2)) != derive_state(1, (2, 1))


def test_spawn_matches_extended_path():
    parent = derive_stream(9, (3,))
    parent.next_u64()  # draws must not affect children
    child = parent.spawn(4, 5)
    direct = derive_stream(9, (3, 4, 5))
    assert [child.next_u64() for _ in range(10)] == [direct.next_u64() for _ in range(10)]


def test_uniform_mean_over_million_draws():
    s = derive_stream(42, (0,))
    total = sum(s.uniform() for _ in range(1_000_000))
    assert 0.499 <= total / 1_000_000 <= 0.501


def test_uniform_range_and_normal_moments():
    s = derive_stream(7, ())
    us = [s.uniform() for _ in range(10_000)]
    assert all(0.0 <= u < 1.0 for u in us)
    zs = np.array([s.normal() for _ in range(50_000)])
    assert abs(zs.mean()) < 0.02
    assert abs(zs.std() - 1.0) < 0.02


def test_numba_mirror_matches_python():
    state = derive_state(42, (1, 2))
    py = RngStream(42, (1, 2))
    compiled = _kernels.sequence_u64(np.uint64(state), 64)
    assert [int(v) for v in compiled] == [py.next_u64() for _ in range(64)]


def test_numba_shuffle_matches_python():
    state = derive_state(11, (4,))
    idx = np.arange(50)
    _kernels.shuffle_indices(idx, np.uint64(state))
    py = list(range(50))
    RngStream(11, (4,)).shuffle(py)
    assert idx.tolist() == py


def test_shuffle_is_permutation():
    s = derive_stream(3, (1,))
    seq = list(range(101))
    s.shuffle(seq)
    assert sorted(seq) == list(range(101))
    assert seq != list(range(101))
