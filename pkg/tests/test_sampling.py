"""Deterministic seeding, batching, and tie-break plumbing."""

import numpy as np
import pytest

from adpricing.sampling import (
    BATCH_SIZE,
    MeanSE,
    batch_layout,
    batch_rng,
    draw_rates,
    mean_se,
    rate_role,
    run_batched,
    tie_uniforms,
    winner_tiebreak,
)

from conftest import default_specs, make_game


def test_batch_layout_partitions():
    layout = batch_layout(10 * BATCH_SIZE + 17, BATCH_SIZE)
    assert sum(size for _, size in layout) == 10 * BATCH_SIZE + 17
    assert all(size <= BATCH_SIZE for _, size in layout)
    assert [idx for idx, _ in layout] == list(range(len(layout)))
    assert layout == batch_layout(10 * BATCH_SIZE + 17, BATCH_SIZE)
    assert batch_layout(5, BATCH_SIZE) == [(0, 5)]
    with pytest.raises(ValueError):
        batch_layout(0)


def test_batch_rng_keys():
    a = batch_rng(1, 2, 3, 4).random(8)
    b = batch_rng(1, 2, 3, 4).random(8)
    c = batch_rng(1, 2, 3, 5).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert rate_role(2, 1) != rate_role(1, 2)


def _keyed_sum(n, threads):
    def batch_fn(b_idx, size):
        x = batch_rng(11, 5, b_idx, 0).random(size)
        return {"s": x.sum(), "q": (x * x).sum()}

    return run_batched(n, batch_fn, threads=threads)


@pytest.mark.parametrize("n", [100, BATCH_SIZE, 3 * BATCH_SIZE + 7])
def test_run_batched_worker_count_is_invisible(n):
    base = _keyed_sum(n, 1)
    assert _keyed_sum(n, 2) == base
    assert _keyed_sum(n, 8) == base


def test_draw_rates_shape_and_determinism():
    game = make_game(default_specs())
    r1 = draw_rates(game, seed=3, stream=1, batch=0, size=64)
    r2 = draw_rates(game, seed=3, stream=1, batch=0, size=64)
    assert r1.shape == (2, 2, 64)
    assert np.array_equal(r1, r2)
    assert not np.array_equal(r1[0, 0], r1[1, 0])  # advertisers get own streams
    assert not np.array_equal(r1, draw_rates(game, seed=4, stream=1, batch=0, size=64))
    assert (r1 >= 0).all() and (r1 <= 1).all()


def test_tie_uniforms_deterministic():
    u = tie_uniforms(9, 2, 0, 32)
    assert np.array_equal(u, tie_uniforms(9, 2, 0, 32))
    assert u.shape == (32,)
    assert (u >= 0).all() and (u < 1).all()


def test_winner_tiebreak_unique_max():
    scores = np.array([[1.0, 5.0, 2.0], [3.0, 4.0, 2.5]])
    w = winner_tiebreak(scores, np.array([0.99, 0.0, 0.5]))
    assert w.tolist() == [1, 0, 1]


def test_winner_tiebreak_splits_ties():
    scores = np.tile(np.array([[2.0], [2.0], [1.0]]), (1, 9))
    u = np.array([0.0, 0.1, 0.49, 0.499, 0.5, 0.51, 0.9, 0.999, 1.0 - 1e-16])
    w = winner_tiebreak(scores, u)
    assert set(w.tolist()) <= {0, 1}
    assert w.tolist() == [0, 0, 0, 0, 1, 1, 1, 1, 1]


def test_winner_tiebreak_frequencies():
    n = 40_000
    scores = np.ones((2, n))
    u = batch_rng(5, 1, 0, 0).random(n)
    share = np.mean(winner_tiebreak(scores, u) == 0)
    assert abs(share - 0.5) < 0.01


def test_mean_se_matches_numpy():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    ms = mean_se(x.sum(), (x * x).sum(), len(x))
    assert ms.mean == pytest.approx(x.mean(), rel=1e-15)
    assert ms.se == pytest.approx(x.std(ddof=1) / np.sqrt(len(x)), rel=1e-12)
    assert ms.n == 4
    degenerate = mean_se(4.0, 4.0, 4)  # all-ones sample
    assert degenerate == MeanSE(1.0, 0.0, 4)
