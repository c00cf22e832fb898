import numpy as np
import pytest

from genbound import montecarlo


def draw(rng, size):
    return rng.standard_normal(size)


def test_chunk_sizes():
    assert montecarlo.chunk_sizes(10, 4) == [4, 4, 2]
    assert montecarlo.chunk_sizes(8, 4) == [4, 4]
    assert montecarlo.chunk_sizes(0, 4) == []


def test_worker_count_does_not_change_results(monkeypatch):
    monkeypatch.setenv("GENBOUND_THREADS", "1")
    a = np.concatenate(montecarlo.run_chunked(draw, 10_000, 9, chunk=1000))
    monkeypatch.setenv("GENBOUND_THREADS", "4")
    b = np.concatenate(montecarlo.run_chunked(draw, 10_000, 9, chunk=1000))
    assert np.array_equal(a, b)


def test_bad_thread_env_falls_back(monkeypatch):
    monkeypatch.setenv("GENBOUND_THREADS", "lots")
    assert montecarlo.max_workers() >= 1


def test_substreams_independent():
    a, b = montecarlo.substreams(1, 2)
    assert not np.array_equal(a.standard_normal(5), b.standard_normal(5))


def test_batch_means_se():
    x = np.random.default_rng(0).standard_normal(100_000)
    mean, se = montecarlo.batch_means(x)
    assert se == pytest.approx(1 / np.sqrt(x.size), rel=0.5)
    assert abs(mean) < 4 * se


def test_batch_means_empty():
    with pytest.raises(ValueError):
        montecarlo.batch_means([])
