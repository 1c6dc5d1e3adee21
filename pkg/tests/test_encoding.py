import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labeldiv.binning import DiscretizationEnsemble, Interval, equal_width_base, randomized_bins
from labeldiv.encoding import Sample, encode_batch, encode_samples, overlap_matrices
from labeldiv.errors import OutOfRangeError


def test_age_labels(ages_ensemble):
    batch = encode_batch(np.zeros((1, 3)), [27.3], ages_ensemble)
    assert batch.labels[0, 0] == 1
    assert batch.labels[0, 1] == 2


def test_single_head_is_base_lookup(ages_base, rng):
    ens = DiscretizationEnsemble([ages_base], ages_base)
    t = rng.uniform(21, 61, size=500)
    batch = encode_batch(np.zeros((500, 2)), t, ens)
    np.testing.assert_array_equal(batch.labels[:, 0], np.floor(t - 21).astype(int))


def test_empty(ages_ensemble):
    batch = encode_samples([], ages_ensemble)
    assert len(batch) == 0
    assert batch.labels.shape == (0, 5)


def test_samples_preserve_order(ages_ensemble):
    samples = [Sample(np.array([float(i)]), t) for i, t in enumerate([60.0, 21.0, 40.5])]
    batch = encode_samples(samples, ages_ensemble)
    np.testing.assert_array_equal(batch.features[:, 0], [0, 1, 2])
    assert batch.labels[0, 0] == 7 and batch.labels[1, 0] == 0


def test_out_of_range_names_sample(ages_ensemble):
    with pytest.raises(OutOfRangeError, match="sample 2"):
        encode_batch(np.zeros((3, 1)), [30, 40, 70], ages_ensemble)


def test_one_hot(ages_ensemble):
    batch = encode_batch(np.zeros((4, 1)), [21, 27.3, 44, 61], ages_ensemble)
    for m in range(ages_ensemble.M):
        q = batch.one_hot(m)
        np.testing.assert_array_equal(q.sum(axis=1), 1.0)
        np.testing.assert_array_equal(q.argmax(axis=1), batch.labels[:, m])


def test_overlap_examples(ages_ensemble, ages_base):
    O = overlap_matrices(ages_ensemble)
    np.testing.assert_allclose(O[0][0, :5], 0.2)
    assert np.all(O[0][0, 5:] == 0)
    row = O[1][0]
    assert row[0] == 1.0 and np.all(row[1:] == 0)
    ident = overlap_matrices(DiscretizationEnsemble([ages_base], ages_base))[0]
    np.testing.assert_array_equal(ident, np.eye(40))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 80), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_overlap_rows_stochastic(K, M, seed):
    base = equal_width_base(Interval(-3.7, 11.2), K)
    ens = randomized_bins(base, max(1, K // 2), M, seed)
    for O, d in zip(overlap_matrices(ens), ens.members):
        assert O.shape == (len(d), K)
        assert np.all((O >= 0) & (O <= 1))
        np.testing.assert_allclose(O.sum(axis=1), 1.0, atol=1e-9)
