import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsespike.priors import EmptyRequestError, Prior, PriorKind, moments, rng_for, sample

rhos = st.floats(min_value=1e-12, max_value=1.0, allow_nan=False)


@pytest.mark.parametrize("prior, expected", [
    (Prior.bernoulli(0.1), (0.1, 0.1, 0.09)),
    (Prior.bernoulli_rademacher(0.1), (0.0, 0.1, 0.1)),
    (Prior.gaussian(), (0.0, 1.0, 1.0)),
])
def test_moments_examples(prior, expected):
    assert moments(prior) == pytest.approx(expected, abs=1e-15)


def test_degenerate_bernoulli_samples_ones():
    np.testing.assert_array_equal(sample(Prior.bernoulli(1.0), 5, seed=3), np.ones(5))


@pytest.mark.parametrize("rho", [0.0, -0.1, 1.5, float("nan")])
def test_rho_out_of_range_rejected(rho):
    with pytest.raises(ValueError):
        Prior.bernoulli(rho)


def test_empty_sample_rejected():
    with pytest.raises(EmptyRequestError):
        sample(Prior.bernoulli(0.1), 0, seed=1)


def test_bernoulli_mean_clt_band():
    x = sample(Prior.bernoulli(0.1), 10**6, seed=2024)
    assert abs(x.mean() - 0.1) <= 3 * math.sqrt(0.09 / 10**6)


def test_bernoulli_rademacher_is_symmetric_and_sparse():
    x = sample(Prior.bernoulli_rademacher(0.2), 400_000, seed=7)
    assert set(np.unique(x)) <= {-1.0, 0.0, 1.0}
    assert abs(np.mean(x != 0) - 0.2) < 5 * math.sqrt(0.16 / x.size)
    assert abs(x.mean()) < 5 * math.sqrt(0.2 / x.size)


@given(rho=rhos, kind=st.sampled_from([PriorKind.BERNOULLI, PriorKind.BERNOULLI_RADEMACHER]))
def test_atoms_normalised_and_match_moments(rho, kind):
    prior = Prior(kind, rho)
    probs = [p for _, p in prior.atoms]
    assert math.fsum(probs) == pytest.approx(1.0, abs=1e-15)
    second = math.fsum(p * v * v for v, p in prior.atoms)
    assert second == pytest.approx(moments(prior)[1], abs=1e-15)


def test_atom_log_probs_exact_for_tiny_rho():
    _, logp = Prior.bernoulli(1e-12).atom_arrays()
    assert logp[0] == math.log1p(-1e-12)
    assert logp[1] == math.log(1e-12)


def test_gaussian_forces_unit_rho():
    assert Prior(PriorKind.GAUSSIAN, 0.3).rho == 1.0
    assert not Prior.gaussian().is_discrete


@settings(max_examples=25)
@given(seed=st.integers(0, 2**63), index=st.integers(0, 1000))
def test_sampling_reproducible(seed, index):
    p = Prior.bernoulli_rademacher(0.3)
    np.testing.assert_array_equal(sample(p, 50, seed, index), sample(p, 50, seed, index))


def test_streams_are_schedule_independent():
    # drawing stream 0 first, or never, does not change stream 5
    first = rng_for(11, 5).random(4)
    rng_for(11, 0).random(1000)
    np.testing.assert_array_equal(rng_for(11, 5).random(4), first)
    assert not np.array_equal(rng_for(11, 4).random(4), first)


def test_config_round_trip():
    for p in (Prior.bernoulli(0.01), Prior.bernoulli_rademacher(0.5), Prior.gaussian()):
        assert Prior.from_config(p.to_config()) == p
    assert Prior.from_config({"kind": "gaussian"}) == Prior.gaussian()
    with pytest.raises(ValueError):
        Prior.from_config({"kind": "laplace", "rho": 0.1})
