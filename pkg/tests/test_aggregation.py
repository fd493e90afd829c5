"""Parallel aggregation of sub-generators built on sample partitions."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import bregmc as bm

from conftest import random_natural_gaussian, rel_err


@pytest.fixture(scope="module")
def mix_setup(request):
    fam = bm.MixtureFamily([bm.gaussian(-2.0, 1.0), bm.laplace(0.0, 1.0),
                            bm.cauchy(2.0, 1.0)])
    prop = bm.uniform_mixture_proposal(fam)
    full_sample = bm.draw_sample_set(prop, 4_000, 13, fam)
    full = bm.build_mc_mixture_generator(fam, full_sample)
    return fam, full_sample, full


@pytest.fixture(scope="module")
def exp_setup():
    ef = bm.polynomial_ef([1, 2])
    prop = bm.uniform_interval_proposal(-8.0, 8.0)
    full_sample = bm.draw_sample_set(prop, 4_000, 14, ef)
    full = bm.build_mc_exponential_generator(ef, full_sample)
    return ef, full_sample, full


def _mixture_parts(fam, sample, sizes):
    total = sample.size
    return [(bm.build_mc_mixture_generator(fam, block), s / total)
            for block, s in zip(sample.split(sizes), sizes)]


def _exponential_parts(ef, sample, sizes):
    total = sample.size
    return [(bm.build_mc_exponential_generator(ef, block), s / total)
            for block, s in zip(sample.split(sizes), sizes)]


def test_single_part_is_identity(mix_setup, exp_setup):
    fam, sample, full = mix_setup
    agg = bm.aggregate_mixture_generators([(full, 1.0)])
    assert agg is full
    ef, esample, efull = exp_setup
    eagg = bm.aggregate_exponential_generators([(efull, 1.0)])
    assert eagg is efull


@pytest.mark.parametrize("nblocks", [2, 8])
def test_mixture_aggregation_exact(mix_setup, nblocks):
    fam, sample, full = mix_setup
    sizes = [sample.size // nblocks] * nblocks
    parts = _mixture_parts(fam, sample, sizes)
    agg = bm.aggregate_mixture_generators(parts)
    rng = np.random.default_rng(0)
    for _ in range(100):
        eta = 0.02 + rng.dirichlet(np.ones(3))[:2] * 0.9
        assert rel_err(agg.value(eta), full.value(eta)) <= 1e-12
        assert rel_err(agg.gradient(eta), full.gradient(eta)) <= 1e-12
        assert rel_err(agg.hessian(eta), full.hessian(eta)) <= 1e-12
        # the aggregate also equals the weighted sum of the parts
        wsum = sum(w * g.value(eta) for g, w in parts)
        assert rel_err(agg.value(eta), wsum) <= 1e-12


@pytest.mark.parametrize("nblocks", [2, 8])
def test_exponential_aggregation_exact(exp_setup, nblocks):
    ef, sample, full = exp_setup
    sizes = [sample.size // nblocks] * nblocks
    agg = bm.aggregate_exponential_generators(
        _exponential_parts(ef, sample, sizes))
    rng = np.random.default_rng(1)
    for theta in random_natural_gaussian(rng, 100):
        assert rel_err(agg.value(theta), full.value_unshifted(theta)) <= 1e-12
        assert rel_err(agg.gradient(theta),
                       full.gradient_unshifted(theta)) <= 1e-12
        assert rel_err(agg.hessian(theta), full.hessian(theta)) <= 1e-10


def test_weight_contract_enforced(mix_setup):
    fam, sample, full = mix_setup
    parts = _mixture_parts(fam, sample, [2_000, 2_000])
    bad = [(parts[0][0], 0.6), (parts[1][0], 0.6)]
    with pytest.raises(ValueError, match="sum to 1"):
        bm.aggregate_mixture_generators(bad)
    skew = [(parts[0][0], 0.9), (parts[1][0], 0.1)]
    with pytest.raises(ValueError, match="partition fractions"):
        bm.aggregate_mixture_generators(skew)
    with pytest.raises(ValueError, match="empty"):
        bm.aggregate_mixture_generators([])
    with pytest.raises(ValueError, match="empty"):
        bm.aggregate_exponential_generators([])


def test_mismatched_families_rejected(mix_setup, fig2_family):
    fam, sample, full = mix_setup
    other_prop = bm.uniform_mixture_proposal(fig2_family)
    other = bm.build_mc_mixture_generator(
        fig2_family, bm.draw_sample_set(other_prop, 2_000, 1, fig2_family))
    part = _mixture_parts(fam, sample, [2_000, 2_000])[0][0]
    with pytest.raises(ValueError, match="different families"):
        bm.aggregate_mixture_generators([(part, 0.5), (other, 0.5)])


def test_plain_generator_lacks_affine_data(exp_setup):
    ef, sample, full = exp_setup
    shim = bm.AffineShiftedGenerator(full, np.zeros(2), 0.0)
    shim.sample = full.sample   # same partition bookkeeping, no F-dagger
    shim.family = full.family
    with pytest.raises(ValueError, match="affine reconstruction"):
        bm.aggregate_exponential_generators([(shim, 1.0), ])


def test_results_identical_across_thread_counts(mix_setup):
    fam, sample, full = mix_setup
    agg = bm.aggregate_mixture_generators(
        _mixture_parts(fam, sample, [500] * 8))
    rng = np.random.default_rng(2)
    etas = [0.02 + rng.dirichlet(np.ones(3))[:2] * 0.9 for _ in range(64)]

    def run(workers: int):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(agg.value, etas))

    base = run(1)
    for workers in (2, 8):
        assert run(workers) == base
