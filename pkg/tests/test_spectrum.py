"""Tests for channel sets, the noise indicator and the stability check."""

import math
from itertools import product

import numpy as np
import pytest
from scipy import integrate, stats

from wbansim.spectrum import (
    EMPTY,
    G,
    NUM_CHANNELS,
    ZIGBEE_BANDWIDTH_HZ,
    ChannelSet,
    ChannelVerdict,
    NoiseModel,
    Verdict,
    check_channel,
    classify_channel,
    compute_us,
    is_stable,
    noise_pdf,
    noise_power_indicator,
    region_probability,
    select_stable_channel,
    sense_channel,
    shannon_capacity,
)
from wbansim.engine import ContractError


def test_channel_set_basics():
    """ChannelSet should behave like a small sorted set."""
    s = ChannelSet.of([5, 1, 5, 12])
    assert list(s) == [1, 5, 12]
    assert len(s) == 3
    assert 5 in s and 6 not in s
    assert np.int64(12) in s
    assert "5" not in s
    assert repr(s) == "ChannelSet({1, 5, 12})"


def test_channel_set_algebra():
    """Union, intersection, difference and complement should match Python sets."""
    a = ChannelSet.of([0, 1, 2, 3])
    b = ChannelSet.of([2, 3, 4])
    assert set(a | b) == {0, 1, 2, 3, 4}
    assert set(a & b) == {2, 3}
    assert set(a - b) == {0, 1}
    assert set(a.complement()) == set(range(NUM_CHANNELS)) - {0, 1, 2, 3}
    assert len(G) == NUM_CHANNELS
    assert not EMPTY
    assert a.add(9).discard(0) == ChannelSet.of([1, 2, 3, 9])


def test_channel_out_of_range_rejected():
    """Indices outside 0..15 are contract violations."""
    with pytest.raises(ContractError):
        check_channel(16)
    with pytest.raises(ContractError):
        ChannelSet.of([-1])
    with pytest.raises(ContractError):
        ChannelSet(1 << NUM_CHANNELS)


def test_compute_us_exhaustive():
    """US equals G minus LCH and the default channel for every LCH mask and default."""
    full = (1 << NUM_CHANNELS) - 1
    for mask in range(1 << NUM_CHANNELS):
        lch = ChannelSet(mask)
        for default in range(NUM_CHANNELS):
            us = compute_us(G, lch, default)
            assert us.mask == full & ~mask & ~(1 << default)


def test_compute_us_all_taken():
    """When LCH covers everything but the default channel, US is empty."""
    lch = G.discard(7)
    assert compute_us(G, lch, 7) == EMPTY


def test_compute_us_rejects_foreign_default():
    """The default channel must belong to G."""
    with pytest.raises(ContractError):
        compute_us(ChannelSet.of([1, 2]), EMPTY, 5)


def test_noise_power_indicator():
    """The indicator is the mean square of exactly 2u samples."""
    assert noise_power_indicator([1, -1, 2, 0], 2) == pytest.approx(1.5)
    with pytest.raises(ContractError):
        noise_power_indicator([1, 2, 3], 2)


@pytest.mark.parametrize("u", [1, 2, 5, 10])
def test_noise_pdf_integrates_to_one(u):
    """The density should integrate to 1 over [0, inf)."""
    total, _ = integrate.quad(noise_pdf, 0, math.inf, args=(u,))
    assert total == pytest.approx(1.0, rel=1e-7)


@pytest.mark.parametrize("u", [1, 3, 5])
def test_noise_pdf_matches_gamma(u):
    """The density should be Gamma(shape=u, rate=u)."""
    for y in (0.1, 0.5, 1.0, 2.5):
        assert noise_pdf(y, u) == pytest.approx(stats.gamma.pdf(y, a=u, scale=1 / u), rel=1e-10)


def test_noise_pdf_at_zero():
    """At y=0 the density is 1 for u=1 and 0 otherwise."""
    assert noise_pdf(0.0, 1) == 1.0
    assert noise_pdf(0.0, 4) == 0.0


def test_region_probabilities_sum_to_one():
    """The three regions partition the indicator's support."""
    for u, scale in product((1, 2, 5), (0.5, 1.0, 3.0)):
        model = NoiseModel(u=u)
        total = sum(region_probability(j, model, scale) for j in (1, 2, 3))
        assert total == pytest.approx(1.0, abs=1e-7)


def test_region_probability_closed_form_u1():
    """For u=1 region masses are exponential differences."""
    model = NoiseModel(u=1, lambda1=0.5, lambda2=2.0)
    assert region_probability(1, model) == pytest.approx(1 - math.exp(-0.5))
    assert region_probability(2, model) == pytest.approx(math.exp(-0.5) - math.exp(-2.0))
    assert region_probability(3, model) == pytest.approx(math.exp(-2.0))


def test_region_probability_matches_gamma_cdf():
    """For u>1 the integrated mass should match the Gamma CDF."""
    model = NoiseModel(u=5, lambda1=1.5, lambda2=3.0)
    cdf = lambda x: stats.gamma.cdf(x, a=5, scale=1 / 5)  # noqa: E731
    assert region_probability(1, model) == pytest.approx(cdf(1.5), rel=1e-7)
    assert region_probability(2, model) == pytest.approx(cdf(3.0) - cdf(1.5), rel=1e-7)


def test_region_probability_rejects_bad_index():
    """Only regions 1, 2 and 3 exist."""
    with pytest.raises(ContractError):
        region_probability(0, NoiseModel())
    with pytest.raises(ContractError):
        region_probability(4, NoiseModel())


def test_noise_model_check():
    """Thresholds must satisfy 0 < λ1 < λ2."""
    with pytest.raises(ContractError):
        NoiseModel(lambda1=3.0, lambda2=1.5).check()
    with pytest.raises(ContractError):
        NoiseModel(lambda1=0.0).check()
    with pytest.raises(ContractError):
        NoiseModel(u=0).check()
    assert NoiseModel().check() == NoiseModel()


def test_classify_regions_are_right_open():
    """Boundary values belong to the upper region."""
    model = NoiseModel(lambda1=1.5, lambda2=3.0)
    assert classify_channel(0.0, model).verdict is Verdict.USABLE
    assert classify_channel(1.4999, model).verdict is Verdict.USABLE
    assert classify_channel(1.5, model).verdict is Verdict.USABLE_WITH_BOOST
    assert classify_channel(3.0, model).verdict is Verdict.UNUSABLE
    with pytest.raises(ContractError):
        classify_channel(-0.1, model)


def test_boosted_channel_reports_capacity():
    """A boosted channel carries a Shannon capacity estimate."""
    verdict = classify_channel(2.0, NoiseModel())
    assert verdict.usable
    assert verdict.capacity_bps == pytest.approx(ZIGBEE_BANDWIDTH_HZ * math.log2(1.5))
    assert classify_channel(0.5, NoiseModel()).capacity_bps is None


def test_shannon_capacity():
    """Capacity is B·log2(1 + SNR)."""
    assert shannon_capacity(2e6, 1.0) == pytest.approx(2e6)
    assert shannon_capacity(2e6, 0.0) == 0.0
    with pytest.raises(ContractError):
        shannon_capacity(0, 1.0)


def test_is_stable_depends_on_scale():
    """A quiet channel is stable; a heavily scaled one is not."""
    model = NoiseModel().with_scale(4, 3.0)
    assert is_stable(0, model, 0.9)
    assert not is_stable(4, model, 0.9)
    assert is_stable(4, model, 0.0)


def test_is_stable_threshold_one():
    """With threshold 1 only channels whose usable mass rounds to 1 are stable."""
    model = NoiseModel(u=1, lambda1=0.5, lambda2=2.0)
    assert not is_stable(0, model, 1.0)


def test_with_scales_validation():
    """Per-channel scales need one positive value per channel."""
    with pytest.raises(ContractError):
        NoiseModel().with_scales([1.0] * 3)
    with pytest.raises(ContractError):
        NoiseModel().with_scale(0, 0.0)
    model = NoiseModel().with_scales([2.0] * NUM_CHANNELS)
    assert model.scale(15) == 2.0


def test_sense_channel_distribution():
    """Sensed indicators should follow Gamma(u, u) scaled by the channel's noise scale."""
    model = NoiseModel(u=5).with_scale(2, 2.0)
    rng = np.random.default_rng(11)
    draws = np.array(
        [noise_power_indicator(rng.standard_normal(10) * math.sqrt(2.0), 5) for _ in range(4000)]
    )
    result = stats.kstest(draws, stats.gamma(a=5, scale=2.0 / 5).cdf)
    assert result.pvalue > 0.001

    verdict = sense_channel(2, model, np.random.default_rng(0))
    assert isinstance(verdict, ChannelVerdict)


@pytest.mark.parametrize("u", [1, 4])
def test_indicator_histogram_matches_density(u):
    """A histogram of 10^5 indicators fits the density in 20 equiprobable bins."""
    rng = np.random.default_rng(100 + u)
    n = 100_000
    draws = np.array([noise_power_indicator(rng.standard_normal(2 * u), u) for _ in range(n)])

    edges = stats.gamma.ppf(np.linspace(0.0, 1.0, 21), a=u, scale=1 / u)
    observed = np.bincount(np.searchsorted(edges[1:-1], draws, side="right"), minlength=20)
    mass = np.array(
        [integrate.quad(noise_pdf, lo, hi, args=(u,))[0] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    assert mass.sum() == pytest.approx(1.0, abs=1e-6)

    result = stats.chisquare(observed, n * mass / mass.sum())
    assert result.pvalue > 0.01


def test_select_stable_channel_scans_in_order():
    """The scan stops at the first usable and stable channel."""
    model = NoiseModel().with_scale(3, 10.0)
    verdicts = {
        1: ChannelVerdict(Verdict.UNUSABLE, 5.0),
        3: ChannelVerdict(Verdict.USABLE, 0.5),
        6: ChannelVerdict(Verdict.USABLE_WITH_BOOST, 2.0, 1e6),
        9: ChannelVerdict(Verdict.USABLE, 0.1),
    }
    result = select_stable_channel([1, 3, 6, 9], model, 0.9, verdicts.__getitem__)
    # 1 is unusable, 3 is usable but unstable under its scale
    assert result.channel == 6
    assert result.sensed == (1, 3, 6)


def test_select_stable_channel_exhausted():
    """When nothing qualifies the result carries no channel but every sensed one."""
    result = select_stable_channel(
        [0, 1], NoiseModel(), 0.9, lambda c: ChannelVerdict(Verdict.UNUSABLE, 9.0)
    )
    assert result.channel is None
    assert result.sensed == (0, 1)


def test_select_stable_channel_needs_candidates():
    """An empty candidate list is a contract violation."""
    with pytest.raises(ContractError):
        select_stable_channel([], NoiseModel(), 0.9, lambda c: ChannelVerdict(Verdict.USABLE, 0.1))
