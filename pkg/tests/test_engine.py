"""Auction engine: unit conversions, winner selection, pricing, and the
single/repeated auction paths."""

import numpy as np
import pytest

from adpricing.distributions import Point, Uniform
from adpricing.engine import (
    ZeroPredictedRateError,
    equivalent_bid,
    highest_rival_bid,
    price_per_pay_event,
    run_auction,
    run_repeated,
    select_winner,
)
from adpricing.model import (
    CHAIN_3,
    AdvertiserSpec,
    EventChain,
    PlatformBelief,
    Strategy,
    pricing_model,
)
from adpricing.sampling import batch_rng

from conftest import default_specs, make_game, point_specs

CH3 = EventChain(CHAIN_3)


def test_equivalent_bid_unit_values():
    # bid per conversion at c=0.3, p=0.2 is worth 6 per thousand... per impression
    assert equivalent_bid(pricing_model("CPA", CH3), (0.3, 0.2), 100.0) == 6.0
    assert equivalent_bid(pricing_model("CPC", CH3), (0.3,), 10.0) == 3.0
    assert equivalent_bid(pricing_model("CPM", CH3), (), 7.5) == 7.5
    assert equivalent_bid(pricing_model("OCPC", CH3), (0.3, 0.2), 100.0) == 6.0


def test_equivalent_bid_errors():
    with pytest.raises(ValueError, match="depths"):
        equivalent_bid(pricing_model("CPA", CH3), (0.3,), 100.0)
    with pytest.raises(ValueError, match="bid"):
        equivalent_bid(pricing_model("CPC", CH3), (0.3,), -1.0)


def test_price_per_pay_event_values():
    cpc = pricing_model("CPC", CH3)
    assert price_per_pay_event(cpc, (0.3,), 6.0) == 20.0
    # second-price cap: charge at most the winner's own per-event quote
    ocpc = pricing_model("OCPC", CH3)
    own_e = equivalent_bid(ocpc, (0.3, 0.1), 10.0)
    assert price_per_pay_event(ocpc, (0.3, 0.1), own_e) == 1.0
    cpm = pricing_model("CPM", CH3)
    assert price_per_pay_event(cpm, (), 5.0) == 5.0


def test_price_per_pay_event_zero_rate():
    with pytest.raises(ZeroPredictedRateError):
        price_per_pay_event(pricing_model("CPC", CH3), (0.0,), 6.0)


def test_select_winner_and_rival():
    rng = batch_rng(0, 0, 0, 0)
    w, e_l = select_winner([1.0, 5.0, 2.0], rng)
    assert (w, e_l) == (1, 2.0)
    assert select_winner([4.0], rng) == (0, 0.0)
    assert highest_rival_bid([1.0, 5.0, 2.0], 1) == 2.0
    assert highest_rival_bid([1.0, 5.0, 2.0], 0) == 5.0
    with pytest.raises(ValueError):
        highest_rival_bid([1.0], 0)


def test_select_winner_tie_frequencies():
    rng = batch_rng(12, 0, 0, 0)
    wins = sum(select_winner([3.0, 3.0], rng)[0] for _ in range(20_000))
    assert abs(wins / 20_000 - 0.5) < 0.01
    # a tie pays the full tied price
    _, e_l = select_winner([3.0, 3.0], rng)
    assert e_l == 3.0


def test_run_auction_symmetric_point_game():
    game = make_game(point_specs(), model="OCPC")
    rng = batch_rng(1, 0, 0, 0)
    out = run_auction(game, (Strategy(100.0), Strategy(100.0)), None, rng)
    # equal scores: winner pays the full tied equivalent bid
    assert out.platform_payoff == 6.0
    assert out.social_welfare == 6.0
    assert out.payoffs[out.winner] == 0.0
    assert out.e_loser == 6.0
    assert out.social_welfare - out.platform_payoff - sum(out.payoffs) == 0.0


def test_run_auction_asymmetric_point_game():
    game = make_game(point_specs(c2=0.2, p2=0.1), model="CPA")
    rng = batch_rng(1, 0, 0, 0)
    out = run_auction(game, (Strategy(100.0), Strategy(100.0)), None, rng)
    assert out.winner == 0
    assert out.e_loser == 100.0 * (0.2 * 0.1)
    assert out.platform_payoff == out.e_loser
    assert out.payoffs[0] == 6.0 - out.e_loser
    assert out.payoffs[1] == 0.0


def test_run_auction_realized_mode_consistency():
    game = make_game(point_specs(), model="CPC")
    strategies = (Strategy(20.0), Strategy(18.0))
    total, m = 0.0, 4000
    for k in range(m):
        out = run_auction(game, strategies, None, batch_rng(7, 9, k, 0), mode="realized")
        assert out.social_welfare - out.platform_payoff - sum(out.payoffs) == 0.0
        assert out.events is not None
        total += out.platform_payoff
    analytic = run_auction(game, strategies, None, batch_rng(7, 9, 0, 0))
    # realized billing averages to the analytic per-impression charge
    target = analytic.platform_payoff
    se = np.sqrt(target * (18.0 * 0.3 / 0.3 - 0.0)) / np.sqrt(m)  # crude bound
    assert abs(total / m - target) < 5.0 * max(se, 0.2)


def test_run_auction_out_site_underreporting():
    game = make_game(point_specs(), model="CPA", scenario="out_site")
    strategies = (Strategy(100.0, alpha=0.0), Strategy(1.0, alpha=1.0))
    belief = PlatformBelief((1.0, 1.0))
    out = run_auction(game, strategies, belief, batch_rng(3, 0, 0, 0), mode="realized")
    if out.winner == 0:
        assert out.reported_conversion is False
        assert out.platform_payoff == 0.0


def test_run_repeated_matches_trace():
    game = make_game(default_specs(), model="CPC")
    strategies = (Strategy(10.0), Strategy(12.0))
    rep = run_repeated(game, strategies, None, T=10, seed=5)
    assert len(rep.trace) == 10
    assert rep.payoffs == tuple(
        sum(oc.payoffs[i] for oc in rep.trace) for i in range(2)
    )
    assert rep.platform_payoff == sum(oc.platform_payoff for oc in rep.trace)
    assert rep.social_welfare == sum(oc.social_welfare for oc in rep.trace)
    # rounds draw fresh markets
    assert rep.trace[0].draw.realized != rep.trace[1].draw.realized


def test_run_repeated_t1_is_a_single_auction():
    game = make_game(default_specs(), model="OCPC")
    strategies = (Strategy(100.0), Strategy(100.0))
    rep = run_repeated(game, strategies, None, T=1, seed=9)
    assert rep.platform_payoff == rep.trace[0].platform_payoff
    assert rep.payoffs == rep.trace[0].payoffs
    with pytest.raises(ValueError):
        run_repeated(game, strategies, None, T=0, seed=9)


def test_run_auction_rejects_bad_mode():
    game = make_game(point_specs())
    with pytest.raises(ValueError):
        run_auction(game, (Strategy(1.0), Strategy(1.0)), None,
                    batch_rng(0, 0, 0, 0), mode="fancy")
