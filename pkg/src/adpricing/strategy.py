"""Theoretical strategies and their Monte-Carlo verification.

The dominant bid under every pricing model has the same shape: quote
the expected value of one bid-depth event, b* = m x product of the
mean rates deeper than the bid depth. Bidding per conversion (CPA,
OCPC, OCPM) that is b* = m; per click (CPC) it is m x mean conversion
rate; per cart (CPSC) it is m x mean conversion-after-cart rate; per
impression (CPM) it is m x product of all mean rates.

Out-site, conversion reporting changes the picture. Under OCPC the
platform charges per click, so underreporting only rescales the
effective bid: utility depends on alpha x bid alone and truth-telling
(alpha=1, b=m) is the canonical optimum. Under CPA every advertiser
gains by underreporting a bit more than the platform's learned
reporting factor while inflating the bid to compensate, so no
equilibrium exists; cpa_collapse simulates that spiral with a
one-round belief lag until reporting effectively stops and the
platform's revenue hits zero.

best_response_scan verifies dominance numerically: it sweeps a bid
grid against fixed rival equivalent bids with common random numbers
and checks that the theoretical bid is within 3 standard errors of
the grid maximum everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Game, PlatformBelief, PricingModel, Scenario, Strategy, EventChain
from .engine import ZeroPredictedRateError
from .sampling import (
    STREAM_COLLAPSE,
    STREAM_FIXTURES,
    STREAM_UTILITY,
    batch_layout,
    batch_rng,
    draw_rates,
    mean_se,
    MeanSE,
    rate_role,
    run_batched,
    tie_uniforms,
    winner_tiebreak,
)

__all__ = [
    "NoEquilibrium",
    "NO_EQUILIBRIUM",
    "UtilityEstimate",
    "DominanceReport",
    "FixtureScan",
    "CollapseRound",
    "CollapseTrace",
    "ReportingInvariance",
    "theoretical_strategy",
    "expected_utility",
    "equilibrium_fixture_bids",
    "best_response_scan",
    "cpa_collapse",
    "ocpc_reporting_invariance",
]


class NoEquilibrium:
    """Marker: the model/scenario pair admits no equilibrium strategy."""

    def __repr__(self):
        return "NoEquilibrium"


NO_EQUILIBRIUM = NoEquilibrium()


def theoretical_strategy(
    model: PricingModel, scenario: Scenario, spec, chain: EventChain
) -> Strategy | NoEquilibrium:
    """Equilibrium play for one advertiser, or NO_EQUILIBRIUM (CPA out-site)."""
    if scenario.is_out_site and model.name == "CPA":
        return NO_EQUILIBRIUM
    b = spec.m
    means = spec.rate_means()
    for d in range(model.bid_depth + 1, chain.conversion_depth + 1):
        b *= means[d - 1]
    return Strategy(bid=b, alpha=1.0)


@dataclass(frozen=True)
class UtilityEstimate:
    """Per-impression expected utility with its Monte-Carlo error."""

    mean: float
    se: float
    n: int
    seed: int


def _utility_coefficients(game: Game, i: int, alpha: float, alpha_hat: float):
    """Scalars shared by the utility estimators.

    Returns (bid manipulation factor, payment ratio, value multiplier).
    Funnel depths deeper than the bid depth are integrated out
    analytically: the win event and the payment depend only on rates up
    to bid_depth, so replacing deeper realized rates by their means in
    the value term leaves the expectation unchanged and removes their
    sampling noise."""
    spec = game.specs[i]
    bd, pd = game.model.bid_depth, game.model.pay_depth
    conv = game.chain.conversion_depth
    out = game.scenario.is_out_site
    bid_manip = alpha_hat if (out and conv <= bd) else 1.0
    if out and conv <= pd:
        if alpha_hat == 0.0:
            raise ZeroPredictedRateError(
                "platform belief alpha_hat=0 at a charged conversion depth"
            )
        pay_ratio = alpha / alpha_hat
    else:
        pay_ratio = 1.0
    value_mul = spec.m
    means = spec.rate_means()
    for d in range(bd + 1, conv + 1):
        value_mul *= means[d - 1]
    return bid_manip, pay_ratio, value_mul


def expected_utility(
    i: int,
    bid: float,
    alpha: float,
    rival_e: float,
    game: Game,
    belief: PlatformBelief | None = None,
    replications: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    stream: int = STREAM_UTILITY,
) -> UtilityEstimate:
    """Advertiser i's per-impression utility against a fixed rival
    equivalent bid, at the given bid and reporting probability.

    Wins iff e_i > rival_e strictly. alpha is ignored in-site (fixed 1).
    Draws are keyed by (seed, stream, batch, advertiser, depth) only, so
    calls at different (bid, alpha) share the exact same rates."""
    if rival_e < 0:
        raise ValueError(f"rival_e must be >= 0, got {rival_e}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    spec = game.specs[i]
    bd = game.model.bid_depth
    if not game.scenario.is_out_site:
        alpha = 1.0
    alpha_hat = belief.alpha_hat[i] if belief is not None else 1.0
    bid_manip, pay_ratio, value_mul = _utility_coefficients(game, i, alpha, alpha_hat)
    bid_eff = bid * bid_manip
    pay = rival_e * pay_ratio

    def batch_fn(b_idx: int, size: int) -> dict:
        prod_bd = np.ones(size, dtype=np.float64)
        for d in range(1, bd + 1):
            rng = batch_rng(seed, stream, b_idx, rate_role(i, d))
            prod_bd *= spec.rate(d).sample(rng, size)
        win = (bid_eff * prod_bd) > rival_e
        u = np.where(win, value_mul * prod_bd - pay, 0.0)
        return {"s": u.sum(), "s2": (u * u).sum()}

    tot = run_batched(replications, batch_fn, threads=threads)
    ms = mean_se(float(tot["s"]), float(tot["s2"]), replications)
    return UtilityEstimate(ms.mean, ms.se, replications, seed)


def equilibrium_fixture_bids(
    game: Game,
    i: int,
    multipliers=(0.25, 0.5, 1.0, 2.0),
    replications: int = 200_000,
    seed: int = 0,
) -> list[float]:
    """Rival equivalent-bid fixtures: multiples of E[e^{-i}], the mean of
    the highest rival equivalent bid when rivals play theoretically.
    Closed form from moments for one rival, Monte-Carlo otherwise."""
    rivals = [k for k in range(game.n) if k != i]
    if not rivals:
        raise ValueError("fixtures need at least one rival")
    bd = game.model.bid_depth

    def rival_theory_bid(k: int) -> float:
        strat = theoretical_strategy(game.model, game.scenario, game.specs[k], game.chain)
        if isinstance(strat, NoEquilibrium):
            raise ValueError(f"{game.model.name}/{game.scenario.kind} has no equilibrium bid")
        return strat.bid

    if len(rivals) == 1:
        # same operation order as the engine's per-impression conversion,
        # so the reduction reproduces its output bitwise
        k = rivals[0]
        means = [game.specs[k].rate(d).mean() for d in range(1, bd + 1)]
        base = rival_theory_bid(k) * math.prod(means)
    else:
        bids = {k: rival_theory_bid(k) for k in rivals}
        total = 0.0
        done = 0
        for b_idx, size in batch_layout(replications):
            rates = draw_rates(game, seed, STREAM_FIXTURES, b_idx, size)
            e = np.stack(
                [bids[k] * np.prod(rates[k, :bd, :], axis=0) for k in rivals], axis=0
            )
            total += float(e.max(axis=0).sum())
            done += size
        base = total / done
    return [m * base for m in multipliers]


@dataclass(frozen=True)
class FixtureScan:
    """Grid scan against one fixed rival equivalent bid."""

    rival_e: float
    utility_theory: float
    se_theory: float
    utilities: np.ndarray  # per grid bid
    ses: np.ndarray
    argmax_index: int
    margin: float  # utility_theory - max grid utility
    se_margin: float  # paired SE of that difference
    passed: bool


@dataclass(frozen=True)
class DominanceReport:
    model: str
    scenario: str
    advertiser: int
    grid: np.ndarray
    alpha: float
    theory_bid: float
    theory_index: int  # nearest grid index to the theoretical bid
    fixtures: tuple[FixtureScan, ...]
    mean_curve: np.ndarray  # across-fixture average utility per grid bid
    argmax_index: int  # argmax of mean_curve (localization check)
    passed: bool
    replications: int
    seed: int


def best_response_scan(
    i: int,
    grid,
    rival_es,
    game: Game,
    belief: PlatformBelief | None = None,
    replications: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    theoretical: float | None = None,
    alpha: float = 1.0,
    se_factor: float = 3.0,
) -> DominanceReport:
    """Sweep candidate bids against each rival fixture with common random
    numbers and test the theoretical bid for dominance.

    Pass rule, per fixture: utility(theoretical) >= utility(b) minus
    se_factor x the paired standard error, for every grid bid b. The
    localization argmax is reported on the across-fixture mean curve
    (extreme fixtures produce flat always-win or never-win stretches
    where a per-fixture argmax is meaningless).

    theoretical overrides the derived equilibrium bid (negative controls)."""
    grid = np.asarray(list(grid), dtype=np.float64)
    rival_es = [float(x) for x in rival_es]
    if grid.size == 0 or not rival_es:
        raise ValueError("grid and rival_es must be nonempty")
    spec = game.specs[i]
    bd = game.model.bid_depth
    if not game.scenario.is_out_site:
        alpha = 1.0
    alpha_hat = belief.alpha_hat[i] if belief is not None else 1.0
    if theoretical is None:
        strat = theoretical_strategy(game.model, game.scenario, spec, game.chain)
        if isinstance(strat, NoEquilibrium):
            raise ValueError("no theoretical bid exists for this model/scenario")
        theoretical = strat.bid
    bid_manip, pay_ratio, value_mul = _utility_coefficients(game, i, alpha, alpha_hat)
    stream_scan = STREAM_UTILITY

    # last evaluation column holds the theoretical bid
    bids_eval = np.append(grid, theoretical) * bid_manip
    n_cols = bids_eval.size
    th = n_cols - 1

    def batch_fn(b_idx: int, size: int) -> dict:
        prod_bd = np.ones(size, dtype=np.float64)
        for d in range(1, bd + 1):
            rng = batch_rng(seed, stream_scan, b_idx, rate_role(i, d))
            prod_bd *= spec.rate(d).sample(rng, size)
        e_mat = prod_bd[:, None] * bids_eval[None, :]
        out: dict = {}
        for f_idx, e_k in enumerate(rival_es):
            win = e_mat > e_k
            w = value_mul * prod_bd - e_k * pay_ratio
            uw = win * w[:, None]
            out[f"s{f_idx}"] = uw.sum(axis=0)
            out[f"q{f_idx}"] = (uw * w[:, None]).sum(axis=0)
            # paired squared differences against the theory column
            flip = win != win[:, th][:, None]
            out[f"d{f_idx}"] = (flip * (w * w)[:, None]).sum(axis=0)
        return out

    tot = run_batched(replications, batch_fn, threads=threads)

    n = replications
    fixtures = []
    for f_idx, e_k in enumerate(rival_es):
        s, q, dsq = tot[f"s{f_idx}"], tot[f"q{f_idx}"], tot[f"d{f_idx}"]
        means = s / n
        ses = np.sqrt(np.maximum(q / n - means**2, 0.0) / max(n - 1, 1))
        u_th, se_th = means[th], ses[th]
        u_grid, se_grid = means[:-1], ses[:-1]
        diff = u_th - u_grid
        var_d = np.maximum(dsq[:-1] / n - diff**2, 0.0)
        se_d = np.sqrt(var_d / max(n - 1, 1))
        ok = bool(np.all(diff >= -se_factor * se_d))
        amax = int(np.argmax(u_grid))
        fixtures.append(
            FixtureScan(
                rival_e=e_k,
                utility_theory=float(u_th),
                se_theory=float(se_th),
                utilities=u_grid,
                ses=se_grid,
                argmax_index=amax,
                margin=float(u_th - u_grid[amax]),
                se_margin=float(se_d[amax]),
                passed=ok,
            )
        )

    mean_curve = np.mean([f.utilities for f in fixtures], axis=0)
    return DominanceReport(
        model=game.model.name,
        scenario=game.scenario.kind,
        advertiser=i,
        grid=grid,
        alpha=alpha,
        theory_bid=float(theoretical),
        theory_index=int(np.argmin(np.abs(grid - theoretical))),
        fixtures=tuple(fixtures),
        mean_curve=mean_curve,
        argmax_index=int(np.argmax(mean_curve)),
        passed=all(f.passed for f in fixtures),
        replications=replications,
        seed=seed,
    )


@dataclass(frozen=True)
class CollapseRound:
    round: int
    alpha: float
    alpha_hat: float
    collapsed: bool
    revenue: MeanSE
    utilities: tuple[MeanSE, ...]
    winner_share: tuple[float, ...]


@dataclass(frozen=True)
class CollapseTrace:
    rounds: tuple[CollapseRound, ...]
    decay: float
    threshold: float
    replications: int
    seed: int


def cpa_collapse(
    game: Game,
    rounds: int,
    decay: float,
    replications: int = 10_000,
    seed: int = 0,
    threshold: float = 1e-3,
    threads: int = 1,
) -> CollapseTrace:
    """Out-site CPA reporting spiral with a one-round belief lag.

    Round t: the platform believes last round's observed reporting rate
    (alpha_hat=1 at t=0); every advertiser underreports to alpha =
    decay x alpha_hat and inflates its bid to m/alpha. Once alpha falls
    below the collapse threshold the platform can no longer attribute
    conversions: the winner is drawn uniformly, nothing is charged, and
    each of the N advertisers captures value/N per impression."""
    if game.model.name != "CPA" or not game.scenario.is_out_site:
        raise ValueError("cpa_collapse requires the CPA model out-site")
    if rounds < 2:
        raise ValueError("rounds must be >= 2")
    if not (0.0 < decay < 1.0):
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    L = game.chain.n_rate_depths
    ms = [spec.m for spec in game.specs]

    rows = []
    alpha_hat = 1.0
    for t in range(rounds):
        alpha = decay * alpha_hat
        collapsed = alpha < threshold

        def batch_fn(b_idx: int, size: int, _t=t, _ah=alpha_hat, _a=alpha, _c=collapsed):
            # fold the round into the batch index so rounds never share draws
            key = _t * (1 << 20) + b_idx
            rates = draw_rates(game, seed, STREAM_COLLAPSE, key, size)
            values = np.stack(
                [ms[i] * np.prod(rates[i], axis=0) for i in range(game.n)], axis=0
            )
            u = tie_uniforms(seed, STREAM_COLLAPSE, key, size)
            out: dict = {}
            if not _c:
                e = np.stack(
                    [(ms[i] / _a * _ah) * np.prod(rates[i], axis=0) for i in range(game.n)],
                    axis=0,
                )
                winner = winner_tiebreak(e, u)
                e_loser = np.partition(e, -2, axis=0)[-2]
                payment = e_loser * (_a / _ah)
                util = np.where(
                    np.arange(game.n)[:, None] == winner[None, :], values - payment[None, :], 0.0
                )
            else:
                winner = np.minimum((u * game.n).astype(np.int64), game.n - 1)
                payment = np.zeros(size)
                util = values / game.n
            out["rev"] = payment.sum()
            out["rev2"] = (payment * payment).sum()
            for i in range(game.n):
                out[f"u{i}"] = util[i].sum()
                out[f"u2_{i}"] = (util[i] * util[i]).sum()
                out[f"w{i}"] = float(np.count_nonzero(winner == i))
            return out

        tot = run_batched(replications, batch_fn, threads=threads)
        revenue = mean_se(float(tot["rev"]), float(tot["rev2"]), replications)
        if collapsed:
            revenue = MeanSE(0.0, 0.0, replications)  # charged regime is off, exactly
        utils = tuple(
            mean_se(float(tot[f"u{i}"]), float(tot[f"u2_{i}"]), replications)
            for i in range(game.n)
        )
        shares = tuple(float(tot[f"w{i}"]) / replications for i in range(game.n))
        rows.append(
            CollapseRound(
                round=t,
                alpha=alpha,
                alpha_hat=alpha_hat,
                collapsed=collapsed,
                revenue=revenue,
                utilities=utils,
                winner_share=shares,
            )
        )
        alpha_hat = alpha
    return CollapseTrace(tuple(rows), decay, threshold, replications, seed)


@dataclass(frozen=True)
class ReportingInvariance:
    alpha: float
    bid: float
    rival_es: tuple[float, ...]
    utilities_scaled: tuple[UtilityEstimate, ...]  # (bid, alpha) play
    utilities_truthful: tuple[UtilityEstimate, ...]  # (alpha x bid, 1) play
    max_rel_diff: float
    passed: bool


def ocpc_reporting_invariance(
    i: int,
    alpha: float,
    bid: float,
    game: Game,
    seed: int = 0,
    replications: int = 100_000,
    rel_tol: float = 1e-12,
) -> ReportingInvariance:
    """Out-site OCPC: playing (bid, alpha) against a platform that has
    learned alpha is utility-identical to truthfully playing alpha x bid.
    Checked under common random numbers at several rival fixtures."""
    if game.model.name != "OCPC" or not game.scenario.is_out_site:
        raise ValueError("reporting invariance is an out-site OCPC statement")
    fixtures = equilibrium_fixture_bids(game, i, multipliers=(0.5, 1.0, 2.0), seed=seed)
    belief_scaled = PlatformBelief(
        tuple(alpha if k == i else 1.0 for k in range(game.n))
    )
    belief_truthful = PlatformBelief.truthful(game.n)
    us, ut = [], []
    worst = 0.0
    for e_k in fixtures:
        a = expected_utility(i, bid, alpha, e_k, game, belief_scaled, replications, seed)
        b = expected_utility(i, alpha * bid, 1.0, e_k, game, belief_truthful, replications, seed)
        us.append(a)
        ut.append(b)
        scale = max(abs(a.mean), abs(b.mean))
        worst = max(worst, abs(a.mean - b.mean) / scale if scale > 0 else 0.0)
    return ReportingInvariance(
        alpha=alpha,
        bid=bid,
        rival_es=tuple(fixtures),
        utilities_scaled=tuple(us),
        utilities_truthful=tuple(ut),
        max_rel_diff=worst,
        passed=worst <= rel_tol,
    )
