"""Equilibrium payoff estimation and the OCPC/CPC ordering suite.

At theoretical bids every advertiser's equivalent bid equals its
per-impression score: m x realized rates up to the bid depth x mean
rates beyond it. Under second pricing the platform therefore earns the
runner-up score, the winner keeps the gap to the top score, and social
welfare is the top score, so with two advertisers

    platform payoff  = E[min(score_1, score_2)]
    social welfare   = E[max(score_1, score_2)]

The bid depth controls how much realized information enters the score.
Bidding per conversion (OCPC/CPA) scores on C x P x m; bidding per
click (CPC) scores on C x mean(P) x m. Averaging P out of the score
lowers the max and raises the min, which yields the three orderings
verified by payoff_ordering_suite: OCPC gives higher welfare, lower
platform payoff and higher advertiser payoffs than CPC.

Every Monte-Carlo estimate here has an independent exhaustive
enumeration twin for finite-discrete rate laws, used as the oracle in
tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, Point
from .model import Game, Scenario, validate_game, pricing_model
from .sampling import (
    STREAM_MINMAX,
    STREAM_ORDERINGS,
    STREAM_PAYOFFS,
    MeanSE,
    batch_layout,
    batch_rng,
    draw_rates,
    mean_se,
    run_batched,
    tie_uniforms,
    winner_tiebreak,
)
from .strategy import NoEquilibrium, theoretical_strategy

__all__ = [
    "PayoffReport",
    "ValueLaw",
    "MinMaxReport",
    "OrderingResult",
    "OrderingSuite",
    "score_laws",
    "estimate_equilibrium_payoffs",
    "exact_equilibrium_payoffs",
    "expected_min_max",
    "payoff_ordering_suite",
]


@dataclass(frozen=True)
class PayoffReport:
    model: str
    scenario: str
    advertisers: tuple[MeanSE, ...]
    platform: MeanSE
    social: MeanSE
    replications: int
    seed: int
    method: str = "analytic-mc"
    conservation_residual: float = 0.0  # sum over draws of S - P - sum(utils)


def _resolve(game: Game, model: str | None, scenario: Scenario | None) -> Game:
    if model is None and scenario is None:
        return game
    return validate_game(
        list(game.specs),
        game.chain,
        game.model if model is None else pricing_model(model, game.chain),
        game.scenario if scenario is None else scenario,
    )


def _score_factors(game: Game, model_name: str, i: int):
    """Per-depth factor spec for advertiser i's score under a model:
    'realized' up to the bid depth, the mean beyond it."""
    bd = pricing_model(model_name, game.chain).bid_depth
    spec = game.specs[i]
    return [
        ("realized", d) if d <= bd else ("mean", spec.rate(d).mean())
        for d in range(1, game.chain.conversion_depth + 1)
    ]


def _score_stack(game: Game, model_name: str, rates: np.ndarray) -> np.ndarray:
    """Scores for all advertisers, shape (n, size). Factors multiply in
    depth order for every model, so models that differ only in depths
    with degenerate laws produce bitwise identical scores."""
    n, _, size = rates.shape
    out = np.empty((n, size), dtype=np.float64)
    for i in range(n):
        v = np.full(size, game.specs[i].m, dtype=np.float64)
        for kind, x in _score_factors(game, model_name, i):
            if kind == "realized":
                v = v * rates[i, x - 1, :]
            else:
                v = v * x
        out[i] = v
    return out


def _second_max(scores: np.ndarray) -> np.ndarray:
    return np.partition(scores, -2, axis=0)[-2]


def estimate_equilibrium_payoffs(
    game: Game,
    replications: int = 1_000_000,
    seed: int = 0,
    model: str | None = None,
    scenario: Scenario | None = None,
    threads: int = 1,
    stream: int = STREAM_PAYOFFS,
) -> PayoffReport:
    """Monte-Carlo payoffs per impression with every advertiser playing
    its theoretical strategy.

    Rate draws and tie-breaks are keyed by (seed, stream, batch,
    advertiser, depth) and never by the model, so reports for different
    models under the same seed are exact common-random-number pairs.

    CPA out-site has no equilibrium; its report is the collapsed-regime
    outcome: nothing is charged, the winner is uniform, and each of the
    N advertisers keeps value/N per impression."""
    game = _resolve(game, model, scenario)
    n = game.n
    collapse_regime = game.model.name == "CPA" and game.scenario.is_out_site
    if not collapse_regime:
        for spec in game.specs:
            strat = theoretical_strategy(game.model, game.scenario, spec, game.chain)
            assert not isinstance(strat, NoEquilibrium)

    def batch_fn(b_idx: int, size: int) -> dict:
        rates = draw_rates(game, seed, stream, b_idx, size)
        u = tie_uniforms(seed, stream, b_idx, size)
        out: dict = {}
        if collapse_regime:
            values = _score_stack(game, "CPA", rates)  # full realized product
            utils = values / n
            platform = np.zeros(size)
            social = utils.sum(axis=0)
            resid = social - platform - utils.sum(axis=0)
        else:
            scores = _score_stack(game, game.model.name, rates)
            winner = winner_tiebreak(scores, u)
            e_loser = _second_max(scores) if n > 1 else np.zeros(size)
            top = scores[winner, np.arange(size)]
            win_gap = top - e_loser
            utils = np.where(np.arange(n)[:, None] == winner[None, :], win_gap[None, :], 0.0)
            platform = e_loser
            social = top
            resid = social - platform - utils.sum(axis=0)
        out["p"] = platform.sum()
        out["p2"] = (platform * platform).sum()
        out["s"] = social.sum()
        out["s2"] = (social * social).sum()
        out["resid"] = resid.sum()
        for i in range(n):
            out[f"u{i}"] = utils[i].sum()
            out[f"u2_{i}"] = (utils[i] * utils[i]).sum()
        return out

    tot = run_batched(replications, batch_fn, threads=threads)
    return PayoffReport(
        model=game.model.name,
        scenario=game.scenario.kind,
        advertisers=tuple(
            mean_se(float(tot[f"u{i}"]), float(tot[f"u2_{i}"]), replications) for i in range(n)
        ),
        platform=mean_se(float(tot["p"]), float(tot["p2"]), replications),
        social=mean_se(float(tot["s"]), float(tot["s2"]), replications),
        replications=replications,
        seed=seed,
        conservation_residual=float(tot["resid"]),
    )


def _law_atoms(dist: Distribution) -> list[tuple[float, float]]:
    if not dist.is_finite_discrete():
        raise ValueError(f"exhaustive enumeration needs finite-discrete laws, got {dist!r}")
    return dist.atoms()


def exact_equilibrium_payoffs(game: Game) -> PayoffReport:
    """Exhaustive-enumeration twin of estimate_equilibrium_payoffs for
    finite-discrete rate laws (the brute-force oracle). Ties at the top
    score split the win uniformly, exactly."""
    n = game.n
    collapse_regime = game.model.name == "CPA" and game.scenario.is_out_site
    if collapse_regime:
        # closed form: value means need no enumeration
        vals = [spec.m * math.prod(spec.rate_means()) for spec in game.specs]
        utils = [v / n for v in vals]
        return PayoffReport(
            model=game.model.name,
            scenario=game.scenario.kind,
            advertisers=tuple(MeanSE(u, 0.0, 0) for u in utils),
            platform=MeanSE(0.0, 0.0, 0),
            social=MeanSE(math.fsum(utils), 0.0, 0),
            replications=0,
            seed=0,
            method="exhaustive",
        )

    per_cell = []  # one (advertiser, atom list) per (advertiser, depth) cell
    for i in range(n):
        for d, (kind, x) in enumerate(_score_factors(game, game.model.name, i), start=1):
            if kind == "realized":
                per_cell.append((i, _law_atoms(game.specs[i].rate(d))))
            else:
                per_cell.append((i, [(x, 1.0)]))

    util_terms = [[] for _ in range(n)]
    plat_terms, soc_terms = [], []
    for combo in itertools.product(*[atoms for _, atoms in per_cell]):
        prob = math.prod(p for _, p in combo)
        if prob == 0.0:
            continue
        scores = []
        idx = 0
        for i in range(n):
            v = game.specs[i].m
            for _ in range(game.chain.conversion_depth):
                v *= combo[idx][0]
                idx += 1
            scores.append(v)
        top = max(scores)
        ties = [i for i, s in enumerate(scores) if s == top]
        rest = [s for i, s in enumerate(scores) if i not in ties]
        # highest losing score: the top itself when tied, else the second max
        e_loser = top if len(ties) > 1 else (max(rest) if rest else 0.0)
        plat_terms.append(prob * e_loser)
        soc_terms.append(prob * top)
        share = prob / len(ties)
        for i in ties:
            util_terms[i].append(share * (scores[i] - e_loser))
    return PayoffReport(
        model=game.model.name,
        scenario=game.scenario.kind,
        advertisers=tuple(MeanSE(math.fsum(t), 0.0, 0) for t in util_terms),
        platform=MeanSE(math.fsum(plat_terms), 0.0, 0),
        social=MeanSE(math.fsum(soc_terms), 0.0, 0),
        replications=0,
        seed=0,
        method="exhaustive",
    )


@dataclass(frozen=True)
class ValueLaw:
    """Law of one advertiser's per-impression value: m x product of
    independent factors."""

    m: float
    factors: tuple[Distribution, ...]

    def atoms(self) -> list[tuple[float, float]]:
        out = [(self.m, 1.0)]
        for f in self.factors:
            out = [(v * av, p * ap) for v, p in out for av, ap in f.atoms()]
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        v = np.full(size, self.m, dtype=np.float64)
        for f in self.factors:
            v = v * f.sample(rng, size)
        return v


def score_laws(game: Game, model: str | None = None) -> list[ValueLaw]:
    """Per-advertiser score laws under a model: realized laws up to the
    bid depth, point masses at the mean beyond it."""
    name = game.model.name if model is None else model
    laws = []
    for i, spec in enumerate(game.specs):
        factors = [
            spec.rate(d) if kind == "realized" else Point(x)
            for d, (kind, x) in enumerate(_score_factors(game, name, i), start=1)
        ]
        laws.append(ValueLaw(spec.m, tuple(factors)))
    return laws


@dataclass(frozen=True)
class MinMaxReport:
    e_min: MeanSE
    e_max: MeanSE
    method: str


def expected_min_max(
    laws,
    replications: int | None = None,
    seed: int = 0,
    exhaustive: bool = False,
) -> MinMaxReport:
    """E[min] and E[max] across independent per-advertiser value laws.
    Exhaustive enumeration when requested (all laws finite-discrete),
    Monte-Carlo otherwise."""
    laws = list(laws)
    if len(laws) < 2:
        raise ValueError("expected_min_max needs at least 2 laws")
    if exhaustive:
        min_terms, max_terms = [], []
        for combo in itertools.product(*[law.atoms() for law in laws]):
            prob = math.prod(p for _, p in combo)
            vals = [v for v, _ in combo]
            min_terms.append(prob * min(vals))
            max_terms.append(prob * max(vals))
        return MinMaxReport(
            MeanSE(math.fsum(min_terms), 0.0, 0),
            MeanSE(math.fsum(max_terms), 0.0, 0),
            "exhaustive",
        )
    if replications is None:
        replications = 1_000_000

    def batch_fn(b_idx: int, size: int) -> dict:
        draws = np.stack(
            [
                law.sample(batch_rng(seed, STREAM_MINMAX, b_idx, j), size)
                for j, law in enumerate(laws)
            ],
            axis=0,
        )
        lo = draws.min(axis=0)
        hi = draws.max(axis=0)
        return {
            "lo": lo.sum(),
            "lo2": (lo * lo).sum(),
            "hi": hi.sum(),
            "hi2": (hi * hi).sum(),
        }

    tot = run_batched(replications, batch_fn)
    return MinMaxReport(
        mean_se(float(tot["lo"]), float(tot["lo2"]), replications),
        mean_se(float(tot["hi"]), float(tot["hi2"]), replications),
        "mc",
    )


@dataclass(frozen=True)
class OrderingResult:
    name: str
    delta: MeanSE  # OCPC minus CPC, paired per draw
    holds: bool  # right sign with the SE-factor margin


@dataclass(frozen=True)
class DecompositionCheck:
    """Advertiser payoff gain split into the two win-flip terms: draws
    the advertiser takes under OCPC but not CPC, and vice versa. Their
    sum matches the direct paired difference up to a mean-zero residual."""

    advertiser: int
    direct: MeanSE
    gain_term: MeanSE
    loss_term: MeanSE
    residual: MeanSE
    consistent: bool


@dataclass(frozen=True)
class OrderingSuite:
    social: OrderingResult
    platform: OrderingResult
    advertisers: tuple[OrderingResult, ...]
    decomposition: tuple[DecompositionCheck, ...]
    passed: bool
    replications: int
    seed: int


def payoff_ordering_suite(
    game: Game,
    replications: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
    se_factor: float = 3.0,
) -> OrderingSuite:
    """Paired OCPC-vs-CPC comparison on one in-site two-advertiser game.

    Both arms see identical rate draws and tie uniforms. Reports the
    per-draw payoff differences (social, platform, per advertiser) with
    their standard errors, plus the win-flip decomposition of each
    advertiser's gain."""
    if game.n != 2:
        raise ValueError("the ordering suite is a two-advertiser comparison")

    def batch_fn(b_idx: int, size: int) -> dict:
        rates = draw_rates(game, seed, STREAM_ORDERINGS, b_idx, size)
        u = tie_uniforms(seed, STREAM_ORDERINGS, b_idx, size)
        s = _score_stack(game, "OCPC", rates)
        t = _score_stack(game, "CPC", rates)
        w_s = winner_tiebreak(s, u)
        w_t = winner_tiebreak(t, u)
        idx = np.arange(size)
        d_social = s[w_s, idx] - t[w_t, idx]
        d_platform = _second_max(s) - _second_max(t)
        out = {
            "dS": d_social.sum(),
            "dS2": (d_social * d_social).sum(),
            "dP": d_platform.sum(),
            "dP2": (d_platform * d_platform).sum(),
        }
        for i in range(2):
            k = 1 - i
            u_s = np.where(w_s == i, s[i] - s[k], 0.0)
            u_t = np.where(w_t == i, t[i] - t[k], 0.0)
            du = u_s - u_t
            gain = np.where((w_s == i) & (w_t != i), s[i] - s[k], 0.0)
            loss = np.where((w_s != i) & (w_t == i), s[k] - s[i], 0.0)
            resid = du - gain - loss
            out[f"du{i}"] = du.sum()
            out[f"du2_{i}"] = (du * du).sum()
            out[f"g{i}"] = gain.sum()
            out[f"g2_{i}"] = (gain * gain).sum()
            out[f"l{i}"] = loss.sum()
            out[f"l2_{i}"] = (loss * loss).sum()
            out[f"r{i}"] = resid.sum()
            out[f"r2_{i}"] = (resid * resid).sum()
        return out

    tot = run_batched(replications, batch_fn, threads=threads)
    n = replications
    dS = mean_se(float(tot["dS"]), float(tot["dS2"]), n)
    dP = mean_se(float(tot["dP"]), float(tot["dP2"]), n)

    def ordering(name, delta, want_positive):
        margin = se_factor * delta.se
        holds = delta.mean > margin if want_positive else delta.mean < -margin
        # degenerate laws make both arms identical: equality counts as held
        if delta.mean == 0.0 and delta.se == 0.0:
            holds = True
        return OrderingResult(name, delta, holds)

    advs, decomps = [], []
    for i in range(2):
        du = mean_se(float(tot[f"du{i}"]), float(tot[f"du2_{i}"]), n)
        gain = mean_se(float(tot[f"g{i}"]), float(tot[f"g2_{i}"]), n)
        loss = mean_se(float(tot[f"l{i}"]), float(tot[f"l2_{i}"]), n)
        resid = mean_se(float(tot[f"r{i}"]), float(tot[f"r2_{i}"]), n)
        advs.append(ordering(f"advertiser_{i}_payoff_higher", du, True))
        decomps.append(
            DecompositionCheck(
                advertiser=i,
                direct=du,
                gain_term=gain,
                loss_term=loss,
                residual=resid,
                consistent=abs(resid.mean) <= se_factor * max(resid.se, 0.0)
                or resid.mean == 0.0,
            )
        )
    social = ordering("social_welfare_higher", dS, True)
    platform = ordering("platform_payoff_lower", dP, False)
    passed = (
        social.holds
        and platform.holds
        and all(a.holds for a in advs)
        and all(d.consistent for d in decomps)
    )
    return OrderingSuite(
        social=social,
        platform=platform,
        advertisers=tuple(advs),
        decomposition=tuple(decomps),
        passed=passed,
        replications=n,
        seed=seed,
    )
