"""Entry decisions, the platform's model choice, and the outside-option
sweep.

An advertiser with an outside option r enters the auction iff its
equilibrium payoff under the posted model strictly beats r. The
platform picks the feasible model with the highest platform payoff.
Because bidding on coarser events (CPC) concentrates payoff at the
platform while bidding on finer events (OCPC) concentrates it at the
advertisers, sweeping r produces three regions: CPC while both models
retain the constrained advertiser, OCPC in the band where only OCPC
retains it (the innovation region: platform revenue that plain CPC
would lose entirely), and no market above that.

In the innovation region the unconstrained advertiser is worse off
than in a CPC-only world: there its rival would have exited and left
it winning impressions for free, so the sweep reports that payoff drop
against the lone-bidder counterfactual.

cpsc_comparison does the same payoff accounting on a four-stage funnel
where bidding per add-to-cart (CPSC) sits strictly between CPC and
OCPC for both parties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Game, MODEL_TIE_ORDER
from .payoffs import (
    PayoffReport,
    _score_stack,
    _second_max,
    estimate_equilibrium_payoffs,
)
from .sampling import (
    STREAM_PAYOFFS,
    MeanSE,
    draw_rates,
    mean_se,
    run_batched,
    tie_uniforms,
    winner_tiebreak,
)

__all__ = [
    "entry_decision",
    "ModelChoice",
    "optimal_model",
    "SweepRow",
    "SweepResult",
    "sweep_outside_option",
    "CpscDelta",
    "CpscReport",
    "cpsc_comparison",
]


def entry_decision(pi2: float, r: float) -> bool:
    """Enter iff the in-auction payoff strictly beats the outside option."""
    if r < 0:
        raise ValueError(f"outside option must be >= 0, got {r}")
    return pi2 > r


def _outside_indices(game: Game) -> list[int]:
    return [i for i, s in enumerate(game.specs) if s.outside_option is not None]


def _tie_rank(name: str) -> int:
    return MODEL_TIE_ORDER.index(name)


@dataclass(frozen=True)
class ModelChoice:
    chosen: str | None
    table: dict[str, PayoffReport]
    feasible: dict[str, bool]


def _choose(table: dict[str, PayoffReport], feasible: dict[str, bool]) -> str | None:
    best = None
    for name, rep in table.items():
        if not feasible[name]:
            continue
        if best is None:
            best = name
            continue
        cur = table[best]
        if rep.platform.mean > cur.platform.mean or (
            rep.platform.mean == cur.platform.mean and _tie_rank(name) < _tie_rank(best)
        ):
            best = name
    return best


def optimal_model(
    models,
    game: Game,
    replications: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> ModelChoice:
    """argmax over models of the platform payoff, subject to every
    advertiser with an outside option staying in. Ties broken by the
    documented fixed ordering. Payoff estimates share draws across
    models (common random numbers)."""
    models = list(models)
    if not models:
        raise ValueError("optimal_model needs at least one model")
    table = {
        name: estimate_equilibrium_payoffs(
            game, replications=replications, seed=seed, model=name, threads=threads
        )
        for name in models
    }
    outside = _outside_indices(game)
    feasible = {
        name: all(
            entry_decision(rep.advertisers[i].mean, game.specs[i].outside_option)
            for i in outside
        )
        for name, rep in table.items()
    }
    return ModelChoice(_choose(table, feasible), table, feasible)


@dataclass(frozen=True)
class SweepRow:
    r: float
    feasible: dict[str, bool]
    chosen: str | None
    platform: MeanSE
    social: MeanSE
    advertisers: tuple[MeanSE, ...]
    innovation: bool  # platform earns here although CPC alone would not
    adv1_drop: float  # payoff of the unconstrained advertiser vs CPC-only world
    adv1_drop_se: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    boundaries: dict[str, MeanSE]  # estimated entry thresholds per model
    table: dict[str, PayoffReport]
    models: tuple[str, ...]
    replications: int
    seed: int


def sweep_outside_option(
    r_grid,
    models,
    game: Game,
    replications: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> SweepResult:
    """Sweep the outside option over r_grid (ascending). In-auction
    payoffs do not depend on r, so the per-model table is estimated once
    and reused; r only moves the entry decisions.

    Rows where no model is feasible report the market as closed: chosen
    None and every payoff exactly 0."""
    r_grid = [float(r) for r in r_grid]
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r_grid must be ascending")
    models = list(models)
    outside = _outside_indices(game)
    if not outside:
        raise ValueError("sweep needs an advertiser with an outside option")
    free = [i for i in range(game.n) if i not in outside]
    adv1 = free[0] if free else 0
    table = {
        name: estimate_equilibrium_payoffs(
            game, replications=replications, seed=seed, model=name, threads=threads
        )
        for name in models
    }
    boundaries = {
        name: min((rep.advertisers[i] for i in outside), key=lambda ms: ms.mean)
        for name, rep in table.items()
    }
    # lone-bidder counterfactual: with rivals out, the free advertiser wins
    # every impression at price zero and keeps its full expected value
    spec1 = game.specs[adv1]
    monopoly = spec1.m * math.prod(spec1.rate_means())

    zero = MeanSE(0.0, 0.0, replications)
    rows = []
    for r in r_grid:
        feasible = {
            name: all(entry_decision(rep.advertisers[i].mean, r) for i in outside)
            for name, rep in table.items()
        }
        chosen = _choose(table, feasible)
        if chosen is None:
            platform, social = zero, zero
            advs = tuple(zero for _ in range(game.n))
            pi1, pi1_se = 0.0, 0.0
        else:
            rep = table[chosen]
            platform, social, advs = rep.platform, rep.social, rep.advertisers
            pi1, pi1_se = advs[adv1].mean, advs[adv1].se
        cpc_feasible = feasible.get("CPC", False)
        innovation = chosen is not None and not cpc_feasible and platform.mean > 0
        if cpc_feasible:
            if chosen == "CPC":
                drop, drop_se = 0.0, 0.0
            else:
                cf = table["CPC"].advertisers[adv1]
                drop = pi1 - cf.mean
                drop_se = math.hypot(pi1_se, cf.se)
        else:
            drop = pi1 - monopoly  # exact counterfactual, no estimation error
            drop_se = pi1_se
        rows.append(
            SweepRow(
                r=r,
                feasible=feasible,
                chosen=chosen,
                platform=platform,
                social=social,
                advertisers=advs,
                innovation=innovation,
                adv1_drop=drop,
                adv1_drop_se=drop_se,
            )
        )
    return SweepResult(
        rows=tuple(rows),
        boundaries=boundaries,
        table=table,
        models=tuple(models),
        replications=replications,
        seed=seed,
    )


@dataclass(frozen=True)
class CpscDelta:
    name: str
    delta: MeanSE  # paired per-draw difference
    holds: bool


@dataclass(frozen=True)
class CpscReport:
    table: dict[str, PayoffReport]
    deltas: tuple[CpscDelta, ...]
    advertiser: int
    passed: bool
    replications: int
    seed: int


def cpsc_comparison(
    game: Game,
    replications: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
    se_factor: float = 3.0,
    advertiser: int | None = None,
) -> CpscReport:
    """Check that bidding per cart sits between CPC and OCPC on a
    four-stage funnel: the constrained advertiser's payoff rises with
    bid granularity (CPC < CPSC < OCPC) while the platform's take falls
    (OCPC < CPSC < CPC). Paired per-draw differences, 3 SE margins."""
    if not game.chain.has_cart:
        raise ValueError("cpsc_comparison needs the 4-stage chain (cart depth)")
    if game.n != 2:
        raise ValueError("cpsc_comparison compares the two-advertiser game")
    if advertiser is None:
        outside = _outside_indices(game)
        advertiser = outside[0] if outside else 1
    names = ("CPC", "CPSC", "OCPC")

    def batch_fn(b_idx: int, size: int) -> dict:
        rates = draw_rates(game, seed, STREAM_PAYOFFS, b_idx, size)
        u = tie_uniforms(seed, STREAM_PAYOFFS, b_idx, size)
        idx = np.arange(size)
        pi2 = {}
        plat = {}
        for name in names:
            scores = _score_stack(game, name, rates)
            w = winner_tiebreak(scores, u)
            e_l = _second_max(scores)
            gap = scores[w, idx] - e_l
            pi2[name] = np.where(w == advertiser, gap, 0.0)
            plat[name] = e_l
        d = {
            "pi2_cpsc_cpc": pi2["CPSC"] - pi2["CPC"],
            "pi2_ocpc_cpsc": pi2["OCPC"] - pi2["CPSC"],
            "plat_cpc_cpsc": plat["CPC"] - plat["CPSC"],
            "plat_cpsc_ocpc": plat["CPSC"] - plat["OCPC"],
        }
        out = {}
        for key, arr in d.items():
            out[key] = arr.sum()
            out[key + "2"] = (arr * arr).sum()
        return out

    tot = run_batched(replications, batch_fn, threads=threads)
    table = {
        name: estimate_equilibrium_payoffs(
            game, replications=replications, seed=seed, model=name, threads=threads
        )
        for name in names
    }
    deltas = []
    for key, label in [
        ("pi2_cpsc_cpc", "advertiser_payoff_cpsc_minus_cpc"),
        ("pi2_ocpc_cpsc", "advertiser_payoff_ocpc_minus_cpsc"),
        ("plat_cpc_cpsc", "platform_payoff_cpc_minus_cpsc"),
        ("plat_cpsc_ocpc", "platform_payoff_cpsc_minus_ocpc"),
    ]:
        ms = mean_se(float(tot[key]), float(tot[key + "2"]), replications)
        holds = ms.mean > se_factor * ms.se or (ms.mean == 0.0 and ms.se == 0.0)
        deltas.append(CpscDelta(label, ms, holds))
    return CpscReport(
        table=table,
        deltas=tuple(deltas),
        advertiser=advertiser,
        passed=all(d.holds for d in deltas),
        replications=replications,
        seed=seed,
    )
