"""Closed-form repeated-game values and the stability discriminant.

All values are expected totals over a game that continues after each round
with probability ``delta`` (no separate discounting).  The error-prone values
assume the "absorbing" reading of the model: a cooperator only sees the total
number of cooperations in its group and credits itself with one of them,
and a conditional cooperator that withdraws never returns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergenceError, DomainError
from .game import (
    COOPERATE,
    DEFECT,
    EnvParams,
    GameParams,
    binom_range,
    binom_sf,
    check_strategy,
    group_comp_pmf,
    mistake_pmf,
    oneshot_payoff,
    oneshot_payoff_err,
)

PAPER = "paper"
EXACT = "exact"
MODES = (PAPER, EXACT)

# Which mistakes decide the continuation of a softer or harder mutant.
# "group": all n members' mistakes (the count every cooperator observes).
# "others": only the n - 1 incumbents' mistakes, one solitary round for a
# softer mutant. Kept as a comparison variant; simulation rejects it.
GROUP = "group"
OTHERS = "others"
POOLS = (GROUP, OTHERS)


def _check_delta(delta: float, *, allow_one: bool) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    if delta == 1.0 and not allow_one:
        raise DivergenceError("repeated-game value diverges at delta = 1")
    return delta


# ---------------------------------------------------------------------------
# error-free game


def v_errorfree(focal_k: int, j: int, params: GameParams, delta: float,
                incumbent_k: int | None = None) -> float:
    """Error-free repeated-game value of ``T_focal`` with ``j`` cooperating co-members.

    The remaining ``n - 1 - j`` co-members are unconditional defectors.  A
    cooperating focal player faces co-cooperators of its own type; the
    defector's value depends on the incumbents' tolerance ``incumbent_k``.
    """
    n = params.n
    focal_k = check_strategy(focal_k, n, name="focal_k")
    if not 0 <= j <= n - 1:
        raise DomainError(f"j={j} not in [0, {n - 1}]")
    delta = _check_delta(delta, allow_one=False)
    tail = delta / (1.0 - delta) * oneshot_payoff(DEFECT, 0, params)
    if focal_k < n:
        if j >= focal_k:
            return oneshot_payoff(COOPERATE, j, params) / (1.0 - delta)
        return oneshot_payoff(COOPERATE, j, params) + tail
    if incumbent_k is None:
        raise DomainError("the defector's value needs the incumbents' incumbent_k")
    incumbent_k = check_strategy(incumbent_k, n - 1, name="incumbent_k")
    if j > incumbent_k:
        return oneshot_payoff(DEFECT, j, params) / (1.0 - delta)
    return oneshot_payoff(DEFECT, j, params) + tail


def errorfree_group_value(members: Sequence[int], focal_index: int,
                          params: GameParams, delta: float) -> float:
    """Exact error-free value for one member of an arbitrary group.

    Without mistakes the memory-one dynamics are deterministic, so the
    intention profile becomes periodic; the value is the prefix plus the
    geometric sum over the cycle.
    """
    n = params.n
    if len(members) != n:
        raise DomainError(f"a group has exactly n={n} members, got {len(members)}")
    members = [check_strategy(k, n) for k in members]
    if not 0 <= focal_index < n:
        raise DomainError(f"focal_index {focal_index} out of range")
    delta = _check_delta(delta, allow_one=False)

    state = tuple(k < n for k in members)
    seen: dict[tuple, int] = {}
    rewards: list[float] = []
    while state not in seen:
        seen[state] = len(rewards)
        m = sum(state)
        pot = params.b * m / params.n
        rewards.append(pot - params.c if state[focal_index] else pot)
        state = tuple(k < n and m - s >= k for k, s in zip(members, state))
    start = seen[state]
    value = 0.0
    for t in range(start):
        value += delta**t * rewards[t]
    cycle = rewards[start:]
    cycle_sum = 0.0
    for i, r in enumerate(cycle):
        cycle_sum += delta**i * r
    return value + delta**start * cycle_sum / (1.0 - delta ** len(cycle))


def w_errorfree(focal_k: int, incumbent_k: int, mu: float, params: GameParams,
                delta: float, mutant_k: int | None = None) -> float:
    """Expected error-free payoff of ``T_focal`` in a population with mutant share ``mu``.

    The population is ``1 - mu`` incumbents and ``mu`` mutants of type
    ``mutant_k`` (default: the focal type).  ``j`` in the group-composition
    distribution counts incumbent co-members.
    """
    n = params.n
    focal_k = check_strategy(focal_k, n, name="focal_k")
    incumbent_k = check_strategy(incumbent_k, n, name="incumbent_k")
    mutant_k = focal_k if mutant_k is None else check_strategy(mutant_k, n, name="mutant_k")
    if not 0.0 <= mu < 1.0:
        raise DomainError(f"mu must lie in [0, 1), got {mu}")
    delta = _check_delta(delta, allow_one=False)
    total = 0.0
    for j in range(n - 1, -1, -1):
        weight = group_comp_pmf(j, 1.0 - mu, n)
        if weight == 0.0:
            continue
        group = [incumbent_k] * j + [mutant_k] * (n - 1 - j) + [focal_k]
        total += weight * errorfree_group_value(group, n - 1, params, delta)
    return total


# ---------------------------------------------------------------------------
# error-prone game: one focal player among n - 1 identical incumbents


@dataclass(frozen=True)
class FocalContext:
    """A focal ``T_focal_k`` among ``n - 1`` incumbents playing ``T_incumbent_k``.

    ``mode="paper"`` evaluates the closed forms; ``mode="exact"`` solves the
    literal-observation dynamics (players know their own realized action,
    retaliation is memory-one) on the full state space, for ``n <= 6``.
    """

    incumbent_k: int
    focal_k: int
    mode: str = PAPER
    mistake_pool: str = GROUP

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mistake_pool not in POOLS:
            raise DomainError(f"mistake_pool must be one of {POOLS}, got {self.mistake_pool!r}")

    def case(self, n: int) -> str:
        """Letter of the closed form that applies, ``'a'`` to ``'g'``."""
        k, f = self.incumbent_k, self.focal_k
        if k > n - 1:
            raise DomainError(f"incumbents must be conditional cooperators, got incumbent_k={k}")
        hardest = k == n - 1
        if f == n:
            return "b" if hardest else "e"
        if f == k:
            return "a" if hardest else "d"
        if f < k:
            return "c" if hardest else "g"
        return "f"


def _denominator(delta: float, stop_prob: float) -> float:
    # 1 - delta * (1 - stop_prob) without cancellation
    den = (1.0 - delta) + delta * stop_prob
    if not den > 0.0:
        raise DivergenceError(
            f"repeated-game value diverges (denominator {den!r} at delta={delta})"
        )
    return den


def _breakdown_prob(k: int, n: int, eps: float) -> float:
    """P(more than n-1-k of the n intended cooperations fail)."""
    a = n - k - 1
    return binom_sf(n - 1, a, eps) + eps * mistake_pmf(n - 1, a, eps)


def _defector_value(k: int, params: GameParams, eps: float, delta: float) -> float:
    n = params.n
    f_d = oneshot_payoff_err(DEFECT, n - 1, params, eps)
    return f_d / _denominator(delta, binom_sf(n - 1, n - k - 2, eps))


def _solitary_value(focal_k: int, params: GameParams, eps: float, delta: float,
                    pool: str) -> float:
    # a softer mutant cooperating alone after the incumbents withdrew
    f_alone = oneshot_payoff_err(COOPERATE, 0, params, eps)
    if pool == OTHERS or focal_k > 0:
        return f_alone
    # T_0 keeps going until its own mistake leaves the group at zero cooperations
    return f_alone / _denominator(delta, eps)


def v_err(ctx: FocalContext, params: GameParams, env: EnvParams) -> float:
    """Expected repeated-game payoff of the focal player with mistakes.

    ``delta = 1`` is accepted whenever the value stays finite (``epsilon > 0``).
    """
    n = params.n
    check_strategy(ctx.incumbent_k, n - 1, name="incumbent_k")
    check_strategy(ctx.focal_k, n, name="focal_k")
    case = ctx.case(n)
    if ctx.mode == EXACT:
        from .statespace import focal_value_exact

        return focal_value_exact(ctx.incumbent_k, ctx.focal_k, params, env, semantics="literal")

    eps, delta = env.epsilon, env.delta
    k, f = ctx.incumbent_k, ctx.focal_k
    f_c = oneshot_payoff_err(COOPERATE, n - 1, params, eps)

    if case in ("b", "e"):
        return _defector_value(k, params, eps, delta)
    if case in ("a", "d"):
        return f_c / _denominator(delta, _breakdown_prob(k, n, eps))
    if case in ("c", "g"):
        if ctx.mistake_pool == GROUP:
            p_alone = binom_range(n, n - k, n - 1 - f, eps)
        else:
            p_alone = binom_range(n - 1, n - k, n - 1 - f, eps)
        lone = _solitary_value(f, params, eps, delta, ctx.mistake_pool)
        return (f_c + delta * p_alone * lone) / _denominator(delta, _breakdown_prob(k, n, eps))

    # case f: harder mutant; once it withdraws it free-rides like T_n
    v_defect = _defector_value(k, params, eps, delta)
    if ctx.mistake_pool == GROUP:
        stop = _breakdown_prob(f, n, eps)
        p_defect = binom_range(n, n - f, n - 1 - k, eps)
    else:
        stop = binom_sf(n - 1, n - f - 1, eps)
        p_defect = binom_range(n - 1, n - f, n - k - 2, eps)
    return (f_c + delta * p_defect * v_defect) / _denominator(delta, stop)


# ---------------------------------------------------------------------------
# discriminant


@dataclass(frozen=True)
class DiscriminantInputs:
    epsilon: float
    k: int
    delta: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if int(self.k) != self.k or not 0 < self.k < self.n:
            raise DomainError(f"k out of range: need 0 < k < n, got k={self.k}, n={self.n}")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))


def delta_ratio(inp: DiscriminantInputs) -> float:
    """Discriminant whose excess over ``1 - coop_defect_ratio`` lets T_k repel T_n."""
    eps, k, delta, n = inp.epsilon, inp.k, inp.delta, inp.n
    a = n - k - 1
    if a == 0:
        return delta * (1.0 - eps) ** n
    num = delta * (1.0 - eps) * mistake_pmf(n - 1, a, eps)
    den = (1.0 - delta) + delta * binom_sf(n - 1, a - 1, eps)
    if den == 0.0:
        # delta = 1 with an underflowing tail: only the ratio is representable
        return delta_ratio_limit(eps, k, n)
    if not den > 0.0:
        raise DivergenceError(f"discriminant denominator {den!r} is not positive")
    return num / den


def delta_ratio_limit(epsilon: float, k: int, n: int) -> float:
    """The discriminant in the limit ``delta -> 1``."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if int(k) != k or not 0 < k < n:
        raise DomainError(f"k out of range: need 0 < k < n, got k={k}, n={n}")
    a = n - k - 1
    odds = epsilon / (1.0 - epsilon)
    total = math.fsum(math.comb(n - 1, a + q) * odds**q for q in range(k + 1))
    return (1.0 - epsilon) * math.comb(n - 1, a) / total


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def d_decomposition(inp: DiscriminantInputs) -> tuple[float, float]:
    """Split ``delta / Delta`` into the (D1, D2) terms; D1 vanishes at delta = 1."""
    eps, k, delta, n = inp.epsilon, inp.k, inp.delta, inp.n
    a = n - k - 1
    base = math.comb(n - 1, a)
    log_e, log_1e = math.log(eps), math.log1p(-eps)
    d1 = (1.0 - delta) / base * _exp(-a * log_e - (k + 1) * log_1e)
    terms = (
        math.comb(n - 1, a + q) / base * _exp(q * log_e - (q + 1) * log_1e)
        for q in range(k + 1)
    )
    d2 = delta * math.fsum(terms)
    return d1, d2


# ---------------------------------------------------------------------------
# vectorised curves for grids


def _grid(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any((eps <= 0.0) | (eps >= 1.0)):
        raise DomainError("epsilon grid must lie strictly inside (0, 1)")
    return eps


def delta_curve(eps, k: int, delta: float, n: int) -> np.ndarray:
    """``delta_ratio`` evaluated on an array of mistake rates."""
    DiscriminantInputs(0.5, k, delta, n)
    eps = _grid(eps)
    a = n - k - 1
    if a == 0:
        return delta * (1.0 - eps) ** n
    q = np.arange(n)
    with np.errstate(under="ignore"):
        comb = np.array([math.comb(n - 1, int(i)) for i in q], dtype=float)
        pmf = comb * eps[..., None] ** q * (1.0 - eps[..., None]) ** (n - 1 - q)
        upper = pmf[..., a:].sum(axis=-1)
        num = delta * (1.0 - eps) * pmf[..., a]
        den = (1.0 - delta) + delta * upper
    out = np.empty_like(eps)
    ok = den > 0.0
    out[ok] = num[ok] / den[ok]
    for idx in np.flatnonzero(~ok.ravel()):
        out.flat[idx] = delta_ratio_limit(float(eps.flat[idx]), k, n)
    return out


def d_sum_curve(eps, k: int, delta: float, n: int) -> np.ndarray:
    """``D1 + D2`` on an array of mistake rates."""
    DiscriminantInputs(0.5, k, delta, n)
    eps = _grid(eps)
    a = n - k - 1
    base = math.comb(n - 1, a)
    log_e, log_1e = np.log(eps), np.log1p(-eps)
    with np.errstate(over="ignore"):
        d1 = (1.0 - delta) / base * np.exp(-a * log_e - (k + 1) * log_1e)
        d2 = np.zeros_like(eps)
        for q in range(k + 1):
            d2 += math.comb(n - 1, a + q) / base * np.exp(q * log_e - (q + 1) * log_1e)
    return d1 + delta * d2
