"""Stage game of the n-person public goods game with conditional cooperators.

Strategies are plain integers ``k`` in ``[0, n]``: ``T_k`` cooperates next
round iff at least ``k`` of the other ``n - 1`` members cooperated in the
previous one.  ``k = n`` is the unconditional defector, ``k = 0`` the
unconditional cooperator and ``k = n - 1`` the least tolerant cooperator.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping

from .errors import DomainError

COOPERATE = "C"
DEFECT = "D"
_ACTIONS = (COOPERATE, DEFECT)


@dataclass(frozen=True)
class GameParams:
    """Group size ``n``, benefit scale ``b`` and contribution cost ``c``."""

    n: int
    b: float
    c: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise DomainError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))
        if self.n < 2:
            raise DomainError(f"group size n must be >= 2, got {self.n}")
        if not all(map(math.isfinite, (self.b, self.c))):
            raise DomainError("b and c must be finite")
        # defection dominates the one-shot game, full cooperation is efficient
        if not (0 < self.b / self.n < self.c < self.b):
            raise DomainError(
                f"payoffs must satisfy 0 < b/n < c < b, got b={self.b}, c={self.c}, n={self.n}"
            )

    @property
    def defector(self) -> int:
        return self.n


@dataclass(frozen=True)
class EnvParams:
    """Continuation probability ``delta`` and mistake probability ``epsilon``.

    A mistake turns an intended cooperation into a defection; defection is
    never misplayed.
    """

    delta: float
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    def require_finite_horizon(self):
        if self.delta >= 1.0:
            raise DomainError("delta = 1 is only accepted by limit-safe operations")


def check_strategy(k, n: int, *, name: str = "k") -> int:
    if isinstance(k, bool) or int(k) != k:
        raise DomainError(f"{name} must be an integer, got {k!r}")
    k = int(k)
    if not 0 <= k <= n:
        raise DomainError(f"{name} out of range: {name}={k} not in [0, {n}]")
    return k


@dataclass(frozen=True)
class PopulationProfile:
    """Strategy frequencies of a population."""

    weights: Mapping[int, float]

    def __post_init__(self):
        weights = {int(k): float(w) for k, w in dict(self.weights).items()}
        if any(w < 0 or not math.isfinite(w) for w in weights.values()):
            raise DomainError("frequencies must be finite and non-negative")
        if abs(math.fsum(weights.values()) - 1.0) > 1e-12:
            raise DomainError("frequencies must sum to 1")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def monomorphic(cls, k: int) -> "PopulationProfile":
        return cls({k: 1.0})

    def validate_for(self, n: int) -> "PopulationProfile":
        for k in self.weights:
            check_strategy(k, n)
        return self

    def counts(self, size: int) -> dict[int, int]:
        """Integer head counts summing to ``size`` (largest-remainder rounding)."""
        items = sorted(self.weights.items())
        raw = [(k, w * size) for k, w in items]
        counts = {k: int(math.floor(x)) for k, x in raw}
        short = size - sum(counts.values())
        by_remainder = sorted(raw, key=lambda kx: (-(kx[1] - math.floor(kx[1])), kx[0]))
        for k, _ in by_remainder[:short]:
            counts[k] += 1
        return {k: c for k, c in counts.items() if c}


def _binom_pmf(j: int, q: int, p: float) -> float:
    if p == 0.0:
        return 1.0 if q == 0 else 0.0
    if p == 1.0:
        return 1.0 if q == j else 0.0
    try:
        value = math.comb(j, q) * p**q * (1.0 - p) ** (j - q)
    except OverflowError:  # coefficient beyond double range
        value = 0.0
    if value == 0.0:
        logp = math.log(math.comb(j, q)) + q * math.log(p) + (j - q) * math.log1p(-p)
        value = math.exp(logp)
    return value


def mistake_pmf(j: int, q: int, epsilon: float) -> float:
    """Probability that exactly ``q`` of ``j`` intended cooperations are misplayed."""
    if not (0 <= q <= j):
        raise DomainError(f"need 0 <= q <= j, got q={q}, j={j}")
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must be a probability, got {epsilon}")
    return _binom_pmf(j, q, epsilon)


def group_comp_pmf(j: int, p: float, n: int) -> float:
    """Probability of meeting exactly ``j`` incumbents among ``n - 1`` co-members."""
    if not 0 <= j <= n - 1:
        raise DomainError(f"need 0 <= j <= n-1, got j={j}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must be a probability, got {p}")
    return _binom_pmf(n - 1, j, p)


def binom_cdf(j: int, upto: int, p: float) -> float:
    """P(X <= upto) for X ~ Bin(j, p); clamps ``upto`` outside ``[0, j]``."""
    if upto < 0:
        return 0.0
    if upto >= j:
        return 1.0
    lower = math.fsum(_binom_pmf(j, q, p) for q in range(upto + 1))
    if lower <= 0.5:
        return lower
    return 1.0 - math.fsum(_binom_pmf(j, q, p) for q in range(upto + 1, j + 1))


def binom_sf(j: int, above: int, p: float) -> float:
    """P(X > above) for X ~ Bin(j, p), summed on the short side."""
    if above < 0:
        return 1.0
    if above >= j:
        return 0.0
    upper = math.fsum(_binom_pmf(j, q, p) for q in range(above + 1, j + 1))
    if upper <= 0.5:
        return upper
    return 1.0 - math.fsum(_binom_pmf(j, q, p) for q in range(above + 1))


def binom_range(j: int, lo: int, hi: int, p: float) -> float:
    """P(lo <= X <= hi) for X ~ Bin(j, p)."""
    lo, hi = max(lo, 0), min(hi, j)
    if lo > hi:
        return 0.0
    return math.fsum(_binom_pmf(j, q, p) for q in range(lo, hi + 1))


def _check_action(action: str) -> str:
    if action not in _ACTIONS:
        raise DomainError(f"action must be 'C' or 'D', got {action!r}")
    return action


def _check_coop_count(j: int, params: GameParams) -> int:
    if isinstance(j, bool) or int(j) != j or not 0 <= j <= params.n - 1:
        raise DomainError(f"co-cooperator count j={j!r} not in [0, {params.n - 1}]")
    return int(j)


def oneshot_payoff(action: str, j: int, params: GameParams) -> float:
    """Stage payoff for ``action`` when ``j`` of the others cooperate."""
    _check_action(action)
    j = _check_coop_count(j, params)
    if action == COOPERATE:
        return params.b * (j + 1) / params.n - params.c
    return params.b * j / params.n


def oneshot_payoff_err(action: str, j: int, params: GameParams, epsilon: float) -> float:
    """Expected stage payoff when every intended cooperation fails w.p. ``epsilon``.

    ``j`` counts the others who *intend* to cooperate.  For ``action == 'C'``
    the focal player's own cooperation may fail as well.
    """
    _check_action(action)
    j = _check_coop_count(j, params)
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
    if epsilon == 0.0:
        return oneshot_payoff(action, j, params)
    keep = 1.0 - epsilon
    from_others = params.b * j * keep / params.n
    if action == DEFECT:
        return from_others
    return from_others + keep * (params.b / params.n - params.c)


def coop_defect_ratio(params: GameParams) -> float:
    """Ratio of the cooperator's to the defector's stage payoff in a full group.

    The same value is obtained with mistakes for every epsilon in ``[0, 1)``.
    """
    n = params.n
    return n / (n - 1) * (1.0 - params.c / params.b)


def params_to_json(params: GameParams, env: EnvParams) -> dict:
    return {**asdict(params), **asdict(env)}


def params_from_json(data: Mapping) -> tuple[GameParams, EnvParams]:
    allowed = {"n", "b", "c", "delta", "epsilon"}
    unknown = set(data) - allowed
    if unknown:
        raise DomainError(f"unknown parameter fields: {sorted(unknown)}")
    missing = {"n", "b", "c", "delta"} - set(data)
    if missing:
        raise DomainError(f"missing parameter fields: {sorted(missing)}")
    params = GameParams(data["n"], data["b"], data["c"])
    env = EnvParams(data["delta"], data.get("epsilon", 0.0))
    return params, env
