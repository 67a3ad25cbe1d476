"""Monte Carlo episodes and population dynamics.

Everything here is driven by explicit integer seeds.  Episode randomness comes
from the counter-based streams in :mod:`pgg_evo.rng`; group formation,
imitation and mutation draw from a ``numpy`` Philox generator seeded from the
same integer, so a config plus a seed fixes a trace bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError
from .game import EnvParams, GameParams, PopulationProfile, check_strategy
from .rng import derive_seed, seed_key
from .statespace import LITERAL, PAPER_ABSORBING, SEMANTICS

IMITATION = "imitation"
MORAN = "moran"
RULES = (IMITATION, MORAN)
UNIFORM = "uniform"
COOPERATORS = "cooperators"
KERNELS = (UNIFORM, COOPERATORS)
PARTITION = "partition"
SAMPLE = "sample"
GROUPINGS = (PARTITION, SAMPLE)

MIN_REPLICATIONS = 1000
MIN_TRIALS = 30


def _check_semantics(semantics: str) -> bool:
    if semantics not in SEMANTICS:
        raise DomainError(f"semantics must be one of {SEMANTICS}, got {semantics!r}")
    return semantics == LITERAL


def _check_episode_env(env: EnvParams) -> None:
    if env.delta >= 1.0:
        raise DomainError("simulated episodes need delta < 1 to terminate")


# ---------------------------------------------------------------------------
# single episodes


@dataclass(frozen=True)
class EpisodeConfig:
    members: tuple[int, ...]
    params: GameParams
    env: EnvParams
    semantics: str = PAPER_ABSORBING
    seed: int = 0

    def __post_init__(self):
        members = tuple(check_strategy(k, self.params.n) for k in self.members)
        if len(members) != self.params.n:
            raise DomainError(f"a group has exactly n={self.params.n} members")
        object.__setattr__(self, "members", members)
        _check_semantics(self.semantics)
        _check_episode_env(self.env)


@dataclass(frozen=True)
class EpisodeOutcome:
    payoffs: tuple[float, ...]
    rounds: int
    cooperations: int


def run_episode(cfg: EpisodeConfig) -> EpisodeOutcome:
    """Play one repeated game; payoffs are undiscounted per-member totals."""
    p, env = cfg.params, cfg.env
    pay, rounds, coops = kernels.play_episodes(
        np.asarray([cfg.members]), seed_key(cfg.seed), 0, p.b, p.c, env.epsilon,
        env.delta, _check_semantics(cfg.semantics),
    )
    return EpisodeOutcome(tuple(float(x) for x in pay[0]), int(rounds[0]), int(coops[0]))


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    replications: int

    @property
    def half_width(self) -> float:
        """Half-width of the normal 95% interval."""
        return 1.959963984540054 * self.se

    def z(self, reference: float) -> float:
        if self.se == 0.0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.se


def _focal_payoffs(incumbent_k, focal_k, params, env, replications, semantics, seed,
                   backend=None) -> np.ndarray:
    n = params.n
    incumbent_k = check_strategy(incumbent_k, n, name="incumbent_k")
    focal_k = check_strategy(focal_k, n, name="focal_k")
    if int(replications) != replications or replications < MIN_REPLICATIONS:
        raise DomainError(f"replications must be an integer >= {MIN_REPLICATIONS}")
    _check_episode_env(env)
    literal = _check_semantics(semantics)
    members = np.full((int(replications), n), incumbent_k, dtype=np.int64)
    members[:, n - 1] = focal_k
    pay, _, _ = kernels.play_episodes(members, seed_key(seed), 0, params.b, params.c,
                                      env.epsilon, env.delta, literal, backend=backend)
    return pay[:, n - 1]


def _estimate(x: np.ndarray) -> Estimate:
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))), len(x))


def estimate_v(incumbent_k: int, focal_k: int, params: GameParams, env: EnvParams,
               replications: int = 100_000, semantics: str = PAPER_ABSORBING,
               seed: int = 0, backend: str | None = None) -> Estimate:
    """Monte Carlo value of a focal player among ``n - 1`` identical incumbents."""
    return _estimate(_focal_payoffs(incumbent_k, focal_k, params, env, replications,
                                    semantics, seed, backend))


@dataclass(frozen=True)
class SemanticsGap:
    absorbing: Estimate
    literal: Estimate
    difference: Estimate  # literal minus absorbing, paired draws


def semantics_gap(incumbent_k: int, focal_k: int, params: GameParams, env: EnvParams,
                  replications: int = 100_000, seed: int = 0) -> SemanticsGap:
    """How far the literal-observation game is from the absorbing approximation.

    Both runs share the same random streams, so the paired difference has a
    much smaller standard error than the two estimates separately.
    """
    a = _focal_payoffs(incumbent_k, focal_k, params, env, replications, PAPER_ABSORBING, seed)
    b = _focal_payoffs(incumbent_k, focal_k, params, env, replications, LITERAL, seed)
    return SemanticsGap(_estimate(a), _estimate(b), _estimate(b - a))


# ---------------------------------------------------------------------------
# population dynamics


@dataclass(frozen=True)
class SimConfig:
    size: int
    params: GameParams
    env: EnvParams
    rule: str = IMITATION
    selection: float = 1.0
    mutation_rate: float = 1e-3
    kernel: str = UNIFORM
    generations: int = 1000
    episodes_per_generation: int = 1
    seed: int = 0
    semantics: str = PAPER_ABSORBING
    initial: PopulationProfile | None = None
    grouping: str = PARTITION
    record_every: int = 1
    takeover_threshold: float = 0.5
    stop_at_takeover: bool = False

    def __post_init__(self):
        n = self.params.n
        _check_episode_env(self.env)
        _check_semantics(self.semantics)
        if self.rule not in RULES:
            raise DomainError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.kernel not in KERNELS:
            raise DomainError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.grouping not in GROUPINGS:
            raise DomainError(f"grouping must be one of {GROUPINGS}, got {self.grouping!r}")
        for name in ("size", "generations", "episodes_per_generation", "record_every", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise DomainError(f"{name} must be an integer, got {value!r}")
        if self.size < n:
            raise DomainError(f"population size must be at least n={n}")
        if self.grouping == PARTITION and self.size % n:
            raise DomainError(f"population size {self.size} is not divisible by n={n}")
        if self.generations < 0 or self.episodes_per_generation < 1 or self.record_every < 1:
            raise DomainError("generations >= 0, episodes_per_generation >= 1 and record_every >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise DomainError(f"mutation_rate must lie in [0, 1], got {self.mutation_rate}")
        if not (self.selection >= 0.0 and math.isfinite(self.selection)):
            raise DomainError(f"selection intensity must be finite and >= 0, got {self.selection}")
        if not 0.0 < self.takeover_threshold <= 1.0:
            raise DomainError("takeover_threshold must lie in (0, 1]")
        if self.initial is None:
            object.__setattr__(self, "initial", PopulationProfile.monomorphic(n - 1))
        elif not isinstance(self.initial, PopulationProfile):
            object.__setattr__(self, "initial", PopulationProfile(self.initial))
        self.initial.validate_for(n)

    def to_json(self) -> dict:
        data = asdict(self)
        data["params"] = asdict(self.params)
        data["env"] = asdict(self.env)
        data["initial"] = {str(k): w for k, w in sorted(self.initial.weights.items())}
        return data


@dataclass(frozen=True)
class Event:
    generation: int
    kind: str  # "fixation" or "invasion"
    k: int


@dataclass
class SimTrace:
    """Recorded generations of one run.

    ``counts[i]`` and ``mean_payoff[i]`` describe generation
    ``generations[i]`` before its update step; ``final_counts`` is the state
    after the last generation.
    """

    n: int
    size: int
    generations: np.ndarray
    counts: np.ndarray
    mean_payoff: np.ndarray
    final_counts: np.ndarray
    events: list[Event] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.size

    def first_event(self, kind: str, k: int) -> int | None:
        for ev in self.events:
            if ev.kind == kind and ev.k == k:
                return ev.generation
        return None

    @property
    def takeover_generation(self) -> int | None:
        """First generation in which unconditional defectors reached the takeover share."""
        return self.first_event("takeover", self.n)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "k", "frequency", "mean_payoff"])
        for g, row_c, row_p in zip(self.generations, self.counts, self.mean_payoff):
            for k in range(self.n + 1):
                writer.writerow([int(g), k, repr(float(row_c[k] / self.size)),
                                 repr(float(row_p[k]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def summary(self) -> dict:
        final = self.final_counts / self.size
        return {
            "config": self.config,
            "recorded_generations": int(len(self.generations)),
            "final_frequencies": {str(k): float(f) for k, f in enumerate(final)},
            "takeover_generation": self.takeover_generation,
            "events": [asdict(ev) for ev in self.events],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _fermi(x: np.ndarray) -> np.ndarray:
    # logistic function without overflow
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class _Population:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.n = cfg.params.n
        self.rng = np.random.Generator(np.random.Philox(seed_key(cfg.seed)))
        self.key = seed_key(derive_seed(cfg.seed, 0))
        counts = cfg.initial.counts(cfg.size)
        self.strategies = np.repeat(np.array(sorted(counts), dtype=np.int64),
                                    [counts[k] for k in sorted(counts)])
        self.next_episode = 0

    def payoffs(self) -> np.ndarray:
        # all of this generation's episodes go to the kernel in one batch
        cfg, n, size = self.cfg, self.n, self.cfg.size
        reps = cfg.episodes_per_generation
        if cfg.grouping == PARTITION:
            seats = np.concatenate(
                [self.rng.permutation(size).reshape(-1, n) for _ in range(reps)]
            )
        else:
            others = self.rng.integers(0, size - 1, size=(reps * size, n - 1))
            focal = np.tile(np.arange(size), reps)
            others += others >= focal[:, None]
            seats = np.column_stack([others, focal])
        pay, _, _ = kernels.play_episodes(
            self.strategies[seats], self.key, self.next_episode, cfg.params.b,
            cfg.params.c, cfg.env.epsilon, cfg.env.delta, cfg.semantics == LITERAL,
        )
        self.next_episode += len(seats)
        if cfg.grouping == SAMPLE:
            seats, pay = seats[:, -1], pay[:, -1]
        # every agent sits in exactly ``reps`` episodes either way
        return np.bincount(seats.ravel(), weights=pay.ravel(), minlength=size) / reps

    def update(self, payoffs: np.ndarray) -> None:
        cfg, size = self.cfg, self.cfg.size
        s = self.strategies
        if cfg.rule == IMITATION:
            partner = self.rng.integers(0, size - 1, size=size)
            partner += partner >= np.arange(size)
            copy = self.rng.random(size) < _fermi(cfg.selection * (payoffs[partner] - payoffs))
            self.strategies = np.where(copy, s[partner], s)
        else:
            s = s.copy()
            pay = payoffs.copy()
            deaths = self.rng.integers(0, size, size=size)
            draws = self.rng.random(size)
            for event in range(size):
                fitness = np.exp(cfg.selection * (pay - pay.max()))
                cum = np.cumsum(fitness)
                parent = min(int(np.searchsorted(cum, draws[event] * cum[-1], side="right")),
                             size - 1)
                child = deaths[event]
                s[child] = s[parent]
                pay[child] = pay[parent]
            self.strategies = s
        if cfg.mutation_rate > 0.0:
            mutate = self.rng.random(size) < cfg.mutation_rate
            hits = int(mutate.sum())
            if hits:
                top = self.n + 1 if cfg.kernel == UNIFORM else self.n
                self.strategies = self.strategies.copy()
                self.strategies[mutate] = self.rng.integers(0, top, size=hits)

    def counts(self) -> np.ndarray:
        return np.bincount(self.strategies, minlength=self.n + 1)


def evolve(cfg: SimConfig) -> SimTrace:
    """Run the population dynamics described by ``cfg``.

    Each generation the population is split into groups (or every agent is
    placed in a freshly sampled group), episodes are played, and the update
    rule and mutation produce the next generation.  ``imitation``: every
    agent compares itself with a random other agent and copies it with
    probability ``1 / (1 + exp(-s * (payoff gap)))``.  ``moran``: ``size``
    birth-death events with birth chance proportional to ``exp(s * payoff)``.
    """
    pop = _Population(cfg)
    n, size = pop.n, cfg.size
    gens, rows_c, rows_p, events = [], [], [], []
    counts = pop.counts()
    above = counts >= cfg.takeover_threshold * size
    majority = counts * 2 > size
    crossed: set[int] = set()
    for k in np.flatnonzero(above):
        events.append(Event(0, "takeover", int(k)))
        crossed.add(int(k))
    fixed = int(np.flatnonzero(counts == size)[0]) if (counts == size).any() else None

    for g in range(cfg.generations):
        payoffs = pop.payoffs()
        if g % cfg.record_every == 0:
            gens.append(g)
            rows_c.append(counts)
            with np.errstate(invalid="ignore", divide="ignore"):
                rows_p.append(np.bincount(pop.strategies, weights=payoffs, minlength=n + 1) / counts)
        pop.update(payoffs)
        counts = pop.counts()
        gen = g + 1
        now_major = counts * 2 > size
        for k in np.flatnonzero(now_major & ~majority):
            events.append(Event(gen, "invasion", int(k)))
        majority = now_major
        for k in np.flatnonzero(counts >= cfg.takeover_threshold * size):
            if int(k) not in crossed:
                crossed.add(int(k))
                events.append(Event(gen, "takeover", int(k)))
        mono = int(np.flatnonzero(counts == size)[0]) if (counts == size).any() else None
        if mono is not None and mono != fixed:
            events.append(Event(gen, "fixation", mono))
        fixed = mono
        if cfg.stop_at_takeover and n in crossed:
            break

    return SimTrace(
        n=n,
        size=size,
        generations=np.asarray(gens, dtype=np.int64),
        counts=np.asarray(rows_c, dtype=np.int64).reshape(-1, n + 1),
        mean_payoff=np.asarray(rows_p, dtype=float).reshape(-1, n + 1),
        final_counts=counts,
        events=events,
        config=cfg.to_json(),
    )


# ---------------------------------------------------------------------------
# drift versus error-stabilised cooperation


@dataclass(frozen=True)
class ArmSummary:
    epsilon: float
    takeover_fraction: float
    defector_fixation_fraction: float
    mean_takeover_generation: float | None
    takeovers: tuple[bool, ...]


@dataclass(frozen=True)
class DriftSummary:
    trials: int
    error_free: ArmSummary
    with_errors: ArmSummary
    discordant_error_free_only: int
    discordant_errors_only: int
    p_value: float
    significant: bool

    def to_json(self) -> dict:
        return asdict(self)


def mcnemar_one_sided(b: int, c: int) -> float:
    """Exact one-sided McNemar p-value for ``b > c`` discordant pairs."""
    total = b + c
    if total == 0:
        return 1.0
    tail = sum(math.comb(total, i) for i in range(b, total + 1))
    return tail / 2**total


def _arm(cfg: SimConfig, trials: int) -> tuple[ArmSummary, list[bool]]:
    hits, times, fixes = [], [], 0
    for t in range(trials):
        trace = evolve(replace(cfg, seed=derive_seed(cfg.seed, t + 1)))
        when = trace.takeover_generation
        hits.append(when is not None)
        if when is not None:
            times.append(when)
        fixes += trace.first_event("fixation", cfg.params.n) is not None
    summary = ArmSummary(
        epsilon=cfg.env.epsilon,
        takeover_fraction=sum(hits) / trials,
        defector_fixation_fraction=fixes / trials,
        mean_takeover_generation=float(np.mean(times)) if times else None,
        takeovers=tuple(hits),
    )
    return summary, hits


def drift_experiment(cfg: SimConfig, trials: int, alpha: float = 0.05) -> DriftSummary:
    """Paired runs of ``cfg`` and its error-free twin on identical seeds.

    Trial ``t`` of both arms uses the same derived seed.  Significance is an
    exact one-sided McNemar test of "defectors take over more often without
    mistakes".
    """
    if isinstance(trials, bool) or int(trials) != trials or trials < MIN_TRIALS:
        raise DomainError(f"trials must be an integer >= {MIN_TRIALS}, got {trials!r}")
    if cfg.env.epsilon <= 0.0:
        raise DomainError("the error arm needs epsilon > 0")
    zero_cfg = replace(cfg, env=replace(cfg.env, epsilon=0.0))
    zero, zero_hits = _arm(zero_cfg, trials)
    band, band_hits = _arm(cfg, trials)
    only_zero = sum(a and not b for a, b in zip(zero_hits, band_hits))
    only_band = sum(b and not a for a, b in zip(zero_hits, band_hits))
    p = mcnemar_one_sided(only_zero, only_band)
    return DriftSummary(
        trials=trials,
        error_free=zero,
        with_errors=band,
        discordant_error_free_only=only_zero,
        discordant_errors_only=only_band,
        p_value=p,
        significant=p < alpha and zero.takeover_fraction > band.takeover_fraction,
    )


__all__ = [
    "EpisodeConfig", "EpisodeOutcome", "Estimate", "SemanticsGap", "SimConfig", "SimTrace",
    "Event", "ArmSummary", "DriftSummary", "run_episode", "estimate_v", "semantics_gap",
    "evolve", "drift_experiment", "mcnemar_one_sided",
]
