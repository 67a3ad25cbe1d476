"""Self-checks run by ``pgg-evo validate``."""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

import numpy as np

from . import kernels
from .analytic import FocalContext, v_err
from .game import (
    COOPERATE, DEFECT, EnvParams, GameParams, coop_defect_ratio, oneshot_payoff_err,
)
from .rng import seed_key
from .sim import estimate_v
from .stability import band_ordering_report, ess_epsilon_band
from .statespace import focal_value_exact

# (n, b, c) and the (incumbent, focal) pairs exercising every closed form
ORACLE_GAMES = {
    4: ((4.0, 2.0), ((3, 3), (3, 4), (3, 1), (3, 0), (2, 2), (2, 4), (1, 2), (1, 3),
                     (2, 1), (2, 0))),
    10: ((10.0, 5.0), ((9, 9), (9, 10), (9, 8), (9, 0), (5, 5), (5, 10), (5, 7), (3, 8),
                       (5, 3), (5, 0))),
}
ORACLE_DELTAS = (0.8, 0.95)
ORACLE_EPSILONS = (0.02, 0.05, 0.1)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def brute_force_stage_payoff(action: str, j: int, params: GameParams, eps: float) -> float:
    """Expected stage payoff by enumerating every mistake pattern."""
    players = j + (action == COOPERATE)
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=players):
        slips = sum(pattern)
        prob = eps**slips * (1 - eps) ** (players - slips)
        realized = players - slips
        own = action == COOPERATE and pattern[-1] == 0
        total += prob * (params.b * realized / params.n - (params.c if own else 0.0))
    return total


def oracle_grid(quick: bool = False):
    for n, ((b, c), pairs) in ORACLE_GAMES.items():
        params = GameParams(n, b, c)
        eps_values = (0.05,) if quick else ORACLE_EPSILONS
        for delta, eps in itertools.product(ORACLE_DELTAS, eps_values):
            for incumbent, focal in pairs:
                yield params, EnvParams(delta, eps), incumbent, focal


def _identities() -> CheckResult:
    rng = random.Random(1)
    worst = 0.0
    for _ in range(20):
        n = rng.randint(2, 30)
        b = rng.uniform(1.0, 10.0)
        c = rng.uniform(b / n, b)
        params = GameParams(n, b, c)
        for eps in np.linspace(0.0, 0.99, 34):
            ratio = (oneshot_payoff_err(COOPERATE, n - 1, params, eps)
                     / oneshot_payoff_err(DEFECT, n - 1, params, eps))
            worst = max(worst, abs(ratio - coop_defect_ratio(params)))
    return CheckResult("ratio identity", worst < 1e-12, f"max error {worst:.2e}")


def _stage_oracle() -> CheckResult:
    params = GameParams(10, 10.0, 5.0)
    worst = 0.0
    for action, j, eps in itertools.product((COOPERATE, DEFECT), (0, 3, 9), (0.0, 0.05, 0.3)):
        worst = max(worst, abs(oneshot_payoff_err(action, j, params, eps)
                               - brute_force_stage_payoff(action, j, params, eps)))
    return CheckResult("stage payoff vs enumeration", worst < 1e-12, f"max error {worst:.2e}")


def _state_space() -> CheckResult:
    params = GameParams(4, 4.0, 2.0)
    worst = 0.0
    for delta, eps in itertools.product((0.6, 0.95), (0.03, 0.2)):
        env = EnvParams(delta, eps)
        for k, f in itertools.product(range(3), range(5)):
            exact = focal_value_exact(k, f, params, env)
            closed = v_err(FocalContext(k, f), params, env)
            worst = max(worst, abs(closed - exact) / max(1.0, abs(exact)))
    return CheckResult("closed forms vs state space (n=4)", worst < 1e-10,
                       f"max relative error {worst:.2e}")


def _bands() -> CheckResult:
    params = GameParams(10, 10.0, 5.0)
    band = ess_epsilon_band(9, params, 0.9)
    expected = 1.0 - (4.0 / (9.0 * 0.9)) ** 0.1
    ok = band.eps_lower == 0.0 and abs(band.eps_upper - expected) < 1e-9
    reports = [band_ordering_report(params, d, np.linspace(1e-4, 1 - 1e-4, 2000))
               for d in (1.0, 0.9)]
    ok = ok and all(r.ok for r in reports)
    return CheckResult("bands and ordering", ok,
                       f"upper edge {band.eps_upper:.6f} (closed form {expected:.6f})")


def _backends() -> CheckResult:
    if len(kernels.available_backends()) < 2:
        return CheckResult("backend parity", True, "compiled backend not built; skipped")
    members = np.array([[9] * 9 + [8], [9] * 9 + [10], list(range(9)) + [10]] * 500)
    outs = [kernels.play_episodes(members, seed_key(5), 0, 10.0, 5.0, 0.05, 0.9, lit, backend=be)
            for lit in (False, True) for be in ("cython", "python")]
    same = all(np.array_equal(a, b) for x, y in (outs[0:2], outs[2:4]) for a, b in zip(x, y))
    return CheckResult("backend parity", same, "bit-identical" if same else "outputs differ")


def _oracle(quick: bool, seed: int) -> CheckResult:
    reps = 20_000 if quick else 100_000
    worst, count, bad = 0.0, 0, []
    for params, env, k, f in oracle_grid(quick):
        est = estimate_v(k, f, params, env, reps, seed=seed)
        z = est.z(v_err(FocalContext(k, f), params, env))
        worst = max(worst, abs(z))
        count += 1
        if abs(z) > 3.0:
            bad.append((params.n, env.delta, env.epsilon, k, f, round(z, 2)))
    detail = f"{count} comparisons at {reps} episodes, max |z| {worst:.2f}"
    if bad:
        detail += f", outside 3 s.e.: {bad}"
    return CheckResult("Monte Carlo oracle", not bad, detail)


def run_validation(quick: bool = False, seed: int = 2024) -> list[CheckResult]:
    checks = [_identities, _stage_oracle, _state_space, _bands, _backends]
    results = [check() for check in checks]
    results.append(_oracle(quick, seed))
    return results
