"""Exact values by solving the episode Markov chain over intention profiles.

Only practical for small groups: a profile is one bit per member and every
round enumerates all mistake patterns of the intended cooperators.
"""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .errors import DomainError
from .game import EnvParams, GameParams, check_strategy

MAX_EXACT_N = 6

PAPER_ABSORBING = "paper_absorbing"
LITERAL = "literal"
SEMANTICS = (PAPER_ABSORBING, LITERAL)


def next_intentions(members: Sequence[int], intends: Sequence[bool],
                    realized: Sequence[bool], n: int, semantics: str) -> tuple[bool, ...]:
    """Intentions for the next round given this round's realized actions.

    ``paper_absorbing``: a player that intended C credits itself with a
    cooperation (it cannot tell its own mistake), so it sees ``m - 1`` other
    cooperators; once it withdraws it never returns.
    ``literal``: each conditional cooperator sees the true number of other
    cooperators and applies its threshold afresh every round.
    """
    m = sum(realized)
    if semantics == PAPER_ABSORBING:
        return tuple(bool(i) and m - 1 >= k for k, i in zip(members, intends))
    if semantics == LITERAL:
        return tuple(k < n and m - r >= k for k, r in zip(members, realized))
    raise DomainError(f"semantics must be one of {SEMANTICS}, got {semantics!r}")


def group_value_exact(members: Sequence[int], focal_index: int, params: GameParams,
                      env: EnvParams, semantics: str = PAPER_ABSORBING) -> float:
    n = params.n
    if n > MAX_EXACT_N:
        raise DomainError(f"state-space evaluation is limited to n <= {MAX_EXACT_N}")
    if len(members) != n:
        raise DomainError(f"a group has exactly n={n} members")
    members = [check_strategy(k, n) for k in members]
    env.require_finite_horizon()
    eps, delta = env.epsilon, env.delta

    start = tuple(k < n for k in members)
    index = {start: 0}
    rows: list[dict[int, float]] = []
    rewards: list[float] = []
    frontier = [start]
    while frontier:
        state = frontier.pop()
        sid = index[state]
        while len(rows) <= sid:
            rows.append({})
            rewards.append(0.0)
        coop = [i for i, s in enumerate(state) if s]
        reward = 0.0
        for pattern in itertools.product((False, True), repeat=len(coop)):
            slips = sum(pattern)
            prob = eps**slips * (1.0 - eps) ** (len(coop) - slips)
            if prob == 0.0:
                continue
            realized = [False] * n
            for i, slipped in zip(coop, pattern):
                realized[i] = not slipped
            m = sum(realized)
            pot = params.b * m / params.n
            reward += prob * (pot - params.c if realized[focal_index] else pot)
            nxt = next_intentions(members, state, realized, n, semantics)
            if nxt not in index:
                index[nxt] = len(index)
                frontier.append(nxt)
            nid = index[nxt]
            rows[sid][nid] = rows[sid].get(nid, 0.0) + prob
        rewards[sid] = reward

    size = len(index)
    while len(rows) < size:
        rows.append({})
        rewards.append(0.0)
    system = np.eye(size)
    for sid, row in enumerate(rows):
        for nid, prob in row.items():
            system[sid, nid] -= delta * prob
    values = np.linalg.solve(system, np.asarray(rewards))
    return float(values[0])


def focal_value_exact(incumbent_k: int, focal_k: int, params: GameParams, env: EnvParams,
                      semantics: str = PAPER_ABSORBING) -> float:
    """Exact value of a focal ``T_focal_k`` among ``n - 1`` ``T_incumbent_k`` players."""
    n = params.n
    members = [check_strategy(incumbent_k, n)] * (n - 1) + [check_strategy(focal_k, n)]
    return group_value_exact(members, n - 1, params, env, semantics)
