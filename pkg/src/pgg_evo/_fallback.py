"""Pure NumPy episode loop, used when the compiled extension is unavailable.

Episodes advance in lockstep, one round per iteration, and finished episodes
drop out of the active set.  The arithmetic is performed in the same order as
in the compiled loop so both backends return identical bits.
"""
from __future__ import annotations

import numpy as np

from .rng import uniforms


def play_episodes(members, ekeys, b: float, c: float, eps: float, delta: float,
                  literal: bool):
    members = np.ascontiguousarray(members, dtype=np.int64)
    ekeys = np.ascontiguousarray(ekeys, dtype=np.uint64)
    groups, n = members.shape
    if ekeys.shape != (groups,):
        raise ValueError("one stream key per episode is required")
    payoffs = np.zeros((groups, n), dtype=np.float64)
    rounds = np.zeros(groups, dtype=np.int64)
    coops = np.zeros(groups, dtype=np.int64)
    if groups == 0:
        return payoffs, rounds, coops

    b, c, eps, delta = float(b), float(c), float(eps), float(delta)
    is_cc = members < n
    intends = is_cc.copy()
    active = np.arange(groups)
    slots = np.arange(n + 1, dtype=np.uint64)
    t = 0
    while active.size:
        counters = np.uint64(t * (n + 1)) + slots
        u = uniforms(ekeys[active], counters)
        mine = intends[active]
        realized = mine & (u[:, :n] >= eps)
        m = realized.sum(axis=1)
        pot = (b * m) / n
        round_pay = np.where(realized, pot[:, None] - c, pot[:, None])
        payoffs[active] += round_pay
        coops[active] += m
        rounds[active] += 1
        mem = members[active]
        if literal:
            nxt = is_cc[active] & ((m[:, None] - realized) >= mem)
        else:
            nxt = mine & ((m[:, None] - 1) >= mem)
        intends[active] = nxt
        active = active[u[:, n] < delta]
        t += 1
    return payoffs, rounds, coops
