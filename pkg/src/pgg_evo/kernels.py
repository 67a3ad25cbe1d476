"""Backend selection for the episode kernel.

The compiled extension is used when it imports; otherwise the NumPy loop.
Set ``PGG_EVO_BACKEND=python`` to force the fallback.  Large batches are
split into contiguous chunks and spread over at most ``PGG_EVO_THREADS``
threads (the compiled loop releases the GIL); chunks write disjoint slices,
so results do not depend on the thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback
from .errors import DomainError
from .rng import episode_keys

try:
    if os.environ.get("PGG_EVO_BACKEND", "").lower() == "python":
        raise ImportError("fallback requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_MIN_CHUNK = 4096


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _compiled is not None else ("python",)


def thread_cap() -> int:
    raw = os.environ.get("PGG_EVO_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"PGG_EVO_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _impl(backend: str | None):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise DomainError("the compiled backend is not available in this build")
        return _compiled.play_episodes
    if backend == "python":
        return _fallback.play_episodes
    raise DomainError(f"unknown backend {backend!r}")


def play_episodes(members, key: int, first_episode: int, b: float, c: float,
                  eps: float, delta: float, literal: bool, backend: str | None = None):
    """Play ``len(members)`` episodes with ids ``first_episode, first_episode + 1, ...``.

    Returns ``(payoffs, rounds, coops)``: per-member totals, round counts and
    the number of realized cooperations per episode.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"episodes need 0 < delta < 1, got {delta}")
    members = np.ascontiguousarray(members, dtype=np.int64)
    if members.ndim != 2:
        raise DomainError("members must be a (groups, n) array")
    fn = _impl(backend)
    ids = np.arange(first_episode, first_episode + len(members), dtype=np.uint64)
    keys = episode_keys(key, ids)
    threads = min(thread_cap(), max(1, len(members) // _MIN_CHUNK))
    if threads <= 1 or fn is _fallback.play_episodes:
        return fn(members, keys, b, c, eps, delta, bool(literal))

    bounds = np.linspace(0, len(members), threads + 1).astype(int)
    payoffs = np.empty(members.shape, dtype=np.float64)
    rounds = np.empty(len(members), dtype=np.int64)
    coops = np.empty(len(members), dtype=np.int64)

    def work(lo, hi):
        p, r, k = fn(members[lo:hi], keys[lo:hi], b, c, eps, delta, bool(literal))
        payoffs[lo:hi], rounds[lo:hi], coops[lo:hi] = p, r, k

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, bounds[:-1], bounds[1:]))
    return payoffs, rounds, coops
