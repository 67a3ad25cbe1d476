# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled episode loop.  Must stay bit-identical to ``_fallback.play_episodes``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double TO_UNIT = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double unit(uint64_t ekey, uint64_t counter) noexcept nogil:
    return <double>(mix64(ekey + (counter + 1) * GOLDEN) >> 11) * TO_UNIT


cdef void run_one(const int64_t* members, int n, uint64_t ekey, double b, double c,
                  double eps, double delta, int literal, char* intends, char* realized,
                  double* pay, int64_t* rounds_out, int64_t* coops_out) noexcept nogil:
    cdef int i, m
    cdef uint64_t t = 0, base
    cdef int64_t coops = 0
    cdef double pot
    for i in range(n):
        intends[i] = members[i] < n
        pay[i] = 0.0
    while True:
        base = t * <uint64_t>(n + 1)
        m = 0
        for i in range(n):
            realized[i] = intends[i] and unit(ekey, base + <uint64_t>i) >= eps
            m += realized[i]
        pot = (b * m) / n
        for i in range(n):
            if realized[i]:
                pay[i] += pot - c
            else:
                pay[i] += pot
        coops += m
        for i in range(n):
            if literal:
                intends[i] = members[i] < n and m - realized[i] >= members[i]
            else:
                intends[i] = intends[i] and m - 1 >= members[i]
        t += 1
        if not unit(ekey, base + <uint64_t>n) < delta:
            break
    rounds_out[0] = <int64_t>t
    coops_out[0] = coops


def play_episodes(cnp.ndarray members, cnp.ndarray ekeys, double b, double c,
                  double eps, double delta, bint literal):
    """Run one episode per row of ``members``; ``ekeys`` are the episode stream keys."""
    cdef const int64_t[:, ::1] mem = np.ascontiguousarray(members, dtype=np.int64)
    cdef const uint64_t[::1] keys = np.ascontiguousarray(ekeys, dtype=np.uint64)
    cdef Py_ssize_t g, groups = mem.shape[0]
    cdef int n = <int>mem.shape[1]
    payoffs = np.zeros((groups, n), dtype=np.float64)
    rounds = np.zeros(groups, dtype=np.int64)
    coops = np.zeros(groups, dtype=np.int64)
    cdef double[:, ::1] pay = payoffs
    cdef int64_t[::1] rnd = rounds
    cdef int64_t[::1] cop = coops
    cdef char* intends
    cdef char* realized
    if keys.shape[0] != groups:
        raise ValueError("one stream key per episode is required")
    if groups == 0:
        return payoffs, rounds, coops
    intends = <char*>malloc(n)
    realized = <char*>malloc(n)
    if intends == NULL or realized == NULL:
        free(intends)
        free(realized)
        raise MemoryError()
    try:
        with nogil:
            for g in range(groups):
                run_one(&mem[g, 0], n, keys[g], b, c, eps, delta, literal,
                        intends, realized, &pay[g, 0], &rnd[g], &cop[g])
    finally:
        free(intends)
        free(realized)
    return payoffs, rounds, coops
