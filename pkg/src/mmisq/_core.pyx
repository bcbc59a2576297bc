# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel (hot loops).

Mirror of ``_pykernel.py``: identical draw order, selection logic and
floating-point expressions (the extension is compiled with
-ffp-contract=off so arithmetic matches the interpreter bit-for-bit).
Any behavioral change here must be applied to the pure-Python kernel too.
"""

import math

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, expm1, log
from libc.stdlib cimport free, malloc, realloc
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND_NAME = "compiled"

cdef const char *_CAPSULE_NAME = "BitGenerator"

cdef double[19] _LOG_FACT
for _k, _v in enumerate(math.log(float(math.factorial(k))) for k in range(19)):
    _LOG_FACT[_k] = _v
cdef double _HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)


cdef inline bitgen_t *_bitgen(object bit_generator) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, _CAPSULE_NAME)


cdef inline double _next(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _log_factorial(long k) noexcept nogil:
    if k < 19:
        return _LOG_FACT[k]
    cdef double x = k + 1.0
    cdef double inv = 1.0 / x
    cdef double inv2 = inv * inv
    cdef double tail = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0)))
    return (x - 0.5) * log(x) - x + _HALF_LN_2PI + tail


cdef long _poisson_inv(double u, double lam) noexcept nogil:
    if lam <= 0.0:
        return 0
    cdef long m = <long> lam
    cdef double pm = exp(<double> m * log(lam) - lam - _log_factorial(m))
    cdef double cum = pm
    if u < cum:
        return m
    cdef long lo = m
    cdef long hi = m
    cdef double plo = pm
    cdef double phi = pm
    cdef bint progressed
    while True:
        progressed = False
        if lo > 0:
            plo = plo * lo / lam
            lo -= 1
            cum += plo
            if u < cum:
                return lo
            progressed = plo > 0.0
        hi += 1
        phi = phi * lam / hi
        cum += phi
        if u < cum:
            return hi
        if not (progressed or phi > 0.0):
            return hi


cdef inline Py_ssize_t _pick_cum(double u, const double *cum, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t last = size - 1
    while i < last and u >= cum[i]:
        i += 1
    return i


def event_driven_rep(object bit_generator, int model, double n, double speed,
                     const double[::1] lam, const double[::1] mu,
                     const double[::1] qexit, const double[:, ::1] jump_cum,
                     const double[::1] pi_cum, const double[::1] grid,
                     long init_state, cnp.int64_t[::1] counts,
                     cnp.int64_t[:, ::1] per_type=None):
    """One replication of the exact continuous-time dynamics (see _pykernel)."""
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef Py_ssize_t d = lam.shape[0]
    cdef Py_ssize_t k_grid = grid.shape[0]
    cdef bint typed = per_type is not None
    cdef Py_ssize_t j, g, kk, pick, last_pos
    cdef long m_total
    cdef double t_now, t_next, arr, dep, jmp, total, u, v, w, acc, depsum
    cdef cnp.int64_t *cnt = <cnp.int64_t *> malloc(d * sizeof(cnp.int64_t))
    if cnt == NULL:
        raise MemoryError()

    with nogil:
        for kk in range(d):
            cnt[kk] = 0
        if init_state >= 0:
            j = init_state
        else:
            j = _pick_cum(_next(rng), &pi_cum[0], d)
        t_now = 0.0
        g = 0
        m_total = 0
        depsum = 0.0

        while True:
            arr = n * lam[j]
            if model == 1:
                dep = m_total * mu[j]
            else:
                dep = depsum
            jmp = speed * qexit[j]
            total = arr + dep + jmp
            if total <= 0.0:
                break
            u = _next(rng)
            t_next = t_now + (-log(1.0 - u) / total)
            while g < k_grid and grid[g] < t_next:
                counts[g] = m_total
                if typed:
                    for kk in range(d):
                        per_type[g, kk] = cnt[kk]
                g += 1
            if g >= k_grid:
                break
            t_now = t_next

            v = _next(rng) * total
            if v < arr:
                m_total += 1
                if model == 2:
                    cnt[j] += 1
                    depsum += mu[j]
            elif v < arr + dep:
                m_total -= 1
                if model == 2:
                    w = v - arr
                    pick = -1
                    last_pos = -1
                    acc = 0.0
                    for kk in range(d):
                        if cnt[kk] > 0:
                            acc += cnt[kk] * mu[kk]
                            last_pos = kk
                            if w < acc:
                                pick = kk
                                break
                    if pick < 0:
                        pick = last_pos
                    cnt[pick] -= 1
                    depsum -= mu[pick]
                    if m_total == 0:
                        depsum = 0.0
            else:
                w = (v - arr - dep) / jmp
                if w >= 1.0:
                    w = 0.9999999999999999
                j = _pick_cum(w, &jump_cum[j, 0], d)

        while g < k_grid:
            counts[g] = m_total
            if typed:
                for kk in range(d):
                    per_type[g, kk] = cnt[kk]
            g += 1

    free(cnt)


def conditional_poisson_rep(object bit_generator, int model, double n, double speed,
                            const double[::1] lam, const double[::1] mu,
                            const double[::1] qexit, const double[:, ::1] jump_cum,
                            const double[::1] pi_cum, double t, long init_state):
    """One replication via the mixed-Poisson representation (see _pykernel)."""
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef Py_ssize_t d = lam.shape[0]
    cdef Py_ssize_t j, i, nseg, cap
    cdef double psi, a, b, rate, u, w, exposure, ln
    cdef bint last
    cdef bint oom = False
    cdef long out
    cdef long *seg_states = NULL
    cdef double *seg_lens = NULL
    cdef long *new_states = NULL
    cdef double *new_lens = NULL

    cap = 64
    seg_states = <long *> malloc(cap * sizeof(long))
    seg_lens = <double *> malloc(cap * sizeof(double))
    if seg_states == NULL or seg_lens == NULL:
        free(seg_states)
        free(seg_lens)
        raise MemoryError()

    with nogil:
        if init_state >= 0:
            j = init_state
        else:
            j = _pick_cum(_next(rng), &pi_cum[0], d)
        if t <= 0.0:
            out = 0
        else:
            psi = 0.0
            nseg = 0
            a = 0.0
            while True:
                rate = speed * qexit[j]
                last = False
                if rate <= 0.0:
                    b = t
                    last = True
                else:
                    u = _next(rng)
                    b = a + (-log(1.0 - u) / rate)
                    if b >= t:
                        b = t
                        last = True
                if model == 2:
                    psi += lam[j] * (exp(-mu[j] * (t - b)) - exp(-mu[j] * (t - a))) / mu[j]
                else:
                    if nseg >= cap:
                        cap = cap * 2
                        new_states = <long *> realloc(seg_states, cap * sizeof(long))
                        new_lens = <double *> realloc(seg_lens, cap * sizeof(double))
                        if new_states != NULL:
                            seg_states = new_states
                        if new_lens != NULL:
                            seg_lens = new_lens
                        if new_states == NULL or new_lens == NULL:
                            oom = True
                            break
                    seg_states[nseg] = j
                    seg_lens[nseg] = b - a
                    nseg += 1
                if last:
                    break
                w = _next(rng)
                j = _pick_cum(w, &jump_cum[j, 0], d)
                a = b

            if model == 1:
                exposure = 0.0
                for i in range(nseg - 1, -1, -1):
                    ln = seg_lens[i]
                    psi += lam[seg_states[i]] * exp(-exposure) * (-expm1(-mu[seg_states[i]] * ln)) / mu[seg_states[i]]
                    exposure += mu[seg_states[i]] * ln

            out = _poisson_inv(_next(rng), n * psi)

    free(seg_states)
    free(seg_lens)
    if oom:
        raise MemoryError()
    return out


def background_path_rep(object bit_generator, double speed, const double[::1] qexit,
                        const double[:, ::1] jump_cum, const double[::1] pi_cum,
                        double horizon, long init_state):
    """Jump times and states of the sped-up background chain on [0, horizon)."""
    cdef bitgen_t *rng = _bitgen(bit_generator)
    cdef Py_ssize_t d = qexit.shape[0]
    cdef Py_ssize_t j, nseg, cap, i
    cdef double t, rate, u, w
    cdef double *times = NULL
    cdef long *states = NULL
    cdef double *new_times = NULL
    cdef long *new_states = NULL
    cdef bint oom = False

    cap = 64
    times = <double *> malloc(cap * sizeof(double))
    states = <long *> malloc(cap * sizeof(long))
    if times == NULL or states == NULL:
        free(times)
        free(states)
        raise MemoryError()

    with nogil:
        if init_state >= 0:
            j = init_state
        else:
            j = _pick_cum(_next(rng), &pi_cum[0], d)
        times[0] = 0.0
        states[0] = j
        nseg = 1
        t = 0.0
        while True:
            rate = speed * qexit[j]
            if rate <= 0.0:
                break
            u = _next(rng)
            t = t + (-log(1.0 - u) / rate)
            if t >= horizon:
                break
            w = _next(rng)
            j = _pick_cum(w, &jump_cum[j, 0], d)
            if nseg >= cap:
                cap = cap * 2
                new_times = <double *> realloc(times, cap * sizeof(double))
                new_states = <long *> realloc(states, cap * sizeof(long))
                if new_times != NULL:
                    times = new_times
                if new_states != NULL:
                    states = new_states
                if new_times == NULL or new_states == NULL:
                    oom = True
                    break
            times[nseg] = t
            states[nseg] = j
            nseg += 1

    if oom:
        free(times)
        free(states)
        raise MemoryError()

    out_times = np.empty(nseg, dtype=np.float64)
    out_states = np.empty(nseg, dtype=np.int64)
    cdef double[::1] tv = out_times
    cdef cnp.int64_t[::1] sv = out_states
    for i in range(nseg):
        tv[i] = times[i]
        sv[i] = states[i]
    free(times)
    free(states)
    return out_times, out_states
