"""Pure-Python simulation kernel (fallback backend).

Implements exactly the same per-replication procedures as the compiled
kernel in ``_core.pyx`` and consumes uniform doubles from the bit generator
in exactly the same order, with the same arithmetic.  A replication run on
either backend from the same Philox key therefore produces bit-identical
output; the test suite relies on this to validate the compiled kernel
against this reference.

Keep the two files in lockstep: any change to draw order, selection logic
or floating-point expressions here must be mirrored in ``_core.pyx``.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

# log(k!) lookup; beyond the table a Stirling tail with three correction
# terms is accurate to ~5e-13 for k >= 19 and uses identical arithmetic in
# both backends (no libm lgamma, whose CPython port can differ by ulps).
_LOG_FACT = [math.log(float(math.factorial(k))) for k in range(19)]
_HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_factorial(k: int) -> float:
    if k < 19:
        return _LOG_FACT[k]
    x = k + 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0)))
    return (x - 0.5) * math.log(x) - x + _HALF_LN_2PI + tail


def _poisson_inv(u: float, lam: float) -> int:
    """Poisson sample by CDF inversion of a single uniform.

    Probabilities are accumulated outward from the mode (m, m-1, m+1, ...),
    so the expected work is O(sqrt(lam)) and only one uniform is consumed.
    """
    if lam <= 0.0:
        return 0
    m = int(lam)
    pm = math.exp(m * math.log(lam) - lam - _log_factorial(m))
    cum = pm
    if u < cum:
        return m
    lo = m
    hi = m
    plo = pm
    phi = pm
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
            # mass exhausted to float precision; u sits in the far right tail
            return hi


class _Stream:
    """Buffered uniform doubles from a bit generator, in native draw order."""

    __slots__ = ("_gen", "_buf", "_n", "_i")

    def __init__(self, bit_generator, buffer: int = 256):
        self._gen = np.random.Generator(bit_generator)
        self._buf = self._gen.random(buffer)
        self._n = buffer
        self._i = 0

    def next(self) -> float:
        i = self._i
        if i >= self._n:
            self._buf = self._gen.random(self._n)
            i = 0
        self._i = i + 1
        return float(self._buf[i])


def _pick_cum(u: float, cum, size: int) -> int:
    """First index with u < cum[index]; the last entry of cum is forced to 1."""
    i = 0
    last = size - 1
    while i < last and u >= cum[i]:
        i += 1
    return i


def _init_state(nxt, pi_cum, d: int, init_state: int) -> int:
    if init_state >= 0:
        return init_state
    return _pick_cum(nxt(), pi_cum, d)


def event_driven_rep(bit_generator, model: int, n: float, speed: float,
                     lam, mu, qexit, jump_cum, pi_cum,
                     grid, init_state: int, counts, per_type=None) -> None:
    """One replication of the exact continuous-time dynamics.

    Competing exponential clocks for arrivals (rate n * lam[state]),
    departures and background jumps (rate speed * qexit[state]); counts are
    recorded into ``counts`` (and ``per_type`` for the typed model) at the
    grid times.
    """
    nxt = _Stream(bit_generator).next
    d = lam.shape[0]
    k_grid = grid.shape[0]
    j = _init_state(nxt, pi_cum, d, init_state)
    t_now = 0.0
    g = 0
    m_total = 0
    cnt = [0] * d
    depsum = 0.0

    while True:
        arr = n * lam[j]
        dep = m_total * mu[j] if model == 1 else depsum
        jmp = speed * qexit[j]
        total = arr + dep + jmp
        if total <= 0.0:
            break
        u = nxt()
        t_next = t_now + (-math.log(1.0 - u) / total)
        while g < k_grid and grid[g] < t_next:
            counts[g] = m_total
            if per_type is not None:
                for kk in range(d):
                    per_type[g, kk] = cnt[kk]
            g += 1
        if g >= k_grid:
            break
        t_now = t_next

        v = nxt() * total
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
            j = _pick_cum(w, jump_cum[j], d)

    # no event can ever fire again; remaining grid points see a frozen state
    while g < k_grid:
        counts[g] = m_total
        if per_type is not None:
            for kk in range(d):
                per_type[g, kk] = cnt[kk]
        g += 1


def conditional_poisson_rep(bit_generator, model: int, n: float, speed: float,
                            lam, mu, qexit, jump_cum, pi_cum,
                            t: float, init_state: int) -> int:
    """One replication via the mixed-Poisson representation.

    Samples the sped-up background path on [0, t], integrates the survival
    kernel over each constant segment in closed form, and draws a single
    Poisson variate with parameter n times that integral.
    """
    nxt = _Stream(bit_generator).next
    d = lam.shape[0]
    j = _init_state(nxt, pi_cum, d, init_state)
    if t <= 0.0:
        return 0

    psi = 0.0
    seg_states: list[int] = []
    seg_lens: list[float] = []
    a = 0.0
    while True:
        rate = speed * qexit[j]
        last = False
        if rate <= 0.0:
            b = t
            last = True
        else:
            u = nxt()
            b = a + (-math.log(1.0 - u) / rate)
            if b >= t:
                b = t
                last = True
        if model == 2:
            psi += lam[j] * (math.exp(-mu[j] * (t - b)) - math.exp(-mu[j] * (t - a))) / mu[j]
        else:
            seg_states.append(j)
            seg_lens.append(b - a)
        if last:
            break
        w = nxt()
        j = _pick_cum(w, jump_cum[j], d)
        a = b

    if model == 1:
        # backward sweep: accumulate the service exposure from t down to 0
        exposure = 0.0
        for i in range(len(seg_states) - 1, -1, -1):
            s = seg_states[i]
            ln = seg_lens[i]
            psi += lam[s] * math.exp(-exposure) * (-math.expm1(-mu[s] * ln)) / mu[s]
            exposure += mu[s] * ln

    return _poisson_inv(nxt(), n * psi)


def background_path_rep(bit_generator, speed: float, qexit, jump_cum, pi_cum,
                        horizon: float, init_state: int):
    """Jump times and states of the sped-up background chain on [0, horizon)."""
    nxt = _Stream(bit_generator).next
    d = qexit.shape[0]
    j = _init_state(nxt, pi_cum, d, init_state)
    times = [0.0]
    states = [j]
    t = 0.0
    while True:
        rate = speed * qexit[j]
        if rate <= 0.0:
            break
        u = nxt()
        t = t + (-math.log(1.0 - u) / rate)
        if t >= horizon:
            break
        w = nxt()
        j = _pick_cum(w, jump_cum[j], d)
        times.append(t)
        states.append(j)
    return np.asarray(times, dtype=np.float64), np.asarray(states, dtype=np.int64)
