"""Pure-Python fallback kernels.

These mirror the compiled kernels in ``_kernel_c`` operation for operation
(same arithmetic order) so both backends produce bit-identical results; keep
the two files in sync.  The hot loops run over plain Python floats, which is
slow but exact.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_BIG = 1e300

# Philox4x32-10 counter-based generator (Salmon et al. constants).  Stream for
# run i of seed s: key = (s lo32, s hi32), counter words 2,3 = (i lo32, i hi32),
# counter word 0 = block index.  Each block yields two 53-bit doubles.
_M0 = 0xD2511F53
_M1 = 0xCD9E8D57
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = 0xFFFFFFFF


def philox_block(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = (p0 >> 32) & _MASK
        lo0 = p0 & _MASK
        hi1 = (p1 >> 32) & _MASK
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


class _Stream:
    """Two uniform doubles in [0,1) per Philox block, consumed in order."""

    __slots__ = ("k0", "k1", "c2", "c3", "block", "buf0", "buf1", "phase")

    def __init__(self, seed, run):
        self.k0 = seed & _MASK
        self.k1 = (seed >> 32) & _MASK
        self.c2 = run & _MASK
        self.c3 = (run >> 32) & _MASK
        self.block = 0
        self.phase = 2
        self.buf0 = 0.0
        self.buf1 = 0.0

    def next_double(self):
        if self.phase >= 2:
            o0, o1, o2, o3 = philox_block(self.block & _MASK, 0, self.c2, self.c3, self.k0, self.k1)
            self.block += 1
            self.buf0 = float(((o0 << 32 | o1) >> 11)) * (2.0 ** -53)
            self.buf1 = float(((o2 << 32 | o3) >> 11)) * (2.0 ** -53)
            self.phase = 0
        if self.phase == 0:
            self.phase = 1
            return self.buf0
        self.phase = 2
        return self.buf1


class _Work:
    """Unpacked model plus scratch vectors for the RK4 loops."""

    def __init__(self, arr):
        L = arr.n_loc
        A = arr.n_act
        self.L = L
        self.A = A
        self.is_cont = [int(x) for x in arr.is_cont]
        self.is_goal = [int(x) for x in arr.is_goal]
        self.maximize = [int(x) for x in arr.maximize]
        self.enabled = [[int(arr.enabled[l, a]) for a in range(A)] for l in range(L)]
        self.n_enabled = [int(x) for x in arr.n_enabled]
        self.R = [[[float(arr.R[l, a, k]) for k in range(L)] for a in range(A)] for l in range(L)]
        self.P = [[[float(arr.P[l, a, k]) for k in range(L)] for a in range(A)] for l in range(L)]
        self.exit_rate = [[float(arr.exit_rate[l, a]) for a in range(A)] for l in range(L)]
        self.disc_order = [int(d) for d in arr.disc_order]
        self.absorbing = int(arr.absorbing)
        self.t_max = float(arr.t_max)


def _gain(w, wk, l, a):
    s = 0.0
    row = wk.R[l][a]
    for k in range(wk.L):
        s += row[k] * w[k]
    return s - wk.exit_rate[l][a] * w[l]


def _mix(w, wk, l, a):
    s = 0.0
    row = wk.P[l][a]
    for k in range(wk.L):
        s += row[k] * w[k]
    return s


def _score(w, wk, l, a):
    """Owner-signed objective of action a at l on snapshot w."""
    sigma = 1.0 if wk.maximize[l] else -1.0
    if wk.is_cont[l]:
        return sigma * _gain(w, wk, l, a)
    return sigma * _mix(w, wk, l, a)


def _resolve(wk, y, w, prof):
    """Pin absorbing goals and solve the discrete layer (in depth order)."""
    for l in range(wk.L):
        w[l] = y[l]
    if wk.absorbing:
        for l in range(wk.L):
            if wk.is_goal[l]:
                w[l] = 1.0
    for d in wk.disc_order:
        if wk.absorbing and wk.is_goal[d]:
            continue
        if prof is not None:
            a = prof[d]
            if a >= 0:
                w[d] = _mix(w, wk, d, a)
            continue
        sigma = 1.0 if wk.maximize[d] else -1.0
        best = -_BIG
        found = False
        for a in range(wk.A):
            if not wk.enabled[d][a]:
                continue
            v = sigma * _mix(w, wk, d, a)
            if not found or v > best:
                best = v
                found = True
        if found:
            w[d] = sigma * best


def _deriv(wk, w, dy, prof):
    for l in range(wk.L):
        if not wk.is_cont[l] or (wk.absorbing and wk.is_goal[l]):
            dy[l] = 0.0
            continue
        if prof is not None:
            a = prof[l]
            dy[l] = _gain(w, wk, l, a) if a >= 0 else 0.0
            continue
        sigma = 1.0 if wk.maximize[l] else -1.0
        best = -_BIG
        found = False
        for a in range(wk.A):
            if not wk.enabled[l][a]:
                continue
            v = sigma * _gain(w, wk, l, a)
            if not found or v > best:
                best = v
                found = True
        dy[l] = sigma * best if found else 0.0


def _rk4(wk, w, h, prof, out):
    """One backward step of size h from resolved state w; out is resolved."""
    L = wk.L
    hh = 0.5 * h
    h6 = h / 6.0
    k1 = [0.0] * L
    k2 = [0.0] * L
    k3 = [0.0] * L
    k4 = [0.0] * L
    y = [0.0] * L
    wt = [0.0] * L
    _deriv(wk, w, k1, prof)
    for l in range(L):
        y[l] = w[l] + hh * k1[l]
    _resolve(wk, y, wt, prof)
    _deriv(wk, wt, k2, prof)
    for l in range(L):
        y[l] = w[l] + hh * k2[l]
    _resolve(wk, y, wt, prof)
    _deriv(wk, wt, k3, prof)
    for l in range(L):
        y[l] = w[l] + h * k3[l]
    _resolve(wk, y, wt, prof)
    _deriv(wk, wt, k4, prof)
    for l in range(L):
        y[l] = w[l] + h6 * (k1[l] + 2.0 * (k2[l] + k3[l]) + k4[l])
    _resolve(wk, y, out, prof)


def _pick_initial(wk, w, tie_tol):
    """Lowest-index action within tie_tol of the owner-optimal score."""
    prof = [-1] * wk.L
    for l in range(wk.L):
        if wk.n_enabled[l] == 0:
            continue
        best = -_BIG
        for a in range(wk.A):
            if wk.enabled[l][a]:
                v = _score(w, wk, l, a)
                if v > best:
                    best = v
        for a in range(wk.A):
            if wk.enabled[l][a] and _score(w, wk, l, a) >= best - tie_tol:
                prof[l] = a
                break
    return prof


def _switch_candidates(wk, w, prof, tie_tol):
    out = []
    for l in range(wk.L):
        if wk.n_enabled[l] < 2 or prof[l] < 0:
            continue
        if wk.absorbing and wk.is_goal[l]:
            continue
        inc = _score(w, wk, l, prof[l])
        for a in range(wk.A):
            if wk.enabled[l][a] and a != prof[l]:
                if _score(w, wk, l, a) > inc + tie_tol:
                    out.append(l)
                    break
    return out


def _challenger_margin(wk, w, l, prof):
    """Best non-incumbent score minus incumbent score at l."""
    inc = _score(w, wk, l, prof[l])
    best = -_BIG
    for a in range(wk.A):
        if wk.enabled[l][a] and a != prof[l]:
            v = _score(w, wk, l, a)
            if v > best:
                best = v
    return best - inc


def _pick_entrant(wk, w, l, prof, tie_tol):
    best = -_BIG
    for a in range(wk.A):
        if wk.enabled[l][a] and a != prof[l]:
            v = _score(w, wk, l, a)
            if v > best:
                best = v
    for a in range(wk.A):
        if wk.enabled[l][a] and a != prof[l]:
            if _score(w, wk, l, a) >= best - tie_tol:
                return a
    return prof[l]


def solve_kernel(arr, steps, switch_tol, tie_tol):
    """Backward RK4 over the optimality equations, tracking policy switches.

    Returns (values[L, steps+1], breakpoints ascending, profiles ascending,
    switch_times ascending, switch_values[L, n_switch]).
    """
    wk = _Work(arr)
    L = wk.L
    t_max = wk.t_max
    values = np.empty((L, steps + 1), dtype=np.float64)

    y0 = [1.0 if wk.is_goal[l] else 0.0 for l in range(L)]
    w = [0.0] * L
    _resolve(wk, y0, w, None)
    for l in range(L):
        values[l, steps] = w[l]

    prof = _pick_initial(wk, w, tie_tol)
    intervals = []  # (lo, hi, profile) in descending discovery order
    switch_times = []
    switch_cols = []
    prev_hi = t_max
    t_cur = t_max

    for i in range(steps, 0, -1):
        t_lo = t_max * (i - 1) / steps
        guard = 0
        while t_cur > t_lo:
            h = t_cur - t_lo
            trial = [0.0] * L
            _rk4(wk, w, h, None, trial)
            cands = _switch_candidates(wk, trial, prof, tie_tol)
            if not cands:
                w = trial
                t_cur = t_lo
                break
            guard += 1
            if guard > 64 * max(1, L):
                raise RuntimeError("switch detection did not converge; check tolerances")
            t_star = -1.0
            star_of = {}
            for l in cands:
                tl = _bisect_switch(wk, w, t_cur, t_lo, l, prof, switch_tol)
                star_of[l] = tl
                if tl > t_star:
                    t_star = tl
            swl = [l for l in cands if star_of[l] >= t_star - switch_tol]
            if t_star < t_lo + 1e-12 * max(t_max, 1.0) / steps:
                t_star = t_lo
            if t_star < t_cur:
                w_star = [0.0] * L
                _rk4(wk, w, t_cur - t_star, None, w_star)
            else:
                w_star = list(w)
                t_star = t_cur
            if t_star >= prev_hi - switch_tol:
                # crossing at (or within tolerance of) the interval's upper
                # boundary: the boundary decision is the left-environment one,
                # so adopt the entrant without recording a breakpoint
                for l in swl:
                    prof[l] = _pick_entrant(wk, trial, l, prof, tie_tol)
                w = w_star
                t_cur = t_star
                continue
            intervals.append((t_star, prev_hi, list(prof)))
            switch_times.append(t_star)
            switch_cols.append(list(w_star))
            # the entrant is whichever action wins just below the crossing;
            # at the crossing itself the scores tie, so judge at the trial
            # state (the lower end of the step)
            for l in swl:
                prof[l] = _pick_entrant(wk, trial, l, prof, tie_tol)
            prev_hi = t_star
            w = w_star
            t_cur = t_star
        for l in range(L):
            values[l, i - 1] = w[l]

    intervals.append((0.0, prev_hi, list(prof)))
    intervals.reverse()
    switch_times.reverse()
    switch_cols.reverse()

    breakpoints = [0.0] + [hi for (_, hi, _) in intervals]
    profiles = [np.asarray(p, dtype=np.int32) for (_, _, p) in intervals]
    sw_vals = np.asarray(switch_cols, dtype=np.float64).T if switch_cols else np.zeros((L, 0))
    return values, breakpoints, profiles, switch_times, sw_vals


def _bisect_switch(wk, w_hi, t_hi, t_lo, l, prof, switch_tol):
    """Largest time in [t_lo, t_hi] where the challenger overtakes the incumbent."""
    d_hi = _challenger_margin(wk, w_hi, l, prof)
    if d_hi > 0.0:
        return t_hi
    lo = t_lo
    hi = t_hi
    tmp = [0.0] * wk.L
    while hi - lo > switch_tol:
        mid = 0.5 * (lo + hi)
        _rk4(wk, w_hi, t_hi - mid, None, tmp)
        if _challenger_margin(wk, tmp, l, prof) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _interval_at(breakpoints, t):
    """Index of the interval (b[i], b[i+1]] containing t; [0, b[1]] gets 0."""
    n = len(breakpoints) - 1
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if t <= breakpoints[mid + 1]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def evaluate_kernel(arr, breakpoints, profiles, steps):
    """Backward RK4 with fixed per-interval decisions (linear equations)."""
    wk = _Work(arr)
    L = wk.L
    t_max = wk.t_max
    bp = [float(b) for b in breakpoints]
    profs = [[int(a) for a in row] for row in profiles]
    n_int = len(profs)
    values = np.empty((L, steps + 1), dtype=np.float64)

    j = n_int - 1
    y0 = [1.0 if wk.is_goal[l] else 0.0 for l in range(L)]
    w = [0.0] * L
    _resolve(wk, y0, w, profs[j])
    for l in range(L):
        values[l, steps] = w[l]

    t_cur = t_max
    for i in range(steps, 0, -1):
        t_lo = t_max * (i - 1) / steps
        while t_cur > t_lo:
            while j > 0 and bp[j] >= t_cur:
                j -= 1
            t_next = bp[j] if bp[j] > t_lo else t_lo
            out = [0.0] * L
            _rk4(wk, w, t_cur - t_next, profs[j], out)
            w = out
            t_cur = t_next
            if j > 0 and t_cur == bp[j]:
                j -= 1
                # re-resolve the discrete layer with the lower interval's
                # decisions: the decision at a breakpoint is the one used
                # just below it
                y = list(w)
                _resolve(wk, y, w, profs[j])
        for l in range(L):
            values[l, i - 1] = w[l]
    return values


def simulate_kernel(arr, breakpoints, profiles, runs, seed):
    """Sample complete timed paths; returns the number of goal-reaching runs."""
    wk = _Work(arr)
    L = wk.L
    t_max = wk.t_max
    bp = [float(b) for b in breakpoints]
    profs = [[int(a) for a in row] for row in profiles]
    n_int = len(profs)

    init_row = [float(arr.init[l]) for l in range(L)]
    init_total = 0.0
    for l in range(L):
        init_total += init_row[l]

    successes = 0
    for run in range(runs):
        stream = _Stream(seed, run)
        u = stream.next_double()
        l = _draw_row(init_row, L, u, init_total)
        t = 0.0
        j = 0
        reached = False
        while True:
            if wk.is_goal[l] and wk.absorbing:
                reached = True
                break
            if not wk.is_cont[l]:
                a = profs[j][l]
                if a < 0:
                    break
                u = stream.next_double()
                l = _draw_row(wk.P[l][a], L, u, 1.0)
                continue
            a = profs[j][l]
            if a < 0:
                t = t_max
                break
            rho = wk.exit_rate[l][a]
            u = stream.next_double()
            dt = -math.log1p(-u) / rho
            while j + 1 < n_int and t + dt > bp[j + 1]:
                # memoryless restart at the decision boundary
                t = bp[j + 1]
                j += 1
                a = profs[j][l]
                if a < 0:
                    break
                rho = wk.exit_rate[l][a]
                u = stream.next_double()
                dt = -math.log1p(-u) / rho
            if a < 0:
                t = t_max
                break
            if t + dt > t_max:
                t = t_max
                break
            t = t + dt
            u = stream.next_double()
            l = _draw_row(wk.R[l][a], L, u, rho)
        if not wk.absorbing:
            reached = bool(wk.is_goal[l])
        if reached:
            successes += 1
    return successes


def _draw_row(row, L, u, total):
    x = u * total
    acc = 0.0
    last = -1
    for k in range(L):
        r = row[k]
        if r > 0.0:
            acc += r
            last = k
            if x < acc:
                return k
    return last
