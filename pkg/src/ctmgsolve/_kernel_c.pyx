# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Twin of ``_kernel_py``: identical arithmetic in identical order so the two
backends are bit-for-bit interchangeable.  Any change here must be mirrored
there.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log1p

BACKEND = "compiled"

cdef double _BIG = 1e300

cdef unsigned int _M0 = 0xD2511F53u
cdef unsigned int _M1 = 0xCD9E8D57u
cdef unsigned int _W0 = 0x9E3779B9u
cdef unsigned int _W1 = 0xBB67AE85u
cdef double _INV53 = 2.0 ** -53


cdef class _CWork:
    cdef double[:, :, ::1] R
    cdef double[:, :, ::1] P
    cdef double[:, ::1] exit_rate
    cdef unsigned char[::1] is_cont
    cdef unsigned char[::1] is_goal
    cdef unsigned char[::1] maximize
    cdef unsigned char[:, ::1] enabled
    cdef int[::1] n_enabled
    cdef int[::1] disc_order
    cdef int L
    cdef int A
    cdef int n_disc
    cdef int absorbing
    cdef double t_max

    def __init__(self, arr):
        self.R = np.ascontiguousarray(arr.R, dtype=np.float64)
        self.P = np.ascontiguousarray(arr.P, dtype=np.float64)
        self.exit_rate = np.ascontiguousarray(arr.exit_rate, dtype=np.float64)
        self.is_cont = np.ascontiguousarray(arr.is_cont, dtype=np.uint8)
        self.is_goal = np.ascontiguousarray(arr.is_goal, dtype=np.uint8)
        self.maximize = np.ascontiguousarray(arr.maximize, dtype=np.uint8)
        self.enabled = np.ascontiguousarray(arr.enabled, dtype=np.uint8)
        self.n_enabled = np.ascontiguousarray(arr.n_enabled, dtype=np.int32)
        self.disc_order = np.ascontiguousarray(arr.disc_order, dtype=np.int32)
        self.L = arr.n_loc
        self.A = arr.n_act
        self.n_disc = len(arr.disc_order)
        self.absorbing = int(arr.absorbing)
        self.t_max = float(arr.t_max)


cdef inline double _gain(_CWork wk, double* w, int l, int a):
    cdef double s = 0.0
    cdef int k
    for k in range(wk.L):
        s += wk.R[l, a, k] * w[k]
    return s - wk.exit_rate[l, a] * w[l]


cdef inline double _mix(_CWork wk, double* w, int l, int a):
    cdef double s = 0.0
    cdef int k
    for k in range(wk.L):
        s += wk.P[l, a, k] * w[k]
    return s


cdef inline double _score(_CWork wk, double* w, int l, int a):
    cdef double sigma = 1.0 if wk.maximize[l] else -1.0
    if wk.is_cont[l]:
        return sigma * _gain(wk, w, l, a)
    return sigma * _mix(wk, w, l, a)


cdef void _resolve(_CWork wk, double* y, double* w, int* prof):
    cdef int l, i, d, a
    cdef double sigma, best, v
    cdef bint found
    for l in range(wk.L):
        w[l] = y[l]
    if wk.absorbing:
        for l in range(wk.L):
            if wk.is_goal[l]:
                w[l] = 1.0
    for i in range(wk.n_disc):
        d = wk.disc_order[i]
        if wk.absorbing and wk.is_goal[d]:
            continue
        if prof != NULL:
            a = prof[d]
            if a >= 0:
                w[d] = _mix(wk, w, d, a)
            continue
        sigma = 1.0 if wk.maximize[d] else -1.0
        best = -_BIG
        found = False
        for a in range(wk.A):
            if not wk.enabled[d, a]:
                continue
            v = sigma * _mix(wk, w, d, a)
            if not found or v > best:
                best = v
                found = True
        if found:
            w[d] = sigma * best


cdef void _deriv(_CWork wk, double* w, double* dy, int* prof):
    cdef int l, a
    cdef double sigma, best, v
    cdef bint found
    for l in range(wk.L):
        if not wk.is_cont[l] or (wk.absorbing and wk.is_goal[l]):
            dy[l] = 0.0
            continue
        if prof != NULL:
            a = prof[l]
            dy[l] = _gain(wk, w, l, a) if a >= 0 else 0.0
            continue
        sigma = 1.0 if wk.maximize[l] else -1.0
        best = -_BIG
        found = False
        for a in range(wk.A):
            if not wk.enabled[l, a]:
                continue
            v = sigma * _gain(wk, w, l, a)
            if not found or v > best:
                best = v
                found = True
        dy[l] = sigma * best if found else 0.0


cdef void _rk4(_CWork wk, double* w, double h, int* prof, double* out, double* scratch):
    # scratch holds 6 vectors of length L: k1 k2 k3 k4 y wt
    cdef int L = wk.L
    cdef double hh = 0.5 * h
    cdef double h6 = h / 6.0
    cdef double* k1 = scratch
    cdef double* k2 = scratch + L
    cdef double* k3 = scratch + 2 * L
    cdef double* k4 = scratch + 3 * L
    cdef double* y = scratch + 4 * L
    cdef double* wt = scratch + 5 * L
    cdef int l
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


cdef void _pick_initial(_CWork wk, double* w, double tie_tol, int* prof):
    cdef int l, a
    cdef double best, v
    for l in range(wk.L):
        prof[l] = -1
        if wk.n_enabled[l] == 0:
            continue
        best = -_BIG
        for a in range(wk.A):
            if wk.enabled[l, a]:
                v = _score(wk, w, l, a)
                if v > best:
                    best = v
        for a in range(wk.A):
            if wk.enabled[l, a] and _score(wk, w, l, a) >= best - tie_tol:
                prof[l] = a
                break


cdef int _switch_candidates(_CWork wk, double* w, int* prof, double tie_tol, int* out):
    cdef int n = 0
    cdef int l, a
    cdef double inc
    for l in range(wk.L):
        if wk.n_enabled[l] < 2 or prof[l] < 0:
            continue
        if wk.absorbing and wk.is_goal[l]:
            continue
        inc = _score(wk, w, l, prof[l])
        for a in range(wk.A):
            if wk.enabled[l, a] and a != prof[l]:
                if _score(wk, w, l, a) > inc + tie_tol:
                    out[n] = l
                    n += 1
                    break
    return n


cdef double _challenger_margin(_CWork wk, double* w, int l, int* prof):
    cdef double inc = _score(wk, w, l, prof[l])
    cdef double best = -_BIG
    cdef double v
    cdef int a
    for a in range(wk.A):
        if wk.enabled[l, a] and a != prof[l]:
            v = _score(wk, w, l, a)
            if v > best:
                best = v
    return best - inc


cdef int _pick_entrant(_CWork wk, double* w, int l, int* prof, double tie_tol):
    cdef double best = -_BIG
    cdef double v
    cdef int a
    for a in range(wk.A):
        if wk.enabled[l, a] and a != prof[l]:
            v = _score(wk, w, l, a)
            if v > best:
                best = v
    for a in range(wk.A):
        if wk.enabled[l, a] and a != prof[l]:
            if _score(wk, w, l, a) >= best - tie_tol:
                return a
    return prof[l]


cdef double _bisect_switch(_CWork wk, double* w_hi, double t_hi, double t_lo,
                           int l, int* prof, double switch_tol,
                           double* tmp, double* scratch):
    cdef double d_hi = _challenger_margin(wk, w_hi, l, prof)
    if d_hi > 0.0:
        return t_hi
    cdef double lo = t_lo
    cdef double hi = t_hi
    cdef double mid
    while hi - lo > switch_tol:
        mid = 0.5 * (lo + hi)
        _rk4(wk, w_hi, t_hi - mid, NULL, tmp, scratch)
        if _challenger_margin(wk, tmp, l, prof) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_kernel(arr, int steps, double switch_tol, double tie_tol):
    """Backward RK4 over the optimality equations, tracking policy switches."""
    cdef _CWork wk = _CWork(arr)
    cdef int L = wk.L
    cdef double t_max = wk.t_max
    values_nd = np.empty((L, steps + 1), dtype=np.float64)
    cdef double[:, ::1] values = values_nd

    buf_nd = np.zeros(6 * L, dtype=np.float64)
    cdef double[::1] buf = buf_nd
    cdef double* scratch = &buf[0]
    w_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] w_v = w_nd
    cdef double* w = &w_v[0]
    y_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] y_v = y_nd
    cdef double* y0 = &y_v[0]
    trial_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] trial_v = trial_nd
    cdef double* trial = &trial_v[0]
    star_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] star_v = star_nd
    cdef double* w_star = &star_v[0]
    prof_nd = np.zeros(L, dtype=np.int32)
    cdef int[::1] prof_v = prof_nd
    cdef int* prof = &prof_v[0]
    cands_nd = np.zeros(L, dtype=np.int32)
    cdef int[::1] cands_v = cands_nd
    cdef int* cands = &cands_v[0]
    stars_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] stars_v = stars_nd
    cdef double* star_of = &stars_v[0]
    tmp_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] tmp_v = tmp_nd
    cdef double* tmp = &tmp_v[0]

    cdef int l, i, n_c, c, guard
    cdef double t_lo, t_cur, h, t_star, t_merge, tl, prev_hi

    for l in range(L):
        y0[l] = 1.0 if wk.is_goal[l] else 0.0
    _resolve(wk, y0, w, NULL)
    for l in range(L):
        values[l, steps] = w[l]

    _pick_initial(wk, w, tie_tol, prof)
    intervals = []
    switch_times = []
    switch_cols = []
    prev_hi = t_max
    t_cur = t_max

    for i in range(steps, 0, -1):
        t_lo = t_max * (i - 1) / steps
        guard = 0
        while t_cur > t_lo:
            h = t_cur - t_lo
            _rk4(wk, w, h, NULL, trial, scratch)
            n_c = _switch_candidates(wk, trial, prof, tie_tol, cands)
            if n_c == 0:
                for l in range(L):
                    w[l] = trial[l]
                t_cur = t_lo
                break
            guard += 1
            if guard > 64 * max(1, L):
                raise RuntimeError("switch detection did not converge; check tolerances")
            t_star = -1.0
            for c in range(n_c):
                tl = _bisect_switch(wk, w, t_cur, t_lo, cands[c], prof, switch_tol, tmp, scratch)
                star_of[c] = tl
                if tl > t_star:
                    t_star = tl
            t_merge = t_star
            if t_star < t_lo + 1e-12 * max(t_max, 1.0) / steps:
                t_star = t_lo
            if t_star < t_cur:
                _rk4(wk, w, t_cur - t_star, NULL, w_star, scratch)
            else:
                for l in range(L):
                    w_star[l] = w[l]
                t_star = t_cur
            if t_star >= prev_hi - switch_tol:
                # crossing at (or within tolerance of) the interval's upper
                # boundary: the boundary decision is the left-environment one,
                # so adopt the entrant without recording a breakpoint
                for c in range(n_c):
                    if star_of[c] >= t_merge - switch_tol:
                        prof[cands[c]] = _pick_entrant(wk, w_star, cands[c], prof, tie_tol)
                for l in range(L):
                    w[l] = w_star[l]
                t_cur = t_star
                continue
            intervals.append((t_star, prev_hi, [prof[l] for l in range(L)]))
            switch_times.append(t_star)
            switch_cols.append([w_star[l] for l in range(L)])
            for c in range(n_c):
                if star_of[c] >= t_merge - switch_tol:
                    prof[cands[c]] = _pick_entrant(wk, w_star, cands[c], prof, tie_tol)
            prev_hi = t_star
            for l in range(L):
                w[l] = w_star[l]
            t_cur = t_star
        for l in range(L):
            values[l, i - 1] = w[l]

    intervals.append((0.0, prev_hi, [prof[l] for l in range(L)]))
    intervals.reverse()
    switch_times.reverse()
    switch_cols.reverse()

    breakpoints = [0.0] + [hi for (_, hi, _) in intervals]
    profiles = [np.asarray(p, dtype=np.int32) for (_, _, p) in intervals]
    sw_vals = np.asarray(switch_cols, dtype=np.float64).T if switch_cols else np.zeros((L, 0))
    return values_nd, breakpoints, profiles, switch_times, sw_vals


def evaluate_kernel(arr, breakpoints, profiles, int steps):
    """Backward RK4 with fixed per-interval decisions (linear equations)."""
    cdef _CWork wk = _CWork(arr)
    cdef int L = wk.L
    cdef double t_max = wk.t_max
    bp_nd = np.ascontiguousarray(breakpoints, dtype=np.float64)
    cdef double[::1] bp = bp_nd
    profs_nd = np.ascontiguousarray(profiles, dtype=np.int32)
    cdef int[:, ::1] profs = profs_nd
    cdef int n_int = profs_nd.shape[0]

    values_nd = np.empty((L, steps + 1), dtype=np.float64)
    cdef double[:, ::1] values = values_nd
    buf_nd = np.zeros(6 * L, dtype=np.float64)
    cdef double[::1] buf = buf_nd
    cdef double* scratch = &buf[0]
    w_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] w_v = w_nd
    cdef double* w = &w_v[0]
    y_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] y_v = y_nd
    cdef double* y = &y_v[0]
    out_nd = np.zeros(L, dtype=np.float64)
    cdef double[::1] out_v = out_nd
    cdef double* out = &out_v[0]

    cdef int j = n_int - 1
    cdef int l, i
    cdef double t_cur, t_lo, t_next

    for l in range(L):
        y[l] = 1.0 if wk.is_goal[l] else 0.0
    _resolve(wk, y, w, &profs[j, 0])
    for l in range(L):
        values[l, steps] = w[l]

    t_cur = t_max
    for i in range(steps, 0, -1):
        t_lo = t_max * (i - 1) / steps
        while t_cur > t_lo:
            while j > 0 and bp[j] >= t_cur:
                j -= 1
            t_next = bp[j] if bp[j] > t_lo else t_lo
            _rk4(wk, w, t_cur - t_next, &profs[j, 0], out, scratch)
            for l in range(L):
                w[l] = out[l]
            t_cur = t_next
            if j > 0 and t_cur == bp[j]:
                j -= 1
                for l in range(L):
                    y[l] = w[l]
                _resolve(wk, y, w, &profs[j, 0])
        for l in range(L):
            values[l, i - 1] = w[l]
    return values_nd


cdef inline void _philox_block(unsigned int c0, unsigned int c1, unsigned int c2,
                               unsigned int c3, unsigned int k0, unsigned int k1,
                               unsigned int* out):
    cdef unsigned long long p0, p1
    cdef unsigned int hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        p0 = (<unsigned long long> _M0) * c0
        p1 = (<unsigned long long> _M1) * c2
        hi0 = <unsigned int> (p0 >> 32)
        lo0 = <unsigned int> p0
        hi1 = <unsigned int> (p1 >> 32)
        lo1 = <unsigned int> p1
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef int _draw_row(double* row, int L, double u, double total):
    cdef double x = u * total
    cdef double acc = 0.0
    cdef int last = -1
    cdef int k
    cdef double r
    for k in range(L):
        r = row[k]
        if r > 0.0:
            acc += r
            last = k
            if x < acc:
                return k
    return last


def simulate_kernel(arr, breakpoints, profiles, long long runs, object seed_obj):
    """Sample complete timed paths; returns the number of goal-reaching runs."""
    cdef _CWork wk = _CWork(arr)
    cdef int L = wk.L
    cdef double t_max = wk.t_max
    bp_nd = np.ascontiguousarray(breakpoints, dtype=np.float64)
    cdef double[::1] bp = bp_nd
    profs_nd = np.ascontiguousarray(profiles, dtype=np.int32)
    cdef int[:, ::1] profs = profs_nd
    cdef int n_int = profs_nd.shape[0]
    init_nd = np.ascontiguousarray(arr.init, dtype=np.float64)
    cdef double[::1] init_row = init_nd

    cdef unsigned long long seed = <unsigned long long> (int(seed_obj) & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned int k0 = <unsigned int> (seed & 0xFFFFFFFF)
    cdef unsigned int k1 = <unsigned int> (seed >> 32)

    cdef double init_total = 0.0
    cdef int l0
    for l0 in range(L):
        init_total += init_row[l0]

    # raw 3-D views for row pointers
    cdef double[:, :, ::1] R = wk.R
    cdef double[:, :, ::1] P = wk.P

    cdef long long successes = 0
    cdef long long run
    cdef unsigned int c2, c3, blk
    cdef unsigned int words[4]
    cdef int phase
    cdef double buf0, buf1, u, t, dt, rho
    cdef int l, j, a
    cdef bint reached

    for run in range(runs):
        c2 = <unsigned int> (run & 0xFFFFFFFF)
        c3 = <unsigned int> ((run >> 32) & 0xFFFFFFFF)
        blk = 0
        phase = 2
        buf0 = 0.0
        buf1 = 0.0

        # inline next_double() sequence mirrors _kernel_py._Stream
        if phase >= 2:
            _philox_block(blk, 0, c2, c3, k0, k1, words)
            blk += 1
            buf0 = <double> ((((<unsigned long long> words[0]) << 32 | words[1]) >> 11)) * _INV53
            buf1 = <double> ((((<unsigned long long> words[2]) << 32 | words[3]) >> 11)) * _INV53
            phase = 0
        if phase == 0:
            u = buf0
            phase = 1
        else:
            u = buf1
            phase = 2

        l = _draw_row(&init_row[0], L, u, init_total)
        t = 0.0
        j = 0
        reached = False
        while True:
            if wk.is_goal[l] and wk.absorbing:
                reached = True
                break
            if not wk.is_cont[l]:
                a = profs[j, l]
                if a < 0:
                    break
                if phase >= 2:
                    _philox_block(blk, 0, c2, c3, k0, k1, words)
                    blk += 1
                    buf0 = <double> ((((<unsigned long long> words[0]) << 32 | words[1]) >> 11)) * _INV53
                    buf1 = <double> ((((<unsigned long long> words[2]) << 32 | words[3]) >> 11)) * _INV53
                    phase = 0
                if phase == 0:
                    u = buf0
                    phase = 1
                else:
                    u = buf1
                    phase = 2
                l = _draw_row(&P[l, a, 0], L, u, 1.0)
                continue
            a = profs[j, l]
            if a < 0:
                t = t_max
                break
            rho = wk.exit_rate[l, a]
            if phase >= 2:
                _philox_block(blk, 0, c2, c3, k0, k1, words)
                blk += 1
                buf0 = <double> ((((<unsigned long long> words[0]) << 32 | words[1]) >> 11)) * _INV53
                buf1 = <double> ((((<unsigned long long> words[2]) << 32 | words[3]) >> 11)) * _INV53
                phase = 0
            if phase == 0:
                u = buf0
                phase = 1
            else:
                u = buf1
                phase = 2
            dt = -log1p(-u) / rho
            while j + 1 < n_int and t + dt > bp[j + 1]:
                t = bp[j + 1]
                j += 1
                a = profs[j, l]
                if a < 0:
                    break
                rho = wk.exit_rate[l, a]
                if phase >= 2:
                    _philox_block(blk, 0, c2, c3, k0, k1, words)
                    blk += 1
                    buf0 = <double> ((((<unsigned long long> words[0]) << 32 | words[1]) >> 11)) * _INV53
                    buf1 = <double> ((((<unsigned long long> words[2]) << 32 | words[3]) >> 11)) * _INV53
                    phase = 0
                if phase == 0:
                    u = buf0
                    phase = 1
                else:
                    u = buf1
                    phase = 2
                dt = -log1p(-u) / rho
            if a < 0:
                t = t_max
                break
            if t + dt > t_max:
                t = t_max
                break
            t = t + dt
            if phase >= 2:
                _philox_block(blk, 0, c2, c3, k0, k1, words)
                blk += 1
                buf0 = <double> ((((<unsigned long long> words[0]) << 32 | words[1]) >> 11)) * _INV53
                buf1 = <double> ((((<unsigned long long> words[2]) << 32 | words[3]) >> 11)) * _INV53
                phase = 0
            if phase == 0:
                u = buf0
                phase = 1
            else:
                u = buf1
                phase = 2
            l = _draw_row(&R[l, a, 0], L, u, rho)
        if not wk.absorbing:
            reached = <bint> wk.is_goal[l]
        if reached:
            successes += 1
    return int(successes)
