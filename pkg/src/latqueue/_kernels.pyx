# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels (slot loop and uniformized event loop).

Mirrors ``_fallback`` statement for statement so both backends produce
bit-identical trajectories from the same pre-drawn random numbers.
"""

from libc.math cimport log, log1p, INFINITY


cdef inline double _rate(Py_ssize_t i, long long[::1] x, long long[:, ::1] nbr,
                         double[:, ::1] w, long long[::1] cnt, int family,
                         double noise) nogil:
    cdef long long xi = x[i]
    cdef double den = 0.0
    cdef Py_ssize_t k
    if xi == 0:
        return 0.0
    for k in range(cnt[i]):
        den += w[i, k] * x[nbr[i, k]]
    if family == 0:
        return xi / den
    if family == 1:
        return log1p(xi / den)
    return log1p(xi / (den + noise))


def discrete_chunk(long long[::1] x, long long[:, ::1] nbr_idx, double[:, ::1] nbr_w,
                   long long[::1] nbr_cnt, long long[:, ::1] xi, double[:, ::1] su,
                   double[:, ::1] ru, int scheduler, int family, double noise,
                   double q, long long[:, ::1] rnbr, long long rcnt, long long rdeg,
                   long long t0, long long burn, long long batch_len, long long nbatch,
                   long long[:, ::1] acc_x, long long[:, ::1] acc_x2,
                   long long[:, ::1] acc_eta, long long[:, :, ::1] hist,
                   long long[:, ::1] overflow, long long trace_stride,
                   long long[:, ::1] trace, long long[::1] eta, long long[::1] inflow,
                   double[::1] tau):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t C = xi.shape[0]
    cdef Py_ssize_t H = hist.shape[2]
    cdef Py_ssize_t s, i, m, j
    cdef long long k, row, b, v, e
    cdef long long end = burn + nbatch * batch_len
    cdef long long conflicts = 0
    cdef double ti, lhs, tj, u
    with nogil:
        for s in range(C):
            k = t0 + s
            if trace_stride > 0 and k % trace_stride == 0:
                row = k // trace_stride
                if row < trace.shape[0]:
                    for i in range(n):
                        trace[row, i] = x[i]
            if scheduler == 1:
                for i in range(n):
                    if x[i] > 0:
                        tau[i] = -log(su[s, i]) / x[i]
                    else:
                        tau[i] = INFINITY
                for i in range(n):
                    e = 0
                    if x[i] > 0:
                        e = 1
                        ti = tau[i]
                        for m in range(1, nbr_cnt[i]):
                            j = nbr_idx[i, m]
                            lhs = nbr_w[i, m] * ti
                            tj = tau[j]
                            if lhs < tj or (lhs == tj and i < j):
                                continue
                            e = 0
                            break
                    eta[i] = e
            else:
                for i in range(n):
                    if x[i] > 0 and su[s, i] < _rate(i, x, nbr_idx, nbr_w, nbr_cnt, family, noise):
                        eta[i] = 1
                    else:
                        eta[i] = 0
            if scheduler == 1:
                for i in range(n):
                    if eta[i]:
                        for m in range(1, nbr_cnt[i]):
                            j = nbr_idx[i, m]
                            if j > i and eta[j] and nbr_w[i, m] >= 1.0:
                                conflicts += 1
            if burn <= k < end:
                b = (k - burn) // batch_len
                for i in range(n):
                    v = x[i]
                    acc_x[b, i] += v
                    acc_x2[b, i] += v * v
                    acc_eta[b, i] += eta[i]
                    if v < H:
                        hist[b, i, v] += 1
                    else:
                        overflow[b, i] += 1
            for i in range(n):
                inflow[i] = 0
            for i in range(n):
                u = ru[s, i]
                if eta[i] and u >= q:
                    m = <Py_ssize_t>((u - q) / (1.0 - q) * rdeg)
                    if m < rcnt:
                        inflow[rnbr[i, m]] += 1
            for i in range(n):
                x[i] = x[i] - eta[i] + inflow[i] + xi[s, i]
    return conflicts


cdef inline void _flush(Py_ssize_t i, double t1, long long[::1] x, double[::1] last_t,
                        double burn_t, double batch_dur, long long nbatch,
                        double[:, ::1] acc_x, double[:, ::1] acc_x2,
                        double[:, :, ::1] hist, double[:, ::1] overflow,
                        Py_ssize_t H) nogil:
    cdef double t0 = last_t[i]
    cdef double end = burn_t + nbatch * batch_dur
    cdef double lo, hi, bend, seg_end, dt
    cdef long long v, b
    last_t[i] = t1
    lo = t0 if t0 > burn_t else burn_t
    hi = t1 if t1 < end else end
    if hi <= lo:
        return
    v = x[i]
    b = <long long>((lo - burn_t) / batch_dur)
    if b >= nbatch:
        b = nbatch - 1
    while lo < hi:
        bend = burn_t + (b + 1) * batch_dur
        seg_end = hi if hi < bend else bend
        dt = seg_end - lo
        if dt > 0:
            acc_x[b, i] += dt * v
            acc_x2[b, i] += dt * v * v
            if v < H:
                hist[b, i, v] += dt
            else:
                overflow[b, i] += dt
        lo = seg_end
        b += 1
        if b >= nbatch:
            break


def continuous_chunk(long long[::1] x, long long[:, ::1] nbr_idx, double[:, ::1] nbr_w,
                     long long[::1] nbr_cnt, double[::1] hold, double[::1] ev,
                     double[::1] ru, double[::1] lam_cum, double lam_tot,
                     double psimax, double Lam, int family, double noise, double q,
                     long long[:, ::1] rnbr, long long rcnt, long long rdeg,
                     double horizon, double burn_t, double batch_dur, long long nbatch,
                     double[:, ::1] acc_x, double[:, ::1] acc_x2, long long[:, ::1] acc_dep,
                     double[:, :, ::1] hist, double[:, ::1] overflow, double[::1] last_t,
                     double trace_stride, long long[:, ::1] trace, double[::1] clock,
                     long long[::1] counters, double[::1] extremes):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t H = hist.shape[2]
    cdef Py_ssize_t C = hold.shape[0]
    cdef Py_ssize_t rows = trace.shape[0]
    cdef Py_ssize_t s, i, lo, hi, mid, j, m, d
    cdef double t = clock[0]
    cdef long long self_loops = counters[0]
    cdef long long row = counters[1]
    cdef long long events = counters[2]
    cdef double worst = extremes[0]
    cdef double end = burn_t + nbatch * batch_dur
    cdef double tn, v, r, p, u
    cdef long long b
    cdef Py_ssize_t used = 0
    cdef bint finished = False
    with nogil:
        for s in range(C):
            used = s + 1
            tn = t + hold[s] / Lam
            if tn >= horizon:
                tn = horizon
                finished = True
            if trace_stride > 0:
                while row < rows and row * trace_stride < tn:
                    for i in range(n):
                        trace[row, i] = x[i]
                    row += 1
            t = tn
            if finished:
                break
            v = ev[s] * Lam
            if v < lam_tot:
                lo = 0
                hi = n - 1
                while lo < hi:
                    mid = (lo + hi) // 2
                    if lam_cum[mid] > v:
                        hi = mid
                    else:
                        lo = mid + 1
                i = lo
                _flush(i, t, x, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
                x[i] += 1
                events += 1
                continue
            v -= lam_tot
            j = <Py_ssize_t>(v / psimax)
            if j >= n:
                j = n - 1
            r = v - j * psimax
            p = _rate(j, x, nbr_idx, nbr_w, nbr_cnt, family, noise)
            if p / psimax > worst:
                worst = p / psimax
            if r < p:
                _flush(j, t, x, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
                x[j] -= 1
                events += 1
                if burn_t <= t < end:
                    b = <long long>((t - burn_t) / batch_dur)
                    if b >= nbatch:
                        b = nbatch - 1
                    acc_dep[b, j] += 1
                u = ru[s]
                if u >= q:
                    m = <Py_ssize_t>((u - q) / (1.0 - q) * rdeg)
                    if m < rcnt:
                        d = rnbr[j, m]
                        _flush(d, t, x, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
                        x[d] += 1
            else:
                self_loops += 1
        if finished:
            for i in range(n):
                _flush(i, horizon, x, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
    clock[0] = t
    counters[0] = self_loops
    counters[1] = row
    counters[2] = events
    counters[3] = 1 if finished else 0
    extremes[0] = worst
    return used
