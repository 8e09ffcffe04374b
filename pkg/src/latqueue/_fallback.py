"""Pure-Python simulation kernels.

Same signatures, same arithmetic order and same outputs as the compiled
``_kernels`` module; used when the extension is not built or when
``LATQUEUE_BACKEND=python`` is set.
"""

from math import log, log1p, inf


def _rate(i, x, nbr, w, cnt, family, noise):
    xi = x[i]
    if xi == 0:
        return 0.0
    nb = nbr[i]
    wi = w[i]
    den = 0.0
    for k in range(cnt[i]):
        den += wi[k] * x[nb[k]]
    if family == 0:
        return xi / den
    if family == 1:
        return log1p(xi / den)
    return log1p(xi / (den + noise))


def discrete_chunk(x, nbr_idx, nbr_w, nbr_cnt, xi, su, ru, scheduler, family, noise,
                   q, rnbr, rcnt, rdeg, t0, burn, batch_len, nbatch,
                   acc_x, acc_x2, acc_eta, hist, overflow, trace_stride, trace,
                   eta, inflow, tau):
    """Advance ``x`` in place through ``len(xi)`` slots; return exclusion conflicts."""
    n = len(x)
    C = len(xi)
    H = hist.shape[2]
    nbr = nbr_idx.tolist()
    w = nbr_w.tolist()
    cnt = nbr_cnt.tolist()
    rn = rnbr.tolist()
    xs = x.tolist()
    xi_rows = xi.tolist()
    su_rows = su.tolist()
    ru_rows = ru.tolist()
    end = burn + nbatch * batch_len
    conflicts = 0
    et = [0] * n
    inn = [0] * n
    ta = [inf] * n
    for s in range(C):
        k = t0 + s
        if trace_stride > 0 and k % trace_stride == 0:
            row = k // trace_stride
            if row < trace.shape[0]:
                trace[row, :] = xs
        u = su_rows[s]
        if scheduler == 1:
            for i in range(n):
                ta[i] = -log(u[i]) / xs[i] if xs[i] > 0 else inf
            for i in range(n):
                e = 0
                if xs[i] > 0:
                    e = 1
                    ti = ta[i]
                    nb = nbr[i]
                    wi = w[i]
                    for m in range(1, cnt[i]):
                        j = nb[m]
                        lhs = wi[m] * ti
                        tj = ta[j]
                        if lhs < tj or (lhs == tj and i < j):
                            continue
                        e = 0
                        break
                et[i] = e
        else:
            for i in range(n):
                et[i] = 1 if xs[i] > 0 and u[i] < _rate(i, xs, nbr, w, cnt, family, noise) else 0
        if scheduler == 1:
            for i in range(n):
                if et[i]:
                    nb = nbr[i]
                    wi = w[i]
                    for m in range(1, cnt[i]):
                        j = nb[m]
                        if j > i and et[j] and wi[m] >= 1.0:
                            conflicts += 1
        if burn <= k < end:
            b = (k - burn) // batch_len
            ax = acc_x[b]
            ax2 = acc_x2[b]
            ae = acc_eta[b]
            hb = hist[b]
            ob = overflow[b]
            for i in range(n):
                v = xs[i]
                ax[i] += v
                ax2[i] += v * v
                ae[i] += et[i]
                if v < H:
                    hb[i, v] += 1
                else:
                    ob[i] += 1
        for i in range(n):
            inn[i] = 0
        ur = ru_rows[s]
        for i in range(n):
            if et[i] and ur[i] >= q:
                m = int((ur[i] - q) / (1.0 - q) * rdeg)
                if m < rcnt:
                    inn[rn[i][m]] += 1
        a = xi_rows[s]
        for i in range(n):
            xs[i] = xs[i] - et[i] + inn[i] + a[i]
    x[:] = xs
    eta[:] = et
    inflow[:] = inn
    tau[:] = ta
    return conflicts


def _flush(i, t1, x, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H):
    t0 = last_t[i]
    last_t[i] = t1
    end = burn_t + nbatch * batch_dur
    lo = t0 if t0 > burn_t else burn_t
    hi = t1 if t1 < end else end
    if hi <= lo:
        return
    v = x[i]
    b = int((lo - burn_t) / batch_dur)
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


def continuous_chunk(x, nbr_idx, nbr_w, nbr_cnt, hold, ev, ru, lam_cum, lam_tot,
                     psimax, Lam, family, noise, q, rnbr, rcnt, rdeg,
                     horizon, burn_t, batch_dur, nbatch,
                     acc_x, acc_x2, acc_dep, hist, overflow, last_t,
                     trace_stride, trace, clock, counters, extremes):
    """Advance the uniformized chain through at most ``len(hold)`` steps.

    ``clock[0]`` is the current time; ``counters`` holds
    (self_loops, next_trace_row, events, finished); ``extremes[0]`` tracks
    the largest psi_j / psi_max seen.  Returns the number of steps consumed.
    """
    n = len(x)
    H = hist.shape[2]
    nbr = nbr_idx.tolist()
    w = nbr_w.tolist()
    cnt = nbr_cnt.tolist()
    rn = rnbr.tolist()
    xs = x.tolist()
    lc = lam_cum.tolist()
    t = clock[0]
    self_loops = int(counters[0])
    row = int(counters[1])
    events = int(counters[2])
    rows = trace.shape[0]
    worst = extremes[0]
    end = burn_t + nbatch * batch_dur
    C = len(hold)
    used = 0
    finished = False
    for s in range(C):
        used = s + 1
        tn = t + hold[s] / Lam
        if tn >= horizon:
            tn = horizon
            finished = True
        if trace_stride > 0:
            while row < rows and row * trace_stride < tn:
                trace[row, :] = xs
                row += 1
        t = tn
        if finished:
            break
        v = ev[s] * Lam
        if v < lam_tot:
            lo, hi = 0, n - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if lc[mid] > v:
                    hi = mid
                else:
                    lo = mid + 1
            i = lo
            _flush(i, t, xs, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
            xs[i] += 1
            events += 1
            continue
        v -= lam_tot
        j = int(v / psimax)
        if j >= n:
            j = n - 1
        r = v - j * psimax
        p = _rate(j, xs, nbr, w, cnt, family, noise)
        if p / psimax > worst:
            worst = p / psimax
        if r < p:
            _flush(j, t, xs, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
            xs[j] -= 1
            events += 1
            if burn_t <= t < end:
                b = int((t - burn_t) / batch_dur)
                if b >= nbatch:
                    b = nbatch - 1
                acc_dep[b, j] += 1
            u = ru[s]
            if u >= q:
                m = int((u - q) / (1.0 - q) * rdeg)
                if m < rcnt:
                    d = rn[j][m]
                    _flush(d, t, xs, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
                    xs[d] += 1
        else:
            self_loops += 1
    if finished:
        for i in range(n):
            _flush(i, horizon, xs, last_t, burn_t, batch_dur, nbatch, acc_x, acc_x2, hist, overflow, H)
    x[:] = xs
    clock[0] = t
    counters[0] = self_loops
    counters[1] = row
    counters[2] = events
    counters[3] = 1 if finished else 0
    extremes[0] = worst
    return used
