"""Compiled forward/backward passes of the Monte-Carlo log-likelihood.

Each kernel evaluates, for one stream,

    L = event_weight * sum_i log lam_{k_i}(t_i) - weight * sum_m sum_k lam_k(u_m)

and optionally its exact gradient with respect to the packed parameter
vector.  ``samples`` must be sorted; ``weight`` is ``T / N``.  The returned
``err`` is the index of the first event whose intensity underflowed to zero,
or -1.
"""
import numpy as np
from numba import njit

MAX_EXP = 700.0


@njit(cache=True, inline="always")
def _softplus(r):
    # log(1 + exp(r)), stable
    if r > 0:
        return r + np.log1p(np.exp(-r))
    return np.log1p(np.exp(r))


@njit(cache=True, inline="always")
def _sigmoid(r):
    if r >= 0:
        return 1.0 / (1.0 + np.exp(-r))
    e = np.exp(r)
    return e / (1.0 + e)


@njit(cache=True)
def classical_pass(mu, alpha, delta, s, soft, times, types, samples, weight, event_weight, want_grad):
    K = mu.size
    n_ev = times.size
    g_mu = np.zeros(K)
    g_alpha = np.zeros((K, K))
    g_delta = np.zeros((K, K))
    g_s = np.zeros(K)
    per_event = np.zeros(n_ev)
    lam_total = np.zeros(n_ev)
    act = np.empty(K)
    err = -1

    for i in range(n_ev):
        t = times[i]
        for k in range(K):
            act[k] = mu[k]
        for h in range(i):
            j = types[h] - 1
            lag = t - times[h]
            for k in range(K):
                act[k] += alpha[j, k] * np.exp(-delta[j, k] * lag)
        tot = 0.0
        for k in range(K):
            tot += s[k] * _softplus(act[k] / s[k]) if soft else act[k]
        ki = types[i] - 1
        lam = s[ki] * _softplus(act[ki] / s[ki]) if soft else act[ki]
        lam_total[i] = tot
        if not lam > 0.0:
            if err < 0:
                err = i
            per_event[i] = -np.inf
            continue
        per_event[i] = np.log(lam)
        if want_grad and event_weight != 0.0:
            coef = event_weight / lam
            r = act[ki] / s[ki]
            g = coef * _sigmoid(r) if soft else coef
            if soft:
                g_s[ki] += coef * (_softplus(r) - r * _sigmoid(r))
            g_mu[ki] += g
            for h in range(i):
                j = types[h] - 1
                lag = t - times[h]
                e = np.exp(-delta[j, ki] * lag)
                g_alpha[j, ki] += g * e
                g_delta[j, ki] -= g * alpha[j, ki] * lag * e

    integral = 0.0
    n_hist = 0
    for m in range(samples.size):
        u = samples[m]
        while n_hist < n_ev and times[n_hist] < u:
            n_hist += 1
        for k in range(K):
            act[k] = mu[k]
        for h in range(n_hist):
            j = types[h] - 1
            lag = u - times[h]
            for k in range(K):
                act[k] += alpha[j, k] * np.exp(-delta[j, k] * lag)
        for k in range(K):
            if soft:
                r = act[k] / s[k]
                integral += weight * s[k] * _softplus(r)
            else:
                integral += weight * act[k]
        if want_grad:
            for k in range(K):
                if soft:
                    r = act[k] / s[k]
                    sg = _sigmoid(r)
                    g = -weight * sg
                    g_s[k] -= weight * (_softplus(r) - r * sg)
                else:
                    g = -weight
                g_mu[k] += g
                for h in range(n_hist):
                    j = types[h] - 1
                    lag = u - times[h]
                    e = np.exp(-delta[j, k] * lag)
                    g_alpha[j, k] += g * e
                    g_delta[j, k] -= g * alpha[j, k] * lag * e

    event_term = 0.0
    for i in range(n_ev):
        event_term += per_event[i]
    if soft:
        grad = np.concatenate((g_mu, g_alpha.ravel(), g_delta.ravel(), g_s))
    else:
        grad = np.concatenate((g_mu, g_alpha.ravel(), g_delta.ravel()))
    return event_term, integral, per_event, lam_total, grad, err


@njit(cache=True)
def _unpack(vec, K, D):
    o = 0
    embed = vec[o:o + (K + 1) * D].reshape((K + 1, D))
    o += (K + 1) * D
    W = vec[o:o + 7 * D * D].reshape((7, D, D))
    o += 7 * D * D
    U = vec[o:o + 7 * D * D].reshape((7, D, D))
    o += 7 * D * D
    b = vec[o:o + 7 * D].reshape((7, D))
    o += 7 * D
    w = vec[o:o + K * D].reshape((K, D))
    o += K * D
    s = vec[o:o + K]
    return embed, W, U, b, w, s


@njit(cache=True)
def neural_pass(vec, K, D, decay_scale, times, types, samples, weight, event_weight, want_grad):
    embed, W, U, b, w, s = _unpack(vec, K, D)
    n_ev = times.size
    n_up = n_ev + 1  # update 0 reads the BOS marker

    # forward tape, indexed by update j
    x_type = np.zeros(n_up, dtype=np.int64)
    h_in = np.zeros((n_up, D))
    c_in = np.zeros((n_up, D))
    e_in = np.zeros((n_up, D))  # exp factor of the decay feeding update j
    clamp_in = np.zeros((n_up, D), dtype=np.bool_)
    dt_in = np.zeros(n_up)
    ct_prev = np.zeros((n_up, D))
    gates = np.zeros((n_up, 7, D))  # i, f, z, o, ibar, fbar, pre_d
    cs = np.zeros((n_up, D))
    ct = np.zeros((n_up, D))
    dl = np.zeros((n_up, D))
    og = np.zeros((n_up, D))
    anchor = np.zeros(n_up)

    per_event = np.zeros(n_ev)
    lam_total = np.zeros(n_ev)
    err = -1
    pre = np.empty(D)

    for j in range(n_up):
        if j == 0:
            x_type[0] = 0
            anchor[0] = 0.0
        else:
            t = times[j - 1]
            x_type[j] = types[j - 1]
            anchor[j] = t
            dt = t - anchor[j - 1]
            dt_in[j] = dt
            for d in range(D):
                arg = dl[j - 1, d] * dt
                if arg > MAX_EXP:
                    arg = MAX_EXP
                    clamp_in[j, d] = True
                e = np.exp(-arg)
                e_in[j, d] = e
                c = ct[j - 1, d] + (cs[j - 1, d] - ct[j - 1, d]) * e
                c_in[j, d] = c
                h_in[j, d] = og[j - 1, d] * np.tanh(c)
                ct_prev[j, d] = ct[j - 1, d]
            # log-intensity of event j at its time
            tot = 0.0
            lam_k = 0.0
            kk = types[j - 1] - 1
            for k in range(K):
                a = 0.0
                for d in range(D):
                    a += w[k, d] * h_in[j, d]
                lam = s[k] * _softplus(a / s[k])
                tot += lam
                if k == kk:
                    lam_k = lam
            lam_total[j - 1] = tot
            if lam_k > 0.0:
                per_event[j - 1] = np.log(lam_k)
            else:
                per_event[j - 1] = -np.inf
                if err < 0:
                    err = j - 1
        x = embed[x_type[j]]
        for g in range(7):
            for d in range(D):
                acc = b[g, d]
                for q in range(D):
                    acc += W[g, d, q] * x[q] + U[g, d, q] * h_in[j, q]
                pre[d] = acc
            for d in range(D):
                if g == 2:
                    gates[j, g, d] = 2.0 * _sigmoid(pre[d]) - 1.0
                elif g == 6:
                    gates[j, g, d] = pre[d]
                else:
                    gates[j, g, d] = _sigmoid(pre[d])
        for d in range(D):
            gi = gates[j, 0, d]
            gf = gates[j, 1, d]
            z = gates[j, 2, d]
            cs[j, d] = gf * c_in[j, d] + gi * z
            ct[j, d] = gates[j, 5, d] * ct_prev[j, d] + gates[j, 4, d] * z
            dl[j, d] = decay_scale * _softplus(gates[j, 6, d] / decay_scale)
            og[j, d] = gates[j, 3, d]

    # integral: sample m belongs to the interval after update j = #events before it
    interval = np.zeros(samples.size, dtype=np.int64)
    integral = 0.0
    jj = 0
    hvec = np.empty(D)
    cvec = np.empty(D)
    for m in range(samples.size):
        u = samples[m]
        while jj < n_ev and times[jj] < u:
            jj += 1
        interval[m] = jj
        dt = u - anchor[jj]
        for d in range(D):
            arg = min(dl[jj, d] * dt, MAX_EXP)
            c = ct[jj, d] + (cs[jj, d] - ct[jj, d]) * np.exp(-arg)
            hvec[d] = og[jj, d] * np.tanh(c)
        for k in range(K):
            a = 0.0
            for d in range(D):
                a += w[k, d] * hvec[d]
            integral += weight * s[k] * _softplus(a / s[k])

    event_term = 0.0
    for i in range(n_ev):
        event_term += per_event[i]

    grad = np.zeros(vec.size)
    if not want_grad:
        return event_term, integral, per_event, lam_total, grad, err

    gE, gW, gU, gb, gw, gs = _unpack(grad, K, D)
    a_cs = np.zeros(D)
    a_ct = np.zeros(D)
    a_dl = np.zeros(D)
    a_o = np.zeros(D)
    # adjoints w.r.t. the decayed point read by update j+1 (carried between iterations)
    dh_u = np.zeros(D)
    dc_u = np.zeros(D)
    dct_direct = np.zeros(D)
    dpre = np.zeros((7, D))
    dx = np.zeros(D)
    dh_in = np.zeros(D)
    m_hi = samples.size

    for j in range(n_up - 1, -1, -1):
        a_cs[:] = 0.0
        a_ct[:] = 0.0
        a_dl[:] = 0.0
        a_o[:] = 0.0
        if j < n_up - 1:
            # decay from state j to t_{j+1}, as read by update j+1 and by event j+1
            for d in range(D):
                c = c_in[j + 1, d]
                th = np.tanh(c)
                dc = dc_u[d] + dh_u[d] * og[j, d] * (1.0 - th * th)
                a_o[d] += dh_u[d] * th
                e = e_in[j + 1, d]
                a_cs[d] += dc * e
                a_ct[d] += dc * (1.0 - e) + dct_direct[d]
                if not clamp_in[j + 1, d]:
                    a_dl[d] -= dc * (cs[j, d] - ct[j, d]) * dt_in[j + 1] * e
        # Monte-Carlo samples on interval j (samples are sorted, so they form a block)
        m_lo = m_hi
        while m_lo > 0 and interval[m_lo - 1] == j:
            m_lo -= 1
        for m in range(m_lo, m_hi):
            dt = samples[m] - anchor[j]
            for d in range(D):
                arg = dl[j, d] * dt
                clamped = arg > MAX_EXP
                if clamped:
                    arg = MAX_EXP
                e = np.exp(-arg)
                c = ct[j, d] + (cs[j, d] - ct[j, d]) * e
                cvec[d] = c
                hvec[d] = og[j, d] * np.tanh(c)
            for d in range(D):
                dh_in[d] = 0.0
            for k in range(K):
                a = 0.0
                for d in range(D):
                    a += w[k, d] * hvec[d]
                r = a / s[k]
                sg = _sigmoid(r)
                gs[k] -= weight * (_softplus(r) - r * sg)
                coef = -weight * sg
                for d in range(D):
                    gw[k, d] += coef * hvec[d]
                    dh_in[d] += coef * w[k, d]
            for d in range(D):
                th = np.tanh(cvec[d])
                dc = dh_in[d] * og[j, d] * (1.0 - th * th)
                a_o[d] += dh_in[d] * th
                arg = dl[j, d] * dt
                e = np.exp(-min(arg, MAX_EXP))
                a_cs[d] += dc * e
                a_ct[d] += dc * (1.0 - e)
                if arg <= MAX_EXP:
                    a_dl[d] -= dc * (cs[j, d] - ct[j, d]) * dt * e
        m_hi = m_lo

        # back through update j
        for d in range(D):
            gi = gates[j, 0, d]
            gf = gates[j, 1, d]
            z = gates[j, 2, d]
            go = gates[j, 3, d]
            gib = gates[j, 4, d]
            gfb = gates[j, 5, d]
            d_gi = a_cs[d] * z
            d_gf = a_cs[d] * c_in[j, d]
            d_z = a_cs[d] * gi + a_ct[d] * gib
            d_gib = a_ct[d] * z
            d_gfb = a_ct[d] * ct_prev[j, d]
            dc_u[d] = a_cs[d] * gf
            dct_direct[d] = a_ct[d] * gfb
            dpre[0, d] = d_gi * gi * (1.0 - gi)
            dpre[1, d] = d_gf * gf * (1.0 - gf)
            dpre[2, d] = d_z * 0.5 * (1.0 - z * z)
            dpre[3, d] = a_o[d] * go * (1.0 - go)
            dpre[4, d] = d_gib * gib * (1.0 - gib)
            dpre[5, d] = d_gfb * gfb * (1.0 - gfb)
            dpre[6, d] = a_dl[d] * _sigmoid(gates[j, 6, d] / decay_scale)
        for d in range(D):
            dx[d] = 0.0
            dh_in[d] = 0.0
        x = embed[x_type[j]]
        for g in range(7):
            for d in range(D):
                dp = dpre[g, d]
                if dp == 0.0:
                    continue
                gb[g, d] += dp
                for q in range(D):
                    gW[g, d, q] += dp * x[q]
                    gU[g, d, q] += dp * h_in[j, q]
                    dx[q] += W[g, d, q] * dp
                    dh_in[q] += U[g, d, q] * dp
        for q in range(D):
            gE[x_type[j], q] += dx[q]
        if j >= 1:
            for d in range(D):
                dh_u[d] = dh_in[d]
            # event j's log-intensity, read at the same decayed point
            kk = types[j - 1] - 1
            if event_weight != 0.0 and per_event[j - 1] > -np.inf:
                a = 0.0
                for d in range(D):
                    a += w[kk, d] * h_in[j, d]
                r = a / s[kk]
                lam = s[kk] * _softplus(r)
                sg = _sigmoid(r)
                coef = event_weight / lam
                gs[kk] += coef * (_softplus(r) - r * sg)
                for d in range(D):
                    gw[kk, d] += coef * sg * h_in[j, d]
                    dh_u[d] += coef * sg * w[kk, d]

    return event_term, integral, per_event, lam_total, grad, err
