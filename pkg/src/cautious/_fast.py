"""Compiled self-play inner loop.

The dynamics are inherently sequential, so desk-scale theorem checks (tens of
runs at 10^5 rounds) need a compiled per-round loop rather than vectorized
NumPy.  This mirrors `learners.Learner` exactly: same update order, same
max-shifted softmax, same threshold/cap/Newton rate solve.  Payoff tensors are
passed flattened (C order) with per-player offsets; joint profiles are
enumerated in mixed radix with player 0 slowest.

Modes: 0 = adaptive rate with optimism, 1 = constant rate with optimism,
2 = constant rate without optimism.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MODE_CODES = {"dlrc": 0, "omwu": 1, "mwu": 2}


@njit(cache=True)
def _rate_newton(r, d, eta, alpha, threshold, rel_tol, max_iter):
    """Same contract as rate_control.solve_rate, on the first d entries of r."""
    rmax = r[0]
    for k in range(1, d):
        if r[k] > rmax:
            rmax = r[k]
    if rmax >= threshold:
        return eta
    a1 = alpha - 1.0

    # derivative of the rate objective at lam (f1, f2 via central softmax moments)
    def _d12(lam):
        m = r[0] * lam
        for k in range(1, d):
            z = r[k] * lam
            if z > m:
                m = z
        s = 0.0
        m1 = 0.0
        for k in range(d):
            w = np.exp(lam * r[k] - m)
            s += w
            m1 += w * r[k]
        m1 /= s
        c2 = 0.0
        for k in range(d):
            w = np.exp(lam * r[k] - m)
            dev = r[k] - m1
            c2 += w * dev * dev
        c2 /= s
        f1 = m1 + a1 / lam
        f2 = c2 - a1 / (lam * lam)
        return f1, f2

    f1_eta, _ = _d12(eta)
    if f1_eta >= 0.0:
        return eta

    x = a1 / (-rmax)
    if x > eta:
        x = eta
    f1, f2 = _d12(x)
    if f1 > 0.0:
        lo = x
        hi = eta
    else:
        hi = x
        lo = -1.0
        probe = x
        while lo < 0.0:
            probe *= 0.5
            if probe < 1e-300:
                return eta * 1e-300  # unreachable for finite regrets
            f1, f2 = _d12(probe)
            if f1 > 0.0:
                lo = probe
            else:
                hi = probe
        x = probe

    for _ in range(max_iter):
        if abs(f1) <= rel_tol * abs(f2) * x:
            break
        xn = x - f1 / f2
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if xn == x:
            break
        x = xn
        f1, f2 = _d12(x)
        if f1 > 0.0:
            lo = x
        else:
            hi = x
    if x > eta:
        x = eta
    return x


@njit(cache=True)
def run_selfplay(payoffs, offsets, dims, T, eta, alphas, thresholds, mode, rel_tol,
                 max_iter, x_hist, nu_hist, lam_log, reg_log, exp_log, path_log,
                 var_log, emp, track_emp):
    """Simulate T rounds of n-player self-play, filling the preallocated logs.

    payoffs: concatenated flat payoff tensors; offsets[i] is player i's start.
    dims: per-player action counts (state arrays are padded to max(dims)).
    emp: flat joint-profile accumulator for the empirical product distribution.
    """
    n = dims.shape[0]
    dmax = 0
    total = 1
    for i in range(n):
        if dims[i] > dmax:
            dmax = dims[i]
        total *= dims[i]

    U = np.zeros((n, dmax))
    u_prev = np.zeros((n, dmax))
    x = np.zeros((n, dmax))
    r = np.zeros(dmax)
    nu = np.zeros((n, dmax))
    x_prev = np.zeros((n, dmax))
    nu_prev = np.zeros((n, dmax))
    digs = np.empty(n, dtype=np.int64)

    for t in range(T):
        # choose strategies
        for i in range(n):
            d = dims[i]
            for k in range(d):
                if mode == 2:
                    r[k] = U[i, k]
                else:
                    r[k] = U[i, k] + u_prev[i, k]
            if mode == 0:
                lam = _rate_newton(r, d, eta, alphas[i], thresholds[i], rel_tol, max_iter)
            else:
                lam = eta
            lam_log[t, i] = lam
            m = lam * r[0]
            for k in range(1, d):
                z = lam * r[k]
                if z > m:
                    m = z
            s = 0.0
            for k in range(d):
                x[i, k] = np.exp(lam * r[k] - m)
                s += x[i, k]
            for k in range(d):
                x[i, k] /= s
                x_hist[t, i, k] = x[i, k]

        # utility gradients: for each joint profile, product of the others' masses
        for i in range(n):
            for k in range(dims[i]):
                nu[i, k] = 0.0
        for flat in range(total):
            # decode the joint profile (player 0 slowest)
            idx = flat
            for i in range(n - 1, -1, -1):
                digs[i] = idx % dims[i]
                idx //= dims[i]
            if track_emp:
                p_all = 1.0
                for j in range(n):
                    p_all *= x[j, digs[j]]
                emp[flat] += p_all
            for i in range(n):
                p_other = 1.0
                for j in range(n):
                    if j != i:
                        p_other *= x[j, digs[j]]
                nu[i, digs[i]] += payoffs[offsets[i] + flat] * p_other

        # observe
        for i in range(n):
            d = dims[i]
            ev = 0.0
            for k in range(d):
                ev += nu[i, k] * x[i, k]
                nu_hist[t, i, k] = nu[i, k]
            exp_log[t, i] = ev
            mx = -1e300
            for k in range(d):
                u = nu[i, k] - ev
                U[i, k] += u
                u_prev[i, k] = u
                if U[i, k] > mx:
                    mx = U[i, k]
            reg_log[t, i] = mx
            if t > 0:
                pl = 0.0
                vmax = 0.0
                for k in range(d):
                    pl += abs(x[i, k] - x_prev[i, k])
                    dv = abs(nu[i, k] - nu_prev[i, k])
                    if dv > vmax:
                        vmax = dv
                path_log[t - 1, i] = pl * pl
                var_log[t - 1, i] = vmax * vmax
        for i in range(n):
            for k in range(dims[i]):
                x_prev[i, k] = x[i, k]
                nu_prev[i, k] = nu[i, k]
