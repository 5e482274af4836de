"""Compiled per-trial loops for the toy-problem experiment tables.

The 1000-trial tables need up to a few billion scalar iterations, which is
out of reach for the plain-Python pipeline; these kernels run the closed-form
trajectory equations of the two toy setups.  They are validated against the
library path in tests (bit-level on deterministic runs, statistically on
noisy ones).

Trial outcome codes: 0 converged, 1 overflow, 2 iteration cap, 3 stalled.
"""

import math

import numpy as np
from numba import njit

ALGO_IDS = {"vl": 0, "vgl": 1, "vglo": 2, "vglrg": 3}
REASONS = {0: "converged", 1: "overflow", 2: "iteration cap", 3: "stalled"}

OVERFLOW = 1e130
STALL_EPS = 1e-13
STALL_RUN = 25


@njit(cache=True)
def _exp1_trial(algo, lam, alpha, eps, c1, w1, w2, seed, cap, tol):
    np.random.seed(seed)
    w1s = -2.0 * c1
    stall = 0
    for it in range(1, cap + 1):
        n0 = eps * np.random.normal() if eps > 0.0 else 0.0
        a0 = c1 + 0.5 * w1 + n0          # x0 = 0
        x1 = a0
        if algo == 0:
            v1p = -x1 * x1
            v1 = -(x1 - c1) ** 2 + w1 * x1 + w2
            d = v1p - v1
            dw1 = alpha * x1 * d
            dw2 = alpha * d
        else:
            # G'1 - G1 = -2 x1 - (2 (c1 - x1) + w1) = -(2 c1 + w1)
            e = -(2.0 * c1 + w1)
            if algo == 2:
                e = 0.5 * e                  # omega_0 = 1/2
            elif algo == 3:
                e = -(2.0 * c1 + w1)         # -dE/dw1 with E = (2c1+w1)^2/2
            dw1 = alpha * e
            dw2 = 0.0
        w1 += dw1
        w2 += dw2
        m = max(abs(w1), abs(w2))
        if not np.isfinite(m) or m > OVERFLOW:
            return False, it, 1, w1, w2
        if abs(w1 - w1s) < tol:
            return True, it, 0, w1, w2
        if eps == 0.0:
            if max(abs(dw1), abs(dw2)) < STALL_EPS * max(1.0, m):
                stall += 1
                if stall >= STALL_RUN:
                    return False, it, 3, w1, w2
            else:
                stall = 0
    return False, cap, 2, w1, w2


@njit(cache=True)
def exp1_trials(algo, lam, alpha, eps, c1, w0, seeds, cap, tol):
    n = w0.shape[0]
    succ = np.zeros(n, np.bool_)
    iters = np.zeros(n, np.int64)
    reason = np.zeros(n, np.int8)
    wf = np.zeros((n, 2))
    for i in range(n):
        s, it, rs, w1, w2 = _exp1_trial(algo, lam, alpha, eps, c1,
                                        w0[i, 0], w0[i, 1], seeds[i], cap, tol)
        succ[i] = s
        iters[i] = it
        reason[i] = rs
        wf[i, 0] = w1
        wf[i, 1] = w2
    return succ, iters, reason, wf


@njit(cache=True)
def _exp2_roll(w1, w3, lam, c1, c2, k, n0, n1):
    """One noisy greedy trajectory; returns everything the updates need."""
    a0 = w1 / (2.0 * (c1 + k)) + n0              # x0 = 0
    x1 = a0
    a1 = (w3 - 2.0 * c2 * x1) / (2.0 * (c2 + k)) + n1
    x2 = x1 + a1
    g2p = -2.0 * x2
    g2 = -2.0 * c2 * x2 + w3
    g1p = (2.0 * c2 * k * a1 + k * (lam * g2p + (1.0 - lam) * g2)) / (c2 + k)
    g1 = -2.0 * c1 * x1 + w1
    return a0, x1, a1, x2, g1, g1p, g2, g2p


@njit(cache=True)
def _exp2_E(w1, w3, lam, c1, c2, k):
    _, _, _, _, g1, g1p, g2, g2p = _exp2_roll(w1, w3, lam, c1, c2, k, 0.0, 0.0)
    return 0.5 * ((g1 - g1p) ** 2 + (g2 - g2p) ** 2)


@njit(cache=True)
def _exp2_trial(algo, lam, alpha, eps, c1, c2, k, w, seed, cap, tol):
    np.random.seed(seed)
    w1, w2, w3, w4 = w[0], w[1], w[2], w[3]
    stall = 0
    for it in range(1, cap + 1):
        n0 = eps * np.random.normal() if eps > 0.0 else 0.0
        n1 = eps * np.random.normal() if eps > 0.0 else 0.0
        a0, x1, a1, x2, g1, g1p, g2, g2p = _exp2_roll(w1, w3, lam, c1, c2, k, n0, n1)
        dw1 = dw2 = dw3 = dw4 = 0.0
        if algo == 0:
            v2p = -x2 * x2
            v2 = -c2 * x2 * x2 + w3 * x2 + w4
            v1p = -k * a1 * a1 + lam * v2p + (1.0 - lam) * v2
            v1 = -c1 * x1 * x1 + w1 * x1 + w2
            d1 = v1p - v1
            d2 = v2p - v2
            dw1 = alpha * x1 * d1
            dw2 = alpha * d1
            dw3 = alpha * x2 * d2
            dw4 = alpha * d2
        elif algo == 1:
            dw1 = alpha * (g1p - g1)
            dw3 = alpha * (g2p - g2)
        elif algo == 2:
            dw1 = alpha * (g1p - g1) / (2.0 * (c1 + k))
            dw3 = alpha * (g2p - g2) / (2.0 * (c2 + k))
        else:
            h1 = 1e-5 * max(1.0, abs(w1))
            h3 = 1e-5 * max(1.0, abs(w3))
            dE1 = (_exp2_E(w1 + h1, w3, lam, c1, c2, k)
                   - _exp2_E(w1 - h1, w3, lam, c1, c2, k)) / (2.0 * h1)
            dE3 = (_exp2_E(w1, w3 + h3, lam, c1, c2, k)
                   - _exp2_E(w1, w3 - h3, lam, c1, c2, k)) / (2.0 * h3)
            dw1 = -alpha * dE1
            dw3 = -alpha * dE3
        w1 += dw1
        w2 += dw2
        w3 += dw3
        w4 += dw4
        m = max(max(abs(w1), abs(w2)), max(abs(w3), abs(w4)))
        if not np.isfinite(m) or m > OVERFLOW:
            return False, it, 1, w1, w2, w3, w4
        if abs(w1) < tol and abs(w3) < tol:
            return True, it, 0, w1, w2, w3, w4
        if eps == 0.0:
            if max(max(abs(dw1), abs(dw2)), max(abs(dw3), abs(dw4))) \
                    < STALL_EPS * max(1.0, m):
                stall += 1
                if stall >= STALL_RUN:
                    return False, it, 3, w1, w2, w3, w4
            else:
                stall = 0
    return False, cap, 2, w1, w2, w3, w4


@njit(cache=True)
def exp2_trials(algo, lam, alpha, eps, c1, c2, k, w0, seeds, cap, tol):
    n = w0.shape[0]
    succ = np.zeros(n, np.bool_)
    iters = np.zeros(n, np.int64)
    reason = np.zeros(n, np.int8)
    wf = np.zeros((n, 4))
    for i in range(n):
        s, it, rs, w1, w2, w3, w4 = _exp2_trial(algo, lam, alpha, eps, c1, c2, k,
                                                w0[i], seeds[i], cap, tol)
        succ[i] = s
        iters[i] = it
        reason[i] = rs
        wf[i, 0], wf[i, 1], wf[i, 2], wf[i, 3] = w1, w2, w3, w4
    return succ, iters, reason, wf


@njit(cache=True)
def _exp4_roll(w1, c1, c2, c3, k):
    a0 = w1 / (2.0 * (c1 + k))                   # x0 = 0
    x1 = a0
    a1 = (w1 - c3 - 2.0 * c2 * x1) / (2.0 * (c2 + k))
    x2 = x1 + a1
    return a0, x1, a1, x2


@njit(cache=True)
def _exp4_errors(w1, lam, c1, c2, c3, k):
    a0, x1, a1, x2 = _exp4_roll(w1, c1, c2, c3, k)
    g2p = -2.0 * x2
    g2 = -2.0 * c2 * x2 + (w1 - c3)
    g1p = (2.0 * c2 * k * a1 + k * (lam * g2p + (1.0 - lam) * g2)) / (c2 + k)
    g1 = -2.0 * c1 * x1 + w1
    return g1p - g1, g2p - g2


@njit(cache=True)
def _exp4_E(w1, lam, c1, c2, c3, k):
    e1, e2 = _exp4_errors(w1, lam, c1, c2, c3, k)
    return 0.5 * (e1 * e1 + e2 * e2)


@njit(cache=True)
def exp4_trials(algo, lam, alpha, c1, c2, c3, k, w0, cap):
    n = w0.shape[0]
    succ = np.zeros(n, np.bool_)
    iters = np.zeros(n, np.int64)
    reason = np.zeros(n, np.int8)
    wf = np.zeros(n)
    rf = np.zeros(n)
    for i in range(n):
        w1 = w0[i]
        ok = False
        it = 0
        rs = 2
        for it in range(1, cap + 1):
            if algo == 1 or algo == 2:
                e1, e2 = _exp4_errors(w1, lam, c1, c2, c3, k)
                if algo == 2:
                    e1 = e1 / (2.0 * (c1 + k))
                    e2 = e2 / (2.0 * (c2 + k))
                dw1 = alpha * (e1 + e2)
            else:
                h = 1e-5 * max(1.0, abs(w1))
                dE = (_exp4_E(w1 + h, lam, c1, c2, c3, k)
                      - _exp4_E(w1 - h, lam, c1, c2, c3, k)) / (2.0 * h)
                dw1 = -alpha * dE
            w1 += dw1
            if not np.isfinite(w1) or abs(w1) > OVERFLOW:
                rs = 1
                break
            if abs(dw1) < 1e-7 * alpha:
                ok = True
                rs = 0
                break
        succ[i] = ok
        iters[i] = it
        reason[i] = rs
        wf[i] = w1
        a0, x1, a1, x2 = _exp4_roll(w1, c1, c2, c3, k)
        rf[i] = -k * (a0 * a0 + a1 * a1) - x2 * x2
    return succ, iters, reason, wf, rf


@njit(cache=True)
def vl_reparam_trials(lam, alpha, eps, c1, c2, k, Fm, p0, w24, seeds, cap, blow):
    """Empirical divergence check: the two trajectory-shaping weights are a
    linear function (w1, w3) = F p of trainable parameters p; TD updates are
    pulled back through F^T while the value offsets w2, w4 train directly.
    Returns per-trial divergence flags and final parameter norms."""
    n = p0.shape[0]
    diverged = np.zeros(n, np.bool_)
    norms = np.zeros(n)
    for i in range(n):
        np.random.seed(seeds[i])
        p1, p2 = p0[i, 0], p0[i, 1]
        w2, w4 = w24[i, 0], w24[i, 1]
        for it in range(1, cap + 1):
            w1 = Fm[0, 0] * p1 + Fm[0, 1] * p2
            w3 = Fm[1, 0] * p1 + Fm[1, 1] * p2
            n0 = eps * np.random.normal() if eps > 0.0 else 0.0
            n1 = eps * np.random.normal() if eps > 0.0 else 0.0
            a0 = w1 / (2.0 * (c1 + k)) + n0
            x1 = a0
            a1 = (w3 - 2.0 * c2 * x1) / (2.0 * (c2 + k)) + n1
            x2 = x1 + a1
            v2p = -x2 * x2
            v2 = -c2 * x2 * x2 + w3 * x2 + w4
            v1p = -k * a1 * a1 + lam * v2p + (1.0 - lam) * v2
            v1 = -c1 * x1 * x1 + w1 * x1 + w2
            d1 = v1p - v1
            d2 = v2p - v2
            g1 = x1 * d1
            g3 = x2 * d2
            p1 += alpha * (Fm[0, 0] * g1 + Fm[1, 0] * g3)
            p2 += alpha * (Fm[0, 1] * g1 + Fm[1, 1] * g3)
            w2 += alpha * d1
            w4 += alpha * d2
            m = max(max(abs(p1), abs(p2)), max(abs(w2), abs(w4)))
            if not np.isfinite(m) or m > blow:
                diverged[i] = True
                break
        norms[i] = max(abs(p1), abs(p2))
    return diverged, norms


@njit(cache=True)
def mlp_lander_rollout(W1, b1, W2, b2, Ws, scale, out_scale, identity_inputs,
                       c, kg, kf, x0, dt, cap):
    """Euler rollout of the lander under the MLP greedy policy.

    Same arithmetic as targets.ct_rollout with critics.MlpCritic; exists
    because the per-step Python critic evaluation dominates training time.
    Returns (states, actions, rewards, dts, terminal_code) with
    terminal_code 0 = ground, 1 = fuel, -1 = step cap exceeded.
    """
    ni = W1.shape[0]
    nh = W1.shape[1]
    states = np.empty((cap + 1, 3))
    actions = np.empty(cap + 1)
    rewards = np.empty(cap)
    dts = np.empty(cap)
    x = x0.copy()
    n = 0
    term = -1
    while n < cap:
        states[n] = x
        # scaled (optionally sigmoided) inputs and their x-derivatives
        a_pre = 0.0
        gv = 0.0
        gu = 0.0
        z1 = np.empty(nh)
        iv = np.empty(ni)
        c1 = np.empty(ni)
        for i in range(ni):
            s = x[i] * scale[i]
            if identity_inputs:
                iv[i] = s
                c1[i] = scale[i]
            else:
                e = 1.0 / (1.0 + np.exp(-s))
                iv[i] = e
                c1[i] = e * (1.0 - e) * scale[i]
        for j in range(nh):
            p = b1[j]
            for i in range(ni):
                p += iv[i] * W1[i, j]
            ez = 1.0 / (1.0 + np.exp(-p))
            z1[j] = ez
        # G components for v (index 1) and u (index 2)
        for j in range(nh):
            zp = z1[j] * (1.0 - z1[j])
            gv += W2[j] * zp * W1[1, j]
            gu += W2[j] * zp * W1[2, j]
        gv = out_scale * c1[1] * (gv + Ws[1])
        gu = out_scale * c1[2] * (gu + Ws[2])
        pre = -kf + gv - gu
        t = np.tanh(pre / c)
        a = 0.5 * (t + 1.0)
        if a < 1e-12:
            a = 1e-12
        elif a > 1.0 - 1e-12:
            a = 1.0 - 1e-12
        actions[n] = a
        # reward rate: -kf a + action cost
        y = 2.0 * a - 1.0
        at = math.atanh(y)
        rc = -0.5 * c * (y * at + 0.5 * math.log1p(-y * y))
        r = -kf * a + rc
        hd = x[1]
        vd = a - kg
        ud = -a
        hn = x[0] + dt * hd
        un = x[2] + dt * ud
        if hn <= 0.0 or un <= 0.0:
            tau = 1.0
            kind = -1
            if hn <= 0.0 and hd < 0.0:
                th = x[0] / (-hd * dt)
                if th <= tau:
                    tau = th
                    kind = 0
            if un <= 0.0 and ud < 0.0:
                tu = x[2] / (-ud * dt)
                if tu < tau or (tu == tau and kind == -1):
                    tau = tu
                    kind = 1
            step = tau * dt
            xn0 = x[0] + step * hd
            xn1 = x[1] + step * vd
            xn2 = x[2] + step * ud
            if kind == 0:
                xn0 = 0.0
            else:
                xn2 = 0.0
            rewards[n] = r
            dts[n] = step
            states[n + 1, 0] = xn0
            states[n + 1, 1] = xn1
            states[n + 1, 2] = xn2
            term = kind
            n += 1
            break
        rewards[n] = r
        dts[n] = dt
        x = np.array([hn, x[1] + dt * vd, un])
        n += 1
    return states[:n + 1], actions[:n + 1], rewards[:n], dts[:n], term
