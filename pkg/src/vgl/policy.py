"""Action selection: greedy / epsilon-greedy policies and their derivatives.

The greedy action maximises Q(x, a, w) = r(x, a) + V(f(x, a), w) over the
action domain.  For the toy problems with quadratic critics the maximiser is
closed-form; a Newton/golden-section fallback covers everything else and is
used to cross-check the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import rnd
from .critics import QuadCritic
from .models import ToyProblem


class PolicyError(RuntimeError):
    """The greedy maximiser does not exist or could not be located."""


@dataclass
class PolicyEval:
    action: float
    saturated: bool
    dQda: float
    d2Qda2: float
    dpi_dx: np.ndarray | None   # None marks an undefined derivative
    dpi_dw: np.ndarray | None


def _trivial_eval(d: int, m: int) -> PolicyEval:
    # action-independent step: any action works, all sensitivities vanish
    return PolicyEval(0.0, False, 0.0, 0.0, np.zeros(d), np.zeros(m))


def _q_derivs(model, critic, t, x, a):
    xn, _ = model.step(t, x, a)
    nb = critic.eval(t + 1, xn)
    dfda = model.dfda(t, x, a)
    dQda = model.drda(t, x, a) + float(dfda @ nb.G)
    d2Qda2 = model.d2rda2(t, x, a) + float(dfda @ nb.dGdx @ dfda)
    return dQda, d2Qda2, nb, dfda


def _q_value(model, critic, t, x, a):
    xn, r = model.step(t, x, a)
    return r + critic.eval(t + 1, xn).V


def greedy_action(model, critic, t, x) -> PolicyEval:
    if not model.action_relevant(t):
        return _trivial_eval(model.state_dim, critic.w.size)
    if isinstance(model, ToyProblem) and isinstance(critic, QuadCritic):
        return _greedy_quad(model, critic, t, x)
    return _greedy_numeric(model, critic, t, x)


def _greedy_quad(model, critic, t, x) -> PolicyEval:
    # Q(a) = -k a^2 - q (x+a)^2 + lin (x+a) + const, q from V_{t+1}
    q, lin = critic.quad_params(t + 1)
    k = model.k
    if q + k <= 0:
        raise PolicyError(f"Q not concave at step {t}: q+k = {q + k}")
    xv = float(x[0])
    a = (lin - 2.0 * q * xv) / (2.0 * (q + k))
    d2 = -2.0 * (q + k)
    bounds = model.action_bounds()
    saturated = False
    if bounds is not None and not bounds[0] <= a <= bounds[1]:
        a = bounds[0] if a < bounds[0] else bounds[1]
        saturated = True
    dQda = -2.0 * k * a - 2.0 * q * (xv + a) + lin
    if saturated:
        dpi_dx = np.zeros(1)
        dpi_dw = np.zeros(critic.m)
    else:
        dpi_dx = np.array([-q / (q + k)])
        dpi_dw = (critic.S[t] if critic.in_range(t + 1) else np.zeros(critic.m)) \
            / (2.0 * (q + k))
    return PolicyEval(a, saturated, dQda, d2, dpi_dx, dpi_dw)


def _newton(model, critic, t, x, a0, iters=60, tol=1e-12):
    a = a0
    for _ in range(iters):
        d1, d2, _, _ = _q_derivs(model, critic, t, x, a)
        if d2 >= 0 or not np.isfinite(d1) or not np.isfinite(d2):
            return None
        step = -d1 / d2
        a = a + step
        if abs(step) <= tol * max(1.0, abs(a)):
            return a
    return None


def _golden(f, lo, hi, iters=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2.0


def _greedy_numeric(model, critic, t, x) -> PolicyEval:
    bounds = model.action_bounds()
    lo, hi = bounds if bounds is not None else (-10.0, 10.0)
    cands = []
    for seed in (lo, 0.0, hi):
        a = _newton(model, critic, t, x, seed)
        if a is not None and (bounds is None or lo <= a <= hi):
            cands.append(a)
    if not cands:
        cands.append(_golden(lambda a: _q_value(model, critic, t, x, a), lo, hi))
    if bounds is not None:
        cands.extend(bounds)
    best, best_q = None, -np.inf
    for a in sorted(cands):
        qv = _q_value(model, critic, t, x, a)
        if qv > best_q + 1e-12:
            best, best_q = a, qv
    if best is None or not np.isfinite(best_q):
        raise PolicyError(f"no greedy maximiser found at step {t}")
    a = best
    dQda, d2, nb, dfda = _q_derivs(model, critic, t, x, a)
    saturated = bounds is not None and abs(abs(a) - 1.0) < 1e-12 and abs(dQda) > 1e-8
    d, m = model.state_dim, critic.w.size
    if saturated:
        return PolicyEval(a, True, dQda, d2, np.zeros(d), np.zeros(m))
    if d2 == 0.0:
        return PolicyEval(a, False, dQda, d2, None, None)
    # d2Q/dxda = d2r/dxda + dfdx dGdx dfda  (model functions linear in a)
    d2rdxda = getattr(model, "d2rdxda", lambda *_: np.zeros(d))(t, x, a)
    qxa = d2rdxda + model.dfdx(t, x, a) @ nb.dGdx @ dfda
    dpi_dx = -qxa / d2
    dpi_dw = -(nb.dGdw @ dfda) / d2
    return PolicyEval(a, False, dQda, d2, dpi_dx, dpi_dw)


def epsilon_greedy(model, critic, t, x, eps, rng) -> PolicyEval:
    """Greedy action plus N(0, eps) noise; unbounded problems never re-clip."""
    pe = greedy_action(model, critic, t, x)
    if eps == 0.0 or not model.action_relevant(t):
        return pe
    a = pe.action + rnd(eps, rng)
    bounds = model.action_bounds()
    if bounds is not None:
        a = min(max(a, bounds[0]), bounds[1])
    dQda, d2, _, _ = _q_derivs(model, critic, t, x, a)
    saturated = (bounds is not None and abs(abs(a) - 1.0) < 1e-12
                 and abs(dQda) > 1e-8)
    return PolicyEval(a, saturated, dQda, d2, pe.dpi_dx, pe.dpi_dw)


def dpi_dx(model, critic, t, x, pe: PolicyEval):
    """Policy state-derivative -(d2Q/dxda)(d2Q/da2)^{-1} at a greedy eval.

    Zero vector when saturated; None when the curvature vanishes and the
    derivative is undefined.
    """
    if not model.action_relevant(t):
        return np.zeros(model.state_dim)
    if pe.saturated:
        return np.zeros(model.state_dim)
    if pe.d2Qda2 == 0.0:
        return None
    _, _, nb, dfda = _q_derivs(model, critic, t, x, pe.action)
    d2rdxda = getattr(model, "d2rdxda", lambda *_: np.zeros(model.state_dim))(t, x, pe.action)
    return -(d2rdxda + model.dfdx(t, x, pe.action) @ nb.dGdx @ dfda) / pe.d2Qda2


def eq17_dpi_dw(model, critic, t, x, pe: PolicyEval):
    """Implicit-function form -(dG/dw)_{t+1} (df/da)^T (d2Q/da2)^{-1}."""
    if pe.saturated:
        return np.zeros(critic.w.size)
    if pe.d2Qda2 == 0.0:
        return None
    xn, _ = model.step(t, x, pe.action)
    nb = critic.eval(t + 1, xn)
    return -(nb.dGdw @ model.dfda(t, x, pe.action)) / pe.d2Qda2


@dataclass
class CtPolicyEval:
    action: float
    pre: float          # squash pre-activation
    gprime: float
    dpi_dx: np.ndarray
    dpi_dw: np.ndarray


def ct_policy(model, critic, x, bundle=None) -> CtPolicyEval:
    """Continuous-time greedy action a = g(dr_lin/da + (df/da).G).

    Smooth in both state and weights; the squash keeps the action strictly
    inside (0, 1) for the lander, so saturation never occurs.
    """
    nb = bundle if bundle is not None else critic.eval(0, x)
    dfda = model.dfbar_da(x, None)
    pre = model.rbar_linear_da() + float(dfda @ nb.G)
    a = model.g(pre)
    gp = model.gprime(pre)
    return CtPolicyEval(a, pre, gp, gp * (nb.dGdx @ dfda), gp * (nb.dGdw @ dfda))


def ct_action(model, critic, x) -> float:
    """Action only, from the cheap forward pass (no second-order work)."""
    if hasattr(critic, "value_batch"):
        _, G = critic.value_batch(np.asarray(x, float)[None, :])
        g = G[0]
    else:
        g = critic.eval(0, x).G
    dfda = model.dfbar_da(x, None)
    return model.g(model.rbar_linear_da() + float(dfda @ g))
