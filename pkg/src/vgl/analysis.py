"""Independent oracles and stability analysis.

Contents: the closed-form 2x2 weight-dynamics matrices for the two-step toy
problem and their stability test; the spurious-minima landscape of the
residual-gradient error; the Pontryagin shooting oracle for optimal lander
trajectories; the locally-extremal-trajectory checker; and the derivative
cross-check suite used by the harness ``gradcheck`` command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import OracleError, SeededRng, fd_gradient, fd_jacobian, fd_scalar, rel_err
from .critics import MlpCritic, QuadCritic, exp2_critic, ripple_critic
from .learners import gradient_error
from .models import LunarLander, ToyProblem, ripple_toy
from .policy import ct_policy, eq17_dpi_dw, greedy_action
from .targets import replay_reward, rollout


# ---------------------------------------------------------------------------
# Weight-dynamics stability for the two-step toy problem
# ---------------------------------------------------------------------------

@dataclass
class StabilitySystem:
    lam: float
    c1: float
    c2: float
    k: float
    b: float
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    M_vglo: np.ndarray   # F^T D E D F, the curvature-weighted system
    M_vgl: np.ndarray    # F^T E D F, identity-weighted (leftmost D dropped)


def build_stability(lam, c1, c2, k, F=None) -> StabilitySystem:
    """Assemble the linear weight-update system dw = alpha D E D w (and its
    reparametrisation dp = alpha F^T D E D F p) for the two-step problem."""
    b = -c2 / (c2 + k)
    D = np.diag([1.0 / (2.0 * (k + c1)), 1.0 / (2.0 * (k + c2))])
    E = -2.0 * np.array([
        [k + lam * (1 + b) * (b * (k + 1) + 1) - b * k, lam * (k + 1) * (b + 1) - k],
        [1 + b * (k + 1), k + 1],
    ])
    F = np.eye(2) if F is None else np.asarray(F, dtype=float)
    return StabilitySystem(lam, c1, c2, k, b, D, E, F,
                           F.T @ D @ E @ D @ F, F.T @ E @ D @ F)


def stability_preset(name: str) -> StabilitySystem:
    """The two divergence-hunting parameter sets.

    'a': lam=0, c1=c2=k=0.01, F = D^-1 [[10,1],[-1,-1]]  (kills lam=0 updates)
    'b': lam=1, c1=0.99, c2=k=0.01, F = D^-1 [[-1,-1],[10,1]]  (kills VGL(1))
    """
    if name == "a":
        lam, c1, c2, k = 0.0, 0.01, 0.01, 0.01
        mix = np.array([[10.0, 1.0], [-1.0, -1.0]])
    elif name == "b":
        lam, c1, c2, k = 1.0, 0.99, 0.01, 0.01
        mix = np.array([[-1.0, -1.0], [10.0, 1.0]])
    else:
        raise ValueError(f"unknown preset {name!r}")
    D = np.diag([1.0 / (2.0 * (k + c1)), 1.0 / (2.0 * (k + c2))])
    return build_stability(lam, c1, c2, k, np.linalg.inv(D) @ mix)


def is_stable(M) -> bool:
    """All eigenvalues in the open left half-plane; for 2x2 this is exactly
    trace < 0 and det > 0."""
    M = np.asarray(M, dtype=float)
    assert M.shape == (2, 2)
    return float(np.trace(M)) < 0.0 and float(np.linalg.det(M)) > 0.0


def simulate_linear(M, p0, alpha: float = 1e-3, max_steps: int = 2_000_000,
                    blow: float = 1e12, shrink: float = 1e-12):
    """Iterate p <- p + alpha M p; returns (diverged, norm history).

    Divergence means the norm exceeded ``blow``; the run also stops once the
    norm contracts below ``shrink`` (converged).
    """
    p = np.asarray(p0, dtype=float).copy()
    M = np.asarray(M, dtype=float)
    chunk = 100
    step = np.linalg.matrix_power(np.eye(len(p)) + alpha * M, chunk)
    norms = [float(np.linalg.norm(p))]
    for _ in range(max_steps // chunk):
        p = step @ p
        n = float(np.linalg.norm(p))
        norms.append(n)
        if n > blow:
            return True, np.array(norms)
        if n < shrink:
            return False, np.array(norms)
    return False, np.array(norms)


# ---------------------------------------------------------------------------
# Residual-gradient landscape (spurious minima demonstration)
# ---------------------------------------------------------------------------

def _ripple_E(w: float) -> float:
    model = ripple_toy()
    return gradient_error(model, ripple_critic(w=[w]), np.array([0.0]), 1.0)


def _ripple_R(w: float) -> float:
    model = ripple_toy()
    return rollout(model, ripple_critic(w=[w]), np.array([0.0])).total_reward


def rg_landscape(lo: float = -30.0, hi: float = 30.0, grid: int = 6001):
    """Stationary points of the gradient-error E(w) and of the total reward
    R(w) for the 1-step ripple problem, located by derivative sign-change
    scan plus bisection.  Both landscapes come from the actual rollout
    pipeline, not from closed forms."""
    ws = np.linspace(lo, hi, grid)

    def stationary(fn):
        d = np.array([fd_scalar(fn, w, h=1e-6) for w in ws])
        roots = []
        for i in range(len(ws) - 1):
            if d[i] == 0.0:
                roots.append(ws[i])
            elif d[i] * d[i + 1] < 0.0:
                roots.append(brentq(lambda w: fd_scalar(fn, w, h=1e-6),
                                    ws[i], ws[i + 1], xtol=1e-10))
        return roots

    return stationary(_ripple_E), stationary(_ripple_R)


def rg_descend_E(w0: float, alpha: float = 0.02, iters: int = 20_000) -> float:
    """Plain gradient descent on the gradient-error landscape."""
    w = w0
    for _ in range(iters):
        g = fd_scalar(_ripple_E, w, h=1e-6)
        w -= alpha * g
        if abs(g) < 1e-10:
            break
    return w


def rg_ascend_R(w0: float, alpha: float = 0.02, iters: int = 20_000) -> float:
    w = w0
    for _ in range(iters):
        g = fd_scalar(_ripple_R, w, h=1e-6)
        w += alpha * g
        if abs(g) < 1e-10:
            break
    return w


def ripple_E_value(w: float) -> float:
    return _ripple_E(w)


def ripple_R_value(w: float) -> float:
    return _ripple_R(w)


# ---------------------------------------------------------------------------
# Pontryagin shooting oracle for the lunar lander
# ---------------------------------------------------------------------------

@dataclass
class PontryaginSolution:
    v_F: float
    states: np.ndarray    # (M, 3) forward order, first row at the start state
    actions: np.ndarray   # (M,)
    adjoint: np.ndarray   # (M, 3) costate along the path
    R: float
    dt: float
    fuel_used: float


def _backward_arrays(model: LunarLander, v_F: float, dt: float, tmax: float):
    """Closed-form costate, action and Euler state arrays backwards from the
    touchdown point (h=0, v=v_F); tau is time before touchdown."""
    aF = model.g(-model.kf - 2.0 * v_F)
    rc, _ = model.action_cost(aF)
    p0 = (model.kf * aF - rc) / v_F + 2.0 * (aF - model.kg)
    tau = np.arange(0.0, tmax, dt)
    pre = -model.kf - 2.0 * v_F + tau * p0
    a = np.clip(0.5 * (np.tanh(pre / model.c) + 1.0), 1e-12, 1.0 - 1e-12)
    # Euler in tau (time before touchdown): dv/dtau = -(a - kg), dh/dtau = -v
    v = v_F - np.concatenate([[0.0], np.cumsum((a[:-1] - model.kg) * dt)])
    h = np.concatenate([[0.0], np.cumsum(-v[:-1] * dt)])
    return tau, a, v, h, p0


def _branch_residual(model, v_F, dt, tmax, h0, v0, branch):
    """Height error at the tau where the backward velocity crosses v0.

    The backward velocity falls during the braking phase and rises during
    the (earlier, in forward time) freefall phase; a start state can sit on
    either branch, so each is root-found separately.
    """
    _, _, v, h, _ = _backward_arrays(model, v_F, dt, tmax)
    imin = int(np.argmin(v))
    if branch == "fall":
        seg_v, seg_h, off = v[:imin + 1], h[:imin + 1], 0
    else:
        seg_v, seg_h, off = v[imin:], h[imin:], imin
    d = seg_v - v0
    cross = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
    cross = cross[np.abs(d[cross]) + np.abs(d[cross + 1]) > 0.0]
    if cross.size == 0:
        return None
    i = int(cross[0])
    frac = d[i] / (d[i] - d[i + 1])
    return seg_h[i] + frac * (seg_h[i + 1] - seg_h[i]) - h0


def pontryagin_lander(model: LunarLander, target, dt: float = 1e-3,
                      v_bracket=(-20.0, -1e-4), scan: int = 400,
                      tmax: float = None) -> PontryaginSolution:
    """Optimal trajectory through (h0, v0) by shooting on terminal velocity.

    The costate equation integrates in closed form, so each candidate v_F
    yields the whole action schedule; root-finding matches the backward
    path's height at the v = v0 crossing to h0.  Requires the
    sufficient-fuel regime: the fuel needed must not exceed u0.
    """
    h0, v0, u0 = float(target[0]), float(target[1]), float(target[2])
    if h0 <= 0.0 or u0 <= 0.0:
        x = np.array([max(h0, 0.0), v0, max(u0, 0.0)])
        return PontryaginSolution(v0, np.array([x]), np.zeros(1), np.zeros((1, 3)),
                                  model.impulse(x), dt, 0.0)
    if tmax is None:
        tmax = 3.0 * math.sqrt(2.0 * max(h0, 1.0) / model.kg) + 20.0 * (abs(v0) + 3.0)

    lo, hi = v_bracket
    grid = np.linspace(hi, lo, scan)
    sols = []
    for branch in ("fall", "rise"):
        res = lambda v, b=branch: _branch_residual(model, v, dt, tmax, h0, v0, b)
        vals = [res(v) for v in grid]
        for i in range(len(grid) - 1):
            va, vb = vals[i], vals[i + 1]
            if va is None or vb is None or va * vb > 0.0:
                continue
            v_F = brentq(res, grid[i + 1], grid[i], xtol=1e-12, maxiter=200)
            sol = _assemble(model, v_F, dt, tmax, h0, v0, u0, branch)
            if sol is not None:
                sols.append(sol)
    if not sols:
        raise OracleError("shooting bracket not found for the requested start state "
                          "(insufficient fuel or outside the covered regime)")
    return max(sols, key=lambda s: s.R)


def _assemble(model: LunarLander, v_F: float, dt: float, tmax: float,
              h0: float, v0: float, u0: float, branch: str):
    tau, a, v, h, p0 = _backward_arrays(model, v_F, dt, tmax)
    imin = int(np.argmin(v))
    d = v - v0
    if branch == "fall":
        cross = np.nonzero(d[:imin] * d[1:imin + 1] <= 0.0)[0]
    else:
        cz = np.nonzero(d[imin:-1] * d[imin + 1:] <= 0.0)[0]
        cross = cz + imin
    if cross.size == 0:
        return None
    i = int(cross[0]) + 1
    rc = np.array([model.action_cost(float(x))[0] for x in a[:i]])
    rbar = -model.kf * a[:i] + rc
    R = float(np.sum(rbar * dt)) + (-v_F * v_F)
    fuel = float(np.sum(a[:i]) * dt)
    if fuel > u0 + 1e-9:
        return None
    # forward ordering: index i-1 is the start, index 0 touches down
    a_fwd = a[:i][::-1].copy()
    u_fwd = u0 - np.concatenate([[0.0], np.cumsum(a_fwd[:-1] * dt)])
    states = np.column_stack([h[:i][::-1], v[:i][::-1], u_fwd])
    adjoint = np.column_stack([np.full(i, p0), -2.0 * v_F + tau[:i] * p0,
                               np.zeros(i)])[::-1]
    return PontryaginSolution(v_F, states, a_fwd, adjoint, R, dt, fuel)


# ---------------------------------------------------------------------------
# Locally-extremal-trajectory checker
# ---------------------------------------------------------------------------

@dataclass
class LetStepReport:
    t: int
    saturated: bool
    action: float
    dR_da: float
    ok: bool


def let_check(traj, model, tol: float = 1e-5) -> list:
    """Finite-difference stationarity of the total reward in each action.

    R is a function of the action sequence: downstream actions stay fixed
    while one action is perturbed.  Unsaturated actions must be stationary
    within tol; saturated ones must push outward (positive derivative at +1,
    negative at -1)."""
    out = []
    acts = list(traj.actions)
    x0 = traj.states[0]
    for t in range(traj.F):
        if not model.action_relevant(t):
            continue
        pe = traj.pes[t]

        def r_of(a, t=t):
            mod = acts.copy()
            mod[t] = float(a)
            return replay_reward(model, x0, mod)

        d = fd_scalar(r_of, acts[t])
        if pe.saturated:
            ok = d > 0 if acts[t] > 0 else d < 0
        else:
            ok = abs(d) < tol
        out.append(LetStepReport(t, pe.saturated, acts[t], d, ok))
    return out


# ---------------------------------------------------------------------------
# Derivative cross-check suite
# ---------------------------------------------------------------------------

@dataclass
class GradCheck:
    name: str
    instances: int
    max_err: float
    tol: float

    @property
    def ok(self):
        return self.max_err <= self.tol


def _check_toy_partials(rng, n_inst):
    worst = 0.0
    for _ in range(n_inst):
        n = int(rng.uniform(1, 5))
        m = ToyProblem(n=n, k=float(rng.uniform(0.0, 3.0)))
        t = int(rng.uniform(0, n + 1))
        x = np.asarray(rng.uniform(-5, 5, 1))
        a = float(rng.uniform(-3, 3))
        worst = max(worst,
                    rel_err(m.dfdx(t, x, a)[:, 0],
                            fd_gradient(lambda v: m.step(t, v, a)[0][0], x), 1e-3),
                    rel_err(m.dfda(t, x, a)[0],
                            fd_scalar(lambda v: m.step(t, x, v)[0][0], a), 1e-3),
                    rel_err(m.drdx(t, x, a),
                            fd_gradient(lambda v: m.step(t, v, a)[1], x), 1e-3),
                    rel_err(m.drda(t, x, a),
                            fd_scalar(lambda v: m.step(t, x, v)[1], a), 1e-3))
    return worst


def _check_lander_partials(rng, n_inst):
    m = LunarLander(c=0.2)
    worst = 0.0
    for _ in range(n_inst):
        x = np.array([rng.uniform(0.5, 100), rng.uniform(-10, 10), rng.uniform(1, 50)])
        a = float(rng.uniform(0.05, 0.95))
        jf = fd_jacobian(lambda v: m.fbar(v, a), x)
        worst = max(worst,
                    rel_err(m.dfbar_dx(x, a), jf, 1e-3),
                    rel_err(m.dfbar_da(x, a),
                            np.array([fd_scalar(lambda v, j=j: m.fbar(x, v)[j], a)
                                      for j in range(3)]), 1e-3),
                    rel_err(m.drbar_da(x, a),
                            fd_scalar(lambda v: m.rbar(x, v), a), 1e-3),
                    rel_err(m.action_cost(a)[1],
                            fd_scalar(lambda v: m.action_cost(v)[0], a), 1e-3))
    return worst


def _rand_quad(rng):
    T = int(rng.uniform(1, 4))
    mw = int(rng.uniform(1, 5))
    return QuadCritic(q=rng.uniform(0.1, 2, T), u=rng.uniform(-2, 2, T),
                      S=rng.uniform(-1, 1, (T, mw)), B=rng.uniform(-1, 1, (T, mw)),
                      b=rng.uniform(-1, 1, T), w=rng.uniform(-5, 5, mw))


def _check_quad_bundle(rng, n_inst):
    worst = 0.0
    for _ in range(n_inst):
        crit = _rand_quad(rng)
        t = int(rng.uniform(1, crit.T + 1))
        x = np.asarray(rng.uniform(-4, 4, 1))
        b = crit.eval(t, x)
        worst = max(worst,
                    rel_err(b.G, fd_gradient(lambda v: crit.eval(t, v).V, x), 1e-3),
                    rel_err(b.dVdw, fd_gradient(
                        lambda ww: crit.copy_with(ww).eval(t, x).V, crit.w), 1e-3),
                    rel_err(b.dGdw, fd_jacobian(
                        lambda ww: crit.copy_with(ww).eval(t, x).G, crit.w), 1e-3),
                    rel_err(b.dGdx, fd_jacobian(lambda v: crit.eval(t, v).G, x), 1e-3))
    return worst


def _check_mlp_bundle(rng, n_inst):
    worst = 0.0
    for _ in range(n_inst):
        mlp = MlpCritic()
        mlp.init_weights(rng)
        x = np.array([rng.uniform(0, 120), rng.uniform(-20, 5), rng.uniform(1, 60)])
        b = mlp.eval(0, x)

        def with_w(ww):
            m2 = MlpCritic()
            m2.w = ww
            return m2

        worst = max(worst,
                    rel_err(b.G, fd_gradient(lambda v: mlp.eval(0, v).V, x), 1e-3),
                    rel_err(b.dVdw, fd_gradient(
                        lambda ww: with_w(ww).eval(0, x).V, mlp.w), 1e-3),
                    rel_err(b.dGdw, fd_jacobian(
                        lambda ww: with_w(ww).eval(0, x).G, mlp.w), 1e-3),
                    rel_err(b.dGdx, fd_jacobian(lambda v: mlp.eval(0, v).G, x), 1e-3))
    return worst


def _rand_exp2(rng):
    m = ToyProblem(n=2, k=float(rng.uniform(0.3, 2.0)))
    crit = exp2_critic(float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0)),
                       w=rng.uniform(-5, 5, 4))
    return m, crit


def _check_policy_dx(rng, n_inst):
    worst = 0.0
    for _ in range(n_inst):
        m, crit = _rand_exp2(rng)
        t = int(rng.uniform(0, 2))
        x = np.asarray(rng.uniform(-3, 3, 1))
        pe = greedy_action(m, crit, t, x)
        fd = fd_gradient(lambda v: greedy_action(m, crit, t, v).action, x)
        worst = max(worst, rel_err(pe.dpi_dx, fd, 1e-3))
    return worst


def _check_policy_dw(rng, n_inst):
    worst = 0.0
    for _ in range(n_inst):
        m, crit = _rand_exp2(rng)
        t = int(rng.uniform(0, 2))
        x = np.asarray(rng.uniform(-3, 3, 1))
        pe = greedy_action(m, crit, t, x)
        formula = eq17_dpi_dw(m, crit, t, x, pe)
        fd = fd_gradient(lambda ww: greedy_action(m, crit.copy_with(ww), t, x).action,
                         crit.w)
        worst = max(worst, rel_err(formula, fd, 1e-3),
                    rel_err(pe.dpi_dw, formula, 1e-6))
    return worst


def _check_greedy_stationarity(rng, n_inst):
    """Eq.-16 style identity: dr/da = -(df/da).G_{t+1} at unsaturated steps."""
    worst = 0.0
    for _ in range(n_inst):
        m, crit = _rand_exp2(rng)
        traj = rollout(m, crit, np.asarray(rng.uniform(-3, 3, 1)))
        for t in range(m.n):
            resid = traj.drda[t] + float(traj.dfda[t] @ traj.bundles[t + 1].G)
            worst = max(worst, abs(resid))
    return worst


def _check_ct_policy(rng, n_inst):
    m = LunarLander(c=0.3)
    worst = 0.0
    for _ in range(n_inst):
        mlp = MlpCritic()
        mlp.init_weights(rng)
        mlp.w = mlp.w * 0.4
        x = np.array([rng.uniform(1, 100), rng.uniform(-8, 2), rng.uniform(5, 50)])
        pe = ct_policy(m, mlp, x)
        if pe.gprime < 1e-6:
            continue    # saturated squash: derivative comparison is vacuous

        def with_w(ww):
            m2 = MlpCritic()
            m2.w = ww
            return m2

        worst = max(worst,
                    rel_err(pe.dpi_dw, fd_gradient(
                        lambda ww: ct_policy(m, with_w(ww), x).action, mlp.w), 1e-4),
                    rel_err(pe.dpi_dx, fd_gradient(
                        lambda v: ct_policy(m, mlp, v).action, x), 1e-4))
    return worst


def run_gradcheck(seed: int = 0, n_inst: int = 100) -> list:
    """Every analytic derivative in the package against central differences."""
    rng = SeededRng(seed)
    checks = [
        ("toy-model-partials", _check_toy_partials, 1e-4),
        ("lander-model-partials", _check_lander_partials, 1e-4),
        ("quad-critic-bundle", _check_quad_bundle, 1e-4),
        ("mlp-critic-bundle", _check_mlp_bundle, 1e-4),
        ("greedy-dpi-dx", _check_policy_dx, 1e-4),
        ("greedy-dpi-dw-eq17", _check_policy_dw, 1e-4),
        ("greedy-stationarity-eq16", _check_greedy_stationarity, 1e-8),
        ("ct-policy-derivatives", _check_ct_policy, 1e-4),
    ]
    return [GradCheck(name, n_inst, fn(rng, n_inst), tol) for name, fn, tol in checks]
