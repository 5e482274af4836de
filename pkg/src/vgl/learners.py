"""Weight-update rules: TD(lambda), value-gradient updates with and without
curvature weighting, residual-gradient descent, BPTT, the actor update, the
continuous-time updates, and SGD/RPROP application."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import fd_step
from .critics import QuadCritic
from .models import ToyProblem
from .targets import (CtEvals, CtTrajectory, Trajectory, compute_targets_G,
                      compute_targets_V, compute_omega, rollout)


@dataclass
class UpdateVector:
    dw: np.ndarray
    info: dict = field(default_factory=dict)


def td_lambda(traj: Trajectory, vp, alpha: float) -> UpdateVector:
    """dw = alpha sum_{t>=1} (dV/dw)_t (V'_t - V_t); step 0 never matters
    because the greedy policy ignores the value function there."""
    dw = np.zeros_like(traj.bundles[0].dVdw)
    errs = []
    for t in range(1, traj.F + 1):
        b = traj.bundles[t]
        e = vp[t] - b.V
        dw += b.dVdw * e
        errs.append(e)
    return UpdateVector(alpha * dw, {"v_errors": errs})


def td_lambda_traces(traj: Trajectory, lam: float, alpha: float) -> UpdateVector:
    """Batch eligibility-trace form: the one-step TD errors weighted by a
    backward lambda-decayed sum of value gradients.  Algebraically identical
    to td_lambda on any finished trajectory."""
    dw = np.zeros_like(traj.bundles[0].dVdw)
    trace = np.zeros_like(dw)
    for t in range(1, traj.F):
        trace = lam * trace + traj.bundles[t].dVdw
        delta = traj.rewards[t] + traj.bundles[t + 1].V - traj.bundles[t].V
        dw += delta * trace
    return UpdateVector(alpha * dw)


def vgl(traj: Trajectory, gp, alpha: float, omega=None) -> UpdateVector:
    """Value-gradient update.

    omega=None: dw = alpha sum_{t>=1} (dG/dw)_t (G'_t - G_t)  (identity mode).
    omega given (from compute_omega): the curvature-weighted form
    dw = alpha sum_{t>=0} (dG/dw)_{t+1} Omega_t (G'_{t+1} - G_{t+1}),
    which is exact total-reward ascent at lambda = 1.
    """
    dw = np.zeros(traj.bundles[0].dGdw.shape[0])
    if omega is None:
        for t in range(1, traj.F + 1):
            b = traj.bundles[t]
            dw += b.dGdw @ (gp[t] - b.G)
    else:
        for t in range(traj.F):
            b = traj.bundles[t + 1]
            dw += b.dGdw @ (omega[t] @ (gp[t + 1] - b.G))
    return UpdateVector(alpha * dw)


def gradient_error(model, critic, x0, lam: float) -> float:
    """E = 1/2 sum_{t>=1} |G_t - G'_t|^2 on the greedy trajectory from x0."""
    traj = rollout(model, critic, x0)
    gp = compute_targets_G(traj, lam)
    return 0.5 * sum(float(np.sum((traj.bundles[t].G - gp[t]) ** 2))
                     for t in range(1, traj.F + 1))


def vgl_rg(model, critic, x0, lam: float, alpha: float,
           backend: str = "numeric") -> UpdateVector:
    """Residual-gradient update: dw = -alpha dE/dw with the full dependence
    of E on the weights, including trajectory movement.

    The numeric backend central-differences E over the weights with a full
    re-roll per probe; the analytic backend runs the recursive total
    derivative (scalar-state models with affine greedy policies only) and
    exists to cross-check the numeric one.
    """
    if backend == "numeric":
        w0 = critic.w.copy()
        g = np.empty_like(w0)
        for i in range(w0.size):
            h = fd_step(w0[i])
            wp, wm = w0.copy(), w0.copy()
            wp[i] += h
            wm[i] -= h
            ep = gradient_error(model, critic.copy_with(wp), x0, lam)
            em = gradient_error(model, critic.copy_with(wm), x0, lam)
            g[i] = (ep - em) / (2.0 * h)
        e0 = gradient_error(model, critic, x0, lam)
        return UpdateVector(-alpha * g, {"E": e0})
    if backend == "analytic":
        return _vgl_rg_analytic(model, critic, x0, lam, alpha)
    raise ValueError(f"unknown backend {backend!r}")


def _vgl_rg_analytic(model, critic, x0, lam: float, alpha: float) -> UpdateVector:
    """Recursive total derivative of E for scalar-state toy problems.

    Valid when the greedy policy is affine in (x, w) (quadratic critics) so
    its second derivatives vanish; model second partials come from the toy
    closed forms.  Backward pass computes (dG'/dx, dG'/dw) and then
    (dE/dx, dE/dw), excluding the t=0 error term from E but keeping the
    t=0 trajectory-coupling terms.
    """
    if not (isinstance(model, ToyProblem) and isinstance(critic, QuadCritic)):
        raise NotImplementedError("analytic residual gradients: toy + quadratic critics only")
    traj = rollout(model, critic, x0)
    gp = compute_targets_G(traj, lam)
    F, m = traj.F, critic.m
    gpx = np.zeros(F + 1)
    gpw = np.zeros((F + 1, m))
    for t in range(F - 1, -1, -1):
        x, a = traj.states[t], traj.actions[t]
        pe = traj.pes[t]
        pi_x = float(pe.dpi_dx[0]) if pe.dpi_dx is not None else 0.0
        pi_w = pe.dpi_dw if pe.dpi_dw is not None else np.zeros(m)
        f_x, f_a = float(traj.dfdx[t][0, 0]), float(traj.dfda[t][0])
        r_a = traj.drda[t]
        r_aa = model.d2rda2(t, x, a)
        r_xx = model.d2rdx2(t, x, a)
        T = f_x + pi_x * f_a
        nb = traj.bundles[t + 1]
        blend_x = lam * gpx[t + 1] + (1 - lam) * float(nb.dGdx[0, 0])
        blend_w = lam * gpw[t + 1] + (1 - lam) * nb.dGdw[:, 0]
        dxw = pi_w * f_a
        gpx[t] = (r_xx + pi_x * pi_x * r_aa) + T * blend_x * T
        gpw[t] = pi_x * r_aa * pi_w + T * (blend_w + blend_x * dxw)
    bF = traj.bundles[F]
    eF = bF.G[0] - gp[F][0]
    ex = (float(bF.dGdx[0, 0]) - gpx[F]) * eF
    ew = (bF.dGdw[:, 0] - gpw[F]) * eF
    for t in range(F - 1, -1, -1):
        x = traj.states[t]
        pe = traj.pes[t]
        pi_x = float(pe.dpi_dx[0]) if pe.dpi_dx is not None else 0.0
        pi_w = pe.dpi_dw if pe.dpi_dw is not None else np.zeros(m)
        f_x, f_a = float(traj.dfdx[t][0, 0]), float(traj.dfda[t][0])
        b = traj.bundles[t]
        e_t = (b.G[0] - gp[t][0]) if t >= 1 else 0.0
        ew_new = (b.dGdw[:, 0] - gpw[t]) * e_t + pi_w * f_a * ex + ew
        ex_new = (float(b.dGdx[0, 0]) - gpx[t]) * e_t + (pi_x * f_a + f_x) * ex
        ew, ex = ew_new, ex_new
    E0 = 0.5 * sum((traj.bundles[t].G[0] - gp[t][0]) ** 2 for t in range(1, F + 1))
    return UpdateVector(-alpha * ew, {"E": E0})


# ---------------------------------------------------------------------------
# Policy-parameter updates (BPTT and actor training)
# ---------------------------------------------------------------------------

def parametric_rollout(model, policy, z, x0, cap: int = 100_000):
    x = np.asarray(x0, dtype=float)
    states, actions, rewards = [x], [], []
    t = 0
    while not model.terminal(t):
        if t >= cap:
            raise RuntimeError("parametric rollout did not terminate")
        a = policy.act(t, x, z) if model.action_relevant(t) else 0.0
        xn, r = model.step(t, x, a)
        actions.append(a)
        rewards.append(r)
        x = xn
        t += 1
        states.append(x)
    return states, actions, rewards


def bptt(model, policy, z, x0, alpha: float) -> UpdateVector:
    """Backward-through-time total-reward gradient for any differentiable
    policy: dz = alpha sum_t (dpi/dz)_t [(dr/da)_t + (df/da)_t (dR/dx)_{t+1}]."""
    states, actions, rewards = parametric_rollout(model, policy, z, x0)
    F = len(actions)
    d = states[0].size
    p = np.zeros(d)     # (dR^pi/dx)_{t+1}, built backwards
    dz = np.zeros(np.asarray(z, float).size)
    for t in range(F - 1, -1, -1):
        x, a = states[t], actions[t]
        dfda = model.dfda(t, x, a)
        drda = model.drda(t, x, a)
        if model.action_relevant(t):
            dz += policy.dpi_dz(t, x, z) * (drda + float(dfda @ p))
            pix = policy.dpi_dx(t, x, z)
        else:
            pix = np.zeros(d)
        p = (model.drdx(t, x, a) + pix * drda) \
            + (model.dfdx(t, x, a) + np.outer(pix, dfda)) @ p
    return UpdateVector(alpha * dz, {"total_reward": float(sum(rewards))})


def actor_update(model, policy, z, x0, alpha: float, G_fn) -> UpdateVector:
    """Actor training: dz = alpha sum_t (dpi/dz)_t [(dr/da)_t + (df/da)_t G_{t+1}],
    with the successor value-gradient supplied by a critic via G_fn(t, x)."""
    states, actions, rewards = parametric_rollout(model, policy, z, x0)
    dz = np.zeros(np.asarray(z, float).size)
    for t, a in enumerate(actions):
        if not model.action_relevant(t):
            continue
        x = states[t]
        g_next = G_fn(t + 1, states[t + 1])
        dz += policy.dpi_dz(t, x, z) * (model.drda(t, x, a)
                                        + float(model.dfda(t, x, a) @ g_next))
    return UpdateVector(alpha * dz, {"total_reward": float(sum(rewards))})


# ---------------------------------------------------------------------------
# Continuous-time updates
# ---------------------------------------------------------------------------

def ct_vgl(model, traj: CtTrajectory, evals: CtEvals, gp, alpha: float,
           mode: str = "omega") -> UpdateVector:
    """Euler quadrature of the continuous-time value-gradient update.

    mode='omega' uses the squash-curvature weighting
    g'(pre) (df/da)^T (df/da), under which the sum is exact gradient ascent
    on total reward at lamfac = 0; mode='identity' drops the weighting.
    df/da is treated as state-independent (true for the lander's linear
    actuation).
    """
    if mode not in ("omega", "identity"):
        raise ValueError(f"unknown mode {mode!r}")
    N = traj.N
    err = gp[:N] - evals.G[:N]
    if mode == "omega":
        if hasattr(model, "gprime_batch"):
            dfda = model.dfbar_da(traj.states[0], traj.actions[0])
            pre = model.rbar_linear_da() + evals.G[:N] @ dfda
            gprime = model.gprime_batch(pre)
        else:
            dfda = model.dfbar_da(traj.states[0], traj.actions[0])
            pre = model.rbar_linear_da() + evals.G[:N] @ dfda
            gprime = np.array([model.gprime(p) for p in pre])
        scale = traj.dts * gprime * (err @ dfda)
        dw = np.einsum("kmd,d,k->m", evals.dGdw[:N], dfda, scale)
    else:
        dw = np.einsum("kmd,kd,k->m", evals.dGdw[:N], err, traj.dts)
    return UpdateVector(alpha * dw)


def ct_td(traj: CtTrajectory, evals: CtEvals, vp, alpha: float) -> UpdateVector:
    """Continuous-time TD: dw = alpha sum_k (dV/dw)_k (V'_k - V_k) dt_k."""
    N = traj.N
    dw = evals.dVdw[:N].T @ (traj.dts * (vp[:N] - evals.V[:N]))
    return UpdateVector(alpha * dw)


# ---------------------------------------------------------------------------
# Weight application
# ---------------------------------------------------------------------------

def sgd_apply(w, upd: UpdateVector):
    return np.asarray(w, float) + upd.dw


@dataclass
class RpropState:
    """Per-weight adaptive steps with the standard parameters
    eta+ = 1.2, eta- = 0.5, step0 = 0.1, bounds [1e-6, 50]."""
    step: np.ndarray
    prev: np.ndarray
    last_dw: np.ndarray
    last_obj: float = None
    etap: float = 1.2
    etam: float = 0.5
    step_min: float = 1e-6
    step_max: float = 50.0

    @classmethod
    def fresh(cls, n, step0: float = 0.1):
        return cls(np.full(n, step0), np.zeros(n), np.zeros(n))


def rprop_apply(w, grad, state: RpropState, objective: float = None):
    """Sign-based ascent step on an accumulated gradient.

    Same-sign components grow their step by eta+ and move; a sign flip
    shrinks the step by eta- and suppresses that component's move for the
    iteration (the stored gradient is cleared so no adaptation follows).
    When the caller supplies the objective being maximised, a sign flip
    additionally reverts that component's previous move if the objective
    got worse (objective-guarded backtracking); without an objective the
    plain suppress-only semantics apply.
    """
    w = np.asarray(w, float).copy()
    g = np.asarray(grad, float)
    prod = state.prev * g
    grow = prod > 0
    flip = prod < 0
    state.step[grow] = np.minimum(state.step[grow] * state.etap, state.step_max)
    state.step[flip] = np.maximum(state.step[flip] * state.etam, state.step_min)
    move = ~flip
    dw = np.zeros_like(w)
    dw[move] = np.sign(g[move]) * state.step[move]
    if objective is not None and state.last_obj is not None \
            and objective < state.last_obj:
        dw[flip] = -state.last_dw[flip]
    w += dw
    state.last_dw = dw
    state.last_obj = objective
    state.prev = g.copy()
    state.prev[flip] = 0.0
    return w, state
