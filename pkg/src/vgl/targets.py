"""Trajectory rollout and the backward target recursions.

Discrete time: a cached greedy (or noisy-greedy) rollout plus the backward
recursions for the value targets V', the value-gradient targets G', and the
curvature weighting matrices Omega.  Continuous time: explicit-Euler rollout
with exact terminal-surface clipping and the backward ODE for G' including
the terminal discontinuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RunawayTrajectoryError, TargetsUndefinedError
from .policy import CtPolicyEval, PolicyEval, ct_action, ct_policy, epsilon_greedy, greedy_action


@dataclass
class Trajectory:
    states: list                 # F+1 arrays (d,)
    actions: list                # F floats
    rewards: list                # F floats
    pes: list                    # F PolicyEvals
    bundles: list                # F+1 CriticBundles
    dfdx: list                   # F arrays (d, d)
    dfda: list                   # F arrays (d,)
    drdx: list                   # F arrays (d,)
    drda: list                   # F floats
    F: int = 0
    total_reward: float = 0.0

    def __post_init__(self):
        self.F = len(self.actions)
        self.total_reward = float(sum(self.rewards))


def rollout(model, critic, x0, rng=None, eps: float = 0.0, cap: int = 100_000) -> Trajectory:
    """Run the (epsilon-)greedy policy from x0 until terminal, caching
    states, actions, rewards, model partials, critic bundles and policy
    evaluations at every step."""
    x = np.asarray(x0, dtype=float)
    states, actions, rewards, pes = [x], [], [], []
    dfdx, dfda, drdx, drda = [], [], [], []
    bundles = [critic.eval(0, x)]
    t = 0
    while not model.terminal(t):
        if t >= cap:
            raise RunawayTrajectoryError(f"no terminal state after {cap} steps")
        if eps > 0.0:
            pe = epsilon_greedy(model, critic, t, x, eps, rng)
        else:
            pe = greedy_action(model, critic, t, x)
        a = pe.action
        xn, r = model.step(t, x, a)
        dfdx.append(model.dfdx(t, x, a))
        dfda.append(model.dfda(t, x, a))
        drdx.append(model.drdx(t, x, a))
        drda.append(model.drda(t, x, a))
        actions.append(a)
        rewards.append(r)
        pes.append(pe)
        x = xn
        t += 1
        states.append(x)
        bundles.append(critic.eval(t, x))
    return Trajectory(states, actions, rewards, pes, bundles, dfdx, dfda, drdx, drda)


def compute_targets_V(traj: Trajectory, lam: float) -> np.ndarray:
    """Backward recursion V'_t = r_t + lam V'_{t+1} + (1-lam) V_{t+1}."""
    F = traj.F
    vp = np.zeros(F + 1)
    for t in range(F - 1, -1, -1):
        vp[t] = traj.rewards[t] + lam * vp[t + 1] + (1.0 - lam) * traj.bundles[t + 1].V
    return vp


def compute_targets_G(traj: Trajectory, lam: float) -> np.ndarray:
    """Backward value-gradient targets.

    lam = 0 reduces to G'_t = (dr/dx)_t + (df/dx)_t G_{t+1} and always
    exists; for lam > 0 the policy derivative dpi/dx enters and a missing
    one makes every earlier target undefined.
    """
    F = traj.F
    d = traj.states[0].size
    gp = np.zeros((F + 1, d))
    for t in range(F - 1, -1, -1):
        if lam == 0.0:
            gp[t] = traj.drdx[t] + traj.dfdx[t] @ traj.bundles[t + 1].G
            continue
        dpi = traj.pes[t].dpi_dx
        if dpi is None:
            raise TargetsUndefinedError(t)
        blend = lam * gp[t + 1] + (1.0 - lam) * traj.bundles[t + 1].G
        gp[t] = (traj.drdx[t] + dpi * traj.drda[t]) \
            + (traj.dfdx[t] + np.outer(dpi, traj.dfda[t])) @ blend
    return gp


def compute_omega(traj: Trajectory) -> list:
    """Curvature weightings Omega_t = -(df/da)^T (d2Q/da2)^{-1} (df/da).

    Saturated and action-independent steps contribute a zero matrix; an
    unsaturated step with vanishing curvature is an error.
    """
    d = traj.states[0].size
    out = []
    for t in range(traj.F):
        pe = traj.pes[t]
        dfda = traj.dfda[t]
        if pe.saturated or (not np.any(dfda) and traj.drda[t] == 0.0):
            out.append(np.zeros((d, d)))
            continue
        if pe.d2Qda2 == 0.0:
            raise ValueError(f"singular action curvature at unsaturated step {t}")
        out.append(-np.outer(dfda, dfda) / pe.d2Qda2)
    return out


def replay_reward(model, x0, actions) -> float:
    """Total reward of a fixed action sequence (no policy feedback)."""
    x = np.asarray(x0, dtype=float)
    total = 0.0
    for t, a in enumerate(actions):
        x, r = model.step(t, x, a)
        total += r
    return total


# ---------------------------------------------------------------------------
# Continuous time
# ---------------------------------------------------------------------------

@dataclass
class CtTrajectory:
    states: np.ndarray           # (N+1, d), last row exactly on the surface
    actions: np.ndarray          # (N+1,) greedy action at each node
    rewards: np.ndarray          # (N,) running reward rate at step start
    dts: np.ndarray              # (N,) step sizes, last one clipped
    terminal_kind: str           # 'ground' or 'fuel'
    impulse: float
    Gs: np.ndarray = None        # (N+1, d) critic value-gradients at nodes
    total_reward: float = 0.0

    @property
    def N(self):
        return len(self.dts)

    def times(self):
        return np.concatenate([[0.0], np.cumsum(self.dts)])


def ct_rollout(model, critic, x0, dt: float, cap: int | None = None) -> CtTrajectory:
    """Explicit-Euler rollout of xdot = fbar(x, pi(x, w)).

    The final step is linearly clipped so the terminal surface (h = 0 or
    u = 0) is hit exactly; the terminal impulse is added to the total.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    cap = cap if cap is not None else model.step_cap
    x = np.asarray(x0, dtype=float)
    if model.terminal(x):
        raise ValueError("start state is already terminal")
    states, actions, rewards, dts, gs = [x], [], [], [], []

    def act(xc):
        if hasattr(critic, "value_batch"):
            _, G = critic.value_batch(xc[None, :])
            g = G[0]
        else:
            g = critic.eval(0, xc).G
        dfda = model.dfbar_da(xc, None)
        return model.g(model.rbar_linear_da() + float(dfda @ g)), g

    total = 0.0
    for _ in range(cap):
        a, g = act(x)
        actions.append(a)
        gs.append(g)
        xd = model.fbar(x, a)
        xn = x + dt * xd
        step = dt
        if xn[0] <= 0.0 or xn[2] <= 0.0:
            # clip the step so the first crossed surface is hit exactly
            tau = 1.0
            kind = None
            if xn[0] <= 0.0 and xd[0] < 0.0:
                th = x[0] / (-xd[0] * dt)
                if th <= tau:
                    tau, kind = th, "ground"
            if xn[2] <= 0.0 and xd[2] < 0.0:
                tu = x[2] / (-xd[2] * dt)
                if tu < tau or (tu == tau and kind is None):
                    tau, kind = tu, "fuel"
            step = tau * dt
            xn = x + step * xd
            xn[0 if kind == "ground" else 2] = 0.0
            r = model.rbar(x, a)
            rewards.append(r)
            dts.append(step)
            total += r * step
            states.append(xn)
            af, gf = act(xn)
            actions.append(af)
            gs.append(gf)
            imp = model.impulse(xn)
            traj = CtTrajectory(np.array(states), np.array(actions), np.array(rewards),
                                np.array(dts), kind, imp, np.array(gs))
            traj.total_reward = total + imp
            return traj
        r = model.rbar(x, a)
        rewards.append(r)
        dts.append(step)
        total += r * step
        x = xn
        states.append(x)
    raise RunawayTrajectoryError(f"lander exceeded {cap} Euler steps")


def ct_replay_reward(model, x0, actions, dt: float, cap: int | None = None) -> float:
    """Total reward of a fixed continuous-time action sequence with final
    clipping; holds the last action once the sequence is exhausted.  Used by
    the finite-difference and shooting oracles."""
    cap = cap if cap is not None else max(model.step_cap, 2 * len(actions))
    x = np.asarray(x0, dtype=float)
    total = 0.0
    for i in range(cap):
        a = actions[min(i, len(actions) - 1)]
        xd = model.fbar(x, a)
        xn = x + dt * xd
        if xn[0] <= 0.0 or xn[2] <= 0.0:
            tau = 1.0
            if xn[0] <= 0.0 and xd[0] < 0.0:
                tau = min(tau, x[0] / (-xd[0] * dt))
            if xn[2] <= 0.0 and xd[2] < 0.0:
                tau = min(tau, x[2] / (-xd[2] * dt))
            xn = x + tau * dt * xd
            total += model.rbar(x, a) * tau * dt
            return total + model.impulse(xn)
        total += model.rbar(x, a) * dt
        x = xn
    raise RunawayTrajectoryError("replay did not terminate")


def ct_boundary_target(model, traj: CtTrajectory) -> np.ndarray:
    """One-sided limit of G' at the terminal surface.

    Ground contact (h = 0): the printed discontinuity correction
        ( (kf aF - rc(aF))/vF + 2 (aF - kg), -2 vF, 0 ).
    Fuel exhaustion (u = 0): derived by the same limiting argument with the
    freefall impulse,
        ( -2 kg, -2 vF, -kf + rc(aF)/aF - 2 vF ).
    """
    xF = traj.states[-1]
    aF = traj.actions[-1]
    vF = xF[1]
    rc, _ = model.action_cost(aF)
    if traj.terminal_kind == "ground":
        if abs(vF) < 1e-9:
            raise ZeroDivisionError("boundary correction singular: vF = 0 at ground contact")
        g0 = (model.kf * aF - rc) / vF + 2.0 * (aF - model.kg)
        return np.array([g0, -2.0 * vF, 0.0])
    if aF < 1e-9:
        raise ZeroDivisionError("boundary correction singular: aF = 0 at fuel exhaustion")
    g2 = -model.kf + rc / aF - 2.0 * vF
    return np.array([-2.0 * model.kg, -2.0 * vF, g2])


@dataclass
class CtEvals:
    """Per-node critic bundle arrays for one continuous-time trajectory."""
    V: np.ndarray       # (N+1,)
    G: np.ndarray       # (N+1, d)
    dVdw: np.ndarray    # (N+1, m)
    dGdw: np.ndarray    # (N+1, m, d)
    dGdx: np.ndarray    # (N+1, d, d)


def make_ct_evals(critic, traj: CtTrajectory) -> CtEvals:
    if hasattr(critic, "eval_batch"):
        return CtEvals(*critic.eval_batch(traj.states))
    bundles = [critic.eval(0, x) for x in traj.states]
    return CtEvals(np.array([b.V for b in bundles]),
                   np.array([b.G for b in bundles]),
                   np.array([b.dVdw for b in bundles]),
                   np.array([b.dGdw for b in bundles]),
                   np.array([b.dGdx for b in bundles]))


def ct_targets_G(model, traj: CtTrajectory, lamfac: float, evals: CtEvals) -> np.ndarray:
    """Backward Euler integration of the target value-gradient ODE

        dG'/dt = -(Dr/Dx) - (Df/Dx) G' + lamfac (G' - G),

    on the reversed rollout grid, where D/Dx = d/dx + (dpi/dx) d/da and the
    boundary value is the terminal discontinuity correction.  Models with
    a ct_partials_batch hook get a vectorised precomputation pass."""
    N = traj.N
    d = traj.states.shape[1]
    gp = np.zeros((N + 1, d))
    gp[N] = ct_boundary_target(model, traj)
    if hasattr(model, "ct_partials_batch"):
        drdx_a, drda_a, dfdx, dfda = model.ct_partials_batch(
            traj.states[:N], traj.actions[:N])
        pre = model.rbar_linear_da() + evals.G[:N] @ dfda
        dpi_a = model.gprime_batch(pre)[:, None] * (evals.dGdx[:N] @ dfda)
        for k in range(N - 1, -1, -1):
            nxt = gp[k + 1]
            rhs = drdx_a[k] + dpi_a[k] * (drda_a[k] + float(dfda @ nxt)) \
                + dfdx @ nxt
            if lamfac != 0.0:
                rhs = rhs - lamfac * (nxt - evals.G[k + 1])
            gp[k] = nxt + traj.dts[k] * rhs
        return gp
    for k in range(N - 1, -1, -1):
        x, a = traj.states[k], traj.actions[k]
        dfdx = model.dfbar_dx(x, a)
        dfda = model.dfbar_da(x, a)
        drdx = model.drbar_dx(x, a)
        drda = model.drbar_da(x, a)
        pre = model.rbar_linear_da() + float(dfda @ evals.G[k])
        dpi = model.gprime(pre) * (evals.dGdx[k] @ dfda)
        dr_tot = drdx + dpi * drda
        df_tot = dfdx + np.outer(dpi, dfda)
        rhs = dr_tot + df_tot @ gp[k + 1]
        if lamfac != 0.0:
            rhs = rhs - lamfac * (gp[k + 1] - evals.G[k + 1])
        gp[k] = gp[k + 1] + traj.dts[k] * rhs
    return gp


def ct_targets_V(model, traj: CtTrajectory, lamfac: float, Vs) -> np.ndarray:
    """Backward Euler for dV'/dt = -rbar + lamfac (V' - V), V'_F = impulse."""
    N = traj.N
    vp = np.zeros(N + 1)
    vp[N] = traj.impulse
    for k in range(N - 1, -1, -1):
        rhs = traj.rewards[k]
        if lamfac != 0.0:
            rhs = rhs - lamfac * (vp[k + 1] - Vs[k + 1])
        vp[k] = vp[k + 1] + traj.dts[k] * rhs
    return vp


def dump_trajectory(traj, fh, targets_v=None, targets_g=None):
    """TSV dump: t, state components, a, r, V, V', G components, G' components."""
    if isinstance(traj, CtTrajectory):
        d = traj.states.shape[1]
        n = traj.N
        states = traj.states
        actions = list(traj.actions[:n]) + [math.nan]
        rewards = list(traj.rewards) + [math.nan]
        times = traj.times()
        Vs = [math.nan] * (n + 1)
        Gs = traj.Gs
    else:
        d = traj.states[0].size
        n = traj.F
        states = traj.states
        actions = list(traj.actions) + [math.nan]
        rewards = list(traj.rewards) + [math.nan]
        times = list(range(n + 1))
        Vs = [b.V for b in traj.bundles]
        Gs = [b.G for b in traj.bundles]
    cols = (["t"] + [f"x{i}" for i in range(d)] + ["a", "r", "V", "Vp"]
            + [f"G{i}" for i in range(d)] + [f"Gp{i}" for i in range(d)])
    fh.write("\t".join(cols) + "\n")
    for t in range(n + 1):
        vp = targets_v[t] if targets_v is not None else math.nan
        gp = targets_g[t] if targets_g is not None else [math.nan] * d
        row = ([f"{times[t]:.10g}"] + [f"{v:.10g}" for v in np.atleast_1d(states[t])]
               + [f"{actions[t]:.10g}", f"{rewards[t]:.10g}",
                  f"{Vs[t]:.10g}", f"{vp:.10g}"]
               + [f"{v:.10g}" for v in np.atleast_1d(Gs[t])]
               + [f"{v:.10g}" for v in np.atleast_1d(gp)])
        fh.write("\t".join(row) + "\n")
