"""Experiment drivers: the four toy tables, the divergence study, and the
lunar-lander learning runs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..analysis import build_stability, is_stable, pontryagin_lander, simulate_linear, stability_preset
from ..core import RunawayTrajectoryError, SeededRng
from ..critics import MlpCritic
from ..learners import RpropState, ct_td, ct_vgl, rprop_apply
from ..models import LunarLander
from ..targets import ct_rollout, ct_targets_G, ct_targets_V, make_ct_evals
from . import kernels


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    exp: int
    algo: str = "vgl"
    lam: float = None         # bootstrap parameter; exp5 reads it as lambda-bar
    alpha: float = None
    eps: float = 0.0
    c1: float = None
    c2: float = None
    c3: float = None
    k: float = None
    n: int = None
    c: float = None           # squash scale (exp5)
    dt: float = None
    trials: int = None
    seed: int = 0
    cap: int = 10_000_000
    stop_tol: float = None    # success box on the trajectory-shaping weights
    iters: int = None         # exp5 training iterations
    starts: str = "single"    # exp5: 'single' or 'grid'

    def __post_init__(self):
        defaults = {
            1: dict(c1=0.0, k=0.0, n=1, lam=1.0, alpha=0.01, trials=1000,
                    stop_tol=1e-7),
            # the 1e-6 success box reproduces the published iteration counts;
            # see the stopping-threshold note in the README
            2: dict(c1=0.5, c2=1.0, k=1.0, n=2, lam=1.0, alpha=0.01, trials=1000,
                    stop_tol=1e-6),
            3: dict(lam=0.0, alpha=0.1, trials=20),
            4: dict(c1=2.0, c2=0.1, c3=10.0, k=2.0, n=2, lam=1.0, alpha=0.01,
                    trials=1000),
            5: dict(c=0.01, dt=0.1, lam=0.0, alpha=1.0, iters=1000, trials=1),
        }
        if self.exp not in defaults:
            raise ConfigError(f"unknown experiment {self.exp}")
        for key, val in defaults[self.exp].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)
        if self.algo not in kernels.ALGO_IDS:
            raise ConfigError(f"unknown algorithm {self.algo!r}")
        if self.exp != 5 and not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.exp == 5 and self.lam < 0.0:
            raise ConfigError(f"lambda-bar must be >= 0, got {self.lam}")
        if self.exp == 4 and self.algo == "vl":
            raise ConfigError("experiment 4 is defined for the value-gradient "
                              "algorithms only")
        if self.exp == 5 and self.algo == "vglrg":
            raise ConfigError("no continuous-time residual-gradient update is defined")
        if self.trials < 1:
            raise ConfigError("trial count must be >= 1")

    def echo(self) -> str:
        parts = [f"exp={self.exp}", f"algo={self.algo}", f"lam={self.lam}",
                 f"alpha={self.alpha}", f"eps={self.eps}"]
        for key in ("c1", "c2", "c3", "k", "n", "c", "dt"):
            v = getattr(self, key)
            if v is not None:
                parts.append(f"{key}={v}")
        parts += [f"trials={self.trials}", f"seed={self.seed}"]
        return " ".join(parts)


@dataclass
class TrialResult:
    success: bool
    iterations: int
    reason: str
    final_w: np.ndarray
    final_R: float = None


@dataclass
class TableRow:
    config: str
    success_rate: float       # percent
    iter_mean: float          # over successful trials
    iter_sd: float
    trials: list = field(default_factory=list, repr=False)


def _aggregate(cfg, succ, iters, reason, wf, rf=None) -> TableRow:
    ok = iters[succ]
    trials = [TrialResult(bool(succ[i]), int(iters[i]),
                          kernels.REASONS[int(reason[i])],
                          np.atleast_1d(wf[i]).copy(),
                          None if rf is None else float(rf[i]))
              for i in range(len(succ))]
    return TableRow(cfg.echo(), 100.0 * float(np.mean(succ)),
                    float(np.mean(ok)) if ok.size else float("nan"),
                    float(np.std(ok)) if ok.size else float("nan"),
                    trials)


def run_experiment(cfg: ExperimentConfig) -> TableRow:
    """Independent seeded trials of one (experiment, algorithm) cell."""
    if cfg.exp == 3:
        raise ConfigError("experiment 3 has its own driver, run_exp3()")
    if cfg.exp == 5:
        raise ConfigError("experiment 5 has its own driver, run_exp5()")
    rng = SeededRng(cfg.seed)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.trials).astype(np.int64)
    algo = kernels.ALGO_IDS[cfg.algo]
    if cfg.exp == 1:
        w0 = np.asarray(rng.uniform(-10, 10, (cfg.trials, 2)))
        out = kernels.exp1_trials(algo, cfg.lam, cfg.alpha, cfg.eps, cfg.c1,
                                  w0, seeds, cfg.cap, cfg.stop_tol)
        return _aggregate(cfg, *out)
    if cfg.exp == 2:
        w0 = np.asarray(rng.uniform(-10, 10, (cfg.trials, 4)))
        out = kernels.exp2_trials(algo, cfg.lam, cfg.alpha, cfg.eps, cfg.c1, cfg.c2,
                                  cfg.k, w0, seeds, cfg.cap, cfg.stop_tol)
        return _aggregate(cfg, *out)
    if cfg.exp == 4:
        w0 = np.asarray(rng.uniform(-10, 10, cfg.trials))
        succ, iters, reason, wf, rf = kernels.exp4_trials(
            algo, cfg.lam, cfg.alpha, cfg.c1, cfg.c2, cfg.c3, cfg.k, w0, cfg.cap)
        return _aggregate(cfg, succ, iters, reason, wf, rf)
    raise ConfigError(f"experiment {cfg.exp} not table-driven")


# ---------------------------------------------------------------------------
# Experiment 3: divergence study
# ---------------------------------------------------------------------------

@dataclass
class StabilityRow:
    algo: str
    lam: float
    preset: str
    stable: bool
    leading_re: float
    sim_diverged: bool


@dataclass
class EmpiricalRow:
    algo: str
    lam: float
    preset: str
    diverged: int
    seeds: int


def run_exp3(seed: int = 0, vl_seeds: int = 20, vl_alpha: float = 0.1,
             vl_eps: float = 0.1, vl_cap: int = 5_000_000):
    """Stability classification of the four value-gradient systems on both
    parameter presets, plus empirical TD divergence runs on the presets they
    were built to break."""
    rows = []
    p0 = np.array([1.0, 0.5])
    for preset in ("a", "b"):
        base = stability_preset(preset)
        for lam in (0.0, 1.0):
            sys = build_stability(lam, base.c1, base.c2, base.k, base.F)
            for algo, M in (("vgl", sys.M_vgl), ("vglo", sys.M_vglo)):
                diverged, _ = simulate_linear(M, p0)
                rows.append(StabilityRow(algo, lam, preset, is_stable(M),
                                         float(np.max(np.linalg.eigvals(M).real)),
                                         diverged))
    emp = []
    for lam, preset in ((0.0, "a"), (1.0, "b")):
        base = stability_preset(preset)
        rng = SeededRng(seed + int(lam))
        pinit = np.asarray(rng.uniform(-10, 10, (vl_seeds, 2)))
        w24 = np.asarray(rng.uniform(-10, 10, (vl_seeds, 2)))
        seeds = np.random.SeedSequence(seed + 100 + int(lam)) \
            .generate_state(vl_seeds).astype(np.int64)
        div, _ = kernels.vl_reparam_trials(lam, vl_alpha, vl_eps, base.c1, base.c2,
                                           base.k, base.F, pinit, w24, seeds,
                                           vl_cap, 1e12)
        emp.append(EmpiricalRow("vl", lam, preset, int(np.sum(div)), vl_seeds))
    return rows, emp


# ---------------------------------------------------------------------------
# Experiment 5: lunar lander with the MLP critic
# ---------------------------------------------------------------------------

def exp5_starts(kind: str):
    if kind == "single":
        return [np.array([100.0, 0.0, 50.0])]
    if kind == "grid":
        hs = np.arange(20.0, 101.0, 20.0)
        vs = np.linspace(-10.0, 0.0, 10)
        return [np.array([h, v, 50.0]) for h in hs for v in vs]
    raise ConfigError(f"unknown start set {kind!r}")


@dataclass
class Exp5Result:
    curve: np.ndarray            # (iters, 2): iteration, mean training R
    final_w: np.ndarray
    final_R: float               # fine re-simulation of the learned policy
    oracle_R: float = None
    reached_at: int = None       # first iteration within tolerance of the oracle
    failed: str = ""
    trajectories: list = field(default_factory=list)


def run_exp5(cfg: ExperimentConfig, oracle_R: float = None, tol_frac: float = 0.05,
             check_every: int = 10, stop_early: bool = True) -> Exp5Result:
    """One training run: accumulate the chosen update over all start states,
    feed the sum to RPROP, track the training reward curve."""
    if cfg.exp != 5:
        raise ConfigError("run_exp5 wants an experiment-5 config")
    model = LunarLander(c=cfg.c)
    starts = exp5_starts(cfg.starts)
    rng = SeededRng(cfg.seed)
    critic = MlpCritic()
    critic.init_weights(rng)
    state = RpropState.fresh(critic.n_weights)
    if oracle_R is None and cfg.starts == "single":
        oracle_R = pontryagin_lander(model, starts[0], dt=1e-3).R
    fine_dt = cfg.dt / 10.0

    curve = []
    reached = None
    for it in range(1, cfg.iters + 1):
        acc = np.zeros(critic.n_weights)
        rs = []
        try:
            for x0 in starts:
                traj = fast_ct_rollout(model, critic, x0, dt=cfg.dt)
                evals = make_ct_evals(critic, traj)
                if cfg.algo in ("vgl", "vglo"):
                    gp = ct_targets_G(model, traj, cfg.lam, evals)
                    upd = ct_vgl(model, traj, evals, gp, 1.0,
                                 mode="omega" if cfg.algo == "vglo" else "identity")
                else:
                    vp = ct_targets_V(model, traj, cfg.lam, evals.V)
                    upd = ct_td(traj, evals, vp, 1.0)
                acc += upd.dw
                rs.append(traj.total_reward)
        except RunawayTrajectoryError:
            return Exp5Result(np.array(curve), critic.w, float("nan"), oracle_R,
                              None, failed="runaway trajectory")
        except ZeroDivisionError:
            # boundary correction singular this iteration; skip the update
            curve.append((it, curve[-1][1] if curve else float("nan")))
            continue
        mean_r = float(np.mean(rs))
        curve.append((it, mean_r))
        critic.w, state = rprop_apply(critic.w, acc, state, objective=mean_r)
        if oracle_R is not None and it % check_every == 0:
            r_fine = _fine_R(model, critic, starts, fine_dt)
            if abs(r_fine - oracle_R) <= tol_frac * abs(oracle_R):
                reached = it
                if stop_early:
                    break
    final_R = _fine_R(model, critic, starts, fine_dt)
    if reached is None and oracle_R is not None \
            and abs(final_R - oracle_R) <= tol_frac * abs(oracle_R):
        reached = len(curve)
    trajs = [fast_ct_rollout(model, critic, x0, dt=cfg.dt) for x0 in starts]
    return Exp5Result(np.array(curve), critic.w, final_R, oracle_R, reached,
                      "", trajs)


def _fine_R(model, critic, starts, dt):
    try:
        return float(np.mean([fast_ct_rollout(model, critic, x0, dt=dt).total_reward
                              for x0 in starts]))
    except RunawayTrajectoryError:
        return float("nan")


def fast_ct_rollout(model: LunarLander, critic: MlpCritic, x0, dt: float,
                    cap: int | None = None):
    """Compiled lander rollout for MLP critics; arithmetic matches the
    generic targets.ct_rollout to floating-point noise."""
    from ..targets import CtTrajectory
    cap = cap if cap is not None else model.step_cap
    states, actions, rewards, dts, term = kernels.mlp_lander_rollout(
        critic.W1, critic.b1, critic.W2, critic.b2, critic.Ws, critic.scale,
        critic.out_scale, critic.identity_inputs, model.c, model.kg, model.kf,
        np.asarray(x0, dtype=float), dt, cap)
    if term < 0:
        raise RunawayTrajectoryError(f"lander exceeded {cap} Euler steps")
    V, G = critic.value_batch(states)
    dfda = model.dfbar_da(states[-1], None)
    actions[-1] = model.g(model.rbar_linear_da() + float(dfda @ G[-1]))
    traj = CtTrajectory(states, actions, rewards, dts,
                        "ground" if term == 0 else "fuel",
                        model.impulse(states[-1]), Gs=G)
    traj.total_reward = float(np.sum(rewards * dts)) + traj.impulse
    return traj
