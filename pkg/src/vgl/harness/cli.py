"""Command-line harness.

Subcommands: exp1..exp5 (table or learning-curve reproduction), gradcheck
(derivative oracle suite), oracle-lander (Pontryagin optimal trajectory),
stability (divergence presets).  Outputs are TSV files under --out.
Exit codes: 0 success, 1 oracle-suite failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _experiment_flags(p):
    p.add_argument("--algo", default=None, choices=["vl", "vgl", "vglo", "vglrg"])
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--c3", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stop-tol", dest="stop_tol", type=float, default=None)
    p.add_argument("--out", default="out")


def build_parser():
    ap = argparse.ArgumentParser(prog="vgl",
                                 description="value-gradient learning harness")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for e in (1, 2, 4):
        p = sub.add_parser(f"exp{e}", help=f"toy-problem experiment {e}")
        _experiment_flags(p)
    p3 = sub.add_parser("exp3", help="divergence study")
    p3.add_argument("--seed", type=int, default=0)
    p3.add_argument("--out", default="out")
    p5 = sub.add_parser("exp5", help="lunar-lander learning run")
    _experiment_flags(p5)
    p5.add_argument("--iters", type=int, default=None)
    p5.add_argument("--starts", default="single", choices=["single", "grid"])
    pg = sub.add_parser("gradcheck", help="run the derivative oracle suite")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--instances", type=int, default=100)
    po = sub.add_parser("oracle-lander", help="Pontryagin optimal trajectory")
    po.add_argument("--h0", type=float, required=True)
    po.add_argument("--v0", type=float, required=True)
    po.add_argument("--u0", type=float, required=True)
    po.add_argument("--c", type=float, default=0.01)
    po.add_argument("--dt", type=float, default=1e-3)
    po.add_argument("--out", default="out")
    ps = sub.add_parser("stability", help="stability report for a preset")
    ps.add_argument("--preset", choices=["a", "b"], default=None)
    ps.add_argument("--out", default="out")
    return ap


def _run_table_experiment(args, exp):
    from .experiments import ExperimentConfig, run_experiment
    from .tsv import write_table_row, write_trial_log
    cfg = ExperimentConfig(exp=exp, algo=args.algo or "vgl", lam=args.lam,
                           alpha=args.alpha, eps=args.epsilon, c1=args.c1,
                           c2=args.c2, c3=args.c3, k=args.k, n=args.n,
                           trials=args.trials, seed=args.seed,
                           stop_tol=args.stop_tol)
    row = run_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    tag = f"exp{exp}_{cfg.algo}_lam{cfg.lam}_a{cfg.alpha}_e{cfg.eps}_s{cfg.seed}"
    write_table_row(os.path.join(args.out, f"{tag}.tsv"), row)
    write_trial_log(os.path.join(args.out, f"{tag}_trials.tsv"), row)
    print(f"{row.config}\nsuccess {row.success_rate:.1f}%  iterations "
          f"{row.iter_mean:.1f} +- {row.iter_sd:.1f}")
    if exp == 4 and row.trials and row.trials[0].final_R is not None:
        rs = [t.final_R for t in row.trials if t.success]
        if rs:
            print(f"converged R {np.mean(rs):.5f}")
    return 0


def _run_exp3(args):
    from .experiments import run_exp3
    from .tsv import write_stability_report
    rows, emp = run_exp3(seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_stability_report(os.path.join(args.out, "exp3_stability.tsv"), rows, emp)
    for r in rows:
        print(f"{r.algo}({r.lam:g}) preset {r.preset}: "
              f"{'stable' if r.stable else 'DIVERGES'} "
              f"(Re eig {r.leading_re:+.4f}, simulated "
              f"{'diverged' if r.sim_diverged else 'converged'})")
    for r in emp:
        print(f"vl({r.lam:g}) preset {r.preset}: {r.diverged}/{r.seeds} "
              f"runs blew past 1e12")
    return 0


def _run_exp5(args):
    from .experiments import ExperimentConfig, run_exp5
    from .tsv import write_curve
    from ..targets import dump_trajectory
    cfg = ExperimentConfig(exp=5, algo=args.algo or "vglo", lam=args.lam,
                           alpha=args.alpha, eps=args.epsilon, c=args.c,
                           dt=args.dt, trials=args.trials, seed=args.seed,
                           iters=args.iters, starts=args.starts)
    res = run_exp5(cfg, stop_early=False)
    os.makedirs(args.out, exist_ok=True)
    tag = f"exp5_{cfg.algo}_{cfg.starts}_s{cfg.seed}"
    write_curve(os.path.join(args.out, f"{tag}_curve.tsv"), res.curve, echo=cfg.echo())
    for i, traj in enumerate(res.trajectories):
        with open(os.path.join(args.out, f"{tag}_traj{i}.tsv"), "w") as fh:
            dump_trajectory(traj, fh)
    print(cfg.echo())
    if res.failed:
        print(f"run failed: {res.failed}")
        return 0
    print(f"final R (fine re-simulation) {res.final_R:.5f}")
    if res.oracle_R is not None:
        print(f"oracle R {res.oracle_R:.5f}  "
              f"gap {100 * abs(res.final_R - res.oracle_R) / abs(res.oracle_R):.2f}%")
        if res.reached_at:
            print(f"within 5% of the oracle at iteration {res.reached_at}")
    return 0


def _run_gradcheck(args):
    from ..analysis import run_gradcheck
    checks = run_gradcheck(seed=args.seed, n_inst=args.instances)
    bad = 0
    for c in checks:
        status = "ok" if c.ok else "FAIL"
        print(f"{c.name:28s} n={c.instances:4d} max_err={c.max_err:.3e} "
              f"tol={c.tol:.0e} {status}")
        bad += not c.ok
    return 1 if bad else 0


def _run_oracle(args):
    from ..analysis import pontryagin_lander
    from ..models import LunarLander
    from .tsv import write_tsv
    model = LunarLander(c=args.c)
    sol = pontryagin_lander(model, (args.h0, args.v0, args.u0), dt=args.dt)
    os.makedirs(args.out, exist_ok=True)
    rows = [(i * sol.dt, s[0], s[1], s[2], a, p[0], p[1], p[2])
            for i, (s, a, p) in enumerate(zip(sol.states, sol.actions, sol.adjoint))]
    write_tsv(os.path.join(args.out, "oracle_lander.tsv"),
              ["t", "h", "v", "u", "a", "p0", "p1", "p2"], rows,
              echo=f"h0={args.h0} v0={args.v0} u0={args.u0} c={args.c} dt={args.dt}")
    print(f"terminal velocity {sol.v_F:.6f}, fuel used {sol.fuel_used:.4f}")
    print(f"total R {sol.R:.5f}")
    return 0


def _run_stability(args):
    from ..analysis import build_stability, is_stable, stability_preset
    from .tsv import write_tsv
    presets = [args.preset] if args.preset else ["a", "b"]
    rows = []
    for name in presets:
        base = stability_preset(name)
        for lam in (0.0, 1.0):
            sys_ = build_stability(lam, base.c1, base.c2, base.k, base.F)
            for algo, M in (("vgl", sys_.M_vgl), ("vglo", sys_.M_vglo)):
                lead = float(np.max(np.linalg.eigvals(M).real))
                rows.append((algo, lam, name, int(is_stable(M)), lead))
                print(f"{algo}({lam:g}) preset {name}: "
                      f"{'stable' if is_stable(M) else 'DIVERGES'} "
                      f"(Re eig {lead:+.4f})")
    os.makedirs(args.out, exist_ok=True)
    write_tsv(os.path.join(args.out, "stability.tsv"),
              ["algorithm", "lambda", "preset", "stable", "leading_eig_re"], rows)
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    from .experiments import ConfigError
    try:
        if args.cmd in ("exp1", "exp2", "exp4"):
            return _run_table_experiment(args, int(args.cmd[3]))
        if args.cmd == "exp3":
            return _run_exp3(args)
        if args.cmd == "exp5":
            return _run_exp5(args)
        if args.cmd == "gradcheck":
            return _run_gradcheck(args)
        if args.cmd == "oracle-lander":
            return _run_oracle(args)
        if args.cmd == "stability":
            return _run_stability(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
