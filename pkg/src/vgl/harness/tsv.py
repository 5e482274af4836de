"""Tab-separated output: header row, '.' decimal, LF endings, '#' config echo."""

from __future__ import annotations

import os


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def write_tsv(path, header, rows, echo: str = None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        if echo:
            fh.write(f"# {echo}\n")
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def write_table_row(path, row):
    write_tsv(path, ["success_rate_pct", "iter_mean", "iter_sd"],
              [(row.success_rate, row.iter_mean, row.iter_sd)], echo=row.config)


def write_trial_log(path, row):
    header = ["trial", "success", "iterations", "reason", "final_w", "final_R"]
    rows = []
    for i, tr in enumerate(row.trials):
        w = ",".join(f"{v:.10g}" for v in tr.final_w)
        rows.append((i, int(tr.success), tr.iterations, tr.reason, w,
                     float("nan") if tr.final_R is None else tr.final_R))
    write_tsv(path, header, rows, echo=row.config)


def write_stability_report(path, rows, emp_rows):
    header = ["algorithm", "lambda", "preset", "stable", "leading_eig_re",
              "sim_diverged", "empirical_diverged", "seeds"]
    out = [(r.algo, r.lam, r.preset, int(r.stable), r.leading_re,
            int(r.sim_diverged), "", "") for r in rows]
    out += [(r.algo, r.lam, r.preset, "", "", "", r.diverged, r.seeds)
            for r in emp_rows]
    write_tsv(path, header, out)


def write_curve(path, curve, echo=None):
    write_tsv(path, ["iteration", "mean_R"], [tuple(r) for r in curve], echo=echo)
