"""Command line surface: analyze, simulate, aggregate, mb, verify, report."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _svg, analysis, simulate, verify
from .aggregation import (
    asymptotic_jump_chain,
    find_metabasins,
    metastate_space,
    transition_exponents,
    valley_transition_limits,
)
from .chain import build_metropolis
from .filtration import scoppola_filtration
from .landscape import Landscape, LandscapeError, canonical, load_landscape
from .saddles import saddle_table
from .valleys import decompose_all, tree_to_dot, build_tree


def _round12(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_round12(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(args) -> Landscape:
    if args.canonical:
        return canonical(args.canonical)
    if args.landscape:
        return load_landscape(args.landscape)
    raise LandscapeError("pass --landscape PATH or --canonical NAME")


def _parse_grid(text: str) -> np.ndarray:
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def cmd_analyze(args) -> int:
    l = _load(args)
    out = Path(args.out)
    f = scoppola_filtration(l)
    table = saddle_table(l)
    decomps = decompose_all(l, f, table)
    lab = l.labels
    _write_json(out / "filtration.json", {
        "deletion_order": [lab[s] for s in f.deletion_order],
        "deletion_costs": list(f.deletion_costs),
        "levels": f.levels,
        "M": {str(i): sorted(lab[s] for s in f.M(i)) for i in range(1, f.levels + 1)},
    })
    _write_json(out / "valleys.json", {
        str(d.level): {
            "valleys": {str(lab[m]): sorted(lab[s] for s in v)
                        for m, v in d.valley.items()},
            "strict": {str(lab[m]): sorted(lab[s] for s in v)
                       for m, v in d.strict.items()},
            "nonassigned": sorted(lab[s] for s in d.nonassigned),
            "exit_gate": {str(lab[m]): (lab[g] if g is not None else None)
                          for m, g in d.exit_gate.items()},
            "pending": {str(lab[m]): sorted(lab[s] for s in states)
                        for m, (_, states, _) in d.pending.items()},
        }
        for d in decomps
    })
    tree = build_tree(l, f, decomps, table)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.dot").write_text(tree_to_dot(tree, labels=lab))
    with open(out / "saddles.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "saddle", "energy"])
        for a in range(l.n):
            for b in range(a + 1, l.n):
                w.writerow([lab[a], lab[b], lab[table.state[a, b]],
                            f"{table.energy[a, b]:.12g}"])
    return 0


def cmd_simulate(args) -> int:
    l = _load(args)
    model = build_metropolis(l, args.beta)
    start = l.index_of_label(args.start) if args.start is not None else int(np.argmin(l.energy))
    traj = simulate.run_metropolis(model, start, args.steps, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "state"])
        for n, s in enumerate(traj.states):
            w.writerow([n, l.labels[s]])
    counts = np.bincount(traj.states, minlength=l.n)
    _write_json(out / "stats.json", {
        "beta": args.beta, "seed": args.seed, "steps": args.steps,
        "start": l.labels[start],
        "occupancy": {str(l.labels[s]): int(c) for s, c in enumerate(counts)},
        "mean_energy": float(np.mean(l.energy[traj.states])),
    })
    return 0


def cmd_aggregate(args) -> int:
    l = _load(args)
    f = scoppola_filtration(l)
    table = saddle_table(l)
    decomps = decompose_all(l, f, table)
    level = args.level or max(f.levels - 1, 1)
    ms = metastate_space(decomps[level - 1], f)
    jc = asymptotic_jump_chain(l, ms)
    lab = l.labels
    _write_json(Path(args.out) / "phat.json", {
        "level": level,
        "metastates": [lab[m] for m in jc.metastates],
        "rows": {str(lab[m]): {str(lab[s]): float(jc.phat[jc.index(m), jc.index(s)])
                               for s in jc.metastates
                               if jc.phat[jc.index(m), jc.index(s)] > 0}
                 for m in jc.metastates},
    })
    model = build_metropolis(l, args.beta)
    with open(Path(args.out) / "transition_matrix.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["from", "to", "p"])
        for a in range(l.n):
            for b in range(l.n):
                if model.P[a, b] > 0:
                    w.writerow([lab[a], lab[b], f"{model.P[a, b]:.12g}"])
    exps = transition_exponents(l, ms, table)
    mlist, limits = valley_transition_limits(ms, jc)
    _write_json(Path(args.out) / "exponents.json", {
        "level": level,
        "D": {f"{lab[m]}->{lab[mp]}": v for (m, mp), v in exps.D.items()},
        "udh": {f"{lab[m]}->{lab[mp]}": v for (m, mp), v in exps.udh.items()},
        "boundary": {f"{lab[m]}=>{lab[s]}": v for (m, s), v in exps.boundary_exp.items()},
        "limits": {f"{lab[m]}->{lab[mp]}": float(limits[a, b])
                   for a, m in enumerate(mlist) for b, mp in enumerate(mlist)},
    })
    return 0


def cmd_mb(args) -> int:
    l = _load(args)
    report = find_metabasins(l, args.eps)
    lab = l.labels
    if report.level is None:
        print(f"no metabasin level of order {args.eps}")
    else:
        print(f"metabasins of order {args.eps} at level {report.level}")
        for m, members in sorted(report.partition.items()):
            print(f"  {lab[m]}: {sorted(lab[s] for s in members)}")
    _write_json(Path(args.out) / "mb.json", {
        "eps": args.eps,
        "level": report.level,
        "partition": {str(lab[m]): sorted(lab[s] for s in v)
                      for m, v in (report.partition or {}).items()},
        "mb1_margin": {str(lab[m]): v for m, v in report.mb1_margin.items()},
        "mb2_witnesses": {str(lab[m]): [lab[s] for s in w]
                          for m, w in report.mb2_witnesses.items()},
        "scan": [list(row) for row in report.scan],
    })
    return 0


def cmd_verify(args) -> int:
    only = set(args.only.split(",")) if args.only else None
    grid = _parse_grid(args.beta_grid) if args.beta_grid else None
    report = verify.run_acceptance(only=only, beta_grid=grid)
    for crit in report["criteria"]:
        print(f"{'PASS' if crit['passed'] else 'FAIL'}  {crit['name']}")
    out = Path(args.out)
    _write_json(out / "verify.json", report)
    curves_dir = out / "curves"
    for crit in report["criteria"]:
        for key, val in crit["details"].items():
            if key != "curves" and not key.endswith("_curves"):
                continue
            for name, (xs, ys) in val.items():
                safe = "".join(c if c.isalnum() else "_" for c in f"{crit['name']}_{name}")
                curves_dir.mkdir(parents=True, exist_ok=True)
                with open(curves_dir / f"{safe}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["x", "y"])
                    for x, y in zip(xs, ys):
                        w.writerow([f"{x:.12g}", f"{y:.12g}"])
    return 0 if report["all_passed"] else 1


def cmd_report(args) -> int:
    out = Path(args.out)
    curves_dir = out / "curves"
    plots = out / "plots"
    if not curves_dir.is_dir():
        print(f"no curves directory under {out}", file=sys.stderr)
        return 2
    plots.mkdir(parents=True, exist_ok=True)
    made = 0
    for path in sorted(curves_dir.glob("*.csv")):
        xs, ys = [], []
        with open(path) as fh:
            for row in csv.DictReader(fh):
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
        svg = _svg.line_chart({path.stem: (xs, ys)}, title=path.stem)
        (plots / f"{path.stem}.svg").write_text(svg)
        made += 1
    print(f"wrote {made} plots to {plots}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metabasins",
                                description="Energy landscape valley analysis")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--landscape", help="landscape JSON file")
        sp.add_argument("--canonical", help="built-in landscape name (L6, L14, L14X)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--format", default="json",
                        choices=["json", "csv", "dot", "svg"], help="primary output format")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--beta", type=float, default=1.0)
        sp.add_argument("--beta-grid", dest="beta_grid", help="lo:hi:n")
        sp.add_argument("--level", type=int)
        sp.add_argument("--eps", type=float, default=0.5)
        sp.add_argument("--reps", type=int, default=1000)

    sp = sub.add_parser("analyze", help="filtration, valleys, tree, saddle table")
    common(sp)
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("simulate", help="sample a trajectory")
    common(sp)
    sp.add_argument("--steps", type=int, default=10000)
    sp.add_argument("--start", type=int, help="start state label")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("aggregate", help="jump-chain limit and exponents at a level")
    common(sp)
    sp.set_defaults(fn=cmd_aggregate)

    sp = sub.add_parser("mb", help="search for the metabasin level")
    common(sp)
    sp.set_defaults(fn=cmd_mb)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    common(sp)
    sp.add_argument("--only", help="comma separated criterion names")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("report", help="render verify curves as SVG plots")
    common(sp)
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (LandscapeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
