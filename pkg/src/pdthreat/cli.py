"""Command-line front end.

    pd index build    --train F --k N --beta B --seed S --out F
    pd calibrate-k    --train F --beta B --k-max N --seed S --out F
    pd threat eval    --index F --inputs F --perturbed F [--masks F]
                      [--weights F] --metric pd|pds|pdw|linf|l2 --out F
    pd project        --index F --inputs F --deltas F --eps E [--linf R]
                      --mode lazy|exact --out F
    pd oracle2d       --task F --grid N --angles N --pairs N --seed S --out F
    pd corrupt        --inputs F --style S --severity 1..5 --seed S --out F
    pd report         --in F [F ...] --thresholds pd=1.0,linf=0.5,ext=0.25
                      --format csv|json --out F

Exit codes: 0 ok, 1 usage error, 2 data error, 3 completed with a
non-convergence warning. Every output file gets a <out>.manifest.json
sidecar recording flags, seeds, input hashes, and wall clock. `--threads`
(or the PD_THREADS environment variable) caps worker threads in batch
evaluation; identical inputs and seeds give byte-identical data outputs
regardless of thread count.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import corruptions, geometry, oracle2d, reports
from .errors import PDError
from .formats import (
    load_dataset,
    load_index,
    load_masks,
    load_weight_matrix,
    LabeledDataset,
    save_dataset,
    save_index,
)
from .index import build_index, calibrate_k, unsafe_directions
from .manifest import RunManifest, Stopwatch
from .threat import evaluate_batch

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _threads(args):
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("PD_THREADS", "")
    return max(1, int(env)) if env.isdigit() else 1


def _manifest(command, args, *input_paths):
    flags = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    m = RunManifest(command=command, flags=flags,
                    seeds={k: v for k, v in flags.items() if "seed" in k})
    for p in input_paths:
        if isinstance(p, (list, tuple)):
            for q in p:
                m.add_input(q)
        else:
            m.add_input(p)
    return m


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_index_build(args):
    man = _manifest("index build", args, args.train)
    with Stopwatch() as sw:
        train = load_dataset(args.train)
        index = build_index(train, args.k, args.beta, args.seed)
        save_index(index, args.out)
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.write(args.out)
    print(f"index: {index.num_classes} classes, counts {index.class_counts} -> {args.out}")
    return EXIT_OK


def cmd_calibrate_k(args):
    man = _manifest("calibrate-k", args, args.train)
    with Stopwatch() as sw:
        train = load_dataset(args.train)
        result = calibrate_k(train, args.beta, args.seed, args.k_max)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "min_cross_pair_threat", "pairs_sampled"])
            for k, v, p in result.rows():
                w.writerow([k, repr(float(v)), p])
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.extra = {
        "k_min": result.k_min,
        "pairs_sampled": result.pairs_sampled,
        "subsampled": result.sampled,
    }
    man.write(args.out)
    if result.k_min is None:
        print(f"k_min: not found up to k_max={args.k_max} (curve in {args.out})")
    else:
        print(f"k_min = {result.k_min} (curve in {args.out})")
    return EXIT_OK


def cmd_threat_eval(args):
    needs = {"pd": "index", "pds": "masks", "pdw": "weights"}
    if args.metric in ("pd", "pds", "pdw") and not args.index:
        print(f"pd threat eval: error: --metric {args.metric} requires --index",
              file=sys.stderr)
        return EXIT_USAGE
    missing = needs.get(args.metric)
    if missing and not getattr(args, missing):
        print(f"pd threat eval: error: --metric {args.metric} requires --{missing}",
              file=sys.stderr)
        return EXIT_USAGE
    man = _manifest("threat eval", args, args.index, args.inputs, args.perturbed,
                    args.masks, args.weights)
    with Stopwatch() as sw:
        inputs = load_dataset(args.inputs)
        perturbed = load_dataset(args.perturbed)
        index = load_index(args.index) if args.index else None
        masks = load_masks(args.masks) if args.masks else None
        weights = load_weight_matrix(args.weights) if args.weights else None
        records = evaluate_batch(args.metric, inputs, perturbed, index=index,
                                 masks=masks, weights=weights, threads=_threads(args))
        style = perturbed.meta.get("corruption_style", "")
        severity = perturbed.meta.get("corruption_severity", "")
        if args.format == "json":
            reports.write_threat_json(args.out, records, style, severity)
        else:
            reports.write_threat_csv(args.out, records, style, severity)
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.write(args.out)
    mean = float(np.mean([r.threat for r in records])) if records else 0.0
    print(f"{args.metric}: {len(records)} rows, mean threat {mean:.6g} -> {args.out}")
    return EXIT_OK


def cmd_project(args):
    man = _manifest("project", args, args.index, args.inputs, args.deltas)
    nonconverged = 0
    with Stopwatch() as sw:
        index = load_index(args.index)
        inputs = load_dataset(args.inputs)
        deltas = load_dataset(args.deltas)
        if inputs.n != deltas.n or inputs.d != deltas.d:
            raise PDError(
                f"inputs are {inputs.n}x{inputs.d}, deltas are {deltas.n}x{deltas.d}"
            )
        out_rows = np.empty((inputs.n, inputs.d), dtype=np.float64)
        for i in range(inputs.n):
            dirs = unsafe_directions(index, inputs.data[i].astype(np.float64),
                                     int(inputs.labels[i]))
            delta = deltas.data[i].astype(np.float64)
            if args.mode == "lazy":
                if args.linf is not None:
                    # clamp first, then rescale: scaling keeps the box bound
                    delta = np.clip(delta, -args.linf, args.linf)
                z = geometry.lazy_project(dirs, delta, args.eps)
            else:
                sset = geometry.build_sublevel(dirs, args.eps)
                if args.linf is not None:
                    res = geometry.project_intersection_linf(
                        sset, delta, args.linf, max_iters=args.max_iters)
                else:
                    res = geometry.greedy_project(sset, delta, max_iters=args.max_iters)
                z = res.point
                nonconverged += 0 if res.converged else 1
            out_rows[i] = z
        projected = LabeledDataset(
            data=out_rows.astype(np.float32),
            labels=inputs.labels,
            num_classes=inputs.num_classes,
            image_domain=False,
            meta={"projection_mode": args.mode, "projection_eps": args.eps},
        )
        save_dataset(projected, args.out)
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.extra = {"nonconverged": nonconverged}
    man.write(args.out)
    print(f"projected {inputs.n} perturbations ({args.mode}) -> {args.out}")
    if nonconverged:
        print(f"warning: {nonconverged} projections did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_oracle2d(args):
    man = _manifest("oracle2d", args, args.task)
    with Stopwatch() as sw:
        task = oracle2d.load_task(args.task)
        oracle = oracle2d.GridOracle(task, args.grid, args.angles)
        report = oracle2d.one_robustness_check(task, oracle, args.pairs, args.seed)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pair_id", "x0", "x1", "xt0", "xt1", "threat", "violation"])
            for i, (a, b, t) in enumerate(report.pairs):
                w.writerow([i, repr(float(a[0])), repr(float(a[1])),
                            repr(float(b[0])), repr(float(b[1])),
                            repr(float(t)), int(t <= 1.0 - report.tau_grid)])
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.extra = {
        "min_threat": report.min_threat,
        "violations": report.violations,
        "tau_grid": report.tau_grid,
        "skipped_degenerate": report.skipped_degenerate,
    }
    man.write(args.out)
    print(
        f"checked {len(report.pairs)} cross-label pairs: min threat "
        f"{report.min_threat:.4f}, {report.violations} violations "
        f"(tau_grid {report.tau_grid:.4f}) -> {args.out}"
    )
    return EXIT_OK


def _parse_geometry(text):
    parts = text.lower().split("x")
    if len(parts) not in (2, 3):
        raise PDError(f"geometry must look like HxW or HxWxC, got {text!r}")
    dims = [int(p) for p in parts]
    if len(dims) == 2:
        dims.append(1)
    return dims


def cmd_corrupt(args):
    man = _manifest("corrupt", args, args.inputs)
    with Stopwatch() as sw:
        ds = load_dataset(args.inputs)
        if args.geometry:
            h, w, c = _parse_geometry(args.geometry)
        elif "geometry" in ds.meta:
            h, w, c = (int(v) for v in ds.meta["geometry"])
        else:
            raise PDError("dataset header lacks geometry; pass --geometry HxWxC")
        spec = corruptions.CorruptionSpec(
            style=args.style, severity=args.severity, seed=args.seed,
            height=h, width=w, channels=c,
        )
        out = corruptions.apply_dataset(spec, ds)
        save_dataset(out, args.out)
    man.wall_clock_s = sw.elapsed
    man.outputs = [args.out]
    man.write(args.out)
    print(f"{args.style} severity {args.severity}: {ds.n} rows -> {args.out}")
    return EXIT_OK


def _parse_thresholds(text):
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise PDError(f"threshold must look like name=value, got {part!r}")
        name, value = part.split("=", 1)
        if name not in ("pd", "linf", "ext"):
            raise PDError(f"unknown threshold {name!r}; expected pd, linf, or ext")
        out[name] = float(value)
    return out


def cmd_report(args):
    man = _manifest("report", args, args.inputs_csv)
    with Stopwatch() as sw:
        rows = []
        for path in args.inputs_csv:
            rows.extend(reports.read_threat_csv(path))
        thresholds = _parse_thresholds(args.thresholds) if args.thresholds else None
        paths = reports.write_report(args.out, rows, thresholds, args.format)
    man.wall_clock_s = sw.elapsed
    man.outputs = paths
    man.write(args.out)
    print(f"report over {len(rows)} rows -> {', '.join(paths)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="pd", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--threads", type=int, help="cap worker threads (or PD_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="representative index commands")
    index_sub = p_index.add_subparsers(dest="subcommand", required=True)
    p_build = index_sub.add_parser("build", help="select per-class k-center subsets")
    p_build.add_argument("--train", required=True)
    p_build.add_argument("--k", type=int, default=50)
    p_build.add_argument("--beta", type=float, default=0.5)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=cmd_index_build)

    p_cal = sub.add_parser("calibrate-k", help="find the smallest adequate k")
    p_cal.add_argument("--train", required=True)
    p_cal.add_argument("--beta", type=float, default=0.5)
    p_cal.add_argument("--k-max", dest="k_max", type=int, required=True)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--out", required=True)
    p_cal.set_defaults(func=cmd_calibrate_k)

    p_threat = sub.add_parser("threat", help="threat evaluation commands")
    threat_sub = p_threat.add_subparsers(dest="subcommand", required=True)
    p_eval = threat_sub.add_parser("eval", help="evaluate one metric on paired datasets")
    p_eval.add_argument("--index")
    p_eval.add_argument("--inputs", required=True)
    p_eval.add_argument("--perturbed", required=True)
    p_eval.add_argument("--masks")
    p_eval.add_argument("--weights")
    p_eval.add_argument("--metric", required=True, choices=["pd", "pds", "pdw", "linf", "l2"])
    p_eval.add_argument("--format", choices=["csv", "json"], default="csv")
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_threat_eval)

    p_proj = sub.add_parser("project", help="project perturbations onto sublevel sets")
    p_proj.add_argument("--index", required=True)
    p_proj.add_argument("--inputs", required=True)
    p_proj.add_argument("--deltas", required=True)
    p_proj.add_argument("--eps", type=float, required=True)
    p_proj.add_argument("--linf", type=float)
    p_proj.add_argument("--mode", choices=["lazy", "exact"], default="lazy")
    p_proj.add_argument("--max-iters", dest="max_iters", type=int, default=1000)
    p_proj.add_argument("--out", required=True)
    p_proj.set_defaults(func=cmd_project)

    p_oracle = sub.add_parser("oracle2d", help="run the exact 2D 1-robustness check")
    p_oracle.add_argument("--task", required=True)
    p_oracle.add_argument("--grid", type=int, default=512)
    p_oracle.add_argument("--angles", type=int, default=720)
    p_oracle.add_argument("--pairs", type=int, default=200)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--out", required=True)
    p_oracle.set_defaults(func=cmd_oracle2d)

    p_corrupt = sub.add_parser("corrupt", help="apply a built-in corruption style")
    p_corrupt.add_argument("--inputs", required=True)
    p_corrupt.add_argument("--style", required=True, choices=list(corruptions.STYLES))
    p_corrupt.add_argument("--severity", type=int, required=True, choices=list(corruptions.SEVERITIES))
    p_corrupt.add_argument("--seed", type=int, default=0)
    p_corrupt.add_argument("--geometry", help="HxW or HxWxC when absent from the header")
    p_corrupt.add_argument("--out", required=True)
    p_corrupt.set_defaults(func=cmd_corrupt)

    p_report = sub.add_parser("report", help="aggregate threat CSVs")
    p_report.add_argument("--in", dest="inputs_csv", nargs="+", required=True)
    p_report.add_argument("--thresholds", default="pd=1.0,linf=0.5,ext=0.25")
    p_report.add_argument("--format", choices=["csv", "json"], default="csv")
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PDError as exc:
        print(f"pd: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
