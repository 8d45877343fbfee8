"""Command line entry point.

Exit status: 0 when every ceiling holds, 2 when a ceiling check fails,
1 on configuration, I/O or stage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .config import ConfigError, PipelineConfig, parse_config
from .design import DesignMeasure, caratheodory_reduce, kw_certificate, optimize_design
from .metrics import StageError, build_pipeline_inputs, verify_space, _jsonable
from .project import build_least_squares, lebesgue_function, operator_norm
from .space import point_label
from .subsample import SampleMultiset, SubsampleError, subsample_to

log = logging.getLogger("samproj")

EXIT_OK, EXIT_ERROR, EXIT_CEILING = 0, 1, 2


def dump_json(obj, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(_jsonable(obj), sort_keys=True, indent=2))
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def load_config(args) -> PipelineConfig:
    try:
        raw = load_json(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    cfg = parse_config(raw, base_dir=os.path.dirname(os.path.abspath(args.config)))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "output", None):
        cfg.output = args.output
    if getattr(args, "oracle_check", False):
        cfg.oracle_check = True
    return cfg


def _outdir(cfg):
    os.makedirs(cfg.output, exist_ok=True)
    return cfg.output


def write_tables(path, eval, design, op_x, op_w):
    from .design import christoffel_values
    from .space import gram
    chris = christoffel_values(eval.values, gram(eval, design))
    leb_x = lebesgue_function(op_x)
    leb_w = lebesgue_function(op_w)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "point", "ground_weight", "christoffel", "lebesgue_ls", "lebesgue_weighted"])
        for k in range(eval.size):
            w.writerow([k, point_label(eval.candidates, k), repr(float(eval.candidates.ground_weights[k])),
                        repr(float(chris[k])), repr(float(leb_x[k])), repr(float(leb_w[k]))])


def write_phi(path, op):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "point"] + [f"phi_{j}" for j in range(op.n_samples)])
        for k in range(op.eval.size):
            vals = op.phi_table[:, k]
            cells = [repr(complex(v)) if np.iscomplexobj(vals) else repr(float(v)) for v in vals]
            w.writerow([k, point_label(op.eval.candidates, k)] + cells)


def cmd_verify(args) -> int:
    cfg = load_config(args)
    report = verify_space(cfg)
    out = _outdir(cfg)
    a = report.artifacts
    eval = a["eval"]
    design_json = a["design"].to_json(eval.candidates)
    design_json["certificate"] = report.design["certificate"]
    design_json["full_design"] = a["full_design"].to_json(eval.candidates)
    dump_json(design_json, os.path.join(out, "design.json"))
    samples = a["x_set"].to_json()
    samples["report"] = report.subsample
    samples["union"] = a["z_set"].to_json()
    dump_json(samples, os.path.join(out, "samples.json"))
    proj = a["op_x"].to_json()
    proj["weighted"] = a["op_w"].to_json()
    dump_json(proj, os.path.join(out, "projection.json"))
    dump_json(report.to_json(), os.path.join(out, "report.json"))
    text = report.to_text()
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(text)
    write_tables(os.path.join(out, "tables.csv"), eval, a["design"], a["op_x"], a["op_w"])
    write_phi(os.path.join(out, "phi.csv"), a["op_x"])
    sys.stdout.write(text)
    return EXIT_OK if report.all_pass else EXIT_CEILING


def cmd_design(args) -> int:
    cfg = load_config(args)
    eval = build_pipeline_inputs(cfg)
    result = optimize_design(eval, cfg.eps, cfg.max_iters)
    reduced = caratheodory_reduce(eval, result.design)
    cert = kw_certificate(eval, reduced, cfg.eps)
    out = reduced.to_json(eval.candidates)
    out["certificate"] = cert.to_json()
    out["full_design"] = result.design.to_json(eval.candidates)
    out["certified"] = result.certified
    dump_json(out, os.path.join(_outdir(cfg), "design.json"))
    print(f"design: support {len(reduced)} (from {len(result.design)}), "
          f"sup {cert.sup_value:.6g} <= {eval.n + cfg.eps:.6g}: {cert.satisfied}")
    return EXIT_OK if result.certified else EXIT_CEILING


def cmd_subsample(args) -> int:
    cfg = load_config(args)
    eval = build_pipeline_inputs(cfg)
    design = DesignMeasure.from_json(load_json(args.design))
    x_set, rep = subsample_to(eval, design, cfg.target, cfg.seed, cfg.max_retries)
    out = x_set.to_json()
    out["report"] = rep.to_json()
    dump_json(out, os.path.join(_outdir(cfg), "samples.json"))
    print(f"subsample: {len(x_set)} points, constant {rep.discretization_constant:.6g} "
          f"<= {rep.ceiling:.6g}")
    return EXIT_OK


def cmd_project(args) -> int:
    cfg = load_config(args)
    eval = build_pipeline_inputs(cfg)
    x_set = SampleMultiset.from_json(load_json(args.samples), eval.candidates)
    op = build_least_squares(eval, x_set)
    out = op.to_json()
    out["operator_norm"] = operator_norm(op)
    outdir = _outdir(cfg)
    dump_json(out, os.path.join(outdir, "projection.json"))
    write_phi(os.path.join(outdir, "phi.csv"), op)
    print(f"projection: {op.n_samples} samples, operator norm {out['operator_norm']:.6g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracle import oracle_check
    cfg = load_config(args)
    eval = build_pipeline_inputs(cfg)
    result = optimize_design(eval, cfg.eps, cfg.max_iters)
    _, rep = subsample_to(eval, result.design, cfg.target, cfg.seed, cfg.max_retries)
    res = oracle_check(eval, result.design, rep, cfg.target, cfg.eps)
    dump_json(res, os.path.join(_outdir(cfg), "oracle.json"))
    print(json.dumps(_jsonable(res), sort_keys=True, indent=2))
    if not res.get("feasible"):
        return EXIT_ERROR
    ok = res["design_match"] and res.get("chebyshev_match", True) and res["subsample_ratio"] <= 2.0
    return EXIT_OK if ok else EXIT_CEILING


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samproj", description="Near-optimal sampling points and sampling projections.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON pipeline configuration")
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="subsampling seed (overrides config)")

    p = sub.add_parser("verify", help="run the full pipeline and check all ceilings")
    common(p)
    p.add_argument("--oracle-check", action="store_true", help="cross-check against brute force")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("design", help="compute and reduce the D-optimal design")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("subsample", help="select the sampling multiset from a design")
    common(p)
    p.add_argument("--design", required=True, help="design.json from the design stage")
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("project", help="build the least-squares projection on a multiset")
    common(p)
    p.add_argument("--samples", required=True, help="samples.json from the subsample stage")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("oracle-check", help="compare with exhaustive search on tiny instances")
    common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except SubsampleError as exc:
        print(f"error: stage 'subsample' failed: {exc}", file=sys.stderr)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: stage '{args.command}' failed: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
