"""Command-line entry point: ``ddcm {mms, inclusion, mesh-gen}``.

Exit codes: 0 success, 1 numerical failure, 2 assertion failure,
64 usage error.
"""
from __future__ import annotations

import argparse
import operator
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from .analysis import ERROR_COLUMNS, convergence_rates, error_norms, export_csv, export_vtk
from .config import RunSpec, parse_config_values, to_config_text
from .errors import DDCMError, InvalidConfig, ParseError
from .formulation import BoundaryData, DataFields, solve_ddcm
from .mesh import generate_inclusion_mesh, generate_unit_square_mesh, save_mesh
from .mms import MmsFields

EXIT_OK, EXIT_NUMERIC, EXIT_ASSERT, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _csv_ints(v):
    try:
        out = tuple(int(t) for t in v.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {v!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _csv_floats(v):
    try:
        out = tuple(float(t) for t in v.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {v!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


FLAG_KEYS = {"ku": "k_u", "ke": "k_e", "ks": "k_s", "kl": "k_lam", "km": "k_mu", "bc": "bc_mode"}


def build_parser():
    p = _Parser(prog="ddcm", description="Stabilized DDCM diffusion-reaction solver")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--formulation", choices=("primal", "dual"), default=S)
        sp.add_argument("--method", choices=("asgs", "osgs", "none"), default=S)
        sp.add_argument("--degree", type=int, choices=(1, 2), default=S)
        sp.add_argument("--bc", choices=("dirichlet", "neumann"), default=S)
        sp.add_argument("--kappa", type=float, default=S)
        sp.add_argument("--zeta", type=float, default=S)
        sp.add_argument("--ell", type=float, default=S)
        for k in ("ku", "ke", "ks", "kl", "km"):
            sp.add_argument(f"--{k}", type=float, default=S)
        sp.add_argument("--out", default=S, help="output directory")
        sp.add_argument("--config", default=None, help="key = value run file")
        sp.add_argument("--assert", dest="assert_file", default=None,
                        help="file of 'column op value' checks on the last table row")

    m = sub.add_parser("mms", help="manufactured-solution convergence study")
    common(m)
    m.add_argument("--meshes", type=_csv_ints, default=S)

    inc = sub.add_parser("inclusion", help="circular inclusion benchmark with noisy data")
    common(inc)
    inc.add_argument("--n", type=int, default=S, help="mesh subdivisions (default 40)")
    inc.add_argument("--noise", type=_csv_floats, default=S)
    inc.add_argument("--seed", type=lambda v: int(v, 0), default=S)

    g = sub.add_parser("mesh-gen", help="write a structured mesh file")
    g.add_argument("--n", type=int, default=S)
    g.add_argument("--inclusion", action="store_true", default=S)
    g.add_argument("--out", default=S, help="output file or directory")
    g.add_argument("--config", default=None)
    g.add_argument("--assert", dest="assert_file", default=None)
    return p


def resolve_spec(args):
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = parse_config_values(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        values.pop("command", None)
    for k, v in vars(args).items():
        if k in ("command", "config", "assert_file"):
            continue
        values[FLAG_KEYS.get(k, k)] = v
    spec = replace(RunSpec(command=args.command), **values)
    return spec.validate()


OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
       "==": operator.eq, "!=": operator.ne}


def parse_assertions(text):
    checks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 3 or tok[1] not in OPS:
            raise ParseError("expected '<column> <op> <value>'", lineno)
        try:
            checks.append((tok[0], tok[1], float(tok[2]), lineno))
        except ValueError:
            raise ParseError(f"bad number {tok[2]!r}", lineno) from None
    return checks


def check_assertions(checks, row):
    """List of failure messages for ``checks`` evaluated on ``row``."""
    failed = []
    for col, op, value, lineno in checks:
        if col not in row:
            raise ParseError(f"unknown column {col!r}", lineno)
        v = row[col]
        if not OPS[op](v, value):
            failed.append(f"{col} = {v:.6g} violates '{op} {value:g}'")
    return failed


def _vtk_fields(sol):
    nn = sol.mesh.n_nodes
    pd = {"u": sol.u[:nn], "lam": sol.lam[:nn]}
    for name in ("e", "s", "mu"):
        pd[name] = sol.field(name)[:, :nn].T
    return pd


def run_mms(spec, stdout=sys.stdout):
    form = spec.formulation or "primal"
    config = spec.problem_config(form)
    m = MmsFields(config.kappa, config.zeta)
    data = DataFields(e_tilde=m.e_tilde, s_tilde=m.s_tilde, q=m.q, f=m.f)
    bc = BoundaryData(u=m.u, lam=m.lam, s=m.s, mu=m.mu)
    reports, last = [], None
    for n in sorted(spec.meshes):
        last = solve_ddcm(config, generate_unit_square_mesh(n), data, bc)
        rep = error_norms(last, m)
        reports.append(rep)
        print(f"n={n:4d} ndof={rep.ndof:8d} " + " ".join(
            f"{c[4:]}={rep[c]:.3e}" for c in ERROR_COLUMNS), file=stdout)
    tag = f"mms_{form}_{config.method}_k{config.degree}_{config.bc_mode}"
    os.makedirs(spec.out, exist_ok=True)
    if len(reports) >= 2:
        table = convergence_rates(reports)
        rows = table.rows()
        export_csv(table, os.path.join(spec.out, tag + ".csv"))
    else:
        rows = [r.row() for r in reports]
        export_csv(rows, os.path.join(spec.out, tag + ".csv"))
    from .inclusion import thermo_field
    export_vtk(last.mesh, os.path.join(spec.out, f"{tag}_n{max(spec.meshes)}.vtk"),
               _vtk_fields(last), {"s_dot_e": thermo_field(last)[0]})
    return rows[-1]


def run_inclusion_cmd(spec, stdout=sys.stdout):
    from .analysis import export_csv as write
    from .inclusion import InclusionConfig

    if spec.seed is None:
        raise UsageError("inclusion requires --seed")
    forms = (spec.formulation,) if spec.formulation else ("primal", "dual")
    os.makedirs(spec.out, exist_ok=True)
    summary = []
    for delta in spec.noise:
        base = spec.problem_config(forms[0])
        cfg = InclusionConfig(zeta=base.zeta, noise=delta, seed=spec.seed)
        overrides = {}
        for f in forms:
            c = spec.problem_config(f)
            overrides[f] = dict(k_u=c.k_u, k_e=c.k_e, k_s=c.k_s, k_lam=c.k_lam, k_mu=c.k_mu,
                                degree=c.degree, bc_mode=c.bc_mode, method=c.method)
        run = _run_inclusion(spec, cfg, forms, overrides)
        tag = f"inclusion_d{delta:g}"
        rows = []
        for (form, path, qty), p in run.profiles.items():
            rows.append({"formulation": form, "path": path, "quantity": qty, "rmse": p.rmse})
        write(rows, os.path.join(spec.out, tag + "_rmse.csv"),
              ("formulation", "path", "quantity", "rmse"))
        for form, sol in run.solutions.items():
            vals, frac = run.thermo[form]
            summary.append({"noise": delta, "formulation": form, "violating_fraction": frac,
                            "ndof": sol.layout.dimension})
            print(f"noise={delta:g} {form:6s} violating fraction={frac:.4f}", file=stdout)
            export_vtk(run.mesh, os.path.join(spec.out, f"{tag}_{form}.vtk"),
                       _vtk_fields(sol), {"s_dot_e": vals,
                                          "region": run.mesh.element_region.astype(float)})
    write(summary, os.path.join(spec.out, "inclusion_thermo.csv"),
          ("noise", "formulation", "violating_fraction", "ndof"))
    return summary[-1]


def _run_inclusion(spec, cfg, forms, overrides):
    from .inclusion import run_inclusion

    return run_inclusion(spec.n, cfg, forms, kappa=spec.kappa, ell=spec.ell, overrides=overrides)


def run_mesh_gen(spec, stdout=sys.stdout):
    mesh = generate_inclusion_mesh(spec.n) if spec.inclusion else generate_unit_square_mesh(spec.n)
    path = spec.out
    if os.path.isdir(path) or path.endswith(os.sep) or path == ".":
        os.makedirs(path, exist_ok=True)
        path = os.path.join(path, f"{'inclusion' if spec.inclusion else 'square'}_n{spec.n}.mesh")
    with open(path, "w", newline="\n") as fh:
        fh.write(save_mesh(mesh))
    print(f"wrote {path}: {mesh.n_nodes} nodes, {mesh.n_elements} triangles", file=stdout)
    return {"n_nodes": mesh.n_nodes, "n_elements": mesh.n_elements, "h": mesh.h}


RUNNERS = {"mms": run_mms, "inclusion": run_inclusion_cmd, "mesh-gen": run_mesh_gen}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        spec = resolve_spec(args)
        checks = []
        if args.assert_file:
            with open(args.assert_file) as fh:
                checks = parse_assertions(fh.read())
    except (UsageError, InvalidConfig, ParseError, OSError) as exc:
        if not isinstance(exc, UsageError):
            sys.stderr.write(f"ddcm: error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("once")
            os.makedirs(spec.out if spec.command != "mesh-gen" else ".", exist_ok=True)
            if spec.command != "mesh-gen":
                with open(os.path.join(spec.out, f"{spec.command}_run.cfg"), "w") as fh:
                    fh.write(to_config_text(spec))
            row = RUNNERS[spec.command](spec)
    except UsageError as exc:
        sys.stderr.write(f"ddcm: error: {exc}\n")
        return EXIT_USAGE
    except (DDCMError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"ddcm: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    if checks:
        try:
            failed = check_assertions(checks, row)
        except ParseError as exc:
            sys.stderr.write(f"ddcm: error: {exc}\n")
            return EXIT_USAGE
        for msg in failed:
            sys.stderr.write(f"assertion failed: {msg}\n")
        if failed:
            return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
