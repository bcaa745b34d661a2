"""Command-line entry point ``mu``.

Exit codes: 0 every check passed, 1 a check failed (reports are still
written), 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as muio
from .config import RunConfig, dumps, envelope
from .errors import PreconditionError, WorkbenchError
from .groups import (GroupTable, builtin_groups, cyclic, direct_product,
                     gen_group_kt, perturbed, symmetric, trivial)
from .munit import (MultUnitary, build_wtilde, check_manageable, check_modular,
                    dual, find_certificate, pentagon_residual,
                    pentagon_residual_probes, CheckReport)
from .tensor import DENSE_BUDGET, EXACT_TOL, Operator, PositiveOperator, Space

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad files, flags or configuration; maps to exit code 2."""


# -- helpers ---------------------------------------------------------------

def _load_op(path) -> Operator:
    try:
        return muio.load(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except WorkbenchError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_unitary(path) -> MultUnitary:
    op = _load_op(path)
    try:
        return MultUnitary(op)
    except (WorkbenchError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_positive(path, dim: int, name: str) -> PositiveOperator:
    op = _load_op(path)
    if op.mat.shape != (dim, dim):
        raise InputError(f"{name} in {path} has shape {op.mat.shape}, expected "
                         f"({dim}, {dim})")
    try:
        return PositiveOperator(Operator(op.mat, Space.of(dim)))
    except (WorkbenchError, ValueError) as exc:
        raise InputError(f"{name} in {path}: {exc}") from exc


def _config(args, **extra) -> RunConfig:
    try:
        return RunConfig(tolerances={"exact": getattr(args, "tol", EXACT_TOL)},
                         seed=getattr(args, "seed", 0),
                         probes=getattr(args, "probes", 64),
                         bulk_probes=getattr(args, "bulk_probes", 8),
                         k_dim=getattr(args, "k_dim", 8),
                         grid_n=getattr(args, "grid_n", 64),
                         grid_len=getattr(args, "grid_len", 16.0),
                         budget=getattr(args, "budget", DENSE_BUDGET), **extra)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plot_report(report: dict, path, title: str):
    from .plotting import plot_residuals
    from .reports import flatten_residuals
    res, tols = flatten_residuals(report)
    if res:
        plot_residuals(res, tols, path, title)


def _print_report(rep: dict):
    from .reports import flatten_residuals
    res, tols = flatten_residuals(rep)
    for k in sorted(res):
        flag = "ok" if res[k] < tols[k] else "FAIL"
        print(f"{k:<32} {res[k]:.3e}  (tol {tols[k]:.1e})  {flag}")
    print(f"verdict: {rep.get('verdict')}")


def _finish(report: dict, out: str | None) -> int:
    if out:
        _write(out, dumps(report))
    _print_report(report)
    return EXIT_OK if report.get("verdict") == "pass" else EXIT_FAIL


def _sections_verdict(sections: dict) -> str:
    return "pass" if all(s.get("verdict") == "pass" for s in sections.values()) else "fail"


# -- gen -------------------------------------------------------------------

def _parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def _group_from_args(args) -> GroupTable | None:
    try:
        if args.cyclic is not None:
            return cyclic(args.cyclic)
        if args.symmetric is not None:
            return symmetric(args.symmetric)
        if args.group is not None:
            groups = {**builtin_groups(), "trivial": trivial()}
            if args.group not in groups:
                raise InputError(f"unknown group {args.group!r}; choose from "
                                 f"{sorted(groups)}")
            return groups[args.group]
        if args.group_csv is not None:
            return GroupTable.load(args.group_csv)
        if args.product is not None:
            groups = builtin_groups()
            a, b = args.product
            if a not in groups or b not in groups:
                raise InputError(f"--product takes built-in names {sorted(groups)}")
            return direct_product(groups[a], groups[b])
    except OSError as exc:
        raise InputError(f"{args.group_csv}: {exc.strerror or exc}") from exc
    except WorkbenchError as exc:
        raise InputError(str(exc)) from exc
    return None


def cmd_gen(args) -> int:
    table = _group_from_args(args)
    if table is not None:
        mu = gen_group_kt(table)
        if args.perturb:
            mu = perturbed(mu, args.perturb, args.seed)
        if args.dual:
            mu = dual(mu)
        op = mu.w
    elif args.diag is not None:
        vals = _parse_floats(args.diag)
        if not vals or any(v <= 0 for v in vals):
            raise InputError("--diag needs strictly positive entries")
        op = PositiveOperator.from_diag(vals).op
    elif args.identity is not None:
        if args.identity < 1:
            raise InputError("--identity needs a positive dimension")
        op = Operator.on(np.eye(args.identity), args.identity)
    else:
        raise InputError("choose a source: --cyclic, --symmetric, --group, "
                         "--group-csv, --product, --diag or --identity")
    muio.save(op, args.out, args.format)
    print(f"wrote {args.out}")
    return EXIT_OK


# -- check -----------------------------------------------------------------

def cmd_check(args) -> int:
    config = _config(args)
    mu = _load_unitary(args.w)
    inputs = {"w": str(args.w)}
    if args.kind == "pentagon":
        if mu.h_dim ** 3 <= config.budget:
            res, mode = pentagon_residual(mu, budget=config.budget), "dense"
        else:
            res, mode = pentagon_residual_probes(mu, config.probes, config.seed), "probes"
        rep = CheckReport({"pentagon": res}, tolerance=config.tol)
        rep.info["mode"] = mode
    else:
        if args.q is None:
            raise InputError(f"check {args.kind} needs --q")
        q = _load_positive(args.q, mu.h_dim, "Q")
        inputs["q"] = str(args.q)
        if args.kind == "modular":
            if args.qhat is None:
                raise InputError("check modular needs --qhat")
            q_hat = _load_positive(args.qhat, mu.h_dim, "Qhat")
            inputs["qhat"] = str(args.qhat)
            rep = check_modular(mu, q, q_hat, tol=config.tol, seed=config.seed)
        else:
            rep = check_manageable(mu, q, tol=config.tol, seed=config.seed)
    report = envelope(f"check {args.kind}", config, rep.to_dict(), inputs)
    return _finish(report, args.out)


# -- extract ---------------------------------------------------------------

def cmd_extract(args) -> int:
    from . import qgroup
    from .reports import render_markdown
    config = _config(args)
    mu = _load_unitary(args.w)
    q = _load_positive(args.q, mu.h_dim, "Q")
    q_hat = _load_positive(args.qhat, mu.h_dim, "Qhat") if args.qhat else None
    inputs = {"w": str(args.w), "q": str(args.q)}
    if args.qhat:
        inputs["qhat"] = str(args.qhat)
    out = _outdir(args.out)
    try:
        qg = qgroup.extract(mu, q, q_hat, tol=config.tol)
    except PreconditionError as exc:
        report = envelope("extract", config, {"verdict": "fail", "error": str(exc)},
                          inputs)
        _write(out / "report.json", dumps(report))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = envelope("extract", config, qg.report.to_dict(), inputs)
    _write(out / "qgdata.json", dumps(qg.to_dict()))
    _write(out / "report.json", dumps(report))
    _write(out / "report.md", render_markdown(report))
    _plot_report(report, out / "residuals.png", "extraction residuals")
    return _finish(report, None)


# -- modify ------------------------------------------------------------------

def run_modify(mu: MultUnitary, q: PositiveOperator, q_hat: PositiveOperator,
               config: RunConfig, stencil=4):
    """The full lifted-unitary suite; returns ``(sections, rows)``."""
    from . import modifier as md
    from . import qgroup
    tol = config.tol
    seed = config.seed
    md.check_preconditions(mu, q, q_hat, tol)
    w_tilde = build_wtilde(mu, q)
    sections: dict = {}

    # exact family on a small grid
    wp = md.WeylPair(config.k_dim, config.grid_len, stencil)
    lifted = md.LiftedUnitary(mu, md.build_X(wp, q, q_hat), config.budget)
    exact = CheckReport({"trick": md.check_trick(mu, q, q_hat),
                         "pentagon_WM": md.pentagon_residual_WM(lifted, config.probes, seed),
                         "redu": md.check_redu(lifted, config.probes, seed),
                         "homomorphisms": md.check_homomorphisms(lifted, seed=seed)},
                        tolerance=tol)
    man = md.check_manageability_WM(lifted, wp, q, w_tilde, config.probes,
                                    config.bulk_probes, seed, tol)
    for k, v in man.residuals.items():
        if k != "commutator":
            exact.residuals[k] = v
    if lifted.hm_dim ** 2 <= config.budget:
        exact.residuals["pipeline_dense"] = md.check_pipeline_dense(lifted)
        exact.residuals["albeW"] = md.check_albeW(lifted)
    exact.info.update({"k_dim": config.k_dim, "probes": config.probes, "seed": seed})
    sections["exact"] = exact.to_dict()

    # approximate family on the requested grid and its refinement
    n1, n2 = config.grid_n, 2 * config.grid_n
    rows = md.convergence_study(mu, q, q_hat, (n1, n2), config.grid_len,
                                config.bulk_probes, seed, stencil)
    mx = md.max_by_check(rows)
    approx = CheckReport({}, tolerance=tol)
    for name in ("translation_error", "tozs", "commutator"):
        coarse, fine = mx[(name, n1)], mx[(name, n2)]
        approx.info[f"{name}@{n1}"] = coarse
        approx.info[f"{name}@{n2}"] = fine
        if coarse < tol:
            approx.notes.append(f"{name} vanishes up to roundoff at this data; "
                                "no convergence to measure")
            continue
        approx.residuals[f"{name}_ratio"] = fine / coarse
        approx.tolerances[f"{name}_ratio"] = 0.5 + 1e-12
        for n, val in ((n1, coarse), (n2, fine)):
            pinned = md.approx_tolerance(md.WeylPair(n, config.grid_len, stencil), name)
            if pinned is not None:
                approx.residuals[f"{name}@{n}"] = val
                approx.tolerances[f"{name}@{n}"] = pinned
    approx.info.update({"grid_len": config.grid_len, "stencil": str(stencil),
                        "bulk_probes": config.bulk_probes})
    sections["approximate"] = approx.to_dict()

    # transport of the quantum-group structure through dense W_M
    wp4 = md.WeylPair(4, config.grid_len, stencil)
    lifted4 = md.LiftedUnitary(mu, md.build_X(wp4, q, q_hat), config.budget)
    if lifted4.hm_dim ** 2 <= config.budget:
        try:
            qg = qgroup.extract(mu, q, q_hat, tol=tol)
            tr = md.span_transport(lifted4, qg.algebra, qg.algebra_hat, q, qg.r_map,
                                   w_tilde, wp4)
            sections["transport"] = tr.to_dict()
        except PreconditionError as exc:
            sections["transport"] = {"verdict": "fail", "residuals": {},
                                     "notes": [str(exc)]}
    return sections, rows


def cmd_modify(args) -> int:
    from .modifier import rows_to_csv
    from .plotting import plot_convergence
    from .reports import render_markdown
    config = _config(args)
    mu = _load_unitary(args.w)
    q = _load_positive(args.q, mu.h_dim, "Q")
    q_hat = _load_positive(args.qhat, mu.h_dim, "Qhat")
    stencil = "spectral" if args.stencil == "spectral" else int(args.stencil)
    for n in (config.k_dim, config.grid_n):
        if n < 1 or n & (n - 1):
            raise InputError(f"grid sizes must be powers of two, got {n}")
    inputs = {"w": str(args.w), "q": str(args.q), "qhat": str(args.qhat)}
    out = _outdir(args.out)
    try:
        sections, rows = run_modify(mu, q, q_hat, config, stencil)
    except PreconditionError as exc:
        report = envelope("modify", config, {"verdict": "fail", "error": str(exc)}, inputs)
        _write(out / "modify_report.json", dumps(report))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = envelope("modify", config, {"sections": sections,
                                         "verdict": _sections_verdict(sections)}, inputs)
    _write(out / "modify_report.json", dumps(report))
    _write(out / "modify_report.md", render_markdown(report))
    _write(out / "convergence.csv", rows_to_csv(rows))
    plot_convergence(rows, out / "convergence.png")
    _plot_report(report, out / "residuals.png", "lifted unitary residuals")
    return _finish(report, None)


# -- certificate -------------------------------------------------------------

def cmd_certificate(args) -> int:
    config = _config(args)
    mu = _load_unitary(args.w)
    out = _outdir(args.out)
    found = find_certificate(mu, tol=config.tol, restarts=args.restarts, seed=config.seed)
    body = {"message": found.message, "objective": found.objective,
            "restart_objectives": found.restarts}
    if found.report is not None:
        body.update(found.report.to_dict())
    else:
        body["verdict"] = "fail"
    if mu.h_dim ** 3 <= config.budget:
        body["pentagon_residual"] = pentagon_residual(mu, budget=config.budget)
    else:
        body["pentagon_residual"] = pentagon_residual_probes(mu, config.probes, config.seed)
    if found.structure is not None:
        s = found.structure
        muio.save(s.q.op, out / "q.json")
        muio.save(s.q_hat.op, out / "qhat.json")
        muio.save(s.w_tilde, out / "wtilde.json")
    report = envelope("certificate", config, body, {"w": str(args.w)})
    return _finish(report, out / "certificate_report.json")


# -- report ----------------------------------------------------------------

def cmd_report(args) -> int:
    from .reports import render_markdown
    parts = []
    verdicts = []
    for path in args.reports:
        try:
            rep = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: malformed report JSON: {exc}") from exc
        if not isinstance(rep, dict) or "verdict" not in rep:
            raise InputError(f"{path}: not a workbench report")
        verdicts.append(rep["verdict"])
        parts.append(render_markdown(rep))
        if args.out:
            png = Path(args.out).with_name(Path(path).stem + "_residuals.png")
            _plot_report(rep, png, Path(path).stem)
    text = "\n".join(parts)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(v == "pass" for v in verdicts) else EXIT_FAIL


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mu", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, probes=False):
        sp.add_argument("--tol", type=float, default=EXACT_TOL)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget", type=int, default=DENSE_BUDGET)
        if probes:
            sp.add_argument("--probes", type=int, default=64)

    g = sub.add_parser("gen", help="generate example operators")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--cyclic", type=int, metavar="N")
    src.add_argument("--symmetric", type=int, metavar="N")
    src.add_argument("--group", metavar="NAME")
    src.add_argument("--group-csv", metavar="PATH")
    src.add_argument("--product", nargs=2, metavar=("A", "B"))
    src.add_argument("--diag", metavar="V1,V2,...")
    src.add_argument("--identity", type=int, metavar="N")
    g.add_argument("--perturb", type=float, default=0.0, metavar="EPS")
    g.add_argument("--dual", action="store_true")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=("json", "bin"), default=None)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="pentagon and certificate checks")
    c.add_argument("kind", choices=("pentagon", "modular", "manageable"))
    c.add_argument("w")
    c.add_argument("--q")
    c.add_argument("--qhat")
    c.add_argument("--out")
    common(c, probes=True)
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("extract", help="quantum-group data and identities")
    e.add_argument("w")
    e.add_argument("--q", required=True)
    e.add_argument("--qhat")
    e.add_argument("--out", required=True, metavar="DIR")
    common(e)
    e.set_defaults(func=cmd_extract)

    m = sub.add_parser("modify", help="lifted unitary suite and convergence study")
    m.add_argument("w")
    m.add_argument("--q", required=True)
    m.add_argument("--qhat", required=True)
    m.add_argument("--k-dim", type=int, default=8)
    m.add_argument("--grid-n", type=int, default=64)
    m.add_argument("--grid-len", type=float, default=16.0)
    m.add_argument("--bulk-probes", type=int, default=8)
    m.add_argument("--stencil", choices=("2", "4", "spectral"), default="4")
    m.add_argument("--out", required=True, metavar="DIR")
    common(m, probes=True)
    m.set_defaults(func=cmd_modify)

    f = sub.add_parser("certificate", help="search for (Q, Qhat)")
    f.add_argument("w")
    f.add_argument("--restarts", type=int, default=4)
    f.add_argument("--out", required=True, metavar="DIR")
    common(f, probes=True)
    f.set_defaults(func=cmd_certificate)

    r = sub.add_parser("report", help="render report JSON as markdown")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out", metavar="PATH.md")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
