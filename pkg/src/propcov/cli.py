"""Command line interface: ``propcov {estimate,test,simulate,validate}``.

Input is a JSON document ``{"groups": [{"n": 99, "S": [[...], ...]}, ...]}``
(``"label"`` optional per group) or, for a single matrix, a CSV file of ``p``
rows with the degrees of freedom given by ``--n``.  Several input files are
concatenated in order; the first group is the reference group.

Exit codes
----------
0 success, 1 failed validation check, 2 unreadable or malformed input,
3 covariance matrix not positive definite, 4 fit did not converge (the
report is still written), 5 too few groups for the requested test.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import assemble_v, standard_errors, v11
from .errors import InvalidArgument, KTooSmall, NotConverged, NotPositiveDefinite
from .inference import homogeneity_statistic
from .mle import FitOptions, fit
from .model import GroupSample, SampleSet
from .montecarlo import SimConfig, run_covariance_study, run_level_study
from .oracle import run_validation

log = logging.getLogger("propcov")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_NOT_PD = 3
EXIT_NOT_CONVERGED = 4
EXIT_K_TOO_SMALL = 5

MACHINE_DIGITS = 12
HUMAN_DIGITS = 6


class InputError(Exception):
    pass


# -- input --------------------------------------------------------------------

def _read_json(path: Path):
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _group(entry, where: str) -> GroupSample:
    if not isinstance(entry, dict) or "S" not in entry or "n" not in entry:
        raise InputError(f"{where}: each group needs keys 'n' and 'S'")
    n = entry["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputError(f"{where}: 'n' must be a positive integer")
    try:
        S = np.array(entry["S"], dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{where}: 'S' must be a square numeric matrix") from None
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InputError(f"{where}: 'S' must be a square numeric matrix")
    try:
        return GroupSample(S, n, entry.get("label"))
    except NotPositiveDefinite:
        raise
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def _read_csv(path: Path, n: int | None) -> GroupSample:
    if n is None:
        raise InputError(f"{path}: CSV input needs the degrees of freedom via --n")
    try:
        with path.open(newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return _group({"n": n, "S": rows, "label": path.stem}, str(path))


def load_samples(paths, n_values=()) -> SampleSet:
    """Read groups from JSON and CSV files; CSV files consume ``--n`` values in order."""
    n_values = list(n_values or [])
    groups = []
    for path in map(Path, paths):
        if not path.exists():
            raise InputError(f"{path}: no such file")
        if path.suffix.lower() == ".csv":
            groups.append(_read_csv(path, n_values.pop(0) if n_values else None))
            continue
        doc = _read_json(path)
        if not isinstance(doc, dict) or not isinstance(doc.get("groups"), list) or not doc["groups"]:
            raise InputError(f"{path}: expected an object with a non-empty 'groups' list")
        groups.extend(_group(g, f"{path}: group {k + 1}") for k, g in enumerate(doc["groups"]))
    try:
        return SampleSet(tuple(groups))
    except ValueError as exc:
        raise InputError(str(exc)) from None


# -- output -------------------------------------------------------------------

def _round(obj, digits: int):
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.{digits}g}")
    return obj


def emit_json(report: dict) -> str:
    return json.dumps(_round(report, MACHINE_DIGITS), indent=2)


def _fmt(x) -> str:
    return f"{x:.{HUMAN_DIGITS}g}"


def _fmt_matrix(M, indent="  ") -> str:
    M = np.atleast_2d(M)
    cells = [[_fmt(v) for v in row] for row in M]
    width = max(len(c) for row in cells for c in row)
    return "\n".join(indent + "  ".join(c.rjust(width) for c in row) for row in cells)


def _label(lab) -> str:
    if lab[0] == "c":
        return f"c{lab[1]}"
    return f"{lab[0]}{lab[1]}{lab[2]}" if max(lab[1:]) < 10 else f"{lab[0]}[{lab[1]},{lab[2]}]"


# -- commands -----------------------------------------------------------------

def estimate_report(data: SampleSet, opts: FitOptions, cov: str | None = None) -> tuple[dict, bool]:
    res = fit(data, opts)
    r, p = data.weights, data.p
    c_se = (np.sqrt(np.diag(v11(res.c, r, p)) / data.n_plus) if data.K > 1 else np.zeros(0))
    report = {
        "K": data.K,
        "p": p,
        "n": [g.n for g in data.groups],
        "n_plus": data.n_plus,
        "labels": [g.label for g in data.groups],
        "c": res.c,
        "c_se": np.concatenate([[0.0], c_se]),
        "Sigma1": res.params.Sigma1,
        "A": res.root.A,
        "B": res.inv.B,
        "loglik": res.loglik,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    if cov:
        V = assemble_v(res.params, r, cov)
        report["cov"] = {
            "parametrization": cov,
            "labels": [_label(l) for l in V.index_map.labels],
            "matrix": V.matrix,
            "se": standard_errors(V, data.n_plus),
        }
    return report, res.converged


def _estimate_text(rep: dict) -> str:
    lines = [f"groups K={rep['K']}  dimension p={rep['p']}  n_+={rep['n_plus']}",
             f"converged={rep['converged']}  iterations={rep['iterations']}  loglik={_fmt(rep['loglik'])}",
             "", "proportionality coefficients (c1 fixed at 1):"]
    for k, (c, se) in enumerate(zip(rep["c"], rep["c_se"]), start=1):
        lines.append(f"  c{k} = {c:.{HUMAN_DIGITS}f}" + (f"   se {se:.{HUMAN_DIGITS}f}" if k > 1 else ""))
    for key, title in (("Sigma1", "common covariance Sigma1"), ("A", "Cholesky root A"),
                       ("B", "Cholesky inverse root B")):
        lines += ["", f"{title}:", _fmt_matrix(rep[key])]
    if "cov" in rep:
        cv = rep["cov"]
        lines += ["", f"asymptotic covariance ({cv['parametrization']}), per unit n_+:",
                  "  " + "  ".join(cv["labels"]), _fmt_matrix(cv["matrix"]),
                  "standard errors:",
                  "  " + "  ".join(f"{l}={_fmt(s)}" for l, s in zip(cv["labels"], cv["se"]))]
    return "\n".join(lines)


def cmd_estimate(args) -> int:
    data = load_samples(args.input, args.n)
    rep, converged = estimate_report(data, FitOptions(args.tol, args.max_iter), args.cov)
    print(emit_json(rep) if args.format == "json" else _estimate_text(rep))
    if not converged:
        log.error("fit did not converge in %d iterations", rep["iterations"])
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_test(args) -> int:
    data = load_samples(args.input, args.n)
    if data.K < 2:
        raise KTooSmall("the homogeneity test needs at least two groups")
    res = fit(data, FitOptions(args.tol, args.max_iter))
    if not res.converged:
        raise NotConverged(f"fit did not converge in {res.iterations} iterations")
    rep = homogeneity_statistic(res.c, data.weights, data.n_plus, data.p).to_dict()
    if args.format == "json":
        print(emit_json(rep))
    else:
        print(f"statistic = {_fmt(rep['statistic'])}\ndf = {rep['df']}\np-value = {_fmt(rep['p_value'])}\n"
              f"dual-form residual = {rep['form_check']:.3g}")
    return EXIT_OK


def load_sim_config(path, seed=None, reps=None, level=None) -> tuple[str, SimConfig, list]:
    doc = _read_json(Path(path))
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    study = doc.get("study", "covariance")
    if study not in ("covariance", "level"):
        raise InputError(f"{path}: 'study' must be 'covariance' or 'level'")
    try:
        cfg = SimConfig(
            c=doc["c"],
            Sigma1=np.array(doc["Sigma1"], dtype=float),
            N=doc["N"],
            reps=reps if reps is not None else doc.get("reps", 1000),
            seed=seed if seed is not None else doc.get("seed", 0),
            alpha=level if level is not None else doc.get("alpha", 0.05),
            tol=doc.get("tol", 1e-10),
            max_iter=doc.get("max_iter", 500),
        )
    except KeyError as exc:
        raise InputError(f"{path}: missing key {exc}") from None
    except NotPositiveDefinite:
        raise
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return study, cfg, list(doc.get("parametrizations", ["b", "a", "sigma"]))


def _sim_text(rep) -> str:
    cfg = rep.config
    lines = [f"{rep.study} study: K={cfg.K} p={cfg.p} N={list(cfg.N)} reps={cfg.reps} seed={cfg.seed}",
             f"successful fits {rep.n_ok}, failed {rep.n_failed}"]
    if rep.study == "covariance":
        for tag, cmp in rep.comparisons.items():
            lines += ["", f"[{tag}] max relative error on masked entries: {_fmt(cmp.max_rel_error)}",
                      "  empirical:", _fmt_matrix(cmp.empirical, "    "),
                      "  closed form:", _fmt_matrix(cmp.theoretical, "    ")]
    else:
        lo, hi = rep.nominal_band
        lines += [f"rejection rate at alpha={cfg.alpha}: {_fmt(rep.rejection_rate)} (se {_fmt(rep.rejection_se)})",
                  f"3-sigma band around nominal: [{_fmt(lo)}, {_fmt(hi)}]",
                  f"KS uniformity of p-values: D={_fmt(rep.ks_statistic)} p={_fmt(rep.ks_pvalue)}"]
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    study, cfg, tags = load_sim_config(args.config, args.seed, args.reps, args.level)
    if study == "covariance":
        rep = run_covariance_study(cfg, tags, workers=args.workers)
    else:
        rep = run_level_study(cfg, workers=args.workers)
    if args.output:
        Path(args.output).write_text(emit_json(rep.to_dict()) + "\n")
    print(emit_json(rep.to_dict()) if args.format == "json" else _sim_text(rep))
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(seed=args.seed)
    ok = all(r.passed for r in results)
    if args.format == "json":
        print(emit_json({"passed": ok, "checks": [
            {"name": r.name, "discrepancy": r.discrepancy, "tolerance": r.tolerance,
             "instances": r.instances, "passed": r.passed} for r in results]}))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<26} max discrepancy {r.discrepancy:.3e}"
                  f"  (tolerance {r.tolerance:.0e})")
        print(f"max discrepancy overall {max(r.discrepancy for r in results):.3e}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propcov",
        description="Proportional covariance matrices: MLE, asymptotic covariances, homogeneity test.",
        epilog="exit codes: 0 ok, 1 validation failed, 2 bad input, 3 not positive definite, "
               "4 not converged, 5 fewer than two groups",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("text", "json"), default="text")

    fitp = argparse.ArgumentParser(add_help=False)
    fitp.add_argument("input", nargs="+", help="JSON group file(s) or CSV matrix file(s)")
    fitp.add_argument("--n", type=int, action="append", help="degrees of freedom for each CSV input, in order")
    fitp.add_argument("--tol", type=float, default=FitOptions.tol)
    fitp.add_argument("--max-iter", type=int, default=FitOptions.max_iter)

    p = sub.add_parser("estimate", parents=[fitp, fmt], help="fit the model and report standard errors")
    p.add_argument("--cov", choices=("b", "a", "sigma"), help="also print the full asymptotic covariance")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", parents=[fitp, fmt], help="test equality of the covariance matrices")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[fmt], help="run a Monte Carlo study from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--level", type=float, help="nominal level for a level study")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", help="also write the JSON report to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", parents=[fmt], help="check every closed form against numerical oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="propcov: %(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except NotPositiveDefinite as exc:
        log.error("input covariance is not positive definite: %s", exc)
        return EXIT_NOT_PD
    except NotConverged as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except KTooSmall as exc:
        log.error("%s", exc)
        return EXIT_K_TOO_SMALL
    except InvalidArgument as exc:
        log.error("%s", exc)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
