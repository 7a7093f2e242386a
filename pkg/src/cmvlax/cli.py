"""Command-line front end.

Exit codes: 0 success, 1 check failure, 2 usage or input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import checks, cmv, dressing, flows, io, linalg, sampling
from .errors import (
    DiskExit,
    InvalidParams,
    NoConvergence,
    NotCMV,
    NotInOrbit,
    OutOfDisk,
    SingularInput,
    StepRejected,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        io.atomic_write(out, text)


def _need_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for randomized commands")
    return args.seed


def _require_n(n):
    if n is None or n < 2:
        raise UsageError(f"--n must be an integer >= 2 (got {n})")
    return n


def _report_line(rep) -> str:
    status = "PASS" if rep.passed else "FAIL"
    extra = f" ({rep.first_failure})" if rep.failures else ""
    return f"{status} residual={rep.residual:.3e}{extra}\n"


# --- build / free / factor -----------------------------------------------------------


def cmd_build(args) -> int:
    try:
        data = io.read_json(args.alpha_file)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.alpha_file}: {exc}")
    try:
        alphas = io.alphas_from_dict(data)
    except ValueError as exc:
        raise UsageError(str(exc))
    if alphas.size == 0:
        raise UsageError("coefficient list is empty (n >= 2 needs at least one alpha)")
    if "n" in data and int(data["n"]) != alphas.size + 1:
        raise UsageError(f"file declares n={data['n']} but holds {alphas.size} coefficients")
    try:
        c = cmv.build_cmv(alphas)
    except OutOfDisk as exc:
        raise UsageError(str(exc))
    _emit(io.dumps(io.matrix_to_dict(c.matrix)), args.out)
    sys.stderr.write("validate_cmv: " + _report_line(cmv.validate_cmv(c.matrix)))
    return EXIT_OK


def cmd_free(args) -> int:
    n = _require_n(args.n)
    _emit(io.dumps(io.matrix_to_dict(cmv.free_cmv(n).matrix)), args.out)
    return EXIT_OK


def _load_matrix(path):
    try:
        return io.read_matrix(path)
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}")


def cmd_factor(args) -> int:
    m = _load_matrix(args.matrix_file)
    try:
        factors, coeffs = cmv.extract_coefficients(m)
    except NotCMV as exc:
        raise UsageError(str(exc))
    payload = io.alphas_to_dict(coeffs.alphas)
    payload["n"] = coeffs.n
    payload["even"] = io.matrix_to_dict(factors.even)
    payload["odd"] = io.matrix_to_dict(factors.odd)
    _emit(io.dumps(payload), args.out)
    return EXIT_OK


# --- flow ----------------------------------------------------------------------------


def _initial_state(args):
    if args.variant == "pair" and args.alpha_file is None:
        n = _require_n(args.n)
        gen = sampling.rng(_need_seed(args))
        return flows.FlowState.pair(sampling.random_unitary(gen, n), sampling.random_unitary(gen, n))
    if args.alpha_file is not None:
        alphas = io.read_alphas(args.alpha_file)
    else:
        n = _require_n(args.n)
        alphas = sampling.random_alphas(sampling.rng(_need_seed(args)), n - 1)
    c = cmv.build_cmv(alphas)
    if args.variant == "single":
        return flows.FlowState.single(c.matrix)
    if args.variant == "cmv":
        return flows.FlowState.cmv(c.factors.even, c.factors.odd)
    return flows.FlowState.pair(c.factors.even, c.factors.odd)


def _alphas_of(state):
    n = state.n
    a = np.empty(n - 1, dtype=np.complex128)
    a[0::2] = dressing.read_blocks(state.mats[0], dressing.OrbitTag("even", n))
    a[1::2] = dressing.read_blocks(state.mats[1], dressing.OrbitTag("odd", n))
    return a


def _trajectory_records(traj, variant, out_path, write_states):
    """Rows for CSV/JSON; single/pair states are written to side files."""
    records = []
    state_dir = Path(str(out_path) + ".states") if out_path is not None else None
    for idx, (t, s, h, u, r) in enumerate(
        zip(traj.times, traj.states, traj.conserved, traj.unitarity, traj.structure)
    ):
        rec = {"time": t, "H": h, "unitarity_residual": u, "structure_residual": r}
        if variant == "cmv":
            rec["alphas"] = [io._pair(a) for a in _alphas_of(s)]
        elif write_states and state_dir is not None:
            refs = []
            for c, m in enumerate(s.mats):
                name = f"sample{idx:06d}_{c}.json"
                io.write_matrix(state_dir / name, m)
                refs.append(f"{state_dir.name}/{name}")
            rec["state_files"] = refs
        else:
            rec["state"] = [io.matrix_to_dict(m) for m in s.mats]
        records.append(rec)
    return records


def _trajectory_text(records, fmt, variant, meta):
    if fmt == "json":
        return io.dumps(dict(meta, samples=records))
    j_max = len(records[0]["H"])
    head = ["time"] + [f"H_{j}" for j in range(1, j_max + 1)]
    head += ["unitarity_residual", "structure_residual"]
    if variant == "cmv":
        for j in range(len(records[0]["alphas"])):
            head += [f"alpha_{j}_re", f"alpha_{j}_im"]
    elif "state_files" in records[0]:
        head += [f"state_file_{c}" for c in range(len(records[0]["state_files"]))]
    lines = [",".join(head)]
    for rec in records:
        row = [io.fmt(rec["time"])] + [io.fmt(x) for x in rec["H"]]
        row += [io.fmt(rec["unitarity_residual"]), io.fmt(rec["structure_residual"])]
        if variant == "cmv":
            for re, im in rec["alphas"]:
                row += [io.fmt(re), io.fmt(im)]
        elif "state_files" in rec:
            row += rec["state_files"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _sibling(out, suffix):
    p = Path(out)
    return p.with_name(p.stem + suffix)


def cmd_flow(args) -> int:
    if args.k is None or args.k < 1:
        raise UsageError(f"--k must be a positive integer (got {args.k})")
    if not args.h > 0:
        raise UsageError(f"--h must be positive (got {args.h})")
    if args.t_end < 0:
        raise UsageError(f"--t-end must be >= 0 (got {args.t_end})")
    state = _initial_state(args)
    fmt = args.format
    meta = {"variant": args.variant, "k": args.k, "t_end": args.t_end, "h": args.h,
            "seed": args.seed, "n": state.n}

    outputs = {}
    rk = fac = None
    if args.method in ("rk4", "both"):
        rk = flows.integrate(state, args.k, args.t_end, args.h, args.reproject,
                             sample_every=args.sample_every)
    if args.method in ("factorization", "both"):
        times = rk.times if rk is not None else _sample_times(args)
        fac = flows.factorization_trajectory(state, args.k, times)

    main = rk if rk is not None else fac
    main_meta = dict(meta, method="rk4" if rk is not None else "factorization")
    if args.out is not None:
        outputs[args.out] = (main, main_meta)
        if rk is not None and fac is not None:
            outputs[_sibling(args.out, f".factorization.{fmt}")] = (
                fac, dict(meta, method="factorization"))
    texts = {}
    for path, (traj, m) in outputs.items():
        recs = _trajectory_records(traj, args.variant, path, write_states=True)
        texts[path] = _trajectory_text(recs, fmt, args.variant, m)
    if args.out is None:
        recs = _trajectory_records(main, args.variant, None, write_states=False)
        sys.stdout.write(_trajectory_text(recs, fmt, args.variant, main_meta))
    for path, text in texts.items():
        io.atomic_write(path, text)
    if rk is not None and fac is not None:
        gap = flows.state_distance(rk.final, fac.final)
        report = {"terminal_discrepancy_frobenius": gap, "t_end": args.t_end}
        if args.out is not None:
            io.atomic_write(_sibling(args.out, ".discrepancy.json"), io.dumps(report, pretty=True))
        sys.stderr.write(f"terminal discrepancy (rk4 vs factorization): {gap:.3e}\n")
    return EXIT_OK


def _sample_times(args):
    steps = int(np.ceil(args.t_end / args.h - 1e-9)) if args.t_end else 0
    if steps == 0:
        return [0.0]
    dt = args.t_end / steps
    idx = [i for i in range(steps + 1) if i % args.sample_every == 0 or i == steps]
    return [i * dt for i in idx]


# --- dress ---------------------------------------------------------------------------


def _base(spec: str, n: int | None):
    if spec in ("even", "odd"):
        n = _require_n(n)
        tag = dressing.OrbitTag(spec, n)
        return dressing.base_point(tag), tag
    x = _load_matrix(spec)
    if abs(np.linalg.det(x)) == 0 or np.linalg.cond(x) > 1 / (x.shape[0] * linalg.EPS):
        raise UsageError(f"base matrix {spec} is not invertible")
    return x, None


def _dress_trial(seed, n, base, tag, i):
    gen = sampling.rng([seed, i])
    g = sampling.random_gl(gen, n)
    a = dressing.dress(g, base)
    rep = dressing.in_orbit(a, tag, tol=1e-10) if tag is not None else None
    return {
        "trial": i,
        "membership_residual": None if rep is None else rep.residual,
        "in_orbit": None if rep is None else rep.passed,
        "unitarity_residual": linalg.unitarity_residual(a),
    }


def cmd_dress(args) -> int:
    if args.random:
        seed = _need_seed(args)
        n = _require_n(args.n)
        base, tag = _base(args.base, n)
        if base.shape[0] != n:
            raise UsageError(f"base is {base.shape[0]}x{base.shape[0]}, --n is {n}")
        fn = lambda i: _dress_trial(seed, n, base, tag, i)  # noqa: E731
        if args.parallel and args.trials > 1:
            with ThreadPoolExecutor() as pool:
                rows = list(pool.map(fn, range(args.trials)))
        else:
            rows = [fn(i) for i in range(args.trials)]
        report = {"n": n, "seed": seed, "trials": args.trials, "base": args.base,
                  "results": rows}
        if tag is not None:
            hits = sum(bool(r["in_orbit"]) for r in rows)
            label = "T^e" if tag.parity == "even" else "T^o"
            report["passed"] = hits
            summary = f"{hits}/{args.trials} in {label}"
        else:
            summary = f"{args.trials} dressed samples (no orbit characterization for a custom base)"
        report["summary"] = summary
        if args.out is not None:
            io.atomic_write(args.out, io.dumps(report, pretty=True))
        print(summary)
        return EXIT_OK if tag is None or report["passed"] == args.trials else EXIT_CHECK

    if args.g_file is None:
        raise UsageError("give a matrix file or --random")
    g = _load_matrix(args.g_file)
    n = g.shape[0]
    base, tag = _base(args.base, n)
    if base.shape != g.shape:
        raise UsageError("g and base have different sizes")
    try:
        a = dressing.dress(g, base)
    except SingularInput as exc:
        raise UsageError(str(exc))
    _emit(io.dumps(io.matrix_to_dict(a)), args.out)
    report = {"unitarity_residual": linalg.unitarity_residual(a)}
    if tag is not None:
        report["membership"] = dressing.in_orbit(a, tag).as_dict()
    if args.out is not None:
        io.atomic_write(_sibling(args.out, ".report.json"), io.dumps(report, pretty=True))
    sys.stderr.write(json.dumps(report) + "\n")
    return EXIT_OK


# --- check ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    seed = _need_seed(args)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    sizes = None if args.n is None else [_require_n(args.n)]
    report = checks.run_suite(args.suite, seed, args.trials, sizes, args.parallel)
    _emit(io.dumps(report, pretty=True), args.out)
    for w in report["warnings"]:
        sys.stderr.write(f"warning: {w}\n")
    failed = [m for m in report["invariants"] if not m["passed"]]
    for m in failed:
        sys.stderr.write(
            f"FAIL {m['suite']}/{m['name']} n={m['n']}: {m['measured']:.3e} > {m['threshold']:.1e}\n"
        )
    sys.stderr.write(
        f"{len(report['invariants']) - len(failed)}/{len(report['invariants'])} invariants pass\n"
    )
    return EXIT_OK if report["passed"] else EXIT_CHECK


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="matrix dimension")
    common.add_argument("--seed", type=int, default=None, help="PRNG seed (PCG64)")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--parallel", action="store_true", help="run sweep trials concurrently")

    p = argparse.ArgumentParser(prog="cmvlax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build", parents=[common], help="CMV matrix from a coefficient file")
    s.add_argument("alpha_file")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("factor", parents=[common], help="extract coefficients from a CMV matrix")
    s.add_argument("matrix_file")
    s.set_defaults(func=cmd_factor)

    s = sub.add_parser("free", parents=[common], help="emit the zero-coefficient CMV matrix")
    s.set_defaults(func=cmd_free)

    s = sub.add_parser("flow", parents=[common], help="integrate a Lax flow")
    s.add_argument("--k", type=int, default=1, help="Hamiltonian power")
    s.add_argument("--t-end", type=float, default=1.0)
    s.add_argument("--h", type=float, default=1e-3, help="RK4 step")
    s.add_argument("--method", choices=("rk4", "factorization", "both"), default="rk4")
    s.add_argument("--variant", choices=("single", "pair", "cmv"), default="cmv")
    s.add_argument("--alpha-file", default=None, help="initial coefficients (else random)")
    s.add_argument("--reproject", action="store_true")
    s.add_argument("--sample-every", type=int, default=1)
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("dress", parents=[common], help="dressing action and orbit membership")
    s.add_argument("g_file", nargs="?", default=None)
    s.add_argument("--random", action="store_true", help="seeded sweep over random g")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--base", default="even", help="'even', 'odd' or a matrix file")
    s.set_defaults(func=cmd_dress)

    s = sub.add_parser("check", parents=[common], help="run invariant suites")
    s.add_argument("--suite", choices=("all",) + checks.SUITES, default="all")
    s.add_argument("--trials", type=int, default=20)
    s.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "sample_every", 1) < 1:
        print("error: --sample-every must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParams, OutOfDisk, NotCMV, NotInOrbit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DiskExit, StepRejected, NoConvergence, SingularInput) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
