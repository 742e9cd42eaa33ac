"""Command-line front end: ``heiskam <subcommand> [options]``.

Exit codes: 0 ok, 2 input error, 3 no convergence, 4 inadmissible step,
5 internal assertion.  Floats are written with 17 significant digits and CSV
files start with a ``# format: <name>/<version>`` line.  Keys of a ``--config``
JSON object override the matching flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import HeisKamError, InputError

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_INADMISSIBLE, EXIT_INTERNAL = 0, 2, 3, 4, 5


# -- formatting -----------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def dump_json(obj, indent=0):
    """JSON text with sorted keys and every float at 17 significant digits; non-finite floats become strings."""
    pad, end = "  " * (indent + 1), "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dump_json(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dump_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return json.dumps(fmt(obj))
    if isinstance(obj, (int, float, np.integer, np.floating)):
        return fmt(obj)
    return json.dumps(str(obj))


def csv_text(name, rows, version=1):
    buf = io.StringIO()
    buf.write(f"# format: {name}/{version}\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "wb" if isinstance(data, bytes) else "w") as fh:
        fh.write(data)


def _emit(args, obj):
    text = dump_json(obj) + "\n"
    if getattr(args, "json_out", None):
        _write(args.json_out, text)
    sys.stdout.write(text)


# -- input ------------------------------------------------------------------------------

def _read(path, binary=False):
    try:
        with open(path, "rb" if binary else "r") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if len(raw if binary else raw.strip()) == 0:
        raise InputError(f"{path} is empty")
    return raw


def load_json(path):
    try:
        data = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path} must hold a JSON object")
    return data


def apply_config(args):
    """Copy keys of the --config object onto ``args``; returns the object."""
    path = getattr(args, "config", None)
    if not path:
        return {}
    data = load_json(path)
    for k, v in data.items():
        key = k.replace("-", "_")
        if key == "in":
            key = "in_files"
        if key in ("config", "func", "command") or not hasattr(args, key):
            raise InputError(f"unknown config key {k!r}")
        setattr(args, key, v)
    return data


def pair_from_spec(spec, n=None):
    """FrequencyPair from {tau, eta, gamma, bound}.  Without vectors: the default
    pair for n = 2, or a fixed n = 3 pair."""
    from .diophantine import default_pair, make_pair, parse_vector
    tau, eta = spec.get("tau"), spec.get("eta")
    gamma = float(spec.get("gamma") or 1.5)
    bound = int(spec.get("bound") or 200)
    gamma_eta = spec.get("gamma_eta")
    if tau is None and eta is None:
        if n == 3:
            t = np.sqrt([2.0, 3.0, 5.0])
            e = np.cross(t, [1.0, np.sqrt(7.0), np.sqrt(11.0)])
            return make_pair(t, e, gamma, min(bound, 40))
        if n not in (None, 2):
            raise InputError(f"no default pair for n = {n}; give --tau and --eta")
        if gamma == 1.5 and gamma_eta is None:
            return default_pair(bound)
        tau, eta = "sqrt2,sqrt3", "sqrt3,-sqrt2"
    if tau is None or eta is None:
        raise InputError("give both tau and eta")
    return make_pair(parse_vector(tau), parse_vector(eta), gamma, bound,
                     None if gamma_eta is None else float(gamma_eta))


def _pair_args(args, n=None):
    spec = {}
    if getattr(args, "pair", None):
        spec.update(load_json(args.pair))
    for k in ("tau", "eta", "gamma", "bound"):
        v = getattr(args, k, None)
        if v is not None:
            spec[k] = v
    return pair_from_spec(spec, n)


def _parse_s(text):
    try:
        if isinstance(text, (list, tuple)):
            return tuple(float(v) for v in text)
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise InputError(f"bad --s list {text!r}") from None


# -- subcommands ------------------------------------------------------------------------------

def cmd_diophantine_check(args):
    apply_config(args)
    pair = _pair_args(args)
    which = "tau" if pair.c_tau <= pair.c_eta else "eta"
    worst = pair.worst[which]
    stats = {"search_bound": pair.search_bound,
             "lattice_points": (2 * pair.search_bound + 1) ** pair.n - 1,
             "gamma": pair.gamma, "gamma_eta": pair.gamma_eta,
             "c_tau": pair.c_tau, "c_eta": pair.c_eta, "limiting_vector": which,
             "worst": pair.worst}
    _emit(args, {"tau": list(pair.tau_vec), "eta": list(pair.eta_vec), "c": pair.c,
                 "worst_m": worst["m"], "worst_p": worst["p"], "table_stats": stats})
    return EXIT_OK


def cmd_cohomology(args):
    apply_config(args)
    from .torus_cohomology import cohomology_dimensions
    pair = _pair_args(args, n=int(args.n))
    if pair.n != int(args.n):
        raise InputError(f"pair has n = {pair.n}, requested n = {args.n}")
    coc, cob, h1 = cohomology_dimensions(pair)
    _emit(args, {"n": pair.n, "cocycles": coc, "coboundaries": cob, "h1": h1})
    return EXIT_OK


def _load_torus_field(path):
    from .lattice_fourier import TorusField
    d = load_json(path)
    try:
        return TorusField.from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: not a torus field ({exc})") from None


def cmd_solve_torus(args):
    apply_config(args)
    pair = _pair_args(args)
    s_values = _parse_s(args.s)
    from .torus_cohomology import solve_common_coboundary
    if args.in_files:
        f, g = (_load_torus_field(p) for p in args.in_files)
        if f.dim != 2 * pair.n or g.dim != 2 * pair.n:
            raise InputError(f"fields live on T^{f.dim}, the pair needs T^{2 * pair.n}")
        sol = solve_common_coboundary(f, g, pair, s_values)
        rows = [["s", "residual_tau", "residual_eta", "tame_ratio"]]
        rows += [[s, sol.residual_tau, sol.residual_eta, sol.tame_ratios[s]] for s in s_values]
        text = csv_text("heiskam-torus-solve", rows)
        if args.out:
            _write(os.path.join(args.out, "P.json"), dump_json(sol.P.to_dict()) + "\n")
            _write(os.path.join(args.out, "solve.csv"), text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    # manufactured batch: sparse random P on the full cutoff box, recovered from (L_tau P, L_eta P)
    from .lattice_fourier import zeta_at
    from .torus_cohomology import manufactured_modes, solve_on_modes
    rng = np.random.default_rng(int(args.seed))
    rows = [["k", "support", "residual_tau", "residual_eta", "recovery"] + [f"tame_s{fmt(s)}" for s in s_values]]
    for k in range(int(args.count)):
        modes, P = manufactured_modes(rng, pair, int(args.cutoff))
        f = zeta_at(modes, pair.embedding("tau")) * P
        g = zeta_at(modes, pair.embedding("eta")) * P
        sol = solve_on_modes(modes, f, g, pair, s_values)
        rec = float(np.linalg.norm(sol.P - P) / np.linalg.norm(P))
        rows.append([k, modes.shape[0], sol.residual_tau, sol.residual_eta, rec]
                    + [sol.tame_ratios[s] for s in s_values])
    text = csv_text("heiskam-torus-batch", rows)
    if args.out:
        _write(os.path.join(args.out, "solve.csv"), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load_grid(path):
    from .schrodinger_rep import GridField
    bin_path = path[:-5] if path.endswith(".json") else path
    hdr = load_json(bin_path + ".json")
    try:
        return GridField.from_bytes(_read(bin_path, binary=True), hdr)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{bin_path}: {exc}") from None


def _save_grid(directory, name, f):
    path = os.path.join(directory, name + ".bin")
    _write(path, f.to_bytes())
    _write(path + ".json", dump_json(f.header()) + "\n")


def _frame_from(args):
    from . import schrodinger_rep as S
    if args.frame:
        d = load_json(args.frame)
        if "A" in d:
            try:
                return S.RotatedFrame(np.asarray(d["A"], dtype=np.float64), float(d["tau"]), float(d["nu2"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise InputError(f"bad frame: {exc}") from None
        return S.build_frame(pair_from_spec(d))
    return S.build_frame(_pair_args(args))


def cmd_solve_schrodinger(args):
    apply_config(args)
    from . import schrodinger_rep as S
    frame = _frame_from(args)
    need = {"ltau": 1, "leta": 1, "transfer": 2, "split": 2}[args.op]
    if args.in_files:
        if len(args.in_files) != need:
            raise InputError(f"--op {args.op} takes {need} input grid(s)")
        inputs = [_load_grid(p) for p in args.in_files]
        if inputs[0].n != frame.n:
            raise InputError(f"grid has n = {inputs[0].n}, frame has n = {frame.n}")
    else:
        # manufactured input: a Gaussian-weighted polynomial Q and its coboundary pair
        rng = np.random.default_rng(int(args.seed))
        a, b, c = rng.uniform(0.5, 1.5, 3)
        Q = S.GridField.from_function(
            lambda x, y: np.exp(-(a * x**2 + b * y**2) / 2) * (1 + c * x * y), 2, float(args.L), int(args.P))
        inputs = [S.L_tau_apply(Q, frame), S.L_eta_apply(Q, frame)] if need == 2 else [Q]
    out = {"op": args.op, "frame": {"A": [list(r) for r in frame.A], "tau": frame.tau, "nu2": frame.nu2}}
    grids = {}
    if args.op == "ltau":
        grids["Ltau"] = S.L_tau_apply(inputs[0], frame)
    elif args.op == "leta":
        grids["Leta"] = S.L_eta_apply(inputs[0], frame)
    elif args.op == "transfer":
        res = S.transfer_solve(inputs[0], inputs[1], frame)
        grids["P"] = res.P
        out.update(residual_tau=res.residual_tau, residual_eta=res.residual_eta,
                   boundary_ratio=res.P.boundary_ratio())
    else:
        f, g = inputs
        phi = S.L_eta_apply(f, frame) - S.L_tau_apply(g, frame)
        bump = S.build_bump(frame, f.L, f.P, shape="gauss-sinc2")
        sp = S.split_infinite(f, g, phi, frame, bump)
        grids.update(P=sp.P, f_res=sp.f_res, g_res=sp.g_res)
        out.update(branch=sp.branch, bump=sp.bump_label,
                   ratios={fmt(s): list(r) for s, r in sp.ratios.items()})
    if args.out:
        for name, fld in grids.items():
            _save_grid(args.out, name, fld)
        out["written"] = sorted(n + ".bin" for n in grids)
    out["l2"] = {name: fld.l2() for name, fld in grids.items()}
    _emit(args, out)
    return EXIT_OK


def kam_setup(cfg):
    """(pair, KamConfig, family) from a run config {pair, kam, seed}."""
    from . import kam_engine as K
    unknown = set(cfg) - {"pair", "kam", "seed"}
    if unknown:
        raise InputError(f"unknown run-config keys {sorted(unknown)}")
    pair = pair_from_spec(cfg.get("pair", {}))
    try:
        kc = K.KamConfig.from_dict(cfg.get("kam", {}))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad kam section: {exc}") from None
    seed = dict(cfg.get("seed", {}))
    kind = seed.pop("kind", "manufactured")
    try:
        if kind == "manufactured":
            shift = seed.get("shift")
            if isinstance(shift, (int, float)):
                # a scalar asks for a random chart offset of that size
                rng = np.random.default_rng(int(seed.get("seed", 0)) + 1)
                shift = rng.normal(size=9) * float(shift) if shift else None
            fam, _ = K.manufactured_seed(pair, float(seed.get("eps0", 1e-3)), kc.cutoff,
                                         int(seed.get("seed", 0)), shift, method=kc.method,
                                         grid=kc.grid, alias_tol=kc.alias_tol)
        elif kind == "obstructed":
            fam = K.obstructed_family(pair, float(seed.get("value", 1e-3)), kc.cutoff)
        else:
            raise InputError(f"unknown seed kind {kind!r}")
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad seed section: {exc}") from None
    return pair, kc, fam


def cmd_kam_run(args):
    from . import kam_engine as K
    from .errors import NoConvergence, StepInadmissible
    cfg = load_json(args.config) if args.config else {}
    _, kc, fam = kam_setup(cfg)
    code, status, message, trace = EXIT_OK, "converged", None, None
    try:
        _, _, trace = K.run(fam, kc)
    except (NoConvergence, StepInadmissible) as exc:
        code, status, message, trace = exc.exit_code, type(exc).__name__, str(exc), exc.trace
    if args.out:
        rows = (trace if trace is not None else K.KamTrace()).csv_rows()
        name, version = K.KamTrace.CSV_VERSION.split("/")
        _write(args.out, csv_text(name, rows, int(version)))
    summary = {"status": status, "records": len(trace.records) if trace else 0}
    if trace is not None and trace.records:
        last = trace.records[-1]
        summary.update(eps_final=last.eps, residual=last.residual, lambda_final=list(last.lam))
    if message:
        summary["message"] = message
    _emit(args, summary)
    return code


def cmd_verify_suite(args):
    apply_config(args)
    from .suite import run_suite
    rows = run_suite(int(args.seed), full=bool(args.full))
    text = csv_text("heiskam-verify-suite", [["check", "value", "threshold", "pass"]] + rows)
    if args.out:
        path = args.out if args.out.endswith(".csv") else os.path.join(args.out, "verify_suite.csv")
        _write(path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r[3] for r in rows) else EXIT_INTERNAL


# -- dispatch ---------------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="heiskam", description="Cohomological equations and KAM "
                                "iteration for commuting translations on Heisenberg nilmanifolds.")
    p.add_argument("--version", action="version", version=f"heiskam {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def pair_flags(q):
        q.add_argument("--tau", help="comma-separated entries, e.g. sqrt2,sqrt3")
        q.add_argument("--eta", help="comma-separated entries, e.g. sqrt3,-sqrt2")
        q.add_argument("--gamma", type=float)
        q.add_argument("--bound", type=int, help="lattice search bound (default 200)")
        q.add_argument("--pair", help="JSON {tau, eta, gamma, bound}")
        q.add_argument("--config", help="JSON object whose keys override flags")
        q.add_argument("--json-out", help="also write the JSON summary here")

    q = sub.add_parser("diophantine-check", help="certify the Diophantine constants of a pair")
    pair_flags(q)
    q.set_defaults(func=cmd_diophantine_check)

    q = sub.add_parser("cohomology", help="dimensions of constant cocycles, coboundaries and H^1")
    pair_flags(q)
    q.add_argument("--n", type=int, default=2)
    q.set_defaults(func=cmd_cohomology)

    q = sub.add_parser("solve-torus", help="common solution of L_tau P = f, L_eta P = g on the torus")
    pair_flags(q)
    q.add_argument("--in", dest="in_files", nargs=2, metavar=("F_JSON", "G_JSON"))
    q.add_argument("--s", default="0,1,2,3", help="Sobolev orders for tame ratios")
    q.add_argument("--count", type=int, default=100, help="manufactured pairs when --in is absent")
    q.add_argument("--cutoff", type=int, default=32)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help="output directory (P.json, solve.csv)")
    q.set_defaults(func=cmd_solve_torus)

    q = sub.add_parser("solve-schrodinger", help="operators and solvers in the Schrodinger model")
    pair_flags(q)
    q.add_argument("--op", choices=("transfer", "split", "ltau", "leta"), default="transfer")
    q.add_argument("--in", dest="in_files", nargs="+", metavar="GRID",
                   help="binary grid files, each with a GRID.json header {n, L, P}")
    q.add_argument("--frame", help="JSON {A, tau, nu2} or a pair spec")
    q.add_argument("--L", type=float, default=20.0)
    q.add_argument("--P", type=int, default=512)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help="output directory for grid dumps")
    q.set_defaults(func=cmd_solve_schrodinger)

    q = sub.add_parser("kam-run", help="KAM iteration on a seed family")
    q.add_argument("--config", help="JSON {pair, kam, seed}")
    q.add_argument("--out", help="trace CSV")
    q.add_argument("--json-out")
    q.set_defaults(func=cmd_kam_run)

    q = sub.add_parser("verify-suite", help="seeded identity and solver checks")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--full", action="store_true", help="include a KAM run")
    q.add_argument("--out", help="directory or .csv path")
    q.add_argument("--config")
    q.set_defaults(func=cmd_verify_suite)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except HeisKamError as exc:
        sys.stderr.write(f"heiskam: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except AssertionError as exc:
        sys.stderr.write(f"heiskam: internal assertion: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
