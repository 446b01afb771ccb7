"""Command-line front end: ``nlcs <command> [options]``.

Every numeric option that can be swept accepts either a number or a grid
``start:stop:points[:log]``, sampled on (start, stop].  CSV floats are
written with 17 significant digits and JSON with sorted keys, so repeated
runs are byte-identical.  Exit codes: 0 ok, 1 domain/singularity error,
2 usage error.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import NlcsError
from .fock_ops import (
    PhysicalParams,
    build_annihilation,
    build_F0,
    build_F1,
    build_O_Q_exact,
    build_O_Q_laguerre,
    nonlinearity_profile,
)
from .laguerre import laguerre_roots
from .nlcs import (
    REGULAR,
    build_state,
    composite_residuals,
    eigen_residual,
    kboson_composite,
    kboson_sector,
    kboson_split,
    kernel_residual,
    truncated_point,
    uncertainty_report,
    xi_from_params,
)
from .rwa1 import d_recursion, shift_estimate
from .singularity import DEFAULT_MARGIN, build_atlas, classify_eta2, pole_ratio_sequence

FLOAT_FMT = "%.16e"


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if not self.start < self.stop:
            raise ValueError(f"grid start {self.start} must be < stop {self.stop}")
        if self.points < 2:
            raise ValueError("a grid needs at least 2 points")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"unknown grid scale {self.scale!r}")
        if self.scale == "log" and not self.start > 0:
            raise ValueError("log grids need start > 0")

    def values(self):
        """Points on (start, stop], stop included, start excluded."""
        i = np.arange(1, self.points + 1)
        if self.scale == "log":
            a, b = math.log(self.start), math.log(self.stop)
            return np.exp(a + (b - a) * i / self.points)
        return self.start + (self.stop - self.start) * i / self.points


def _value_or_grid(variable):
    def parse(text):
        parts = text.split(":")
        try:
            if len(parts) == 1:
                return float(parts[0])
            if len(parts) in (3, 4):
                scale = parts[3] if len(parts) == 4 else "linear"
                return SweepSpec(variable, float(parts[0]), float(parts[1]), int(parts[2]), scale)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
        raise argparse.ArgumentTypeError(f"expected a number or start:stop:points[:log], got {text!r}")

    parse.__name__ = variable
    return parse


def _interval(text):
    parts = text.split(":")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 0 <= lo < hi:
        raise argparse.ArgumentTypeError(f"range needs 0 <= lo < hi, got {text!r}")
    return lo, hi


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# --- output ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    return str(v)


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(path, text):
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".nlcs-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text):
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _meta(args, argv):
    import datetime

    import scipy

    return {
        "argv": list(argv),
        "command": args.command,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "numpy": np.__version__,
        "python": platform.python_version(),
        "scipy": scipy.__version__,
        "version": __version__,
    }


def thread_count():
    raw = os.environ.get("NLCS_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"NLCS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"NLCS_THREADS must be >= 1, got {n}")
    return n


def parallel_map(func, items):
    """Map in grid order, using up to NLCS_THREADS worker threads."""
    n = thread_count()
    if n == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


class UsageError(Exception):
    pass


# --- helpers ---------------------------------------------------------------

def _single_grid(args, names):
    """Return (name, values) for the one swept option; the rest must be scalars."""
    grids = [n for n in names if isinstance(getattr(args, n), SweepSpec)]
    if len(grids) > 1:
        raise UsageError(f"only one of {', '.join('--' + g.replace('_', '-') for g in grids)} may be a grid")
    if grids:
        return grids[0], getattr(args, grids[0]).values()
    return None, None


def _scalar(args, name):
    v = getattr(args, name)
    if isinstance(v, SweepSpec):
        raise UsageError(f"--{name.replace('_', '-')} must be a single value here")
    return v


def _xi(xi_abs, phase):
    return complex(cmath.rect(xi_abs, phase))


def _params(args, eta2, k=None):
    return PhysicalParams(
        eta=math.sqrt(eta2),
        nu=args.nu,
        e0_over_e1=args.e0_over_e1,
        k=args.k if k is None else k,
    )


# --- commands --------------------------------------------------------------

def cmd_roots(args):
    recs = laguerre_roots(args.degree, args.alpha, args.range)
    rows = [(r.degree, r.alpha, r.root, r.residual) for r in recs]
    _emit(args, csv_text(["degree", "alpha", "root", "residual"], rows))


def cmd_atlas(args):
    atlas = build_atlas(args.degree_max, args.range)
    out = atlas.to_json()
    if args.eta2 is not None:
        cls = classify_eta2(atlas, args.eta2, args.margin)
        out["query"] = {"eta2": args.eta2, "class": str(cls), "distance": cls.distance}
    _emit(args, json_text(out))


def _state_xi(args, eta2):
    if args.xi_abs is not None:
        return _xi(args.xi_abs, args.xi_phase)
    return xi_from_params(_params(args, eta2))


def cmd_state(args):
    eta2 = args.eta2
    xi = _state_xi(args, eta2)
    if args.k == 1:
        state = build_state(eta2, xi)
    else:
        state = kboson_sector(args.k, args.ell, xi, eta2)
    residuals = {}
    kind = state.classification.kind
    if kind in ("Regular", "TruncatedZero"):
        residuals["eigen"] = eigen_residual(state)
        if args.xi_abs is None and kind == "Regular":
            residuals["kernel"] = kernel_residual(state, _params(args, eta2))
    out = state.to_json(residuals)
    if args.k == 1 and kind in ("Regular", "TruncatedZero"):
        rep = uncertainty_report(state, nonlinearity_profile(1, state.eta2, state.n_max))
        out["uncertainty"] = {
            "var_x": rep.var_x, "var_p": rep.var_p, "product": rep.product, "mean_C": rep.mean_C,
        }
    if state.diagnostics is not None:
        out["diagnostics"] = state.diagnostics.summary()
    _emit(args, json_text(out))


def cmd_kboson(args):
    xi = _xi(args.xi_abs, args.xi_phase)
    sectors, gram = kboson_split(args.k, xi, args.eta2)
    comp = kboson_composite(sectors)
    out = {
        "k": args.k,
        "eta2": args.eta2,
        "xi_k": [xi.real, xi.imag],
        "sectors": [
            {
                "ell": s.sector,
                "classification": str(s.classification),
                "eigen_residual": eigen_residual(s) if s.classification == REGULAR else math.nan,
                "tail_bound": s.tail_bound,
            }
            for s in sectors
        ],
        "gram": [[[z.real, z.imag] for z in row] for row in gram],
        "gram_deviation": float(np.max(np.abs(gram - np.eye(args.k)))),
        "composite_residuals": composite_residuals(comp) if comp.classification == REGULAR else {},
    }
    _emit(args, json_text(out))


SCAN_COLUMNS = ["eta2", "xi_abs", "lambda", "xi_term", "var_x", "var_p", "product", "mean_C", "classification"]


def cmd_scan(args):
    swept, values = _single_grid(args, ["eta2", "xi_abs"])
    if swept is None:
        swept, values = "eta2", [args.eta2]
    eta2_fixed = None if swept == "eta2" else args.eta2
    xi_fixed = None if swept == "xi_abs" else args.xi_abs
    atlas = None
    if args.beta:
        if args.beta < 2:
            raise UsageError("--beta must be >= 2")
        atlas = build_atlas(args.beta - 1, (0.0, float(max(values) if eta2_fixed is None else eta2_fixed)))

    def point(v):
        eta2 = v if eta2_fixed is None else eta2_fixed
        xi_abs = v if xi_fixed is None else xi_fixed
        xi = _xi(xi_abs, args.xi_phase)
        if args.beta:
            rep = truncated_point(args.beta, xi, eta2)
            cls = str(classify_eta2(atlas, eta2, args.margin))
        else:
            state = build_state(eta2, xi)
            cls = str(state.classification)
            if state.classification.kind in ("Undefined", "PoleRegularized"):
                nan = math.nan
                return (eta2, xi_abs, nan, nan, nan, nan, nan, nan, cls)
            rep = uncertainty_report(state, nonlinearity_profile(1, eta2, state.n_max))
        return (eta2, xi_abs, rep.lambda_term, rep.xi_term, rep.var_x, rep.var_p, rep.product,
                rep.mean_C, cls)

    rows = parallel_map(point, list(values))
    _emit(args, csv_text(SCAN_COLUMNS, rows))


def cmd_pole(args):
    diag = pole_ratio_sequence(args.mu, args.eta2, args.xi_abs, args.jmax, args.margin)
    _emit(args, csv_text(["j", "exact_ratio", "asymptotic_ratio_or_NaN", "partial_log_sum"], diag.csv_rows()))
    if args.summary:
        write_atomic(args.summary, json_text(diag.summary()))
    print(f"verdict={diag.verdict}", file=sys.stderr)


def cmd_rwa1(args):
    params = _params(args, args.eta2, k=1)
    swept, ts = _single_grid(args, ["t"])
    ts = [args.t] if swept is None else list(ts)
    sols = parallel_map(lambda t: d_recursion(params, t, args.d0, args.d1, args.n_max), ts)
    if swept is None:
        header = ["n", "re", "im", "log_mag"]
        rows = list(sols[0].csv_rows())
    else:
        header = ["t", "n", "re", "im", "log_mag"]
        rows = [(s.t,) + r for s in sols for r in s.csv_rows()]
    _emit(args, csv_text(header, rows))
    for s in sols:
        print(f"t={FLOAT_FMT % s.t} residual={FLOAT_FMT % s.residual}", file=sys.stderr)


def cmd_shift(args):
    params = _params(args, args.eta2, k=1)
    xi = _xi(args.xi_abs, args.xi_phase)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = shift_estimate(xi, args.t, params, args.radius, args.grid, args.normalized)
    if est.unreliable:
        print(f"warning: unreliable quadrature (R-sensitivity {est.r_sensitivity:.3g})", file=sys.stderr)
    out = est.to_json()
    out["xi"] = [xi.real, xi.imag]
    _emit(args, json_text(out))


def cmd_dump_op(args):
    params = _params(args, args.eta2)
    op = args.op
    if op == "A":
        mat = build_annihilation(nonlinearity_profile(args.k, args.eta2, args.dim), args.dim)
    elif op == "F0":
        mat = build_F0(params, args.dim)
    elif op == "F1":
        mat = build_F1(params, args.t, args.dim)
    elif op in ("O_exact", "Q_exact"):
        O, Q = build_O_Q_exact(params, args.t, args.dim, args.cutoff)
        mat = O if op == "O_exact" else Q
    else:
        O, Q = build_O_Q_laguerre(params, args.t, args.dim)
        mat = O if op == "O_laguerre" else Q
    out = mat.to_json()
    out.update({"op": op, "k": args.k, "eta2": args.eta2, "t": args.t})
    _emit(args, json_text(out))


# --- parser ----------------------------------------------------------------

def _common(p):
    p.add_argument("--out", help="output file (default stdout); written atomically")
    p.add_argument("--meta", action="store_true", help="write <out>.meta.json with run metadata")
    p.add_argument("--config", help="key=value file; keys mirror the long option names")


def _physics(p, k=True):
    p.add_argument("--nu", type=float, default=1.0, help="trap frequency (default 1)")
    p.add_argument("--e0-over-e1", type=float, default=1.0, help="field ratio E0/E1 (default 1)")
    if k:
        p.add_argument("--k", type=_positive_int, default=1, help="resonance order k (default 1)")


def _xi_opts(p, required=True, grid=False):
    typ = _value_or_grid("xi_abs") if grid else float
    p.add_argument("--xi-abs", type=typ, required=required, default=None, help="|xi|")
    p.add_argument("--xi-phase", type=float, default=math.pi / 2, help="arg(xi) in radians (default pi/2)")


def build_parser():
    parser = argparse.ArgumentParser(prog="nlcs", description="Nonlinear coherent states of a trapped ion.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("roots", help="roots of L_n^(alpha) in (lo, hi]")
    p.add_argument("--degree", type=_positive_int, required=True)
    p.add_argument("--alpha", type=int, choices=range(0, 64), metavar="ALPHA", required=True)
    p.add_argument("--range", type=_interval, required=True, help="lo:hi")
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("atlas", help="singularity atlas of eta2 (JSON)")
    p.add_argument("--degree-max", type=_positive_int, required=True)
    p.add_argument("--range", type=_interval, default=(0.0, 10.0), help="lo:hi (default 0:10)")
    p.add_argument("--eta2", type=float, help="classify this eta2 against the atlas")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("state", help="construct one NLCS (JSON)")
    p.add_argument("--eta2", type=float, required=True)
    p.add_argument("--ell", type=int, default=0, help="sector for k > 1 (default 0)")
    _physics(p)
    _xi_opts(p, required=False)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("kboson", help="k-boson sector split and composite (JSON)")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--eta2", type=float, required=True)
    _xi_opts(p)
    p.set_defaults(func=cmd_kboson)

    p = sub.add_parser("scan", help="uncertainty scan over eta2 or |xi| (CSV)")
    p.add_argument("--eta2", type=_value_or_grid("eta2"), required=True)
    p.add_argument("--beta", type=_positive_int, help="truncate after beta-1 (truncated-state mode)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    _xi_opts(p, grid=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("pole-diagnose", help="ratio test at a pole (CSV; verdict on stderr)")
    p.add_argument("--mu", type=_positive_int, required=True)
    p.add_argument("--eta2", type=float, required=True)
    p.add_argument("--jmax", type=_positive_int, default=10_000)
    p.add_argument("--xi-abs", type=float, default=0.1)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--summary", help="also write the window summary as JSON here")
    p.set_defaults(func=cmd_pole)

    p = sub.add_parser("rwa1", help="first-order RWA coefficients d_n (CSV; residual on stderr)")
    p.add_argument("--eta2", type=float, required=True)
    p.add_argument("--t", type=_value_or_grid("t"), default=0.0, help="time, or a start:stop:points grid")
    p.add_argument("--d0", type=_complex, default=1 + 0j, help="seed d_0 (default 1; a convention, not derived)")
    p.add_argument("--d1", type=_complex, default=0j, help="seed d_1 (default 0; a convention, not derived)")
    p.add_argument("--n-max", type=_positive_int, default=50, help="last index computed (default 50)")
    _physics(p, k=False)
    p.set_defaults(func=cmd_rwa1)

    p = sub.add_parser("shift", help="EXPERIMENTAL eigenvalue shift by disc quadrature (JSON)")
    p.add_argument("--eta2", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--grid", type=_positive_int, default=64)
    p.add_argument("--normalized", type=_bool, nargs="?", const=True, default=False,
                   help="use normalized c_n(xi') in the kernel")
    _physics(p, k=False)
    _xi_opts(p)
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("dump-op", help="operator matrix as JSON")
    p.add_argument("--op", required=True,
                   choices=["A", "F0", "F1", "O_exact", "Q_exact", "O_laguerre", "Q_laguerre"])
    p.add_argument("--eta2", type=float, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--cutoff", type=_positive_int, default=60)
    _physics(p)
    p.set_defaults(func=cmd_dump_op)

    for sp in sub.choices.values():
        _common(sp)
    return parser, sub


def read_config(path):
    cfg = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg[key.replace("-", "_")] = value
    return cfg


def _config_path(argv):
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--config="):
            return a.split("=", 1)[1]
    return None


def apply_config(subparser, cfg):
    """Turn config entries into parser defaults; command-line flags still win."""
    actions = {a.dest: a for a in subparser._actions}
    for key, value in cfg.items():
        if key in ("config", "help") or key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        action = actions[key]
        if action.nargs == 0:  # store_true flags
            value = _bool(value)
        elif action.type is not None:
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config {key}: {exc}") from None
        action.default = value
        action.required = False


def parse_args(argv):
    parser, sub = build_parser()
    path = _config_path(argv)
    if path is not None and argv and argv[0] in sub.choices:
        try:
            apply_config(sub.choices[argv[0]], read_config(path))
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
    return parser.parse_args(argv)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.meta and not args.out:
        print("nlcs: error: --meta needs --out", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except UsageError as exc:
        print(f"nlcs: error: {exc}", file=sys.stderr)
        return 2
    except NlcsError as exc:
        print(f"nlcs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.meta:
        write_atomic(args.out + ".meta.json", json_text(_meta(args, argv)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
