"""Command-line front end: ``qrecip <command> [options]``.

Every command writes its data files plus a run manifest into the output
directory (``--out``, else ``$QRECIP_OUTPUT_DIR``, else the current directory).

Exit codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import haar, lipschitz, reciprocity
from . import states as st

ENV_OUTPUT_DIR = "QRECIP_OUTPUT_DIR"
SCHEMA_VERSION = 1
PRODUCT_UNITS = "# units: 1/hbar (hbar = 1)"
LC_UNITS = "# units: epsilon in hbar/length, lc in length^2/hbar^2 (hbar = 1)"


class UsageError(Exception):
    """Invalid command-line input (exit code 2)."""


class StateSyntaxError(UsageError):
    def __init__(self, text: str, position: int, message: str):
        self.text, self.position, self.reason = text, position, message
        super().__init__(f"{message} at position {position}\n  {text}\n  {' ' * position}^")


# --- state grammar -------------------------------------------------------
#   sho:n=<int>,alpha=<float> | cauchy:x0=<float>,gamma=<float>
#   student:dof=<int>         | hermite:c=[<re>+<im>i,...]

_KEYS = {
    "sho": {"n": int, "alpha": float},
    "cauchy": {"x0": float, "gamma": float},
    "student": {"dof": int},
    "hermite": {"c": list},
}
_REQUIRED = {"sho": {"n"}, "cauchy": set(), "student": {"dof"}, "hermite": {"c"}}
_COMPLEX = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?"
                      r"([+-](\d+\.?\d*|\.\d+)([eE][+-]?\d+)?i)?$|^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?i$")


def _parse_complex(token: str, text: str, pos: int) -> complex:
    t = token.strip()
    if not _COMPLEX.match(t):
        raise StateSyntaxError(text, pos, f"malformed complex number {t!r}")
    return complex(t.replace("i", "j"))


def _parse_scalar(kind, token, text, pos):
    try:
        if kind is int:
            if not re.fullmatch(r"[+-]?\d+", token):
                raise ValueError
            return int(token)
        v = float(token)
        if not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        name = "integer" if kind is int else "number"
        raise StateSyntaxError(text, pos, f"expected {name}, got {token!r}") from None


def parse_state(text: str) -> st.StateSpec:
    """Parse a state description such as ``sho:n=1,alpha=2``."""
    head, sep, body = text.partition(":")
    kind = head.strip()
    if not sep:
        raise StateSyntaxError(text, len(text), "expected ':' after the state kind")
    if kind not in _KEYS:
        raise StateSyntaxError(text, 0, f"unknown state kind {kind!r} "
                               f"(expected one of {', '.join(sorted(_KEYS))})")
    values, positions = {}, {}
    pos = len(head) + 1
    while pos < len(text):
        eq = text.find("=", pos)
        if eq < 0:
            raise StateSyntaxError(text, pos, "expected key=value")
        key = text[pos:eq].strip()
        if key not in _KEYS[kind]:
            raise StateSyntaxError(text, pos, f"unknown key {key!r} for {kind}")
        if key in values:
            raise StateSyntaxError(text, pos, f"duplicate key {key!r}")
        vpos = eq + 1
        if _KEYS[kind][key] is list:
            if not text.startswith("[", vpos):
                raise StateSyntaxError(text, vpos, "expected '[' to open the coefficient list")
            close = text.find("]", vpos)
            if close < 0:
                raise StateSyntaxError(text, len(text), "unterminated coefficient list")
            items, cursor = [], vpos + 1
            for tok in text[vpos + 1:close].split(","):
                if not tok.strip():
                    raise StateSyntaxError(text, cursor, "empty coefficient")
                items.append(_parse_complex(tok, text, cursor))
                cursor += len(tok) + 1
            values[key] = items
            end = close + 1
        else:
            comma = text.find(",", vpos)
            end = len(text) if comma < 0 else comma
            values[key] = _parse_scalar(_KEYS[kind][key], text[vpos:end].strip(), text, vpos)
        positions[key] = vpos
        if end < len(text):
            if text[end] != ",":
                raise StateSyntaxError(text, end, "expected ','")
            end += 1
            if end == len(text):
                raise StateSyntaxError(text, end, "trailing ','")
        pos = end
    missing = _REQUIRED[kind] - values.keys()
    if missing:
        raise StateSyntaxError(text, len(text), f"missing key(s) {', '.join(sorted(missing))}")
    try:
        if kind == "sho":
            return st.SHO(values["n"], values.get("alpha", 1.0))
        if kind == "cauchy":
            return st.CauchyLorentz(values.get("x0", 0.0), values.get("gamma", 1.0))
        if kind == "student":
            return st.StudentT(values["dof"])
        return st.HermiteSuperposition(tuple(values["c"]))
    except ValueError as exc:
        # point at the value the constructor rejected
        if kind == "sho":
            bad = "alpha" if "alpha" in str(exc) else "n"
        else:
            bad = {"cauchy": "gamma", "student": "dof", "hermite": "c"}[kind]
        raise StateSyntaxError(text, positions.get(bad, len(head) + 1), str(exc)) from None


def format_state(state: st.StateSpec) -> str:
    """Inverse of :func:`parse_state`."""
    if isinstance(state, st.SHO):
        return f"sho:n={state.n},alpha={state.alpha!r}"
    if isinstance(state, st.CauchyLorentz):
        return f"cauchy:x0={state.x0!r},gamma={state.gamma!r}"
    if isinstance(state, st.StudentT):
        return f"student:dof={state.dof}"
    parts = [f"{c.real!r}{'-' if c.imag < 0 else '+'}{abs(c.imag)!r}i" for c in state.coeffs]
    return "hermite:c=[" + ",".join(parts) + "]"


# --- serialisation ---------------------------------------------------------

def to_jsonable(obj):
    """Plain-JSON view: numpy scalars/arrays unwrapped, non-finite floats -> null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def result_to_dict(result: reciprocity.ReciprocityResult, state_text: Optional[str] = None) -> dict:
    out = result.as_dict()
    if state_text is not None:
        out["state"] = state_text
    return out


def result_from_dict(data: dict) -> reciprocity.ReciprocityResult:
    """Rebuild a result from its JSON form (a null product means divergent)."""
    product = data["product_tilde"]
    return reciprocity.ReciprocityResult(
        float(data["eta_x"]), float(data["eta_p"]),
        math.inf if product is None else float(product),
        bool(data["divergent"]), data.get("diagnostics", {}))


def write_csv(path: Path, header, rows, units: str = PRODUCT_UNITS) -> None:
    """RFC-4180 CSV (CRLF line ends) preceded by one units comment row."""
    with open(path, "w", newline="") as fh:
        fh.write(units + "\r\n")
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def read_csv(path: Path):
    """Return ``(header, rows)`` of a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _gnuplot_stub(path: Path, csv_name: str, xlabel: str, ylabel: str, logx: bool = False) -> None:
    lines = ["set datafile separator ','",
             f"set xlabel '{xlabel}'",
             f"set ylabel '{ylabel}'"]
    if logx:
        lines.append("set logscale x")
    lines.append(f"plot '{csv_name}' using 1:2 skip 2 with linespoints notitle")
    path.write_text("\n".join(lines) + "\n")


# --- manifest ------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: Optional[int]
    tool_version: str = __version__
    started_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())
    outputs: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION
    status: str = "running"
    error: Optional[str] = None

    def write(self, directory: Path) -> Path:
        path = directory / f"{self.command.replace('-', '_')}.manifest.json"
        path.write_text(dumps(asdict(self)))
        return path


# --- commands -----------------------------------------------------------------

def _estimator_kwargs(args) -> dict:
    """Lipschitz-estimator settings given on the command line."""
    names = {"grid_points": "n_grid", "top_k": "top_k", "rtol": "rtol",
             "divergence_factor": "divergence_factor"}
    return {key: getattr(args, opt) for opt, key in names.items()
            if getattr(args, opt, None) is not None}


def _emit(manifest: RunManifest, path: Path) -> Path:
    manifest.outputs.append(str(path))
    return path


def cmd_sho_scan(args, out: Path, manifest: RunManifest) -> None:
    if not 0 <= args.n_max <= 64:
        raise UsageError(f"--n-max must be in [0, 64], got {args.n_max}")
    if not args.alpha > 0:
        raise UsageError(f"--alpha must be positive, got {args.alpha}")
    rows = reciprocity.sho_level_scan(args.n_max, args.alpha, workers=args.threads,
                                      **_estimator_kwargs(args))
    csv_path = _emit(manifest, out / "sho_scan.csv")
    write_csv(csv_path, ["level", "product_tilde"], rows)
    if args.gnuplot_stub:
        _gnuplot_stub(_emit(manifest, out / "sho_scan.gp"), csv_path.name, "level", "product (1/hbar)")
    for level, value in rows:
        print(f"{level},{value!r}")


def cmd_student_scan(args, out: Path, manifest: RunManifest) -> None:
    if any(d < 3 for d in args.dof):
        raise UsageError("--dof values must be >= 3 (dof = 2 has a divergent product)")
    rows = reciprocity.student_dof_scan(args.dof, workers=args.threads, **_estimator_kwargs(args))
    csv_path = _emit(manifest, out / "student_scan.csv")
    write_csv(csv_path, ["dof", "product_tilde"], rows)
    if args.gnuplot_stub:
        _gnuplot_stub(_emit(manifest, out / "student_scan.gp"), csv_path.name, "dof", "product (1/hbar)")
    for dof, value in rows:
        print(f"{dof},{value!r}")


_DIVERGENT_STATES = {"cauchy": st.CauchyLorentz(), "student2": st.StudentT(2)}


def cmd_divergence(args, out: Path, manifest: RunManifest) -> None:
    if not 0 < args.eps_min < args.eps_max:
        raise UsageError(f"need 0 < --eps-min < --eps-max, got {args.eps_min} and {args.eps_max}")
    if args.points < 4:
        raise UsageError("--points must be >= 4")
    state = _DIVERGENT_STATES[args.state]
    model = args.model or ("linear" if args.state == "cauchy" else "quadratic")
    eps = lipschitz.default_epsilons(args.eps_min, args.eps_max, args.points)
    samples, fit = reciprocity.divergence_sweep(state, eps, model, **_estimator_kwargs(args))
    stem = f"divergence_{args.state}"
    csv_path = _emit(manifest, out / f"{stem}.csv")
    write_csv(csv_path, ["epsilon", "lc"], samples, units=LC_UNITS)
    _emit(manifest, out / f"{stem}.json").write_text(dumps(fit.as_dict()))
    if args.gnuplot_stub:
        _gnuplot_stub(_emit(manifest, out / f"{stem}.gp"), csv_path.name, "epsilon", "LC", logx=True)
    print(dumps(fit.as_dict()), end="")


def cmd_haar_min(args, out: Path, manifest: RunManifest) -> None:
    if not 2 <= args.degree <= 8:
        raise UsageError(f"--degree must be in [2, 8], got {args.degree}")
    n = args.samples if args.samples is not None else 3200
    if n < 100:
        raise UsageError(f"--samples must be >= 100, got {n}")
    if not 0 <= args.seed < 2 ** 64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    config = haar.SearchConfig(args.degree, n, args.seed, args.field, args.auto)
    if args.objective == "uncertainty":
        result = haar.minimize_uncertainty(config, polish=args.polish)
    else:
        result = haar.minimize_reciprocity(config, polish=args.polish)
    stem = f"haar_{args.objective}_deg{args.degree}"
    text = result.to_json(config)
    _emit(manifest, out / f"{stem}.json").write_text(text + "\n")
    csv_path = _emit(manifest, out / f"{stem}_history.csv")
    units = PRODUCT_UNITS if args.objective == "reciprocity" else "# units: hbar"
    write_csv(csv_path, ["N", "running_min"], result.history, units=units)
    if args.gnuplot_stub:
        _gnuplot_stub(_emit(manifest, out / f"{stem}.gp"), csv_path.name, "N", "running minimum",
                      logx=True)
    print(text)


def cmd_state_report(args, out: Path, manifest: RunManifest) -> None:
    state = parse_state(args.state)
    result = reciprocity.reciprocity_product(state, **_estimator_kwargs(args))
    data = result_to_dict(result, args.state)
    try:
        data["uncertainty_product"] = reciprocity.uncertainty_product(state)
    except reciprocity.InfiniteVarianceError:
        data["uncertainty_product"] = None
    data["units"] = "product_tilde in 1/hbar; uncertainty_product in hbar (hbar = 1)"
    text = dumps(data)
    _emit(manifest, out / "state_report.json").write_text(text)
    print(text, end="")


# --- parser -----------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _estimator_options() -> argparse.ArgumentParser:
    est = argparse.ArgumentParser(add_help=False)
    g = est.add_argument_group("Lipschitz estimator")
    g.add_argument("--grid-points", type=_positive_int, default=None,
                   help=f"coarse scan points per interval (default {lipschitz.DEFAULT_GRID})")
    g.add_argument("--top-k", type=_positive_int, default=None,
                   help=f"local maxima refined (default {lipschitz.DEFAULT_TOP_K})")
    g.add_argument("--rtol", type=_positive_float, default=None,
                   help=f"relative tolerance of the bisection (default {lipschitz.DEFAULT_RTOL:g})")
    g.add_argument("--divergence-factor", type=_positive_float, default=None,
                   help=f"growth ratio marking a divergence (default {lipschitz.DIVERGENCE_FACTOR:g})")
    return est


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default: ${ENV_OUTPUT_DIR} or '.')")
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="worker threads for scans")
    est = _estimator_options()
    common.add_argument("--gnuplot-stub", action="store_true",
                        help="also write a minimal gnuplot script for the CSV")

    parser = argparse.ArgumentParser(prog="qrecip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sho-scan", parents=[common, est], help="product for oscillator levels 0..n")
    p.add_argument("--n-max", type=int, default=60)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(handler=cmd_sho_scan)

    p = sub.add_parser("student-scan", parents=[common, est], help="product for Student-t states")
    p.add_argument("--dof", type=int, nargs="+", default=[3, 4, 5, 10, 30, 100])
    p.set_defaults(handler=cmd_student_scan)

    p = sub.add_parser("divergence", parents=[common, est],
                       help="momentum LC on |p| >= eps and its divergence fit")
    p.add_argument("--state", choices=sorted(_DIVERGENT_STATES), required=True)
    p.add_argument("--eps-min", type=float, default=1e-3)
    p.add_argument("--eps-max", type=float, default=1e-1)
    p.add_argument("--points", type=int, default=24)
    p.add_argument("--model", choices=["linear", "quadratic"], default=None)
    p.set_defaults(handler=cmd_divergence)

    p = sub.add_parser("haar-min", parents=[common], help="random search over Hermite superpositions")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--samples", type=int, default=None, help="number of draws (default 3200)")
    p.add_argument("--auto", action="store_true", help="double the draws until the minimum settles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--field", choices=["complex", "real"], default="complex")
    p.add_argument("--objective", choices=["reciprocity", "uncertainty"], default="reciprocity")
    p.add_argument("--polish", action="store_true", help="local refinement of the best draw")
    p.set_defaults(handler=cmd_haar_min)

    p = sub.add_parser("state-report", parents=[common, est], help="full result for one state")
    p.add_argument("--state", required=True,
                   help="sho:n=<int>,alpha=<float> | cauchy:x0=<float>,gamma=<float> | "
                        "student:dof=<int> | hermite:c=[<re>+<im>i,...]")
    p.set_defaults(handler=cmd_state_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for bad flags
        return int(exc.code or 0)

    out = args.out or Path(os.environ.get(ENV_OUTPUT_DIR, "."))
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "command")}
    params["argv"] = list(sys.argv[1:] if argv is None else argv)
    manifest = RunManifest(args.command, params, getattr(args, "seed", None))
    code = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        args.handler(args, out, manifest)
        manifest.status = "ok"
    except UsageError as exc:
        print(f"qrecip {args.command}: error: {exc}", file=sys.stderr)
        manifest.status, manifest.error, code = "usage_error", str(exc), 2
    except Exception as exc:  # any estimator failure is a computational failure
        print(f"qrecip {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        manifest.status, manifest.error, code = "failed", f"{type(exc).__name__}: {exc}", 1
    finally:
        try:
            path = manifest.write(out)
            print(f"manifest: {path}", file=sys.stderr)
        except OSError as exc:
            print(f"qrecip: could not write manifest: {exc}", file=sys.stderr)
            code = code or 1
    return code


if __name__ == "__main__":
    sys.exit(main())
