"""Command-line driver.

Every subcommand writes one JSON object (default) or a CSV table.  JSON
output carries ``params``, ``truncation``, ``deficit`` and ``units`` next to
the payload.  Exit status is 0 on success, 1 when a physics guard fires and 2
on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import oracle
from .analysis import coarse_grain, fluctuation_checks, smoothed_cdf_density
from .errors import QuenchError
from .fock import CouplingKind, PhysicalParams, Truncation, choose_truncation
from .linear import (char_function_linear, delta_f_linear, moments_linear,
                     work_distribution_linear)
from .quadratic import (char_function_quadratic, delta_f_quadratic, moments_quadratic,
                        work_distribution_quadratic)

UNITS = {"energy": "hbar*omega_m", "work": "hbar*omega_m", "u": "1/omega_m",
         "beta": "1/(hbar*omega_m)", "frequency": "omega_m"}
SUBCOMMANDS = ("chi", "dist", "moments", "free-energy", "check", "coarse-grain", "sweep", "oracle")
# flags that accept a range in the sweep subcommand
RANGED = ("coupling", "omega_c", "beta", "displacement", "nc", "nm")


class UsageError(Exception):
    pass


def _number(text, name):
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--{name.replace('_', '-')} expects a number, got {text!r}") from None


def parse_range(text):
    """``start:stop:count`` (linear) or ``log:start:stop:count`` (geometric)."""
    parts = text.split(":")
    log = parts[0] == "log"
    if log:
        parts = parts[1:]
    if len(parts) != 3:
        raise UsageError(f"range must be start:stop:count or log:start:stop:count, got {text!r}")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1:
        raise UsageError("range count must be at least 1")
    if log:
        if start <= 0 or stop <= 0:
            raise UsageError("log range needs positive bounds")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def build_parser():
    parser = argparse.ArgumentParser(prog="qwork", description="Work statistics of sudden optomechanical quenches.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--kind", choices=[k.value for k in CouplingKind], default="linear")
        p.add_argument("--g", "--kappa", "--coupling", dest="coupling", default="0.1",
                       help="coupling g (linear) or kappa (quadratic) in units of omega_m")
        p.add_argument("--omega-c", dest="omega_c", default="500")
        p.add_argument("--beta", default="1e-3")
        p.add_argument("--E", "--displacement", dest="displacement", default="0")
        p.add_argument("--nc", default=None, help="cavity occupation; overrides --omega-c")
        p.add_argument("--nm", default=None, help="mechanical occupation; overrides --beta")
        p.add_argument("--tail-tol", dest="tail_tol", type=float, default=1e-12)
        p.add_argument("--n-max", dest="n_max", type=int, default=None)
        p.add_argument("--k-max", dest="k_max", type=int, default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("-o", "--output", default=None, help="output file (stdout when omitted)")
        if name in ("chi", "oracle"):
            p.add_argument("--u-start", type=float, default=0.0)
            p.add_argument("--u-stop", type=float, default=4 * math.pi)
            p.add_argument("--u-count", type=int, default=512)
        if name == "coarse-grain":
            p.add_argument("--method", choices=("kernel", "cdf"), default="kernel")
            p.add_argument("--kernel", choices=("gaussian", "lorentzian"), default="gaussian")
            p.add_argument("--width", type=float, default=0.5)
            p.add_argument("--spacing", type=float, default=None)
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
    return parser


def make_params(values):
    """PhysicalParams from a dict of scalar flag values (occupations take precedence)."""
    beta = values["beta"]
    if values.get("nm") is not None:
        if values["nm"] <= 0:
            raise ValueError("--nm must be positive")
        beta = math.log1p(1.0 / values["nm"])
    omega_c = values["omega_c"]
    if values.get("nc") is not None:
        if values["nc"] <= 0:
            raise ValueError("--nc must be positive")
        omega_c = math.log1p(1.0 / values["nc"]) / beta
    return PhysicalParams(omega_c=omega_c, coupling=values["coupling"], kind=values["kind"],
                          beta=beta, displacement=values["displacement"])


def make_truncation(params, args, require_convergent, resolve_phonons=True):
    if args.n_max is not None and args.k_max is not None:
        return Truncation(args.n_max, args.k_max, args.tail_tol)
    auto = choose_truncation(params, args.tail_tol, require_convergent=require_convergent,
                             resolve_phonons=resolve_phonons)
    n_max = auto.n_max if args.n_max is None else args.n_max
    k_max = auto.k_max if args.k_max is None else args.k_max
    return Truncation(n_max, k_max, args.tail_tol, min(auto.k_init, k_max))


def _scalar_values(args):
    values = {"kind": args.kind}
    ranged = []
    for name in RANGED:
        raw = getattr(args, name)
        if raw is None:
            values[name] = None
        elif ":" in raw:
            ranged.append(name)
            values[name] = raw
        else:
            values[name] = _number(raw, name)
    return values, ranged


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    return _finite(obj)


def _linear(params):
    return params.kind is CouplingKind.LINEAR


def _summary_row(values, args):
    """One sweep or check point: params, truncation and summary."""
    params = make_params(values)
    trunc = make_truncation(params, args, require_convergent=True)
    summary = fluctuation_checks(params, trunc)
    return params, trunc, summary


def _sweep_point(payload):
    values, args = payload
    params, trunc, summary = _summary_row(values, args)
    return params.to_dict(), trunc.to_dict(), summary.to_dict()


def run_command(args):
    """Compute the output document for parsed arguments (no I/O)."""
    values, ranged = _scalar_values(args)
    cmd = args.command
    if getattr(args, "width", 1.0) <= 0:
        raise UsageError("--width must be positive")
    if getattr(args, "u_count", 1) < 1:
        raise UsageError("--u-count must be at least 1")
    if cmd == "sweep":
        if len(ranged) != 1:
            raise UsageError("sweep needs exactly one ranged flag (start:stop:count)")
        flag = ranged[0]
        grid = parse_range(values[flag])
        points = [({**values, flag: float(v)}, args) for v in grid]
        for point, _ in points:
            make_params(point)          # validate every point before computing
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_sweep_point, points))
        else:
            results = [_sweep_point(p) for p in points]
        rows = [{"value": float(v), "params": r[0], "truncation": r[1], "summary": r[2]}
                for v, r in zip(grid, results)]
        return {"sweep_flag": flag, "units": UNITS, "rows": rows}
    if ranged:
        raise UsageError(f"ranges are only accepted by the sweep subcommand (got --{ranged[0]})")

    params = make_params(values)
    needs_convergence = cmd in ("free-energy", "check")
    trunc = make_truncation(params, args, needs_convergence, resolve_phonons=cmd != "free-energy")
    doc = {"params": params.to_dict(), "truncation": trunc.to_dict(), "deficit": None,
           "units": UNITS}
    linear = _linear(params)
    if cmd == "chi":
        u = np.linspace(args.u_start, args.u_stop, args.u_count)
        sample = (char_function_linear if linear else char_function_quadratic)(params, trunc, u)
        doc["chi"] = sample.rows()
    elif cmd == "dist":
        dist = (work_distribution_linear if linear else work_distribution_quadratic)(params, trunc)
        doc["deficit"] = dist.deficit
        doc["atoms"] = dist.to_rows()
    elif cmd == "moments":
        mom = moments_linear(params, trunc) if linear else moments_quadratic(params)
        doc["moments"] = mom._asdict()
    elif cmd == "free-energy":
        df = delta_f_linear(params, trunc) if linear else delta_f_quadratic(params, trunc)
        doc["free_energy"] = {"delta_f": df}
    elif cmd == "check":
        summary = fluctuation_checks(params, trunc)
        doc["deficit"] = summary.deficit
        doc["summary"] = summary.to_dict()
    elif cmd == "coarse-grain":
        dist = (work_distribution_linear if linear else work_distribution_quadratic)(params, trunc)
        if args.method == "cdf":
            dens = smoothed_cdf_density(dist, args.width, args.spacing)
        else:
            dens = coarse_grain(dist, args.kernel, args.width, spacing=args.spacing)
        doc["deficit"] = dist.deficit
        doc["density"] = dens.to_rows()
        doc["density_info"] = {"kernel": dens.kernel, "width": dens.width, **dens.metadata}
    elif cmd == "oracle":
        dist = oracle.two_point_measurement(params, trunc)
        u = np.linspace(args.u_start, args.u_stop, args.u_count)
        chi = np.atleast_1d(oracle.chi_by_trace(u, params, trunc))
        doc["deficit"] = dist.deficit
        doc["atoms"] = dist.to_rows()
        doc["chi"] = [[float(a), float(c.real), float(c.imag)] for a, c in zip(u, chi)]
    return doc


def _csv_text(doc):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if "rows" in doc:
        fields = list(doc["rows"][0]["summary"]) if doc["rows"] else []
        writer.writerow([doc["sweep_flag"], *fields])
        for row in doc["rows"]:
            writer.writerow([repr(row["value"]), *(_csv_cell(row["summary"][f]) for f in fields)])
    elif "atoms" in doc:
        writer.writerow(["work", "probability"])
        writer.writerows([[repr(a), repr(b)] for a, b in doc["atoms"]])
    elif "chi" in doc:
        writer.writerow(["u", "re", "im"])
        writer.writerows([[repr(x) for x in r] for r in doc["chi"]])
    elif "density" in doc:
        writer.writerow(["work", "density"])
        writer.writerows([[repr(a), repr(b)] for a, b in doc["density"]])
    else:
        body = doc.get("summary") or doc.get("moments") or doc.get("free_energy")
        writer.writerow(list(body))
        writer.writerow([_csv_cell(v) for v in body.values()])
    return buf.getvalue()


def _csv_cell(value):
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def render(doc, fmt):
    if fmt == "csv":
        return _csv_text(doc)
    return json.dumps(_clean(doc), indent=1, allow_nan=False) + "\n"


def write_atomic(path, text):
    """Write through a temporary file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qwork-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(argv=None):
    """Entry point; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        doc = run_command(args)
        text = render(doc, args.format)
    except (UsageError, ValueError) as exc:
        print(f"qwork: usage error: {exc}", file=sys.stderr)
        return 2
    except QuenchError as exc:
        print(f"qwork: {exc}", file=sys.stderr)
        return 1
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
