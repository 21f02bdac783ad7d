"""Command-line driver.

Tabular outputs are CSV preceded by one ``# {json}`` line that echoes the
version, the full configuration and its hash.  The only time-dependent data
(wall time) goes to a run header on stderr, so primary outputs are
byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Optional, Sequence

import numpy as np

from . import __version__, acceptance, circle, repcount, singular, subbase
from .core import RegVarFn, SequenceSpec, as_fraction, thresholds
from .errors import DomainError, PSBasesError
from .sequences import count, generate

EXIT_USAGE = 64


@dataclass
class ExperimentConfig:
    """Everything needed to replay a run; numeric flags are kept as their decimal text."""

    command: str
    options: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    output: Optional[str] = None
    parallelism: int = 1

    def to_json(self) -> str:
        return json.dumps(
            {"command": self.command, "options": self.options, "seeds": self.seeds,
             "output": self.output, "parallelism": self.parallelism},
            sort_keys=True, separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        return cls(d["command"], d["options"], d["seeds"], d["output"], d["parallelism"])

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# flag parsing


def _decimal(text: str) -> float:
    try:
        return float(Decimal(text))
    except InvalidOperation:
        raise DomainError(f"not a decimal number: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(Decimal(text).to_integral_exact()) if "e" in text.lower() else int(text)
    except (ValueError, InvalidOperation):
        raise DomainError(f"not an integer: {text!r}") from None


def _int_list(text: str) -> list[int]:
    """'1,2,5' or '1..20' (inclusive)."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(_int(lo), _int(hi) + 1))
    return [_int(t) for t in text.split(",") if t.strip()]


def _spec(o: dict) -> SequenceSpec:
    return SequenceSpec(as_fraction(o["c"]), _int(o["k"]), bool(o.get("primes", False)))


# ---------------------------------------------------------------------------
# output


def _csv_text(cfg: ExperimentConfig, header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    meta = {"version": __version__, "config": json.loads(cfg.to_json()), "hash": cfg.hash}
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_text(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {"version": __version__, "config": json.loads(cfg.to_json()), "hash": cfg.hash, **payload}
    return json.dumps(doc, sort_keys=True, indent=1, default=acceptance._json_default) + "\n"


def _emit(cfg: ExperimentConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_params(cfg):
    o = cfg.options
    row = thresholds(_int(o["k"]), as_fraction(o["c"]))
    _emit(cfg, json.dumps(row.to_dict(), sort_keys=True) + "\n")


def cmd_gen(cfg):
    gs = generate(_spec(cfg.options), _int(cfg.options["xmax"]))
    _emit(cfg, "".join(f"{v}\n" for v in gs.elements))


def cmd_count(cfg):
    _emit(cfg, f"{count(_spec(cfg.options), _int(cfg.options['x']))}\n")


def cmd_repcount(cfg):
    o = cfg.options
    spec, h, N = _spec(o), _int(o["h"]), _int(o["N"])
    if o.get("omega") is None:
        if o.get("log_weight"):
            raise DomainError("--log-weight needs --omega")
        vals = repcount.rep_function(generate(spec, N).elements, h, N).values
        rows = ((n, int(v)) for n, v in enumerate(vals))
        _emit(cfg, _csv_text(cfg, ["n", "r"], rows))
    else:
        series = repcount.weighted_indicator(spec, N, _decimal(o["omega"]), bool(o.get("log_weight")))
        vals, err = repcount.weighted_rep_values(series, h, N)
        rows = ((n, float(v)) for n, v in enumerate(vals))
        _emit(cfg, _csv_text(cfg, ["n", "value"], rows))


def cmd_hua(cfg):
    o = cfg.options
    spec, h = _spec(o), _int(o["h"])
    rows = []
    for x in _int_list(o["xgrid"]):
        m = repcount.hua_moment(spec, h, x)
        ref = float(x) ** (2 * h * spec.beta - 1)
        rows.append((x, m, m / ref))
    _emit(cfg, _csv_text(cfg, ["x", "moment", "ratio"], rows))


def _n_values(text: str) -> np.ndarray:
    if ":" in text:
        lo, hi = text.split(":")
        return np.arange(_int(lo), _int(hi) + 1)
    return np.array(_int_list(text))


def cmd_singular(cfg):
    o = cfg.options
    k, h = _int(o["k"]), _int(o["h"])
    params = singular.SingularSeriesParams(k, h, _int(o["Q"]), bool(o.get("prime")))
    ns = _n_values(o["n"])
    vals = singular.singular_series_many(params, ns)
    rows = ((int(n), float(v), singular.congruence_admissible(k, h, int(n))) for n, v in zip(ns, vals))
    _emit(cfg, _csv_text(cfg, ["n", "value", "admissible"], rows))


def cmd_circle(cfg):
    o = cfg.options
    mode = o["mode"]
    gf = _int(o.get("grid_factor") or "8")
    rows = []
    if mode == "verify-quadrature":
        spec, h, omega = _spec(o), _int(o.get("h") or "2"), _decimal(o["omega"] or "0")
        for N in _int_list(o["N"]):
            series = repcount.weighted_indicator(spec, N, omega)
            M = _int(o["M"]) if o.get("M") else None
            q = circle.quadrature_rep_sum(series, h, N, M)
            d = repcount.weighted_rep_sum(spec, h, omega, N)
            rows.append((N, q, d, q / d if d else float("nan")))
        header = ["N", "measured", "referenceScale", "ratio"]
    elif mode in ("major", "minor"):
        spec = _spec(o)
        omega = _decimal(o["omega"] or "0.2")
        nu = _decimal(o["nu"] or "0.1")
        for N in _int_list(o["N"]):
            if mode == "major":
                r = circle.major_arc_error(spec, omega, N, nu, gf)
                rows.append((N, r.sup_error, r.bound, r.ratio))
            else:
                r = circle.minor_arc_sup(spec, omega, N, nu, gf, _int(o.get("h") or "5"))
                rows.append((N, r.sup, r.scale, r.normalized))
        header = ["N", "measured", "referenceScale", "ratio"]
    else:
        k, c = _int(o["k"]), as_fraction(o["c"])
        for x in _int_list(o["x"]):
            M = _int(o["M"]) if o.get("M") else None
            r = circle.transfer_residual(k, c, x, M, bool(o.get("log_weight")))
            rows.append((x, r.sup_residual, r.reference_scale, r.ratio))
        header = ["x", "measured", "referenceScale", "ratio"]
    _emit(cfg, _csv_text(cfg, header, rows))


def _plan(o: dict, lam: Optional[float] = None, seed: int = 0) -> subbase.SamplePlan:
    lam = _decimal(o["lambda"]) if lam is None else lam
    return subbase.SamplePlan(_spec(o), RegVarFn.parse(o["F"]), _int(o["h"]), lam, _int(o["xmax"]), seed)


def _windows(o: dict) -> list[tuple[int, int]]:
    return subbase.dyadic_windows(_int(o.get("window_lo") or "100000"), _int(o["xmax"]))


def cmd_subbase(cfg):
    o = cfg.options
    mode = o["mode"]
    seeds = cfg.seeds or [0]
    if mode == "calibrate" or (mode == "verify" and o.get("lambda") is None):
        cal = subbase.calibrate(_plan(o, 1.0), _windows(o))
        lam = cal.lam
        cal_info = {"lambda": cal.lam, "median_ratio": cal.median_ratio, "expected_window_means": cal.window_means}
    else:
        lam = _decimal(o["lambda"])
        cal_info = None
    if mode == "calibrate":
        _emit(cfg, _json_text(cfg, {"plan": _plan(o, lam).to_dict(), "calibration": cal_info}))
        return
    plans = [_plan(o, lam, s) for s in seeds]
    threads = cfg.parallelism
    if mode == "sample":
        results = [subbase.sample_subbase(p, threads) for p in plans]
        runs = [{"plan": p.to_dict(), "result": r.to_dict()} for p, r in zip(plans, results)]
        _emit(cfg, _json_text(cfg, {"runs": runs}))
        return
    windows = _windows(o)
    target = subbase.plan_target(plans[0], max(hi for _, hi in windows))

    def cell(p):
        res = subbase.sample_subbase(p, 1)
        K = singular.cap_K(p.spec.k)
        mod = (K, p.h % K) if p.spec.primes else None
        rep = subbase.verify_subbase(res.A, p.h, target, windows, mod)
        return {"plan": p.to_dict(), "size": res.size, "expected_size": res.expected_size, "report": rep.to_dict()}

    with ThreadPoolExecutor(max(1, threads)) as pool:
        runs = list(pool.map(cell, plans))
    passes = sum(r["report"]["globalPass"] for r in runs)
    _emit(cfg, _json_text(cfg, {"calibration": cal_info, "runs": runs, "globalPassCount": passes}))


def cmd_accept(cfg):
    prof = cfg.options.get("profile") or "quick"
    only = _int_list(cfg.options["only"]) if cfg.options.get("only") else None
    rep = acceptance.run_suite(prof, only, progress=lambda line: print(line, file=sys.stderr, flush=True))
    if cfg.output:
        _emit(cfg, json.dumps(rep.to_dict(), sort_keys=True, indent=1, default=acceptance._json_default) + "\n")
    else:
        sys.stdout.write("\n".join(rep.lines()) + "\n")
    return 0 if rep.all_passed else 1


COMMANDS = {
    "params": cmd_params, "gen": cmd_gen, "count": cmd_count, "repcount": cmd_repcount,
    "hua": cmd_hua, "singular": cmd_singular, "circle": cmd_circle, "subbase": cmd_subbase,
    "accept": cmd_accept,
}


# ---------------------------------------------------------------------------
# argument parser


def _spec_flags(p, c_default="1.5", k_default="1"):
    p.add_argument("--c", default=c_default)
    p.add_argument("--k", default=k_default)
    p.add_argument("--primes", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)

    ap = _Parser(prog="psbases", description="Thin subbases of Piatetski-Shapiro sequences: desk-scale experiments.")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("params", parents=[common], help="threshold table row as JSON")
    p.add_argument("action", choices=["dump"])
    p.add_argument("--k", default="1")
    p.add_argument("--c", default="1.5")

    p = sub.add_parser("gen", parents=[common], help="ground-set elements, one per line")
    _spec_flags(p)
    p.add_argument("--xmax", required=True)

    p = sub.add_parser("count", parents=[common], help="number of elements up to x")
    _spec_flags(p)
    p.add_argument("--x", required=True)

    p = sub.add_parser("repcount", parents=[common], help="representation counts or weighted sums")
    _spec_flags(p)
    p.add_argument("--h", required=True)
    p.add_argument("--N", required=True)
    p.add_argument("--omega")
    p.add_argument("--log-weight", action="store_true")

    p = sub.add_parser("hua", parents=[common], help="Hua-type second moments")
    _spec_flags(p)
    p.add_argument("--h", required=True)
    p.add_argument("--xgrid", required=True)

    p = sub.add_parser("singular", parents=[common], help="truncated singular series")
    p.add_argument("--k", required=True)
    p.add_argument("--h", required=True)
    p.add_argument("--Q", default="500")
    p.add_argument("--prime", action="store_true")
    p.add_argument("--n", required=True, help="integer, comma list, or lo:hi")

    p = sub.add_parser("circle", parents=[common], help="exponential-sum diagnostics")
    p.add_argument("mode", choices=["verify-quadrature", "major", "minor", "transfer"])
    _spec_flags(p)
    p.add_argument("--h")
    p.add_argument("--N", default="1000,10000,100000")
    p.add_argument("--x", default="1000,10000,100000")
    p.add_argument("--omega")
    p.add_argument("--nu")
    p.add_argument("--grid-factor")
    p.add_argument("--M")
    p.add_argument("--log-weight", action="store_true")

    p = sub.add_parser("subbase", parents=[common], help="random thin subbases")
    p.add_argument("mode", choices=["sample", "calibrate", "verify"])
    _spec_flags(p)
    p.add_argument("--F", default="1,0.5,0,0")
    p.add_argument("--h", default="5")
    p.add_argument("--xmax", default="1000000")
    p.add_argument("--lambda", dest="lambda_")
    p.add_argument("--seed", default=None)
    p.add_argument("--seeds", default=None, help="comma list or lo..hi")
    p.add_argument("--window-lo", default="100000")

    p = sub.add_parser("accept", parents=[common], help="acceptance suite")
    p.add_argument("--profile", choices=["quick", "full"], default="quick")
    p.add_argument("--only", help="comma list of criterion ids")
    return ap


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    d = vars(ns).copy()
    command = d.pop("command")
    threads = d.pop("threads", 1)
    out = d.pop("out", None)
    if command == "params":
        d.pop("action")
    seeds = []
    if command == "subbase":
        if d.get("seeds"):
            seeds = _int_list(d["seeds"])
        elif d.get("seed") is not None:
            seeds = [_int(d["seed"])]
        d.pop("seeds"), d.pop("seed")
        d["lambda"] = d.pop("lambda_")
    return ExperimentConfig(command, d, seeds, out, int(threads))


def run(cfg: ExperimentConfig) -> int:
    repcount.set_workers(cfg.parallelism)
    t0 = time.perf_counter()
    rc = COMMANDS[cfg.command](cfg) or 0
    header = {"version": __version__, "hash": cfg.hash, "wall_time": round(time.perf_counter() - t0, 3)}
    print(json.dumps(header), file=sys.stderr)
    return rc


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return run(config_from_args(ns))
    except PSBasesError as e:
        print(f"psbases: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
