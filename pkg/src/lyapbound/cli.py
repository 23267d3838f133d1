"""Command-line interface: ``lyapbound {spectrum,bound,hmm,eat-check,paper-examples}``.

Exit status is 0 on success, 1 on invalid input (or a failing example row),
and 2 when an iterative method stopped before meeting its tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from math import log

from . import __version__
from .bounds import (
    BoundReport,
    commutative_closed_form,
    convex_upper_fw,
    eat_verify,
    group_parametric_bounds,
    inverse_improved_bounds,
    jensen_sdp_upper,
    markov_bounds,
    nonasymptotic_bounds,
    rank_one_lower,
    rank_one_upper,
    semigroup_upper,
    trivial_bounds,
)
from .bounds.convex import FW_MAX_ITER, FW_TOL
from .bounds.rankone import RANK_ONE_TOL, RESTARTS
from .bounds.report import LOWER, UPPER
from .ensemble import NEG_INF, EnsembleError, MarkovEnsemble, load
from .hmm import EntropyRateReport, entropy_rate_bounds, load_model
from .spectrum import SpectrumEstimate, lyapunov_spectrum_qr, spectrum_via_exterior

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2
FORMATS = ("table", "json", "csv")
METHODS = ("trivial", "jensen", "convex", "rank1", "group:sl2", "group:diag", "commutative",
           "inverse", "markov", "nonasymptotic", "semigroup", "all")
ALL_ORDER = METHODS[:-1]


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    path: str | None = None
    method: str | None = None
    n: int = 10_000
    trials: int = 32
    tol: float = FW_TOL
    restarts: int = RESTARTS
    samples: int = 100_000
    seed: int = 42
    format: str = "table"
    bits: bool = False
    max_iter: int = FW_MAX_ITER
    belief_search: str = "vertices"
    out: str | None = None


# -- argument parsing -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return v


def _common(p, n_default=10_000):
    p.add_argument("--n", type=_positive_int, default=n_default, help="product length")
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--bits", action="store_true", help="show values in bits (display only)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lyapbound", description="Lyapunov exponent estimates and bounds")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("spectrum", help="Monte Carlo Lyapunov spectrum")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--method", choices=("qr", "exterior"), default="qr")
    p.add_argument("--trials", type=_positive_int, default=32)
    _common(p)

    p = sub.add_parser("bound", help="analytic bounds on gamma_1 and gamma_d")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--method", choices=METHODS, default="all")
    p.add_argument("--tol", type=_positive_float, default=FW_TOL)
    p.add_argument("--max-iter", type=_positive_int, default=FW_MAX_ITER)
    p.add_argument("--restarts", type=_positive_int, default=RESTARTS)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    _common(p)

    p = sub.add_parser("hmm", help="entropy-rate bracket for a hidden Markov model")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=_positive_int, default=32)
    p.add_argument("--tol", type=_positive_float, default=FW_TOL)
    p.add_argument("--restarts", type=_positive_int, default=RESTARTS)
    p.add_argument("--belief-search", choices=("vertices", "grid"), default="vertices")
    _common(p)

    p = sub.add_parser("eat-check", help="verify the finite-n entropy inequality by enumeration")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--tol", type=_positive_float, default=FW_TOL)
    _common(p, n_default=6)

    p = sub.add_parser("paper-examples", help="reproduce the worked examples")
    _common(p)
    return parser


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.subcommand is None:
        raise UsageError("lyapbound: a subcommand is required")
    return RunConfig(
        subcommand=ns.subcommand,
        path=getattr(ns, "ensemble", None) or getattr(ns, "model", None),
        method=getattr(ns, "method", None),
        n=ns.n,
        trials=getattr(ns, "trials", 32),
        tol=getattr(ns, "tol", FW_TOL),
        restarts=getattr(ns, "restarts", RESTARTS),
        samples=getattr(ns, "samples", 100_000),
        seed=ns.seed,
        format=ns.format,
        bits=ns.bits,
        max_iter=getattr(ns, "max_iter", FW_MAX_ITER),
        belief_search=getattr(ns, "belief_search", "vertices"),
        out=ns.out,
    )


# -- rendering --------------------------------------------------------------------


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt(x, bits=False) -> str:
    if x is None:
        return "-"
    if isinstance(x, str):
        return x
    x = float(x)
    if x <= NEG_INF:
        return "-inf"
    if x != x:
        return "nan"
    return f"{x / log(2) if bits else x:.6g}"


def _full(x, bits=False) -> str:
    """Full-precision cell for CSV output."""
    if x is None:
        return ""
    x = float(x)
    if x <= NEG_INF:
        return "-inf"
    return repr(x / log(2) if bits else x)


def render_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _units(bits):
    return "bits" if bits else "nats"


# -- subcommands ------------------------------------------------------------------


def _bound_reports(ens, method, cfg: RunConfig) -> list[BoundReport]:
    kw = {"samples": cfg.samples, "seed": cfg.seed}
    if method == "trivial":
        return list(trivial_bounds(ens, **kw))
    if method == "jensen":
        return [jensen_sdp_upper(ens, **kw)]
    if method == "convex":
        return [convex_upper_fw(ens, cfg.tol, cfg.max_iter, **kw)]
    if method == "rank1":
        return [rank_one_upper(ens, cfg.restarts, RANK_ONE_TOL, **kw),
                rank_one_lower(ens, cfg.restarts, RANK_ONE_TOL, **kw)]
    if method in ("group:sl2", "group:diag"):
        family = "sl2_real" if method == "group:sl2" else "diag_conjugacy"
        return list(group_parametric_bounds(ens, family, **kw))
    if method == "commutative":
        up, lo = commutative_closed_form(ens, **kw)
        return [BoundReport(up, UPPER, "commutative"), BoundReport(lo, LOWER, "commutative")]
    if method == "inverse":
        return list(inverse_improved_bounds(ens, cfg.tol, cfg.restarts, **kw))
    if method == "markov":
        r = markov_bounds(ens, cfg.n, cfg.tol, cfg.restarts)
        return [r.upper, r.lower]
    if method == "nonasymptotic":
        r = nonasymptotic_bounds(ens, cfg.n, cfg.tol, cfg.restarts, **kw)
        return [r.upper, r.lower]
    if method == "semigroup":
        return [semigroup_upper(ens, **kw)]
    raise UsageError(f"unknown method {method!r}")


def _markov_unsupported(method):
    return method != "markov"


def run_bound(cfg: RunConfig):
    ens = load(cfg.path)
    reports, skipped = [], []
    if cfg.method == "all":
        for m in ALL_ORDER:
            if isinstance(ens, MarkovEnsemble) and _markov_unsupported(m):
                skipped.append({"method": m, "reason": "needs an i.i.d. ensemble"})
                continue
            if m == "markov" and not isinstance(ens, MarkovEnsemble):
                skipped.append({"method": m, "reason": "needs a Markov ensemble"})
                continue
            try:
                reports.extend(_bound_reports(ens, m, cfg))
            except EnsembleError as exc:
                skipped.append({"method": m, "reason": str(exc)})
    else:
        if isinstance(ens, MarkovEnsemble) and _markov_unsupported(cfg.method):
            raise EnsembleError(f"method {cfg.method} needs an i.i.d. ensemble")
        reports = _bound_reports(ens, cfg.method, cfg)
    payload = {"command": "bound", "method": cfg.method, "units": "nats",
               "reports": [r.to_dict() for r in reports], "skipped": skipped}
    status = EXIT_NONCONVERGED if any(r.warning for r in reports) else EXIT_OK
    if cfg.format == "json":
        return dump_json(payload), status
    header = ["method", "side", f"value_{_units(cfg.bits)}", "stderr", "warning"]
    cell = fmt if cfg.format == "table" else _full
    rows = [[r.method, r.side, cell(r.value, cfg.bits), cell(r.diagnostics.get("stderr"), cfg.bits),
             r.warning or ""] for r in reports]
    if cfg.format == "csv":
        return render_csv(header, rows), status
    text = render_table(header, rows)
    for s in skipped:
        text += f"skipped {s['method']}: {s['reason']}\n"
    return text, status


def run_spectrum(cfg: RunConfig):
    ens = load(cfg.path)
    fn = spectrum_via_exterior if cfg.method == "exterior" else lyapunov_spectrum_qr
    est = fn(ens, n=cfg.n, trials=cfg.trials, seed=cfg.seed)
    if cfg.format == "json":
        payload = {"command": "spectrum", "method": cfg.method, "units": "nats",
                   "estimate": est.to_dict()}
        return dump_json(payload), EXIT_OK
    if cfg.format == "csv":
        return est.to_csv(), EXIT_OK
    rows = [[k + 1, fmt(g, cfg.bits), fmt(s, cfg.bits)] for k, (g, s) in enumerate(zip(est.gammas, est.stderr))]
    text = render_table(["k", f"gamma_{_units(cfg.bits)}", "stderr"], rows)
    text += f"n={est.n} trials={est.trials} seed={est.seed} " \
            f"rank_deficient_fraction={est.rank_deficient_fraction:.6g}\n"
    return text, EXIT_OK


def run_hmm(cfg: RunConfig):
    model = load_model(cfg.path)
    rep = entropy_rate_bounds(model, cfg.n, cfg.trials, cfg.seed, cfg.belief_search,
                              cfg.tol, cfg.restarts)
    if cfg.format == "json":
        return dump_json({"command": "hmm", "units": "nats", "report": rep.to_dict()}), EXIT_OK
    keys = ["lower", "mc_estimate", "mc_stderr", "upper", "width"]
    d = rep.to_dict()
    if cfg.format == "csv":
        return render_csv(keys + ["n", "trials", "seed"],
                          [[d[k] for k in keys] + [rep.n, rep.trials, rep.seed]]), EXIT_OK
    text = render_table(["quantity", _units(cfg.bits)], [[k, fmt(d[k], cfg.bits)] for k in keys])
    text += f"n={rep.n} trials={rep.trials} seed={rep.seed} " \
            f"beliefs={rep.metadata['beliefs']} ({rep.metadata['belief_search']})\n"
    return text, EXIT_OK


def run_eat(cfg: RunConfig):
    ens = load(cfg.path)
    res = eat_verify(ens, cfg.n, cfg.tol)
    keys = ["lhs", "rhs", "slack", "gap", "n", "words", "holds"]
    if cfg.format == "json":
        return dump_json({"command": "eat-check", "units": "nats", "result": res}), EXIT_OK
    if cfg.format == "csv":
        return render_csv(keys, [[res[k] for k in keys]]), EXIT_OK
    rows = [[k, fmt(res[k], cfg.bits) if isinstance(res[k], float) else res[k]] for k in keys]
    return render_table(["quantity", "value"], rows), EXIT_OK


def run_examples(cfg: RunConfig):
    from .reproduce import run_paper_examples

    rows = run_paper_examples(cfg.seed)
    status = EXIT_OK if all(r.passed for r in rows) else EXIT_INVALID
    if cfg.format == "json":
        return dump_json({"command": "paper-examples", "rows": [r.to_dict() for r in rows]}), status
    header = ["example", "quantity", "computed", "reference", "|delta|", "tol", "pass"]
    if cfg.format == "csv":
        return render_csv(header, [[r.example, r.quantity, r.computed, r.reference, r.delta, r.tol,
                                    r.passed] for r in rows]), status
    body = [[r.example, r.quantity, fmt(r.computed), fmt(r.reference), fmt(r.delta), fmt(r.tol),
             "pass" if r.passed else "FAIL"] for r in rows]
    text = render_table(header, body)
    text += f"{sum(r.passed for r in rows)}/{len(rows)} rows pass\n"
    return text, status


HANDLERS = {"spectrum": run_spectrum, "bound": run_bound, "hmm": run_hmm, "eat-check": run_eat,
            "paper-examples": run_examples}


def dispatch(cfg: RunConfig) -> int:
    if cfg.subcommand not in HANDLERS:
        raise UsageError(f"unknown subcommand {cfg.subcommand!r}")
    text, status = HANDLERS[cfg.subcommand](cfg)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


# -- parsing emitted reports --------------------------------------------------------


def parse_output(text: str) -> dict:
    """Rebuild report objects from JSON emitted by any subcommand."""
    obj = json.loads(text)
    cmd = obj.get("command")
    if cmd == "bound":
        obj["reports"] = [BoundReport.from_dict(r) for r in obj["reports"]]
    elif cmd == "spectrum":
        obj["estimate"] = SpectrumEstimate.from_dict(obj["estimate"])
    elif cmd == "hmm":
        obj["report"] = EntropyRateReport.from_dict(obj["report"])
    elif cmd not in ("eat-check", "paper-examples"):
        raise ValueError(f"unrecognised report {cmd!r}")
    return obj


def reemit(parsed: dict) -> str:
    """Inverse of :func:`parse_output`."""
    obj = dict(parsed)
    cmd = obj["command"]
    if cmd == "bound":
        obj["reports"] = [r.to_dict() for r in obj["reports"]]
    elif cmd == "spectrum":
        obj["estimate"] = obj["estimate"].to_dict()
    elif cmd == "hmm":
        obj["report"] = obj["report"].to_dict()
    return dump_json(obj)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return dispatch(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (EnsembleError, OSError, ValueError, KeyError) as exc:
        print(f"lyapbound: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
