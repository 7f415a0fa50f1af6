"""Command-line entry point: ``orderstat <subcommand> ...``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import marginals as mg
from . import montecarlo as mc
from . import thresholds as th
from . import verify as vf
from .errors import OrderStatError
from .models import model_from_config
from .reports import BoundReport, reports_to_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise OrderStatError(f"cannot read {path!r}: {exc}") from exc


def _load_model(path: str):
    return model_from_config(_load_json(path))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def _emit_reports(reports: list[BoundReport], fmt: str, out: str | None) -> int:
    if fmt == "json":
        _emit(_dump([r.to_dict() for r in reports]), out)
    else:
        _emit(reports_to_csv(reports), out)
    return EXIT_FAIL if vf.suite_failed(reports) else EXIT_OK


def _marginals_for(args):
    if args.model:
        return _load_model(args.model).marginals()
    if args.marginal:
        m = mg.marginal_from_config(_load_json(args.marginal))
        return [m] * args.n
    raise OrderStatError("threshold needs --model or --marginal with --n")


def cmd_threshold(args) -> int:
    margs = _marginals_for(args)
    kind = th.TSTAR if args.kind == "tstar" else th.T
    results = [th.solve(th.ThresholdQuery(tuple(margs), lvl, kind)).to_dict() for lvl in args.level]
    _emit(_dump(results[0] if len(results) == 1 else results), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    model = _load_model(args.model)
    stat = mc.parse_stat(args.stat)
    est = mc.estimate_mean(model, stat, args.samples, args.seed, stream_id=args.stream, threads=args.threads)
    record = dict(est.to_dict(), model=model.describe(), model_hash=model.key(), stream=args.stream)
    if args.csv:
        path = Path(args.csv)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", encoding="utf-8", newline="") as fh:
            if new:
                fh.write("model_hash,stat,mean,stderr,count,seed\n")
            fh.write(f"{model.key()},{stat.stat_id},{est.mean:.12g},{est.stderr:.12g},{est.count},{est.seed}\n")
    _emit(_dump(record), args.out)
    return EXIT_OK


def _suites(values: Sequence[str]) -> list[str]:
    out = []
    for v in values or ["all"]:
        out.extend(s for s in v.split(",") if s)
    return out


def cmd_verify(args) -> int:
    grid = vf.load_grid(args.grid)
    cal = vf.Calibration.load(args.calibration) if args.calibration else None
    reports = vf.run_suite(grid, _suites(args.suite), args.samples, args.seed, args.threads, cal)
    return _emit_reports(reports, args.format, args.out)


def cmd_identity(args) -> int:
    triples = None
    if args.model:
        if args.k is None or args.t is None:
            raise OrderStatError("identity with --model needs --k and --t")
        triples = [(_load_model(args.model), args.k, args.t)]
    reports = vf.identity_suite(args.samples, args.seed, triples)
    return _emit_reports(reports, args.format, args.out)


def cmd_lemmas(args) -> int:
    reports = vf.lemma_grid(points=args.points)
    return _emit_reports(reports, args.format, args.out)


def cmd_trend(args) -> int:
    reports = vf.counterexample_trend(args.k, range(args.min_exp, args.max_exp + 1), args.samples,
                                      args.seed, args.threads)
    return _emit_reports(reports, args.format, args.out)


def cmd_calibrate(args) -> int:
    cal = vf.calibrate(args.seed, args.samples, args.widen, args.threads)
    _emit(_dump(cal), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orderstat", description="Order statistics of random vectors: thresholds, "
                                              "Monte Carlo estimates and bound checks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, samples=20_000, fmt=True):
        sp.add_argument("--samples", type=int, default=samples, help="Monte Carlo sample count")
        sp.add_argument("--seed", type=int, default=7)
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        sp.add_argument("--out", help="output file (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("threshold", help="compute t(k) or t*(p)")
    sp.add_argument("--model", help="model config JSON")
    sp.add_argument("--marginal", help="marginal config JSON (used with --n)")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--kind", choices=("t", "tstar"), required=True)
    sp.add_argument("--level", type=float, nargs="+", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("estimate", help="Monte Carlo mean of a statistic")
    sp.add_argument("--model", required=True)
    sp.add_argument("--stat", required=True, help="topk:K, kmax:K, kmin:K or supw:P")
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--csv", help="append a result row to this CSV file")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("verify", help="run bound-check suites over a grid")
    sp.add_argument("--suite", action="append", help=f"one of all,{','.join(vf.SUITES)} (repeatable)")
    sp.add_argument("--grid", default="default", help="'default' or a grid config JSON")
    sp.add_argument("--calibration", help="calibration JSON (default: bundled)")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("identity", help="layer-cake identity checks")
    sp.add_argument("--model")
    sp.add_argument("--k", type=int)
    sp.add_argument("--t", type=float)
    common(sp)
    sp.set_defaults(func=cmd_identity)

    sp = sub.add_parser("lemmas", help="analytic one-dimensional lemma grid")
    sp.add_argument("--points", type=int, default=100)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_lemmas)

    sp = sub.add_parser("trend", help="top-k ratio of the sign-shared Gaussian vector as n grows")
    sp.add_argument("--k", type=int, default=16)
    sp.add_argument("--min-exp", type=int, default=6)
    sp.add_argument("--max-exp", type=int, default=16)
    common(sp)
    sp.set_defaults(func=cmd_trend)

    sp = sub.add_parser("calibrate", help="regenerate calibration windows")
    sp.add_argument("--widen", type=float, default=2.0)
    common(sp, samples=50_000, fmt=False)
    sp.set_defaults(func=cmd_calibrate, seed=20261016)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except OrderStatError as exc:
        print(f"orderstat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
