"""Command-line front end.

Every command writes a whitespace table whose first lines are ``#``
comments echoing the resolved configuration.  Output is assembled in
memory and written only after all work succeeds, so a failed run never
leaves a partial file behind.

Exit status: 0 on success, 2 for usage errors, 3 for domain errors such
as a ring count that does not divide the order.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import bench_detector
from .channel import ChannelParams
from .constellation import ConstellationSpec, build_constellation, format_constellation, validate
from .detectors import DetectorKind
from .errors import SapskError, WrongFamily
from .montecarlo import SimPlan, default_workers, simulate_curve, write_curve, write_manifest
from .sep import SepModelParams, optimize_gamma, ring_error_prob_literal, sep_approx

EXIT_USAGE = 2
EXIT_DOMAIN = 3


class _Usage(Exception):
    pass


def parse_grid(text: str) -> tuple:
    """``start:step:stop`` (inclusive), a comma list, or a single value, in dB."""
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + i * step, 10) for i in range(n))
        vals = tuple(float(x) for x in text.split(","))
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR grid {text!r}; expected start:step:stop") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a finite non-negative number, got {text!r}")
    return v


def _int_list(text: str) -> list:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError(f"expected orders >= 2, got {text!r}")
    return vals


def _detector_list(text: str) -> list:
    try:
        return [DetectorKind(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown detector in {text!r}") from None


def _env_int(name: str, default: int) -> int:
    v = os.environ.get(name)
    return int(v) if v else default


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sapsk", description="SAPSK constellations, detectors and SEP tools")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def out_arg(sp):
        sp.add_argument("--out", default="-", help="output path ('-' for stdout)")

    c = sub.add_parser("constellation", help="export a constellation table")
    c.add_argument("--family", choices=["sapsk", "pqam", "qam"], required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--gamma", type=int, default=1)
    c.add_argument("--es", type=float, default=1.0)
    out_arg(c)

    s = sub.add_parser("simulate", help="Monte Carlo SEP curve")
    s.add_argument("--family", choices=["sapsk", "pqam", "qam"], required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--gamma", type=int, default=1)
    s.add_argument("--detector", choices=[k.value for k in DetectorKind], required=True)
    s.add_argument("--sigma-phi2", type=_nonneg_float, default=0.0)
    s.add_argument("--snr", type=parse_grid, default=parse_grid("30:2:80"))
    s.add_argument("--seed", type=int, default=_env_int("SAPSK_SEED", 0))
    s.add_argument("--max-trials", type=_positive_int, default=20_000_000)
    s.add_argument("--target-errors", type=_positive_int, default=200)
    s.add_argument("--confidence", type=float, default=0.95)
    s.add_argument("--batch-size", type=_positive_int, default=1 << 16)
    s.add_argument("--candidates", choices=["pair", "quad", "literal"], default="pair")
    s.add_argument("--workers", type=_positive_int, default=None, help="default: $SAPSK_WORKERS or all cores")
    s.add_argument("--extended", action="store_true", help="add CI and count columns")
    s.add_argument("--manifest", default=None, help="run-manifest path (default: <out>.manifest)")
    out_arg(s)

    a = sub.add_parser("analyze", help="closed-form SAPSK SEP curve")
    a.add_argument("--m", type=int, required=True)
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=int)
    g.add_argument("--gamma-from", help="table of 'snr_db gamma_opt' rows, as written by optimize")
    a.add_argument("--sigma-phi2", type=_nonneg_float, default=0.0)
    a.add_argument("--snr", type=parse_grid, default=parse_grid("30:2:80"))
    a.add_argument("--n-rects", type=_positive_int, default=10)
    a.add_argument("--variant", choices=["derived", "literal"], default="derived")
    out_arg(a)

    o = sub.add_parser("optimize", help="SEP-minimising ring count per SNR")
    o.add_argument("--m", type=int, required=True)
    o.add_argument("--sigma-phi2", type=_nonneg_float, default=0.0)
    o.add_argument("--snr", type=parse_grid, default=parse_grid("30:2:80"))
    o.add_argument("--n-rects", type=_positive_int, default=10)
    out_arg(o)

    b = sub.add_parser("bench", help="detector latency table")
    b.add_argument("--m", type=_int_list, default=[1024, 16384], help="comma-separated orders")
    b.add_argument("--detector", type=_detector_list, default=[DetectorKind.SAPSK_FAST, DetectorKind.GAPD])
    b.add_argument("--trials", type=_positive_int, required=True)
    b.add_argument("--per-ring", type=_positive_int, default=8, help="symbols per ring; Γ = M / per-ring")
    b.add_argument("--snr", type=float, default=50.0)
    b.add_argument("--sigma-phi2", type=_nonneg_float, default=1e-4)
    b.add_argument("--seed", type=int, default=_env_int("SAPSK_SEED", 0))
    b.add_argument("--repeats", type=_positive_int, default=3)
    out_arg(b)
    return p


# execution details that cannot change the numbers; kept out of the header so
# the same run writes the same bytes wherever it goes and however many workers
_NOT_ECHOED = {"command", "out", "manifest", "workers"}


def _header(args: argparse.Namespace) -> str:
    lines = [f"sapsk {__version__} {args.command}"]
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED:
            continue
        if isinstance(v, (list, tuple)):
            v = ",".join(getattr(x, "value", str(x)) for x in v)
        lines.append(f"{k} = {v}")
    return "".join(f"# {line}\n" for line in lines)


def _rows(rows) -> str:
    return "".join(" ".join(str(x) for x in r) + "\n" for r in rows)


def _g(x: float) -> str:
    return f"{x:.10g}"


def cmd_constellation(args) -> str:
    c = build_constellation(ConstellationSpec(args.family, args.m, args.gamma, args.es))
    report = validate(c)
    text = _header(args)
    text += "".join(f"# check {line}\n" for line in str(report).splitlines())
    text += "# q p amplitude phase in_phase quadrature\n"
    return text + format_constellation(c)


def cmd_simulate(args) -> tuple[str, SimPlan]:
    if not 0 < args.confidence < 1:
        raise _Usage("--confidence must lie in (0, 1)")
    if args.max_trials < args.target_errors:
        raise _Usage("--max-trials must be >= --target-errors")
    spec = ConstellationSpec(args.family, args.m, args.gamma)
    if args.detector == DetectorKind.SAPSK_FAST.value and spec.family.value != "sapsk":
        raise WrongFamily("the fast detector needs --family sapsk")
    if args.workers is None:
        args.workers = default_workers()
    plan = SimPlan(
        spec,
        args.detector,
        args.sigma_phi2,
        args.snr,
        max_trials=args.max_trials,
        target_errors=args.target_errors,
        confidence_level=args.confidence,
        seed=args.seed,
        batch_size=args.batch_size,
        candidates=args.candidates,
    )
    curve = simulate_curve(plan, workers=args.workers)
    buf = io.StringIO()
    write_curve(curve, buf, extended=args.extended)
    return _header(args) + buf.getvalue(), plan


def _read_gamma_table(path: str) -> dict:
    table = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            snr, g = line.split()[:2]
            table[round(float(snr), 10)] = int(g)
    return table


def cmd_analyze(args) -> str:
    fn = sep_approx if args.variant == "derived" else _literal_sep
    if args.gamma_from:
        table = _read_gamma_table(args.gamma_from)
        missing = [s for s in args.snr if round(s, 10) not in table]
        if missing:
            raise _Usage(f"--gamma-from has no entry for SNR {missing[0]} dB")
        gammas = [table[round(s, 10)] for s in args.snr]
    else:
        gammas = [args.gamma] * len(args.snr)
    rows = []
    for s, G in zip(args.snr, gammas):
        p = SepModelParams.from_db(args.m, G, s, args.sigma_phi2, rect_count=args.n_rects)
        rows.append((_g(s), _g(fn(p))) + ((G,) if args.gamma_from else ()))
    cols = "# snr_db sep" + (" gamma" if args.gamma_from else "") + "\n"
    return _header(args) + cols + _rows(rows)


def _literal_sep(p: SepModelParams) -> float:
    return float(np.mean(ring_error_prob_literal(p, np.arange(1, p.gamma + 1))))


def cmd_optimize(args) -> str:
    if args.m < 2:
        raise _Usage("--m must be >= 2")
    rows = []
    for s in args.snr:
        res = optimize_gamma(args.m, s, args.sigma_phi2, args.n_rects)
        rows.append((_g(s), res.gamma_opt, _g(res.sep_opt)))
    return _header(args) + "# snr_db gamma_opt sep_opt\n" + _rows(rows)


def cmd_bench(args) -> str:
    for M in args.m:
        if M % args.per_ring:
            raise _Usage(f"--per-ring {args.per_ring} does not divide M = {M}")
    params = ChannelParams(args.snr, args.sigma_phi2, seed=args.seed)
    rows = []
    for kind in args.detector:
        for M in args.m:
            r = bench_detector(kind, M, M // args.per_ring, args.trials, params, repeats=args.repeats)
            rows.append(
                (kind.value, M, r.gamma, r.trials, f"{r.ns_per_symbol:.1f}", f"{r.symbols_per_second:.4g}", _g(r.ops_per_symbol))
            )
    return _header(args) + "# detector M gamma trials ns_per_symbol symbols_per_s ops_per_symbol\n" + _rows(rows)


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "constellation":
            _emit(cmd_constellation(args), args.out)
        elif args.command == "simulate":
            text, plan = cmd_simulate(args)
            _emit(text, args.out)
            manifest = args.manifest or (None if args.out == "-" else args.out + ".manifest")
            if manifest:
                write_manifest(plan, manifest, {"workers": args.workers, "output": args.out})
        elif args.command == "analyze":
            _emit(cmd_analyze(args), args.out)
        elif args.command == "optimize":
            _emit(cmd_optimize(args), args.out)
        elif args.command == "bench":
            _emit(cmd_bench(args), args.out)
    except _Usage as e:
        parser.error(str(e))
    except (SapskError, ValueError) as e:
        print(f"sapsk: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(f"sapsk: error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())
