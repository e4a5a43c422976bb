"""``loadopf`` command line.

Exit status is 0 when every run, cell or segment succeeded, 1 when any
solve failed (failed sweep/gap cells are still reported) and 2 on bad
input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import caseio
from .exceptions import GridError, ParseError, CaseValidationError
from .experiments import FREEZE_ALL, FREEZE_VOLTAGES, experiment_gap, experiment_sweep
from .fitting import DEFAULT_MIN_LEN, KINDS, segment_fit
from .loads import classify, model_to_params
from .opf import OPFOptions, solve_opf
from .powerflow import PFOptions, solve_pf

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


@dataclass
class TableReport:
    """Plain report: a JSON document plus its CSV table."""

    doc: dict
    header: list
    rows: list

    def as_dict(self) -> dict:
        return self.doc

    def table(self):
        return self.header, self.rows


def _bus_rows(bus_ids, v):
    return [[b, float(x.real), float(x.imag), float(abs(x))] for b, x in zip(bus_ids, v)]


def cmd_pf(args) -> tuple[object, int]:
    case = caseio.load_case(args.case)
    sol = solve_pf(case, PFOptions(tol=args.tol, max_iter=args.max_iter))
    return TableReport(sol.as_dict(), ["bus", "v_r", "v_i", "vm"], _bus_rows(sol.bus_ids, sol.v)), EXIT_OK


def cmd_opf(args):
    case = caseio.load_case(args.case)
    sol = solve_opf(case, OPFOptions(kkt_tol=args.kkt_tol))
    x = sol.x
    rows = [row + [sol.bound_activity["vm"][row[0]]] for row in _bus_rows(x.bus_ids, x.v)]
    return TableReport(sol.as_dict(), ["bus", "v_r", "v_i", "vm", "bound"], rows), EXIT_OK


def cmd_fit(args):
    series = caseio.load_measurements(args.measurements, args.bus)
    seg, fit = segment_fit(series, args.segments, args.model, args.min_len)
    doc = {
        "bus": series.bus,
        "kind": fit.kind,
        "boundaries": list(seg.boundaries),
        "average_rms": fit.total_rms,
        "sse": fit.total_sse,
        "segments": [
            {"start": s.start, "stop": s.stop, "params": model_to_params(s.params), "rms": s.rms} for s in fit.segments
        ],
    }
    keys = list(model_to_params(fit.segments[0].params))
    header = ["segment", "start", "stop", "rms", *keys]
    rows = [
        [k + 1, s.start, s.stop, s.rms, *model_to_params(s.params).values()] for k, s in enumerate(fit.segments)
    ]
    return TableReport(doc, header, rows), EXIT_OK


def _parse_voltage(text: str):
    try:
        v_r, v_i = (float(p) for p in text.split(","))
    except ValueError:
        raise ParseError(f"--at-voltage expects 'vr,vi', got {text!r}") from None
    return v_r, v_i


def cmd_classify(args):
    case = caseio.load_case(args.case)
    v = _parse_voltage(args.at_voltage)
    loads = []
    rows = []
    for ld in case.loads:
        rep = classify(ld.model, v)
        loads.append({"bus": ld.bus, "model": ld.model.kind, **rep.as_dict()})
        rows.append([ld.bus, ld.model.kind, rep.p_class, rep.q_class, rep.joint, max(rep.p_margins), max(rep.q_margins)])
    header = ["bus", "model", "p_class", "q_class", "joint", "p_margin", "q_margin"]
    return TableReport({"at": list(v), "loads": loads}, header, rows), EXIT_OK


def cmd_sweep(args):
    seg_case = caseio.load_segmented(args.segmented)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    missing = [k for k in kinds if k not in seg_case.families]
    if missing:
        raise ParseError(f"segmented case has no families {missing}")
    report = experiment_sweep(seg_case, kinds, OPFOptions(kkt_tol=args.kkt_tol))
    return report, EXIT_FAILED if report.errors else EXIT_OK


def cmd_gap(args):
    seg_case = caseio.load_segmented(args.segmented)
    for k in (args.kind_a, args.kind_b):
        if k not in seg_case.families:
            raise ParseError(f"segmented case has no {k!r} family")
    report = experiment_gap(seg_case, args.kind_a, args.kind_b, OPFOptions(kkt_tol=args.kkt_tol), freeze=args.freeze)
    return report, EXIT_FAILED if report.errors else EXIT_OK


def _add_output_flags(p, default):
    p.add_argument("--output", choices=("json", "csv"), default=default, help="report format")
    p.add_argument("--out", default=default, metavar="PATH", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadopf", description="Load-model-aware power flow and OPF tools.")
    parser.add_argument("--output", choices=("json", "csv"), default="json", help="report format")
    parser.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pf", help="solve a power flow")
    p.add_argument("--case", required=True)
    p.add_argument("--tol", type=float, default=PFOptions.tol)
    p.add_argument("--max-iter", type=int, default=PFOptions.max_iter)
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("opf", help="solve an optimal power flow")
    p.add_argument("--case", required=True)
    p.add_argument("--kkt-tol", type=float, default=OPFOptions.kkt_tol)
    p.set_defaults(func=cmd_opf)

    p = sub.add_parser("fit", help="segment and fit a measurement series")
    p.add_argument("--measurements", required=True)
    p.add_argument("--model", choices=KINDS, required=True)
    p.add_argument("--segments", type=int, default=1)
    p.add_argument("--min-len", type=int, default=DEFAULT_MIN_LEN)
    p.add_argument("--bus", type=int, help="bus id (default: digits in the file name)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="classify every load in a case")
    p.add_argument("--case", required=True)
    p.add_argument("--at-voltage", default="1,0", metavar="VR,VI")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="OPF for every (segment, kind)")
    p.add_argument("--segmented", required=True)
    p.add_argument("--kinds", default="pq,zip,big")
    p.add_argument("--kkt-tol", type=float, default=OPFOptions.kkt_tol)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gap", help="extra generation when kind A setpoints meet kind B loads")
    p.add_argument("--segmented", required=True)
    p.add_argument("--from", dest="kind_a", default="pq")
    p.add_argument("--to", dest="kind_b", default="zip")
    p.add_argument("--freeze", choices=(FREEZE_ALL, FREEZE_VOLTAGES), default=FREEZE_ALL)
    p.add_argument("--kkt-tol", type=float, default=OPFOptions.kkt_tol)
    p.set_defaults(func=cmd_gap)

    for p in sub.choices.values():
        # Also accept the global flags after the subcommand.
        _add_output_flags(p, argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        report, code = args.func(args)
    except (ParseError, CaseValidationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GridError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    data = caseio.emit_report(report, args.output)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
