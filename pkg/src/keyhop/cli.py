"""Command-line interface.

Subcommands: simulate (run a protocol and export its trace), analyze
(coalition secrecy verdicts, enumeration, truth-table cross-check), rate
(rate-versus-distance curves and anchor checks), attack (demonstrate a
concrete key recovery), wire (run the protocol over localhost TCP).

Exit codes: 0 success; 1 a requested attack does not exist; 2 protocol
abort on the wire; 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import analysis, ratemodel, wire
from .bits import SymbolicExpr
from .keyplan import Variant, cm_report, plan_keys
from .protocol import run, trace_json, trace_text
from .topology import (
    Topology,
    build_chain,
    build_multipath,
    build_reach_chain,
    build_ring6,
    parse_topology_config,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract reserves 2 for protocol
    # aborts, so usage problems become exit 3.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shape", choices=["ring6", "chain", "multipath", "reach"])
    p.add_argument("--m", type=int, help="intermediaries on a chain")
    p.add_argument("--paths", help="comma-separated intermediary counts, one per path")
    p.add_argument("--t", type=int, help="relay reach in links minus one")
    p.add_argument("--link-km", type=float, default=100.0)
    p.add_argument("--config", help="topology config file (key = value lines)")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--n", type=int, default=16, help="key length in bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=".")


def _build_topology(args: argparse.Namespace) -> Topology:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            return parse_topology_config(fh.read())
    if not args.shape:
        raise ValueError("give --shape or --config")
    if args.shape == "ring6":
        return build_ring6(args.link_km)
    if args.shape == "chain":
        if args.m is None:
            raise ValueError("--shape chain needs --m")
        return build_chain(args.m, args.link_km)
    if args.shape == "reach":
        if args.m is None:
            raise ValueError("--shape reach needs --m")
        return build_reach_chain(args.m, args.t if args.t is not None else 2, args.link_km)
    if not args.paths:
        raise ValueError("--shape multipath needs --paths")
    lengths = tuple(int(v) for v in args.paths.split(","))
    return build_multipath(lengths, args.link_km, args.t if args.t is not None else 1)


_DEFAULT_VARIANT = {
    "ring6": Variant.RING_V2,
    "chain": Variant.CHAIN_M,
    "reach": Variant.REACH_T,
    "multipath": Variant.MULTIPATH,
}


def _pick_variant(args: argparse.Namespace, topo: Topology) -> Variant:
    if args.variant:
        return Variant(args.variant)
    return _DEFAULT_VARIANT[topo.shape.value]


def _out_path(args: argparse.Namespace, name: str) -> str:
    os.makedirs(args.output_dir, exist_ok=True)
    return os.path.join(args.output_dir, name)


def _parse_coalition(trace, text: str) -> analysis.Coalition:
    labels = [part.strip() for part in text.split(",") if part.strip()]
    return analysis.Coalition(frozenset(trace.topology.node(lab) for lab in labels))


def cmd_simulate(args: argparse.Namespace) -> int:
    topo = _build_topology(args)
    variant = _pick_variant(args, topo)
    trace = run(topo, variant, args.n, random.Random(args.seed))
    text = trace_text(trace)
    with open(_out_path(args, "trace.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(_out_path(args, "trace.json"), "w", encoding="utf-8") as fh:
        fh.write(trace_json(trace))
    print(text, end="")
    agree = "match" if trace.output_a == trace.output_b else "MISMATCH"
    print(f"K(A) == K(B): {agree} ({trace.output_a.to_hex()})")
    if args.hardware:
        print("hardware:")
        for line in cm_report(plan_keys(topo, variant)).lines():
            print(f"  {line}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    if args.grid:
        rows = analysis.collusion_grid(
            _parse_int_list(args.grid_paths), _parse_int_list(args.grid_reach), args.link_km
        )
        csv_text = analysis.grid_csv(rows)
        path = _out_path(args, "collusion_grid.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(csv_text, end="")
        print(f"wrote {path}")
        return 0
    topo = _build_topology(args)
    variant = _pick_variant(args, topo)
    trace = run(topo, variant, args.n, random.Random(args.seed))
    target = analysis.final_key_expr(trace)
    if args.coalition is not None:
        coal = _parse_coalition(trace, args.coalition)
        verdict = analysis.is_recoverable(analysis.view_of(trace, coal), target)
        print(f"coalition {coal.describe()}: {verdict.status.value}")
        if verdict.recovery_labels:
            print("  recovery: " + " + ".join(verdict.recovery_labels))
        if args.oracle:
            check = run(topo, variant, 1, random.Random(args.seed))
            oracle = analysis.brute_force_secrecy(check, coal, analysis.final_key_expr(check))
            agree = "agree" if oracle is verdict.status else "DISAGREE"
            print(f"  truth-table oracle: {oracle.value} ({agree})")
            if oracle is not verdict.status:
                return 1
        return 0
    minimal = analysis.min_breaking_coalitions(trace, target)
    if minimal:
        smallest = min(len(c.members) for c in minimal)
        print(f"minimal breaking coalitions (size {smallest} minimum):")
        for coal in minimal:
            print(f"  {coal.describe()} ({len(coal.members)} nodes)")
    else:
        print("no intermediary coalition breaks this run")
    rows = analysis.coalition_rows(trace, target)
    path = _out_path(args, "coalitions.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(analysis.coalition_report_csv(rows))
    print(f"wrote {path} ({len(rows)} coalitions)")
    return 0


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_rate(args: argparse.Namespace) -> int:
    params = ratemodel.RateParams.calibrated(args.alpha, args.threshold)
    if args.params:
        with open(args.params, encoding="utf-8") as fh:
            params = ratemodel.parse_rate_config(fh.read())
    families = (
        [f.strip() for f in args.families.split(",")] if args.families else list(ratemodel.DEFAULT_FAMILIES)
    )
    distances = [float(d) for d in range(args.from_km, args.to_km + 1, args.step_km)]
    rows = ratemodel.emit_curves(distances, families, params)
    path = _out_path(args, "rates.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ratemodel.curves_csv(rows))
    print(f"wrote {path} ({len(rows)} points)")

    checks = [
        ("single relay link at 300 km = 1000 bps", ratemodel.rate_tf(300, params), 1000.0),
        ("single relay link at 500 km close to 6 bps", ratemodel.rate_tf(500, params), 6.0),
        ("scheme m=2 at 600 km close to 100 bps", ratemodel.rate_scheme(600, 2, params), 100.0),
        ("scheme m=2 at 400 km close to 1000 bps", ratemodel.rate_scheme(400, 2, params), 1000.0),
    ]
    for label, got, want in checks:
        factor = max(got / want, want / got)
        verdict = "PASS" if factor <= 2.5 else "FAIL"
        print(f"{verdict} {label}: {got:.6g} bps (reference {want:g}, factor {factor:.3g})")
    null600 = ratemodel.is_virtually_null(ratemodel.rate_tf(600, params), params)
    print(f"{'PASS' if null600 else 'FAIL'} single relay link at 600 km at or below threshold")
    if args.max_range_m is not None:
        reach = ratemodel.max_range(args.max_range_m, params)
        print(
            f"max range with m={args.max_range_m} at {params.threshold_bps:g} bps"
            f" threshold: {reach:.6g} km"
        )
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    if args.active:
        worst, per = analysis.max_active_attack_leakage()
        for name, bits in sorted(per.items()):
            print(f"substitution {name}: leakage {bits:.6g} bits")
        print(f"max leakage over deterministic substitutions: {worst:.6g} bits")
        return 0
    topo = _build_topology(args)
    variant = _pick_variant(args, topo)
    trace = run(topo, variant, args.n, random.Random(args.seed))
    coal = (
        _parse_coalition(trace, args.coalition)
        if args.coalition is not None
        else analysis.Coalition(frozenset())
    )
    view = analysis.view_of(trace, coal)
    target = analysis.final_key_expr(trace)
    verdict = analysis.is_recoverable(view, target)
    if verdict.status is analysis.Status.SECURE:
        print(f"coalition {coal.describe()}: no attack exists against the final key")
        return 1
    print(f"coalition {coal.describe()} recovers the final key:")
    for nid in trace.nonce_ids:
        sub = analysis.is_recoverable(view, SymbolicExpr.of(nid))
        if sub.status is analysis.Status.BROKEN and sub.recovery_labels:
            print(f"  {nid.name} = " + " + ".join(sub.recovery_labels))
    assert verdict.recovery_labels is not None
    print("  final key = " + " + ".join(verdict.recovery_labels))
    got = analysis.recover_bits(trace, verdict)
    match = "matches" if got == trace.output_a else "DOES NOT MATCH"
    print(f"  recovered {got.to_hex()}, {match} the honest endpoints' key")
    return 0


def cmd_wire(args: argparse.Namespace) -> int:
    topo = _build_topology(args)
    variant = _pick_variant(args, topo)
    os.makedirs(args.output_dir, exist_ok=True)
    result = wire.orchestrate(
        topo,
        variant,
        args.n,
        args.seed,
        args.base_port,
        args.output_dir,
        tamper_index=args.tamper,
        timeout=args.timeout,
    )
    print(result.report)
    if args.transcripts:
        for line in result.transcript():
            print(line)
    if result.code == 0:
        assert result.output_a is not None
        print(f"K(A) == K(B): match ({result.output_a.to_hex()})")
    return result.code


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="keyhop", description=__doc__.split("\n\n")[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[], help="run a protocol and export the trace")
    _add_common(p_sim)
    p_sim.add_argument("--hardware", action="store_true", help="print per-node hardware needs")
    p_sim.set_defaults(fn=cmd_simulate)

    p_an = sub.add_parser("analyze", help="coalition secrecy analysis")
    _add_common(p_an)
    p_an.add_argument("--coalition", help="comma-separated node labels")
    p_an.add_argument("--oracle", action="store_true", help="cross-check with the truth-table sweep")
    p_an.add_argument("--grid", action="store_true", help="minimum colluders over paths x reach")
    p_an.add_argument("--grid-paths", default="1,2,3")
    p_an.add_argument("--grid-reach", default="1,2,3")
    p_an.set_defaults(fn=cmd_analyze)

    p_rate = sub.add_parser("rate", help="rate-versus-distance curves and anchors")
    p_rate.add_argument("--alpha", type=float, default=0.2, help="fiber loss in dB/km")
    p_rate.add_argument("--threshold", type=float, default=1.0, help="usefulness floor in bps")
    p_rate.add_argument("--params", help="rate config file overriding the calibration")
    p_rate.add_argument("--families", help="comma-separated curve families")
    p_rate.add_argument("--from-km", type=int, default=0)
    p_rate.add_argument("--to-km", type=int, default=2200)
    p_rate.add_argument("--step-km", type=int, default=10)
    p_rate.add_argument("--max-range-m", type=int, help="print the reach of the m-relay scheme")
    p_rate.add_argument("--output-dir", default=".")
    p_rate.set_defaults(fn=cmd_rate)

    p_atk = sub.add_parser("attack", help="demonstrate a concrete key recovery")
    _add_common(p_atk)
    p_atk.add_argument("--coalition", help="comma-separated node labels (default: none corrupted)")
    p_atk.add_argument("--active", action="store_true", help="active substitution leakage table")
    p_atk.set_defaults(fn=cmd_attack)

    p_wire = sub.add_parser("wire", help="run the protocol over localhost TCP")
    _add_common(p_wire)
    p_wire.add_argument("--base-port", type=int, default=9000)
    p_wire.add_argument("--tamper", type=int, help="flip a bit in this hop's frame (test hook)")
    p_wire.add_argument("--timeout", type=float, default=10.0)
    p_wire.add_argument("--transcripts", action="store_true", help="print per-node transcripts")
    p_wire.set_defaults(fn=cmd_wire)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"keyhop: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
