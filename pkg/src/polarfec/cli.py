"""Command-line interface: construct, analyze, decode, sweep.

Exit codes: 0 on success, 1 for configuration errors (bad flags, bad
files), 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import channels, factor_graph as fg
from .concat import build_concat_spec, write_concat_spec
from .decoders import Quantizer, bp_decode, sc_decode
from .ldpc import DegreeDistribution, OTN_DEGREE_PAIR, construct_peg, tanner_girth, write_alist
from .polar import (
    awgn_reliability,
    bhattacharyya_bec,
    encode,
    read_spec,
    select_info_set,
    select_info_set_new_rule,
    write_spec,
)
from .sim import SweepConfig, run_sweep


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="polarfec", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="emit a polar CodeSpec, an LDPC alist, or a concat spec")
    c.add_argument("--kind", choices=["polar", "ldpc", "concat"], required=True)
    c.add_argument("-o", "--out", required=True, help="output file (polar/ldpc) or directory (concat)")
    c.add_argument("-n", type=int, help="polar depth; N = 2^n")
    c.add_argument("--rate", type=float, help="code rate")
    c.add_argument("--rule", choices=["standard", "new"], default="standard")
    c.add_argument("--leaf-threshold", type=int, default=256,
                   help="row-weight floor for --rule new (power of two)")
    c.add_argument("--channel", choices=["bec", "awgn"], default="bec")
    c.add_argument("--param", type=float, default=0.5, help="design eps (bec) or sigma (awgn)")
    c.add_argument("--budget", type=int, default=100_000, help="awgn construction frames")
    c.add_argument("--length", type=int, help="LDPC code length")
    c.add_argument("--regular", type=str, help="dv,dc for a regular LDPC (default: stock pair)")
    c.add_argument("--rp", type=float, default=0.979, help="concat: polar rate")
    c.add_argument("--rl", type=float, default=0.95, help="concat: LDPC rate")
    c.add_argument("--r-eff", type=float, default=0.93, help="concat: target effective rate")
    c.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("analyze", help="girth, stopping distance, size distributions, bounds")
    a.add_argument("--spec", help="polar CodeSpec json (enables stopping distance)")
    a.add_argument("-n", type=int, help="depth when no spec is given")
    a.add_argument("--enumerate", action="store_true",
                   help="exhaustive stopping-set report (n <= 4)")
    a.add_argument("--export-graph", help="write the factor-graph adjacency to this file")
    a.add_argument("--json", action="store_true", help="machine-readable output")

    d = sub.add_parser("decode", help="decode one random frame and dump the outcome")
    d.add_argument("--spec", required=True)
    d.add_argument("--decoder", choices=["sc", "bp"], default="bp")
    d.add_argument("--channel", choices=["bec", "awgn"], required=True)
    d.add_argument("--param", type=float, required=True, help="eps or sigma")
    d.add_argument("--max-iter", type=int, default=60)
    d.add_argument("--quantize", action="store_true")
    d.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sweep", help="Monte Carlo BER/BLER sweep")
    s.add_argument("--scheme", choices=["polar-sc", "polar-bp", "ldpc", "concat"], required=True)
    s.add_argument("--channel", choices=["bec", "awgn"], required=True)
    s.add_argument("--grid", required=True,
                   help="comma-separated eps values (bec) or Eb/N0 dB values (awgn)")
    s.add_argument("--spec", help="polar CodeSpec json")
    s.add_argument("--alist", help="LDPC alist")
    s.add_argument("--concat", help="concat spec json")
    s.add_argument("--min-error-blocks", type=int, default=100)
    s.add_argument("--max-frames", type=int, default=1_000_000)
    s.add_argument("--max-iter", type=int, default=60)
    s.add_argument("--quantize", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="output prefix; writes <out>.csv and <out>.jsonl")
    s.add_argument("--no-resume", action="store_true")
    return p


def _cmd_construct(args) -> int:
    if args.kind == "polar":
        if args.n is None or args.rate is None:
            raise SystemExit2("polar construction needs -n and --rate")
        K = round(args.rate * (1 << args.n))
        if args.channel == "bec":
            profile = bhattacharyya_bec(args.param, args.n)
        else:
            profile = awgn_reliability(args.param, args.n, budget=args.budget, seed=args.seed)
        if args.rule == "new":
            spec, shortfall = select_info_set_new_rule(profile, K, args.leaf_threshold)
            if shortfall:
                print(f"note: {shortfall} low-weight rows kept (candidate pool exhausted)",
                      file=sys.stderr)
        else:
            spec = select_info_set(profile, K)
        write_spec(args.out, spec, rule=args.rule, channel_param=args.param, seed=args.seed)
        print(f"wrote {args.out}: n={spec.n} N={spec.N} K={spec.K} rate={spec.rate:.4f} "
              f"stopping_distance={fg.stopping_distance(spec)}")
    elif args.kind == "ldpc":
        if args.length is None or args.rate is None:
            raise SystemExit2("ldpc construction needs --length and --rate")
        if args.regular:
            dv, dc = (int(x) for x in args.regular.split(","))
            dist = DegreeDistribution.regular(dv, dc)
        else:
            dist = OTN_DEGREE_PAIR
        H = construct_peg(dist, args.length, args.rate, seed=args.seed)
        write_alist(H, args.out)
        print(f"wrote {args.out}: N={H.n_cols} M={H.m} edges={H.num_edges} "
              f"girth={tanner_girth(H)}")
    else:
        if args.n is None:
            raise SystemExit2("concat construction needs -n")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cs = build_concat_spec(args.n, r_p=args.rp, r_l=args.rl,
                               target_r_eff=args.r_eff, seed=args.seed)
        write_concat_spec(out / "concat.json", cs, out / "polar.json", out / "ldpc.alist",
                          seed=args.seed)
        print(f"wrote {out}/concat.json: N={cs.polar.N} K={cs.k} N_l={cs.n_channel} "
              f"R_p={cs.r_p:.4f} R_l={cs.r_l:.4f} R_eff={cs.r_eff:.4f}")
    return 0


def _cmd_analyze(args) -> int:
    spec = None
    if args.spec:
        spec, _ = read_spec(args.spec)
        n = spec.n
    elif args.n is not None:
        n = args.n
    else:
        raise SystemExit2("analyze needs --spec or -n")
    g = fg.build_graph(n)
    a_sizes, leaf_sizes = fg.size_distributions(n)
    report = {
        "n": n,
        "N": 1 << n,
        "girth": None if math.isinf(fg.girth(g)) else int(fg.girth(g)),
        "tree_size_min": int(a_sizes.min()),
        "tree_size_max": int(a_sizes.max()),
        "leaf_size_histogram": {
            int(v): int(c) for v, c in zip(*np.unique(leaf_sizes, return_counts=True))
        },
    }
    if spec is not None:
        report["K"] = spec.K
        report["stopping_distance"] = fg.stopping_distance(spec)
    # low-weight-input counts against the entropy bound
    table = []
    for eps in (0.1, 0.2, 0.3, 0.4, 0.45):
        count = fg.low_weight_count(n, eps)
        h = -(eps * math.log2(eps) + (1 - eps) * math.log2(1 - eps))
        table.append({"eps": eps, "count": count, "bound": (1 << n) ** h})
    report["low_weight_table"] = table
    if args.enumerate:
        if n > 4:
            raise SystemExit2("--enumerate requires n <= 4")
        allowed = spec.info_set if spec is not None else tuple(range(1 << n))
        size, witness = fg.min_vss_size(g, allowed)
        report["enumeration"] = {
            "info_set": list(allowed),
            "min_vss_size": size,
            "witness_pattern": list(witness),
            "min_leaf_size": min(fg.leaf_size(i, n) for i in allowed),
            "per_subset": fg.mvss_report(g, allowed),
        }
    if args.export_graph:
        Path(args.export_graph).write_text(fg.graph_to_text(g))
        report["graph_export"] = args.export_graph
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for key, val in report.items():
            print(f"{key}: {val}")
    return 0


def _cmd_decode(args) -> int:
    spec, _ = read_spec(args.spec)
    rng = np.random.default_rng(args.seed)
    info = rng.integers(0, 2, size=spec.K).astype(np.uint8)
    x = encode(spec, info)
    if args.channel == "bec":
        y = channels.bec_transmit(x, args.param, seed=rng)
    else:
        y = channels.awgn_transmit(x, args.param, seed=rng)
    if args.decoder == "sc":
        res = sc_decode(spec, y)
    else:
        res = bp_decode(spec, fg.build_graph(spec.n), y, max_iter=args.max_iter,
                        quantizer=Quantizer() if args.quantize else None)
    errors = int(np.sum(res.info_estimate != info))
    print(json.dumps({
        "decoder": args.decoder,
        "channel": args.channel,
        "param": args.param,
        "iterations": res.iterations_used,
        "converged": res.converged,
        "bit_errors": errors,
        "unresolved": len(res.unresolved) if res.unresolved is not None else None,
    }, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    cfg = SweepConfig(
        scheme=args.scheme,
        channel=args.channel,
        grid=tuple(float(x) for x in args.grid.split(",")),
        spec_path=args.spec,
        alist_path=args.alist,
        concat_path=args.concat,
        min_error_blocks=args.min_error_blocks,
        max_frames=args.max_frames,
        seed=args.seed,
        max_iter=args.max_iter,
        quantize=args.quantize,
    )
    def show(rec):
        print(f"param={rec.param:g} frames={rec.frames} BER={rec.ber:.3e} "
              f"BLER={rec.bler:.3e} ANI={rec.ani:.1f}")
    run_sweep(
        cfg,
        out_csv=f"{args.out}.csv" if args.out else None,
        out_jsonl=f"{args.out}.jsonl" if args.out else None,
        resume=not args.no_resume,
        emit=show,
    )
    return 0


class SystemExit2(Exception):
    """Configuration error surfaced with exit code 1."""


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "construct": _cmd_construct,
        "analyze": _cmd_analyze,
        "decode": _cmd_decode,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except SystemExit2 as exc:
        print(f"polarfec: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"polarfec: configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"polarfec: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
