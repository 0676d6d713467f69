"""Command-line front end: ``mimolab {train,ber,sweep,analyze,reproduce}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, config, harness, nn, recipes
from .mnnet import save_graph, train_mnnet
from .signal import MimoConfig
from .vq import save_detector, train_vq_detector


def _hidden_arg(text: str) -> tuple[int, ...]:
    return harness._hidden({"hidden": text})


def _training(args) -> nn.TrainingConfig:
    snr = args.train_snr if args.train_snr is not None else harness.default_train_snr(args.scheme)
    return nn.TrainingConfig(batch_size=args.batch_size, iterations=args.iterations,
                             train_eb_n0_db=snr, seed=args.seed)


def cmd_train(args) -> int:
    cfg = MimoConfig.make(args.M, args.N, args.scheme)
    tc = _training(args)
    if args.detector.upper() == "MNNET":
        graph = train_mnnet(cfg, tc, hidden=args.hidden)
        save_graph(args.out, graph)
        print(f"wrote MNNet graph to {args.out} (final loss per layer: "
              + ", ".join(f"{t[-1]:.4g}" for t in graph.loss_traces) + ")")
    else:
        channel_set = harness.channel_set_for(cfg, args.channel_set_size, args.channel_set_seed)
        det = train_vq_detector(cfg, args.mapping, args.front_end, tc, channel_set, hidden=args.hidden,
                                slots_per_channel=args.slots_per_channel)
        save_detector(args.out, det)
        print(f"wrote detector to {args.out} (final loss {det.loss_trace[-1]:.4g})")
    return 0


def _print_curve(curve: harness.BerCurve) -> None:
    print(f"# {curve.name}")
    print(",".join(harness.CSV_HEADER))
    for row in curve.rows():
        print(f"{row[0]:g},{row[1]},{row[2]},{row[3]:.4e},{row[4]:.4e},{row[5]:.4e}")


def cmd_ber(args) -> int:
    if args.config:
        specs = config.read_specs(args.config)
        if args.name:
            specs = [s for s in specs if s.name == args.name]
        if len(specs) != 1:
            print("ber runs exactly one experiment; use --name or the sweep command", file=sys.stderr)
            return 2
        spec = specs[0]
    else:
        params = {k: v for k, v in (("bundle", args.bundle), ("mapping", args.mapping),
                                    ("front_end", args.front_end)) if v is not None}
        spec = harness.ExperimentSpec(name=args.name or args.detector.lower(), detector=args.detector,
                                      M=args.M, N=args.N, scheme=args.scheme, snr_db=config.parse_snr(args.snr),
                                      seed=args.seed, min_bit_errors=args.min_bit_errors,
                                      max_trials=args.max_trials, channel_set_size=args.channel_set_size,
                                      params=params)
    if args.out:
        spec.output = args.out
    curve = harness.run_experiment(spec, workers=args.workers)
    _print_curve(curve)
    return 0


def _report_sweep(result: harness.SweepResult, out) -> int:
    for curve in result.curves.values():
        _print_curve(curve)
    for name, err in result.errors.items():
        print(f"FAILED {name}: {err}", file=sys.stderr)
    if out:
        print(f"wrote {len(result.curves)} CSV file(s) and manifest.json to {out}")
    return 1 if result.errors else 0


def cmd_sweep(args) -> int:
    if args.replay:
        same = harness.replay(args.replay, args.out)
        for name, ok in same.items():
            print(f"{'identical' if ok else 'DIFFERS'} {name}")
        return 0 if all(same.values()) else 1
    if not args.config:
        print("sweep needs a config file or --replay", file=sys.stderr)
        return 2
    return _report_sweep(harness.sweep(config.read_specs(args.config), args.out, workers=args.workers), args.out)


def cmd_analyze(args) -> int:
    if args.report == "compression":
        rows = [analysis.compression_bound(M, args.L, s, args.N)
                for M in range(1, args.max_M + 1) for s in args.sigma]
    else:
        rows = [analysis.count_operations(kind, MimoConfig.make(args.M, args.N, args.scheme),
                                          hidden=args.hidden, batch_size=args.batch_size)
                for kind in args.kinds]
    if args.out:
        analysis.write_csv(args.out, rows)
        print(f"wrote {len(rows)} row(s) to {args.out}")
    for r in rows:
        print(r.row() if isinstance(r, analysis.ComplexityReport) else r)
    return 0


def cmd_reproduce(args) -> int:
    specs = recipes.recipe(args.figure, args.scale, args.seed)
    out = Path(args.out or f"results/{args.figure}-{args.scale}")
    return _report_sweep(harness.sweep(specs, out, workers=args.workers), out)


def _add_system(p, scheme_default="QPSK") -> None:
    p.add_argument("--M", type=int, default=2, help="transmit antennas")
    p.add_argument("--N", type=int, default=4, help="receive antennas")
    p.add_argument("--scheme", default=scheme_default, help="BPSK, QPSK, PSK8 or QAM16")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a VQ detector or MNNet graph and write a bundle")
    _add_system(p)
    p.add_argument("--detector", default="VQ", choices=["VQ", "MNNET", "vq", "mnnet"])
    p.add_argument("--mapping", default="NN")
    p.add_argument("--front-end", default="none", choices=["none", "MF", "ZF", "LMMSE"])
    p.add_argument("--hidden", type=_hidden_arg, default=nn.DESK_HIDDEN, help="e.g. 256,128,64 or wide")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=500)
    p.add_argument("--train-snr", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channel-set-size", type=int, default=None)
    p.add_argument("--channel-set-seed", type=int, default=1)
    p.add_argument("--slots-per-channel", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ber", help="run one experiment")
    p.add_argument("--config", help="INI file; picks the section given by --name")
    p.add_argument("--name")
    p.add_argument("--detector", default="MLSD")
    _add_system(p)
    p.add_argument("--snr", default="0:10:2", help="start:stop:step or a list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-bit-errors", type=int, default=200)
    p.add_argument("--max-trials", type=int, default=10**7)
    p.add_argument("--channel-set-size", type=int, default=None)
    p.add_argument("--bundle", help="trained detector bundle (VQ) or graph directory (MNNet)")
    p.add_argument("--mapping")
    p.add_argument("--front-end")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("sweep", help="run every experiment of a config file")
    p.add_argument("config", nargs="?")
    p.add_argument("--replay", metavar="MANIFEST", help="re-run a manifest and compare CSVs")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="compression-bound or complexity report")
    p.add_argument("report", choices=["compression", "complexity"])
    _add_system(p)
    p.add_argument("--L", type=int, default=4, help="constellation order (compression)")
    p.add_argument("--max-M", type=int, default=8)
    p.add_argument("--sigma", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--kinds", nargs="+", default=list(analysis.DETECTOR_KINDS))
    p.add_argument("--hidden", type=_hidden_arg, default=nn.DESK_HIDDEN)
    p.add_argument("--batch-size", type=int, default=500)
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reproduce", help="canned figure recipes")
    p.add_argument("figure", choices=recipes.FIGURES)
    p.add_argument("--scale", default="desk", choices=list(recipes.SCALES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default results/<figure>-<scale>)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
