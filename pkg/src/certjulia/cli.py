"""Command-line front end.

Subcommands:
  render        certified / escape / dem bitmap over a region
  bench         per-verdict cost scaling across precision levels
  preset        write the bundled map + certificate files
  kernel-bench  numba vs numpy kernel comparison

Exit codes: 0 ok, 2 certificate invalid, 3 precision exhausted somewhere
(failed pixels are written to the error-mask sidecar).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .bench import benchmark_scaling, kernel_comparison, near_set_points
from .certificate import Certificate
from .dyadic import ComplexDyadic, Dyadic
from .errors import CertificateInvalid, PrecisionExhausted
from .maps import MapSpec
from .render import RenderRequest, render

EXIT_OK = 0
EXIT_CERT_INVALID = 2
EXIT_PRECISION = 3


def _parse_region(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("region must be x0,y0,x1,y1")
    return tuple(Dyadic.parse(p) for p in parts)


def _parse_n_list(text: str):
    return [int(t) for t in text.split(",") if t]


def _cmd_render(args) -> int:
    req = RenderRequest(
        map_path=args.map, cert_path=args.cert, region=args.region,
        n=args.n, mode={"escape": "escape", "dem": "dem",
                        "certified": "certified"}[args.mode],
        threads=args.threads, out_path=args.out, stats_path=args.stats,
        png_path=args.png, error_mask_path=args.error_mask,
        allow_unvalidated=args.allow_unvalidated, max_iter=args.max_iter)
    try:
        _, stats = render(req)
    except CertificateInvalid as e:
        print(f"certificate invalid:\n{e}", file=sys.stderr)
        return EXIT_CERT_INVALID
    except PrecisionExhausted as e:
        print(f"precision exhausted: {e}", file=sys.stderr)
        return EXIT_PRECISION
    print(f"rendered {stats.width}x{stats.height} ({stats.mode}"
          f"{', UNCERTIFIED' if stats.uncertified else ''}) "
          f"in {stats.wall_s:.2f}s on the {stats.engine} engine")
    if stats.resolve.error_pixels:
        print(f"{len(stats.resolve.error_pixels)} pixels exhausted precision "
              f"(see error mask)", file=sys.stderr)
        return EXIT_PRECISION
    return EXIT_OK


def _load_points(path: str):
    out = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#"):
                continue
            out.append(ComplexDyadic(Dyadic.parse(row[0]), Dyadic.parse(row[1])))
    return out


def _cmd_bench(args) -> int:
    map_spec = MapSpec.load(args.map)
    cert = Certificate.load(args.cert)
    if args.points:
        points = _load_points(args.points)
    else:
        points = near_set_points(cert, args.count)
    report = benchmark_scaling(map_spec, cert, points, args.n_list,
                               engine=args.engine, csv_path=args.out)
    print(report)
    return EXIT_OK


def _cmd_preset(args) -> int:
    from .presets import write_preset

    map_path, cert_path = write_preset(args.name, args.out_dir)
    print(f"wrote {map_path}\nwrote {cert_path}")
    return EXIT_OK


def _cmd_kernel_bench(args) -> int:
    rows = kernel_comparison(n_points=args.points, csv_path=args.out)
    hdr = f"{'kernel':>8} {'points':>8} {'numpy_s':>9} {'numba_s':>9} " \
          f"{'speedup':>8} {'identical':>9}"
    print(hdr)
    for r in rows:
        nb = f"{r['numba_s']:.4f}" if r["numba_s"] is not None else "-"
        sp = f"{r['speedup']:.1f}x" if r["speedup"] is not None else "-"
        ident = str(r["identical"]) if r["identical"] is not None else "-"
        print(f"{r['kernel']:>8} {r['points']:>8} {r['numpy_s']:>9.4f} "
              f"{nb:>9} {sp:>8} {ident:>9}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="certjulia",
                                description="certified Julia set rendering")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("render", help="render a bitmap over a region")
    pr.add_argument("--map", required=True)
    pr.add_argument("--cert")
    pr.add_argument("--region", type=_parse_region, required=True,
                    metavar="x0,y0,x1,y1")
    pr.add_argument("--n", type=int, required=True)
    pr.add_argument("--mode", choices=["certified", "escape", "dem"],
                    default="certified")
    pr.add_argument("--threads", type=int, default=1)
    pr.add_argument("--out", required=True, help="output PGM (P4) path")
    pr.add_argument("--stats", help="stats CSV path")
    pr.add_argument("--png", help="optional PNG copy")
    pr.add_argument("--error-mask", help="sidecar PGM for failed pixels")
    pr.add_argument("--max-iter", type=int, default=256)
    pr.add_argument("--allow-unvalidated", action="store_true",
                    help="skip certificate validation (acknowledged risk)")
    pr.set_defaults(fn=_cmd_render)

    pb = sub.add_parser("bench", help="per-verdict scaling benchmark")
    pb.add_argument("--map", required=True)
    pb.add_argument("--cert", required=True)
    pb.add_argument("--n-list", type=_parse_n_list, required=True,
                    metavar="8,12,16,20")
    pb.add_argument("--points", help="CSV of re,im dyadic strings")
    pb.add_argument("--count", type=int, default=1000,
                    help="auto-generated point count when --points is absent")
    pb.add_argument("--engine", choices=["exact", "auto"], default="exact")
    pb.add_argument("--out", help="CSV output path")
    pb.set_defaults(fn=_cmd_bench)

    pp = sub.add_parser("preset", help="write bundled map + certificate files")
    pp.add_argument("--name", choices=["circle", "segment"], required=True)
    pp.add_argument("--out-dir", default=".", type=Path)
    pp.set_defaults(fn=_cmd_preset)

    pk = sub.add_parser("kernel-bench", help="numba vs numpy kernel benchmark")
    pk.add_argument("--points", type=int, default=200_000)
    pk.add_argument("--out", help="CSV output path")
    pk.set_defaults(fn=_cmd_kernel_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
