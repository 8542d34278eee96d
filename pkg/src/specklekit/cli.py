"""Command-line interface.

Four subcommands cover the synthetic workflow end to end: ``add-noise``
speckles a clean raster, ``despeckle`` filters one and writes a manifest
next to the output, ``evaluate`` scores a result (JSON report plus a CSV
table and a PNG figure beside it), and ``ablate`` reruns the pipeline with
each switch combination and reports the comparison the same three ways.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 for file
and format problems, 3 for numerical failures. The ``DESPECKLE_THREADS``
environment variable sets the solver worker count (default 1); it changes
wall time only, never output bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, RasterFormatError, SpecklekitError
from .figures import save_ablation_figure, save_metrics_figure
from .metrics import (
    MetricReport,
    enl,
    epd_roa,
    epi,
    mean_intensity,
    parse_region_file,
    psnr,
    sqi,
    ssim,
)
from .pipeline import PipelineConfig, despeckle, load_config
from .raster import read_raster, write_raster
from .speckle import apply_speckle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

ABLATION_ROWS = [
    ("a", False, False),
    ("b", True, False),
    ("c", False, True),
    ("d", True, True),
]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _threads() -> int:
    raw = os.environ.get("DESPECKLE_THREADS")
    if raw is None or not raw.strip():
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(
            f"DESPECKLE_THREADS must be a positive integer, got {raw!r}"
        ) from None
    if value < 1:
        raise ConfigError(
            f"DESPECKLE_THREADS must be a positive integer, got {raw!r}"
        )
    return value


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_add_noise(args) -> int:
    clean = read_raster(args.input)
    noisy = apply_speckle(clean, looks=args.looks, seed=args.seed)
    write_raster(args.out, noisy)
    print(f"wrote {args.out} ({args.looks}-look speckle, seed {args.seed})")
    return EXIT_OK


def _cmd_despeckle(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.no_transform:
        config = replace(config, use_transform=False)
    if args.no_weights:
        config = replace(config, use_weights=False)
    if args.seed is not None:
        config = replace(config, seed=args.seed)

    noisy = read_raster(args.input)
    out, manifest = despeckle(noisy, config, threads=_threads())
    write_raster(args.out, out)
    manifest_path = Path(args.manifest) if args.manifest else Path(f"{args.out}.manifest.json")
    manifest_path.write_text(manifest.to_json())
    for warning in manifest.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {args.out} and {manifest_path}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    test = read_raster(args.test)
    ref = read_raster(args.ref) if args.ref else None
    noisy = read_raster(args.noisy) if args.noisy else None
    regions = parse_region_file(args.regions) if args.regions else None

    report = MetricReport(
        mean_intensity=mean_intensity(test),
        enl=enl(test, regions),
    )
    if ref is not None:
        report.psnr = psnr(ref, test)
        report.ssim = ssim(ref, test)
    if noisy is not None:
        report.epi = epi(test, noisy)
        report.epd_h = epd_roa(test, noisy, "h")
        report.epd_v = epd_roa(test, noisy, "v")
        report.sqi = sqi(test, noisy)
    metrics = report.to_dict()

    report_path = Path(args.report)
    payload = {
        "inputs": {
            "test": args.test,
            "ref": args.ref,
            "noisy": args.noisy,
            "regions": args.regions,
        },
        "metrics": metrics,
    }
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    _write_csv(
        report_path.with_suffix(".csv"),
        ["metric", "value"],
        [[name, value] for name, value in metrics.items()],
    )
    panels = [("test", test.data)]
    if ref is not None:
        panels.append(("reference", ref.data))
    if noisy is not None:
        panels.append(("noisy", noisy.data))
    save_metrics_figure(report_path.with_suffix(".png"), panels, metrics)

    print(f"wrote {report_path}, {report_path.with_suffix('.csv')}, {report_path.with_suffix('.png')}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    clean = read_raster(args.input)
    noisy = apply_speckle(clean, looks=args.looks, seed=args.seed)
    threads = _threads()
    peak = float(max(clean.data.max(), noisy.data.max()))

    rows = []
    panels = [("noisy", noisy.data)]
    for tag, use_transform, use_weights in ABLATION_ROWS:
        config = replace(
            PipelineConfig(),
            use_transform=use_transform,
            use_weights=use_weights,
            seed=args.seed,
        )
        out, manifest = despeckle(noisy, config, threads=threads)
        rows.append(
            {
                "row": tag,
                "use_transform": use_transform,
                "use_weights": use_weights,
                "psnr": psnr(clean, out, peak=peak),
                "ssim": ssim(clean, out, dynamic_range=peak),
                "selected_lambda": manifest.selected_lambda,
            }
        )
        panels.append((f"({tag})", out.data))

    report_path = Path(args.report)
    payload = {
        "input": args.input,
        "looks": args.looks,
        "seed": args.seed,
        "psnr_peak": peak,
        "noisy": {
            "psnr": psnr(clean, noisy, peak=peak),
            "ssim": ssim(clean, noisy, dynamic_range=peak),
        },
        "rows": rows,
    }
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    _write_csv(
        report_path.with_suffix(".csv"),
        ["row", "use_transform", "use_weights", "psnr_db", "ssim"],
        [
            [r["row"], r["use_transform"], r["use_weights"], r["psnr"], r["ssim"]]
            for r in rows
        ],
    )
    save_ablation_figure(report_path.with_suffix(".png"), panels, rows)

    print(f"{'row':<5}{'transform':<11}{'weights':<9}{'psnr_db':>9}  {'ssim':>7}")
    for r in rows:
        print(
            f"({r['row']})  {str(r['use_transform']):<11}{str(r['use_weights']):<9}"
            f"{r['psnr']:>9.2f}  {r['ssim']:>7.4f}"
        )
    print(f"wrote {report_path}, {report_path.with_suffix('.csv')}, {report_path.with_suffix('.png')}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="specklekit",
        description="SAR despeckling toolkit: simulate speckle, filter, evaluate.",
    )
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    noise = commands.add_parser("add-noise", help="multiply a clean raster by gamma speckle")
    noise.add_argument("--in", dest="input", required=True, metavar="FILE")
    noise.add_argument("--out", required=True, metavar="FILE")
    noise.add_argument("--looks", type=float, required=True)
    noise.add_argument("--seed", type=int, default=0)
    noise.set_defaults(func=_cmd_add_noise)

    run = commands.add_parser("despeckle", help="filter a speckled raster")
    run.add_argument("--in", dest="input", required=True, metavar="FILE")
    run.add_argument("--out", required=True, metavar="FILE")
    run.add_argument("--config", metavar="FILE", help="flat key = value file, JSON settings, or a previous manifest")
    run.add_argument("--no-transform", action="store_true", help="skip the Gaussianizing transform")
    run.add_argument("--no-weights", action="store_true", help="use unit weights in the solver")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--manifest", metavar="FILE", help="manifest path (default: OUT.manifest.json)")
    run.set_defaults(func=_cmd_despeckle)

    score = commands.add_parser("evaluate", help="score a result and render a report")
    score.add_argument("--test", required=True, metavar="FILE")
    score.add_argument("--ref", metavar="FILE", help="clean reference, enables PSNR and SSIM")
    score.add_argument("--noisy", metavar="FILE", help="noisy input, enables EPI, EPD-ROA, SQI")
    score.add_argument("--regions", metavar="FILE", help="homogeneous rectangles for ENL")
    score.add_argument("--report", required=True, metavar="FILE")
    score.set_defaults(func=_cmd_evaluate)

    sweep = commands.add_parser("ablate", help="run all four switch combinations and compare")
    sweep.add_argument("--in", dest="input", required=True, metavar="FILE")
    sweep.add_argument("--looks", type=float, required=True)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--report", required=True, metavar="FILE")
    sweep.set_defaults(func=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RasterFormatError as exc:
        print(f"raster error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecklekitError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
