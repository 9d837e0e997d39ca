"""Command-line surface.

Exit codes are a stable contract: 0 success, 1 usage, 2 code not found,
3 CRC/verification failure, 4 timeout, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .codec import (
    OutOfRangeError,
    SymbolSequence,
    build_matrix,
    payload_to_symbols,
    symbols_to_payload,
)
from .harness import (
    OCCLUSION_MC_COLUMNS,
    SAMPLING_SWEEP_COLUMNS,
    SCALE_SWEEP_COLUMNS,
    BadCellError,
    add_noise,
    occlude,
    rotate_image,
    run_occlusion_mc,
    run_sampling_sweep,
    run_scale_sweep,
    scale_image,
    write_csv,
)
from .pipeline import (
    CrcFailureError,
    DecodeOptions,
    DecodeTimeoutError,
    NotFoundError,
    decode_file,
)
from .raster import OutOfBoundsError, RasterImage, RenderSpec, render, embed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_FOUND = 2
EXIT_CRC = 3
EXIT_TIMEOUT = 4
EXIT_IO = 5

_ALPHABET_LETTERS = set("0369CF")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 means 'code not found' here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _default_timeout_ms() -> int:
    raw = os.environ.get("CBCODE_TIMEOUT_MS")
    if raw:
        try:
            value = int(raw)
            if value > 0:
                return value
        except ValueError:
            pass
    return 6000


def _parse_data(text: str) -> SymbolSequence:
    """Accept either an integer payload or a 12-letter symbol string."""
    if len(text) == 12 and set(text.upper()) <= _ALPHABET_LETTERS:
        return SymbolSequence.from_string(text)
    try:
        value = int(text, 0)
    except ValueError:
        raise ValueError(
            f"--data must be an integer or 12 symbols over 0/3/6/9/C/F, got {text!r}"
        ) from None
    return payload_to_symbols(value)


def _parse_region(text: str) -> tuple:
    parts = [p for p in text.replace(";", ",").split(",") if p != ""]
    if len(parts) != 8:
        raise ValueError("--region needs 8 comma-separated numbers (x1,y1,...,x4,y4)")
    vals = [float(p) for p in parts]
    return tuple((vals[i], vals[i + 1]) for i in range(0, 8, 2))


def _parse_kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_color(text: str) -> tuple[int, int, int]:
    t = text.lstrip("#")
    if len(t) != 6:
        raise ValueError(f"color must be RRGGBB hex, got {text!r}")
    return tuple(int(t[i : i + 2], 16) for i in (0, 2, 4))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbcode", description="Color-block code toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="render a code image")
    p.add_argument("--data", required=True, help="integer payload or 12-symbol string (0/3/6/9/C/F)")
    p.add_argument("--block-px", type=int, default=65)
    p.add_argument("--border-px", type=int, default=0)
    p.add_argument("--border-color", default="FFFFFF", help="border RRGGBB")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="decode a code image")
    p.add_argument("image")
    p.add_argument("--samples", type=int, choices=(5, 10, 20), default=5)
    p.add_argument("--timeout-ms", type=int, default=None)
    p.add_argument("--strict-crc", action="store_true", help="require exact CRC byte match")
    p.add_argument("--region", default=None, help="hint quad x1,y1,x2,y2,x3,y3,x4,y4")
    p.add_argument("--json", action="store_true", help="print the full report as JSON")

    p = sub.add_parser("embed", help="paste a code image into a host image")
    p.add_argument("code")
    p.add_argument("host")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("degrade", help="apply one degradation to an image")
    p.add_argument("image")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--method", choices=("nearest", "bilinear", "bicubic"), default="bilinear")
    p.add_argument("--occlude", default=None, help="cell=K,cov=C,color=RRGGBB")
    p.add_argument("--rotate", type=float, default=None)
    p.add_argument("--noise", default=None, help="KIND,param=value,... (gaussian/shot/periodic)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run an experiment and write CSV")
    p.add_argument("runner", choices=("scale-sweep", "sampling-sweep", "occlusion-mc"))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.add_argument("--factors", default="0.5,0.25,0.125", help="comma-separated scale factors")
    p.add_argument("--samples", default="5,10,20", help="sampling-sweep sample counts")
    p.add_argument("--method", choices=("nearest", "bilinear", "bicubic"), default="bilinear")
    p.add_argument("--coverage-max", type=float, default=0.5)
    p.add_argument("--timeout-ms", type=int, default=None)
    return parser


def _cmd_encode(args) -> int:
    try:
        seq = _parse_data(args.data)
        spec = RenderSpec(
            block_px=args.block_px,
            border_px=args.border_px,
            border_color=_parse_color(args.border_color),
        )
    except (ValueError, OutOfRangeError) as exc:
        print(f"cbcode encode: {exc}", file=sys.stderr)
        return EXIT_USAGE
    matrix = build_matrix(seq)
    image = render(matrix, spec)
    try:
        image.save(args.out)
    except OSError as exc:
        print(f"cbcode encode: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(
        f"symbols={seq} payload={symbols_to_payload(seq)} crc={matrix.crc:02X} "
        f"size={image.width}x{image.height} out={args.out}"
    )
    return EXIT_OK


def _cmd_decode(args) -> int:
    try:
        region = _parse_region(args.region) if args.region else None
    except ValueError as exc:
        print(f"cbcode decode: {exc}", file=sys.stderr)
        return EXIT_USAGE
    options = DecodeOptions(
        sample_points=args.samples,
        timeout_ms=args.timeout_ms or _default_timeout_ms(),
        v_tolerance=0 if args.strict_crc else DecodeOptions.v_tolerance,
        region_hint=region,
    )
    try:
        report = decode_file(args.image, options)
    except NotFoundError as exc:
        _emit_failure(exc, args.json)
        return EXIT_NOT_FOUND
    except CrcFailureError as exc:
        _emit_failure(exc, args.json)
        return EXIT_CRC
    except DecodeTimeoutError as exc:
        _emit_failure(exc, args.json)
        return EXIT_TIMEOUT
    except OSError as exc:
        print(f"cbcode decode: cannot read {args.image}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.json:
        print(report.to_json())
    else:
        mode = "exact" if report.crc_exact else "within tolerance"
        print(
            f"payload={report.payload} symbols={report.symbols} "
            f"crc=0x{report.crc_read:02X} ({mode}) attempts={report.attempts} "
            f"elapsed={report.elapsed_ms:.1f}ms"
        )
    return EXIT_OK


def _emit_failure(exc, as_json: bool) -> None:
    if as_json:
        print(exc.report.to_json())
    print(f"cbcode decode: {exc}", file=sys.stderr)


def _cmd_embed(args) -> int:
    try:
        code = RasterImage.load(args.code)
        host = RasterImage.load(args.host)
    except OSError as exc:
        print(f"cbcode embed: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        out = embed(host, code, args.x, args.y)
    except OutOfBoundsError as exc:
        print(f"cbcode embed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out.save(args.out)
    except OSError as exc:
        print(f"cbcode embed: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"embedded at ({args.x}, {args.y}) -> {args.out}")
    return EXIT_OK


def _cmd_degrade(args) -> int:
    chosen = [
        name
        for name, value in (
            ("scale", args.scale),
            ("occlude", args.occlude),
            ("rotate", args.rotate),
            ("noise", args.noise),
        )
        if value is not None
    ]
    if len(chosen) != 1:
        print(
            "cbcode degrade: give exactly one of --scale/--occlude/--rotate/--noise",
            file=sys.stderr,
        )
        return EXIT_USAGE
    try:
        image = RasterImage.load(args.image)
    except OSError as exc:
        print(f"cbcode degrade: cannot read {args.image}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.scale is not None:
            out = scale_image(image, args.scale, args.method)
        elif args.rotate is not None:
            out = rotate_image(image, args.rotate)
        elif args.occlude is not None:
            kv = _parse_kv(args.occlude)
            out = occlude(
                image,
                cell=int(kv["cell"]) if "cell" in kv else None,
                rect=tuple(int(v) for v in kv["rect"].split(":")) if "rect" in kv else None,
                coverage=float(kv.get("cov", kv.get("coverage", 1.0))),
                color=_parse_color(kv["color"]) if "color" in kv else (0xFF, 0x88, 0x00),
            )
        else:
            parts = args.noise.split(",", 1)
            kind = parts[0].strip()
            kv = _parse_kv(parts[1]) if len(parts) > 1 else {}
            out = add_noise(image, kind, seed=args.seed, **{k: float(v) for k, v in kv.items()})
    except (ValueError, KeyError, BadCellError) as exc:
        print(f"cbcode degrade: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out.save(args.out)
    except OSError as exc:
        print(f"cbcode degrade: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{image.width}x{image.height} -> {out.width}x{out.height} {args.out}")
    return EXIT_OK


def _print_table(rows: list[dict], columns) -> None:
    cols = list(columns)
    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in cols))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _cmd_bench(args) -> int:
    timeout = args.timeout_ms or _default_timeout_ms()
    options = DecodeOptions(timeout_ms=timeout)
    try:
        factors = [float(f) for f in args.factors.split(",") if f]
        sample_counts = [int(s) for s in args.samples.split(",") if s]
    except ValueError as exc:
        print(f"cbcode bench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.runner == "scale-sweep":
        rows = run_scale_sweep(
            factors, args.trials, options=options, method=args.method, seed=args.seed
        )
        columns = SCALE_SWEEP_COLUMNS
    elif args.runner == "sampling-sweep":
        rows = run_sampling_sweep(
            factors, sample_counts, args.trials, options=options, method=args.method, seed=args.seed
        )
        columns = SAMPLING_SWEEP_COLUMNS
    else:
        summary = run_occlusion_mc(
            args.trials, coverage_max=args.coverage_max, options=options, seed=args.seed
        )
        rows = [summary]
        columns = OCCLUSION_MC_COLUMNS
    _print_table(rows, columns)
    if args.csv:
        try:
            write_csv(args.csv, rows, columns, args.seed)
        except OSError as exc:
            print(f"cbcode bench: cannot write {args.csv}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "encode": _cmd_encode,
        "decode": _cmd_decode,
        "embed": _cmd_embed,
        "degrade": _cmd_degrade,
        "bench": _cmd_bench,
    }
    return handlers[args.command](args)


def entrypoint() -> None:
    sys.exit(main())
