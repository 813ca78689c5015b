"""Command-line interface: encode, decode, verify, dataset.

Exit codes: 0 full success, 1 usage error, 2 partial failure (per-file errors
are listed on stderr and processing continues).  ``MAT2SEQ_SYMPREC`` overrides
the default symmetry tolerance when ``--symprec`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .canonicalize import canonicalize
from .cif_io import parse_cif, write_cif
from .codec import bin_property, decode, encode
from .errors import Mat2SeqError, ParseError
from .verify import TRANSFORM_KINDS, verify_uniqueness

DEFAULT_SYMPREC = 0.01


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_symprec() -> float:
    value = os.environ.get("MAT2SEQ_SYMPREC")
    return float(value) if value else DEFAULT_SYMPREC


def _parse_prop_flags(props: list[str], width: float | None, parser: _Parser):
    if not props:
        return []
    if width is None:
        parser.error("--prop requires --prop-width")
    bins = []
    for item in props:
        name, sep, raw = item.partition("=")
        if not sep or not name:
            parser.error(f"--prop expects name=value, got {item!r}")
        try:
            value = float(raw)
        except ValueError:
            parser.error(f"--prop value {raw!r} is not numeric")
        bins.append((name, bin_property(value, width)))
    return bins


def _collect_inputs(root: Path) -> list[Path]:
    if root.is_file():
        return [root]
    return sorted(p for p in root.rglob("*.cif") if p.is_file())


def _process_cif(job: tuple[str, float, tuple]) -> tuple[str, dict | None, str | None]:
    """Worker: parse + canonicalize + encode one file; returns (path, row, error)."""
    path, symprec, bins = job
    try:
        crystal = parse_cif(Path(path).read_text())
        cell = canonicalize(crystal, symprec)
        sequence = encode(cell, list(bins))
        row = {
            "sequence": sequence.text,
            "n_atoms": cell.n_atoms,
            "n_ops": len(cell.operations),
            "space_group_label": cell.space_group_label,
        }
        return path, row, None
    except Mat2SeqError as exc:
        return path, None, f"{type(exc).__name__}: {exc}"


def _run_jobs(jobs: list[tuple[str, float, tuple]]) -> dict[str, tuple[dict | None, str | None]]:
    """Run encode jobs, in parallel for many files; results keyed by path."""
    results: dict[str, tuple[dict | None, str | None]] = {}
    if len(jobs) > 1 and (os.cpu_count() or 1) > 1:
        with ProcessPoolExecutor(max_workers=min(8, os.cpu_count())) as pool:
            for path, row, error in pool.map(_process_cif, jobs):
                results[path] = (row, error)
    else:
        for job in jobs:
            path, row, error = _process_cif(job)
            results[path] = (row, error)
    return results


def _cmd_encode(args, parser: _Parser) -> int:
    in_path = Path(args.input)
    out_path = Path(args.out)
    if not in_path.exists():
        parser.error(f"input path {in_path} does not exist")
    bins = tuple(_parse_prop_flags(args.prop, args.prop_width, parser))
    inputs = _collect_inputs(in_path)
    if not inputs:
        parser.error(f"no .cif files under {in_path}")
    jobs = [(str(p), args.symprec, bins) for p in inputs]
    results = _run_jobs(jobs)
    failed = False
    for source in inputs:
        row, error = results[str(source)]
        if error is not None:
            print(f"{source}: {error}", file=sys.stderr)
            failed = True
            continue
        if in_path.is_file():
            target = out_path
        else:
            target = out_path / source.relative_to(in_path).with_suffix(".seq")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(row["sequence"])
    return 2 if failed else 0


def _cmd_decode(args, parser: _Parser) -> int:
    in_path = Path(args.input)
    if not in_path.exists():
        parser.error(f"input path {in_path} does not exist")
    try:
        crystal = decode(in_path.read_text())
    except ParseError as exc:
        print(f"{in_path}: ParseError at line {exc.line}, column {exc.column}: {exc}",
              file=sys.stderr)
        return 2
    except Mat2SeqError as exc:
        print(f"{in_path}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    Path(args.out).write_text(write_cif(crystal))
    return 0


def _cmd_verify(args, parser: _Parser) -> int:
    in_path = Path(args.input)
    if not in_path.is_dir():
        parser.error(f"--input must be a directory of CIF files, got {in_path}")
    kinds = tuple(k for k in args.transforms.split(",") if k and k != "none")
    for kind in kinds:
        if kind not in TRANSFORM_KINDS:
            parser.error(f"unknown transform {kind!r}; choose from {', '.join(TRANSFORM_KINDS)}")
    corpus = []
    ids = []
    failed = False
    for path in _collect_inputs(in_path):
        try:
            corpus.append(parse_cif(path.read_text()))
            ids.append(str(path.relative_to(in_path).with_suffix("")))
        except Mat2SeqError as exc:
            print(f"{path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failed = True
    if not corpus:
        parser.error(f"no parseable .cif files under {in_path}")
    report = verify_uniqueness(corpus, args.trials, kinds, seed=args.seed,
                               symprec=args.symprec, ids=ids)
    print(f"success_rate: {report['rate']:.4f}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return 2 if failed else 0


def _read_property_csv(path: Path, prop_name: str, parser: _Parser) -> dict[str, float]:
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "id" not in reader.fieldnames \
                or prop_name not in reader.fieldnames:
            parser.error(f"{path} must have 'id' and {prop_name!r} columns")
        values: dict[str, float] = {}
        for row in reader:
            key = row["id"]
            if key in values:
                parser.error(f"duplicate id {key!r} in {path}")
            values[key] = float(row[prop_name])
    return values


def _cmd_dataset(args, parser: _Parser) -> int:
    in_path = Path(args.input)
    if not in_path.is_dir():
        parser.error(f"--input must be a directory of CIF files, got {in_path}")
    prop_values: dict[str, float] = {}
    if args.prop_csv:
        if not args.prop_name or args.prop_width is None:
            parser.error("--prop-csv requires --prop-name and --prop-width")
        prop_values = _read_property_csv(Path(args.prop_csv), args.prop_name, parser)
    inputs = _collect_inputs(in_path)
    if not inputs:
        parser.error(f"no .cif files under {in_path}")
    entries = sorted((str(p.relative_to(in_path).with_suffix("")), p) for p in inputs)
    failed = False
    rows = []
    for structure_id, path in entries:
        bins: tuple = ()
        if args.prop_csv:
            if structure_id in prop_values:
                bins = ((args.prop_name, bin_property(prop_values[structure_id],
                                                      args.prop_width)),)
            else:
                print(f"warning: no {args.prop_name!r} value for {structure_id!r}; "
                      "slot left as unknown_prop", file=sys.stderr)
        path_str, row, error = _process_cif((str(path), args.symprec, bins))
        if error is not None:
            print(f"{path_str}: {error}", file=sys.stderr)
            failed = True
            continue
        rows.append({
            "id": structure_id,
            "sequence": row["sequence"],
            "n_atoms": row["n_atoms"],
            "n_ops": row["n_ops"],
            "space_group_label": row["space_group_label"],
            "prop_bins": {name: value for name, value in bins},
        })
    with Path(args.out).open("w") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=False) + "\n")
    return 2 if failed else 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mat2seq",
                     description="Invariant sequence codec for crystal structures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    encode_p = sub.add_parser("encode", help="CIF file or directory -> .seq text")
    encode_p.add_argument("--input", required=True)
    encode_p.add_argument("--out", required=True)
    encode_p.add_argument("--symprec", type=float, default=None)
    encode_p.add_argument("--prop", action="append", default=[],
                          metavar="NAME=VALUE", help="fill one property slot")
    encode_p.add_argument("--prop-width", type=float, default=None)

    decode_p = sub.add_parser("decode", help=".seq file -> P1 CIF")
    decode_p.add_argument("--input", required=True)
    decode_p.add_argument("--out", required=True)

    verify_p = sub.add_parser("verify", help="uniqueness harness over a CIF directory")
    verify_p.add_argument("--input", required=True)
    verify_p.add_argument("--trials", type=int, default=10)
    verify_p.add_argument("--transforms", default=",".join(TRANSFORM_KINDS))
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--report", default=None)
    verify_p.add_argument("--symprec", type=float, default=None)

    dataset_p = sub.add_parser("dataset", help="CIF directory -> JSONL corpus")
    dataset_p.add_argument("--input", required=True)
    dataset_p.add_argument("--out", required=True)
    dataset_p.add_argument("--prop-csv", default=None)
    dataset_p.add_argument("--prop-name", default=None)
    dataset_p.add_argument("--prop-width", type=float, default=None)
    dataset_p.add_argument("--symprec", type=float, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "symprec", None) is None:
        args.symprec = _default_symprec()
    handlers = {
        "encode": _cmd_encode,
        "decode": _cmd_decode,
        "verify": _cmd_verify,
        "dataset": _cmd_dataset,
    }
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    raise SystemExit(main())
