"""Command-line generator honoring the synthaudit adapter protocol.

Invoked as

    sdg-shim --train T.csv --schema S.json --out OUT.csv --size N --seed K
             [--mode marginal|copy]

it reads the training CSV against its schema, then writes exactly N rows to
OUT.csv: independent per-column marginal samples by default, or the training
rows themselves in copy mode. Cells travel as opaque string tokens from
input to output, so numeric formatting survives the round trip verbatim.

Exit codes: 0 success, 2 malformed inputs or arguments, 3 output write
failure.
"""

import argparse
import csv
import json
import math
import random
import sys

NUMERICAL = "numerical"
CATEGORICAL = "categorical"

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_WRITE_FAILURE = 3


class InputError(Exception):
    """Anything wrong with the schema, the training CSV, or their pairing."""


def load_schema(path):
    """Parse the schema JSON into a list of (name, kind, categories) triples."""
    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read schema: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"schema is not valid JSON: {exc}")
    columns = spec.get("columns") if isinstance(spec, dict) else None
    if not isinstance(columns, list) or not columns:
        raise InputError("schema needs a non-empty 'columns' list")
    parsed = []
    for entry in columns:
        if not isinstance(entry, dict):
            raise InputError(f"bad column entry: {entry!r}")
        name, kind = entry.get("name"), entry.get("kind")
        if not name or kind not in (NUMERICAL, CATEGORICAL):
            raise InputError(f"bad column entry: {entry!r}")
        categories = entry.get("categories")
        parsed.append((name, kind, frozenset(categories) if categories is not None else None))
    return parsed


def load_rows(path, columns):
    """Read and validate the training CSV; returns rows of string tokens."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read training data: {exc}")
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != [name for name, _, _ in columns]:
            raise InputError("training CSV header does not match the schema columns")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise InputError(
                    f"line {lineno}: expected {len(columns)} cells, got {len(row)}")
            for token, (name, kind, categories) in zip(row, columns):
                if kind == NUMERICAL:
                    try:
                        value = float(token)
                    except ValueError:
                        raise InputError(
                            f"line {lineno}: column {name!r} is not numeric: {token!r}")
                    if not math.isfinite(value):
                        raise InputError(
                            f"line {lineno}: column {name!r} is not finite: {token!r}")
                elif categories is not None and token not in categories:
                    raise InputError(
                        f"line {lineno}: column {name!r} has unknown category {token!r}")
            rows.append(row)
    if not rows:
        raise InputError("training CSV has no data rows")
    return rows


def sample_marginal(rows, size, seed):
    """Each output cell drawn independently from its column's empirical values."""
    rng = random.Random(seed)
    n, width = len(rows), len(rows[0])
    return [[rows[rng.randrange(n)][j] for j in range(width)] for _ in range(size)]


def sample_copy(rows, size):
    """Training rows in order, cycling when more are requested than exist."""
    return [rows[i % len(rows)] for i in range(size)]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdg-shim",
        description="Reference synthetic-data adapter: marginal sampler or pass-through copy.")
    parser.add_argument("--train", required=True, help="training CSV path")
    parser.add_argument("--schema", required=True, help="schema JSON path")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--size", required=True, type=int, help="rows to write")
    parser.add_argument("--seed", required=True, type=int, help="sampling seed")
    parser.add_argument("--mode", choices=("marginal", "copy"), default="marginal")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return EXIT_OK if not exc.code else EXIT_BAD_INPUT
    if args.size < 0:
        print("error: size must be non-negative", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        columns = load_schema(args.schema)
        rows = load_rows(args.train, columns)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.mode == "copy":
        out_rows = sample_copy(rows, args.size)
    else:
        out_rows = sample_marginal(rows, args.size, args.seed)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([name for name, _, _ in columns])
            writer.writerows(out_rows)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_WRITE_FAILURE
    return EXIT_OK
