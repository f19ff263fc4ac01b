"""Unit tests for the adapter itself: pure stdlib in, pure stdlib out."""

import csv
import json
import math
import random

import pytest

from sdgshim.cli import main

SCHEMA = {
    "columns": [
        {"name": "x", "kind": "numerical"},
        {"name": "y", "kind": "numerical"},
        {"name": "color", "kind": "categorical", "categories": ["red", "green", "blue"]},
    ]
}


def write_train(tmp_path, rows, schema=SCHEMA, header=None):
    train = tmp_path / "train.csv"
    with open(train, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header or [c["name"] for c in schema["columns"]])
        writer.writerows(rows)
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps(schema))
    return str(train), str(schema_path)


def make_rows(n, seed=0):
    rng = random.Random(seed)
    colors = ["red", "green", "blue"]
    return [[repr(rng.gauss(0, 1)), repr(rng.gauss(5, 2)), rng.choice(colors)]
            for _ in range(n)]


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        return next(reader), list(reader)


def run(tmp_path, rows, *extra, size=10, seed=0, schema=SCHEMA, header=None):
    train, schema_path = write_train(tmp_path, rows, schema, header)
    out = tmp_path / "synth.csv"
    code = main(["--train", train, "--schema", schema_path, "--out", str(out),
                 "--size", str(size), "--seed", str(seed), *extra])
    return code, out


class TestCopyMode:
    def test_full_size_reproduces_input(self, tmp_path):
        rows = make_rows(12)
        code, out = run(tmp_path, rows, "--mode", "copy", size=12)
        assert code == 0
        header, got = read_rows(out)
        assert header == ["x", "y", "color"]
        assert got == rows

    def test_oversampling_cycles_in_order(self, tmp_path):
        rows = make_rows(3)
        code, out = run(tmp_path, rows, "--mode", "copy", size=7)
        assert code == 0
        _, got = read_rows(out)
        assert got == [rows[i % 3] for i in range(7)]

    def test_seed_is_irrelevant(self, tmp_path):
        rows = make_rows(5)
        _, a = run(tmp_path, rows, "--mode", "copy", size=5, seed=1)
        first = a.read_bytes()
        _, b = run(tmp_path, rows, "--mode", "copy", size=5, seed=99)
        assert b.read_bytes() == first


class TestMarginalMode:
    def test_tokens_come_from_the_training_columns(self, tmp_path):
        rows = make_rows(20)
        code, out = run(tmp_path, rows, size=200, seed=3)
        assert code == 0
        header, got = read_rows(out)
        assert header == ["x", "y", "color"]
        assert len(got) == 200
        for j in range(3):
            seen = {row[j] for row in got}
            assert seen <= {row[j] for row in rows}

    def test_marginals_match_at_ten_thousand(self, tmp_path):
        # small vocabulary so empirical frequencies are easy to pin
        rng = random.Random(7)
        values = ["0.0", "1.0", "2.0", "3.0"]
        rows = [[rng.choice(values), rng.choice(values),
                 rng.choice(["red", "red", "green", "blue"])] for _ in range(500)]
        code, out = run(tmp_path, rows, size=10_000, seed=11)
        assert code == 0
        _, got = read_rows(out)

        def tv(j, universe):
            return 0.5 * sum(
                abs(sum(r[j] == v for r in rows) / len(rows)
                    - sum(r[j] == v for r in got) / len(got))
                for v in universe)

        assert tv(0, values) <= 0.05
        assert tv(1, values) <= 0.05
        assert tv(2, ["red", "green", "blue"]) <= 0.05

        # numeric marginal as a KS distance over the token values
        a = sorted(float(r[0]) for r in rows)
        b = sorted(float(r[0]) for r in got)
        grid = sorted(set(a) | set(b))
        ks = max(abs(sum(v <= g for v in a) / len(a) - sum(v <= g for v in b) / len(b))
                 for g in grid)
        assert ks <= 0.05

    def test_same_seed_same_bytes_different_seed_differs(self, tmp_path):
        rows = make_rows(30)
        _, a = run(tmp_path, rows, size=50, seed=5)
        first = a.read_bytes()
        _, b = run(tmp_path, rows, size=50, seed=5)
        assert b.read_bytes() == first
        _, c = run(tmp_path, rows, size=50, seed=6)
        assert c.read_bytes() != first

    def test_zero_rows_is_header_only(self, tmp_path):
        code, out = run(tmp_path, make_rows(4), size=0)
        assert code == 0
        header, got = read_rows(out)
        assert header == ["x", "y", "color"] and got == []


class TestValidation:
    def test_missing_required_flag_exits_two(self, tmp_path, capsys):
        assert main(["--train", "a.csv"]) == 2
        capsys.readouterr()

    def test_unknown_mode_exits_two(self, tmp_path, capsys):
        code, _ = run(tmp_path, make_rows(4), "--mode", "fancy")
        assert code == 2
        capsys.readouterr()

    def test_negative_size_exits_two(self, tmp_path, capsys):
        code, _ = run(tmp_path, make_rows(4), size=-1)
        assert code == 2
        assert "non-negative" in capsys.readouterr().err

    def test_header_mismatch_exits_two(self, tmp_path, capsys):
        code, _ = run(tmp_path, make_rows(4), header=["a", "b", "c"])
        assert code == 2
        assert "header" in capsys.readouterr().err

    def test_ragged_row_exits_two(self, tmp_path, capsys):
        rows = make_rows(3)
        rows[1] = rows[1][:2]
        code, _ = run(tmp_path, rows)
        assert code == 2
        assert "expected 3 cells" in capsys.readouterr().err

    def test_non_numeric_cell_exits_two(self, tmp_path, capsys):
        rows = make_rows(3)
        rows[2][0] = "not-a-number"
        code, _ = run(tmp_path, rows)
        assert code == 2
        assert "not numeric" in capsys.readouterr().err

    def test_non_finite_cell_exits_two(self, tmp_path, capsys):
        rows = make_rows(3)
        rows[0][1] = "inf"
        code, _ = run(tmp_path, rows)
        assert code == 2
        assert "not finite" in capsys.readouterr().err

    def test_undeclared_category_exits_two(self, tmp_path, capsys):
        rows = make_rows(3)
        rows[1][2] = "mauve"
        code, _ = run(tmp_path, rows)
        assert code == 2
        assert "unknown category" in capsys.readouterr().err

    def test_empty_training_file_exits_two(self, tmp_path, capsys):
        code, _ = run(tmp_path, [])
        assert code == 2
        assert "no data rows" in capsys.readouterr().err

    def test_missing_train_file_exits_two(self, tmp_path, capsys):
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(json.dumps(SCHEMA))
        code = main(["--train", str(tmp_path / "absent.csv"), "--schema", str(schema_path),
                     "--out", str(tmp_path / "o.csv"), "--size", "1", "--seed", "0"])
        assert code == 2
        assert "cannot read training data" in capsys.readouterr().err

    def test_broken_schema_json_exits_two(self, tmp_path, capsys):
        train, _ = write_train(tmp_path, make_rows(3))
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["--train", train, "--schema", str(bad),
                     "--out", str(tmp_path / "o.csv"), "--size", "1", "--seed", "0"])
        assert code == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_schema_without_columns_exits_two(self, tmp_path, capsys):
        code, _ = run(tmp_path, make_rows(3), schema={"columns": []})
        assert code == 2
        assert "columns" in capsys.readouterr().err

    def test_schema_with_bad_kind_exits_two(self, tmp_path, capsys):
        schema = {"columns": [{"name": "x", "kind": "日付"}]}
        train, _ = write_train(tmp_path, [["1.0"]], schema,
                               header=["x"])
        code = main(["--train", train, "--schema", str(tmp_path / "schema.json"),
                     "--out", str(tmp_path / "o.csv"), "--size", "1", "--seed", "0"])
        assert code == 2
        assert "bad column entry" in capsys.readouterr().err


class TestWriteFailure:
    def test_unwritable_output_exits_three(self, tmp_path, capsys):
        rows = make_rows(3)
        train, schema_path = write_train(tmp_path, rows)
        out = tmp_path / "no-such-dir" / "synth.csv"
        code = main(["--train", train, "--schema", schema_path, "--out", str(out),
                     "--size", "3", "--seed", "0"])
        assert code == 3
        assert "cannot write output" in capsys.readouterr().err
