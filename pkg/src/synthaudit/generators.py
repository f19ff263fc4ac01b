"""Synthetic data generators behind one interface.

Builtins give weak baselines (identity, independent marginals), the two
risk models give generators with a known ground-truth privacy level (a
leaky sampler and a quantile-space noise anonymizer), and the external
kind runs any third-party generator as a subprocess through a small
file-based adapter protocol.
"""

from __future__ import annotations

import json
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tabular import (
    NUMERICAL,
    DataError,
    Schema,
    SchemaError,
    Table,
    fit_quantile_map,
    load_table,
)

IDENTITY = "builtin:identity"
INDEPENDENT_MARGINALS = "builtin:independent_marginals"
LEAKY = "risk:leaky"
ANONYMIZER = "risk:anonymizer"
EXTERNAL = "external"

BUILTIN_KINDS = (IDENTITY, INDEPENDENT_MARGINALS)
ALL_KINDS = (*BUILTIN_KINDS, LEAKY, ANONYMIZER, EXTERNAL)

# every adapter command must mention all of these
PLACEHOLDERS = ("{train}", "{schema}", "{out}", "{size}", "{seed}")

DEFAULT_TIMEOUT_SECS = 3600.0


class GeneratorError(RuntimeError):
    """A generator failed to produce a usable synthetic table."""


class ExternalExitError(GeneratorError):
    """Adapter process exited nonzero."""

    def __init__(self, message, exit_code=None, stderr=""):
        super().__init__(message)
        self.exit_code = exit_code
        self.stderr = stderr


class ExternalTimeoutError(GeneratorError):
    """Adapter process exceeded the wall-clock budget."""


class ExternalOutputError(GeneratorError):
    """Adapter exited cleanly but violated the output contract."""


@dataclass(frozen=True)
class GeneratorSpec:
    """One generator choice plus the parameters its kind requires."""

    kind: str
    leak_p: float | None = None
    control: Table | None = None
    alpha: float | None = None
    command: str | None = None
    timeout_secs: float = DEFAULT_TIMEOUT_SECS

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; choose from {ALL_KINDS}")
        needs = {
            LEAKY: ("leak_p", "control"),
            ANONYMIZER: ("alpha",),
            EXTERNAL: ("command",),
        }.get(self.kind, ())
        for field_name in ("leak_p", "control", "alpha", "command"):
            value = getattr(self, field_name)
            if field_name in needs and value is None:
                raise ValueError(f"generator kind {self.kind!r} requires {field_name}")
            if field_name not in needs and value is not None:
                raise ValueError(f"generator kind {self.kind!r} does not accept {field_name}")
        if self.leak_p is not None and not (0.0 <= self.leak_p <= 1.0):
            raise ValueError(f"leak fraction must lie in [0, 1], got {self.leak_p}")
        if self.alpha is not None and not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"noise level must lie in [0, 1], got {self.alpha}")
        if self.command is not None:
            missing = [p for p in PLACEHOLDERS if p not in self.command]
            if missing:
                raise ValueError(
                    f"adapter command must contain the placeholders {', '.join(missing)}")
        if self.timeout_secs <= 0:
            raise ValueError("timeout_secs must be positive")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.leak_p is not None:
            out["leak_p"] = self.leak_p
        if self.control is not None:
            out["control_rows"] = self.control.n_rows
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.command is not None:
            out["command"] = self.command
            out["timeout_secs"] = self.timeout_secs
        return out


def _rows_at(t: Table, idx) -> Table:
    """Rows of t at idx (repeats allowed), with fresh sequential row ids."""
    idx = np.asarray(idx, dtype=np.int64)
    cells = tuple(arr[idx] for arr in t.cells)
    return Table(t.schema, cells, np.arange(len(idx), dtype=np.int64))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def generate(spec: GeneratorSpec, train: Table, size: int, seed: int) -> Table:
    """Produce a synthetic table of exactly `size` rows with fresh row ids.

    Deterministic in (spec, train, size, seed) for every non-external kind.
    """
    if size < 1:
        raise ValueError(f"size must be at least 1, got {size}")
    if train.n_rows == 0:
        raise ValueError("training table is empty")
    if spec.kind == IDENTITY:
        out = _rows_at(train, np.arange(size) % train.n_rows)
    elif spec.kind == INDEPENDENT_MARGINALS:
        out = gen_independent_marginals(train, size, seed)
    elif spec.kind == LEAKY:
        out = gen_leaky(train, spec.control, spec.leak_p, size, seed)
    elif spec.kind == ANONYMIZER:
        noisy = anonymize(train, spec.alpha, seed)
        out = _rows_at(noisy, np.arange(size) % noisy.n_rows)
    else:
        out = run_external(spec.command, train, train.schema, size, seed,
                           timeout_secs=spec.timeout_secs)
    return Table(out.schema, out.cells, np.arange(size, dtype=np.int64))


def gen_independent_marginals(train: Table, size: int, seed: int) -> Table:
    """Each cell drawn independently from its column's empirical marginal."""
    rng = _rng(seed)
    n = train.n_rows
    cells = tuple(arr[rng.integers(0, n, size)] for arr in train.cells)
    return Table(train.schema, cells, np.arange(size, dtype=np.int64))


def gen_leaky(train: Table, control: Table, p: float, size: int, seed: int) -> Table:
    """round(p*size) verbatim training rows plus control rows, shuffled.

    The control table stands in for fresh draws from the population, so it
    must not share row ids with the training table.
    """
    if control.schema != train.schema:
        raise SchemaError("control table schema does not match the training table")
    if control.n_rows < size:
        raise ValueError(
            f"control table has {control.n_rows} rows, need at least {size}")
    if size > train.n_rows:
        raise ValueError(f"size {size} exceeds the {train.n_rows} training rows")
    if len(np.intersect1d(train.row_ids, control.row_ids)) > 0:
        raise ValueError("control row ids overlap the training row ids")
    k = int(np.floor(p * size + 0.5))
    rng = _rng(seed)
    train_idx = rng.choice(train.n_rows, k, replace=False)
    control_idx = rng.choice(control.n_rows, size - k, replace=False)
    cells = tuple(
        np.concatenate([t_arr[train_idx], c_arr[control_idx]])
        for t_arr, c_arr in zip(train.cells, control.cells))
    combined = Table(train.schema, cells, np.arange(size, dtype=np.int64))
    return _rows_at(combined, rng.permutation(size))


def anonymize(train: Table, alpha: float, seed: int) -> Table:
    """Noise every cell while preserving each column's marginal.

    Numerical columns move through a per-column quantile map to normal
    space, mix with fresh standard-normal noise at weight sqrt(alpha^3),
    and map back. Categorical cells are resampled from the empirical
    marginal with probability alpha^2. alpha=0 returns the values exactly.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"noise level must lie in [0, 1], got {alpha}")
    alpha_num = alpha ** 3
    alpha_cat = alpha ** 2
    rng = _rng(seed)
    n = train.n_rows
    cells = []
    for col, values in zip(train.schema.columns, train.cells):
        if col.kind == NUMERICAL:
            if alpha_num == 0.0:
                cells.append(np.array(values))
                continue
            qm = fit_quantile_map(values)
            noise = rng.standard_normal(n)
            mixed = np.sqrt(1.0 - alpha_num) * qm.forward(values) + np.sqrt(alpha_num) * noise
            cells.append(qm.inverse(mixed))
        else:
            if alpha_cat == 0.0:
                cells.append(np.array(values))
                continue
            resample = rng.random(n) < alpha_cat
            draws = values[rng.integers(0, n, n)]
            cells.append(np.where(resample, draws, values))
    return Table(train.schema, tuple(cells), np.arange(n, dtype=np.int64))


def run_external(command_template: str, train: Table, schema: Schema, size: int,
                 seed: int, workdir=None,
                 timeout_secs: float = DEFAULT_TIMEOUT_SECS) -> Table:
    """Run an adapter subprocess and load its output table.

    The adapter contract: the command receives {train} (input CSV),
    {schema} (schema JSON), {out} (output CSV path), {size} and {seed}; it
    must exit 0 after writing exactly `size` schema-conforming rows to
    {out}. The working directory is removed on success and kept for
    inspection on failure.
    """
    missing = [p for p in PLACEHOLDERS if p not in command_template]
    if missing:
        raise ValueError(
            f"adapter command must contain the placeholders {', '.join(missing)}")
    if workdir is None:
        workdir = Path(tempfile.mkdtemp(prefix="sdg-adapter-"))
    else:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
    train_path = workdir / "train.csv"
    schema_path = workdir / "schema.json"
    out_path = workdir / "synthetic.csv"
    train.to_csv(train_path)
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
    fills = {
        "{train}": str(train_path),
        "{schema}": str(schema_path),
        "{out}": str(out_path),
        "{size}": str(size),
        "{seed}": str(seed),
    }
    # split the raw template first so paths substituted in stay single tokens
    argv = []
    for token in shlex.split(command_template):
        for key, value in fills.items():
            token = token.replace(key, value)
        argv.append(token)
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=timeout_secs)
    except subprocess.TimeoutExpired:
        raise ExternalTimeoutError(
            f"adapter exceeded the {timeout_secs:g}s timeout: {argv[0]} "
            f"(inputs kept in {workdir})") from None
    except OSError as exc:
        raise ExternalExitError(
            f"adapter could not be launched: {exc} (inputs kept in {workdir})") from exc
    if proc.returncode != 0:
        tail = proc.stderr.strip()[-2000:]
        raise ExternalExitError(
            f"adapter violated the exit-0 contract clause: exit code {proc.returncode} "
            f"(inputs kept in {workdir})\nstderr: {tail}",
            exit_code=proc.returncode, stderr=proc.stderr)
    if not out_path.exists():
        raise ExternalOutputError(
            f"adapter wrote nothing to {{out}}: expected a CSV at {out_path} "
            f"(inputs kept in {workdir})")
    try:
        table = load_table(out_path, schema_path)
    except (SchemaError, DataError) as exc:
        raise ExternalOutputError(
            f"adapter output is not schema-conforming: {exc} "
            f"(inputs kept in {workdir})") from exc
    if table.n_rows != size:
        raise ExternalOutputError(
            f"adapter violated the row-count contract clause: wrote {table.n_rows} "
            f"rows, expected exactly {size} (inputs kept in {workdir})")
    shutil.rmtree(workdir, ignore_errors=True)
    return table
