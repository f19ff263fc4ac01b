"""Relative membership-inference score for a synthetic data generator.

The audit splits the data into two candidate target sets plus a shared
rest, runs the generator once per candidate training set, and trains a
discriminator to tell the two synthetic outputs apart. Its AUROC on the
held-out target rows, read at the moment the discriminator has learned
its own training data, is the privacy score: 0.5 means the generator
gave nothing away about which rows it saw, 1.0 means full leakage.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discriminator import MlpConfig, ScoreTrace, mlp_forward, train_with_trace
from .generators import GeneratorSpec, generate
from .stats import accuracy_at_half, binomial_test_upper
from .tabular import Table, concat_tables, encode, fit_encoder, split_remia

SIGNIFICANCE_LEVEL = 0.001


@dataclass(frozen=True)
class RemiaConfig:
    target_fraction: float = 1.0
    train_auroc_threshold: float = 0.99
    repetitions: int = 4
    mlp: MlpConfig = field(default_factory=MlpConfig)
    base_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.target_fraction <= 1.0):
            raise ValueError(
                f"target_fraction must lie in (0, 1], got {self.target_fraction}")
        if not (0.5 < self.train_auroc_threshold <= 1.0):
            raise ValueError(
                f"train_auroc_threshold must lie in (0.5, 1], got {self.train_auroc_threshold}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


@dataclass(frozen=True)
class RemiaResult:
    """Per-repetition scores plus aggregates; lists are indexed by repetition."""

    scores: tuple
    mean_score: float
    std_score: float
    accuracy_counts: tuple           # (correct, total) per repetition
    p_value: float
    significant: bool
    selected_iterations: tuple
    threshold_not_reached: tuple
    max_smoothed_target: tuple
    records_used: int
    seeds: tuple
    traces: tuple                    # ScoreTrace per repetition


def leaky_ceiling(p: float) -> float:
    """Highest achievable membership accuracy against the leaky risk model."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"leak fraction must lie in [0, 1], got {p}")
    return (1.0 + p) / 2.0


def select_score(trace: ScoreTrace, threshold: float):
    """Read the smoothed target value at the stopping iteration.

    The stopping iteration k is the first recorded step whose raw train
    AUROC reaches the threshold; when no step does, the last recorded step
    is used and the returned flag is True.
    """
    if trace.target_series is None or trace.smoothed_target is None:
        raise ValueError("trace has no target series to select a score from")
    train_vals = trace.train_series.values
    if len(train_vals) == 0:
        raise ValueError("empty trace")
    reached = np.nonzero(train_vals >= threshold)[0]
    if len(reached) > 0:
        pos = int(reached[0])
        not_reached = False
    else:
        pos = len(train_vals) - 1
        not_reached = True
    k = int(trace.train_series.iterations[pos])
    score = float(trace.smoothed_target.values[pos])
    return score, k, not_reached


@dataclass
class _Repetition:
    score: float
    correct: int
    total: int
    iteration: int
    not_reached: bool
    max_smoothed: float
    trace: ScoreTrace
    records_used: int


def _run_repetition(data: Table, generator: GeneratorSpec, cfg: RemiaConfig,
                    seed: int) -> _Repetition:
    split = split_remia(data, cfg.target_fraction, seed)
    # the generator sees each candidate training set once, same seed, so a
    # deterministic generator differs between the runs only through its input
    s1 = generate(generator, split.x1, split.x1.n_rows, seed)
    s2 = generate(generator, split.x2, split.x2.n_rows, seed)
    synth = concat_tables([s1, s2])
    synth_labels = np.concatenate([np.ones(s1.n_rows), np.zeros(s2.n_rows)])
    targets = concat_tables([split.t1, split.t2])
    target_labels = np.concatenate([np.ones(split.t1.n_rows), np.zeros(split.t2.n_rows)])
    # the attacker only holds synthetic data, so the encoder is fitted there
    enc = fit_encoder(synth)
    x_synth = encode(synth, enc)
    x_target = encode(targets, enc)
    outcome = train_with_trace(
        x_synth, synth_labels, x_target, target_labels,
        cfg.mlp.replace(seed=seed),
        snapshot_train_auroc=cfg.train_auroc_threshold)
    score, k, not_reached = select_score(outcome.trace, cfg.train_auroc_threshold)
    state_at_k = outcome.snapshot_state if not not_reached else outcome.last_eval_state
    probs = mlp_forward(state_at_k, x_target)
    correct, total = accuracy_at_half(probs, target_labels)
    return _Repetition(
        score=score,
        correct=correct,
        total=total,
        iteration=k,
        not_reached=not_reached,
        max_smoothed=float(outcome.trace.smoothed_target.values.max()),
        trace=outcome.trace,
        records_used=split.t1.n_rows + split.t2.n_rows + split.r.n_rows,
    )


def remia_score(data: Table, generator: GeneratorSpec, cfg: RemiaConfig,
                jobs: int = 1) -> RemiaResult:
    """Run the full audit: `repetitions` independent split/generate/attack
    rounds, aggregated into one score and one significance test."""
    seeds = [cfg.base_seed + r for r in range(cfg.repetitions)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(
                lambda s: _run_repetition(data, generator, cfg, s), seeds))
    else:
        reps = [_run_repetition(data, generator, cfg, s) for s in seeds]
    scores = tuple(r.score for r in reps)
    total_correct = sum(r.correct for r in reps)
    total_count = sum(r.total for r in reps)
    p_value = binomial_test_upper(total_correct, total_count)
    return RemiaResult(
        scores=scores,
        mean_score=float(np.mean(scores)),
        std_score=float(np.std(scores)),
        accuracy_counts=tuple((r.correct, r.total) for r in reps),
        p_value=p_value,
        significant=p_value < SIGNIFICANCE_LEVEL,
        selected_iterations=tuple(r.iteration for r in reps),
        threshold_not_reached=tuple(r.not_reached for r in reps),
        max_smoothed_target=tuple(r.max_smoothed for r in reps),
        records_used=reps[0].records_used,
        seeds=tuple(seeds),
        traces=tuple(r.trace for r in reps),
    )
