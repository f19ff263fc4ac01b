"""Fidelity and utility metrics for synthetic tables.

Detection trains the shared MLP to tell real rows from synthetic ones;
a mean fold AUROC near 0.5 means high fidelity. ML efficacy compares a
model trained on synthetic data against one trained on real data, both
evaluated on held-out real rows; differences near 0 mean the synthetic
data preserved the learning signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discriminator import MlpConfig, mlp_forward, train_regressor, train_with_trace
from .stats import auroc
from .tabular import CATEGORICAL, NUMERICAL, Table, concat_tables, encode, fit_encoder

TASK_BINARY = "binary"
TASK_MULTICLASS = "multiclass"
TASK_REGRESSION = "regression"
TASKS = (TASK_BINARY, TASK_MULTICLASS, TASK_REGRESSION)

# echoed in reports so scores are tied to the model that produced them
MODEL_ID = "mlp-layernorm-silu"

TRAIN_SHARE = 0.8


@dataclass(frozen=True)
class DetectionResult:
    mean_auroc: float
    fold_aurocs: np.ndarray
    fold_scores: tuple       # held-out discriminator outputs per fold
    fold_labels: tuple       # matching 1=synthetic labels per fold


def detection(real: Table, synth: Table, folds: int = 5, seed: int = 0,
              mlp: MlpConfig = MlpConfig()) -> DetectionResult:
    """Mean held-out AUROC of a real-vs-synthetic discriminator over
    seeded 80/20 splits of the pooled rows. Lower is better fidelity."""
    if real.n_rows == 0 or synth.n_rows == 0:
        raise ValueError("detection needs non-empty real and synth tables")
    if real.schema != synth.schema:
        raise ValueError("real and synth schemas differ")
    if folds < 1:
        raise ValueError("folds must be at least 1")
    pooled = concat_tables([real, synth])
    labels = np.concatenate([np.zeros(real.n_rows), np.ones(synth.n_rows)])
    n = pooled.n_rows
    n_train = int(TRAIN_SHARE * n)
    if n_train == 0 or n_train == n:
        raise ValueError(f"pool of {n} rows cannot be split 80/20")
    fold_aurocs = np.empty(folds)
    fold_scores = []
    fold_labels = []
    for fold in range(folds):
        fold_seed = seed + fold
        perm = np.random.Generator(np.random.PCG64(fold_seed)).permutation(n)
        train_idx, val_idx = perm[:n_train], perm[n_train:]
        y_train, y_val = labels[train_idx], labels[val_idx]
        for part, y in (("training", y_train), ("validation", y_val)):
            if len(np.unique(y)) < 2:
                raise ValueError(
                    f"fold {fold} is degenerate: {part} portion has a single class")
        enc = fit_encoder(pooled.take(train_idx))
        x_train = encode(pooled.take(train_idx), enc)
        x_val = encode(pooled.take(val_idx), enc)
        outcome = train_with_trace(x_train, y_train, cfg=mlp.replace(seed=fold_seed))
        scores = mlp_forward(outcome.state, x_val)
        fold_aurocs[fold] = auroc(scores, y_val)
        fold_scores.append(scores)
        fold_labels.append(y_val)
    return DetectionResult(
        mean_auroc=float(fold_aurocs.mean()),
        fold_aurocs=fold_aurocs,
        fold_scores=tuple(fold_scores),
        fold_labels=tuple(fold_labels),
    )


@dataclass(frozen=True)
class EfficacyResult:
    difference: float        # synth_score - real_score
    synth_score: float
    real_score: float
    task: str


def _label_values(tables, column_name, declared):
    if declared is not None:
        return list(declared)
    seen = np.concatenate([t.column(column_name) for t in tables])
    return sorted(np.unique(seen).tolist())


def _fit_task_model(train: Table, target_column: str, task: str,
                    label_set, mlp: MlpConfig):
    features = train.select_columns(
        [n for n in train.schema.names if n != target_column])
    enc = fit_encoder(features)
    x = encode(features, enc)
    target = train.column(target_column)
    if task == TASK_REGRESSION:
        # standardize the target so the fixed learning rate is usable at
        # any scale; predictions are mapped back before scoring
        mean = float(target.mean())
        std = float(target.std())
        if std == 0.0:
            std = 1.0
        state = train_regressor(x, (target - mean) / std, cfg=mlp)
        return enc, [state], (mean, std)
    present = set(np.unique(target).tolist())
    if task == TASK_BINARY:
        if len(present) < 2:
            raise ValueError("binary target has a single class in the training table")
        y = (target == label_set[1]).astype(np.float64)
        outcome = train_with_trace(x, y, cfg=mlp)
        return enc, [outcome.state], None
    if len(present) < 2:
        raise ValueError("multiclass target has a single class in the training table")
    states = []
    for label in label_set:
        if label in present:
            y = (target == label).astype(np.float64)
            states.append(train_with_trace(x, y, cfg=mlp).state)
        else:
            states.append(None)   # class unseen in training: never predicted
    return enc, states, None


def _score_task_model(model, test: Table, target_column: str, task: str,
                      label_set) -> float:
    enc, states, extra = model
    features = test.select_columns(
        [n for n in test.schema.names if n != target_column])
    x = encode(features, enc)
    target = test.column(target_column)
    if task == TASK_REGRESSION:
        mean, std = extra
        pred = mlp_forward(states[0], x) * std + mean
        return -float(np.sqrt(np.mean((pred - target) ** 2)))
    if task == TASK_BINARY:
        y = (target == label_set[1]).astype(np.float64)
        return auroc(mlp_forward(states[0], x), y)
    scores = np.full((len(x), len(label_set)), -np.inf)
    for j, state in enumerate(states):
        if state is not None:
            scores[:, j] = mlp_forward(state, x)
    predicted = np.asarray(label_set, dtype=object)[scores.argmax(axis=1)]
    return float(np.mean(predicted == target))


def ml_efficacy(real_train: Table, synth: Table, real_test: Table,
                target_column: str, task: str, seed: int = 0,
                mlp: MlpConfig = MlpConfig()) -> EfficacyResult:
    """Score of a model trained on synth minus one trained on real_train,
    both evaluated on real_test. Binary tasks score AUROC, multiclass
    scores argmax accuracy over one-vs-rest heads, regression scores
    negative RMSE, so higher is uniformly better."""
    for t, name in ((real_train, "real_train"), (synth, "synth"),
                    (real_test, "real_test")):
        if t.n_rows == 0:
            raise ValueError(f"{name} table is empty")
        if t.schema != real_train.schema:
            raise ValueError(f"{name} schema differs from real_train")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    col = real_train.schema.column(target_column)
    if task == TASK_REGRESSION and col.kind != NUMERICAL:
        raise ValueError(f"regression needs a numerical target, got {col.kind}")
    if task in (TASK_BINARY, TASK_MULTICLASS) and col.kind != CATEGORICAL:
        raise ValueError(f"{task} needs a categorical target, got {col.kind}")
    if len(real_train.schema.names) < 2:
        raise ValueError("no feature columns besides the target")
    label_set = None
    if task != TASK_REGRESSION:
        label_set = _label_values(
            (real_train, synth, real_test), target_column, col.categories)
        if task == TASK_BINARY and len(label_set) != 2:
            raise ValueError(
                f"binary task needs exactly 2 target values, found {len(label_set)}")
    cfg = mlp.replace(seed=seed)
    synth_model = _fit_task_model(synth, target_column, task, label_set, cfg)
    real_model = _fit_task_model(real_train, target_column, task, label_set, cfg)
    synth_score = _score_task_model(synth_model, real_test, target_column, task, label_set)
    real_score = _score_task_model(real_model, real_test, target_column, task, label_set)
    return EfficacyResult(
        difference=synth_score - real_score,
        synth_score=synth_score,
        real_score=real_score,
        task=task,
    )
