"""From-scratch MLP binary classifier with a full training trace.

This is the attacker model for the membership score, the discriminator
for the detection metric, and the default predictive model for ML
efficacy. Architecture: per hidden layer, layer-normalize the input,
apply gain/offset, an affine map, then SiLU; the head is a single affine
unit read through a sigmoid (classification) or raw (regression).
Training is minibatch adaptive-moment descent on mean binary
cross-entropy (or mean squared error for the regression head).

All math is float64 numpy. Losses and their gradients use the
softplus/sigmoid forms that are exactly antisymmetric under a final-layer
sign flip, which the trace tests rely on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .stats import ScoreSeries, auroc, smooth_centered

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
NORM_EPS = 1e-5
LOSS_IMPROVEMENT = 1e-6

SIGMOID_HEAD = "sigmoid"
LINEAR_HEAD = "linear"


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (100, 50)
    learning_rate: float = 5e-3
    max_epochs: int = 1000
    batch_size: int = 500
    patience: int = 50
    eval_every: int = 2
    seed: int = 0

    def __post_init__(self):
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("learning rate, max_epochs and batch_size must be positive")
        if self.patience < 1 or self.eval_every < 1:
            raise ValueError("patience and eval_every must be positive")

    def replace(self, **kwargs) -> "MlpConfig":
        return dataclasses.replace(self, **kwargs)


@dataclass
class MlpState:
    """Parameters plus optimizer moments; mutated in place during training."""

    weights: list
    biases: list
    norm_gains: list
    norm_offsets: list
    moment1: list
    moment2: list
    epoch: int = 0
    step: int = 0
    head: str = SIGMOID_HEAD

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def parameters(self) -> list:
        """All parameter arrays in a fixed order, aligned with the moments."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        for g, o in zip(self.norm_gains, self.norm_offsets):
            params.extend([g, o])
        return params

    def copy(self) -> "MlpState":
        return MlpState(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            norm_gains=[g.copy() for g in self.norm_gains],
            norm_offsets=[o.copy() for o in self.norm_offsets],
            moment1=[m.copy() for m in self.moment1],
            moment2=[m.copy() for m in self.moment2],
            epoch=self.epoch,
            step=self.step,
            head=self.head,
        )


def mlp_init(input_dim: int, cfg: MlpConfig, head: str = SIGMOID_HEAD) -> MlpState:
    """Seeded init: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases,
    unit normalization gains, zero offsets and moments."""
    if input_dim < 1:
        raise ValueError("input_dim must be at least 1")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,))))
    dims = [input_dim, *cfg.hidden_sizes, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    norm_gains = [np.ones(dims[i]) for i in range(len(cfg.hidden_sizes))]
    norm_offsets = [np.zeros(dims[i]) for i in range(len(cfg.hidden_sizes))]
    state = MlpState(weights, biases, norm_gains, norm_offsets, [], [], head=head)
    state.moment1 = [np.zeros_like(p) for p in state.parameters()]
    state.moment2 = [np.zeros_like(p) for p in state.parameters()]
    return state


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    # log(1 + e^z) without overflow
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


def _forward(state: MlpState, x: np.ndarray, want_cache: bool = False):
    """Raw head outputs (pre-sigmoid for classification) plus backprop cache."""
    h = x
    caches = []
    n_hidden = len(state.norm_gains)
    for i in range(n_hidden):
        mu = h.mean(axis=1, keepdims=True)
        var = h.var(axis=1, keepdims=True)
        scale = np.sqrt(var + NORM_EPS)
        h_hat = (h - mu) / scale
        g = state.norm_gains[i] * h_hat + state.norm_offsets[i]
        z = g @ state.weights[i] + state.biases[i]
        sig = _sigmoid(z)
        a = z * sig
        if want_cache:
            caches.append((h_hat, scale, g, z, sig))
        h = a
    out = (h @ state.weights[-1] + state.biases[-1]).ravel()
    if want_cache:
        caches.append(h)
    return out, caches


def mlp_forward(state: MlpState, batch: np.ndarray) -> np.ndarray:
    """Model outputs per row: probability in (0,1) for the sigmoid head,
    raw prediction for the linear head."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != state.input_dim:
        raise ValueError(
            f"batch width {batch.shape} does not match input_dim {state.input_dim}")
    raw, _ = _forward(state, batch)
    if state.head == SIGMOID_HEAD:
        return _sigmoid(raw)
    return raw


def _loss_and_grad(raw: np.ndarray, y: np.ndarray, head: str):
    """Mean loss and its gradient with respect to the raw head outputs.

    The cross-entropy uses the sign-symmetric softplus/sigmoid forms so a
    network with a mirrored final layer trained on flipped labels follows
    a bit-identical trajectory.
    """
    n = len(y)
    if head == SIGMOID_HEAD:
        loss = float(np.mean(y * _softplus(-raw) + (1.0 - y) * _softplus(raw)))
        grad = ((1.0 - y) * _sigmoid(raw) - y * _sigmoid(-raw)) / n
    else:
        diff = raw - y
        loss = float(np.mean(diff * diff))
        grad = 2.0 * diff / n
    return loss, grad


def _backward(state: MlpState, caches, grad_raw: np.ndarray) -> list:
    """Gradients for every parameter, in parameters() order."""
    n_hidden = len(state.norm_gains)
    d_out = grad_raw[:, None]
    last_input = caches[-1]
    grads_w = [None] * len(state.weights)
    grads_b = [None] * len(state.biases)
    grads_g = [None] * n_hidden
    grads_o = [None] * n_hidden
    grads_w[-1] = last_input.T @ d_out
    grads_b[-1] = d_out.sum(axis=0)
    da = d_out @ state.weights[-1].T
    for i in range(n_hidden - 1, -1, -1):
        h_hat, scale, g, z, sig = caches[i]
        dz = da * (sig * (1.0 + z * (1.0 - sig)))
        grads_w[i] = g.T @ dz
        grads_b[i] = dz.sum(axis=0)
        dg = dz @ state.weights[i].T
        grads_g[i] = (dg * h_hat).sum(axis=0)
        grads_o[i] = dg.sum(axis=0)
        dh_hat = dg * state.norm_gains[i]
        # layer-norm backward with population variance per row
        mean_d = dh_hat.mean(axis=1, keepdims=True)
        mean_dh = (dh_hat * h_hat).mean(axis=1, keepdims=True)
        da = (dh_hat - mean_d - h_hat * mean_dh) / scale
    grads = []
    for w, b in zip(grads_w, grads_b):
        grads.extend([w, b])
    for g, o in zip(grads_g, grads_o):
        grads.extend([g, o])
    return grads


def _adam_step(state: MlpState, grads: list, lr: float) -> None:
    state.step += 1
    t = state.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for p, g, m1, m2 in zip(state.parameters(), grads, state.moment1, state.moment2):
        m1 *= ADAM_BETA1
        m1 += (1.0 - ADAM_BETA1) * g
        m2 *= ADAM_BETA2
        m2 += (1.0 - ADAM_BETA2) * (g * g)
        p -= lr * (m1 / c1) / (np.sqrt(m2 / c2) + ADAM_EPS)


@dataclass(frozen=True)
class ScoreTrace:
    """AUROC recordings over training; target parts absent without an eval set."""

    train_series: ScoreSeries
    target_series: ScoreSeries | None
    smoothed_target: ScoreSeries | None


@dataclass
class FitOutcome:
    state: MlpState
    trace: ScoreTrace
    snapshot_state: MlpState | None = None
    snapshot_iteration: int | None = None
    last_eval_state: MlpState | None = None
    last_eval_iteration: int | None = None
    epochs_run: int = 0
    stopped_early: bool = False
    epoch_losses: list = field(default_factory=list)


def _check_xy(x, y, what):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or len(x) != len(y) or len(x) == 0:
        raise ValueError(f"{what}: need a non-empty matrix with one label per row")
    return x, y


def train_with_trace(train_x, train_y, eval_x=None, eval_y=None,
                     cfg: MlpConfig = MlpConfig(), *,
                     init_state: MlpState | None = None,
                     snapshot_train_auroc: float | None = None) -> FitOutcome:
    """Train the classifier, recording train (and optionally eval) AUROC
    every cfg.eval_every epochs.

    AUROC is computed on the raw head outputs, which rank identically to
    the probabilities. When snapshot_train_auroc is given, the model state
    is copied at the first recorded step whose train AUROC reaches it; the
    state at the most recent recorded step is kept as well.
    """
    train_x, train_y = _check_xy(train_x, train_y, "training set")
    if train_y.min() == train_y.max():
        raise ValueError("training labels must contain both classes")
    if (eval_x is None) != (eval_y is None):
        raise ValueError("eval_x and eval_y must be given together")
    if eval_x is not None:
        eval_x, eval_y = _check_xy(eval_x, eval_y, "eval set")
    state = init_state if init_state is not None else mlp_init(train_x.shape[1], cfg)
    if state.input_dim != train_x.shape[1]:
        raise ValueError("init_state width does not match the training matrix")
    return _run_training(state, train_x, train_y, eval_x, eval_y, cfg,
                         snapshot_train_auroc)


def train_regressor(x, y, cfg: MlpConfig = MlpConfig()) -> MlpState:
    """Same network with a linear head trained on mean squared error."""
    x, y = _check_xy(x, y, "training set")
    state = mlp_init(x.shape[1], cfg, head=LINEAR_HEAD)
    return _run_training(state, x, y, None, None, cfg, None).state


def _run_training(state, train_x, train_y, eval_x, eval_y, cfg,
                  snapshot_train_auroc) -> FitOutcome:
    n = len(train_x)
    shuffle_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,))))
    outcome = FitOutcome(state=state, trace=None)
    iters, train_vals, target_vals = [], [], []
    best_loss = np.inf
    stall = 0
    trace_enabled = state.head == SIGMOID_HEAD

    def record(epoch):
        raw_train, _ = _forward(state, train_x)
        p_train = auroc(raw_train, train_y)
        iters.append(epoch)
        train_vals.append(p_train)
        if eval_x is not None:
            raw_eval, _ = _forward(state, eval_x)
            target_vals.append(auroc(raw_eval, eval_y))
        outcome.last_eval_state = state.copy()
        outcome.last_eval_iteration = epoch
        if (snapshot_train_auroc is not None and outcome.snapshot_state is None
                and p_train >= snapshot_train_auroc):
            outcome.snapshot_state = state.copy()
            outcome.snapshot_iteration = epoch

    for epoch in range(1, cfg.max_epochs + 1):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            raw, caches = _forward(state, train_x[idx], want_cache=True)
            loss, grad_raw = _loss_and_grad(raw, train_y[idx], state.head)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            grads = _backward(state, caches, grad_raw)
            _adam_step(state, grads, cfg.learning_rate)
            loss_sum += loss * len(idx)
        epoch_loss = loss_sum / n
        state.epoch = epoch
        outcome.epoch_losses.append(epoch_loss)
        if trace_enabled and epoch % cfg.eval_every == 0:
            record(epoch)
        if best_loss - epoch_loss > LOSS_IMPROVEMENT:
            best_loss = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                outcome.stopped_early = True
                break
    outcome.epochs_run = state.epoch
    if trace_enabled:
        if not iters:
            # terminated before the first scheduled recording
            record(state.epoch)
        train_series = ScoreSeries(np.array(iters), np.array(train_vals))
        if eval_x is not None:
            target_series = ScoreSeries(np.array(iters), np.array(target_vals))
            smoothed = smooth_centered(target_series)
        else:
            target_series = smoothed = None
        outcome.trace = ScoreTrace(train_series, target_series, smoothed)
    return outcome


def gradient_check(state: MlpState, batch, labels) -> float:
    """Max relative disagreement between analytic and central finite-difference
    gradients over every parameter element. Finite differences run in
    extended precision with step 1e-4."""
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if len(batch) > 8:
        raise ValueError("gradient_check expects a small batch (at most 8 rows)")
    raw, caches = _forward(state, batch, want_cache=True)
    _, grad_raw = _loss_and_grad(raw, labels, state.head)
    analytic = _backward(state, caches, grad_raw)

    wide = state.copy()
    wide.weights = [w.astype(np.longdouble) for w in wide.weights]
    wide.biases = [b.astype(np.longdouble) for b in wide.biases]
    wide.norm_gains = [g.astype(np.longdouble) for g in wide.norm_gains]
    wide.norm_offsets = [o.astype(np.longdouble) for o in wide.norm_offsets]
    batch_wide = batch.astype(np.longdouble)
    labels_wide = labels.astype(np.longdouble)

    def loss_at() -> np.longdouble:
        raw_w, _ = _forward(wide, batch_wide)
        if wide.head == SIGMOID_HEAD:
            per = labels_wide * _softplus(-raw_w) + (1.0 - labels_wide) * _softplus(raw_w)
        else:
            diff = raw_w - labels_wide
            per = diff * diff
        return per.mean()

    step = np.longdouble(1e-4)
    worst = 0.0
    for p_wide, p_grad in zip(wide.parameters(), analytic):
        flat = p_wide.reshape(-1)
        grad_flat = np.asarray(p_grad).reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + step
            up = loss_at()
            flat[k] = keep - step
            down = loss_at()
            flat[k] = keep
            numeric = float((up - down) / (2 * step))
            a = float(grad_flat[k])
            # the central difference itself carries ~step^2 truncation noise,
            # so elements below 1e-3 are compared on an absolute scale
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
            worst = max(worst, rel)
    return worst
