"""Two-pass training loop: forward M points, backprop a selected subset of m.

Epochs are counted by forward-pass coverage of the training set, so the
number of backpropagated points drops by the subsampling fraction. Cost is
accounted in abstract units where a forward pass costs 1/3 per example and
a forward+backward pass costs 1, giving M/3 + m per selective step against
M for a full-batch step.
"""

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import BadFraction, TrainingDiverged
from .gram import gram_implicit
from .model import accuracy, forward_tape, weighted_backward
from .omp import Selection
from .selection import (
    LossBuffer,
    select_grad_match,
    select_loss_based,
    select_random,
)

SCHEDULES = ("constant", "step", "cosine")
OPTIMIZERS = ("sgd_momentum", "plain_sgd")
BATCH_MODES = ("fixed", "scaled")


@dataclass
class TrainConfig:
    base_batch: int = 128
    fraction: float = 1.0
    batch_mode: str = "fixed"
    epochs: int = 20
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 0.0
    schedule: str = "constant"
    milestones: tuple = ()
    decay_factor: float = 0.2
    base_lr: float = 0.1
    lr_factor: float = 1.0
    stretch_schedule: bool = False
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise BadFraction(f"fraction must be in (0, 1], got {self.fraction}")
        if self.batch_mode not in BATCH_MODES:
            raise ValueError(f"unknown batch_mode {self.batch_mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        ms = tuple(self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError("milestones must be strictly increasing")
        self.milestones = ms
        if not 0 < self.lr_factor <= 10:
            raise ValueError(f"lr_factor must be in (0, 10], got {self.lr_factor}")
        if not 0 <= self.label_noise < 1:
            raise ValueError(f"label_noise must be in [0, 1), got {self.label_noise}")

    @property
    def total_epochs(self):
        """Epochs actually run; stretched by 1/lr_factor when enabled."""
        if self.stretch_schedule:
            return max(1, round(self.epochs / self.lr_factor))
        return self.epochs


@dataclass
class MetricsRecord:
    epoch: int
    step: int
    train_loss: float
    test_accuracy: float
    backprop_points_cum: int
    cost_units_cum: float
    selection_size_mean: float
    weight_max: float


METRICS_FIELDS = [f.name for f in fields(MetricsRecord)]


def resolve_batch_sizes(cfg):
    """(forward batch M, subset size m) for the configured batch mode.

    Fixed mode keeps the forward batch at base_batch and shrinks the subset;
    scaled mode inflates the forward batch so the subset stays at base_batch.
    """
    if cfg.batch_mode == "fixed":
        M = cfg.base_batch
        m = round(cfg.fraction * cfg.base_batch)
    else:
        M = round(cfg.base_batch / cfg.fraction)
        m = cfg.base_batch
    if m < 1:
        raise BadFraction(
            f"fraction {cfg.fraction} yields an empty subset for batch {cfg.base_batch}"
        )
    return M, m


def cost_units(M, m):
    """Abstract cost of one selective step: forward M at 1/3 each, then m full."""
    if m > M:
        raise BadFraction(f"m {m} exceeds M {M}")
    return M / 3 + m


def lr_at(cfg, epoch):
    """Learning rate at a (possibly fractional) epoch.

    The initial rate is lr_factor * base_lr; with stretch_schedule the step
    milestones and the cosine horizon scale by 1/lr_factor.
    """
    lr0 = cfg.lr_factor * cfg.base_lr
    stretch = 1.0 / cfg.lr_factor if cfg.stretch_schedule else 1.0
    if cfg.schedule == "constant":
        return lr0
    if cfg.schedule == "step":
        decays = sum(epoch >= ms * stretch for ms in cfg.milestones)
        return lr0 * cfg.decay_factor**decays
    horizon = cfg.epochs * stretch
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * epoch / horizon))


def apply_label_noise(labels, fraction, num_classes, rng):
    """Redraw labels of floor(fraction * N) uniformly chosen training points."""
    if not 0 <= fraction < 1:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    labels = np.asarray(labels).copy()
    n_noisy = int(fraction * labels.shape[0])
    if n_noisy == 0:
        return labels
    idx = rng.choice(labels.shape[0], size=n_noisy, replace=False)
    labels[idx] = rng.integers(0, num_classes, size=n_noisy)
    return labels


def sgd_update(theta, velocity, grad, lr, momentum=0.0, nesterov=False):
    """One (Nesterov) momentum SGD step; returns (new theta, new velocity).

    Momentum buffers are plain gradient accumulators; selection weights only
    shape the gradient estimate fed in here.
    """
    velocity = momentum * velocity + grad
    if nesterov and momentum > 0:
        theta = theta - lr * (grad + momentum * velocity)
    else:
        theta = theta - lr * velocity
    return theta, velocity


def _identity_selection(M):
    return Selection(np.arange(M), np.ones(M))


def _select(strategy, tape, m, buffer, rng):
    if m >= tape.M:
        # Full-batch step: selection is the identity and draws no randomness.
        return _identity_selection(tape.M)
    if strategy.kind == "random":
        return select_random(tape.M, m, rng)
    if strategy.kind == "loss_based":
        return select_loss_based(tape.losses, m, strategy, buffer, rng)
    return select_grad_match(gram_implicit(tape), m, strategy, rng)


def run_training(cfg, strategy, dataset, model):
    """Train ``model`` in place; returns one MetricsRecord per epoch.

    Raises :class:`TrainingDiverged` (carrying the records so far plus a
    diagnostic row) when a non-finite loss appears.
    """
    rng = np.random.default_rng(cfg.seed)
    X, y = dataset.X_train, dataset.y_train
    if cfg.label_noise > 0:
        y = apply_label_noise(y, cfg.label_noise, dataset.num_classes, rng)

    M, m_nominal = resolve_batch_sizes(cfg)
    capacity = strategy.buffer_capacity or 8 * cfg.base_batch
    buffer = LossBuffer(capacity)

    theta = model.get_params()
    velocity = np.zeros_like(theta)
    mu = cfg.momentum if cfg.optimizer == "sgd_momentum" else 0.0

    N = X.shape[0]
    records = []
    step = 0
    backprop_cum = 0
    cost_cum = 0.0

    for epoch in range(cfg.total_epochs):
        lr = lr_at(cfg, epoch)
        perm = rng.permutation(N)
        loss_sum = 0.0
        sel_sizes = []
        weight_max = 0.0

        for start in range(0, N, M):
            batch = perm[start : start + M]
            Xb, yb = X[batch], y[batch]
            Mb = batch.shape[0]
            try:
                tape = forward_tape(model, Xb, yb)
            except ValueError as exc:  # non-finite activations
                records.append(
                    MetricsRecord(epoch, step, float("nan"), float("nan"),
                                  backprop_cum, cost_cum, float("nan"), float("nan"))
                )
                raise TrainingDiverged(
                    f"non-finite forward pass at epoch {epoch}, step {step}: {exc}",
                    records,
                ) from exc
            if not np.isfinite(tape.losses).all():
                records.append(
                    MetricsRecord(epoch, step, float("nan"), float("nan"),
                                  backprop_cum, cost_cum, float("nan"), float("nan"))
                )
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {step}", records
                )
            loss_sum += tape.losses.sum()

            mb = m_nominal if Mb == M else max(1, int(cfg.fraction * Mb))
            sel = _select(strategy, tape, mb, buffer, rng)
            grad = weighted_backward(model, Xb, yb, sel)

            g = grad + cfg.weight_decay * theta
            theta, velocity = sgd_update(theta, velocity, g, lr, mu, cfg.nesterov)
            model.set_params(theta)

            step += 1
            backprop_cum += sel.size
            cost_cum += cost_units(Mb, sel.size)
            sel_sizes.append(sel.size)
            weight_max = max(weight_max, float(sel.weights.max()))

        records.append(
            MetricsRecord(
                epoch=epoch,
                step=step,
                train_loss=loss_sum / N,
                test_accuracy=accuracy(model, dataset.X_test, dataset.y_test),
                backprop_points_cum=backprop_cum,
                cost_units_cum=cost_cum,
                selection_size_mean=float(np.mean(sel_sizes)),
                weight_max=weight_max,
            )
        )
    return records


def write_metrics_csv(records, path):
    """One row per epoch, fixed field order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_FIELDS)
        for r in records:
            writer.writerow([getattr(r, name) for name in METRICS_FIELDS])
