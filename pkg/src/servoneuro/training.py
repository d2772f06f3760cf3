"""Batch training of an MlpNetwork: damped Gauss-Newton least squares, with
optional weight-decay regularization whose strengths are re-estimated
automatically (Bayesian scheme) or controlled by early stopping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .mlp import MlpNetwork, error_jacobian, forward_batch
from .scaling import AffineScaling

_TINY = 1e-30
_HYPER_LO = 1e-12
_HYPER_HI = 1e12


class StepFailedError(RuntimeError):
    """The damped linear system could not be solved; caller should raise lambda."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss; carries the partial report accumulated so far."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(eq=False)
class Dataset:
    """Regressor matrix plus targets in raw volts, with scaling metadata."""

    inputs: np.ndarray  # P x n_in
    targets: np.ndarray  # P x n_out
    input_scaling: AffineScaling
    target_scaling: AffineScaling

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on pattern count")
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset must contain at least one pattern")
        if self.input_scaling.width != self.inputs.shape[1]:
            raise ValueError("input scaling width mismatch")
        if self.target_scaling.width != self.targets.shape[1]:
            raise ValueError("target scaling width mismatch")

    @classmethod
    def from_raw(cls, inputs, targets, scale: bool = True) -> "Dataset":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if scale:
            in_s = AffineScaling.to_unit_range(inputs)
            out_s = AffineScaling.to_unit_range(targets)
        else:
            in_s = AffineScaling.identity(inputs.shape[1])
            out_s = AffineScaling.identity(targets.shape[1])
        return cls(inputs, targets, in_s, out_s)

    @property
    def n_patterns(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    def scaled_inputs(self) -> np.ndarray:
        return self.input_scaling.apply(self.inputs)

    def scaled_targets(self) -> np.ndarray:
        return self.target_scaling.apply(self.targets)


@dataclass(frozen=True)
class LmConfig:
    lambda_init: float = 1e-3
    lambda_increase: float = 10.0
    lambda_decrease: float = 0.1
    lambda_max: float = 1e10
    max_epochs: int = 100
    goal_ed: float = 0.0

    def __post_init__(self):
        if self.lambda_init <= 0 or self.lambda_max <= 0:
            raise ValueError("lambda_init and lambda_max must be positive")
        if self.lambda_init > self.lambda_max:
            raise ValueError("lambda_init must not exceed lambda_max")
        if self.lambda_increase <= 1.0:
            raise ValueError("lambda_increase must exceed 1")
        if not 0.0 < self.lambda_decrease < 1.0:
            raise ValueError("lambda_decrease must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.goal_ed < 0:
            raise ValueError("goal_ed must be nonnegative")


@dataclass(frozen=True)
class BrConfig:
    lm: LmConfig = field(default_factory=LmConfig)
    alpha_init: float = 1.0  # data-term strength
    beta_init: float = 1e-3  # weight-decay strength
    reestimate_every: int = 1

    def __post_init__(self):
        if self.alpha_init <= 0 or self.beta_init <= 0:
            raise ValueError("alpha_init and beta_init must be positive")
        if self.reestimate_every < 1:
            raise ValueError("reestimate_every must be positive")


@dataclass(frozen=True)
class EarlyStopConfig:
    lm: LmConfig = field(default_factory=LmConfig)
    validation_fraction: float = 0.3
    patience: int = 5
    split_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be positive")


class StopReason(Enum):
    GOAL_REACHED = "GoalReached"
    MAX_EPOCHS = "MaxEpochs"
    LAMBDA_OVERFLOW = "LambdaOverflow"
    EARLY_STOP = "EarlyStop"


@dataclass
class EpochRecord:
    epoch: int
    ed: float
    ew: float
    er: float
    lam: float
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    val_ed: Optional[float] = None


@dataclass
class TrainReport:
    records: list
    stop_reason: StopReason
    final_weights: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "E_D", "E_W", "E_R", "lambda", "alpha", "beta", "gamma", "val_ED"]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch,
                        repr(r.ed),
                        repr(r.ew),
                        repr(r.er),
                        repr(r.lam),
                        "" if r.alpha is None else repr(r.alpha),
                        "" if r.beta is None else repr(r.beta),
                        "" if r.gamma is None else repr(r.gamma),
                        "" if r.val_ed is None else repr(r.val_ed),
                    ]
                )


# --- error functionals -----------------------------------------------------


def compute_ed(net: MlpNetwork, data: Dataset) -> float:
    """Mean squared error (1/2P) sum of squared residuals, in scaled units."""
    e = data.scaled_targets() - forward_batch(net, data.scaled_inputs())
    return float(np.sum(e * e) / (2.0 * data.n_patterns))


def compute_ew(net: MlpNetwork) -> float:
    """Sum of squares of every weight and bias."""
    return float(np.dot(net.weights, net.weights))


def compute_er(alpha: float, beta: float, ed: float, ew: float) -> float:
    """Regularized objective alpha*E_D + beta*E_W."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    return alpha * ed + beta * ew


def _residual(net, X, D):
    return (D - forward_batch(net, X)).ravel()


def _ed_of(net, X, D):
    e = _residual(net, X, D)
    return float(np.dot(e, e) / (2.0 * X.shape[0]))


def _solve_step(J, e, w, norm, lam, alpha, beta):
    """Solve (H + lam*I) delta = -G for the damped Gauss-Newton step.

    H = alpha/norm * J'J + 2*beta*I, G = alpha/norm * J'e + 2*beta*w, the
    Gauss-Newton Hessian and exact gradient of alpha/(2*norm)*sum(e^2)
    + beta*sum(w^2).  Returns (delta, H, G).
    """
    N = w.size
    H = (alpha / norm) * (J.T @ J) + 2.0 * beta * np.eye(N)
    G = (alpha / norm) * (J.T @ e) + 2.0 * beta * w
    try:
        delta = np.linalg.solve(H + lam * np.eye(N), -G)
    except np.linalg.LinAlgError as exc:
        raise StepFailedError(str(exc)) from exc
    if not np.all(np.isfinite(delta)):
        raise StepFailedError("non-finite step")
    return delta, H, G


def lm_step(net: MlpNetwork, data: Dataset, lam: float, alpha: float, beta: float):
    """One damped Gauss-Newton proposal; does not commit the step.

    Returns (candidate_weights, predicted_objective) where the prediction is
    the quadratic model of alpha*E_D + beta*E_W at the candidate.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, D = data.scaled_inputs(), data.scaled_targets()
    J = error_jacobian(net, X, D)
    e = _residual(net, X, D)
    w = net.weights
    delta, H, G = _solve_step(J, e, w, data.n_patterns, lam, alpha, beta)
    er0 = compute_er(alpha, beta, compute_ed(net, data), compute_ew(net))
    predicted = er0 + float(G @ delta) + 0.5 * float(delta @ H @ delta)
    return w + delta, predicted


# --- trainers --------------------------------------------------------------


def _lm_drive(net, X, D, cfg: LmConfig, epoch_hook=None):
    """Shared accept/reject loop minimizing E_D.  The optional hook runs after
    each accepted epoch with (epoch, weights, record) and may return True to
    request an early stop."""
    w = net.weights.copy()
    lam = cfg.lambda_init
    records = []
    ed = _ed_of(net.with_weights(w), X, D)
    if not np.isfinite(ed):
        raise TrainingDivergedError(
            "initial loss is not finite", TrainReport(records, StopReason.MAX_EPOCHS, w)
        )

    stop = StopReason.MAX_EPOCHS
    for epoch in range(1, cfg.max_epochs + 1):
        current = net.with_weights(w)
        J = error_jacobian(current, X, D)
        e = _residual(current, X, D)
        accepted = False
        while True:
            try:
                delta, _, _ = _solve_step(J, e, w, X.shape[0], lam, 1.0, 0.0)
                ed_cand = _ed_of(net.with_weights(w + delta), X, D)
                ok = np.isfinite(ed_cand) and ed_cand < ed
            except StepFailedError:
                ok = False
            if ok:
                w = w + delta
                ed = ed_cand
                lam = max(lam * cfg.lambda_decrease, _TINY)
                accepted = True
                break
            lam *= cfg.lambda_increase
            if lam > cfg.lambda_max:
                break
        if not accepted:
            stop = StopReason.LAMBDA_OVERFLOW
            break

        rec = EpochRecord(
            epoch, ed, float(np.dot(w, w)), ed, lam
        )
        hook_stop = bool(epoch_hook(epoch, w, rec)) if epoch_hook else False
        records.append(rec)
        if ed <= cfg.goal_ed:
            stop = StopReason.GOAL_REACHED
            break
        if hook_stop:
            stop = StopReason.EARLY_STOP
            break
    return w, records, stop


def train_lm(net: MlpNetwork, data: Dataset, cfg: LmConfig):
    """Plain Levenberg-Marquardt on E_D."""
    X, D = data.scaled_inputs(), data.scaled_targets()
    w, records, stop = _lm_drive(net, X, D, cfg)
    return net.with_weights(w), TrainReport(records, stop, w.copy())


def train_early_stopping(net: MlpNetwork, data: Dataset, cfg: EarlyStopConfig):
    """LM on a train split, returning the best-validation-error snapshot.

    Stops once validation E_D has risen for `patience` consecutive epochs.
    Ties on validation error keep the earlier snapshot."""
    train_set, val_set = split_dataset(data, cfg.validation_fraction, cfg.split_seed)
    X, D = train_set.scaled_inputs(), train_set.scaled_targets()
    Xv, Dv = val_set.scaled_inputs(), val_set.scaled_targets()

    best_val = np.inf
    best_w = net.weights.copy()
    prev_val = np.inf
    rises = 0

    def hook(epoch, w, rec):
        nonlocal best_val, best_w, prev_val, rises
        val = _ed_of(net.with_weights(w), Xv, Dv)
        rec.val_ed = val
        if val < best_val:
            best_val = val
            best_w = w.copy()
        rises = rises + 1 if val > prev_val else 0
        prev_val = val
        return rises >= cfg.patience

    _, records, stop = _lm_drive(net, X, D, cfg.lm, epoch_hook=hook)
    return net.with_weights(best_w), TrainReport(records, stop, best_w.copy())


def train_br(net: MlpNetwork, data: Dataset, cfg: BrConfig):
    """LM on the regularized objective with automatic re-estimation of the
    data/weight trade-off from the effective number of parameters.

    Internally the data term is the half sum of squares (not divided by P);
    the report's E_D column stays in the (1/2P)-normalized convention while
    E_R, alpha, beta refer to the half-sum objective actually minimized.
    """
    lm = cfg.lm
    X, D = data.scaled_inputs(), data.scaled_targets()
    P = data.n_patterns
    n_targets = D.size  # P * M
    N = net.n_weights

    w = net.weights.copy()
    alpha = cfg.alpha_init
    beta = cfg.beta_init
    lam = lm.lambda_init

    def ed_sum(wv):
        e = _residual(net.with_weights(wv), X, D)
        return 0.5 * float(np.dot(e, e))

    f = alpha * ed_sum(w) + beta * float(np.dot(w, w))
    records = []
    if not np.isfinite(f):
        raise TrainingDivergedError(
            "initial loss is not finite", TrainReport(records, StopReason.MAX_EPOCHS, w)
        )

    stop = StopReason.MAX_EPOCHS
    for epoch in range(1, lm.max_epochs + 1):
        current = net.with_weights(w)
        J = error_jacobian(current, X, D)
        e = _residual(current, X, D)

        # effective parameter count from the damped Hessian trace
        H = alpha * (J.T @ J) + 2.0 * beta * np.eye(N)
        Hinv = np.linalg.inv(H + lam * np.eye(N))
        gamma = float(np.clip(N - 2.0 * beta * np.trace(Hinv), 0.0, N))

        if epoch > 1 and (epoch - 1) % cfg.reestimate_every == 0:
            eds = ed_sum(w)
            eww = float(np.dot(w, w))
            beta = float(np.clip(gamma / (2.0 * max(eww, _TINY)), _HYPER_LO, _HYPER_HI))
            alpha = float(
                np.clip((n_targets - gamma) / (2.0 * max(eds, _TINY)), _HYPER_LO, _HYPER_HI)
            )
            f = alpha * eds + beta * eww

        accepted = False
        while True:
            try:
                delta, _, _ = _solve_step(J, e, w, 1.0, lam, alpha, beta)
                w_cand = w + delta
                f_cand = alpha * ed_sum(w_cand) + beta * float(np.dot(w_cand, w_cand))
                ok = np.isfinite(f_cand) and f_cand < f
            except StepFailedError:
                ok = False
            if ok:
                w = w_cand
                f = f_cand
                lam = max(lam * lm.lambda_decrease, _TINY)
                accepted = True
                break
            lam *= lm.lambda_increase
            if lam > lm.lambda_max:
                break
        if not accepted:
            stop = StopReason.LAMBDA_OVERFLOW
            break

        ed_norm = ed_sum(w) / P
        records.append(
            EpochRecord(
                epoch,
                ed_norm,
                float(np.dot(w, w)),
                f,
                lam,
                alpha=alpha,
                beta=beta,
                gamma=gamma,
            )
        )
        if ed_norm <= lm.goal_ed:
            stop = StopReason.GOAL_REACHED
            break
    return net.with_weights(w), TrainReport(records, stop, w.copy())


def split_dataset(data: Dataset, fraction: float, seed: int):
    """Deterministic shuffled split; returns (kept, held_out) datasets sharing
    the parent's scaling metadata."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    P = data.n_patterns
    n_held = int(round(fraction * P))
    if n_held == 0 or n_held == P:
        raise ValueError(f"split leaves an empty partition (P={P}, fraction={fraction})")
    perm = np.random.default_rng(seed).permutation(P)
    held, kept = perm[:n_held], perm[n_held:]
    return (
        Dataset(data.inputs[kept], data.targets[kept], data.input_scaling, data.target_scaling),
        Dataset(data.inputs[held], data.targets[held], data.input_scaling, data.target_scaling),
    )
