"""Training loops driving any configured optimizer over any configured data.

A run is fully determined by (config, seed) except for wall-clock fields.
Divergence that survives the optimizer's own rejection logic terminates
the run with a recorded status instead of raising.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .. import autodiff, data, models, optim
from ..autodiff import EvalOverflowError, Objective
from ..data import Batch, Dataset, Task
from ..models import MlpSpec, RosenbrockSpec
from ..params import ParamVector
from .config import (
    AdamOpt,
    ConfigError,
    CsvLoader,
    DatasetConfig,
    IdxLoader,
    OptimizerConfig,
    QlrOpt,
    RunConfig,
    SgdFullOpt,
    SgdMinimalOpt,
    SyntheticLoader,
)
from .records import MetricRecord

logger = logging.getLogger(__name__)


class RunStatus(enum.Enum):
    COMPLETED = "completed"
    DIVERGED = "diverged"
    TIMED_OUT = "timed_out"


@dataclass
class RunResult:
    records: list[MetricRecord]
    status: RunStatus
    failure_step: Optional[int] = None
    final_params: Optional[ParamVector] = None
    standardize_stats: Optional[data.StandardizeStats] = None


@dataclass
class StepInfo:
    train_loss: float
    alpha: Optional[float] = None
    lam: Optional[float] = None
    rho: Optional[float] = None
    guard: Optional[optim.GuardEvent] = None


class _SgdStepper:
    def __init__(self, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buf: Optional[np.ndarray] = None

    def step(self, obj: Objective, params: ParamVector, batch: Optional[Batch]):
        f, g = autodiff.eval_grad(obj, params, batch)
        params, self.buf = optim.sgd_step(
            params, g, self.lr, self.buf, self.momentum, self.weight_decay
        )
        return params, StepInfo(train_loss=f, alpha=self.lr)


class _AdamStepper:
    def __init__(self, lr: float, hyper: optim.AdamHyper, n_params: int):
        self.lr = lr
        self.hyper = hyper
        self.state = optim.AdamState.init(n_params)

    def step(self, obj: Objective, params: ParamVector, batch: Optional[Batch]):
        f, g = autodiff.eval_grad(obj, params, batch)
        self.state, d = optim.adam_direction(self.state, g, self.hyper)
        params = params.with_values(params.values - self.lr * d.values)
        return params, StepInfo(train_loss=f, alpha=self.lr)


class _QlrStepper:
    def __init__(self, cfg: optim.QLRConfig, hyper: optim.AdamHyper, n_params: int):
        self.cfg = cfg
        self.hyper = hyper
        self.state = optim.QLRState.init(cfg, n_params)

    def step(self, obj: Objective, params: ParamVector, batch: Optional[Batch]):
        params, self.state, diag = optim.qlr_step(
            obj, params, batch, self.state, self.cfg, self.hyper
        )
        return params, StepInfo(
            train_loss=diag.f_before,
            alpha=diag.alpha,
            lam=diag.lam,
            rho=diag.rho,
            guard=diag.guard,
        )


def make_stepper(opt: OptimizerConfig, n_params: int):
    if isinstance(opt, SgdMinimalOpt):
        return _SgdStepper(opt.lr)
    if isinstance(opt, SgdFullOpt):
        return _SgdStepper(opt.lr, opt.momentum, opt.weight_decay)
    if isinstance(opt, AdamOpt):
        return _AdamStepper(opt.lr, opt.hyper, n_params)
    if isinstance(opt, QlrOpt):
        return _QlrStepper(opt.qlr, opt.hyper, n_params)
    raise ConfigError(f"unknown optimizer config {type(opt).__name__}")


def load_dataset(loader) -> Dataset:
    if isinstance(loader, CsvLoader):
        return data.load_csv(loader.path, loader.n_features, loader.target_columns)
    if isinstance(loader, IdxLoader):
        return data.load_idx(loader.images_path, loader.labels_path)
    if isinstance(loader, SyntheticLoader):
        return data.synthesize(
            loader.task,
            loader.n,
            loader.d,
            loader.seed,
            n_targets=loader.n_targets,
            noise=loader.noise,
            n_classes=loader.n_classes,
            separation=loader.separation,
        )
    raise ConfigError(f"unknown loader config {type(loader).__name__}")


def prepare_data(dcfg: DatasetConfig):
    """Load, split and (for regression) standardize; returns splits + stats."""
    ds = load_dataset(dcfg.loader)
    train, val, test = data.split_dataset(ds, dcfg.split)
    stats = None
    if dcfg.standardize and ds.task is Task.REGRESSION:
        train, val, test, stats = data.standardize_splits(train, val, test)
    return train, val, test, stats


def _check_model_fits(spec: MlpSpec, train: Dataset) -> None:
    d_in = train.inputs.shape[1]
    if spec.layer_widths[0] != d_in:
        raise ConfigError(
            f"model input width {spec.layer_widths[0]} != data feature count {d_in}"
        )
    d_out = spec.layer_widths[-1]
    if train.task is Task.CLASSIFICATION:
        n_classes = int(train.targets.max()) + 1
        if d_out < n_classes:
            raise ConfigError(f"output width {d_out} < {n_classes} classes")
    elif d_out != train.targets.shape[1]:
        raise ConfigError(
            f"output width {d_out} != target dimension {train.targets.shape[1]}"
        )


def _fill_eval(
    rec: MetricRecord,
    obj: Objective,
    params: ParamVector,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    stats,
) -> None:
    classification = train.task is Task.CLASSIFICATION
    for name, split in (("train", train), ("val", val), ("test", test)):
        if len(split) == 0:
            continue
        batch = split.as_batch()
        loss = autodiff.eval_loss(obj, params, batch)
        if name != "train":
            setattr(rec, f"{name}_loss", loss)
        if classification:
            outputs = obj.predict(params.values, batch.inputs)
            setattr(rec, f"{name}_acc", models.accuracy(outputs, batch.targets))
        elif name == "train" and stats is not None and stats.target_std is not None:
            if stats.target_std.size == 1:
                logger.info(
                    "raw-unit train RMSE: %.6g",
                    float(stats.target_std[0]) * np.sqrt(loss),
                )


def run_training(cfg: RunConfig) -> RunResult:
    """Run one configured training job and return its per-step records."""
    if isinstance(cfg.model, RosenbrockSpec):
        return _run_batch_free(cfg)

    train, val, test, stats = prepare_data(cfg.dataset)
    _check_model_fits(cfg.model, train)
    obj = models.mlp_objective(cfg.model)
    params = models.mlp_init(cfg.model, cfg.seed)
    plan = cfg.dataset.batch
    if plan.batch_size > len(train):
        logger.warning(
            "batch size %d exceeds train split size %d; clamping to full batch",
            plan.batch_size,
            len(train),
        )
        plan = replace(plan, batch_size=len(train))
    stepper = make_stepper(cfg.optimizer, len(params))

    records: list[MetricRecord] = []
    t0 = time.perf_counter()
    step = 0
    for epoch in range(cfg.epochs):
        for batch in data.batch_iter(train, plan, epoch):
            try:
                params, info = stepper.step(obj, params, batch)
            except (EvalOverflowError, ValueError):
                return RunResult(records, RunStatus.DIVERGED, step, params, stats)
            step += 1
            records.append(
                MetricRecord(
                    step=step,
                    epoch=epoch,
                    wall_time_s=time.perf_counter() - t0,
                    train_loss=info.train_loss,
                    alpha=info.alpha,
                    lam=info.lam,
                    rho=info.rho,
                    guard_event=info.guard,
                )
            )
            if time.perf_counter() - t0 > cfg.max_runtime_s:
                return RunResult(records, RunStatus.TIMED_OUT, None, params, stats)
        if (epoch + 1) % cfg.eval_every_epochs == 0 or epoch == cfg.epochs - 1:
            try:
                _fill_eval(records[-1], obj, params, train, val, test, stats)
            except EvalOverflowError:
                return RunResult(records, RunStatus.DIVERGED, step, params, stats)
    return RunResult(records, RunStatus.COMPLETED, None, params, stats)


def _run_batch_free(cfg: RunConfig) -> RunResult:
    """Batch-independent objectives: each epoch is one optimization step."""
    obj = models.rosenbrock_objective(cfg.model)
    start = np.array([1.0, -1.0])
    params = ParamVector(start, obj.manifest)
    stepper = make_stepper(cfg.optimizer, len(params))
    records: list[MetricRecord] = []
    t0 = time.perf_counter()
    for step in range(1, cfg.epochs + 1):
        try:
            params, info = stepper.step(obj, params, None)
        except (EvalOverflowError, ValueError):
            return RunResult(records, RunStatus.DIVERGED, step - 1, params)
        records.append(
            MetricRecord(
                step=step,
                epoch=step - 1,
                wall_time_s=time.perf_counter() - t0,
                train_loss=info.train_loss,
                alpha=info.alpha,
                lam=info.lam,
                rho=info.rho,
                guard_event=info.guard,
            )
        )
        if time.perf_counter() - t0 > cfg.max_runtime_s:
            return RunResult(records, RunStatus.TIMED_OUT, None, params)
    return RunResult(records, RunStatus.COMPLETED, None, params)
