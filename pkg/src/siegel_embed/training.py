"""Distortion-loss training with Riemannian SGD."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .geometry.serialization import save_embeddings
from .geometry.spaces import DEFAULT_EPSILON, Space, SpaceDescriptor, make_space
from .graphs import Graph, TripletSet
from .metrics import DataError, average_distortion, mean_average_precision, pair_distances

log = logging.getLogger(__name__)


class NumericalFailure(ArithmeticError):
    """A step produced a non-finite loss or gradient."""

    def __init__(self, message: str, nodes=None, table: "EmbeddingTable" = None,
                 report: "RunReport" = None):
        super().__init__(message)
        self.nodes = nodes
        self.table = table
        self.report = report


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 512
    max_grad_norm: float = 100.0
    epochs: int = 3000
    burnin_epochs: int = 10
    burnin_factor: float = 10.0
    lr_reduce_factor: float = 5.0
    lr_patience: float = 50
    early_stop_patience: float = 150
    epsilon_projection: float = DEFAULT_EPSILON
    seed: int = 0
    # relative decrease of the monitored distortion that counts as progress
    min_improvement: float = 1e-4
    checkpoint_every: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("seed", "checkpoint_every", "burnin_epochs"):
                if value < 0:
                    raise ValueError(f"{f.name} must be non-negative")
            elif f.name == "min_improvement":
                if value < 0:
                    raise ValueError("min_improvement must be non-negative")
            elif not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value!r}")
        if self.burnin_epochs > self.epochs:
            raise ValueError("burnin_epochs cannot exceed epochs")

    def to_dict(self) -> dict:
        return {k: (v if not (isinstance(v, float) and math.isinf(v)) else "inf")
                for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: (math.inf if v == "inf" else v) for k, v in data.items() if k in known})


@dataclass
class EmbeddingTable:
    """One point per node, stored as flat parameter rows of ``space``."""

    space: SpaceDescriptor
    points: np.ndarray
    epoch: int = 0

    def __post_init__(self):
        if isinstance(self.space, str):
            self.space = SpaceDescriptor.parse(self.space)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != self.space.flat_dim:
            raise ValueError(f"points of shape {self.points.shape} do not match {self.space}")
        self._manifold = make_space(self.space)

    @classmethod
    def random(cls, space, num_nodes: int, seed: int) -> "EmbeddingTable":
        if isinstance(space, str):
            space = SpaceDescriptor.parse(space)
        rng = np.random.default_rng(seed)
        return cls(space, make_space(space).random(num_nodes, rng))

    @property
    def manifold(self) -> Space:
        return self._manifold

    def __len__(self) -> int:
        return len(self.points)

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.space, self.points.copy(), self.epoch)

    def margins(self) -> np.ndarray:
        return self.manifold.margin(self.points)

    def save(self, path, **meta) -> Path:
        return save_embeddings(path, self.space, self.points, self.epoch, meta)


@dataclass
class RunReport:
    config: dict
    space: str
    num_params: int
    num_nodes: int
    num_triplets: int
    epochs_run: int = 0
    best_epoch: int = -1
    stopped_early: bool = False
    loss: list = field(default_factory=list)
    distortion: list = field(default_factory=list)
    learning_rate: list = field(default_factory=list)
    projections: list = field(default_factory=list)
    final_d_avg: Optional[float] = None
    final_map: Optional[float] = None
    status: str = "running"
    wall_clock: float = 0.0
    started_at: str = ""

    TIMING_FIELDS = ("wall_clock", "started_at")

    def to_dict(self, timing: bool = True) -> dict:
        body = asdict(self)
        if not timing:
            for k in self.TIMING_FIELDS:
                body.pop(k)
        return body

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2)

    @property
    def total_projections(self) -> int:
        return int(sum(self.projections))


# ----------------------------------------------------------------------------
# loss

def _batch_arrays(batch):
    if isinstance(batch, TripletSet):
        return batch.u, batch.v, batch.d
    u, v, d = (np.asarray(x) for x in zip(*batch)) if not isinstance(batch, tuple) else batch
    return np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64), np.asarray(d, dtype=float)


def distortion_loss(batch, table: EmbeddingTable) -> float:
    """``sum |(d_emb / d_graph)^2 - 1|`` over the batch."""
    u, v, d = _batch_arrays(batch)
    if np.any(d <= 0):
        raise DataError("graph distances in a loss batch must be positive")
    d2 = table.manifold.dist2(table.points[u], table.points[v])
    return float(np.sum(np.abs(d2 / d ** 2 - 1.0)))


def loss_and_grad(manifold: Space, points: np.ndarray, u, v, d):
    """Batch loss and Euclidean gradient rows for the touched nodes.

    Returns ``(loss, nodes, grads)`` where ``grads[k]`` belongs to ``nodes[k]``.
    """
    d2, gu, gv = manifold.dist2_grad(points[u], points[v])
    inv = 1.0 / (d * d)
    ratio = d2 * inv - 1.0
    loss = float(np.sum(np.abs(ratio)))
    coeff = (np.sign(ratio) * inv)[:, None]
    nodes, inverse = np.unique(np.concatenate([u, v]), return_inverse=True)
    grads = np.zeros((len(nodes), points.shape[1]))
    np.add.at(grads, inverse, np.concatenate([coeff * gu, coeff * gv]))
    return loss, nodes, grads


def clip_rows(g: np.ndarray, max_norm: float) -> np.ndarray:
    """Scale each row to norm at most ``max_norm`` without changing its direction."""
    norms = np.linalg.norm(g, axis=-1)
    with np.errstate(divide="ignore"):
        factor = np.minimum(1.0, max_norm / norms)
    return g * factor[..., None]


@dataclass
class StepResult:
    loss: float
    nodes: np.ndarray
    projected: int


def rsgd_step(table: EmbeddingTable, batch, lr: float, config: TrainConfig) -> StepResult:
    """One RSGD update in place: Riemannian gradient, clip, ``x - lr * g``, project.

    Only nodes that appear in ``batch`` are modified.
    """
    u, v, d = _batch_arrays(batch)
    if len(u) == 0:
        raise ValueError("empty batch")
    m = table.manifold
    loss, nodes, egrad = loss_and_grad(m, table.points, u, v, d)
    if not (np.isfinite(loss) and np.all(np.isfinite(egrad))):
        bad = nodes[~np.all(np.isfinite(egrad), axis=1)]
        raise NumericalFailure(f"non-finite loss/gradient (loss={loss}); nodes {bad[:10].tolist()}",
                               nodes=bad)
    x = table.points[nodes]
    rgrad = clip_rows(m.rgrad(x, egrad), config.max_grad_norm)
    new, moved = m.project(m.retract(x, -lr * rgrad), config.epsilon_projection)
    table.points[nodes] = new
    return StepResult(loss, nodes, int(np.sum(moved)))


# ----------------------------------------------------------------------------
# training loop

def _improved(value: float, best: float, threshold: float) -> bool:
    if not np.isfinite(best):
        return np.isfinite(value)
    return value < best * (1.0 - threshold)


def train(triplets: TripletSet, space, config: TrainConfig, graph: Optional[Graph] = None,
          checkpoint_dir=None, progress: Optional[Callable[[int, float, float, float], None]] = None):
    """Fit one embedding per node; returns ``(best_table, report)``.

    Every epoch shuffles the triplets, runs RSGD over the batches and then
    evaluates the average distortion on the full triplet set, which drives the
    learning-rate schedule and early stopping.
    """
    if len(triplets) == 0:
        raise ValueError("no triplets to train on")
    if isinstance(space, str):
        space = SpaceDescriptor.parse(space)
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    table = EmbeddingTable(space, make_space(space).random(triplets.node_count, rng))
    report = RunReport(config=config.to_dict(), space=str(space), num_params=space.num_params,
                       num_nodes=triplets.node_count, num_triplets=len(triplets),
                       started_at=time.strftime("%Y-%m-%dT%H:%M:%S"))
    log.info("training %s (%d free parameters per node) on %d nodes / %d triplets",
             space, space.num_params, triplets.node_count, len(triplets))

    u_all, v_all, d_all = triplets.u, triplets.v, triplets.d
    best_table = table.copy()
    best = math.inf
    lr = config.learning_rate
    since_best = 0
    since_lr = 0
    for epoch in range(config.epochs):
        epoch_lr = lr / config.burnin_factor if epoch < config.burnin_epochs else lr
        perm = rng.permutation(len(triplets))
        loss, projected = 0.0, 0
        try:
            for start in range(0, len(perm), config.batch_size):
                idx = perm[start:start + config.batch_size]
                step = rsgd_step(table, (u_all[idx], v_all[idx], d_all[idx]), epoch_lr, config)
                loss += step.loss
                projected += step.projected
            dist = pair_distances(table.manifold, table.points, u_all, v_all)
            d_avg = float(np.mean(np.abs(dist - d_all) / d_all))
            if not np.isfinite(d_avg):
                raise NumericalFailure("average distortion became non-finite")
        except (NumericalFailure, ArithmeticError, ValueError) as exc:
            report.status = "diverged"
            report.final_d_avg = None if not np.isfinite(best) else best
            report.wall_clock = time.perf_counter() - t0
            log.error("epoch %d: %s", epoch, exc)
            raise NumericalFailure(f"training diverged at epoch {epoch}: {exc}",
                                   getattr(exc, "nodes", None), best_table, report) from exc

        table.epoch = epoch + 1
        report.epochs_run = epoch + 1
        report.loss.append(loss)
        report.distortion.append(d_avg)
        report.learning_rate.append(epoch_lr)
        report.projections.append(projected)
        if projected:
            log.debug("epoch %d: %d points projected back into the model", epoch, projected)
        if progress is not None:
            progress(epoch, loss, d_avg, epoch_lr)

        if _improved(d_avg, best, config.min_improvement):
            best = d_avg
            best_table = table.copy()
            report.best_epoch = epoch
            since_best = since_lr = 0
        else:
            since_best += 1
            since_lr += 1
        if epoch >= config.burnin_epochs and since_lr >= config.lr_patience:
            lr /= config.lr_reduce_factor
            since_lr = 0
            log.info("epoch %d: learning rate reduced to %.3g", epoch, lr)
        if since_best >= config.early_stop_patience:
            report.stopped_early = True
            log.info("early stop at epoch %d (best %.5f at epoch %d)", epoch, best, report.best_epoch)
            break
        if checkpoint_dir is not None and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            table.save(Path(checkpoint_dir) / f"epoch{epoch + 1:05d}.emb")

    report.final_d_avg = average_distortion(best_table.manifold, best_table.points, triplets)
    if graph is not None:
        report.final_map = mean_average_precision(best_table.manifold, best_table.points, graph)
    total = report.total_projections
    if total:
        log.warning("%d projection(s) back into the model were needed during training", total)
    report.status = "ok"
    report.wall_clock = time.perf_counter() - t0
    return best_table, report
