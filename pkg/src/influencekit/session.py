"""Epoch-by-epoch training sessions with per-epoch checkpoints and metrics.

A session owns a train/validation pair and a model config, training one epoch
at a time so every epoch can be revisited: influence analysis runs at any
checkpoint, reweighted epochs can replace or extend the history, and rollback
truncates it. Sessions persist to a run directory (manifest + checkpoint
files + metrics log) and reload losslessly, so CLI commands and the HTTP
service can resume each other's runs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import influence as _influence
from . import trainer as _trainer
from .datamodel import Dataset, RunManifest, load_dataset, save_dataset


class TrainingSession:
    """Mutable training state: datasets, config, checkpoints, metrics."""

    def __init__(self, train: Dataset, val: Dataset, config: _trainer.ModelConfig,
                 run_dir=None):
        self.train = train
        self.val = val
        self.config = config
        self.run_dir = Path(run_dir) if run_dir else None
        init = _trainer.init_params(config, train.dim, train.num_classes)
        self.checkpoints = [init]
        self.metrics = [_trainer.evaluate_per_class(init, val)]
        self.epoch_weights = {}  # epoch index -> weight vector that produced it
        self._influence_cache = {}
        if self.run_dir:
            self._persist_all()

    # -- epoch bookkeeping ---------------------------------------------------

    @property
    def current_epoch(self):
        return len(self.checkpoints) - 1

    def params_at(self, epoch) -> _trainer.ModelParams:
        self._check_epoch(epoch)
        return self.checkpoints[epoch]

    def metrics_at(self, epoch) -> _trainer.EpochMetrics:
        self._check_epoch(epoch)
        return self.metrics[epoch]

    def _check_epoch(self, epoch):
        if not 0 <= epoch <= self.current_epoch:
            raise IndexError(f"epoch {epoch} outside [0, {self.current_epoch}]")

    def train_epochs(self, num_epochs=1, weights=None):
        """Advance by num_epochs from the latest checkpoint; returns metrics
        of the final epoch. Weights default to the all-ones baseline."""
        w = np.ones(len(self.train)) if weights is None else np.asarray(
            getattr(weights, "w", weights), dtype=np.float64)
        for _ in range(num_epochs):
            params = _trainer.train_weighted(self.checkpoints[-1], self.train,
                                             w, self.config, 1)
            self.checkpoints.append(params)
            self.metrics.append(_trainer.evaluate_per_class(params, self.val))
            if weights is not None:
                self.epoch_weights[params.epoch_index] = w.copy()
            if self.run_dir:
                self._persist_epoch(params.epoch_index)
        return self.metrics[-1]

    def append_epoch(self, params, metrics, weights=None):
        """Adopt an externally trained epoch (must extend the history by 1)."""
        if params.epoch_index != self.current_epoch + 1:
            raise ValueError(
                f"epoch {params.epoch_index} does not extend history at "
                f"{self.current_epoch}")
        self.checkpoints.append(params)
        self.metrics.append(metrics)
        if weights is not None:
            self.epoch_weights[params.epoch_index] = np.asarray(
                getattr(weights, "w", weights), dtype=np.float64).copy()
        if self.run_dir:
            self._persist_epoch(params.epoch_index)

    def replace_last_epoch(self, params, metrics, weights=None):
        """Swap the latest epoch for a reweighted rerun of it."""
        if self.current_epoch == 0:
            raise ValueError("no trained epoch to replace")
        if params.epoch_index != self.current_epoch:
            raise ValueError(
                f"replacement epoch {params.epoch_index} != {self.current_epoch}")
        self.checkpoints[-1] = params
        self.metrics[-1] = metrics
        self._influence_cache = {k: v for k, v in self._influence_cache.items()
                                 if k[0] != params.epoch_index}
        if weights is not None:
            self.epoch_weights[params.epoch_index] = np.asarray(
                getattr(weights, "w", weights), dtype=np.float64).copy()
        elif params.epoch_index in self.epoch_weights:
            del self.epoch_weights[params.epoch_index]
        if self.run_dir:
            self._persist_epoch(params.epoch_index)
            self._rewrite_metrics_log()

    def rollback(self, epoch):
        """Truncate history back to `epoch` (inclusive)."""
        self._check_epoch(epoch)
        removed = range(epoch + 1, self.current_epoch + 1)
        self.checkpoints = self.checkpoints[:epoch + 1]
        self.metrics = self.metrics[:epoch + 1]
        for e in removed:
            self.epoch_weights.pop(e, None)
        self._influence_cache = {k: v for k, v in self._influence_cache.items()
                                 if k[0] <= epoch}
        if self.run_dir:
            for e in removed:
                path = self._checkpoint_path(e)
                if path.exists():
                    path.unlink()
            self._rewrite_metrics_log()

    # -- influence integration -----------------------------------------------

    def influence_at(self, epoch, damping=None, mode=_influence.EXPLICIT):
        """Influence matrix at a checkpoint; cached per (epoch, damping, mode)."""
        params = self.params_at(epoch)
        if damping is None:
            damping = _influence.relative_damping(params, self.train)
        key = (epoch, float(damping), mode)
        if key not in self._influence_cache:
            op = _influence.build_hessian_operator(params, self.train, damping,
                                                   mode=mode)
            self._influence_cache[key] = _influence.influence_matrix(
                params, op, self.train, self.val)
        return self._influence_cache[key]

    # -- persistence -----------------------------------------------------------

    def _checkpoint_path(self, epoch):
        return self.run_dir / "checkpoints" / f"epoch-{epoch:04d}.json"

    def _persist_all(self):
        (self.run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        (self.run_dir / "data").mkdir(exist_ok=True)
        train_path = self.run_dir / "data" / "train.csv"
        val_path = self.run_dir / "data" / "val.csv"
        if not train_path.exists():
            save_dataset(self.train, train_path)
        if not val_path.exists():
            save_dataset(self.val, val_path)
        manifest = RunManifest(
            seed=self.config.seed, dataset_path="data/train.csv",
            model_config=self.config.to_dict(),
            artifact_paths={"val_dataset": "data/val.csv",
                            "checkpoints": "checkpoints",
                            "metrics_log": "metrics.csv"})
        manifest.save(self.run_dir / "manifest.json")
        self._rewrite_metrics_log()
        self._persist_epoch(0)

    def _persist_epoch(self, epoch):
        _trainer.save_params(self.checkpoints[epoch], self._checkpoint_path(epoch))
        if epoch in self.epoch_weights:
            wdir = self.run_dir / "weights"
            wdir.mkdir(exist_ok=True)
            save_weight_file(self.epoch_weights[epoch], self.train.ids,
                             wdir / f"epoch-{epoch:04d}.csv")
        log = self.run_dir / "metrics.csv"
        if epoch > 0:
            with log.open("a", encoding="utf-8", newline="\n") as fh:
                fh.write(self._metrics_rows(epoch))

    def _metrics_rows(self, epoch):
        em = self.metrics[epoch]
        return "".join(f"{epoch},{k},{repr(float(a))}\n"
                       for k, a in enumerate(em.per_class_accuracy))

    def _rewrite_metrics_log(self):
        log = self.run_dir / "metrics.csv"
        rows = ["epoch,class,accuracy\n"]
        rows += [self._metrics_rows(e) for e in range(len(self.metrics))]
        log.write_text("".join(rows), encoding="utf-8", newline="\n")


def load_session(run_dir) -> TrainingSession:
    """Rebuild a session from its run directory."""
    run_dir = Path(run_dir)
    manifest = RunManifest.load(run_dir / "manifest.json")
    config = _trainer.ModelConfig.from_dict(manifest.model_config)
    train = load_dataset(run_dir / manifest.dataset_path)
    val = load_dataset(run_dir / manifest.artifact_paths["val_dataset"])
    session = TrainingSession.__new__(TrainingSession)
    session.train = train
    session.val = val
    session.config = config
    session.run_dir = run_dir
    session._influence_cache = {}
    ckpt_dir = run_dir / "checkpoints"
    paths = sorted(ckpt_dir.glob("epoch-*.json"))
    if not paths:
        raise FileNotFoundError(f"no checkpoints under {ckpt_dir}")
    session.checkpoints = [_trainer.load_params(p) for p in paths]
    session.metrics = [_trainer.evaluate_per_class(p, val)
                       for p in session.checkpoints]
    session.epoch_weights = {}
    wdir = run_dir / "weights"
    if wdir.exists():
        for p in sorted(wdir.glob("epoch-*.csv")):
            epoch = int(p.stem.split("-")[1])
            ids, w = load_weight_file(p)
            session.epoch_weights[epoch] = w
    return session


def save_weight_file(weights, sample_ids, path):
    """CSV ``sample_id,weight`` with exact float round trip."""
    w = np.asarray(getattr(weights, "w", weights), dtype=np.float64)
    lines = ["sample_id,weight"]
    lines += [f"{int(i)},{repr(float(v))}" for i, v in zip(sample_ids, w)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_weight_file(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    ids, w = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        a, b = line.split(",")
        ids.append(int(a))
        w.append(float(b))
    return np.array(ids, dtype=np.int64), np.array(w, dtype=np.float64)
