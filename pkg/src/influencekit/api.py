"""HTTP session service for the operator dashboard.

Sessions wrap :class:`TrainingSession` with ids, an exclusive mutating-job
slot, and a job registry. Training an epoch is synchronous (recorded as an
instantly terminal job); influence builds and Pareto searches run on worker
threads and are polled through ``GET /jobs/{id}``. A finished Pareto job
holds a staged reweighted epoch that the operator adopts via ``commit`` or
simply never commits (discard is client-side). Sessions persist to the
service root so a restart keeps every checkpoint.
"""

from __future__ import annotations

import itertools
import json
import threading
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import ceiling as _ceiling
from . import pareto as _pareto
from . import trainer as _trainer
from .datamodel import RunManifest, load_dataset
from .errors import CommitRefusedError, ConfigurationError
from .session import TrainingSession, load_session, load_weight_file

JOB_KINDS = ("train_epoch", "influence", "ceiling", "pareto_di", "pareto_cc")
QUEUED, RUNNING, DONE, FAILED = "queued", "running", "done", "failed"


class JobStatus:
    def __init__(self, job_id, kind, session_id):
        self.job_id = job_id
        self.kind = kind
        self.session_id = session_id
        self.state = QUEUED
        self.progress = 0.0
        self.result = None
        self.error = None
        self.staged = None  # pareto jobs: StagedEpoch + ParetoResult

    def to_dict(self):
        return {"job_id": self.job_id, "kind": self.kind,
                "session_id": self.session_id, "state": self.state,
                "progress": self.progress, "result": self.result,
                "error": self.error}


class SessionHandle:
    """A TrainingSession plus its exclusive mutating-job slot."""

    def __init__(self, session_id, session):
        self.session_id = session_id
        self.session = session
        self.lock = threading.Lock()

    def summary(self):
        s = self.session
        return {"session_id": self.session_id,
                "current_epoch": s.current_epoch,
                "num_classes": s.train.num_classes,
                "train_size": len(s.train), "val_size": len(s.val),
                "model_config": s.config.to_dict(),
                "weighted_epochs": sorted(s.epoch_weights)}


def _metrics_payload(session):
    return {"num_classes": session.train.num_classes,
            "epochs": [{"epoch": i,
                        "per_class_accuracy": [float(a) for a in
                                               m.per_class_accuracy],
                        "overall_accuracy": m.overall_accuracy}
                       for i, m in enumerate(session.metrics)]}


class CreateSessionBody(BaseModel):
    seed: int
    dataset_path: str
    model_config_: dict = Field(alias="model_config")
    hyperparameters: dict = Field(default_factory=dict)
    artifact_paths: dict = Field(default_factory=dict)

    model_config = {"populate_by_name": True, "protected_namespaces": ()}


class TrainBody(BaseModel):
    num_epochs: int = 1
    weights_ref: str | None = None


class ParetoBody(BaseModel):
    mode: str
    targets: list[int]
    epoch: int | None = None
    ga: dict = Field(default_factory=dict)
    lp_bounds: tuple[float, float] = _pareto.DEFAULT_WEIGHT_BOUNDS
    damping: float | None = None


class CommitBody(BaseModel):
    job_id: str


class RollbackBody(BaseModel):
    epoch: int


def create_app(root_dir) -> FastAPI:
    root = Path(root_dir)
    sessions_dir = root / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="influencekit service")

    sessions: dict[str, SessionHandle] = {}
    jobs: dict[str, JobStatus] = {}
    counter = itertools.count(1)
    registry_lock = threading.Lock()

    for run_dir in sorted(sessions_dir.iterdir()) if sessions_dir.exists() else []:
        if (run_dir / "manifest.json").exists():
            sessions[run_dir.name] = SessionHandle(run_dir.name,
                                                   load_session(run_dir))

    def get_handle(session_id) -> SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return handle

    def get_job(job_id) -> JobStatus:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id}")
        return job

    def new_job(kind, session_id) -> JobStatus:
        with registry_lock:
            job = JobStatus(f"j{next(counter):04d}", kind, session_id)
            jobs[job.job_id] = job
        return job

    def acquire_slot(handle):
        if not handle.lock.acquire(blocking=False):
            raise HTTPException(409, "a mutating job is already running on "
                                     "this session")

    def run_async(handle, job, work):
        def body():
            job.state = RUNNING
            try:
                work(job)
                job.progress = 1.0
                job.state = DONE
            except Exception as exc:  # surfaced through the job record
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = FAILED
            finally:
                handle.lock.release()
                _persist_job(job)
        threading.Thread(target=body, daemon=True).start()

    def _persist_job(job):
        handle = sessions.get(job.session_id)
        if handle is None or handle.session.run_dir is None:
            return
        path = handle.session.run_dir / "jobs.json"
        existing = json.loads(path.read_text()) if path.exists() else []
        existing.append(job.to_dict())
        path.write_text(json.dumps(existing, indent=2) + "\n", encoding="utf-8")

    # -- routes ---------------------------------------------------------------

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        manifest = RunManifest(seed=body.seed, dataset_path=body.dataset_path,
                               model_config=body.model_config_,
                               hyperparameters=body.hyperparameters,
                               artifact_paths=body.artifact_paths)
        try:
            config = _trainer.ModelConfig.from_dict(manifest.model_config)
            train = load_dataset(root / manifest.dataset_path)
            val_rel = manifest.artifact_paths.get("val_dataset")
            if val_rel is None:
                raise ConfigurationError("artifact_paths.val_dataset is required")
            val = load_dataset(root / val_rel)
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc))
        except (ConfigurationError, ValueError) as exc:
            raise HTTPException(422, str(exc))
        session_id = f"s{next(counter):04d}"
        run_dir = sessions_dir / session_id
        handle = SessionHandle(session_id,
                               TrainingSession(train, val, config, run_dir))
        sessions[session_id] = handle
        return handle.summary()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return get_handle(session_id).summary()

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        return _metrics_payload(get_handle(session_id).session)

    @app.post("/sessions/{session_id}/epochs")
    def train_epochs(session_id: str, body: TrainBody = Body(default=TrainBody())):
        handle = get_handle(session_id)
        session = handle.session
        weights = None
        if body.weights_ref:
            ids, w = load_weight_file(root / body.weights_ref)
            if not np.array_equal(ids, session.train.ids):
                raise HTTPException(422, "weight file ids do not match the "
                                         "training set")
            weights = w
        acquire_slot(handle)
        job = new_job("train_epoch", session_id)
        try:
            job.state = RUNNING
            metrics = session.train_epochs(body.num_epochs, weights=weights)
            job.state = DONE
            job.progress = 1.0
            job.result = {"epoch": session.current_epoch}
        except Exception as exc:
            job.state = FAILED
            job.error = f"{type(exc).__name__}: {exc}"
            raise HTTPException(500, job.error)
        finally:
            handle.lock.release()
            _persist_job(job)
        return {"job_id": job.job_id, "epoch": session.current_epoch,
                "per_class_accuracy": [float(a) for a in metrics.per_class_accuracy],
                "overall_accuracy": metrics.overall_accuracy}

    @app.post("/sessions/{session_id}/influence")
    def build_influence(session_id: str, epoch: int, damping: float | None = None):
        handle = get_handle(session_id)
        session = handle.session
        if not 0 <= epoch <= session.current_epoch:
            raise HTTPException(404, f"epoch {epoch} not trained yet")
        acquire_slot(handle)
        job = new_job("influence", session_id)

        def work(job):
            session.influence_at(epoch, damping=damping)
            job.result = {"epoch": epoch}

        run_async(handle, job, work)
        return {"job_id": job.job_id}

    @app.get("/sessions/{session_id}/influence/{epoch}")
    def get_influence(session_id: str, epoch: int):
        session = get_handle(session_id).session
        cached = [v for (e, _, _), v in session._influence_cache.items()
                  if e == epoch]
        if not cached:
            raise HTTPException(404, f"influence for epoch {epoch} not built")
        m = cached[0]
        return {"epoch": epoch, "sample_ids": m.sample_ids.tolist(),
                "values": m.values.tolist(),
                "labels": session.train.labels.tolist(),
                "metadata": m.metadata}

    @app.get("/sessions/{session_id}/ceiling")
    def get_ceiling(session_id: str, epoch: int, zero_tol: float = 0.0,
                    tau_region: float = _ceiling.DEFAULT_TAU_REGION,
                    tau_residual: float = _ceiling.DEFAULT_TAU_RESIDUAL):
        session = get_handle(session_id).session
        if not 0 <= epoch <= session.current_epoch:
            raise HTTPException(404, f"epoch {epoch} not trained yet")
        m = session.influence_at(epoch)
        report = _ceiling.build_ceiling_report(m, zero_tol, tau_region,
                                               tau_residual)
        return json.loads(report.to_json())

    @app.post("/sessions/{session_id}/pareto")
    def start_pareto(session_id: str, body: ParetoBody):
        handle = get_handle(session_id)
        session = handle.session
        mode = body.mode.upper()
        if mode not in (_pareto.DI, _pareto.CC):
            raise HTTPException(422, f"mode must be DI or CC, got {body.mode!r}")
        try:
            targets = _pareto.TargetSet(tuple(body.targets),
                                        session.train.num_classes)
            if not targets.is_proper:
                raise ConfigurationError("target set must leave at least one "
                                         "non-target class")
        except ConfigurationError as exc:
            raise HTTPException(422, str(exc))
        try:
            ga_config = _pareto.GAConfig(**{"seed": session.config.seed,
                                            **body.ga})
        except (ConfigurationError, TypeError) as exc:
            raise HTTPException(422, f"invalid ga overrides: {exc}")
        if mode == _pareto.CC:
            epoch = session.current_epoch if body.epoch is None else body.epoch
            if epoch != session.current_epoch or epoch < 1:
                raise HTTPException(422, "course correction applies to the "
                                         "latest trained epoch")
            base_epoch, reference = epoch - 1, session.metrics_at(epoch)
        else:
            base_epoch = session.current_epoch if body.epoch is None else body.epoch
            if not 0 <= base_epoch <= session.current_epoch:
                raise HTTPException(404, f"epoch {base_epoch} not trained yet")
            reference = session.metrics_at(base_epoch)
        acquire_slot(handle)
        job = new_job("pareto_di" if mode == _pareto.DI else "pareto_cc",
                      session_id)

        def work(job):
            m = session.influence_at(base_epoch, damping=body.damping)
            job.progress = 0.1
            result = _pareto.ga_search(session, m, targets,
                                       ga_config, tuple(body.lp_bounds),
                                       mode=mode, base_epoch=base_epoch,
                                       reference_metrics=reference)
            job.staged = result
            job.result = {"best_fitness": result.best_fitness,
                          "best_alpha": [float(a) for a in result.best_alpha.alpha],
                          "best_delta": [float(d) for d in result.staged.delta],
                          "per_class_accuracy": [float(a) for a in
                                                 result.staged.metrics
                                                 .per_class_accuracy],
                          "reference_accuracy": [float(a) for a in
                                                 reference.per_class_accuracy],
                          "targets": list(targets.indices), "mode": mode,
                          "base_epoch": base_epoch}

        run_async(handle, job, work)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return get_job(job_id).to_dict()

    @app.post("/sessions/{session_id}/commit")
    def commit(session_id: str, body: CommitBody):
        handle = get_handle(session_id)
        session = handle.session
        job = get_job(body.job_id)
        if job.session_id != session_id:
            raise HTTPException(404, "job belongs to a different session")
        if job.state != DONE or job.staged is None:
            raise HTTPException(409, f"job {job.job_id} is not a completed "
                                     "pareto job")
        result = job.staged
        acquire_slot(handle)
        try:
            _pareto._check_committable(
                result, _pareto.TargetSet(result.targets,
                                          session.train.num_classes))
            staged = result.staged
            if result.mode == _pareto.CC:
                session.replace_last_epoch(staged.params, staged.metrics,
                                           staged.weights)
            else:
                if staged.params.epoch_index != session.current_epoch + 1:
                    raise HTTPException(409, "session moved since the job ran; "
                                             "re-run the search")
                session.append_epoch(staged.params, staged.metrics,
                                     staged.weights)
        except CommitRefusedError as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:  # session history moved since the job ran
            raise HTTPException(409, str(exc))
        finally:
            handle.lock.release()
        return {"epoch": session.current_epoch,
                "per_class_accuracy": [float(a) for a in
                                       session.metrics[-1].per_class_accuracy]}

    @app.post("/sessions/{session_id}/rollback")
    def rollback(session_id: str, body: RollbackBody):
        handle = get_handle(session_id)
        session = handle.session
        if not 0 <= body.epoch <= session.current_epoch:
            raise HTTPException(404, f"epoch {body.epoch} outside history")
        acquire_slot(handle)
        try:
            session.rollback(body.epoch)
        finally:
            handle.lock.release()
        return {"current_epoch": session.current_epoch}

    return app
