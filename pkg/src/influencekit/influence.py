"""Influence scores, category-wise influence matrices, and the LOO oracle.

The influence of training sample z_j on an evaluation subset S is

    (sum_{z in S} grad(z))^T  (H + damping*I)^{-1}  grad(z_j),

where H is the sum of per-sample loss Hessians of the training set at the
current parameters. Positive scores mean removing z_j would raise the
evaluation loss (the sample is beneficial); negative means detrimental.

Two backends sit behind one interface: `explicit` materializes H and solves
by Cholesky (capped at 2000 parameters); `matrix_free` only ever applies H
to vectors and solves by conjugate gradient. Leave-one-out retraining
(`loo_oracle`) provides the ground truth these scores approximate.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .datamodel import Dataset
from .errors import CapacityError, DegenerateTrainingError, SolverError
from . import trainer
from .trainer import ModelParams

EXPLICIT = "explicit"
MATRIX_FREE = "matrix_free"

EXPLICIT_SIZE_CAP = 2000


class HessianOperator:
    """Damped Hessian H + damping*I of the training loss, applied lazily.

    Symmetric by construction; positive definite whenever damping > 0 (the
    per-sample cross-entropy Hessians are PSD for the convex architecture and
    the damping floor covers the MLP's indefinite directions).
    """

    def __init__(self, params: ModelParams, dataset: Dataset, damping: float,
                 mode=EXPLICIT, cg_tol=1e-10, cg_maxiter=1000):
        if damping < 0:
            raise ValueError("damping must be >= 0")
        if params.architecture["name"] == trainer.MLP and damping <= 0:
            raise ValueError("mlp architecture requires damping > 0")
        if mode not in (EXPLICIT, MATRIX_FREE):
            raise ValueError(f"unknown mode {mode!r}")
        self.params = params
        self.dataset = dataset
        self.damping = float(damping)
        self.mode = mode
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter
        self.num_params = len(params.theta)
        if mode == EXPLICIT:
            if self.num_params > EXPLICIT_SIZE_CAP:
                raise CapacityError(
                    f"explicit Hessian with {self.num_params} parameters exceeds "
                    f"the cap of {EXPLICIT_SIZE_CAP}; use matrix_free")
            self._matrix = self._materialize()
            self._cho = None

    def _materialize(self):
        p = self.num_params
        h = np.empty((p, p))
        eye = np.eye(p)
        for j in range(p):
            h[:, j] = trainer.hessian_vector_product(self.params, self.dataset,
                                                     eye[j])
        h = 0.5 * (h + h.T)  # exact math is symmetric; scrub float asymmetry
        return h + self.damping * eye

    @property
    def matrix(self):
        if self.mode != EXPLICIT:
            raise ValueError("matrix only available in explicit mode")
        return self._matrix

    def apply(self, v):
        """(H + damping*I) @ v."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.num_params,):
            raise ValueError(f"vector has shape {v.shape}, expected ({self.num_params},)")
        if self.mode == EXPLICIT:
            return self._matrix @ v
        hv = trainer.hessian_vector_product(self.params, self.dataset, v)
        return hv + self.damping * v

    def as_linear_operator(self):
        return scipy.sparse.linalg.LinearOperator(
            shape=(self.num_params, self.num_params), matvec=self.apply,
            dtype=np.float64)


def build_hessian_operator(params: ModelParams, train: Dataset, damping: float,
                           mode=EXPLICIT, cg_tol=1e-10, cg_maxiter=1000) -> HessianOperator:
    return HessianOperator(params, train, damping, mode=mode, cg_tol=cg_tol,
                           cg_maxiter=cg_maxiter)


def relative_damping(params: ModelParams, train: Dataset, rel=1e-3) -> float:
    """Scale-free default damping: rel * trace(H) / |theta|."""
    p = len(params.theta)
    eye = np.eye(p)
    trace = sum(trainer.hessian_vector_product(params, train, eye[j])[j]
                for j in range(p))
    return rel * max(trace, 0.0) / p


def ihvp(op: HessianOperator, v, tol=None) -> np.ndarray:
    """Solve (H + damping*I) x = v to ||Hx - v|| <= tol * ||v||."""
    v = np.asarray(v, dtype=np.float64)
    tol = op.cg_tol if tol is None else tol
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        return np.zeros_like(v)
    if op.mode == EXPLICIT:
        if op._cho is None:
            try:
                op._cho = ("cho", scipy.linalg.cho_factor(op.matrix))
            except scipy.linalg.LinAlgError:
                op._cho = ("lu", scipy.linalg.lu_factor(op.matrix))
        kind, fac = op._cho
        x = (scipy.linalg.cho_solve(fac, v) if kind == "cho"
             else scipy.linalg.lu_solve(fac, v))
    else:
        x, info = scipy.sparse.linalg.cg(op.as_linear_operator(), v,
                                         rtol=tol, atol=0.0,
                                         maxiter=op.cg_maxiter)
        if info != 0:
            res = np.linalg.norm(op.apply(x) - v)
            raise SolverError(
                f"conjugate gradient did not converge in {op.cg_maxiter} "
                f"iterations; residual {res:.3e} (target {tol * vnorm:.3e})")
    res = np.linalg.norm(op.apply(x) - v)
    if res > max(tol, 1e-8) * vnorm:
        raise SolverError(f"linear solve residual {res:.3e} exceeds "
                          f"{max(tol, 1e-8) * vnorm:.3e}")
    return x


def influence_score(params: ModelParams, hessian_op: HessianOperator,
                    train_sample, eval_subset: Dataset) -> float:
    """Influence of one training sample on the total loss of eval_subset."""
    if len(eval_subset) == 0:
        raise ValueError("eval_subset must be non-empty")
    g_eval = trainer.sum_gradient(params, eval_subset)
    g_train = trainer.loss_gradient(params, train_sample)
    return float(g_eval @ ihvp(hessian_op, g_train))


@dataclass
class InfluenceMatrix:
    """n x K category-wise influence scores, rows aligned with training order."""

    sample_ids: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.sample_ids):
            raise ValueError("values must be (n, K) aligned with sample_ids")

    @property
    def num_classes(self):
        return self.values.shape[1]

    def __len__(self):
        return len(self.sample_ids)

    def row_by_id(self, sample_id):
        idx = np.flatnonzero(self.sample_ids == sample_id)
        if len(idx) == 0:
            raise KeyError(f"no influence row for sample {sample_id}")
        return self.values[int(idx[0])]


def influence_matrix(params: ModelParams, hessian_op: HessianOperator,
                     train: Dataset, val: Dataset) -> InfluenceMatrix:
    """All category-wise influence vectors in K solves plus n*K dot products.

    Column k holds the influence of each training sample on the class-k
    validation subset; the K evaluation-side iHVPs are computed once and the
    bilinear form is finished with per-sample gradient dot products.
    """
    k_classes = val.num_classes
    q = np.empty((k_classes, hessian_op.num_params))
    for k in range(k_classes):
        g_eval = trainer.sum_gradient(params, val.class_subset(k))
        try:
            q[k] = ihvp(hessian_op, g_eval)
        except SolverError as exc:
            raise SolverError(f"class {k} evaluation solve failed: {exc}") from exc
    grads = trainer.per_sample_gradients(params, train)
    values = grads @ q.T
    metadata = {"epoch_index": params.epoch_index, "damping": hessian_op.damping,
                "mode": hessian_op.mode, "tolerance": hessian_op.cg_tol}
    return InfluenceMatrix(train.ids.copy(), values, metadata)


def loo_oracle(train: Dataset, drop_id: int, val_subset: Dataset,
               config: trainer.ModelConfig) -> float:
    """Ground-truth influence: retrain without drop_id, compare total val loss.

    Returns loss(without) - loss(with), both runs starting from the identical
    seeded initialization, so the result is a pure function of the inputs.
    Sign-aligned with influence_score.
    """
    if len(train) <= 1:
        raise DegenerateTrainingError("cannot retrain on fewer than 2 samples")
    reduced = train.without_ids([drop_id])
    if len(reduced) == len(train):
        raise KeyError(f"drop_id {drop_id} not in training set")
    init = trainer.init_params(config, train.dim, train.num_classes)
    full_params = trainer.train_weighted(init, train, np.ones(len(train)),
                                         config, config.epochs)
    red_params = trainer.train_weighted(init, reduced, np.ones(len(reduced)),
                                        config, config.epochs)
    return (trainer.total_loss(red_params, val_subset)
            - trainer.total_loss(full_params, val_subset))


# ---------------------------------------------------------------------------
# Influence artifact: CSV of scores + JSON sidecar
# ---------------------------------------------------------------------------

def _checksum(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_influence_matrix(m: InfluenceMatrix, path, checkpoint_path=None):
    path = Path(path)
    k = m.num_classes
    header = "sample_id," + ",".join(f"p{j}" for j in range(k))
    lines = [header]
    for i in range(len(m)):
        row = ",".join(repr(float(v)) for v in m.values[i])
        lines.append(f"{int(m.sample_ids[i])},{row}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    sidecar = dict(m.metadata)
    if checkpoint_path is not None:
        sidecar["checkpoint_sha256"] = _checksum(checkpoint_path)
    Path(str(path) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8", newline="\n")


def load_influence_matrix(path) -> InfluenceMatrix:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    k = len(header) - 1
    ids, values = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        ids.append(int(parts[0]))
        values.append([float(v) for v in parts[1:]])
    metadata = {}
    sidecar = Path(str(path) + ".meta.json")
    if sidecar.exists():
        metadata = json.loads(sidecar.read_text(encoding="utf-8"))
    return InfluenceMatrix(np.array(ids), np.array(values).reshape(len(ids), k),
                           metadata)
