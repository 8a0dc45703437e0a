"""Performance-ceiling diagnostics on influence-vector geometry.

A classifier has sample-level headroom when training points sit in the joint
positive or joint negative orthant of influence space (helping or hurting
every class at once). When those regions are empty, headroom can still hide
in combinations of tradeoff samples; the geometric tell is whether the
influence vectors hug the tradeoff hyperplane (for two classes, the line
where one class's gain is exactly the other's loss). The verdict here
combines an orthant census with a PCA residual test, and the trimming loop
applies the census repeatedly to strip jointly harmful samples.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datamodel import Dataset
from .errors import DegenerateGeometryError, TrimAbortedError
from . import influence as _influence
from . import trainer as _trainer
from .influence import InfluenceMatrix

CEILING_REACHED = "ceiling_reached"
IMPROVABLE = "improvable"

DEFAULT_TAU_REGION = 0.01
DEFAULT_TAU_RESIDUAL = 0.05


@dataclass
class RegionCensus:
    """Partition of training ids into joint-positive / joint-negative / mixed."""

    joint_positive: list
    joint_negative: list
    mixed: list

    @property
    def counts(self):
        return {"joint_positive": len(self.joint_positive),
                "joint_negative": len(self.joint_negative),
                "mixed": len(self.mixed)}

    @property
    def total(self):
        return len(self.joint_positive) + len(self.joint_negative) + len(self.mixed)


@dataclass
class CeilingReport:
    census: RegionCensus
    residual_ratio: float
    first_pc_ratio: float
    principal_axis_alignment: float
    verdict: str
    metadata: dict = field(default_factory=dict)

    def to_json(self):
        d = dataclasses.asdict(self)
        return json.dumps(d, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(census=RegionCensus(**d["census"]),
                   residual_ratio=d["residual_ratio"],
                   first_pc_ratio=d["first_pc_ratio"],
                   principal_axis_alignment=d["principal_axis_alignment"],
                   verdict=d["verdict"], metadata=d.get("metadata", {}))

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8", newline="\n")


def classify_regions(m: InfluenceMatrix, zero_tol: float = 0.0) -> RegionCensus:
    """Orthant census. Ties at exactly +-zero_tol count as mixed, so boundary
    noise never inflates the joint regions."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be >= 0")
    pos = (m.values > zero_tol).all(axis=1)
    neg = (m.values < -zero_tol).all(axis=1)
    ids = m.sample_ids
    return RegionCensus(joint_positive=[int(i) for i in ids[pos]],
                        joint_negative=[int(i) for i in ids[neg]],
                        mixed=[int(i) for i in ids[~pos & ~neg]])


def hyperplane_residual(m: InfluenceMatrix, center: bool = True):
    """PCA of the influence rows.

    Returns (residual_ratio, first_pc_ratio, principal_axis_alignment):
    residual_ratio is the variance fraction orthogonal to the best-fit
    (K-1)-dimensional hyperplane (smallest eigenvalue over total),
    first_pc_ratio the dominant-direction fraction, and the alignment the
    squared cosine between the hyperplane normal and the all-ones direction
    (1.0 for two classes means the rows lie along the y = -x tradeoff line).
    `center=False` analyzes second moments about the origin instead of the
    mean, which reads the line as through the origin.
    """
    n, k = m.values.shape
    if n < k:
        raise ValueError(f"need at least K={k} rows, got {n}")
    x = m.values
    if center:
        x = x - x.mean(axis=0)
    cov = x.T @ x / n
    total = np.trace(cov)
    if total <= 0.0:
        raise DegenerateGeometryError("influence matrix has zero variance")
    evals, evecs = np.linalg.eigh(cov)
    residual_ratio = float(evals[0] / total)
    first_pc_ratio = float(evals[-1] / total)
    normal = evecs[:, 0]
    ones = np.ones(k) / np.sqrt(k)
    alignment = float((normal @ ones) ** 2)
    return residual_ratio, first_pc_ratio, alignment


def ceiling_verdict(census: RegionCensus, geometry, tau_region=DEFAULT_TAU_REGION,
                    tau_residual=DEFAULT_TAU_RESIDUAL) -> str:
    """Improvable when joint regions are populated or the rows leave the
    tradeoff hyperplane; otherwise the ceiling condition holds."""
    if not (0 < tau_region < 1 and 0 < tau_residual < 1):
        raise ValueError("thresholds must lie in (0, 1)")
    residual_ratio = geometry[0] if isinstance(geometry, tuple) else float(geometry)
    n = census.total
    joint_fraction = (len(census.joint_positive) + len(census.joint_negative)) / n
    if joint_fraction > tau_region or residual_ratio > tau_residual:
        return IMPROVABLE
    return CEILING_REACHED


def build_ceiling_report(m: InfluenceMatrix, zero_tol=0.0,
                         tau_region=DEFAULT_TAU_REGION,
                         tau_residual=DEFAULT_TAU_RESIDUAL) -> CeilingReport:
    census = classify_regions(m, zero_tol)
    geometry = hyperplane_residual(m)
    verdict = ceiling_verdict(census, geometry, tau_region, tau_residual)
    residual_ratio, first_pc_ratio, alignment = geometry
    origin_geom = hyperplane_residual(m, center=False)
    return CeilingReport(census=census, residual_ratio=residual_ratio,
                         first_pc_ratio=first_pc_ratio,
                         principal_axis_alignment=alignment, verdict=verdict,
                         metadata={"zero_tol": zero_tol, "tau_region": tau_region,
                                   "tau_residual": tau_residual,
                                   "origin_residual_ratio": origin_geom[0],
                                   "origin_alignment": origin_geom[2],
                                   **m.metadata})


@dataclass
class TrimReport:
    """Before/after record of one trim iteration."""

    removed_ids: list
    accuracy_before: np.ndarray
    accuracy_after: np.ndarray
    census_counts: dict


def trim_iteration(train: Dataset, val: Dataset, config: _trainer.ModelConfig,
                   damping=None, zero_tol=0.0):
    """Fit, score, drop every joint-negative sample, refit.

    Returns (trimmed_train, new_params, TrimReport). A fixed point (empty
    joint-negative set) returns the input set unchanged. Aborts with a
    partial report if the removal would empty a class.
    """
    init = _trainer.init_params(config, train.dim, train.num_classes)
    params = _trainer.train(init, train, config)
    before = _trainer.evaluate_per_class(params, val)
    lam = damping if damping is not None else _influence.relative_damping(params, train)
    op = _influence.build_hessian_operator(params, train, lam)
    matrix = _influence.influence_matrix(params, op, train, val)
    census = classify_regions(matrix, zero_tol)
    removed = census.joint_negative
    if not removed:
        report = TrimReport([], before.per_class_accuracy,
                            before.per_class_accuracy, census.counts)
        return train, params, report
    trimmed = train.without_ids(removed)
    kept_labels = set(int(c) for c in np.unique(trimmed.labels)) if len(removed) < len(train) else set()
    if len(removed) == len(train) or len(kept_labels) < train.num_classes:
        report = TrimReport(removed, before.per_class_accuracy, None, census.counts)
        raise TrimAbortedError(
            "removing the joint-negative set would empty a class", report)
    new_params = _trainer.train(_trainer.init_params(config, train.dim,
                                                     train.num_classes),
                                trimmed, config)
    after = _trainer.evaluate_per_class(new_params, val)
    report = TrimReport(removed, before.per_class_accuracy,
                        after.per_class_accuracy, census.counts)
    return trimmed, new_params, report


def run_trimming(train: Dataset, val: Dataset, config, max_iterations=10,
                 damping=None, zero_tol=0.0):
    """Iterate trim_iteration until the joint-negative set is empty.

    Returns (final_train, final_params, [TrimReport per iteration]).
    """
    reports = []
    current = train
    params = None
    for _ in range(max_iterations):
        current, params, report = trim_iteration(current, val, config,
                                                 damping=damping, zero_tol=zero_tol)
        reports.append(report)
        if not report.removed_ids:
            break
    return current, params, reports
