"""Validation experiments: ranked-removal retraining and selection statistics.

The removal experiment checks that influence columns predict retraining
outcomes: for every class, the top (or bottom) slice of training samples by
that class's influence column is removed, the model retrained from scratch,
and the per-class accuracy changes compared against the slice's cumulative
influence. Cold-start retraining keeps the deltas about the data rather than
the optimization trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .errors import UndefinedCorrelationError
from . import trainer as _trainer

BENEFICIAL = "beneficial"
DETRIMENTAL = "detrimental"


def spearman(x, y) -> float:
    """Rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("inputs must be equal-length vectors of length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("rank correlation of a constant vector")
    return float(scipy.stats.spearmanr(x, y).statistic)


@dataclass
class RemovalExperimentReport:
    """Outcome of one polarity of the ranked-removal experiment.

    Row k describes the class-k selection; column j the effect on class j.
    `spearman` is the rank agreement between the influence-PREDICTED accuracy
    change of each cell (minus the cumulative influence of the removed slice;
    removing beneficial mass should cost accuracy) and the measured change.
    """

    polarity: str
    fraction: float
    cumulative_influence: np.ndarray
    accuracy_change: np.ndarray
    baseline_accuracy: np.ndarray
    selections: dict = field(default_factory=dict)
    spearman: float = float("nan")
    skipped_rows: list = field(default_factory=list)

    def to_dict(self):
        return {"polarity": self.polarity, "fraction": self.fraction,
                "cumulative_influence": self.cumulative_influence.tolist(),
                "accuracy_change": self.accuracy_change.tolist(),
                "baseline_accuracy": self.baseline_accuracy.tolist(),
                "selections": {str(k): v for k, v in self.selections.items()},
                "spearman": self.spearman,
                "skipped_rows": self.skipped_rows}


def _selection_for_class(m, k, fraction, polarity):
    count = math.ceil(fraction * len(m))
    order = np.argsort(m.values[:, k], kind="stable")
    rows = order[::-1][:count] if polarity == BENEFICIAL else order[:count]
    return rows


def removal_experiment(session, fraction, polarity, damping=None,
                       epoch=None) -> RemovalExperimentReport:
    """Remove each class's top-|fraction| slice (by signed influence for
    `beneficial`, bottom for `detrimental`), retrain cold, record changes."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if polarity not in (BENEFICIAL, DETRIMENTAL):
        raise ValueError(f"polarity must be beneficial or detrimental, got {polarity!r}")
    epoch = session.current_epoch if epoch is None else epoch
    m = session.influence_at(epoch, damping=damping)
    k_classes = m.num_classes
    train, val, config = session.train, session.val, session.config
    baseline = session.metrics_at(epoch).per_class_accuracy

    cumulative = np.zeros((k_classes, k_classes))
    acc_change = np.full((k_classes, k_classes), np.nan)
    selections = {}
    skipped = []
    for k in range(k_classes):
        rows = _selection_for_class(m, k, fraction, polarity)
        ids = m.sample_ids[rows]
        selections[k] = [int(i) for i in ids]
        cumulative[k] = m.values[rows].sum(axis=0)
        reduced = train.without_ids(ids)
        if len(np.unique(reduced.labels)) < train.num_classes:
            skipped.append(k)
            continue
        init = _trainer.init_params(config, train.dim, train.num_classes)
        params = _trainer.train_weighted(init, reduced, np.ones(len(reduced)),
                                         config, epoch)
        metrics = _trainer.evaluate_per_class(params, val)
        acc_change[k] = metrics.per_class_accuracy - baseline

    valid = ~np.isnan(acc_change).any(axis=1)
    rho = float("nan")
    if valid.sum() >= 1:
        predicted = -cumulative[valid].ravel()
        measured = acc_change[valid].ravel()
        rho = spearman(predicted, measured)
    return RemovalExperimentReport(polarity=polarity, fraction=fraction,
                                   cumulative_influence=cumulative,
                                   accuracy_change=acc_change,
                                   baseline_accuracy=baseline.copy(),
                                   selections=selections, spearman=rho,
                                   skipped_rows=skipped)


@dataclass
class InfluenceClassCounts:
    """Label composition of each class's beneficial/detrimental selection."""

    fraction: float
    beneficial: np.ndarray
    detrimental: np.ndarray
    selection_size: int

    def to_dict(self):
        return {"fraction": self.fraction,
                "selection_size": self.selection_size,
                "beneficial": self.beneficial.tolist(),
                "detrimental": self.detrimental.tolist()}


def influence_class_counts(m, train, fraction) -> InfluenceClassCounts:
    """Cross-tabulate each class-k selection by the selected samples' labels.

    Entry [k, j] counts how many of the samples selected for class k carry
    label j; every row sums to ceil(fraction * n).
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    k_classes = m.num_classes
    label_by_id = {int(i): int(l) for i, l in zip(train.ids, train.labels)}
    size = math.ceil(fraction * len(m))
    out = {}
    for polarity in (BENEFICIAL, DETRIMENTAL):
        counts = np.zeros((k_classes, k_classes), dtype=np.int64)
        for k in range(k_classes):
            rows = _selection_for_class(m, k, fraction, polarity)
            for i in m.sample_ids[rows]:
                counts[k, label_by_id[int(i)]] += 1
        out[polarity] = counts
    return InfluenceClassCounts(fraction=fraction, beneficial=out[BENEFICIAL],
                                detrimental=out[DETRIMENTAL],
                                selection_size=size)
