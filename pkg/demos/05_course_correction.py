# Course correction: a biased epoch tanks two classes; the search re-runs
# that epoch with optimized weights, measured against the epoch's original
# outcome, and replaces it in the history.

import numpy as np

from influencekit.pareto import GAConfig, TargetSet, run_course_correction
from influencekit.presets import make_blobs4
from influencekit.session import TrainingSession

train, val, config = make_blobs4(seed=3)
session = TrainingSession(train, val, config)
session.train_epochs(8)
healthy = session.metrics_at(8).per_class_accuracy.copy()

# simulate a detrimental epoch: classes 0 and 2 nearly dropped from the loss
biased = np.ones(len(train))
biased[np.isin(train.labels, [0, 2])] = 0.05
biased[np.isin(train.labels, [1, 3])] = 2.0
session.train_epochs(1, weights=biased)
degraded = session.metrics_at(9).per_class_accuracy.copy()

print("epoch 8 :", healthy.round(4))
print("epoch 9 :", degraded.round(4), "(detrimental)")
dropped = tuple(int(k) for k in range(4) if degraded[k] < healthy[k])
print(f"classes that dropped: {dropped}")

result, corrected = run_course_correction(session, 9, TargetSet(dropped, 4),
                                          GAConfig(seed=1))

print("epoch 9*:", corrected.per_class_accuracy.round(4), "(replaced)")
print(f"\n{'class':>5} {'original e9':>12} {'corrected e9':>13} {'change':>9}")
for k in range(4):
    mark = "*" if k in dropped else " "
    print(f"{mark}{k:>4} {degraded[k]:>12.4f} "
          f"{corrected.per_class_accuracy[k]:>13.4f} "
          f"{result.staged.delta[k] * 100:>+8.2f}%")
