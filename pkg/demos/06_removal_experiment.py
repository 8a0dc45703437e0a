# Do influence columns predict retraining outcomes? Remove each class's
# top-10% beneficial (or detrimental) slice, retrain cold, and compare the
# measured accuracy changes with what the cumulative influence predicted.

import numpy as np

from influencekit.harness import (BENEFICIAL, DETRIMENTAL,
                                  influence_class_counts, removal_experiment,
                                  spearman)
from influencekit.presets import make_blobs4
from influencekit.session import TrainingSession

train, val, config = make_blobs4(seed=0)
session = TrainingSession(train, val, config)
session.train_epochs(8)
print("baseline accuracy:", session.metrics_at(8).per_class_accuracy.round(4))

reports = {}
for polarity in (BENEFICIAL, DETRIMENTAL):
    reports[polarity] = removal_experiment(session, 0.10, polarity)
    diag = np.diag(reports[polarity].accuracy_change)
    print(f"\nremove top-10% {polarity} per class -> own-class accuracy "
          f"change: {diag.round(4)}")
    print(f"accuracy-change matrix (rows = selection class):")
    print(reports[polarity].accuracy_change.round(4))

predicted = np.concatenate([-reports[p].cumulative_influence.ravel()
                            for p in reports])
measured = np.concatenate([reports[p].accuracy_change.ravel()
                           for p in reports])
print(f"\nrank agreement between predicted and measured change: "
      f"{spearman(predicted, measured):.3f}")

counts = influence_class_counts(session.influence_at(8), train, 0.10)
print("\nwhere do the selections come from? (rows = selection class, "
      "columns = sample label)")
print("beneficial:\n", counts.beneficial)
print("detrimental:\n", counts.detrimental)
own = np.diag(counts.beneficial).sum() / counts.beneficial.sum()
print(f"beneficial selections drawn from their own class: {own:.1%}; "
      "detrimental mass comes from the other classes")
