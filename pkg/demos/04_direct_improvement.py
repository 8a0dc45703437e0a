# Direct improvement: pick the under-performing classes, let the LP+GA
# search find per-sample loss weights, and commit one reweighted epoch that
# lifts the targets without trading the other classes away.

import numpy as np

from influencekit.pareto import GAConfig, TargetSet, run_direct_improvement
from influencekit.presets import make_blobs4
from influencekit.session import TrainingSession

train, val, config = make_blobs4(seed=0)
session = TrainingSession(train, val, config)
session.train_epochs(8)

acc = session.metrics_at(8).per_class_accuracy
print("accuracy after 8 epochs:", acc.round(4))
targets = TargetSet(tuple(int(k) for k in np.argsort(acc)[:2]), 4)
print(f"targets (weakest classes): {targets.indices}")

result, metrics = run_direct_improvement(session, targets, GAConfig(seed=0))

print(f"\nGA evaluated {len(result.log)} candidates; "
      f"best fitness {result.best_fitness:.4f}")
print(f"best alpha: {result.best_alpha.alpha.round(3)}")
w = result.best_weights.w
print(f"weights: min {w.min():.3f}, max {w.max():.3f}, "
      f"upweighted {np.sum(w > 1.0)}, downweighted {np.sum(w < 1.0)}")
print(f"\n{'class':>5} {'before':>8} {'after':>8} {'change':>9}")
for k in range(4):
    mark = "*" if k in targets.indices else " "
    delta = result.staged.delta[k]
    print(f"{mark}{k:>4} {acc[k]:>8.4f} {metrics.per_class_accuracy[k]:>8.4f} "
          f"{delta * 100:>+8.2f}%")
