# Repeatedly drop every joint-negative training sample and refit. The most
# damaging noise goes first; the loop stops at a fixed point with all the
# flipped labels gone and both class accuracies recovered.

from influencekit.ceiling import run_trimming
from influencekit.presets import make_separable_noisy

train, val, config = make_separable_noisy(seed=0)
flipped = set(train.metadata["flipped_ids"])

final, params, reports = run_trimming(train, val, config, max_iterations=5)

removed = set()
print(f"{'iter':>4} {'removed':>8} {'acc before':>22} {'acc after':>22}")
for i, r in enumerate(reports):
    removed |= set(r.removed_ids)
    print(f"{i:>4} {len(r.removed_ids):>8} "
          f"{str(r.accuracy_before.round(4)):>22} "
          f"{str(r.accuracy_after.round(4)):>22}")

print(f"\nflipped ids removed: {len(removed & flipped)}/{len(flipped)}")
print(f"clean samples removed: {len(removed - flipped)}")
print(f"final training set size: {len(final)} (from {len(train)})")
