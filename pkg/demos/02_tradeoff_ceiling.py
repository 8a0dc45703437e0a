# Overlapping clouds that no hyperplane separates: every sample trades one
# class off against the other, the influence vectors collapse onto a line,
# and the ceiling diagnostics read "ceiling_reached".

import numpy as np

from influencekit import ceiling, influence, trainer
from influencekit.presets import make_nonseparable

train, val, config = make_nonseparable(seed=0)
params = trainer.train(trainer.init_params(config, train.dim,
                                           train.num_classes), train, config)
metrics = trainer.evaluate_per_class(params, val)
print(f"per-class accuracy: {metrics.per_class_accuracy.round(4)} "
      "(overlap caps both classes below 1.0)")

op = influence.build_hessian_operator(
    params, train, influence.relative_damping(params, train))
matrix = influence.influence_matrix(params, op, train, val)

report = ceiling.build_ceiling_report(matrix)
counts = report.census.counts
print(f"census: {counts}")
print(f"mixed fraction      : {counts['mixed'] / len(matrix):.2%}")
print(f"residual ratio      : {report.residual_ratio:.5f}")
print(f"axis alignment      : {report.principal_axis_alignment:.4f} "
      "(1.0 = the vectors hug the one-class-pays-for-the-other line)")
print(f"verdict             : {report.verdict}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax1.scatter(*train.features.T, s=8, c=np.where(train.labels == 0,
                                                   "tab:blue", "tab:orange"))
    ax1.set_title("overlapping training clouds")
    ax2.scatter(matrix.values[:, 0], matrix.values[:, 1], s=8,
                c=np.where(train.labels == 0, "tab:blue", "tab:orange"))
    lim = np.abs(matrix.values).max()
    ax2.plot([-lim, lim], [lim, -lim], "g--", lw=1, label="y = -x")
    ax2.set_xlabel("influence on class 0")
    ax2.set_ylabel("influence on class 1")
    ax2.set_title("influence vectors on the tradeoff line")
    ax2.legend()
    fig.tight_layout()
    fig.savefig("demo02_tradeoff_line.png", dpi=120)
    print("wrote demo02_tradeoff_line.png")
except ImportError:
    pass
