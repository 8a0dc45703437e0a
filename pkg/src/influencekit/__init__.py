"""Category-wise influence analysis and Pareto sample-reweighting workbench."""

from .datamodel import (Dataset, RunManifest, Sample, gen_class_blobs,
                        gen_nonseparable, gen_separable_noisy, load_dataset,
                        save_dataset)
from .trainer import (DeltaVector, EpochMetrics, ModelConfig, ModelParams,
                      evaluate_per_class, init_params, loss, loss_gradient,
                      relative_change, train, train_weighted)
from .influence import (HessianOperator, InfluenceMatrix,
                        build_hessian_operator, influence_matrix,
                        influence_score, ihvp, loo_oracle, relative_damping)
from .ceiling import (CeilingReport, RegionCensus, build_ceiling_report,
                      ceiling_verdict, classify_regions, hyperplane_residual,
                      run_trimming, trim_iteration)
from .pareto import (AlphaThresholds, GAConfig, ParetoResult, TargetSet,
                     WeightSet, fitness, ga_search, run_course_correction,
                     run_direct_improvement, solve_reweight_lp)
from .harness import (InfluenceClassCounts, RemovalExperimentReport,
                      influence_class_counts, removal_experiment, spearman)
from .session import TrainingSession, load_session

__version__ = "0.1.0"
