// Payload shapes of the session service. The dashboard never computes its
// own numbers; everything rendered comes from these responses verbatim.

export interface SessionSummary {
  session_id: string;
  current_epoch: number;
  num_classes: number;
  train_size: number;
  val_size: number;
  model_config: Record<string, unknown>;
  weighted_epochs: number[];
}

export interface EpochMetrics {
  epoch: number;
  per_class_accuracy: number[];
  overall_accuracy: number;
}

export interface MetricsResponse {
  num_classes: number;
  epochs: EpochMetrics[];
}

export interface InfluenceResponse {
  epoch: number;
  sample_ids: number[];
  values: number[][];
  labels: number[];
  metadata: Record<string, unknown>;
}

export interface CensusLists {
  joint_positive: number[];
  joint_negative: number[];
  mixed: number[];
}

export interface CeilingResponse {
  census: CensusLists;
  residual_ratio: number;
  first_pc_ratio: number;
  principal_axis_alignment: number;
  verdict: "improvable" | "ceiling_reached";
  metadata: Record<string, unknown>;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface ParetoJobResult {
  best_fitness: number;
  best_alpha: number[];
  best_delta: number[];
  per_class_accuracy: number[];
  reference_accuracy: number[];
  targets: number[];
  mode: "DI" | "CC";
  base_epoch: number;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  session_id: string;
  state: JobState;
  progress: number;
  result: ParetoJobResult | { epoch: number } | null;
  error: string | null;
}

export interface CommitResponse {
  epoch: number;
  per_class_accuracy: number[];
}
