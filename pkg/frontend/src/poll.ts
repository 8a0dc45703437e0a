// Poll a job until it reaches a terminal state, reporting every update.

import type { ApiClient } from "./api";
import type { JobStatus } from "./types";

export async function pollJob(
  api: ApiClient,
  jobId: string,
  onUpdate: (job: JobStatus) => void,
  intervalMs = 500,
): Promise<JobStatus> {
  for (;;) {
    const job = await api.getJob(jobId);
    onUpdate(job);
    if (job.state === "done" || job.state === "failed") return job;
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
