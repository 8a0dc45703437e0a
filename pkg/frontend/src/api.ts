// Thin fetch client for the session service. Base URL is the only
// configuration; errors surface the service's JSON detail when present.

import type {
  CeilingResponse, CommitResponse, InfluenceResponse, JobStatus,
  MetricsResponse, SessionSummary,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        body && typeof body === "object" && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  getSession(id: string): Promise<SessionSummary> {
    return this.request(`/sessions/${id}`);
  }

  getMetrics(id: string): Promise<MetricsResponse> {
    return this.request(`/sessions/${id}/metrics`);
  }

  trainEpochs(id: string, numEpochs: number): Promise<unknown> {
    return this.request(`/sessions/${id}/epochs`, {
      method: "POST",
      body: JSON.stringify({ num_epochs: numEpochs }),
    });
  }

  buildInfluence(id: string, epoch: number): Promise<{ job_id: string }> {
    return this.request(`/sessions/${id}/influence?epoch=${epoch}`, {
      method: "POST",
    });
  }

  getInfluence(id: string, epoch: number): Promise<InfluenceResponse> {
    return this.request(`/sessions/${id}/influence/${epoch}`);
  }

  getCeiling(id: string, epoch: number): Promise<CeilingResponse> {
    return this.request(`/sessions/${id}/ceiling?epoch=${epoch}`);
  }

  startPareto(
    id: string,
    mode: "DI" | "CC",
    targets: number[],
    epoch?: number,
  ): Promise<{ job_id: string }> {
    return this.request(`/sessions/${id}/pareto`, {
      method: "POST",
      body: JSON.stringify({ mode, targets, epoch }),
    });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request(`/jobs/${jobId}`);
  }

  commit(id: string, jobId: string): Promise<CommitResponse> {
    return this.request(`/sessions/${id}/commit`, {
      method: "POST",
      body: JSON.stringify({ job_id: jobId }),
    });
  }

  rollback(id: string, epoch: number): Promise<{ current_epoch: number }> {
    return this.request(`/sessions/${id}/rollback`, {
      method: "POST",
      body: JSON.stringify({ epoch }),
    });
  }
}
