import {
    AnnotationsPayload,
    ComparisonPayload,
    ImageEntry,
    JobStatus,
    MethodKey,
    MethodsPayload,
    PlanPayload,
} from "./types.js";

export class ApiError extends Error {
    constructor(public status: number, public detail: string) {
        super(`HTTP ${status}: ${detail}`);
    }
}

async function parseDetail(response: Response): Promise<string> {
    try {
        const body = await response.json();
        return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
    } catch {
        return response.statusText || "request failed";
    }
}

/** Thin typed wrapper over the review API; the only writes are image
 *  uploads and plan submission/application. */
export class ApiClient {
    constructor(private baseUrl: string = "") {}

    private async getJson<T>(path: string): Promise<T> {
        const response = await fetch(this.baseUrl + path);
        if (!response.ok) {
            throw new ApiError(response.status, await parseDetail(response));
        }
        return (await response.json()) as T;
    }

    listImages(): Promise<ImageEntry[]> {
        return this.getJson("/api/images");
    }

    getMethods(): Promise<MethodsPayload> {
        return this.getJson("/api/methods");
    }

    getComparison(): Promise<ComparisonPayload> {
        return this.getJson("/api/comparison");
    }

    getAnnotations(imageId: number): Promise<AnnotationsPayload> {
        return this.getJson(`/api/images/${imageId}/annotations`);
    }

    imageUrl(imageId: number): string {
        return `${this.baseUrl}/api/images/${imageId}/image`;
    }

    overlayUrl(imageId: number, method: MethodKey, categoryId: number, alpha: number): string {
        const params = new URLSearchParams({
            method,
            class: String(categoryId),
            alpha: alpha.toFixed(2),
        });
        return `${this.baseUrl}/api/images/${imageId}/overlay?${params.toString()}`;
    }

    async submitPlan(plan: PlanPayload): Promise<string> {
        const response = await fetch(`${this.baseUrl}/api/plan`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(plan),
        });
        if (!response.ok) {
            throw new ApiError(response.status, await parseDetail(response));
        }
        const body = await response.json();
        return body.id as string;
    }

    async applyPlan(planId: string): Promise<string> {
        const response = await fetch(`${this.baseUrl}/api/plan/${planId}/apply`, { method: "POST" });
        if (!response.ok) {
            throw new ApiError(response.status, await parseDetail(response));
        }
        const body = await response.json();
        return body.job_id as string;
    }

    getJob(jobId: string): Promise<JobStatus> {
        return this.getJson(`/api/jobs/${jobId}`);
    }

    /** Poll until the job leaves pending/running or the timeout passes. */
    async waitForJob(jobId: string, timeoutMs = 300_000, intervalMs = 500): Promise<JobStatus> {
        const deadline = Date.now() + timeoutMs;
        for (;;) {
            const job = await this.getJob(jobId);
            if (job.status === "done" || job.status === "error") {
                return job;
            }
            if (Date.now() > deadline) {
                throw new Error(`job ${jobId} still ${job.status} after ${timeoutMs} ms`);
            }
            await new Promise((resolve) => setTimeout(resolve, intervalMs));
        }
    }
}
