/**
 * api.ts
 * ------------------------------------------------------
 * Typed client for the local session service. Every
 * method throws ApiError on a non-OK response so the
 * caller (the drive loop) can buffer and retry.
 * ------------------------------------------------------
 */

import type {
    ActionReceipt,
    ActionTriple,
    FinishResponse,
    FrameGrab,
    GazePoint,
    GazeReceipt,
    StartOptions,
    StartResponse,
} from "./types.js";

export class ApiError extends Error {
    constructor(public readonly status: number, message: string) {
        super(`${status}: ${message}`);
        this.name = "ApiError";
    }
}

type FetchFn = typeof fetch;

export class SessionApi {
    constructor(
        private readonly baseUrl: string = "",
        private readonly fetchFn: FetchFn = (...args) => fetch(...args),
    ) {}

    async start(options: StartOptions): Promise<StartResponse> {
        return this.postJson<StartResponse>("/session/start", options);
    }

    async fetchFrame(sessionId: string): Promise<FrameGrab> {
        const response = await this.fetchFn(
            `${this.baseUrl}/session/${sessionId}/frame`,
            { cache: "no-store" },
        );
        if (!response.ok) {
            throw new ApiError(response.status, await safeText(response));
        }
        return {
            blob: await response.blob(),
            tMs: Number(response.headers.get("X-T-Ms") ?? "0"),
            frameIndex: Number(response.headers.get("X-Frame-Index") ?? "0"),
        };
    }

    async postAction(sessionId: string, tMs: number,
                     action: ActionTriple): Promise<ActionReceipt> {
        return this.postJson<ActionReceipt>(`/session/${sessionId}/action`, {
            t_ms: tMs,
            steering: action.steering,
            throttle: action.throttle,
            brake: action.brake,
        });
    }

    async postGaze(sessionId: string,
                   samples: GazePoint[]): Promise<GazeReceipt> {
        return this.postJson<GazeReceipt>(`/session/${sessionId}/gaze`,
                                          { samples });
    }

    async finish(sessionId: string): Promise<FinishResponse> {
        return this.postJson<FinishResponse>(`/session/${sessionId}/finish`, {});
    }

    private async postJson<T>(path: string, body: unknown): Promise<T> {
        const response = await this.fetchFn(`${this.baseUrl}${path}`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!response.ok) {
            throw new ApiError(response.status, await safeText(response));
        }
        return (await response.json()) as T;
    }
}

async function safeText(response: Response): Promise<string> {
    try {
        return (await response.text()).slice(0, 200);
    } catch {
        return response.statusText;
    }
}
