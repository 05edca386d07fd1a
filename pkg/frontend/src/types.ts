/** Wire types mirroring the session service's request/response models. */

export interface ActionTriple {
    steering: number;
    throttle: number;
    brake: number;
}

export interface GazePoint {
    t_ms: number;
    x: number;
    y: number;
}

export interface StartOptions {
    track: string;
    frame_rate_hz: number;
    resolution: number;
}

export interface StartResponse {
    session_id: string;
    track: string;
    frame_rate_hz: number;
    resolution: number;
    t_ms: number;
}

export interface ActionReceipt {
    received_t_ms: number;
    applies_from_frame: number;
}

export interface GazeReceipt {
    accepted: number;
    received_t_ms: number;
}

export interface FinishResponse {
    directory: string;
    frames: number;
    gaze_samples: number;
}

/** One fetched frame: encoded image plus the service's timing headers. */
export interface FrameGrab {
    blob: Blob;
    tMs: number;
    frameIndex: number;
}

export type ConnectionStatus = "connecting" | "online" | "offline";

export interface SessionSummary {
    directory: string;
    frames: number;
    gazeSamples: number;
    meanGazeRateHz: number;
    droppedSamples: number;
    latencyViolations: number;
    durationMs: number;
}
