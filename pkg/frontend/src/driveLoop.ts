/**
 * driveLoop.ts
 * ------------------------------------------------------
 * The capture session orchestrator. Three independent
 * periodic tasks share one server session:
 *
 *   frame pump   — fetch/display the latest frame, then
 *                  post the current key action once per
 *                  newly displayed frame;
 *   gaze sampler — read the mouse position at 50 Hz into
 *                  a bounded buffer;
 *   gaze flusher — ship the buffer as a batch at least
 *                  every 200 ms, re-queueing on failure.
 *
 * Connection trouble flips the status to "offline" and
 * keeps buffering; nothing is lost unless the buffer
 * overflows, and overflow is counted, not hidden.
 * ------------------------------------------------------
 */

import { SessionApi } from "./api.js";
import { GazeBuffer } from "./gazeBuffer.js";
import { KeyboardState } from "./input.js";
import { MouseSampler } from "./mouseSampler.js";
import type { Scheduler } from "./scheduler.js";
import type {
    ConnectionStatus,
    FrameGrab,
    SessionSummary,
    StartOptions,
    StartResponse,
} from "./types.js";

export interface DriveLoopCallbacks {
    onFrame?(grab: FrameGrab): void;
    onStatus?(status: ConnectionStatus): void;
}

export interface DriveLoopOptions {
    api: SessionApi;
    keys: KeyboardState;
    mouse: MouseSampler;
    scheduler: Scheduler;
    buffer?: GazeBuffer;
    /** Gaze sampling period; 20 ms = 50 Hz, the contract minimum. */
    gazeSampleMs?: number;
    /** Flush period; must stay at or under the 200 ms contract. */
    gazeFlushMs?: number;
    callbacks?: DriveLoopCallbacks;
}

export class DriveLoop {
    private readonly api: SessionApi;
    private readonly keys: KeyboardState;
    private readonly mouse: MouseSampler;
    private readonly scheduler: Scheduler;
    private readonly buffer: GazeBuffer;
    private readonly gazeSampleMs: number;
    private readonly gazeFlushMs: number;
    private readonly callbacks: DriveLoopCallbacks;

    private session: StartResponse | null = null;
    private cancels: Array<() => void> = [];
    private status: ConnectionStatus = "connecting";
    private startedAt = 0;
    private pumpInFlight = false;
    private flushInFlight = false;
    private lastActionFrame = -1;
    private lastGazeT = -1;

    framesShown = 0;
    actionsSent = 0;
    gazeSent = 0;
    latencyViolations = 0;
    lastError = "";

    constructor(options: DriveLoopOptions) {
        this.api = options.api;
        this.keys = options.keys;
        this.mouse = options.mouse;
        this.scheduler = options.scheduler;
        this.buffer = options.buffer ?? new GazeBuffer();
        this.gazeSampleMs = options.gazeSampleMs ?? 20;
        this.gazeFlushMs = options.gazeFlushMs ?? 150;
        this.callbacks = options.callbacks ?? {};
        if (this.gazeFlushMs > 200) {
            throw new Error(`gaze flush period ${this.gazeFlushMs} ms breaks the 200 ms contract`);
        }
    }

    get connectionStatus(): ConnectionStatus {
        return this.status;
    }

    get droppedSamples(): number {
        return this.buffer.dropped;
    }

    async start(options: StartOptions): Promise<StartResponse> {
        if (this.session) {
            throw new Error("a capture session is already running in this tab");
        }
        const session = await this.api.start(options);
        this.session = session;
        this.mouse.setResolution(session.resolution);
        this.startedAt = this.scheduler.now();
        this.setStatus("online");

        const framePeriod = 1000 / session.frame_rate_hz;
        this.cancels = [
            this.scheduler.every(framePeriod, () => void this.pumpFrame()),
            this.scheduler.every(this.gazeSampleMs, () => this.sampleGaze()),
            this.scheduler.every(this.gazeFlushMs, () => void this.flushGaze()),
        ];
        return session;
    }

    async finish(): Promise<SessionSummary> {
        const session = this.requireSession();
        for (const cancel of this.cancels.splice(0)) cancel();
        await this.flushGaze();
        const response = await this.api.finish(session.session_id);
        const durationMs = Math.max(this.scheduler.now() - this.startedAt, 1);
        this.session = null;
        return {
            directory: response.directory,
            frames: response.frames,
            gazeSamples: response.gaze_samples,
            meanGazeRateHz: response.gaze_samples / (durationMs / 1000),
            droppedSamples: this.buffer.dropped,
            latencyViolations: this.latencyViolations,
            durationMs,
        };
    }

    /** One frame-pump tick: display the latest frame, then post the
     * currently held action for it. Skipped while a previous tick is
     * still on the wire so slow responses never pile up. */
    private async pumpFrame(): Promise<void> {
        const session = this.session;
        if (!session || this.pumpInFlight) return;
        this.pumpInFlight = true;
        try {
            const grab = await this.api.fetchFrame(session.session_id);
            this.setStatus("online");
            this.framesShown += 1;
            this.callbacks.onFrame?.(grab);
            if (grab.frameIndex !== this.lastActionFrame) {
                this.lastActionFrame = grab.frameIndex;
                const receipt = await this.api.postAction(
                    session.session_id, grab.tMs, this.keys.action());
                this.actionsSent += 1;
                if (receipt.applies_from_frame > grab.frameIndex + 1) {
                    this.latencyViolations += 1;
                }
            }
        } catch (error) {
            this.noteFailure(error);
        } finally {
            this.pumpInFlight = false;
        }
    }

    private sampleGaze(): void {
        if (!this.session) return;
        const position = this.mouse.position();
        if (!position) return;
        // Non-decreasing sample times; the service re-stamps receipt times
        // onto its own clock, so only the relative spacing matters here.
        const t = Math.max(Math.round(this.scheduler.now() - this.startedAt),
                           this.lastGazeT);
        this.lastGazeT = t;
        this.buffer.push({ t_ms: t, x: position.x, y: position.y });
    }

    private async flushGaze(): Promise<void> {
        const session = this.session;
        if (!session || this.flushInFlight || this.buffer.size === 0) return;
        this.flushInFlight = true;
        const batch = this.buffer.drainAll();
        try {
            const receipt = await this.api.postGaze(session.session_id, batch);
            this.gazeSent += receipt.accepted;
            this.setStatus("online");
        } catch (error) {
            this.buffer.requeue(batch);
            this.noteFailure(error);
        } finally {
            this.flushInFlight = false;
        }
    }

    private noteFailure(error: unknown): void {
        this.lastError = error instanceof Error ? error.message : String(error);
        this.setStatus("offline");
    }

    private setStatus(status: ConnectionStatus): void {
        if (status !== this.status) {
            this.status = status;
            this.callbacks.onStatus?.(status);
        }
    }

    private requireSession(): StartResponse {
        if (!this.session) {
            throw new Error("no capture session is running");
        }
        return this.session;
    }
}
