/** DOM wiring: start form, live canvas, status banner, summary panel. */

import { SessionApi } from "./api.js";
import { DriveLoop } from "./driveLoop.js";
import { KeyboardState } from "./input.js";
import { MouseSampler } from "./mouseSampler.js";
import { browserScheduler } from "./scheduler.js";
import type { SessionSummary } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el as T;
}

const canvas = byId<HTMLCanvasElement>("frame");
const context = canvas.getContext("2d")!;
const banner = byId<HTMLDivElement>("banner");
const summaryPanel = byId<HTMLPreElement>("summary");
const startButton = byId<HTMLButtonElement>("start");
const finishButton = byId<HTMLButtonElement>("finish");
const trackInput = byId<HTMLSelectElement>("track");
const resolutionInput = byId<HTMLInputElement>("resolution");
const frameRateInput = byId<HTMLInputElement>("framerate");

const keys = new KeyboardState();
const mouse = new MouseSampler(Number(resolutionInput.value) || 227);
let loop: DriveLoop | null = null;

function showStatus(text: string, kind: "ok" | "warn" | "err"): void {
    banner.textContent = text;
    banner.className = kind;
}

function showSummary(summary: SessionSummary): void {
    summaryPanel.textContent = [
        `frames            ${summary.frames}`,
        `gaze samples      ${summary.gazeSamples}`,
        `mean gaze rate    ${summary.meanGazeRateHz.toFixed(1)} Hz`,
        `dropped samples   ${summary.droppedSamples}`,
        `latency misses    ${summary.latencyViolations}`,
        `duration          ${(summary.durationMs / 1000).toFixed(1)} s`,
        `written to        ${summary.directory}`,
    ].join("\n");
}

startButton.addEventListener("click", async () => {
    if (loop) return;
    startButton.disabled = true;
    try {
        loop = new DriveLoop({
            api: new SessionApi(""),
            keys,
            mouse,
            scheduler: browserScheduler,
            callbacks: {
                onFrame: (grab) => {
                    void createImageBitmap(grab.blob).then((bitmap) => {
                        context.drawImage(bitmap, 0, 0);
                        bitmap.close();
                    });
                },
                onStatus: (status) => {
                    if (status === "online") {
                        showStatus("recording — arrows drive, mouse is gaze", "ok");
                    } else {
                        showStatus("connection lost — buffering, retrying…", "err");
                    }
                },
            },
        });
        const session = await loop.start({
            track: trackInput.value,
            frame_rate_hz: Number(frameRateInput.value) || 10,
            resolution: Number(resolutionInput.value) || 227,
        });
        canvas.width = session.resolution;
        canvas.height = session.resolution;
        mouse.attach(canvas);
        keys.attach(window);
        summaryPanel.textContent = "";
        finishButton.disabled = false;
    } catch (error) {
        loop = null;
        startButton.disabled = false;
        showStatus(`could not start: ${error}`, "err");
    }
});

finishButton.addEventListener("click", async () => {
    if (!loop) return;
    finishButton.disabled = true;
    try {
        const summary = await loop.finish();
        showSummary(summary);
        showStatus(summary.droppedSamples === 0
            ? "session saved"
            : `session saved — ${summary.droppedSamples} gaze samples dropped`,
            summary.droppedSamples === 0 ? "ok" : "warn");
    } catch (error) {
        showStatus(`finish failed: ${error}`, "err");
    } finally {
        keys.detach();
        mouse.detach();
        loop = null;
        startButton.disabled = false;
    }
});
