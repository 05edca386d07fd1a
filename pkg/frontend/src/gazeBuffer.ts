/** Bounded FIFO for gaze samples awaiting a network flush.
 *
 * Overflow drops the oldest samples (the newest are the ones the next
 * flush should deliver) and counts them so the session summary can
 * surface data loss instead of hiding it.
 */

import type { GazePoint } from "./types.js";

export class GazeBuffer {
    private samples: GazePoint[] = [];
    private droppedCount = 0;

    constructor(private readonly capacity: number = 2000) {
        if (capacity < 1) {
            throw new Error(`capacity must be >= 1, got ${capacity}`);
        }
    }

    push(sample: GazePoint): void {
        this.samples.push(sample);
        while (this.samples.length > this.capacity) {
            this.samples.shift();
            this.droppedCount += 1;
        }
    }

    /** Removes and returns everything, oldest first. */
    drainAll(): GazePoint[] {
        const out = this.samples;
        this.samples = [];
        return out;
    }

    /** Puts a failed flush back at the front, preserving order. */
    requeue(samples: GazePoint[]): void {
        this.samples = samples.concat(this.samples);
        while (this.samples.length > this.capacity) {
            this.samples.shift();
            this.droppedCount += 1;
        }
    }

    get size(): number {
        return this.samples.length;
    }

    get dropped(): number {
        return this.droppedCount;
    }
}
