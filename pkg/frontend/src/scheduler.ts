/** Clock + repeating timers behind one interface so the drive loop is
 * deterministic under test (tests drive a manual clock). */

export interface Scheduler {
    now(): number;
    every(intervalMs: number, callback: () => void): () => void;
}

export const browserScheduler: Scheduler = {
    now: () => performance.now(),
    every: (intervalMs, callback) => {
        const id = setInterval(callback, intervalMs);
        return () => clearInterval(id);
    },
};
