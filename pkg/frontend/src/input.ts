/** Held-key tracking and the key→action mapping used once per displayed frame. */

import type { ActionTriple } from "./types.js";

/** Minimal slice of EventTarget so tests can pass a fake emitter. */
export interface KeyEventSource {
    addEventListener(type: string, listener: (event: KeyboardEvent) => void): void;
    removeEventListener(type: string, listener: (event: KeyboardEvent) => void): void;
}

const DRIVING_CODES = new Set(
    ["ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown", "Space"]);

export class KeyboardState {
    private held: Record<string, boolean> = {};
    private target: KeyEventSource | null = null;

    attach(target: KeyEventSource): void {
        this.detach();
        this.target = target;
        target.addEventListener("keydown", this.onKeyDown);
        target.addEventListener("keyup", this.onKeyUp);
    }

    detach(): void {
        if (this.target) {
            this.target.removeEventListener("keydown", this.onKeyDown);
            this.target.removeEventListener("keyup", this.onKeyUp);
            this.target = null;
        }
        this.held = {};
    }

    isDown(code: string): boolean {
        return !!this.held[code];
    }

    /** Left/right steer, up throttles, down or space brakes. */
    action(): ActionTriple {
        return {
            steering: (this.isDown("ArrowRight") ? 1 : 0)
                - (this.isDown("ArrowLeft") ? 1 : 0),
            throttle: this.isDown("ArrowUp") ? 1 : 0,
            brake: this.isDown("ArrowDown") || this.isDown("Space") ? 1 : 0,
        };
    }

    private onKeyDown = (event: KeyboardEvent) => {
        this.held[event.code] = true;
        if (DRIVING_CODES.has(event.code)) {
            event.preventDefault?.();
        }
    };

    private onKeyUp = (event: KeyboardEvent) => {
        this.held[event.code] = false;
    };
}
