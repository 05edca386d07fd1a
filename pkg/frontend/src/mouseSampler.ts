/** Latest mouse position over the canvas, in frame-pixel coordinates.
 *
 * The drive loop polls this on its own 50 Hz timer; holding the mouse
 * still therefore keeps producing samples at the full rate, and no
 * position is ever fabricated before the first mouse movement.
 */

export interface MouseEventSource {
    addEventListener(type: string, listener: (event: MouseEvent) => void): void;
    removeEventListener(type: string, listener: (event: MouseEvent) => void): void;
    getBoundingClientRect(): { left: number; top: number; width: number; height: number };
}

export class MouseSampler {
    private latest: { x: number; y: number } | null = null;
    private element: MouseEventSource | null = null;

    constructor(private resolution: number) {}

    attach(element: MouseEventSource): void {
        this.detach();
        this.element = element;
        element.addEventListener("mousemove", this.onMove);
    }

    detach(): void {
        if (this.element) {
            this.element.removeEventListener("mousemove", this.onMove);
            this.element = null;
        }
        this.latest = null;
    }

    setResolution(resolution: number): void {
        this.resolution = resolution;
    }

    /** Frame-pixel position, or null before the mouse first enters. */
    position(): { x: number; y: number } | null {
        return this.latest;
    }

    private onMove = (event: MouseEvent) => {
        if (!this.element) return;
        const rect = this.element.getBoundingClientRect();
        if (rect.width <= 0 || rect.height <= 0) return;
        const x = ((event.clientX - rect.left) / rect.width) * this.resolution;
        const y = ((event.clientY - rect.top) / rect.height) * this.resolution;
        const max = this.resolution - 1;
        this.latest = {
            x: Math.min(Math.max(x, 0), max),
            y: Math.min(Math.max(y, 0), max),
        };
    };
}
