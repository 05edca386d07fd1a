import { describe, expect, it } from "vitest";

import { KeyboardState } from "../src/input.js";
import { FakeKeySource } from "./fakes.js";

function attached(): { keys: KeyboardState; source: FakeKeySource } {
    const keys = new KeyboardState();
    const source = new FakeKeySource();
    keys.attach(source);
    return { keys, source };
}

describe("key to action mapping", () => {
    it("maps nothing held to the zero action", () => {
        const { keys } = attached();
        expect(keys.action()).toEqual({ steering: 0, throttle: 0, brake: 0 });
    });

    it("maps each driving key to its actuator", () => {
        const { keys, source } = attached();
        source.press("ArrowRight");
        expect(keys.action().steering).toBe(1);
        source.release("ArrowRight");
        source.press("ArrowLeft");
        expect(keys.action().steering).toBe(-1);
        source.press("ArrowUp");
        expect(keys.action().throttle).toBe(1);
        source.press("ArrowDown");
        expect(keys.action().brake).toBe(1);
    });

    it("cancels opposing steering keys", () => {
        const { keys, source } = attached();
        source.press("ArrowLeft");
        source.press("ArrowRight");
        expect(keys.action().steering).toBe(0);
    });

    it("accepts space as a brake alias", () => {
        const { keys, source } = attached();
        source.press("Space");
        expect(keys.action()).toEqual({ steering: 0, throttle: 0, brake: 1 });
    });

    it("clears on key release and on detach", () => {
        const { keys, source } = attached();
        source.press("ArrowUp");
        source.release("ArrowUp");
        expect(keys.action().throttle).toBe(0);
        source.press("ArrowUp");
        keys.detach();
        expect(keys.action().throttle).toBe(0);
        source.press("ArrowDown");
        expect(keys.action().brake).toBe(0);
    });

    it("ignores unrelated keys", () => {
        const { keys, source } = attached();
        source.press("KeyQ");
        expect(keys.action()).toEqual({ steering: 0, throttle: 0, brake: 0 });
    });
});
