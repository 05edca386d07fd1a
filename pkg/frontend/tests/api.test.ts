import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "../src/api.js";

interface Captured {
    url: string;
    init?: RequestInit;
}

function capturing(response: Response): { api: SessionApi; calls: Captured[] } {
    const calls: Captured[] = [];
    const api = new SessionApi("http://host:9000", async (input, init) => {
        calls.push({ url: String(input), init });
        return response.clone();
    });
    return { api, calls };
}

describe("session api client", () => {
    it("posts start options as JSON and parses the reply", async () => {
        const { api, calls } = capturing(new Response(JSON.stringify({
            session_id: "s1", track: "default", frame_rate_hz: 10,
            resolution: 227, t_ms: 0,
        })));
        const session = await api.start(
            { track: "default", frame_rate_hz: 10, resolution: 227 });
        expect(session.session_id).toBe("s1");
        expect(calls[0]!.url).toBe("http://host:9000/session/start");
        expect(calls[0]!.init?.method).toBe("POST");
        expect(JSON.parse(String(calls[0]!.init?.body))).toEqual(
            { track: "default", frame_rate_hz: 10, resolution: 227 });
    });

    it("reads frame bytes plus the timing headers", async () => {
        const { api } = capturing(new Response(new Blob([new Uint8Array(4)]), {
            headers: { "X-T-Ms": "300", "X-Frame-Index": "3" },
        }));
        const grab = await api.fetchFrame("s1");
        expect(grab.tMs).toBe(300);
        expect(grab.frameIndex).toBe(3);
        expect(grab.blob.size).toBe(4);
    });

    it("sends the action triple with the frame timestamp", async () => {
        const { api, calls } = capturing(new Response(JSON.stringify(
            { received_t_ms: 105, applies_from_frame: 2 })));
        const receipt = await api.postAction("s1", 100,
            { steering: -1, throttle: 1, brake: 0 });
        expect(receipt.applies_from_frame).toBe(2);
        expect(JSON.parse(String(calls[0]!.init?.body))).toEqual(
            { t_ms: 100, steering: -1, throttle: 1, brake: 0 });
    });

    it("ships gaze batches unmodified", async () => {
        const { api, calls } = capturing(new Response(JSON.stringify(
            { accepted: 2, received_t_ms: 80 })));
        const samples = [{ t_ms: 10, x: 1, y: 2 }, { t_ms: 30, x: 3, y: 4 }];
        const receipt = await api.postGaze("s1", samples);
        expect(receipt.accepted).toBe(2);
        expect(calls[0]!.url).toBe("http://host:9000/session/s1/gaze");
        expect(JSON.parse(String(calls[0]!.init?.body))).toEqual({ samples });
    });

    it("throws ApiError carrying the HTTP status on failure", async () => {
        const { api } = capturing(new Response("{\"detail\": \"busy\"}",
            { status: 409 }));
        const failure = await api.start(
            { track: "default", frame_rate_hz: 10, resolution: 64 })
            .catch((e: unknown) => e);
        expect(failure).toBeInstanceOf(ApiError);
        expect((failure as ApiError).status).toBe(409);
        expect(String(failure)).toContain("busy");
    });
});
