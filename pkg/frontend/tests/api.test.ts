import { describe, expect, it } from "vitest";

import { ApiError, StudioApi } from "../src/api.js";

function recordingFetch(status: number, payload: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchImpl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { calls, fetchImpl };
}

describe("StudioApi", () => {
  it("posts JSON bodies to the documented paths", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { session_id: "s1" });
    const api = new StudioApi("http://svc", fetchImpl);
    await api.createSession();
    expect(calls[0].url).toBe("http://svc/sessions");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({});
  });

  it("submits attempts to the session resource", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { attempt_id: "a1" });
    const api = new StudioApi("", fetchImpl);
    const body = {
      spec: { name: "X", flavorText: "text long enough", types: ["Fire"] },
      params: { seed: 7 },
      image_cfg: { seed: 7 },
    };
    await api.submitAttempt("s1", body);
    expect(calls[0].url).toBe("/sessions/s1/attempts");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(body);
  });

  it("raises ApiError carrying the server detail", async () => {
    const detail = {
      error: "no valid card after 4 attempts",
      status: "failed_mechanics",
      mech_attempts: [{ raw_completion: "{}", issues: ["missing hp"] }],
    };
    const { fetchImpl } = recordingFetch(502, { detail });
    const api = new StudioApi("", fetchImpl);
    const err = await api.submitAttempt("s1", {
      spec: { name: "X", flavorText: "text long enough", types: ["Fire"] },
      params: { seed: 1 },
      image_cfg: { seed: 1 },
    }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.httpStatus).toBe(502);
    expect(err.detail.mech_attempts).toHaveLength(1);
  });

  it("builds image URLs for attempts", () => {
    const api = new StudioApi("http://svc");
    expect(api.cardPngUrl("a9")).toBe("http://svc/attempts/a9/card.png");
    expect(api.artPngUrl("a9")).toBe("http://svc/attempts/a9/art.png");
  });

  it("posts ratings and finalization", async () => {
    const { calls, fetchImpl } = recordingFetch(200, { ok: true });
    const api = new StudioApi("", fetchImpl);
    await api.postRating("a1", {
      aesthetics: 5, representativeness_image: 4, representativeness_mechanics: 4,
    });
    await api.finalizeSession("s1", "abandoned");
    expect(calls[0].url).toBe("/attempts/a1/rating");
    expect(calls[1].url).toBe("/sessions/s1/finalize");
    expect(JSON.parse(String(calls[1].init?.body))).toEqual({ status: "abandoned" });
  });
});
