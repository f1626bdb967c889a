// A fetch-compatible stand-in for the card service, faithful to its
// adaptation classification and session/rating semantics, recording every
// request body for assertions.

import type { AttemptDoc, AttemptRequest, CardDoc, RatingBody } from "../src/api.js";

interface Previous {
  spec: unknown;
  params: Record<string, unknown>;
  image_cfg: Record<string, unknown>;
}

function withoutSeed(data: Record<string, unknown>): Record<string, unknown> {
  const { seed: _seed, ...rest } = data;
  return rest;
}

export class MockService {
  attemptBodies: AttemptRequest[] = [];
  ratings: { attemptId: string; rating: RatingBody }[] = [];
  finalized: string | null = null;
  failNextAttempt: { error: string; mech_attempts: { raw_completion: string; issues: string[] }[] } | null = null;

  private counter = 0;
  private previous: Previous | null = null;
  private sessionStatus: "active" | "finalized" | "abandoned" = "active";
  readonly attempts: AttemptDoc[] = [];

  readonly fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : {};
    const path = url.replace(/^https?:\/\/[^/]+/, "");

    if (method === "POST" && path === "/sessions") {
      return json({ session_id: "session-mock-1", status: "active", attempt_ids: [] });
    }

    const attemptMatch = path.match(/^\/sessions\/([^/]+)\/attempts$/);
    if (method === "POST" && attemptMatch) {
      if (this.sessionStatus !== "active") {
        return json({ detail: `session is ${this.sessionStatus}` }, 409);
      }
      if (this.failNextAttempt) {
        const detail = { ...this.failNextAttempt, attempt_id: "attempt-failed", status: "failed_mechanics" };
        this.failNextAttempt = null;
        return json({ detail }, 502);
      }
      const request = body as AttemptRequest;
      this.attemptBodies.push(request);
      const attempt = this.buildAttempt(attemptMatch[1], request);
      this.attempts.push(attempt);
      return json(attempt);
    }

    const ratingMatch = path.match(/^\/attempts\/([^/]+)\/rating$/);
    if (method === "POST" && ratingMatch) {
      const rating = body as RatingBody;
      for (const likert of [rating.aesthetics, rating.representativeness_image,
                            rating.representativeness_mechanics]) {
        if (likert < 1 || likert > 5) return json({ detail: "likert out of range" }, 422);
      }
      this.ratings.push({ attemptId: ratingMatch[1], rating });
      return json({ ...rating, rated_at: "t" });
    }

    const finalizeMatch = path.match(/^\/sessions\/([^/]+)\/finalize$/);
    if (method === "POST" && finalizeMatch) {
      this.sessionStatus = body.status;
      this.finalized = body.status;
      return json({ session_id: finalizeMatch[1], status: body.status, attempt_ids: [] });
    }

    const sessionMatch = path.match(/^\/sessions\/([^/]+)$/);
    if (method === "GET" && sessionMatch) {
      return json({
        session_id: sessionMatch[1],
        status: this.sessionStatus,
        attempt_ids: this.attempts.map((a) => a.attempt_id),
        attempts: this.attempts,
      });
    }

    return json({ detail: `no mock route for ${method} ${path}` }, 404);
  };

  private classify(request: AttemptRequest): string {
    if (request.adaptation) return request.adaptation;
    if (!this.previous) return "initial";
    if (JSON.stringify(this.previous.spec) !== JSON.stringify(request.spec)) {
      return "prompt_adjustment";
    }
    const paramsChanged =
      JSON.stringify(withoutSeed(this.previous.params)) !==
        JSON.stringify(withoutSeed(request.params as Record<string, unknown>)) ||
      JSON.stringify(withoutSeed(this.previous.image_cfg)) !==
        JSON.stringify(withoutSeed(request.image_cfg as Record<string, unknown>));
    return paramsChanged ? "parameter_tuning" : "regeneration";
  }

  private buildAttempt(sessionId: string, request: AttemptRequest): AttemptDoc {
    const adaptation = this.classify(request);
    this.previous = {
      spec: request.spec,
      params: request.params as Record<string, unknown>,
      image_cfg: request.image_cfg as Record<string, unknown>,
    };
    this.counter += 1;
    const seed = request.params.seed;
    const card: CardDoc = {
      id: `gen-${this.counter}`,
      name: request.spec.name,
      flavorText: request.spec.flavorText,
      types: request.spec.types,
      hp: 70,
      abilities: [],
      attacks: [{
        name: "Spark",
        cost: [request.spec.types[0]],
        damage: String(((seed % 5) + 1) * 10),
      }],
      weaknesses: [{ type: "Fighting", value: "x2" }],
      resistances: [],
      retreatCost: 1,
    };
    return {
      attempt_id: `attempt-${this.counter}`,
      session_id: sessionId,
      status: "ok",
      adaptation,
      spec: request.spec,
      params: { ...request.params, seed },
      image_cfg: { ...request.image_cfg },
      card,
      lint: {
        card_id: card.id ?? "",
        passed: true,
        findings: this.counter % 2 === 0
          ? [{ rule: "UNKNOWN_MECHANIC", severity: "warning", locus: "attacks[0].text", detail: "odd phrasing" }]
          : [],
      },
      repair_count: 0,
      rating: null,
    };
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
