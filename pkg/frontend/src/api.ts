// Typed client for the card service HTTP API. Every request the studio makes
// goes through this module; there is no other channel to the backend.

export interface CardSpecBody {
  name: string;
  flavorText: string;
  types: string[];
}

export interface GenParamsBody {
  seed: number;
  temperature?: number;
  retrieval_k?: number;
  max_repair_attempts?: number;
}

export interface LoraSpec {
  name: string;
  strength: number;
}

export interface ImageCfgBody {
  seed: number;
  cfg?: number;
  steps?: number;
  width?: number;
  height?: number;
  loras?: LoraSpec[];
}

export interface AttemptRequest {
  spec: CardSpecBody;
  params: GenParamsBody;
  image_cfg: ImageCfgBody;
  adaptation?: "idea_change" | "manual_touchup";
  artwork_override_b64?: string;
}

export interface LintFinding {
  rule: string;
  severity: "warning" | "error";
  locus: string;
  detail: string;
  score?: number | null;
}

export interface LintReport {
  card_id: string;
  passed: boolean;
  findings: LintFinding[];
}

export interface CardAttack {
  name: string;
  cost: string[];
  damage: string;
  text?: string;
}

export interface CardDoc {
  id?: string;
  name: string;
  flavorText: string;
  types: string[];
  hp: number;
  abilities: { name: string; text: string }[];
  attacks: CardAttack[];
  weaknesses: { type: string; value: string }[];
  resistances: { type: string; value: string }[];
  retreatCost: number;
}

export interface RatingBody {
  aesthetics: number;
  representativeness_image: number;
  representativeness_mechanics: number;
  idea_attribution?: "own" | "ai" | "mixed";
  free_text?: string;
}

export interface AttemptDoc {
  attempt_id: string;
  session_id: string;
  status: string;
  adaptation: string;
  spec: CardSpecBody;
  params: GenParamsBody & { seed: number };
  image_cfg: ImageCfgBody & { seed: number };
  card: CardDoc;
  lint: LintReport;
  repair_count: number;
  timings?: { stages_ms: Record<string, number>; backend_ms: number; overhead_ms: number };
  rating: (RatingBody & { rated_at?: string }) | null;
}

export interface SessionDoc {
  session_id: string;
  status: "active" | "finalized" | "abandoned";
  attempt_ids: string[];
  attempts?: AttemptDoc[];
}

export interface GenerationErrorDetail {
  error: string;
  attempt_id?: string;
  status?: string;
  mech_attempts?: { raw_completion: string; issues: string[] }[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly httpStatus: number,
    public readonly detail: GenerationErrorDetail | string | null,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StudioApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail: GenerationErrorDetail | string | null = null;
      try {
        const payload = await response.json();
        detail = payload.detail ?? payload;
      } catch {
        // non-JSON error body; keep detail null
      }
      const message =
        typeof detail === "object" && detail !== null && "error" in detail
          ? (detail as GenerationErrorDetail).error
          : `${method} ${path} failed with HTTP ${response.status}`;
      throw new ApiError(message, response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(): Promise<SessionDoc> {
    return this.request("POST", "/sessions", {});
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  submitAttempt(sessionId: string, body: AttemptRequest): Promise<AttemptDoc> {
    return this.request("POST", `/sessions/${sessionId}/attempts`, body);
  }

  getAttempt(attemptId: string): Promise<AttemptDoc> {
    return this.request("GET", `/attempts/${attemptId}`);
  }

  postRating(attemptId: string, rating: RatingBody): Promise<RatingBody> {
    return this.request("POST", `/attempts/${attemptId}/rating`, rating);
  }

  finalizeSession(sessionId: string, status: "finalized" | "abandoned"): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/finalize`, { status });
  }

  ratingStats(): Promise<Record<string, unknown>> {
    return this.request("GET", "/stats/ratings");
  }

  cardPngUrl(attemptId: string): string {
    return `${this.baseUrl}/attempts/${attemptId}/card.png`;
  }

  artPngUrl(attemptId: string): string {
    return `${this.baseUrl}/attempts/${attemptId}/art.png`;
  }
}
