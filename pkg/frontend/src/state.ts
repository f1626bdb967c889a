// Studio state and the pure logic behind it: form validation mirroring the
// server's card-spec invariants, request construction (the form round-trips
// to exactly the spec/params JSON the API receives), seed handling, and the
// field diff for the comparison pane.

import type {
  AttemptDoc,
  AttemptRequest,
  CardDoc,
  ImageCfgBody,
  LoraSpec,
} from "./api.js";

export const ENERGY_TYPES = [
  "Grass", "Fire", "Water", "Lightning", "Psychic", "Fighting",
  "Darkness", "Metal", "Fairy", "Dragon", "Colorless",
] as const;

export interface FormState {
  name: string;
  dexEntry: string;
  types: string[];
}

export interface ParamState {
  temperature: number;
  retrievalK: number;
  seed: number;
  cfg: number;
  steps: number;
  loras: LoraSpec[];
}

export function defaultParams(): ParamState {
  return {
    temperature: 0.7,
    retrievalK: 5,
    seed: freshSeed(),
    cfg: 3.5,
    steps: 28,
    loras: [],
  };
}

export function freshSeed(): number {
  if (typeof crypto !== "undefined" && crypto.getRandomValues) {
    const buf = new Uint32Array(1);
    crypto.getRandomValues(buf);
    return buf[0];
  }
  return Math.floor(Math.random() * 0xffffffff);
}

/** Client-side mirror of the server's CardSpec invariants. */
export function validateForm(form: FormState): string[] {
  const problems: string[] = [];
  const name = form.name.trim();
  const dex = form.dexEntry.trim().replace(/\s+/g, " ");
  if (name.length < 1 || name.length > 30) {
    problems.push("name must be 1-30 characters");
  }
  if ([...name].some((c) => c.charCodeAt(0) < 0x20)) {
    problems.push("name must not contain control characters");
  }
  if (dex.length < 10 || dex.length > 400) {
    problems.push("dex entry must be 10-400 characters");
  }
  if (form.types.length < 1 || form.types.length > 2) {
    problems.push("pick one or two energy types");
  }
  for (const t of form.types) {
    if (!ENERGY_TYPES.includes(t as (typeof ENERGY_TYPES)[number])) {
      problems.push(`unknown energy type: ${t}`);
    }
  }
  return problems;
}

export function buildAttemptBody(
  form: FormState,
  params: ParamState,
  declared?: "idea_change" | "manual_touchup",
  artworkB64?: string,
): AttemptRequest {
  const imageCfg: ImageCfgBody = {
    seed: params.seed,
    cfg: params.cfg,
    steps: params.steps,
  };
  if (params.loras.length > 0) {
    imageCfg.loras = params.loras;
  }
  const body: AttemptRequest = {
    spec: {
      name: form.name.trim(),
      flavorText: form.dexEntry.trim().replace(/\s+/g, " "),
      types: [...form.types],
    },
    params: {
      seed: params.seed,
      temperature: params.temperature,
      retrieval_k: params.retrievalK,
    },
    image_cfg: imageCfg,
  };
  if (declared) {
    body.adaptation = declared;
  }
  if (artworkB64) {
    body.artwork_override_b64 = artworkB64;
  }
  return body;
}

/** A retry of the same request differing only in its seeds. */
export function regenerationBody(last: AttemptRequest): AttemptRequest {
  const seed = freshSeed();
  const copy: AttemptRequest = JSON.parse(JSON.stringify(last));
  delete copy.adaptation;
  delete copy.artwork_override_b64;
  copy.params.seed = seed;
  copy.image_cfg.seed = seed;
  return copy;
}

const CARD_FIELDS: (keyof CardDoc)[] = [
  "name", "flavorText", "types", "hp", "abilities", "attacks",
  "weaknesses", "resistances", "retreatCost",
];

/** Field-level diff between two cards, for the comparison pane. */
export function diffCards(a: CardDoc, b: CardDoc): Record<string, boolean> {
  const changed: Record<string, boolean> = {};
  for (const field of CARD_FIELDS) {
    changed[field] = JSON.stringify(a[field]) !== JSON.stringify(b[field]);
  }
  return changed;
}

export function lintBadge(attempt: AttemptDoc): { label: string; kind: string } {
  const errors = attempt.lint.findings.filter((f) => f.severity === "error").length;
  const warnings = attempt.lint.findings.filter((f) => f.severity === "warning").length;
  if (errors > 0) return { label: `lint: ${errors} error${errors > 1 ? "s" : ""}`, kind: "error" };
  if (warnings > 0) return { label: `lint: ${warnings} warning${warnings > 1 ? "s" : ""}`, kind: "warning" };
  return { label: "lint: clean", kind: "clean" };
}

export interface StudioState {
  sessionId: string | null;
  sessionStatus: "active" | "finalized" | "abandoned";
  attempts: AttemptDoc[];
  lastBody: AttemptRequest | null;
  nextDeclared: "idea_change" | null;
  compare: string[];
  busy: boolean;
  stage: string | null;
}

export function initialState(): StudioState {
  return {
    sessionId: null,
    sessionStatus: "active",
    attempts: [],
    lastBody: null,
    nextDeclared: null,
    compare: [],
    busy: false,
    stage: null,
  };
}

export async function fileToBase64(file: Blob): Promise<string> {
  if (typeof file.arrayBuffer === "function") {
    const bytes = new Uint8Array(await file.arrayBuffer());
    let binary = "";
    const chunk = 0x8000;
    for (let i = 0; i < bytes.length; i += chunk) {
      binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
    }
    return btoa(binary);
  }
  // older DOM implementations only expose Blob contents via FileReader
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const dataUrl = String(reader.result);
      resolve(dataUrl.slice(dataUrl.indexOf(",") + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}
