// DOM layer: renders the studio and wires user actions to the API client.
// Every adaptation path from the iteration workflow is a distinct control:
// editing the prompt form, the regenerate button, the parameter panel, the
// "new idea" button, the per-attempt touch-up upload, and abandoning the
// session from the header.

import { ApiError, StudioApi } from "./api.js";
import type { AttemptDoc, AttemptRequest, RatingBody } from "./api.js";
import {
  ENERGY_TYPES,
  buildAttemptBody,
  defaultParams,
  diffCards,
  fileToBase64,
  freshSeed,
  initialState,
  lintBadge,
  regenerationBody,
  validateForm,
} from "./state.js";
import type { FormState, ParamState, StudioState } from "./state.js";

const PROGRESS_STAGES = ["retrieval", "mechanics", "artwork", "synthesis"] as const;

const SHELL = `
<header class="topbar">
  <h1>cardforge studio</h1>
  <span id="session-label" class="session-label">no session</span>
  <span class="spacer"></span>
  <button id="finalize-button" title="lock this session as done">Finalize</button>
  <button id="abandon-button" class="danger" title="give up on this session">Abandon</button>
</header>
<div id="session-banner" class="banner hidden"></div>

<main class="columns">
  <section class="panel" id="form-panel">
    <h2>Card idea</h2>
    <label>Name <input id="name-input" maxlength="30" placeholder="Voltail"></label>
    <label>Dex entry
      <textarea id="dex-input" rows="4"
        placeholder="It naps inside transformer boxes..."></textarea>
    </label>
    <fieldset id="type-select"><legend>Type (pick 1-2)</legend></fieldset>
    <div id="form-errors" class="form-errors"></div>
    <div class="actions">
      <button id="submit-button" class="primary">Generate</button>
      <button id="regenerate-button" title="try again, changing only the seed">Regenerate</button>
      <button id="new-idea-button" title="start over with a different concept">New idea</button>
    </div>

    <details id="param-panel">
      <summary>Parameters</summary>
      <label>Temperature <input id="temperature-input" type="number" step="0.1" min="0" max="2"></label>
      <label>Reference cards (k) <input id="k-input" type="number" min="1" max="10"></label>
      <label>Seed
        <span class="seed-row">
          <input id="seed-input" type="number" min="0">
          <button id="seed-copy" title="copy seed">copy</button>
          <button id="seed-new" title="draw a fresh seed">new</button>
        </span>
      </label>
      <label>CFG <input id="cfg-input" type="number" step="0.5" min="1" max="20"></label>
      <label>Steps <input id="steps-input" type="number" min="1" max="100"></label>
      <div id="lora-rows"></div>
      <button id="lora-add">Add LoRA</button>
    </details>

    <div id="progress" class="progress hidden">
      ${PROGRESS_STAGES.map((s) => `<span class="stage" data-stage="${s}">${s}</span>`).join(" → ")}
    </div>
    <div id="error-panel" class="error-panel hidden">
      <div id="error-message"></div>
      <pre id="error-logs"></pre>
      <button id="error-retry">Try again</button>
    </div>
  </section>

  <section class="panel" id="gallery-panel">
    <h2>Attempts</h2>
    <div id="gallery" class="gallery"></div>
  </section>

  <section class="panel" id="detail-panel">
    <h2>Compare</h2>
    <div id="compare-pane" class="compare-pane">
      <p class="hint">Select two attempts to compare.</p>
    </div>
    <h2>Rate attempt</h2>
    <form id="rating-form" class="rating-form">
      <input type="hidden" id="rating-attempt-id">
      <div id="rating-target" class="hint">Pick an attempt in the gallery.</div>
      <label>Visual aesthetics <input type="range" id="rate-aesthetics" min="1" max="5" value="3">
        <output id="out-aesthetics">3</output></label>
      <label>Image representativeness <input type="range" id="rate-image" min="1" max="5" value="3">
        <output id="out-image">3</output></label>
      <label>Mechanics representativeness <input type="range" id="rate-mechanics" min="1" max="5" value="3">
        <output id="out-mechanics">3</output></label>
      <label>Whose idea is it?
        <select id="rate-attribution">
          <option value="">(unsaid)</option>
          <option value="own">my own idea</option>
          <option value="ai">the model's idea</option>
          <option value="mixed">mixed</option>
        </select>
      </label>
      <label>Remarks <textarea id="rate-free-text" rows="2"></textarea></label>
      <button id="rating-submit" class="primary">Save rating</button>
    </form>
  </section>
</main>
`;

export class Studio {
  readonly state: StudioState = initialState();
  readonly params: ParamState = defaultParams();
  private progressTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: StudioApi,
  ) {
    root.innerHTML = SHELL;
    this.renderTypeChoices();
    this.bindForm();
    this.bindParams();
    this.bindActions();
    this.syncParamInputs();
  }

  // -- element helpers ---------------------------------------------------

  private el<T extends HTMLElement>(selector: string): T {
    const found = this.root.querySelector<T>(selector);
    if (!found) throw new Error(`missing element ${selector}`);
    return found;
  }

  private renderTypeChoices(): void {
    const fieldset = this.el<HTMLFieldSetElement>("#type-select");
    for (const t of ENERGY_TYPES) {
      const label = document.createElement("label");
      label.className = "type-choice";
      const box = document.createElement("input");
      box.type = "checkbox";
      box.value = t;
      box.addEventListener("change", () => {
        const checked = fieldset.querySelectorAll<HTMLInputElement>("input:checked");
        if (checked.length > 2) box.checked = false;
      });
      label.append(box, document.createTextNode(t));
      fieldset.append(label);
    }
  }

  private bindForm(): void {
    for (const pair of [["#rate-aesthetics", "#out-aesthetics"],
                        ["#rate-image", "#out-image"],
                        ["#rate-mechanics", "#out-mechanics"]] as const) {
      const slider = this.el<HTMLInputElement>(pair[0]);
      const output = this.el<HTMLOutputElement>(pair[1]);
      slider.addEventListener("input", () => { output.value = slider.value; });
    }
  }

  private bindParams(): void {
    this.el("#seed-new").addEventListener("click", (e) => {
      e.preventDefault();
      this.params.seed = freshSeed();
      this.syncParamInputs();
    });
    this.el("#seed-copy").addEventListener("click", async (e) => {
      e.preventDefault();
      const seed = String(this.params.seed);
      if (navigator.clipboard?.writeText) {
        await navigator.clipboard.writeText(seed);
      } else {
        const input = this.el<HTMLInputElement>("#seed-input");
        input.select?.();
      }
    });
    this.el("#lora-add").addEventListener("click", (e) => {
      e.preventDefault();
      this.params.loras.push({ name: "", strength: 1.0 });
      this.renderLoraRows();
    });
  }

  private bindActions(): void {
    this.el("#submit-button").addEventListener("click", (e) => {
      e.preventDefault();
      void this.submit();
    });
    this.el("#regenerate-button").addEventListener("click", (e) => {
      e.preventDefault();
      void this.regenerate();
    });
    this.el("#new-idea-button").addEventListener("click", (e) => {
      e.preventDefault();
      this.newIdea();
    });
    this.el("#error-retry").addEventListener("click", (e) => {
      e.preventDefault();
      void this.regenerate();
    });
    this.el("#finalize-button").addEventListener("click", (e) => {
      e.preventDefault();
      void this.finalizeSession("finalized");
    });
    this.el("#abandon-button").addEventListener("click", (e) => {
      e.preventDefault();
      void this.finalizeSession("abandoned");
    });
    this.el("#rating-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitRating();
    });
    this.el("#rating-submit").addEventListener("click", (e) => {
      e.preventDefault();
      void this.submitRating();
    });
  }

  // -- form <-> state ------------------------------------------------------

  readForm(): FormState {
    const boxes = this.root.querySelectorAll<HTMLInputElement>("#type-select input:checked");
    return {
      name: this.el<HTMLInputElement>("#name-input").value,
      dexEntry: this.el<HTMLTextAreaElement>("#dex-input").value,
      types: [...boxes].map((b) => b.value),
    };
  }

  readParams(): ParamState {
    this.params.temperature = Number(this.el<HTMLInputElement>("#temperature-input").value);
    this.params.retrievalK = Number(this.el<HTMLInputElement>("#k-input").value);
    this.params.seed = Number(this.el<HTMLInputElement>("#seed-input").value);
    this.params.cfg = Number(this.el<HTMLInputElement>("#cfg-input").value);
    this.params.steps = Number(this.el<HTMLInputElement>("#steps-input").value);
    return this.params;
  }

  private syncParamInputs(): void {
    this.el<HTMLInputElement>("#temperature-input").value = String(this.params.temperature);
    this.el<HTMLInputElement>("#k-input").value = String(this.params.retrievalK);
    this.el<HTMLInputElement>("#seed-input").value = String(this.params.seed);
    this.el<HTMLInputElement>("#cfg-input").value = String(this.params.cfg);
    this.el<HTMLInputElement>("#steps-input").value = String(this.params.steps);
    this.renderLoraRows();
  }

  private renderLoraRows(): void {
    const container = this.el("#lora-rows");
    container.innerHTML = "";
    this.params.loras.forEach((lora, i) => {
      const row = document.createElement("div");
      row.className = "lora-row";
      const name = document.createElement("input");
      name.placeholder = "style.safetensors";
      name.value = lora.name;
      name.addEventListener("input", () => { lora.name = name.value; });
      const strength = document.createElement("input");
      strength.type = "number";
      strength.min = "0";
      strength.max = "2";
      strength.step = "0.1";
      strength.value = String(lora.strength);
      strength.addEventListener("input", () => { lora.strength = Number(strength.value); });
      const remove = document.createElement("button");
      remove.textContent = "×";
      remove.addEventListener("click", (e) => {
        e.preventDefault();
        this.params.loras.splice(i, 1);
        this.renderLoraRows();
      });
      row.append(name, strength, remove);
      container.append(row);
    });
  }

  // -- session + attempts --------------------------------------------------

  async ensureSession(): Promise<string> {
    if (this.state.sessionId) return this.state.sessionId;
    const session = await this.api.createSession();
    this.state.sessionId = session.session_id;
    this.el("#session-label").textContent = session.session_id;
    return session.session_id;
  }

  async submit(declared?: "manual_touchup", artworkB64?: string): Promise<AttemptDoc | null> {
    const form = this.readForm();
    const problems = validateForm(form);
    this.el("#form-errors").textContent = problems.join("; ");
    if (problems.length > 0) return null;

    const body = buildAttemptBody(
      form, this.readParams(),
      declared ?? this.state.nextDeclared ?? undefined,
      artworkB64,
    );
    const attempt = await this.runAttempt(body);
    if (attempt) this.state.nextDeclared = null;
    return attempt;
  }

  /** Re-run the previous request, changing only the seeds. */
  async regenerate(): Promise<AttemptDoc | null> {
    if (!this.state.lastBody) return this.submit();
    const body = regenerationBody(this.state.lastBody);
    this.params.seed = body.params.seed;
    this.syncParamInputs();
    return this.runAttempt(body);
  }

  /** Fork to a fresh concept: clears the form; the next submit is declared. */
  newIdea(): void {
    this.el<HTMLInputElement>("#name-input").value = "";
    this.el<HTMLTextAreaElement>("#dex-input").value = "";
    for (const box of this.root.querySelectorAll<HTMLInputElement>("#type-select input")) {
      box.checked = false;
    }
    this.state.nextDeclared = "idea_change";
    this.el("#form-errors").textContent = "";
  }

  async uploadTouchup(attempt: AttemptDoc, file: Blob): Promise<AttemptDoc | null> {
    const artworkB64 = await fileToBase64(file);
    this.fillFormFrom(attempt);
    return this.submit("manual_touchup", artworkB64);
  }

  private fillFormFrom(attempt: AttemptDoc): void {
    this.el<HTMLInputElement>("#name-input").value = attempt.spec.name;
    this.el<HTMLTextAreaElement>("#dex-input").value = attempt.spec.flavorText;
    for (const box of this.root.querySelectorAll<HTMLInputElement>("#type-select input")) {
      box.checked = attempt.spec.types.includes(box.value);
    }
  }

  private async runAttempt(body: AttemptRequest): Promise<AttemptDoc | null> {
    if (this.state.busy) return null;
    this.state.busy = true;
    this.showProgress();
    this.el("#error-panel").classList.add("hidden");
    try {
      const sessionId = await this.ensureSession();
      const attempt = await this.api.submitAttempt(sessionId, body);
      this.state.lastBody = body;
      this.state.attempts.push(attempt);
      this.renderGallery();
      return attempt;
    } catch (err) {
      this.showError(err);
      return null;
    } finally {
      this.state.busy = false;
      this.hideProgress();
    }
  }

  private showProgress(): void {
    const progress = this.el("#progress");
    progress.classList.remove("hidden");
    const stages = [...progress.querySelectorAll<HTMLElement>(".stage")];
    let index = 0;
    stages.forEach((s) => s.classList.remove("active"));
    stages[0]?.classList.add("active");
    this.state.stage = PROGRESS_STAGES[0];
    this.progressTimer = setInterval(() => {
      index = Math.min(index + 1, stages.length - 1);
      stages.forEach((s, i) => s.classList.toggle("active", i === index));
      this.state.stage = PROGRESS_STAGES[index];
    }, 500);
  }

  private hideProgress(): void {
    if (this.progressTimer) clearInterval(this.progressTimer);
    this.progressTimer = null;
    this.state.stage = null;
    this.el("#progress").classList.add("hidden");
  }

  private showError(err: unknown): void {
    const panel = this.el("#error-panel");
    panel.classList.remove("hidden");
    if (err instanceof ApiError) {
      this.el("#error-message").textContent = err.message;
      const detail = typeof err.detail === "object" ? err.detail : null;
      const logs = detail?.mech_attempts
        ?.map((a, i) => `attempt ${i + 1}: ${a.issues.join("; ")}`)
        .join("\n");
      this.el("#error-logs").textContent = logs ?? "";
    } else {
      this.el("#error-message").textContent = String(err);
      this.el("#error-logs").textContent = "";
    }
  }

  // -- gallery ---------------------------------------------------------------

  renderGallery(): void {
    const gallery = this.el("#gallery");
    gallery.innerHTML = "";
    for (const attempt of this.state.attempts) {
      gallery.append(this.renderTile(attempt));
    }
    this.renderCompare();
  }

  private renderTile(attempt: AttemptDoc): HTMLElement {
    const tile = document.createElement("article");
    tile.className = "tile";
    tile.dataset.attemptId = attempt.attempt_id;

    const img = document.createElement("img");
    img.src = this.api.cardPngUrl(attempt.attempt_id);
    img.alt = `${attempt.card.name} card`;
    tile.append(img);

    const title = document.createElement("div");
    title.className = "tile-title";
    title.textContent = `${attempt.card.name} · ${attempt.card.hp} HP`;
    tile.append(title);

    const badges = document.createElement("div");
    badges.className = "badges";
    const adaptation = document.createElement("span");
    adaptation.className = `badge adaptation-${attempt.adaptation}`;
    adaptation.textContent = attempt.adaptation;
    badges.append(adaptation);
    const lint = lintBadge(attempt);
    const lintEl = document.createElement("span");
    lintEl.className = `badge lint-${lint.kind}`;
    lintEl.textContent = lint.label;
    badges.append(lintEl);
    tile.append(badges);

    const seedRow = document.createElement("div");
    seedRow.className = "seed";
    seedRow.textContent = `seed ${attempt.params.seed}`;
    const copy = document.createElement("button");
    copy.textContent = "copy";
    copy.className = "copy-seed";
    copy.addEventListener("click", async () => {
      if (navigator.clipboard?.writeText) {
        await navigator.clipboard.writeText(String(attempt.params.seed));
      }
    });
    seedRow.append(copy);
    tile.append(seedRow);

    if (attempt.rating) {
      const chips = document.createElement("div");
      chips.className = "rating-chips";
      chips.textContent =
        `★ ${attempt.rating.aesthetics}/${attempt.rating.representativeness_image}` +
        `/${attempt.rating.representativeness_mechanics}` +
        (attempt.rating.idea_attribution ? ` · ${attempt.rating.idea_attribution}` : "");
      tile.append(chips);
    }

    const controls = document.createElement("div");
    controls.className = "tile-controls";

    const compare = document.createElement("label");
    compare.className = "compare-toggle";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = this.state.compare.includes(attempt.attempt_id);
    box.addEventListener("change", () => this.toggleCompare(attempt.attempt_id));
    compare.append(box, document.createTextNode("compare"));
    controls.append(compare);

    const rate = document.createElement("button");
    rate.textContent = "rate";
    rate.className = "rate-button";
    rate.addEventListener("click", () => this.pickForRating(attempt));
    controls.append(rate);

    const touchup = document.createElement("label");
    touchup.className = "touchup";
    touchup.textContent = "touch up";
    const file = document.createElement("input");
    file.type = "file";
    file.accept = "image/png";
    file.className = "touchup-input";
    file.addEventListener("change", () => {
      const chosen = file.files?.[0];
      if (chosen) void this.uploadTouchup(attempt, chosen);
    });
    touchup.append(file);
    controls.append(touchup);

    tile.append(controls);
    return tile;
  }

  // -- comparison -------------------------------------------------------------

  toggleCompare(attemptId: string): void {
    const index = this.state.compare.indexOf(attemptId);
    if (index >= 0) {
      this.state.compare.splice(index, 1);
    } else {
      this.state.compare.push(attemptId);
      if (this.state.compare.length > 2) this.state.compare.shift();
    }
    this.renderGallery();
  }

  private renderCompare(): void {
    const pane = this.el("#compare-pane");
    if (this.state.compare.length !== 2) {
      pane.innerHTML = '<p class="hint">Select two attempts to compare.</p>';
      return;
    }
    const [a, b] = this.state.compare.map(
      (id) => this.state.attempts.find((x) => x.attempt_id === id)!,
    );
    const changed = diffCards(a.card, b.card);
    pane.innerHTML = "";
    const table = document.createElement("table");
    table.className = "diff-table";
    const header = document.createElement("tr");
    header.innerHTML = `<th>field</th><th>${a.attempt_id.slice(-8)}</th><th>${b.attempt_id.slice(-8)}</th>`;
    table.append(header);
    for (const [field, isChanged] of Object.entries(changed)) {
      const row = document.createElement("tr");
      row.dataset.field = field;
      row.className = isChanged ? "diff-changed" : "diff-same";
      const value = (card: typeof a.card) =>
        JSON.stringify(card[field as keyof typeof card] ?? null);
      row.innerHTML =
        `<td>${field}</td><td>${value(a.card)}</td><td>${value(b.card)}</td>`;
      table.append(row);
    }
    pane.append(table);
  }

  // -- rating + finalize --------------------------------------------------------

  pickForRating(attempt: AttemptDoc): void {
    this.el<HTMLInputElement>("#rating-attempt-id").value = attempt.attempt_id;
    this.el("#rating-target").textContent =
      `Rating ${attempt.card.name} (${attempt.attempt_id.slice(-8)})`;
  }

  async submitRating(): Promise<void> {
    const attemptId = this.el<HTMLInputElement>("#rating-attempt-id").value;
    if (!attemptId) return;
    const rating: RatingBody = {
      aesthetics: Number(this.el<HTMLInputElement>("#rate-aesthetics").value),
      representativeness_image: Number(this.el<HTMLInputElement>("#rate-image").value),
      representativeness_mechanics: Number(this.el<HTMLInputElement>("#rate-mechanics").value),
    };
    const attribution = this.el<HTMLSelectElement>("#rate-attribution").value;
    if (attribution) rating.idea_attribution = attribution as RatingBody["idea_attribution"];
    const freeText = this.el<HTMLTextAreaElement>("#rate-free-text").value.trim();
    if (freeText) rating.free_text = freeText;
    const stored = await this.api.postRating(attemptId, rating);
    const attempt = this.state.attempts.find((a) => a.attempt_id === attemptId);
    if (attempt) attempt.rating = stored;
    this.renderGallery();
  }

  async finalizeSession(status: "finalized" | "abandoned"): Promise<void> {
    if (!this.state.sessionId) return;
    const session = await this.api.finalizeSession(this.state.sessionId, status);
    this.state.sessionStatus = session.status;
    const banner = this.el("#session-banner");
    banner.classList.remove("hidden");
    banner.textContent = status === "abandoned"
      ? "Session abandoned. Start a new idea whenever you are ready."
      : "Session finalized. The cards above are locked in.";
    for (const selector of ["#submit-button", "#regenerate-button"]) {
      this.el<HTMLButtonElement>(selector).disabled = true;
    }
  }
}

export function wireStudio(root: HTMLElement, api: StudioApi): Studio {
  return new Studio(root, api);
}
